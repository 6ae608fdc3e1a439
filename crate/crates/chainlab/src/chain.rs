//! Chain parameters, states on the zero-mean manifold, potentials and
//! equations of motion.
//!
//! Everything works natively in `(p, r)` coordinates, where `r_j` is the
//! relative displacement of neighbors `j` and `j+1` on the periodic ring; the
//! absolute coordinates are reconstructed only inside the integrator. All
//! site indices are 0-based and reduced mod `n`.

use serde::{Deserialize, Serialize};

use crate::{Error, Result};

/// Nearest-neighbor interaction of the chain.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Model {
    /// Quartic chain: V(x) = x²/2 − x³/6 + χ·x⁴/24.
    Fput,
    /// Exponential chain: V(x) = e^{−x} + x − 1.
    Toda,
    /// Pure harmonic chain V(x) = x²/2; used for integrator and sampler
    /// validation where the exact normal-mode solution is available.
    Harmonic,
}

/// Static description of a chain ensemble member.
#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
pub struct ChainParams {
    pub n: usize,
    pub beta: f64,
    pub chi: f64,
    pub model: Model,
}

impl ChainParams {
    pub fn new(n: usize, beta: f64, chi: f64, model: Model) -> Result<Self> {
        if n < 4 {
            return Err(Error::InvalidParams(format!("n = {n} < 4")));
        }
        if !(beta > 0.0) {
            return Err(Error::InvalidParams(format!("beta = {beta} must be > 0")));
        }
        if !(chi >= 0.0) {
            return Err(Error::InvalidParams(format!("chi = {chi} must be >= 0")));
        }
        Ok(Self { n, beta, chi, model })
    }

    /// Particle count must exceed twice the order of any conserved quantity
    /// evaluated on it.
    pub fn supports_order(&self, m: usize) -> bool {
        self.n > 2 * m
    }
}

/// Phase-space point on the manifold Σp = Σr = 0.
#[derive(Debug, Clone, PartialEq)]
pub struct ChainState {
    pub p: Vec<f64>,
    pub r: Vec<f64>,
}

/// Tolerance for the zero-mean constraints: rounding accumulated over n sums.
pub fn constraint_tol(n: usize) -> f64 {
    1e-10 * n as f64
}

impl ChainState {
    /// Build a state, verifying both zero-sum constraints.
    pub fn new(p: Vec<f64>, r: Vec<f64>) -> Result<Self> {
        if p.len() != r.len() || p.is_empty() {
            return Err(Error::InvalidParams(format!(
                "p and r must have equal nonzero length, got {} and {}",
                p.len(),
                r.len()
            )));
        }
        let tol = constraint_tol(p.len());
        let sp: f64 = p.iter().sum();
        let sr: f64 = r.iter().sum();
        if sp.abs() > tol || sr.abs() > tol {
            return Err(Error::ConstraintViolation(format!(
                "|Σp| = {:.3e}, |Σr| = {:.3e}, tol = {:.3e}",
                sp.abs(),
                sr.abs(),
                tol
            )));
        }
        if !p.iter().chain(r.iter()).all(|x| x.is_finite()) {
            return Err(Error::NonFinite("chain state".into()));
        }
        Ok(Self { p, r })
    }

    /// Zero state (equilibrium fixed point of both models).
    pub fn zero(n: usize) -> Self {
        Self { p: vec![0.0; n], r: vec![0.0; n] }
    }

    /// Center both components exactly on the manifold (subtract means).
    pub fn project(mut p: Vec<f64>, mut r: Vec<f64>) -> Self {
        let n = p.len() as f64;
        let mp: f64 = p.iter().sum::<f64>() / n;
        let mr: f64 = r.iter().sum::<f64>() / n;
        for x in &mut p {
            *x -= mp;
        }
        for x in &mut r {
            *x -= mr;
        }
        Self { p, r }
    }

    pub fn len(&self) -> usize {
        self.p.len()
    }

    pub fn is_empty(&self) -> bool {
        self.p.is_empty()
    }

    /// Cyclic shift by `l`: output site j holds input site (j + l) mod n.
    pub fn shifted(&self, l: usize) -> Self {
        let n = self.len();
        let mut p = vec![0.0; n];
        let mut r = vec![0.0; n];
        for j in 0..n {
            p[j] = self.p[(j + l) % n];
            r[j] = self.r[(j + l) % n];
        }
        Self { p, r }
    }
}

/// On-site potential V(x) for the given model.
pub fn potential(x: f64, model: Model, chi: f64) -> f64 {
    match model {
        Model::Fput => {
            let x2 = x * x;
            0.5 * x2 - x2 * x / 6.0 + chi * x2 * x2 / 24.0
        }
        Model::Toda => (-x).exp() + x - 1.0,
        Model::Harmonic => 0.5 * x * x,
    }
}

/// V'(x).
pub fn dpotential(x: f64, model: Model, chi: f64) -> f64 {
    match model {
        Model::Fput => x - 0.5 * x * x + chi * x * x * x / 6.0,
        Model::Toda => 1.0 - (-x).exp(),
        Model::Harmonic => x,
    }
}

/// V''(x).
pub fn ddpotential(x: f64, model: Model, chi: f64) -> f64 {
    match model {
        Model::Fput => 1.0 - x + 0.5 * chi * x * x,
        Model::Toda => (-x).exp(),
        Model::Harmonic => 1.0,
    }
}

/// Total energy Σ p²/2 + Σ V(r).
pub fn hamiltonian(state: &ChainState, params: &ChainParams) -> f64 {
    let kin: f64 = state.p.iter().map(|p| 0.5 * p * p).sum();
    let pot: f64 = state
        .r
        .iter()
        .map(|&r| potential(r, params.model, params.chi))
        .sum();
    kin + pot
}

/// Right-hand side of the equations of motion in `(p, r)` coordinates:
/// dr_j = p_{j+1} − p_j and dp_j = V'(r_j) − V'(r_{j−1}).
///
/// Both outputs telescope to zero, so the flow is tangent to the manifold.
pub fn eom_rhs(state: &ChainState, params: &ChainParams) -> (Vec<f64>, Vec<f64>) {
    let n = state.len();
    let mut dp = vec![0.0; n];
    let mut dr = vec![0.0; n];
    let dv: Vec<f64> = state
        .r
        .iter()
        .map(|&r| dpotential(r, params.model, params.chi))
        .collect();
    for j in 0..n {
        dr[j] = state.p[(j + 1) % n] - state.p[j];
        dp[j] = dv[j] - dv[(j + n - 1) % n];
    }
    (dp, dr)
}
