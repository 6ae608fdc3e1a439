//! Symplectic time integration of the chain flows on the constrained
//! manifold.
//!
//! Steps are taken in canonical coordinates (q, p) with the gauge q_0 = 0;
//! relative displacements are re-derived at checkpoints, where the periodic
//! differences telescope to an exactly zero sum. The kick–drift–kick leapfrog
//! is the base scheme; the fourth-order scheme is its standard three-fold
//! composition with one negative substep.

use serde::{Deserialize, Serialize};

use crate::chain::{dpotential, ChainParams, ChainState};
use crate::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Scheme {
    Leapfrog2,
    Yoshida4,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct IntegratorConfig {
    pub dt: f64,
    pub scheme: Scheme,
    /// Output times, strictly increasing and nonnegative.
    pub checkpoints: Vec<f64>,
}

/// Steps between re-centerings of the momentum mean.
const RECENTER_EVERY: u64 = 10_000;

/// Abort threshold on the re-centering correction.
const RECENTER_ABORT: f64 = 1e-6;

impl IntegratorConfig {
    pub fn new(dt: f64, scheme: Scheme, checkpoints: Vec<f64>) -> Result<Self> {
        if !(dt > 0.0) || !dt.is_finite() {
            return Err(Error::InvalidParams(format!("dt = {dt} must be positive")));
        }
        for w in checkpoints.windows(2) {
            if w[1] <= w[0] {
                return Err(Error::InvalidParams("checkpoints must be strictly increasing".into()));
            }
        }
        if checkpoints.first().is_some_and(|&t| t < 0.0) {
            return Err(Error::InvalidParams("checkpoints must be nonnegative".into()));
        }
        Ok(Self { dt, scheme, checkpoints })
    }

    /// Step heuristic: mode frequencies are at most 2 and thermal amplitudes
    /// shrink like β^{-1/2}, so a step ∝ β^{-1/2} keeps the integrator error
    /// far below the statistical signals measured on top of it.
    pub fn default_dt(beta: f64) -> f64 {
        0.02 / beta.sqrt()
    }
}

struct Canonical {
    q: Vec<f64>,
    p: Vec<f64>,
    /// scratch buffer of V'(r_j)
    dv: Vec<f64>,
}

impl Canonical {
    fn from_state(state: &ChainState) -> Self {
        Self {
            q: crate::spectral::positions_from_relative(&state.r),
            p: state.p.clone(),
            dv: vec![0.0; state.len()],
        }
    }

    fn to_state(&self) -> ChainState {
        let n = self.q.len();
        let mut r = vec![0.0; n];
        for j in 0..n {
            r[j] = self.q[(j + 1) % n] - self.q[j];
        }
        ChainState { p: self.p.clone(), r }
    }

    fn kick(&mut self, dtk: f64, params: &ChainParams) {
        let n = self.q.len();
        for j in 0..n {
            let r = self.q[(j + 1) % n] - self.q[j];
            self.dv[j] = dpotential(r, params.model, params.chi);
        }
        for j in 0..n {
            self.p[j] += dtk * (self.dv[j] - self.dv[(j + n - 1) % n]);
        }
    }

    fn drift(&mut self, dtd: f64) {
        for (q, p) in self.q.iter_mut().zip(&self.p) {
            *q += dtd * p;
        }
    }

    fn step(&mut self, dt: f64, scheme: Scheme, params: &ChainParams) {
        match scheme {
            Scheme::Leapfrog2 => {
                self.kick(0.5 * dt, params);
                self.drift(dt);
                self.kick(0.5 * dt, params);
            }
            Scheme::Yoshida4 => {
                // composition coefficients, with adjacent kicks merged
                let cbrt2 = 2.0f64.cbrt();
                let w1 = 1.0 / (2.0 - cbrt2);
                let w0 = 1.0 - 2.0 * w1;
                self.kick(0.5 * w1 * dt, params);
                self.drift(w1 * dt);
                self.kick(0.5 * (w1 + w0) * dt, params);
                self.drift(w0 * dt);
                self.kick(0.5 * (w0 + w1) * dt, params);
                self.drift(w1 * dt);
                self.kick(0.5 * w1 * dt, params);
            }
        }
    }

    /// Subtract the momentum mean; returns the correction magnitude.
    fn recenter(&mut self) -> f64 {
        let n = self.p.len() as f64;
        let mean = self.p.iter().sum::<f64>() / n;
        for p in &mut self.p {
            *p -= mean;
        }
        mean.abs()
    }

    fn is_finite(&self) -> bool {
        self.q.iter().chain(self.p.iter()).all(|x| x.is_finite())
    }
}

/// One integrator step.
pub fn step(state: &ChainState, params: &ChainParams, cfg: &IntegratorConfig) -> Result<ChainState> {
    let mut c = Canonical::from_state(state);
    c.step(cfg.dt, cfg.scheme, params);
    if !c.is_finite() {
        return Err(Error::NonFinite(format!("trajectory after one step of dt = {}", cfg.dt)));
    }
    Ok(c.to_state())
}

/// Integrate through the checkpoint list, returning (t, state) pairs.
///
/// The number of steps between consecutive checkpoints is
/// round((t_{i+1} − t_i)/dt), so identical inputs produce identical outputs.
pub fn evolve(
    state: &ChainState,
    params: &ChainParams,
    cfg: &IntegratorConfig,
) -> Result<Vec<(f64, ChainState)>> {
    let mut out = Vec::with_capacity(cfg.checkpoints.len());
    let mut c = Canonical::from_state(state);
    let mut t_prev = 0.0f64;
    let mut steps_since_recenter: u64 = 0;
    for &t in &cfg.checkpoints {
        let nsteps = ((t - t_prev) / cfg.dt).round() as u64;
        for _ in 0..nsteps {
            c.step(cfg.dt, cfg.scheme, params);
            steps_since_recenter += 1;
            if steps_since_recenter == RECENTER_EVERY {
                steps_since_recenter = 0;
                if !c.is_finite() {
                    return Err(Error::NonFinite(format!("trajectory near t = {t}")));
                }
                let corr = c.recenter();
                log::trace!("recenter correction {corr:.3e} near t = {t}");
                if corr > RECENTER_ABORT {
                    return Err(Error::ConstraintViolation(format!(
                        "momentum mean drifted to {corr:.3e} near t = {t}"
                    )));
                }
            }
        }
        if !c.is_finite() {
            return Err(Error::NonFinite(format!("trajectory at checkpoint t = {t}")));
        }
        t_prev = t;
        out.push((t, c.to_state()));
    }
    Ok(out)
}

/// Flip momenta; conjugating forward evolution with this reverses the flow.
pub fn reverse(state: &ChainState) -> ChainState {
    ChainState { p: state.p.iter().map(|x| -x).collect(), r: state.r.clone() }
}
