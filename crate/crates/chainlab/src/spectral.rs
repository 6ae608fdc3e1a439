//! Discrete Hartley transform, harmonic normal modes, banded symmetric mode
//! packets, and the triangular decomposition of their quadratic forms onto
//! the quadratic parts of the conserved quantities.

use std::collections::HashMap;
use std::sync::{Arc, Mutex, OnceLock};

use rustfft::num_complex::Complex64;
use rustfft::{Fft, FftPlanner};

use crate::chain::ChainState;
use crate::lax::{quadratic_part, CirculantSpec};
use crate::{Error, Result};

/// Size threshold above which the FFT-backed transform is used.
const DIRECT_LIMIT: usize = 64;

/// Discrete Hartley transform: ŷ_j = n^{-1/2} Σ_k cas(2πjk/n) x_k with
/// cas = cos + sin. The transform is a real involution: applying it twice
/// returns the input.
pub fn hartley(x: &[f64]) -> Vec<f64> {
    let n = x.len();
    assert!(n >= 1, "hartley needs a nonempty vector");
    if n <= DIRECT_LIMIT {
        hartley_direct(x)
    } else {
        hartley_fft(x)
    }
}

/// Direct O(n²) evaluation from a cas table.
pub fn hartley_direct(x: &[f64]) -> Vec<f64> {
    let n = x.len();
    let scale = 1.0 / (n as f64).sqrt();
    let tau = 2.0 * std::f64::consts::PI / n as f64;
    let cas: Vec<f64> = (0..n)
        .map(|t| {
            let a = tau * t as f64;
            a.cos() + a.sin()
        })
        .collect();
    (0..n)
        .map(|j| {
            let mut acc = 0.0;
            for (k, &xk) in x.iter().enumerate() {
                acc += cas[(j * k) % n] * xk;
            }
            acc * scale
        })
        .collect()
}

fn fft_plan(n: usize) -> Arc<dyn Fft<f64>> {
    static PLANS: OnceLock<Mutex<HashMap<usize, Arc<dyn Fft<f64>>>>> = OnceLock::new();
    let plans = PLANS.get_or_init(|| Mutex::new(HashMap::new()));
    let mut guard = plans.lock().expect("fft plan cache poisoned");
    Arc::clone(
        guard
            .entry(n)
            .or_insert_with(|| FftPlanner::new().plan_fft_forward(n)),
    )
}

/// FFT route: cas transform = Re(F) − Im(F) of the unnormalized forward FFT.
pub fn hartley_fft(x: &[f64]) -> Vec<f64> {
    let n = x.len();
    let plan = fft_plan(n);
    let mut buf: Vec<Complex64> = x.iter().map(|&v| Complex64::new(v, 0.0)).collect();
    plan.process(&mut buf);
    let scale = 1.0 / (n as f64).sqrt();
    buf.iter().map(|c| (c.re - c.im) * scale).collect()
}

/// Harmonic dispersion ω_j = 2 sin(πj/n).
pub fn omega(j: usize, n: usize) -> f64 {
    2.0 * (std::f64::consts::PI * j as f64 / n as f64).sin()
}

/// Reconstruct absolute coordinates from relative displacements with the
/// gauge q_0 = 0.
pub fn positions_from_relative(r: &[f64]) -> Vec<f64> {
    let n = r.len();
    let mut q = vec![0.0; n];
    for j in 1..n {
        q[j] = q[j - 1] + r[j - 1];
    }
    q
}

/// Normal-mode energies E_j = (p̂_j² + ω_j² q̂_j²)/2 with E_0 = 0.
///
/// The zero mode carries only gauge content on the manifold (p̂_0 vanishes
/// and q̂_0 depends on the gauge), so it is excluded.
pub fn normal_modes(state: &ChainState) -> Vec<f64> {
    let n = state.len();
    let ph = hartley(&state.p);
    let qh = hartley(&positions_from_relative(&state.r));
    let mut e = vec![0.0; n];
    for j in 1..n {
        let w = omega(j, n);
        e[j] = 0.5 * (ph[j] * ph[j] + w * w * qh[j] * qh[j]);
    }
    e
}

/// Banded symmetric weight vector: g_k = g_{n−k} = y_k for 0 ≤ k ≤ m̃,
/// zero elsewhere. Parameterizes the mode packets Φ = Σ ĝ_j E_j.
#[derive(Debug, Clone)]
pub struct AdmissibleVector {
    pub m: usize,
    pub y: Vec<f64>,
    pub g: Vec<f64>,
}

/// Sanity bound on Σ|y|; outside it the vector is accepted but flagged.
pub const K_BOUND: f64 = 1e6;

impl AdmissibleVector {
    pub fn new(n: usize, m: usize, y: Vec<f64>) -> Result<Self> {
        let mt = m / 2;
        if y.len() != mt + 1 {
            return Err(Error::InvalidParams(format!(
                "order {m} needs {} band entries, got {}",
                mt + 1,
                y.len()
            )));
        }
        if n <= 2 * mt + 1 {
            return Err(Error::InvalidParams(format!("n = {n} too small for band {mt}")));
        }
        if !y.iter().all(|v| v.is_finite()) || y.iter().all(|&v| v == 0.0) {
            return Err(Error::InvalidParams("band must be finite and nonzero".into()));
        }
        let mut g = vec![0.0; n];
        for (k, &v) in y.iter().enumerate() {
            g[k] = v;
            if k > 0 {
                g[n - k] = v;
            }
        }
        Ok(Self { m, y, g })
    }

    /// True when Σ|y| sits inside [1/K, K]; advisory only.
    pub fn k_bound_satisfied(&self) -> bool {
        let s: f64 = self.y.iter().map(|v| v.abs()).sum();
        (1.0 / K_BOUND..=K_BOUND).contains(&s)
    }
}

/// Mode packet Φ = Σ_j ĝ_j E_j, evaluated through two independent routes
/// that must agree: mode space, and the physical two-point form
/// (2√n)^{-1} Σ_{j,l} g_l (p_j p_{j+l} + r_j r_{j+l}).
pub fn phi_observable(state: &ChainState, g: &AdmissibleVector) -> Result<f64> {
    let n = state.len();
    if g.g.len() != n {
        return Err(Error::InvalidParams("packet length does not match state".into()));
    }
    let gh = hartley(&g.g);
    let modes = normal_modes(state);
    let mode_route: f64 = (1..n).map(|j| gh[j] * modes[j]).sum();

    let mut phys = 0.0;
    for (l, &gl) in g.g.iter().enumerate() {
        if gl == 0.0 {
            continue;
        }
        let mut acc = 0.0;
        for j in 0..n {
            let jl = (j + l) % n;
            acc += state.p[j] * state.p[jl] + state.r[j] * state.r[jl];
        }
        phys += gl * acc;
    }
    let phys_route = phys / (2.0 * (n as f64).sqrt());

    let diff = (mode_route - phys_route).abs();
    if diff > 1e-10 * mode_route.abs().max(1.0) {
        return Err(Error::AssertionMismatch(format!(
            "packet routes disagree: mode {mode_route:.15e} vs physical {phys_route:.15e}"
        )));
    }
    Ok(mode_route)
}

/// Eigenvalues of a symmetric circulant: √n · Hartley(rep).
pub fn circulant_eigs(spec: &CirculantSpec) -> Result<Vec<f64>> {
    let defect = spec.evenness_defect();
    if defect > 1e-12 {
        return Err(Error::InvalidParams(format!(
            "circulant is not symmetric: evenness defect {defect:.3e}"
        )));
    }
    let n = spec.n() as f64;
    Ok(hartley(&spec.rep).into_iter().map(|v| v * n.sqrt()).collect())
}

/// Decompose a banded symmetric vector over the even-order quadratic parts:
/// find d with Σ_l d_l · rep^{(2l+2)} = g. The band matrix is upper
/// triangular with positive diagonal, so back-substitution is exact.
pub fn decompose_second(g: &AdmissibleVector, n: usize) -> Result<Vec<f64>> {
    let mt = g.m / 2;
    let reps: Vec<Vec<f64>> = (0..=mt)
        .map(|l| Ok(quadratic_part(2 * l + 2, n)?.rep().rep.clone()))
        .collect::<Result<_>>()?;
    let mut d = vec![0.0; mt + 1];
    for k in (0..=mt).rev() {
        let diag = reps[k][k];
        if diag <= 0.0 {
            return Err(Error::SingularSystem(format!(
                "order {} band entry {k} is {diag:.3e}",
                2 * k + 2
            )));
        }
        let mut rhs = g.y[k];
        for l in k + 1..=mt {
            rhs -= d[l] * reps[l][k];
        }
        d[k] = rhs / diag;
    }
    // residual over the full embedded vectors
    let mut recon = vec![0.0; n];
    for (l, c) in d.iter().enumerate() {
        for (i, v) in reps[l].iter().enumerate() {
            recon[i] += c * v;
        }
    }
    let resid = g
        .g
        .iter()
        .zip(&recon)
        .map(|(a, b)| (a - b).abs())
        .fold(0.0, f64::max);
    if resid > 1e-10 {
        return Err(Error::AssertionMismatch(format!(
            "second-kind reconstruction residual {resid:.3e}"
        )));
    }
    Ok(d)
}

/// Decompose a cross form over the odd-order quadratic parts.
///
/// The cross reps obey rep_d = rep_{(1−d) mod n} rather than evenness, so
/// the target is given by its band of coefficient pairs: `pairs[π]` is the
/// coefficient of Σ_j p_j (r_{j+π} + r_{j−π−1}). Returns c of length
/// pairs.len() + 1 with the identically-zero order-1 slot at index 0.
pub fn decompose_first(pairs: &[f64], n: usize) -> Result<Vec<f64>> {
    let mt = pairs.len();
    if mt == 0 {
        return Err(Error::SingularSystem(
            "first-kind band is empty: the order-1 quadratic part vanishes".into(),
        ));
    }
    let reps: Vec<Vec<f64>> = (1..=mt)
        .map(|l| Ok(quadratic_part(2 * l + 1, n)?.rep().rep.clone()))
        .collect::<Result<_>>()?;
    // rows are pair indices π (rep index π+1), columns are orders l = 1..m̃
    let mut c = vec![0.0; mt + 1];
    for pi in (0..mt).rev() {
        let diag = reps[pi][pi + 1];
        if diag <= 0.0 {
            return Err(Error::SingularSystem(format!(
                "order {} pair entry {pi} is {diag:.3e}",
                2 * (pi + 1) + 1
            )));
        }
        let mut rhs = pairs[pi];
        for l in pi + 1..mt {
            rhs -= c[l + 1] * reps[l][pi + 1];
        }
        c[pi + 1] = rhs / diag;
    }
    // residual over full reps
    let mut recon = vec![0.0; n];
    for l in 1..=mt {
        for (i, v) in reps[l - 1].iter().enumerate() {
            recon[i] += c[l] * v;
        }
    }
    let mut target = vec![0.0; n];
    for (pi, &v) in pairs.iter().enumerate() {
        target[pi + 1] = v;
        target[(n - pi) % n] = v;
    }
    let resid = target
        .iter()
        .zip(&recon)
        .map(|(a, b)| (a - b).abs())
        .fold(0.0, f64::max);
    if resid > 1e-10 {
        return Err(Error::AssertionMismatch(format!(
            "first-kind reconstruction residual {resid:.3e}"
        )));
    }
    Ok(c)
}
