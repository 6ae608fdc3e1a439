//! Flaschka variables, the periodic Jacobi (Lax) matrix, and the family of
//! conserved quantities of the exponential chain built from it.
//!
//! Two independent evaluation routes are kept side by side: matrix-power
//! traces (the oracle) and the closed-form local densities of [`density`]
//! (the production path). Analytic gradients and the canonical Poisson
//! bracket in `(p, r)` pullback form complete the module.

mod density;
mod quadratic;

pub use density::{
    density, max_order, set_max_order, DensityTerm, IntegralDensity, DEFAULT_MAX_ORDER,
};
pub use quadratic::{constant_part, quadratic_part, CirculantSpec, QuadraticPart};

use crate::chain::{constraint_tol, ChainState};
use crate::{Error, Result};

/// Variables (b, a) = (−p, e^{−r/2}) in which the exponential-chain flow is
/// isospectral.
#[derive(Debug, Clone)]
pub struct FlaschkaVars {
    pub b: Vec<f64>,
    pub a: Vec<f64>,
}

/// Map a manifold state to Flaschka variables.
///
/// Fails with `NonFinite` if any e^{−r/2} overflows (r below ≈ −1400).
pub fn flaschka(state: &ChainState) -> Result<FlaschkaVars> {
    let b: Vec<f64> = state.p.iter().map(|&p| -p).collect();
    let mut a = Vec::with_capacity(state.len());
    for &r in &state.r {
        let v = (-0.5 * r).exp();
        if !v.is_finite() {
            return Err(Error::NonFinite(format!("exp(-r/2) with r = {r}")));
        }
        a.push(v);
    }
    let vars = FlaschkaVars { b, a };
    vars.validate(state.len())?;
    Ok(vars)
}

impl FlaschkaVars {
    fn validate(&self, n: usize) -> Result<()> {
        let tol = constraint_tol(n);
        let sb: f64 = self.b.iter().sum();
        if sb.abs() > tol {
            return Err(Error::ConstraintViolation(format!("|Σb| = {:.3e}", sb.abs())));
        }
        // Πa = e^{−Σr/2}; the r-sum tolerance scales with n, so match it here.
        let log_prod: f64 = self.a.iter().map(|x| x.ln()).sum();
        if log_prod.abs() > tol {
            return Err(Error::ConstraintViolation(format!(
                "|ln Πa| = {:.3e}",
                log_prod.abs()
            )));
        }
        Ok(())
    }

    pub fn len(&self) -> usize {
        self.b.len()
    }

    pub fn is_empty(&self) -> bool {
        self.b.is_empty()
    }

    /// y = L x for the periodic Jacobi matrix (diagonal b, off-diagonals and
    /// corners a).
    pub fn matvec(&self, x: &[f64], y: &mut [f64]) {
        let n = self.len();
        for j in 0..n {
            y[j] = self.b[j] * x[j]
                + self.a[j] * x[(j + 1) % n]
                + self.a[(j + n - 1) % n] * x[(j + n - 1) % n];
        }
    }
}

/// Dense Lax matrix; intended for small-n tests and cross-checks.
pub fn lax_matrix(fv: &FlaschkaVars) -> Vec<Vec<f64>> {
    let n = fv.len();
    let mut l = vec![vec![0.0; n]; n];
    for j in 0..n {
        l[j][j] = fv.b[j];
        l[j][(j + 1) % n] = fv.a[j];
        l[(j + 1) % n][j] = fv.a[j];
    }
    l
}

/// m-th conserved quantity via the trace route: (1/m)·Tr(Lᵐ), computed by
/// repeated sparse matrix-vector products on each basis vector.
pub fn toda_integral_trace(state: &ChainState, m: usize) -> Result<f64> {
    let n = state.len();
    if m < 1 || m >= n {
        return Err(Error::InvalidParams(format!("trace order m = {m} needs 1 <= m < n = {n}")));
    }
    let fv = flaschka(state)?;
    let mut acc = 0.0f64;
    let mut v = vec![0.0; n];
    let mut w = vec![0.0; n];
    for j in 0..n {
        v.iter_mut().for_each(|x| *x = 0.0);
        v[j] = 1.0;
        for _ in 0..m {
            fv.matvec(&v, &mut w);
            std::mem::swap(&mut v, &mut w);
        }
        acc += v[j];
    }
    let out = acc / m as f64;
    if out.is_finite() {
        Ok(out)
    } else {
        Err(Error::NonFinite(format!("trace of order {m}")))
    }
}

/// m-th conserved quantity via the cached closed-form density:
/// (1/m) Σ_j h_j.
pub fn toda_integral(state: &ChainState, m: usize) -> Result<f64> {
    let n = state.len();
    if n <= 2 * m {
        return Err(Error::InvalidParams(format!("order m = {m} needs n > 2m, n = {n}")));
    }
    let d = density(m)?;
    let mut acc = 0.0;
    for j in 0..n {
        acc += d.eval(state, j)?;
    }
    Ok(acc / m as f64)
}

/// Gradient of an observable with respect to (p, r).
#[derive(Debug, Clone)]
pub struct Gradient {
    pub gp: Vec<f64>,
    pub gr: Vec<f64>,
}

/// Analytic gradient of the m-th conserved quantity.
///
/// Both components come from entries of L^{m−1}: ∂J/∂p_j = −[L^{m−1}]_{jj}
/// and ∂J/∂r_j = −a_j [L^{m−1}]_{j,j+1}, evaluated by accumulating the
/// columns of L^{m−1}.
pub fn gradient_j(state: &ChainState, m: usize) -> Result<Gradient> {
    let n = state.len();
    if m < 1 || n <= 2 * m {
        return Err(Error::InvalidParams(format!("gradient order m = {m} needs 1 <= m, n > 2m")));
    }
    let fv = flaschka(state)?;
    // cols[j] = L^{m−1} e_j
    let mut cols: Vec<Vec<f64>> = (0..n)
        .map(|j| {
            let mut v = vec![0.0; n];
            v[j] = 1.0;
            v
        })
        .collect();
    let mut w = vec![0.0; n];
    for col in cols.iter_mut() {
        for _ in 0..m - 1 {
            fv.matvec(col, &mut w);
            std::mem::swap(col, &mut w);
        }
    }
    let mut gp = vec![0.0; n];
    let mut gr = vec![0.0; n];
    for j in 0..n {
        gp[j] = -cols[j][j];
        gr[j] = -fv.a[j] * cols[(j + 1) % n][j];
    }
    if !gp.iter().chain(gr.iter()).all(|x| x.is_finite()) {
        return Err(Error::NonFinite(format!("gradient of order {m}")));
    }
    Ok(Gradient { gp, gr })
}

/// Term-by-term differentiation of the density sum; independent route used
/// to cross-check [`gradient_j`].
pub fn gradient_j_density(state: &ChainState, m: usize) -> Result<Gradient> {
    let n = state.len();
    if n <= 2 * m {
        return Err(Error::InvalidParams(format!("order m = {m} needs n > 2m")));
    }
    let d = density(m)?;
    let mt = d.mtilde;
    let inv_m = 1.0 / m as f64;
    let mut gp = vec![0.0; n];
    let mut gr = vec![0.0; n];
    for j in 0..n {
        for t in &d.terms {
            let mut arg = 0.0;
            for (i, &ne) in t.n_exp.iter().enumerate() {
                if ne > 0 {
                    arg += f64::from(ne) * state.r[(j + n + i - mt) % n];
                }
            }
            let expv = (-arg).exp();
            let mut pprod = 1.0;
            for (h, &ke) in t.k_exp.iter().enumerate() {
                if ke > 0 {
                    pprod *= state.p[(j + n + h - mt) % n].powi(ke as i32);
                }
            }
            let base = f64::from(t.sign) * t.rho as f64 * inv_m;
            for (i, &ne) in t.n_exp.iter().enumerate() {
                if ne > 0 {
                    gr[(j + n + i - mt) % n] -= base * f64::from(ne) * expv * pprod;
                }
            }
            for (h, &ke) in t.k_exp.iter().enumerate() {
                if ke > 0 {
                    let site = (j + n + h - mt) % n;
                    let mut other = 1.0;
                    for (h2, &ke2) in t.k_exp.iter().enumerate() {
                        if ke2 > 0 && h2 != h {
                            other *= state.p[(j + n + h2 - mt) % n].powi(ke2 as i32);
                        }
                    }
                    gp[site] += base
                        * expv
                        * f64::from(ke)
                        * state.p[site].powi(ke as i32 - 1)
                        * other;
                }
            }
        }
    }
    Ok(Gradient { gp, gr })
}

/// Gradient of the chain Hamiltonian in (p, r): (p, V'(r)).
pub fn hamiltonian_gradient(state: &ChainState, params: &crate::chain::ChainParams) -> Gradient {
    Gradient {
        gp: state.p.clone(),
        gr: state
            .r
            .iter()
            .map(|&r| crate::chain::dpotential(r, params.model, params.chi))
            .collect(),
    }
}

/// Canonical Poisson bracket of two observables given their (p, r) gradients,
/// pulled back through ∂/∂q_j = ∂/∂r_{j−1} − ∂/∂r_j.
pub fn poisson_bracket(grad_f: &Gradient, grad_g: &Gradient) -> f64 {
    let n = grad_f.gp.len();
    let mut acc = 0.0;
    for j in 0..n {
        let jm = (j + n - 1) % n;
        let dfq = grad_f.gr[jm] - grad_f.gr[j];
        let dgq = grad_g.gr[jm] - grad_g.gr[j];
        acc += dfq * grad_g.gp[j] - dgq * grad_f.gp[j];
    }
    acc
}

/// Magnitude scale of the bracket sum, for relative zero tests: the same sum
/// with every summand replaced by its absolute value.
pub fn poisson_bracket_scale(grad_f: &Gradient, grad_g: &Gradient) -> f64 {
    let n = grad_f.gp.len();
    let mut acc = 0.0;
    for j in 0..n {
        let jm = (j + n - 1) % n;
        let dfq = grad_f.gr[jm] - grad_f.gr[j];
        let dgq = grad_g.gr[jm] - grad_g.gr[j];
        acc += (dfq * grad_g.gp[j]).abs() + (dgq * grad_f.gp[j]).abs();
    }
    acc.max(1.0)
}
