//! Adaptive 1-d and 2-d quadrature used as the oracle side of sampler tests.

use crate::{Error, Result};

/// Adaptive Simpson integration of `f` on `[a, b]`.
///
/// Returns the integral estimate; fails with `QuadratureNonConvergent` if the
/// local error estimate cannot be pushed below `tol` within the depth budget.
pub fn adaptive_simpson<F: Fn(f64) -> f64>(f: &F, a: f64, b: f64, tol: f64) -> Result<f64> {
    let fa = f(a);
    let fb = f(b);
    let m = 0.5 * (a + b);
    let fm = f(m);
    let whole = (b - a) / 6.0 * (fa + 4.0 * fm + fb);
    let mut worst = 0.0f64;
    let v = simpson_rec(f, a, b, fa, fm, fb, whole, tol, 52, &mut worst);
    if worst > tol.max(1e-300) * 4.0 {
        return Err(Error::QuadratureNonConvergent(worst));
    }
    Ok(v)
}

#[allow(clippy::too_many_arguments)]
fn simpson_rec<F: Fn(f64) -> f64>(
    f: &F,
    a: f64,
    b: f64,
    fa: f64,
    fm: f64,
    fb: f64,
    whole: f64,
    tol: f64,
    depth: u32,
    worst: &mut f64,
) -> f64 {
    let m = 0.5 * (a + b);
    let lm = 0.5 * (a + m);
    let rm = 0.5 * (m + b);
    let flm = f(lm);
    let frm = f(rm);
    let left = (m - a) / 6.0 * (fa + 4.0 * flm + fm);
    let right = (b - m) / 6.0 * (fm + 4.0 * frm + fb);
    let delta = left + right - whole;
    if depth == 0 || delta.abs() <= 15.0 * tol {
        *worst = worst.max(delta.abs() / 15.0);
        return left + right + delta / 15.0;
    }
    let half = 0.5 * tol;
    simpson_rec(f, a, m, fa, flm, fm, left, half, depth - 1, worst)
        + simpson_rec(f, m, b, fm, frm, fb, right, half, depth - 1, worst)
}

/// Locate integration bounds for a unimodal log-density `log_f`.
///
/// Starting from the mode, expand outward in steps of `scale` (doubling) until
/// the log-density has dropped by `drop` relative to the mode; the tail mass
/// beyond such a cutoff is negligible for the tolerances used here.
pub fn bracket_unimodal(log_f: impl Fn(f64) -> f64, mode: f64, scale: f64, drop: f64) -> (f64, f64) {
    let peak = log_f(mode);
    let mut hi = mode + scale;
    let mut step = scale;
    while log_f(hi) > peak - drop && step < 1e12 {
        step *= 2.0;
        hi = mode + step;
    }
    let mut lo = mode - scale;
    step = scale;
    while log_f(lo) > peak - drop && step < 1e12 {
        step *= 2.0;
        lo = mode - step;
    }
    (lo, hi)
}

/// Tensor-product adaptive quadrature of `f` over `[a0,b0] × [a1,b1]`.
///
/// The inner integrals are computed adaptively for each outer node, so the
/// cost is quadratic; intended only for the small oracle domains in tests.
pub fn adaptive_simpson_2d<F: Fn(f64, f64) -> f64>(
    f: &F,
    a0: f64,
    b0: f64,
    a1: f64,
    b1: f64,
    tol: f64,
) -> Result<f64> {
    let inner = |x: f64| -> f64 {
        adaptive_simpson(&|y| f(x, y), a1, b1, tol * 1e-2).unwrap_or(f64::NAN)
    };
    let v = adaptive_simpson(&inner, a0, b0, tol)?;
    if !v.is_finite() {
        return Err(Error::NonFinite("2-d quadrature".into()));
    }
    Ok(v)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn integrates_polynomial_exactly() {
        let v = adaptive_simpson(&|x| x * x * x - 2.0 * x + 1.0, -1.0, 3.0, 1e-12).unwrap();
        // ∫ x³-2x+1 dx over [-1,3] = [x⁴/4 - x² + x] = (81/4-9+3) - (1/4-1-1) = 16
        assert!((v - 16.0).abs() < 1e-10);
    }

    #[test]
    fn integrates_gaussian_tail_to_high_accuracy() {
        let v = adaptive_simpson(&|x| (-0.5 * x * x).exp(), -40.0, 40.0, 1e-13).unwrap();
        let exact = (2.0 * std::f64::consts::PI).sqrt();
        assert!((v - exact).abs() < 1e-11);
    }

    #[test]
    fn bracket_covers_gaussian_mass() {
        let (lo, hi) = bracket_unimodal(|x| -0.5 * (x - 3.0).powi(2), 3.0, 1.0, 45.0);
        assert!(lo < 3.0 - 9.0 && hi > 3.0 + 9.0);
    }

    #[test]
    fn two_dim_separable_product() {
        let f = |x: f64, y: f64| (-x * x - y * y).exp();
        let v = adaptive_simpson_2d(&f, -10.0, 10.0, -10.0, 10.0, 1e-10).unwrap();
        assert!((v - std::f64::consts::PI).abs() < 1e-8);
    }
}
