//! Estimators used by the Monte Carlo harness: jackknife error bars and
//! weighted log-log power-law fits.

use serde::Serialize;

use crate::{Error, Result};

/// Sample mean and its standard error.
pub fn mean_se(xs: &[f64]) -> (f64, f64) {
    let m = xs.len() as f64;
    let mean = xs.iter().sum::<f64>() / m;
    if xs.len() < 2 {
        return (mean, f64::NAN);
    }
    let var = xs.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (m - 1.0);
    (mean, (var / m).sqrt())
}

/// Unbiased sample variance with a leave-one-out jackknife standard error.
///
/// The leave-one-out variances are reconstructed in O(1) each from the
/// centered first and second moments.
pub fn variance_jackknife(xs: &[f64]) -> (f64, f64) {
    let m = xs.len();
    if m < 3 {
        return (f64::NAN, f64::NAN);
    }
    let mf = m as f64;
    let mean = xs.iter().sum::<f64>() / mf;
    // center once so the sums below stay well conditioned
    let s1: f64 = xs.iter().map(|x| x - mean).sum();
    let s2: f64 = xs.iter().map(|x| (x - mean).powi(2)).sum();
    let var = (s2 - s1 * s1 / mf) / (mf - 1.0);

    let mut loo = Vec::with_capacity(m);
    for &x in xs {
        let c = x - mean;
        let s1i = s1 - c;
        let s2i = s2 - c * c;
        loo.push((s2i - s1i * s1i / (mf - 1.0)) / (mf - 2.0));
    }
    let loo_mean = loo.iter().sum::<f64>() / mf;
    let ss: f64 = loo.iter().map(|v| (v - loo_mean).powi(2)).sum();
    let se = ((mf - 1.0) / mf * ss).sqrt();
    (var, se)
}

/// Empirical proportion with its binomial standard error.
pub fn proportion_se(hits: usize, total: usize) -> (f64, f64) {
    if total == 0 {
        return (f64::NAN, f64::NAN);
    }
    let p = hits as f64 / total as f64;
    (p, (p * (1.0 - p) / total as f64).sqrt())
}

/// Result of a power-law or linear fit.
#[derive(Debug, Clone, Serialize)]
pub struct FitResult {
    pub slope: f64,
    pub intercept: f64,
    pub r_squared: f64,
    pub slope_stderr: f64,
}

/// Weighted least squares of ln y on ln x.
///
/// `weights`, when given, are inverse squared relative standard errors of y
/// (equivalently inverse variances of ln y); the slope error comes from the
/// known-weights covariance. Requires at least three points with two
/// distinct abscissae, all positive.
pub fn fit_power_law(xs: &[f64], ys: &[f64], weights: Option<&[f64]>) -> Result<FitResult> {
    if xs.len() != ys.len() || xs.len() < 3 {
        return Err(Error::DegenerateFit(format!("need >= 3 points, got {}", xs.len())));
    }
    if xs.iter().chain(ys.iter()).any(|&v| !(v > 0.0)) {
        return Err(Error::DegenerateFit("all coordinates must be positive".into()));
    }
    let lx: Vec<f64> = xs.iter().map(|v| v.ln()).collect();
    let ly: Vec<f64> = ys.iter().map(|v| v.ln()).collect();
    linear_wls(&lx, &ly, weights)
}

/// Weighted least squares of y on x in linear coordinates.
pub fn linear_wls(xs: &[f64], ys: &[f64], weights: Option<&[f64]>) -> Result<FitResult> {
    let n = xs.len();
    if n != ys.len() || n < 3 {
        return Err(Error::DegenerateFit(format!("need >= 3 points, got {n}")));
    }
    let w = |i: usize| weights.map_or(1.0, |w| w[i]);
    let mut distinct = 1;
    for i in 1..n {
        if (xs[i] - xs[0]).abs() > 1e-12 * xs[0].abs().max(1.0) {
            distinct = 2;
            break;
        }
    }
    if distinct < 2 {
        return Err(Error::DegenerateFit("fewer than two distinct abscissae".into()));
    }
    let sw: f64 = (0..n).map(w).sum();
    let sx: f64 = (0..n).map(|i| w(i) * xs[i]).sum();
    let sy: f64 = (0..n).map(|i| w(i) * ys[i]).sum();
    let sxx: f64 = (0..n).map(|i| w(i) * xs[i] * xs[i]).sum();
    let sxy: f64 = (0..n).map(|i| w(i) * xs[i] * ys[i]).sum();
    let denom = sw * sxx - sx * sx;
    if denom <= 0.0 {
        return Err(Error::DegenerateFit("singular normal equations".into()));
    }
    let slope = (sw * sxy - sx * sy) / denom;
    let intercept = (sy - slope * sx) / sw;

    let ybar = sy / sw;
    let mut ss_res = 0.0;
    let mut ss_tot = 0.0;
    for i in 0..n {
        let fit = intercept + slope * xs[i];
        ss_res += w(i) * (ys[i] - fit).powi(2);
        ss_tot += w(i) * (ys[i] - ybar).powi(2);
    }
    let r_squared = if ss_tot > 0.0 { 1.0 - ss_res / ss_tot } else { 1.0 };

    // slope variance: known weights when provided, residual-based otherwise
    let slope_var = if weights.is_some() {
        sw / denom
    } else {
        (ss_res / (n as f64 - 2.0)) * sw / denom
    };
    Ok(FitResult { slope, intercept, r_squared, slope_stderr: slope_var.max(0.0).sqrt() })
}
