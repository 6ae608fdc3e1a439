//! Monte Carlo harness measuring the variance scaling laws of the conserved
//! quantities along both flows: drift under the quartic chain, constancy of
//! mode packets under the exponential chain, equilibrium variance floors,
//! and bracket mean squares.
//!
//! Every runner draws a deterministic ensemble, maps members in parallel,
//! reduces in member order, and reports jackknife error bars plus weighted
//! log-log slope fits. Members whose trajectory leaves the representable
//! range are dropped and counted.

mod stats;

pub use stats::{
    fit_power_law, linear_wls, mean_se, proportion_se, variance_jackknife, FitResult,
};

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::chain::{ChainParams, Model};
use crate::gibbs::{solve_theta, SamplerConfig};
use crate::integrate::{evolve, IntegratorConfig, Scheme};
use crate::lax::{
    constant_part, gradient_j, hamiltonian_gradient, poisson_bracket, poisson_bracket_scale,
    quadratic_part, toda_integral, Gradient,
};
use crate::spectral::{phi_observable, AdmissibleVector};
use crate::{Error, Result};

/// One (order, β, n, t) estimate row.
#[derive(Debug, Clone, Serialize)]
pub struct Cell {
    pub m: usize,
    pub beta: f64,
    pub n: usize,
    pub t: f64,
    pub chi: f64,
    pub var_drift: f64,
    pub var_drift_se: f64,
    pub var0: f64,
    pub var0_se: f64,
    pub p_exceed: f64,
    pub p_exceed_se: f64,
    /// inside the nominal time window β/√((χ−1)² + 1/β)
    pub in_window: bool,
}

/// One fitted slope.
#[derive(Debug, Clone, Serialize)]
pub struct Fit {
    pub quantity: String,
    pub axis: String,
    pub slope: f64,
    pub stderr: f64,
    pub r2: f64,
    pub intercept: f64,
}

#[derive(Debug, Clone, Serialize)]
pub struct ExperimentReport {
    pub kind: String,
    pub cells: Vec<Cell>,
    pub fits: Vec<Fit>,
    pub members_total: usize,
    pub members_dropped: usize,
    pub notes: Vec<String>,
}

/// Frozen flat-file column order.
pub const CSV_HEADER: &str =
    "m,beta,n,t,chi,var_drift,var_drift_se,var0,var0_se,p_exceed,p_exceed_se";

impl ExperimentReport {
    pub fn to_csv(&self) -> String {
        let mut out = String::from(CSV_HEADER);
        out.push('\n');
        for c in &self.cells {
            out.push_str(&format!(
                "{},{},{},{},{},{},{},{},{},{},{}\n",
                c.m,
                c.beta,
                c.n,
                c.t,
                c.chi,
                c.var_drift,
                c.var_drift_se,
                c.var0,
                c.var0_se,
                c.p_exceed,
                c.p_exceed_se
            ));
        }
        out
    }

    fn warn_if_lossy(&mut self) {
        if self.members_total > 0 {
            let frac = self.members_dropped as f64 / self.members_total as f64;
            if frac > 0.01 {
                let msg = format!(
                    "dropped {} of {} trajectories ({:.2}%)",
                    self.members_dropped,
                    self.members_total,
                    100.0 * frac
                );
                log::warn!("{msg}");
                self.notes.push(msg);
            }
        }
    }
}

/// Nominal adiabatic window with unit constant.
pub fn nominal_window(beta: f64, chi: f64) -> f64 {
    beta / ((chi - 1.0).powi(2) + 1.0 / beta).sqrt()
}

fn salted(sampler: &SamplerConfig, salt: u64) -> SamplerConfig {
    let mut s = sampler.clone();
    s.seed = s.seed ^ salt.wrapping_mul(0x9E37_79B9_7F4A_7C15);
    s
}

fn fit_weights(vals: &[f64], ses: &[f64]) -> Vec<f64> {
    vals.iter()
        .zip(ses)
        .map(|(v, s)| {
            let rel = if *v > 0.0 && *s > 0.0 { s / v } else { 1.0 };
            1.0 / (rel * rel)
        })
        .collect()
}

fn closest(grid: &[f64], target: f64) -> f64 {
    *grid
        .iter()
        .min_by(|a, b| {
            (*a - target).abs().partial_cmp(&(*b - target).abs()).unwrap()
        })
        .expect("nonempty grid")
}

// ---------------------------------------------------------------------------
// drift of conserved quantities under the chain flow
// ---------------------------------------------------------------------------

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct DriftConfig {
    pub n: usize,
    pub chi: f64,
    pub model: Model,
    pub beta_grid: Vec<f64>,
    pub m_list: Vec<usize>,
    pub t_grid: Vec<f64>,
    pub n_samples: usize,
    pub delta1: f64,
    /// t at which the β-slope is fitted (nearest grid point).
    pub fit_t: f64,
    /// β at which the t-slope is fitted (nearest grid point).
    pub fit_beta: f64,
    /// 0 selects the β-scaled default step.
    pub dt: f64,
    pub scheme: Scheme,
    pub sampler: SamplerConfig,
}

impl DriftConfig {
    fn validate(&self) -> Result<()> {
        if self.n_samples < 100 {
            return Err(Error::InvalidParams("ensemble size must be >= 100".into()));
        }
        if self.beta_grid.is_empty() || self.m_list.is_empty() || self.t_grid.is_empty() {
            return Err(Error::InvalidParams("grids must be nonempty".into()));
        }
        let mmax = *self.m_list.iter().max().unwrap();
        if self.n <= 2 * mmax {
            return Err(Error::InvalidParams(format!(
                "n = {} must exceed 2·max(m) = {}",
                self.n,
                2 * mmax
            )));
        }
        if !(self.delta1 > 0.0) {
            return Err(Error::InvalidParams("delta1 must be positive".into()));
        }
        self.sampler.validate()
    }
}

struct DriftMember {
    j0: Vec<f64>,
    dj: Vec<Vec<f64>>, // [m_idx][t_idx]
}

/// Sample the Gibbs ensemble of the configured model, evolve each member
/// under that model's flow, and tabulate the drift statistics of the
/// conserved quantities.
pub fn run_drift(cfg: &DriftConfig) -> Result<ExperimentReport> {
    cfg.validate()?;
    let mut report = ExperimentReport {
        kind: "drift".into(),
        cells: Vec::new(),
        fits: Vec::new(),
        members_total: 0,
        members_dropped: 0,
        notes: Vec::new(),
    };
    for (bi, &beta) in cfg.beta_grid.iter().enumerate() {
        let tm = solve_theta(beta, cfg.model, cfg.chi)?;
        let sampler = salted(&cfg.sampler, bi as u64 + 1);
        let ensemble = tm.ensemble_constrained(cfg.n, &sampler, cfg.n_samples)?;
        let params = ChainParams::new(cfg.n, beta, cfg.chi, cfg.model)?;
        let dt = if cfg.dt > 0.0 { cfg.dt } else { IntegratorConfig::default_dt(beta) };
        let icfg = IntegratorConfig::new(dt, cfg.scheme, cfg.t_grid.clone())?;

        let members: Vec<Option<DriftMember>> = ensemble
            .par_iter()
            .map(|s| {
                let j0: Vec<f64> = cfg
                    .m_list
                    .iter()
                    .map(|&m| toda_integral(s, m))
                    .collect::<Result<_>>()
                    .ok()?;
                let traj = evolve(s, &params, &icfg).ok()?;
                let mut dj = vec![vec![0.0; cfg.t_grid.len()]; cfg.m_list.len()];
                for (ti, (_, st)) in traj.iter().enumerate() {
                    for (mi, &m) in cfg.m_list.iter().enumerate() {
                        dj[mi][ti] = toda_integral(st, m).ok()? - j0[mi];
                    }
                }
                Some(DriftMember { j0, dj })
            })
            .collect();
        let kept: Vec<&DriftMember> = members.iter().flatten().collect();
        report.members_total += members.len();
        report.members_dropped += members.len() - kept.len();
        if kept.len() < 3 {
            return Err(Error::NonFinite(format!("almost all trajectories lost at beta = {beta}")));
        }

        for (mi, &m) in cfg.m_list.iter().enumerate() {
            let j0s: Vec<f64> = kept.iter().map(|r| r.j0[mi]).collect();
            let (var0, var0_se) = variance_jackknife(&j0s);
            let sigma0 = var0.max(0.0).sqrt();
            for (ti, &t) in cfg.t_grid.iter().enumerate() {
                let dj: Vec<f64> = kept.iter().map(|r| r.dj[mi][ti]).collect();
                let (vd, vd_se) = variance_jackknife(&dj);
                let hits = dj.iter().filter(|d| d.abs() > cfg.delta1 * sigma0).count();
                let (p, p_se) = proportion_se(hits, dj.len());
                report.cells.push(Cell {
                    m,
                    beta,
                    n: cfg.n,
                    t,
                    chi: cfg.chi,
                    var_drift: vd,
                    var_drift_se: vd_se,
                    var0,
                    var0_se,
                    p_exceed: p,
                    p_exceed_se: p_se,
                    in_window: t <= nominal_window(beta, cfg.chi),
                });
            }
        }
    }

    // β-slope of the drift variance at the fit time, per order
    let t_star = closest(&cfg.t_grid, cfg.fit_t);
    for &m in &cfg.m_list {
        let rows: Vec<&Cell> = report
            .cells
            .iter()
            .filter(|c| c.m == m && c.t == t_star)
            .collect();
        if rows.len() >= 3 {
            let xs: Vec<f64> = rows.iter().map(|c| c.beta).collect();
            let ys: Vec<f64> = rows.iter().map(|c| c.var_drift).collect();
            let ses: Vec<f64> = rows.iter().map(|c| c.var_drift_se).collect();
            if let Ok(fit) = fit_power_law(&xs, &ys, Some(&fit_weights(&ys, &ses))) {
                report.fits.push(Fit {
                    quantity: format!("var_drift[m={m},t={t_star}]"),
                    axis: "beta".into(),
                    slope: fit.slope,
                    stderr: fit.slope_stderr,
                    r2: fit.r_squared,
                    intercept: fit.intercept,
                });
            }
        }
    }
    // t-slope at the fit β, per order
    let b_star = closest(&cfg.beta_grid, cfg.fit_beta);
    for &m in &cfg.m_list {
        let rows: Vec<&Cell> = report
            .cells
            .iter()
            .filter(|c| c.m == m && c.beta == b_star && c.t > 0.0)
            .collect();
        if rows.len() >= 3 {
            let xs: Vec<f64> = rows.iter().map(|c| c.t).collect();
            let ys: Vec<f64> = rows.iter().map(|c| c.var_drift).collect();
            let ses: Vec<f64> = rows.iter().map(|c| c.var_drift_se).collect();
            if let Ok(fit) = fit_power_law(&xs, &ys, Some(&fit_weights(&ys, &ses))) {
                report.fits.push(Fit {
                    quantity: format!("var_drift[m={m},beta={b_star}]"),
                    axis: "t".into(),
                    slope: fit.slope,
                    stderr: fit.slope_stderr,
                    r2: fit.r_squared,
                    intercept: fit.intercept,
                });
            }
        }
    }
    report.warn_if_lossy();
    Ok(report)
}

// ---------------------------------------------------------------------------
// mode-packet constancy
// ---------------------------------------------------------------------------

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct PacketConfig {
    pub n: usize,
    pub chi: f64,
    pub model: Model,
    pub beta_grid: Vec<f64>,
    pub packet_m: usize,
    pub packet_y: Vec<f64>,
    pub t_grid: Vec<f64>,
    pub n_samples: usize,
    pub delta1: f64,
    /// checkpoints below this time are excluded from the plateau trend fit
    pub trend_t_min: f64,
    pub dt: f64,
    pub scheme: Scheme,
    pub sampler: SamplerConfig,
}

struct PacketMember {
    phi0: f64,
    dphi: Vec<f64>,
}

/// Track a banded mode packet along the flow: its variance at time zero, the
/// variance of its increment at each checkpoint, and the worst-case ratio.
pub fn run_packet(cfg: &PacketConfig) -> Result<ExperimentReport> {
    if cfg.n_samples < 100 {
        return Err(Error::InvalidParams("ensemble size must be >= 100".into()));
    }
    if cfg.beta_grid.is_empty() || cfg.t_grid.is_empty() {
        return Err(Error::InvalidParams("grids must be nonempty".into()));
    }
    cfg.sampler.validate()?;
    let packet = AdmissibleVector::new(cfg.n, cfg.packet_m, cfg.packet_y.clone())?;
    let mut report = ExperimentReport {
        kind: "packet".into(),
        cells: Vec::new(),
        fits: Vec::new(),
        members_total: 0,
        members_dropped: 0,
        notes: Vec::new(),
    };
    let mut ratios: Vec<(f64, f64, f64)> = Vec::new(); // (β, ratio, rel se)
    for (bi, &beta) in cfg.beta_grid.iter().enumerate() {
        let tm = solve_theta(beta, cfg.model, cfg.chi)?;
        let sampler = salted(&cfg.sampler, 0x5000 + bi as u64);
        let ensemble = tm.ensemble_constrained(cfg.n, &sampler, cfg.n_samples)?;
        let params = ChainParams::new(cfg.n, beta, cfg.chi, cfg.model)?;
        let dt = if cfg.dt > 0.0 { cfg.dt } else { IntegratorConfig::default_dt(beta) };
        let icfg = IntegratorConfig::new(dt, cfg.scheme, cfg.t_grid.clone())?;

        let members: Vec<Option<PacketMember>> = ensemble
            .par_iter()
            .map(|s| {
                let phi0 = phi_observable(s, &packet).ok()?;
                let traj = evolve(s, &params, &icfg).ok()?;
                let dphi: Vec<f64> = traj
                    .iter()
                    .map(|(_, st)| phi_observable(st, &packet).map(|v| v - phi0))
                    .collect::<Result<_>>()
                    .ok()?;
                Some(PacketMember { phi0, dphi })
            })
            .collect();
        let kept: Vec<&PacketMember> = members.iter().flatten().collect();
        report.members_total += members.len();
        report.members_dropped += members.len() - kept.len();
        if kept.len() < 3 {
            return Err(Error::NonFinite(format!("almost all trajectories lost at beta = {beta}")));
        }

        let phi0s: Vec<f64> = kept.iter().map(|r| r.phi0).collect();
        let (var0, var0_se) = variance_jackknife(&phi0s);
        let sigma0 = var0.max(0.0).sqrt();
        let mut best: (f64, f64) = (0.0, 0.0); // (ratio, rel se)
        for (ti, &t) in cfg.t_grid.iter().enumerate() {
            let dphi: Vec<f64> = kept.iter().map(|r| r.dphi[ti]).collect();
            let (vd, vd_se) = variance_jackknife(&dphi);
            let hits = dphi.iter().filter(|d| d.abs() > cfg.delta1 * sigma0).count();
            let (p, p_se) = proportion_se(hits, dphi.len());
            if vd / var0 > best.0 {
                best = (vd / var0, vd_se / vd.max(f64::MIN_POSITIVE));
            }
            report.cells.push(Cell {
                m: cfg.packet_m,
                beta,
                n: cfg.n,
                t,
                chi: cfg.chi,
                var_drift: vd,
                var_drift_se: vd_se,
                var0,
                var0_se,
                p_exceed: p,
                p_exceed_se: p_se,
                in_window: t <= nominal_window(beta, cfg.chi),
            });
        }
        ratios.push((beta, best.0, best.1));

        // trend of the increment variance against t², per β: once over the
        // whole grid and once past the ballistic ramp (t ≥ trend_t_min)
        for (label, t_min) in [("var_drift", 0.0), ("var_drift_plateau", cfg.trend_t_min)] {
            let rows: Vec<&Cell> = report
                .cells
                .iter()
                .filter(|c| c.beta == beta && c.t > t_min)
                .collect();
            if rows.len() >= 3 {
                let xs: Vec<f64> = rows.iter().map(|c| c.t * c.t).collect();
                let ys: Vec<f64> = rows.iter().map(|c| c.var_drift).collect();
                let ws: Vec<f64> = rows
                    .iter()
                    .map(|c| {
                        let se = c.var_drift_se.max(f64::MIN_POSITIVE);
                        1.0 / (se * se)
                    })
                    .collect();
                if let Ok(fit) = linear_wls(&xs, &ys, Some(&ws)) {
                    report.fits.push(Fit {
                        quantity: format!("{label}[beta={beta}]"),
                        axis: "t2".into(),
                        slope: fit.slope,
                        stderr: fit.slope_stderr,
                        r2: fit.r_squared,
                        intercept: fit.intercept,
                    });
                }
            }
        }
    }

    if ratios.len() >= 3 {
        let xs: Vec<f64> = ratios.iter().map(|r| r.0).collect();
        let ys: Vec<f64> = ratios.iter().map(|r| r.1).collect();
        let ws: Vec<f64> = ratios
            .iter()
            .map(|r| {
                let rel = r.2.max(1e-6);
                1.0 / (rel * rel)
            })
            .collect();
        if let Ok(fit) = fit_power_law(&xs, &ys, Some(&ws)) {
            report.fits.push(Fit {
                quantity: "max_ratio".into(),
                axis: "beta".into(),
                slope: fit.slope,
                stderr: fit.slope_stderr,
                r2: fit.r_squared,
                intercept: fit.intercept,
            });
        }
    }
    report.warn_if_lossy();
    Ok(report)
}

// ---------------------------------------------------------------------------
// equilibrium variance floor and Taylor-tail variance
// ---------------------------------------------------------------------------

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct FloorConfig {
    pub model: Model,
    pub chi: f64,
    pub beta_grid: Vec<f64>,
    pub n_grid: Vec<usize>,
    pub n_fixed: usize,
    pub beta_fixed: f64,
    /// order whose full variance is fitted (floor law)
    pub m_var: usize,
    /// order whose Taylor tail variance is fitted
    pub m_tail: usize,
    pub n_samples: usize,
    pub sampler: SamplerConfig,
}

/// Equilibrium (t = 0) variances: σ² of the conserved quantities and of
/// their Taylor tails J − J₀ − J₂ across β and n grids.
pub fn run_variance_floor(cfg: &FloorConfig) -> Result<ExperimentReport> {
    if cfg.n_samples < 100 {
        return Err(Error::InvalidParams("ensemble size must be >= 100".into()));
    }
    cfg.sampler.validate()?;
    let mut report = ExperimentReport {
        kind: "floor".into(),
        cells: Vec::new(),
        fits: Vec::new(),
        members_total: 0,
        members_dropped: 0,
        notes: Vec::new(),
    };

    let sweep = |betas: &[f64], ns: &[usize], salt: u64, report: &mut ExperimentReport|
     -> Result<Vec<(f64, usize, usize, f64, f64, f64, f64)>> {
        // rows: (β, n, m, var0, var0_se, tail_var, tail_se)
        let mut rows = Vec::new();
        for (gi, (&beta, &n)) in betas.iter().zip(ns).enumerate() {
            let tm = solve_theta(beta, cfg.model, cfg.chi)?;
            let sampler = salted(&cfg.sampler, salt + gi as u64);
            let ensemble = tm.ensemble_constrained(n, &sampler, cfg.n_samples)?;
            report.members_total += ensemble.len();
            for &m in &[cfg.m_var, cfg.m_tail] {
                let q2 = quadratic_part(m, n)?;
                let j0 = constant_part(m, n)?;
                let vals: Vec<(f64, f64)> = ensemble
                    .par_iter()
                    .map(|s| {
                        let j = toda_integral(s, m)?;
                        Ok((j, j - j0 - q2.eval(s)))
                    })
                    .collect::<Result<_>>()?;
                let js: Vec<f64> = vals.iter().map(|v| v.0).collect();
                let tails: Vec<f64> = vals.iter().map(|v| v.1).collect();
                let (var0, var0_se) = variance_jackknife(&js);
                let (tv, tv_se) = variance_jackknife(&tails);
                rows.push((beta, n, m, var0, var0_se, tv, tv_se));
                report.cells.push(Cell {
                    m,
                    beta,
                    n,
                    t: 0.0,
                    chi: cfg.chi,
                    var_drift: tv,
                    var_drift_se: tv_se,
                    var0,
                    var0_se,
                    p_exceed: f64::NAN,
                    p_exceed_se: f64::NAN,
                    in_window: true,
                });
            }
        }
        Ok(rows)
    };

    let beta_rows = sweep(
        &cfg.beta_grid,
        &vec![cfg.n_fixed; cfg.beta_grid.len()],
        0x1_0000,
        &mut report,
    )?;
    let n_rows = sweep(
        &vec![cfg.beta_fixed; cfg.n_grid.len()],
        &cfg.n_grid,
        0x2_0000,
        &mut report,
    )?;

    let push_fit = |label: String,
                        axis: &str,
                        pts: Vec<(f64, f64, f64)>,
                        report: &mut ExperimentReport| {
        if pts.len() >= 3 {
            let xs: Vec<f64> = pts.iter().map(|p| p.0).collect();
            let ys: Vec<f64> = pts.iter().map(|p| p.1).collect();
            let ses: Vec<f64> = pts.iter().map(|p| p.2).collect();
            if let Ok(fit) = fit_power_law(&xs, &ys, Some(&fit_weights(&ys, &ses))) {
                report.fits.push(Fit {
                    quantity: label,
                    axis: axis.into(),
                    slope: fit.slope,
                    stderr: fit.slope_stderr,
                    r2: fit.r_squared,
                    intercept: fit.intercept,
                });
            }
        }
    };

    let m_var = cfg.m_var;
    let m_tail = cfg.m_tail;
    push_fit(
        format!("var0[m={m_var}]"),
        "beta",
        beta_rows.iter().filter(|r| r.2 == m_var).map(|r| (r.0, r.3, r.4)).collect(),
        &mut report,
    );
    push_fit(
        format!("var0[m={m_var}]"),
        "n",
        n_rows.iter().filter(|r| r.2 == m_var).map(|r| (r.1 as f64, r.3, r.4)).collect(),
        &mut report,
    );
    push_fit(
        format!("tail_var[m={m_tail}]"),
        "beta",
        beta_rows.iter().filter(|r| r.2 == m_tail).map(|r| (r.0, r.5, r.6)).collect(),
        &mut report,
    );
    push_fit(
        format!("tail_var[m={m_tail}]"),
        "n",
        n_rows.iter().filter(|r| r.2 == m_tail).map(|r| (r.1 as f64, r.5, r.6)).collect(),
        &mut report,
    );
    report.warn_if_lossy();
    Ok(report)
}

// ---------------------------------------------------------------------------
// bracket mean squares
// ---------------------------------------------------------------------------

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct BracketConfig {
    pub chi: f64,
    pub beta_grid: Vec<f64>,
    pub n_grid: Vec<usize>,
    pub n_fixed: usize,
    pub beta_fixed: f64,
    pub m_list: Vec<usize>,
    pub n_samples: usize,
    pub sampler: SamplerConfig,
}

/// Monte Carlo estimate of ⟨{J, H}²⟩ under the quartic-chain Gibbs measure,
/// using analytic gradients. Per sample the bracket with the exponential
/// Hamiltonian must vanish and the residual-potential identity must hold;
/// violations are counted and reported.
pub fn run_bracket_variance(cfg: &BracketConfig) -> Result<ExperimentReport> {
    if cfg.n_samples < 100 {
        return Err(Error::InvalidParams("ensemble size must be >= 100".into()));
    }
    cfg.sampler.validate()?;
    let mut report = ExperimentReport {
        kind: "bracket".into(),
        cells: Vec::new(),
        fits: Vec::new(),
        members_total: 0,
        members_dropped: 0,
        notes: Vec::new(),
    };
    let mut zero_violations = 0usize;
    let mut identity_violations = 0usize;

    let mut sweep = |betas: &[f64], ns: &[usize], salt: u64, report: &mut ExperimentReport|
     -> Result<Vec<(f64, usize, usize, f64, f64)>> {
        let mut rows = Vec::new();
        for (gi, (&beta, &n)) in betas.iter().zip(ns).enumerate() {
            let tm = solve_theta(beta, Model::Fput, cfg.chi)?;
            let sampler = salted(&cfg.sampler, salt + gi as u64);
            let ensemble = tm.ensemble_constrained(n, &sampler, cfg.n_samples)?;
            report.members_total += ensemble.len();
            let fput = ChainParams::new(n, beta, cfg.chi, Model::Fput)?;
            let toda = ChainParams::new(n, beta, 0.0, Model::Toda)?;
            for &m in &cfg.m_list {
                let stats: Vec<(f64, usize, usize)> = ensemble
                    .par_iter()
                    .map(|s| -> Result<(f64, usize, usize)> {
                        let gj = gradient_j(s, m)?;
                        let gf = hamiltonian_gradient(s, &fput);
                        let gt = hamiltonian_gradient(s, &toda);
                        let b = poisson_bracket(&gj, &gf);
                        let bt = poisson_bracket(&gj, &gt);
                        let scale = poisson_bracket_scale(&gj, &gf);
                        let gdiff = Gradient {
                            gp: vec![0.0; n],
                            gr: gf.gr.iter().zip(&gt.gr).map(|(a, c)| a - c).collect(),
                        };
                        let bres = poisson_bracket(&gj, &gdiff);
                        let zero_bad = usize::from(bt.abs() > 1e-10 * scale);
                        let id_bad = usize::from((b - bres).abs() > 1e-10 * scale);
                        Ok((b, zero_bad, id_bad))
                    })
                    .collect::<Result<_>>()?;
                zero_violations += stats.iter().map(|s| s.1).sum::<usize>();
                identity_violations += stats.iter().map(|s| s.2).sum::<usize>();
                let sq: Vec<f64> = stats.iter().map(|s| s.0 * s.0).collect();
                let (msq, msq_se) = mean_se(&sq);
                let js: Vec<f64> = ensemble
                    .par_iter()
                    .map(|s| toda_integral(s, m))
                    .collect::<Result<_>>()?;
                let (var0, var0_se) = variance_jackknife(&js);
                rows.push((beta, n, m, msq, msq_se));
                report.cells.push(Cell {
                    m,
                    beta,
                    n,
                    t: 0.0,
                    chi: cfg.chi,
                    var_drift: msq,
                    var_drift_se: msq_se,
                    var0,
                    var0_se,
                    p_exceed: f64::NAN,
                    p_exceed_se: f64::NAN,
                    in_window: true,
                });
            }
        }
        Ok(rows)
    };

    let beta_rows = sweep(
        &cfg.beta_grid,
        &vec![cfg.n_fixed; cfg.beta_grid.len()],
        0x3_0000,
        &mut report,
    )?;
    let n_rows = sweep(
        &vec![cfg.beta_fixed; cfg.n_grid.len()],
        &cfg.n_grid,
        0x4_0000,
        &mut report,
    )?;

    for &m in &cfg.m_list {
        let pts: Vec<(f64, f64, f64)> = beta_rows
            .iter()
            .filter(|r| r.2 == m)
            .map(|r| (r.0, r.3, r.4))
            .collect();
        if pts.len() >= 3 {
            let xs: Vec<f64> = pts.iter().map(|p| p.0).collect();
            let ys: Vec<f64> = pts.iter().map(|p| p.1).collect();
            let ses: Vec<f64> = pts.iter().map(|p| p.2).collect();
            if let Ok(fit) = fit_power_law(&xs, &ys, Some(&fit_weights(&ys, &ses))) {
                report.fits.push(Fit {
                    quantity: format!("bracket_sq[m={m}]"),
                    axis: "beta".into(),
                    slope: fit.slope,
                    stderr: fit.slope_stderr,
                    r2: fit.r_squared,
                    intercept: fit.intercept,
                });
            }
        }
        let pts: Vec<(f64, f64, f64)> = n_rows
            .iter()
            .filter(|r| r.2 == m)
            .map(|r| (r.1 as f64, r.3, r.4))
            .collect();
        if pts.len() >= 3 {
            let xs: Vec<f64> = pts.iter().map(|p| p.0).collect();
            let ys: Vec<f64> = pts.iter().map(|p| p.1).collect();
            let ses: Vec<f64> = pts.iter().map(|p| p.2).collect();
            if let Ok(fit) = fit_power_law(&xs, &ys, Some(&fit_weights(&ys, &ses))) {
                report.fits.push(Fit {
                    quantity: format!("bracket_sq[m={m}]"),
                    axis: "n".into(),
                    slope: fit.slope,
                    stderr: fit.slope_stderr,
                    r2: fit.r_squared,
                    intercept: fit.intercept,
                });
            }
        }
    }
    report.notes.push(format!(
        "bracket zero violations: {zero_violations}, identity violations: {identity_violations}"
    ));
    if zero_violations + identity_violations > 0 {
        return Err(Error::AssertionMismatch(format!(
            "{zero_violations} zero-bracket and {identity_violations} identity violations"
        )));
    }
    report.warn_if_lossy();
    Ok(report)
}
