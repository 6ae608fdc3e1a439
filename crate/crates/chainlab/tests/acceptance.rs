//! Acceptance suite: one test per release criterion, each printing a
//! PASS line with the measured quantities when run with --nocapture.
//!
//! Criteria mix exact-oracle equivalences (machine-precision identities
//! between independent evaluation routes) and statistical scaling laws
//! measured by the Monte Carlo harness at desk scale.

use rand::prelude::*;
use rand_chacha::ChaCha12Rng;
use rand_distr::StandardNormal;

use chainlab::chain::{ChainParams, ChainState, Model};
use chainlab::experiment::{
    fit_power_law, mean_se, run_drift, run_packet, run_variance_floor, variance_jackknife,
    DriftConfig, FloorConfig, PacketConfig,
};
use chainlab::gibbs::{
    solve_theta, toda_digamma_residual, EnvelopeWeight, SamplerConfig, SamplerMethod,
};
use chainlab::integrate::{evolve, IntegratorConfig, Scheme};
use chainlab::lax::{
    density, gradient_j, hamiltonian_gradient, poisson_bracket, poisson_bracket_scale,
    quadratic_part, toda_integral, toda_integral_trace, CirculantSpec,
};
use chainlab::quad::adaptive_simpson_2d;
use chainlab::special::trigamma;
use chainlab::spectral::{
    circulant_eigs, decompose_first, decompose_second, hartley, AdmissibleVector,
};

fn random_state(n: usize, amp: f64, rng: &mut impl Rng) -> ChainState {
    let p: Vec<f64> = (0..n).map(|_| amp * rng.sample::<f64, _>(StandardNormal)).collect();
    let r: Vec<f64> = (0..n).map(|_| amp * rng.sample::<f64, _>(StandardNormal)).collect();
    ChainState::project(p, r)
}

fn sampler(seed: u64, burn: usize, thin: usize, chains: usize) -> SamplerConfig {
    SamplerConfig { method: SamplerMethod::ConstrainedMcmc, n_burn: burn, thin, seed, chains }
}

/// Criterion 1: the closed-form density route and the matrix-power trace
/// route agree to 1e-12 relative for every order m <= 10 and every ring size
/// 2m+1..=64, over 100 random manifold states each.
#[test]
fn ac01_density_route_matches_trace_route() {
    let mut rng = ChaCha12Rng::seed_from_u64(0xAC01);
    let mut worst = 0.0f64;
    let mut pairs = 0usize;
    for m in 1..=10usize {
        for n in (2 * m + 1)..=64 {
            pairs += 1;
            for _ in 0..100 {
                let s = random_state(n, 0.35, &mut rng);
                let a = toda_integral(&s, m).unwrap();
                let b = toda_integral_trace(&s, m).unwrap();
                let rel = (a - b).abs() / a.abs().max(1.0);
                worst = worst.max(rel);
                assert!(rel <= 1e-12, "m = {m}, n = {n}: rel err {rel:.3e}");
            }
        }
    }
    println!("AC-01 density-vs-trace: PASS ({pairs} (m,n) pairs, worst rel err {worst:.2e})");
}

/// Criterion 2: the generated term lists of orders 1..4 equal the hand
/// expansions exactly, integer coefficients included.
#[test]
fn ac02_explicit_term_lists_low_orders() {
    // order 1: -p
    let d1 = density(1).unwrap();
    assert_eq!(d1.terms.len(), 1);
    let t = &d1.terms[0];
    assert_eq!((t.sign, t.rho, t.n_exp.as_slice(), t.k_exp.as_slice()), (-1, 1, &[][..], &[1][..]));

    // order 2: p² + e^{-r_0} + e^{-r_{-1}}
    let d2 = density(2).unwrap();
    let got: Vec<(i8, u64, Vec<u32>, Vec<u32>)> = d2
        .terms
        .iter()
        .map(|t| (t.sign, t.rho, t.n_exp.clone(), t.k_exp.clone()))
        .collect();
    assert_eq!(
        got,
        vec![
            (1, 1, vec![0, 0], vec![0, 2, 0]),
            (1, 1, vec![0, 1], vec![0, 0, 0]),
            (1, 1, vec![1, 0], vec![0, 0, 0]),
        ]
    );

    // order 3: -p³ - e^{-r_0}(2p_0 + p_1) - e^{-r_{-1}}(2p_0 + p_{-1})
    let d3 = density(3).unwrap();
    let got: Vec<(i8, u64, Vec<u32>, Vec<u32>)> = d3
        .terms
        .iter()
        .map(|t| (t.sign, t.rho, t.n_exp.clone(), t.k_exp.clone()))
        .collect();
    assert_eq!(
        got,
        vec![
            (-1, 1, vec![0, 0], vec![0, 3, 0]),
            (-1, 1, vec![0, 1], vec![0, 0, 1]),
            (-1, 2, vec![0, 1], vec![0, 1, 0]),
            (-1, 2, vec![1, 0], vec![0, 1, 0]),
            (-1, 1, vec![1, 0], vec![1, 0, 0]),
        ]
    );

    // order 4, aggregated over sites and divided by 4:
    // Σ p⁴/4 + (p_i² + p_i p_{i+1} + p_{i+1}²) e^{-r_i} + e^{-2r_i}/2 + e^{-r_i - r_{i+1}}
    let d4 = density(4).unwrap();
    assert_eq!(d4.terms.len(), 12);
    let mut rng = ChaCha12Rng::seed_from_u64(0xAC02);
    let n = 16;
    let s = random_state(n, 0.5, &mut rng);
    let e: Vec<f64> = s.r.iter().map(|&r| (-r).exp()).collect();
    let expect: f64 = (0..n)
        .map(|i| {
            let (a, b) = (s.p[i], s.p[(i + 1) % n]);
            a.powi(4) / 4.0
                + (a * a + a * b + b * b) * e[i]
                + 0.5 * e[i] * e[i]
                + e[i] * e[(i + 1) % n]
        })
        .sum();
    let got = toda_integral(&s, 4).unwrap();
    assert!((got - expect).abs() < 1e-12 * expect.abs());
    println!("AC-02 explicit-term-lists: PASS (orders 1..4 exact)");
}

/// Criterion 3: the bracket of every conserved quantity with the
/// exponential-chain Hamiltonian vanishes to 1e-10 relative, m <= 6, n = 32,
/// 1000 random states.
#[test]
fn ac03_bracket_with_flow_generator_vanishes() {
    let mut rng = ChaCha12Rng::seed_from_u64(0xAC03);
    let n = 32;
    let params = ChainParams::new(n, 1.0, 0.0, Model::Toda).unwrap();
    let mut worst = 0.0f64;
    for _ in 0..1000 {
        let s = random_state(n, 0.5, &mut rng);
        let gh = hamiltonian_gradient(&s, &params);
        for m in 1..=6usize {
            let gj = gradient_j(&s, m).unwrap();
            let rel = poisson_bracket(&gj, &gh).abs() / poisson_bracket_scale(&gj, &gh);
            worst = worst.max(rel);
            assert!(rel <= 1e-10, "m = {m}: relative bracket {rel:.3e}");
        }
    }
    println!("AC-03 bracket-exactness: PASS (1000 states, worst rel {worst:.2e})");
}

/// Criterion 4: along the integrated exponential-chain flow every conserved
/// quantity of order <= 6 drifts by less than 1e-6 relative over t = 1000
/// (4th-order scheme, dt = 0.01, n = 128, β = 64), and the drift falls about
/// 16x when dt is halved.
#[test]
fn ac04_conservation_under_integrated_flow() {
    let n = 128;
    let beta = 64.0;
    let tm = solve_theta(beta, Model::Toda, 0.0).unwrap();
    let cfg = sampler(0xAC04, 0, 5, 0);
    let mut rng = chainlab::gibbs::member_rng(cfg.seed, 0);
    let s = tm.sample_constrained(n, &cfg, &mut rng).unwrap();
    let params = ChainParams::new(n, beta, 0.0, Model::Toda).unwrap();

    let max_rel_drift = |dt: f64, m: usize| -> f64 {
        let icfg = IntegratorConfig::new(dt, Scheme::Yoshida4, vec![250.0, 500.0, 1000.0]).unwrap();
        let j0 = toda_integral(&s, m).unwrap();
        let scale = j0.abs().max(1.0);
        evolve(&s, &params, &icfg)
            .unwrap()
            .iter()
            .map(|(_, st)| (toda_integral(st, m).unwrap() - j0).abs() / scale)
            .fold(0.0, f64::max)
    };

    let mut worst = 0.0f64;
    for m in 1..=6usize {
        let drift = max_rel_drift(0.01, m);
        worst = worst.max(drift);
        assert!(drift <= 1e-6, "m = {m}: relative drift {drift:.3e}");
    }
    let d1 = max_rel_drift(0.01, 2);
    let d2 = max_rel_drift(0.005, 2);
    let ratio = d1 / d2;
    assert!(
        (10.0..30.0).contains(&ratio),
        "dt-halving ratio {ratio:.1} outside the 4th-order window"
    );
    println!("AC-04 flow-conservation: PASS (worst drift {worst:.2e}, halving ratio {ratio:.1})");
}

fn drift_acceptance_config(chi: f64, seed: u64) -> DriftConfig {
    DriftConfig {
        n: 256,
        chi,
        model: Model::Fput,
        beta_grid: vec![32.0, 64.0, 128.0, 256.0],
        m_list: vec![3],
        t_grid: vec![10.0, 20.0, 40.0, 50.0, 80.0],
        n_samples: 2000,
        delta1: 2.0,
        fit_t: 50.0,
        fit_beta: 64.0,
        dt: 0.02,
        scheme: Scheme::Yoshida4,
        sampler: sampler(seed, 0, 10, 16),
    }
}

/// The χ = 2 drift run is shared between criteria 5 and 6.
fn chi2_drift_report() -> &'static chainlab::experiment::ExperimentReport {
    use std::sync::OnceLock;
    static REPORT: OnceLock<chainlab::experiment::ExperimentReport> = OnceLock::new();
    REPORT.get_or_init(|| run_drift(&drift_acceptance_config(2.0, 0xAC05)).unwrap())
}

/// Criterion 5: drift of the order-3 quantity under the quartic flow at
/// n = 256, 2000 members, t = 50. The β-slope of the increment variance is
/// -4 ± 0.5 at χ = 2 and -5 ± 0.5 at χ = 1. The exceedance probabilities
/// obey the quadratic tail bound in every cell.
#[test]
fn ac05_drift_beta_scaling() {
    // χ = 2: third-order residual dominates
    let rep2 = chi2_drift_report();
    let f2 = rep2
        .fits
        .iter()
        .find(|f| f.quantity == "var_drift[m=3,t=50]" && f.axis == "beta")
        .expect("beta fit present");
    assert!(
        (f2.slope + 4.0).abs() <= 0.5,
        "chi = 2 beta-slope {:.3} not within -4 ± 0.5",
        f2.slope
    );

    // Chebyshev consistency across all cells
    for c in &rep2.cells {
        let bound = c.var_drift / (4.0 * c.var0);
        assert!(
            c.p_exceed <= bound + 3.0 * c.p_exceed_se + 1e-12,
            "tail bound violated at beta {} t {}",
            c.beta,
            c.t
        );
    }

    // χ = 1: the chain is a higher-order perturbation and gains a power
    let rep1 = run_drift(&drift_acceptance_config(1.0, 0xAC06)).unwrap();
    let f1 = rep1
        .fits
        .iter()
        .find(|f| f.quantity == "var_drift[m=3,t=50]" && f.axis == "beta")
        .expect("beta fit present");
    assert!(
        (f1.slope + 5.0).abs() <= 0.5,
        "chi = 1 beta-slope {:.3} not within -5 ± 0.5",
        f1.slope
    );
    assert_eq!(rep1.members_dropped + rep2.members_dropped, 0);
    println!(
        "AC-05 drift-beta-scaling: PASS (chi=2 slope {:.3} ± {:.3}, chi=1 slope {:.3} ± {:.3})",
        f2.slope, f2.stderr, f1.slope, f1.stderr
    );
}

/// Criterion 6 as pinned: at β = 64, χ = 2 the increment variance should
/// show slope 2 ± 0.2 against t over the grid {10, 20, 40, 80}.
///
/// KNOWN RED. The quadratic law is an upper bound that is saturated only
/// while the bracket autocorrelation survives; measured on this system that
/// window closes near t ≈ 1, and over the pinned grid the growth is
/// diffusive (slope ≈ 0.9, see `ac06_supplement_short_time_quadratic_law`
/// for the regime where the quadratic law holds, constant included). Kept
/// faithful to the stated criterion rather than refitted to pass.
#[test]
fn ac06_drift_t_scaling_on_pinned_grid() {
    let rep2 = chi2_drift_report();
    let rows: Vec<_> = rep2
        .cells
        .iter()
        .filter(|c| c.beta == 64.0 && c.t != 50.0)
        .collect();
    assert_eq!(rows.len(), 4);
    let xs: Vec<f64> = rows.iter().map(|c| c.t).collect();
    let ys: Vec<f64> = rows.iter().map(|c| c.var_drift).collect();
    let tfit = fit_power_law(&xs, &ys, None).unwrap();
    println!(
        "AC-06 drift-t-scaling (pinned grid): slope {:.3} ± {:.3}",
        tfit.slope, tfit.slope_stderr
    );
    assert!(
        (tfit.slope - 2.0).abs() <= 0.2,
        "t-slope {:.3} not within 2 ± 0.2 on t = 10..80: the quadratic bound \
         is saturated only below the bracket decorrelation time (t ≲ 1); on \
         this grid the growth is diffusive. See the short-time supplement.",
        tfit.slope
    );
}

/// Criterion 6, substance: inside the ballistic window the increment
/// variance follows the quadratic law with the bracket mean square as its
/// constant: var(t) = ⟨{J, H}²⟩ t², slope 2 ± 0.2 and the constant within
/// 4σ at the smallest time.
#[test]
fn ac06_supplement_short_time_quadratic_law() {
    let n = 256;
    let beta = 64.0;
    let chi = 2.0;
    let scfg = sampler(0xAC06B, 0, 10, 16);
    let tm = solve_theta(beta, Model::Fput, chi).unwrap();
    let states = tm.ensemble_constrained(n, &scfg, 1000).unwrap();
    let fput = ChainParams::new(n, beta, chi, Model::Fput).unwrap();
    let b2: Vec<f64> = states
        .iter()
        .map(|s| {
            let gj = gradient_j(s, 3).unwrap();
            let gh = hamiltonian_gradient(s, &fput);
            let b = poisson_bracket(&gj, &gh);
            b * b
        })
        .collect();
    let (msq, msq_se) = mean_se(&b2);

    let cfg = DriftConfig {
        n,
        chi,
        model: Model::Fput,
        beta_grid: vec![beta],
        m_list: vec![3],
        t_grid: vec![0.05, 0.1, 0.2, 0.4],
        n_samples: 1000,
        delta1: 2.0,
        fit_t: 0.4,
        fit_beta: beta,
        dt: 0.005,
        scheme: Scheme::Yoshida4,
        sampler: scfg,
    };
    let rep = run_drift(&cfg).unwrap();
    let xs: Vec<f64> = rep.cells.iter().map(|c| c.t).collect();
    let ys: Vec<f64> = rep.cells.iter().map(|c| c.var_drift).collect();
    let fit = fit_power_law(&xs, &ys, None).unwrap();
    assert!(
        (fit.slope - 2.0).abs() <= 0.2,
        "short-time slope {:.3} not within 2 ± 0.2",
        fit.slope
    );
    let c0 = &rep.cells[0];
    let predicted = msq * c0.t * c0.t;
    let tol = 4.0 * (c0.var_drift_se + msq_se * c0.t * c0.t);
    assert!(
        (c0.var_drift - predicted).abs() <= tol,
        "quadratic-law constant off: measured {:.4e} vs predicted {:.4e} ± {:.1e}",
        c0.var_drift,
        predicted,
        tol
    );
    println!(
        "AC-06 short-time supplement: PASS (slope {:.3} ± {:.3}, constant within {:.2} sigma)",
        fit.slope,
        fit.slope_stderr,
        (c0.var_drift - predicted).abs() / (c0.var_drift_se + msq_se * c0.t * c0.t)
    );
}

/// Criteria 7 and 8: equilibrium variance of the order-2 quantity scales
/// like n/β² (slopes -2 ± 0.2 in β at n = 256 and +1 ± 0.1 in n at β = 64),
/// and the Taylor tail of the order-4 quantity has β-slope -3 ± 0.3.
#[test]
fn ac07_ac08_variance_floor_and_tail() {
    let cfg = FloorConfig {
        model: Model::Toda,
        chi: 0.0,
        beta_grid: vec![32.0, 64.0, 128.0, 256.0],
        n_grid: vec![64, 128, 256, 512],
        n_fixed: 256,
        beta_fixed: 64.0,
        m_var: 2,
        m_tail: 4,
        n_samples: 1500,
        sampler: sampler(0xAC07, 0, 10, 16),
    };
    let rep = run_variance_floor(&cfg).unwrap();
    let get = |q: &str, axis: &str| {
        rep.fits
            .iter()
            .find(|f| f.quantity == q && f.axis == axis)
            .unwrap_or_else(|| panic!("fit {q}/{axis} missing"))
    };
    let fb = get("var0[m=2]", "beta");
    assert!((fb.slope + 2.0).abs() <= 0.2, "floor beta-slope {:.3}", fb.slope);
    let fn_ = get("var0[m=2]", "n");
    assert!((fn_.slope - 1.0).abs() <= 0.1, "floor n-slope {:.3}", fn_.slope);
    let ft = get("tail_var[m=4]", "beta");
    assert!((ft.slope + 3.0).abs() <= 0.3, "tail beta-slope {:.3}", ft.slope);
    println!(
        "AC-07 variance-floor: PASS (beta-slope {:.3} ± {:.3}, n-slope {:.3} ± {:.3})",
        fb.slope, fb.stderr, fn_.slope, fn_.stderr
    );
    println!("AC-08 tail-variance: PASS (beta-slope {:.3} ± {:.3})", ft.slope, ft.stderr);
}

/// Criterion 9: a 4-banded mode packet under the exponential-chain flow. The
/// worst ratio var(increment)/var(packet) over t <= 1e4 shows no growth in t
/// (plateau comparison and a statistically-zero linear trend in t²) and
/// decays in β with slope -1 ± 0.3.
#[test]
fn ac09_packet_constancy_under_integrable_flow() {
    let cfg = PacketConfig {
        n: 32,
        chi: 0.0,
        model: Model::Toda,
        beta_grid: vec![32.0, 64.0, 128.0, 256.0],
        packet_m: 4,
        packet_y: vec![1.0, 0.6, 0.25],
        t_grid: vec![10.0, 100.0, 1000.0, 3000.0, 10000.0],
        n_samples: 256,
        delta1: 2.0,
        trend_t_min: 99.0,
        dt: 0.05,
        scheme: Scheme::Yoshida4,
        sampler: sampler(0xAC09, 0, 10, 16),
    };
    let rep = run_packet(&cfg).unwrap();
    let ratio_fit = rep
        .fits
        .iter()
        .find(|f| f.quantity == "max_ratio" && f.axis == "beta")
        .expect("ratio fit present");
    assert!(
        (ratio_fit.slope + 1.0).abs() <= 0.3,
        "ratio beta-slope {:.3} not within -1 ± 0.3",
        ratio_fit.slope
    );
    for &beta in &cfg.beta_grid {
        let rows: Vec<_> = rep.cells.iter().filter(|c| c.beta == beta).collect();
        let early = rows
            .iter()
            .filter(|c| c.t <= 1000.0)
            .map(|c| c.var_drift / c.var0)
            .fold(0.0f64, f64::max);
        let late = rows
            .iter()
            .filter(|c| c.t > 1000.0)
            .map(|c| c.var_drift / c.var0)
            .fold(0.0f64, f64::max);
        assert!(
            late <= 2.0 * early,
            "beta {beta}: late ratio {late:.3e} grew past early {early:.3e}"
        );
        // statistically flat plateau: predicted change across the window
        // stays within a few error bars of the variance estimates
        let trend = rep
            .fits
            .iter()
            .find(|f| f.quantity == format!("var_drift_plateau[beta={beta}]") && f.axis == "t2")
            .expect("plateau trend fit present");
        let plateau_rows: Vec<_> = rows.iter().filter(|c| c.t > 99.0).collect();
        let t2_span = plateau_rows.iter().map(|c| c.t * c.t).fold(0.0f64, f64::max)
            - plateau_rows.iter().map(|c| c.t * c.t).fold(f64::MAX, f64::min);
        let se_max = plateau_rows.iter().map(|c| c.var_drift_se).fold(0.0f64, f64::max);
        assert!(
            trend.slope.abs() * t2_span <= 6.0 * se_max,
            "beta {beta}: trend {:.3e} x span {:.3e} exceeds 6 x se {:.3e}",
            trend.slope,
            t2_span,
            se_max
        );
    }
    println!(
        "AC-09 packet-constancy: PASS (ratio beta-slope {:.3} ± {:.3}, no t-growth)",
        ratio_fit.slope, ratio_fit.stderr
    );
}

/// Criterion 10: the constrained and tilted-product averages of e^{-r_0}
/// differ by O(1/n) (log-log slope -1 ± 0.3 over n = 32..256), and at n = 3
/// the constrained two-site correlation matches a 2-d hyperplane quadrature
/// oracle within 4 Monte Carlo sigma over 1e5 samples.
#[test]
fn ac10_measure_approximation() {
    let beta = 8.0;
    let chi = 1.0;
    let tm = solve_theta(beta, Model::Fput, chi).unwrap();
    let f_tilted = tm.mean(|r| (-r).exp()).unwrap();

    let mut xs = Vec::new();
    let mut ys = Vec::new();
    let mut ws = Vec::new();
    for (i, &n) in [32usize, 64, 128, 256].iter().enumerate() {
        let cfg = sampler(0xAC10 + i as u64, 10 * n, 10, 16);
        let members = 4_400_000 / n;
        let states = tm.ensemble_constrained(n, &cfg, members).unwrap();
        let vals: Vec<f64> = states
            .iter()
            .map(|s| s.r.iter().map(|&r| (-r).exp()).sum::<f64>() / n as f64)
            .collect();
        let (mean, se) = mean_se(&vals);
        let diff = (mean - f_tilted).abs();
        assert!(
            diff > 4.0 * se,
            "n = {n}: difference {diff:.3e} not resolved above noise {se:.3e}"
        );
        xs.push(n as f64);
        ys.push(diff);
        ws.push((diff / se).powi(2));
    }
    let fit = fit_power_law(&xs, &ys, Some(&ws)).unwrap();
    assert!(
        (fit.slope + 1.0).abs() <= 0.3,
        "decay slope {:.3} not within -1 ± 0.3",
        fit.slope
    );

    // three-site oracle
    let cfg = sampler(0xAC10AC10, 150, 3, 16);
    let members = 100_000;
    let states = tm.ensemble_constrained(3, &cfg, members).unwrap();
    let prods: Vec<f64> = states.iter().map(|s| s.r[0] * s.r[1]).collect();
    let (mc, mc_se) = mean_se(&prods);
    let w = |r: f64| -beta * chainlab::chain::potential(r, Model::Fput, chi);
    let f2 = |a: f64, b: f64| (w(a) + w(b) + w(-a - b)).exp();
    let lim = 6.0 / beta.sqrt();
    let z = adaptive_simpson_2d(&f2, -lim, lim, -lim, lim, 1e-11).unwrap();
    let num = adaptive_simpson_2d(&|a, b| a * b * f2(a, b), -lim, lim, -lim, lim, 1e-11).unwrap();
    let oracle = num / z;
    assert!(
        (mc - oracle).abs() <= 4.0 * mc_se,
        "n = 3 correlation {mc:.6e} vs quadrature {oracle:.6e} ± {mc_se:.1e}"
    );
    println!(
        "AC-10 measure-approximation: PASS (decay slope {:.3} ± {:.3}, 3-site oracle within {:.1} sigma)",
        fit.slope,
        fit.slope_stderr,
        (mc - oracle).abs() / mc_se
    );
}

/// Criterion 11: quadrature moments of the tilted displacement scale like
/// β^{-k/2} within ±0.05 for k = 2, 4 and both models, and the exponential
/// chain's second moment matches the trigamma identity to 1e-8.
#[test]
fn ac11_moment_scaling() {
    let betas = [64.0, 128.0, 256.0];
    for (model, chi) in [(Model::Toda, 0.0), (Model::Fput, 1.0)] {
        for k in [2u32, 4] {
            let ys: Vec<f64> = betas
                .iter()
                .map(|&b| {
                    solve_theta(b, model, chi)
                        .unwrap()
                        .moment(k, EnvelopeWeight::Plain, 0.0, 0.0, 0, 0)
                        .unwrap()
                })
                .collect();
            let fit = fit_power_law(&betas, &ys, None).unwrap();
            assert!(
                (fit.slope + f64::from(k) / 2.0).abs() <= 0.05,
                "{model:?} k = {k}: slope {:.4}",
                fit.slope
            );
        }
    }
    let tm = solve_theta(64.0, Model::Toda, 0.0).unwrap();
    let m2 = tm.moment(2, EnvelopeWeight::Plain, 0.0, 0.0, 0, 0).unwrap();
    let tri = trigamma(tm.theta + tm.beta);
    assert!((m2 - tri).abs() <= 1e-8, "trigamma residual {:.3e}", (m2 - tri).abs());
    assert!(toda_digamma_residual(&tm) <= 1e-9);
    println!(
        "AC-11 moment-scaling: PASS (slopes within ±0.05, trigamma residual {:.2e})",
        (m2 - tri).abs()
    );
}

/// Criterion 12: spectral algebra. Transform involution and norm
/// preservation at 1e-12; circulant diagonalization against a dense oracle
/// at n = 8 within 1e-10; banded decomposition round trips within 1e-10 for
/// orders up to 8.
#[test]
fn ac12_spectral_algebra() {
    let mut rng = ChaCha12Rng::seed_from_u64(0xAC12);
    for n in [8usize, 64, 256] {
        let x: Vec<f64> = (0..n).map(|_| rng.sample::<f64, _>(StandardNormal)).collect();
        let y = hartley(&x);
        let z = hartley(&y);
        let nx: f64 = x.iter().map(|v| v * v).sum::<f64>().sqrt();
        let ny: f64 = y.iter().map(|v| v * v).sum::<f64>().sqrt();
        assert!((nx - ny).abs() <= 1e-12 * nx, "norm defect at n = {n}");
        for j in 0..n {
            assert!((z[j] - x[j]).abs() <= 1e-12 * nx, "involution defect at n = {n}");
        }
    }

    // dense diagonalization oracle at n = 8
    let n = 8;
    let mut rep = vec![0.0; n];
    rep[0] = 0.4;
    rep[1] = 1.3;
    rep[n - 1] = 1.3;
    rep[2] = -0.8;
    rep[n - 2] = -0.8;
    let spec = CirculantSpec { rep };
    let eigs = circulant_eigs(&spec).unwrap();
    let a = spec.dense();
    let tau = 2.0 * std::f64::consts::PI / n as f64;
    let h: Vec<Vec<f64>> = (0..n)
        .map(|j| {
            (0..n)
                .map(|k| {
                    let x = tau * (j * k) as f64;
                    (x.cos() + x.sin()) / (n as f64).sqrt()
                })
                .collect()
        })
        .collect();
    let mut resid = 0.0f64;
    for i in 0..n {
        for j in 0..n {
            let mut acc = 0.0;
            for k in 0..n {
                for l in 0..n {
                    acc += h[i][k] * a[k][l] * h[l][j];
                }
            }
            let expect = if i == j { eigs[i] } else { 0.0 };
            resid = resid.max((acc - expect).abs());
        }
    }
    assert!(resid <= 1e-10, "diagonalization residual {resid:.3e}");

    // decomposition round trips (the calls enforce 1e-10 residuals)
    let nn = 48;
    for m in [2usize, 4, 6, 8] {
        let mt = m / 2;
        let y: Vec<f64> = (0..=mt).map(|_| rng.sample::<f64, _>(StandardNormal)).collect();
        let g = AdmissibleVector::new(nn, m, y).unwrap();
        decompose_second(&g, nn).unwrap();
        let pairs: Vec<f64> = (0..mt.max(1))
            .map(|_| rng.sample::<f64, _>(StandardNormal))
            .collect();
        decompose_first(&pairs, nn).unwrap();
    }
    println!("AC-12 spectral-algebra: PASS (diagonalization residual {resid:.2e})");
}

/// Supplementary check from the harness contract: the quartic flow makes the
/// same packet pipeline show t²-growth where the integrable flow stays flat.
#[test]
fn packet_pipeline_contrast_under_quartic_flow() {
    let cfg = PacketConfig {
        n: 32,
        chi: 2.0,
        model: Model::Fput,
        beta_grid: vec![16.0],
        packet_m: 4,
        packet_y: vec![1.0, 0.6, 0.25],
        t_grid: vec![5.0, 10.0, 20.0, 40.0],
        n_samples: 256,
        delta1: 2.0,
        trend_t_min: 0.0,
        dt: 0.02,
        scheme: Scheme::Yoshida4,
        sampler: sampler(0xFACE, 0, 10, 16),
    };
    let rep = run_packet(&cfg).unwrap();
    // growth contrast: the integrable flow is capped at 2x across the grid
    // (see the plateau bound asserted above); the quartic flow must clear
    // that cap decisively even with the variance floor underneath
    let at = |t: f64| rep.cells.iter().find(|c| c.t == t).unwrap().var_drift;
    let growth = at(40.0) / at(5.0);
    assert!(
        growth >= 3.0,
        "quartic flow should grow the packet increment variance, got {growth:.2}x"
    );
    println!("packet contrast under quartic flow: growth {growth:.2}x between t = 5 and 40");
}

/// Supplementary from the harness contract: the bracket mean square under
/// the quartic measure scales like n/β⁴ at χ = 2, and the bracket with the
/// exponential Hamiltonian vanishes on every single sample.
#[test]
fn bracket_mean_square_scaling() {
    let cfg = chainlab::experiment::BracketConfig {
        chi: 2.0,
        beta_grid: vec![32.0, 64.0, 128.0, 256.0],
        n_grid: vec![64, 128, 256],
        n_fixed: 128,
        beta_fixed: 64.0,
        m_list: vec![3],
        n_samples: 500,
        sampler: sampler(0xB4AC, 0, 10, 16),
    };
    let rep = chainlab::experiment::run_bracket_variance(&cfg).unwrap();
    let fb = rep
        .fits
        .iter()
        .find(|f| f.quantity == "bracket_sq[m=3]" && f.axis == "beta")
        .unwrap();
    assert!((fb.slope + 4.0).abs() <= 0.5, "beta-slope {:.3}", fb.slope);
    let fnn = rep
        .fits
        .iter()
        .find(|f| f.quantity == "bracket_sq[m=3]" && f.axis == "n")
        .unwrap();
    assert!((fnn.slope - 1.0).abs() <= 0.2, "n-slope {:.3}", fnn.slope);
    // run_bracket_variance fails outright on any per-sample zero-bracket or
    // residual-identity violation, so reaching this point certifies both
    println!(
        "bracket mean-square scaling: beta-slope {:.3} ± {:.3}, n-slope {:.3} ± {:.3}",
        fb.slope, fb.stderr, fnn.slope, fnn.stderr
    );
}

/// Supplementary: jackknife error bars shrink like 1/sqrt(members).
#[test]
fn jackknife_error_scaling_on_real_ensembles() {
    let beta = 16.0;
    let tm = solve_theta(beta, Model::Toda, 0.0).unwrap();
    let n = 16;
    let draw_se = |members: usize, seed: u64| -> f64 {
        let cfg = sampler(seed, 20, 2, 8);
        let states = tm.ensemble_constrained(n, &cfg, members).unwrap();
        let js: Vec<f64> = states.iter().map(|s| toda_integral(s, 2).unwrap()).collect();
        variance_jackknife(&js).1
    };
    let reps = 12;
    let se_small: f64 = (0..reps).map(|i| draw_se(400, 100 + i)).sum::<f64>() / reps as f64;
    let se_large: f64 = (0..reps).map(|i| draw_se(800, 200 + i)).sum::<f64>() / reps as f64;
    let ratio = se_small / se_large;
    let expect = 2.0f64.sqrt();
    assert!(
        (ratio - expect).abs() <= 0.2 * expect,
        "se ratio {ratio:.3} vs sqrt(2)"
    );
    println!("jackknife scaling: se ratio {ratio:.3} (expect {expect:.3})");
}
