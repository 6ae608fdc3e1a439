//! Built-in verification battery: cross-checks every major identity of the
//! library against an independent route and prints a PASS/FAIL table.

use std::time::Instant;

use rand::prelude::*;
use rand_chacha::ChaCha12Rng;
use rand_distr::StandardNormal;

use chainlab::chain::{ChainParams, ChainState, Model};
use chainlab::gibbs::{solve_theta, toda_digamma_residual, EnvelopeWeight};
use chainlab::lax::{
    density, gradient_j, gradient_j_density, hamiltonian_gradient, poisson_bracket,
    poisson_bracket_scale, quadratic_part, toda_integral, toda_integral_trace, IntegralDensity,
};
use chainlab::spectral::{circulant_eigs, decompose_second, hartley, AdmissibleVector};
use chainlab::special::trigamma;

/// Which single coefficient to corrupt, for negative-control runs.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum FaultInjection {
    None,
    /// bump one path count in the order-4 density
    Rho,
}

pub struct CheckOutcome {
    pub name: &'static str,
    pub pass: bool,
    pub detail: String,
    pub seconds: f64,
}

fn random_state(n: usize, amp: f64, rng: &mut impl Rng) -> ChainState {
    let p: Vec<f64> = (0..n).map(|_| amp * rng.sample::<f64, _>(StandardNormal)).collect();
    let r: Vec<f64> = (0..n).map(|_| amp * rng.sample::<f64, _>(StandardNormal)).collect();
    ChainState::project(p, r)
}

fn run_check(
    name: &'static str,
    out: &mut Vec<CheckOutcome>,
    body: impl FnOnce() -> Result<String, String>,
) {
    let t0 = Instant::now();
    let (pass, detail) = match body() {
        Ok(d) => (true, d),
        Err(d) => (false, d),
    };
    out.push(CheckOutcome { name, pass, detail, seconds: t0.elapsed().as_secs_f64() });
}

fn eval_density_sum(d: &IntegralDensity, s: &ChainState) -> f64 {
    let mut acc = 0.0;
    for j in 0..s.len() {
        acc += d.eval(s, j).unwrap();
    }
    acc / d.m as f64
}

/// Run the battery. `quick` trims grid sizes to stay within a minute.
pub fn run_battery(quick: bool, fault: FaultInjection) -> Vec<CheckOutcome> {
    let mut out = Vec::new();
    let mut rng = ChaCha12Rng::seed_from_u64(0xC0FFEE);

    let m_max = if quick { 8 } else { 10 };
    let states_per = if quick { 10 } else { 100 };

    // closed-form density against the matrix-power trace
    {
        let mut worst = 0.0f64;
        let mut fail = String::new();
        for m in 1..=m_max {
            // a corrupted copy of the order-4 density for the negative control
            let d = {
                let base = density(m).unwrap();
                if fault == FaultInjection::Rho && m == 4 {
                    let mut dd = (*base).clone();
                    dd.terms[0].rho += 1;
                    std::sync::Arc::new(dd)
                } else {
                    base
                }
            };
            for n in [2 * m + 1, 24, 48] {
                if n <= 2 * m {
                    continue;
                }
                for _ in 0..states_per {
                    let s = random_state(n, 0.4, &mut rng);
                    let a = eval_density_sum(&d, &s);
                    let b = toda_integral_trace(&s, m).unwrap();
                    let rel = (a - b).abs() / a.abs().max(1.0);
                    worst = worst.max(rel);
                    if rel > 1e-12 && fail.is_empty() {
                        fail = format!("m = {m}, n = {n}: rel err {rel:.3e}");
                    }
                }
            }
        }
        run_check("density-vs-trace", &mut out, || {
            if fail.is_empty() {
                Ok(format!("worst rel err {worst:.2e}"))
            } else {
                Err(fail)
            }
        });
    }

    // explicit low-order forms
    run_check("explicit-low-orders", &mut out, || {
        let mut rng = ChaCha12Rng::seed_from_u64(7);
        let n = 16;
        let s = random_state(n, 0.4, &mut rng);
        let e: Vec<f64> = s.r.iter().map(|&r| (-r).exp()).collect();
        let j2: f64 = (0..n).map(|i| 0.5 * s.p[i] * s.p[i] + e[i]).sum();
        let j3: f64 = -(0..n)
            .map(|i| s.p[i].powi(3) / 3.0 + (s.p[i] + s.p[(i + 1) % n]) * e[i])
            .sum::<f64>();
        let j4: f64 = (0..n)
            .map(|i| {
                let (a, b) = (s.p[i], s.p[(i + 1) % n]);
                a.powi(4) / 4.0 + (a * a + a * b + b * b) * e[i] + 0.5 * e[i] * e[i]
                    + e[i] * e[(i + 1) % n]
            })
            .sum::<f64>();
        for (m, expect) in [(2, j2), (3, j3), (4, j4)] {
            let got = toda_integral(&s, m).unwrap();
            if (got - expect).abs() > 1e-11 * expect.abs().max(1.0) {
                return Err(format!("order {m}: {got} vs {expect}"));
            }
        }
        Ok("orders 2..4 match hand formulas".into())
    });

    // analytic gradients against central differences and the density route
    run_check("gradient-consistency", &mut out, || {
        let mut rng = ChaCha12Rng::seed_from_u64(17);
        let n = 16;
        let s = random_state(n, 0.4, &mut rng);
        let h = 1e-6;
        let mut worst = 0.0f64;
        for m in 1..=if quick { 5 } else { 6 } {
            let g = gradient_j(&s, m).map_err(|e| e.to_string())?;
            let gd = gradient_j_density(&s, m).map_err(|e| e.to_string())?;
            for j in 0..n {
                let rel = (g.gp[j] - gd.gp[j]).abs() / g.gp[j].abs().max(1.0);
                worst = worst.max(rel);
            }
            for j in [0usize, 5, 11] {
                let mut sp = s.clone();
                sp.p[j] += h;
                let mut sm = s.clone();
                sm.p[j] -= h;
                let fd = (toda_integral(&sp, m).unwrap() - toda_integral(&sm, m).unwrap())
                    / (2.0 * h);
                let rel = (fd - g.gp[j]).abs() / g.gp[j].abs().max(1.0);
                if rel > 1e-6 {
                    return Err(format!("m = {m}, site {j}: fd rel err {rel:.3e}"));
                }
            }
        }
        Ok(format!("routes agree, worst rel err {worst:.2e}"))
    });

    // brackets with the exponential-chain generator vanish
    run_check("bracket-zero", &mut out, || {
        let mut rng = ChaCha12Rng::seed_from_u64(23);
        let n = 32;
        let params = ChainParams::new(n, 1.0, 0.0, Model::Toda).unwrap();
        let mut worst = 0.0f64;
        for _ in 0..if quick { 50 } else { 200 } {
            let s = random_state(n, 0.5, &mut rng);
            let gh = hamiltonian_gradient(&s, &params);
            for m in 1..=6 {
                let gj = gradient_j(&s, m).map_err(|e| e.to_string())?;
                let pb = poisson_bracket(&gj, &gh).abs();
                let rel = pb / poisson_bracket_scale(&gj, &gh);
                worst = worst.max(rel);
                if rel > 1e-10 {
                    return Err(format!("m = {m}: rel bracket {rel:.3e}"));
                }
            }
        }
        Ok(format!("worst rel bracket {worst:.2e}"))
    });

    // transform involution and norm preservation
    run_check("hartley-involution", &mut out, || {
        let mut rng = ChaCha12Rng::seed_from_u64(29);
        for n in [8usize, 64, 256] {
            let x: Vec<f64> = (0..n).map(|_| rng.sample::<f64, _>(StandardNormal)).collect();
            let y = hartley(&x);
            let z = hartley(&y);
            let nx: f64 = x.iter().map(|v| v * v).sum::<f64>().sqrt();
            let ny: f64 = y.iter().map(|v| v * v).sum::<f64>().sqrt();
            if (nx - ny).abs() > 1e-12 * nx {
                return Err(format!("n = {n}: norm defect"));
            }
            for j in 0..n {
                if (z[j] - x[j]).abs() > 1e-12 * nx {
                    return Err(format!("n = {n}: involution defect at {j}"));
                }
            }
        }
        Ok("involution and norm hold at 1e-12".into())
    });

    // circulant diagonalization by the transform
    run_check("circulant-diagonalization", &mut out, || {
        let n = 8;
        let mut rep = vec![0.0; n];
        rep[0] = 0.3;
        rep[1] = -1.2;
        rep[n - 1] = -1.2;
        rep[3] = 0.7;
        rep[n - 3] = 0.7;
        let spec = chainlab::lax::CirculantSpec { rep };
        let eigs = circulant_eigs(&spec).map_err(|e| e.to_string())?;
        let a = spec.dense();
        let h: Vec<Vec<f64>> = {
            let tau = 2.0 * std::f64::consts::PI / n as f64;
            (0..n)
                .map(|j| {
                    (0..n)
                        .map(|k| {
                            let x = tau * (j * k) as f64;
                            (x.cos() + x.sin()) / (n as f64).sqrt()
                        })
                        .collect()
                })
                .collect()
        };
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
        if resid > 1e-10 {
            return Err(format!("residual {resid:.3e}"));
        }
        Ok(format!("residual {resid:.2e}"))
    });

    // tilt solve and its closed-form identities
    run_check("tilt-moments", &mut out, || {
        let tm = solve_theta(100.0, Model::Toda, 0.0).map_err(|e| e.to_string())?;
        if !(1.0 / 3.0..=2.0).contains(&tm.theta) {
            return Err(format!("tilt {} outside [1/3, 2]", tm.theta));
        }
        let dig = toda_digamma_residual(&tm);
        if dig > 1e-9 {
            return Err(format!("digamma residual {dig:.3e}"));
        }
        let tm64 = solve_theta(64.0, Model::Toda, 0.0).map_err(|e| e.to_string())?;
        let m2 = tm64
            .moment(2, EnvelopeWeight::Plain, 0.0, 0.0, 0, 0)
            .map_err(|e| e.to_string())?;
        let tri = trigamma(tm64.theta + tm64.beta);
        if (m2 - tri).abs() > 1e-8 {
            return Err(format!("second moment vs trigamma: {:.3e}", (m2 - tri).abs()));
        }
        let tmh = solve_theta(25.0, Model::Harmonic, 0.0).map_err(|e| e.to_string())?;
        if tmh.theta.abs() > 1e-9 {
            return Err(format!("harmonic tilt {} not zero", tmh.theta));
        }
        Ok(format!("digamma residual {dig:.2e}"))
    });

    // banded decomposition round trip
    run_check("admissible-decomposition", &mut out, || {
        let n = 40;
        let mut rng = ChaCha12Rng::seed_from_u64(31);
        for m in [2usize, 4, 6, 8] {
            let mt = m / 2;
            let y: Vec<f64> = (0..=mt).map(|_| rng.sample::<f64, _>(StandardNormal)).collect();
            let g = AdmissibleVector::new(n, m, y).map_err(|e| e.to_string())?;
            // decompose_second rejects reconstructions above 1e-10 itself
            decompose_second(&g, n).map_err(|e| e.to_string())?;
            let _ = quadratic_part(m, n).map_err(|e| e.to_string())?;
        }
        Ok("round trips below 1e-10 for orders 2..8".into())
    });

    out
}

/// Render the outcome table; returns overall success.
pub fn print_battery(results: &[CheckOutcome]) -> bool {
    let mut all = true;
    println!("{:<28} {:<6} {:>8}  detail", "check", "status", "time[s]");
    for r in results {
        all &= r.pass;
        println!(
            "{:<28} {:<6} {:>8.2}  {}",
            r.name,
            if r.pass { "PASS" } else { "FAIL" },
            r.seconds,
            r.detail
        );
    }
    all
}
