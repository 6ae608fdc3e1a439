//! Tilted product measures, samplers for the constrained Gibbs measures, and
//! quadrature oracles for their moments.
//!
//! The constrained measure fixes Σp = Σr = 0. Its tractable stand-in is the
//! tilted product measure with single-site weight e^{−θr−βV(r)}, where θ(β)
//! is chosen so that ⟨r⟩_θ = 0; site observables then agree with constrained
//! averages up to O(1/n). Momenta are exactly Gaussian in both measures.

use rand::prelude::*;
use rand_chacha::ChaCha12Rng;
use rand_distr::{Distribution, Gamma, StandardNormal};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::chain::{ddpotential, dpotential, potential, ChainState, Model};
use crate::quad::{adaptive_simpson, bracket_unimodal};
use crate::special::digamma;
use crate::{Error, Result};

/// A solved tilted measure: β, θ(β), the normalizer, and cached sampler
/// machinery for the single-site displacement marginal.
#[derive(Debug, Clone)]
pub struct ThetaMeasure {
    pub beta: f64,
    pub theta: f64,
    pub model: Model,
    pub chi: f64,
    /// z_θ(β) = ∫ e^{−θr−βV(r)} dr.
    pub z: f64,
    /// |⟨r⟩_θ| left after the tilt solve.
    pub r_mean_residual: f64,
    /// minimizer of θr + βV(r)
    pub mode: f64,
    /// Laplace width 1/√(βV''(mode))
    pub sigma: f64,
    prop_sigma: f64,
    log_env: f64,
}

/// Residual demanded of the tilt solve.
const THETA_RESIDUAL: f64 = 1e-10;

/// Consecutive-rejection limit of the envelope sampler.
const STALL_LIMIT: usize = 10_000;

fn log_weight(r: f64, theta: f64, beta: f64, model: Model, chi: f64) -> f64 {
    -theta * r - beta * potential(r, model, chi)
}

/// Minimizer of θr + βV(r).
fn weight_mode(theta: f64, beta: f64, model: Model, chi: f64) -> f64 {
    match model {
        Model::Toda => -(1.0 + theta / beta).ln(),
        Model::Harmonic => -theta / beta,
        Model::Fput => {
            // g(r) = θ + βV'(r) is increasing through the root for χ > 0
            let g = |r: f64| theta + beta * dpotential(r, Model::Fput, chi);
            let (mut lo, mut hi) = (-1.0, 1.0);
            while g(lo) > 0.0 {
                lo *= 2.0;
            }
            while g(hi) < 0.0 {
                hi *= 2.0;
            }
            for _ in 0..200 {
                let mid = 0.5 * (lo + hi);
                if g(mid) > 0.0 {
                    hi = mid;
                } else {
                    lo = mid;
                }
            }
            0.5 * (lo + hi)
        }
    }
}

/// ∫ f(r) e^{−θr−βV(r)} dr over the effective support.
///
/// The domain is pre-split into panels no wider than the curvature scale σ
/// before adaptive refinement; a single Simpson panel can otherwise miss the
/// peak entirely when f has a zero there.
fn tilted_integral(
    f: impl Fn(f64) -> f64,
    theta: f64,
    beta: f64,
    model: Model,
    chi: f64,
) -> Result<f64> {
    let mode = weight_mode(theta, beta, model, chi);
    let sigma = 1.0 / (beta * ddpotential(mode, model, chi).max(1e-12)).sqrt();
    let lw = |r: f64| log_weight(r, theta, beta, model, chi);
    let (lo, hi) = bracket_unimodal(lw, mode, sigma, 45.0);
    let peak = lw(mode);
    let g = |r: f64| f(r) * (lw(r) - peak).exp();
    let panels = (((hi - lo) / sigma).ceil() as usize).clamp(8, 256);
    let width = (hi - lo) / panels as f64;
    let mut acc = 0.0;
    for i in 0..panels {
        let a = lo + i as f64 * width;
        acc += adaptive_simpson(&g, a, a + width, 1e-13 / panels as f64)?;
    }
    Ok(acc * peak.exp())
}

/// Solve for θ(β) with ⟨r⟩_θ = 0 by bisection, then cache the sampler
/// envelope. For the quartic chain the density is normalizable only for
/// χ > 0; χ = 0 is rejected.
pub fn solve_theta(beta: f64, model: Model, chi: f64) -> Result<ThetaMeasure> {
    if !(beta >= 1.0) {
        return Err(Error::InvalidParams(format!("beta = {beta} must be >= 1")));
    }
    if model == Model::Fput && chi <= 0.0 {
        return Err(Error::NonNormalizable(
            "quartic coefficient must be positive: the cubic term dominates otherwise".into(),
        ));
    }
    // mean is strictly decreasing in θ (its derivative is −var)
    let mean_r = |theta: f64| -> Result<f64> {
        let z = tilted_integral(|_| 1.0, theta, beta, model, chi)?;
        let num = tilted_integral(|r| r, theta, beta, model, chi)?;
        Ok(num / z)
    };
    let theta_min = if model == Model::Toda { (-beta + 0.5).max(-10.0) } else { -10.0 };
    let theta_max = 10.0;
    let (mut lo, mut hi) = (theta_min, theta_max);
    if !(mean_r(lo)? > 0.0 && mean_r(hi)? < 0.0) {
        return Err(Error::NoBracket(lo, hi));
    }
    let mut mid = 0.0;
    let mut resid = f64::INFINITY;
    for _ in 0..200 {
        mid = 0.5 * (lo + hi);
        let m = mean_r(mid)?;
        resid = m.abs();
        if resid <= THETA_RESIDUAL * 0.3 {
            break;
        }
        if m > 0.0 {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    if resid > THETA_RESIDUAL {
        return Err(Error::QuadratureNonConvergent(resid));
    }
    let theta = mid;
    let z = tilted_integral(|_| 1.0, theta, beta, model, chi)?;
    let mode = weight_mode(theta, beta, model, chi);
    let sigma = 1.0 / (beta * ddpotential(mode, model, chi).max(1e-12)).sqrt();

    // rejection envelope for the quartic chain: Gaussian proposal at the
    // mode, log-constant maximized on a grid plus a curvature-safe margin.
    // The proposal is widened past the Laplace width so the cubic bulge on
    // the soft side stays under the envelope without a large constant.
    let prop_sigma = 1.5 * sigma;
    let mut log_env = f64::NEG_INFINITY;
    if model == Model::Fput {
        let lw = |r: f64| log_weight(r, theta, beta, model, chi);
        let peak = lw(mode);
        let g = |r: f64| {
            lw(r) - peak + 0.5 * (r - mode).powi(2) / (prop_sigma * prop_sigma)
        };
        let span = 14.0 * sigma;
        let steps = 8000;
        for i in 0..=steps {
            let r = mode - span + 2.0 * span * i as f64 / steps as f64;
            log_env = log_env.max(g(r));
        }
        log_env += 1e-4;
    }

    let tm = ThetaMeasure {
        beta,
        theta,
        model,
        chi,
        z,
        r_mean_residual: resid,
        mode,
        sigma,
        prop_sigma,
        log_env,
    };
    if model == Model::Toda && beta >= 16.0 && !(1.0 / 3.0..=2.0).contains(&theta) {
        return Err(Error::InvalidParams(format!(
            "solved tilt {theta} escaped [1/3, 2] at beta = {beta}"
        )));
    }
    Ok(tm)
}

/// Envelope weights for the moment oracle: products of min/max(e^{−c·r}, 1)
/// factors that bracket the smoothed exponential remainders.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum EnvelopeWeight {
    Plain,
    MinExp,
    MaxExp,
}

impl ThetaMeasure {
    fn log_weight(&self, r: f64) -> f64 {
        log_weight(r, self.theta, self.beta, self.model, self.chi)
    }

    /// ⟨f(r)⟩_θ by adaptive quadrature.
    pub fn mean(&self, f: impl Fn(f64) -> f64) -> Result<f64> {
        let num = tilted_integral(f, self.theta, self.beta, self.model, self.chi)?;
        Ok(num / self.z)
    }

    /// ⟨r^k · w(r)⟩_θ where w is the requested exponential envelope with
    /// integer strengths d, d' and profile weights n_exp, s_exp.
    pub fn moment(
        &self,
        k: u32,
        weight: EnvelopeWeight,
        n_exp: f64,
        s_exp: f64,
        d: u32,
        dp: u32,
    ) -> Result<f64> {
        if k > 8 {
            return Err(Error::InvalidParams(format!("moment order {k} exceeds 8")));
        }
        let env = move |r: f64| -> f64 {
            match weight {
                EnvelopeWeight::Plain => 1.0,
                EnvelopeWeight::MinExp => {
                    (-(f64::from(d) * n_exp * r)).exp().min(1.0)
                        * (-(f64::from(dp) * s_exp * r)).exp().min(1.0)
                }
                EnvelopeWeight::MaxExp => {
                    (-(f64::from(d) * n_exp * r)).exp().max(1.0)
                        * (-(f64::from(dp) * s_exp * r)).exp().max(1.0)
                }
            }
        };
        self.mean(move |r| r.powi(k as i32) * env(r))
    }

    /// One displacement draw from the tilted marginal.
    ///
    /// The exponential chain reduces exactly to a Gamma variable through
    /// x = e^{−r}; the harmonic marginal is Gaussian; the quartic chain uses
    /// envelope rejection against the cached Gaussian proposal.
    pub fn sample_r(&self, rng: &mut impl Rng) -> Result<f64> {
        match self.model {
            Model::Toda => {
                let gamma = Gamma::new(self.theta + self.beta, 1.0 / self.beta)
                    .map_err(|e| Error::InvalidParams(e.to_string()))?;
                Ok(-gamma.sample(rng).ln())
            }
            Model::Harmonic => {
                let z: f64 = rng.sample(StandardNormal);
                Ok(self.mode + z / self.beta.sqrt())
            }
            Model::Fput => {
                let peak = self.log_weight(self.mode);
                for _ in 0..STALL_LIMIT {
                    let z: f64 = rng.sample(StandardNormal);
                    let r = self.mode + self.prop_sigma * z;
                    let log_ratio =
                        self.log_weight(r) - peak + 0.5 * z * z - self.log_env;
                    let u: f64 = rng.gen();
                    if u.ln() < log_ratio {
                        return Ok(r);
                    }
                }
                Err(Error::RejectionStall(STALL_LIMIT))
            }
        }
    }

    /// Unconstrained product draw: iid Gaussian momenta of variance 1/β and
    /// iid tilted displacements. Returns the acceptance statistics of the
    /// envelope sampler alongside the draw.
    pub fn sample_product(
        &self,
        n: usize,
        rng: &mut impl Rng,
    ) -> Result<(Vec<f64>, Vec<f64>)> {
        let sd = 1.0 / self.beta.sqrt();
        let p = (0..n)
            .map(|_| sd * rng.sample::<f64, _>(StandardNormal))
            .collect();
        let mut r = Vec::with_capacity(n);
        for _ in 0..n {
            r.push(self.sample_r(rng)?);
        }
        Ok((p, r))
    }

    /// Empirical acceptance rate of the envelope sampler over `trials` draws.
    pub fn rejection_acceptance_rate(&self, trials: usize, rng: &mut impl Rng) -> Result<f64> {
        if self.model != Model::Fput {
            return Ok(1.0);
        }
        let peak = self.log_weight(self.mode);
        let mut accepted = 0usize;
        let mut proposed = 0usize;
        while accepted < trials {
            let z: f64 = rng.sample(StandardNormal);
            let r = self.mode + self.prop_sigma * z;
            let log_ratio = self.log_weight(r) - peak + 0.5 * z * z - self.log_env;
            proposed += 1;
            if rng.gen::<f64>().ln() < log_ratio {
                accepted += 1;
            }
            if proposed > trials * 100 {
                return Err(Error::RejectionStall(proposed));
            }
        }
        let rate = accepted as f64 / proposed as f64;
        if self.beta >= 16.0 && rate < 0.5 {
            log::warn!(
                "envelope acceptance rate {rate:.3} below 0.5 at beta = {}",
                self.beta
            );
        }
        Ok(rate)
    }

    /// Draw a state of the constrained measure.
    ///
    /// Momenta are conditioned exactly (iid Gaussians minus their mean).
    /// Displacements start from a centered product draw and are relaxed by a
    /// pairwise-exchange Metropolis walk on the zero-sum hyperplane, where
    /// the tilt cancels identically.
    pub fn sample_constrained(
        &self,
        n: usize,
        cfg: &SamplerConfig,
        rng: &mut impl Rng,
    ) -> Result<ChainState> {
        if n < 3 {
            return Err(Error::InvalidParams(format!("constrained sampler needs n >= 3, got {n}")));
        }
        let mut r = Vec::with_capacity(n);
        for _ in 0..n {
            r.push(self.sample_r(rng)?);
        }
        center(&mut r);
        let burn = cfg.burn_sweeps(n);
        self.mcmc_sweeps(&mut r, burn + cfg.thin, rng);
        Ok(self.finish_state(n, r, rng))
    }

    fn finish_state(&self, n: usize, mut r: Vec<f64>, rng: &mut impl Rng) -> ChainState {
        center(&mut r);
        let sd = 1.0 / self.beta.sqrt();
        let p: Vec<f64> = (0..n)
            .map(|_| sd * rng.sample::<f64, _>(StandardNormal))
            .collect();
        let mut state = ChainState { p, r };
        let pm = state.p.iter().sum::<f64>() / n as f64;
        state.p.iter_mut().for_each(|x| *x -= pm);
        state
    }

    /// `sweeps` Metropolis sweeps of n pairwise moves each on the zero-sum
    /// hyperplane of r.
    fn mcmc_sweeps(&self, r: &mut [f64], sweeps: usize, rng: &mut impl Rng) {
        let n = r.len();
        let prop_sd = 1.0 / self.beta.sqrt();
        for _ in 0..sweeps * n {
            let i = rng.gen_range(0..n);
            let mut j = rng.gen_range(0..n - 1);
            if j >= i {
                j += 1;
            }
            let delta = prop_sd * rng.sample::<f64, _>(StandardNormal);
            let (ri, rj) = (r[i], r[j]);
            let dv = potential(ri + delta, self.model, self.chi)
                + potential(rj - delta, self.model, self.chi)
                - potential(ri, self.model, self.chi)
                - potential(rj, self.model, self.chi);
            let accept = dv <= 0.0 || rng.gen::<f64>() < (-self.beta * dv).exp();
            if accept {
                r[i] = ri + delta;
                r[j] = rj - delta;
            }
        }
    }

    /// Deterministic parallel ensemble of constrained states.
    ///
    /// With `cfg.chains == 0` every member runs its own chain seeded from
    /// (seed, member). Otherwise `chains` independent chains are burned in
    /// once and emit thinned states round-robin; the member→(chain, slot)
    /// mapping is fixed, so results do not depend on the worker count.
    pub fn ensemble_constrained(
        &self,
        n: usize,
        cfg: &SamplerConfig,
        members: usize,
    ) -> Result<Vec<ChainState>> {
        cfg.validate()?;
        if cfg.chains == 0 {
            return (0..members)
                .into_par_iter()
                .map(|i| {
                    let mut rng = member_rng(cfg.seed, i as u64);
                    self.sample_constrained(n, cfg, &mut rng)
                })
                .collect();
        }
        let chains = cfg.chains.min(members);
        let per_chain = members.div_ceil(chains);
        let chain_outputs: Vec<Vec<ChainState>> = (0..chains)
            .into_par_iter()
            .map(|c| -> Result<Vec<ChainState>> {
                let mut rng = member_rng(cfg.seed, (1 << 32) + c as u64);
                let mut r = Vec::with_capacity(n);
                for _ in 0..n {
                    r.push(self.sample_r(&mut rng)?);
                }
                center(&mut r);
                self.mcmc_sweeps(&mut r, cfg.burn_sweeps(n), &mut rng);
                let mut states = Vec::with_capacity(per_chain);
                for _ in 0..per_chain {
                    self.mcmc_sweeps(&mut r, cfg.thin, &mut rng);
                    states.push(self.finish_state(n, r.clone(), &mut rng));
                }
                Ok(states)
            })
            .collect::<Result<_>>()?;
        let mut out = Vec::with_capacity(members);
        for i in 0..members {
            out.push(chain_outputs[i % chains][i / chains].clone());
        }
        Ok(out)
    }
}

fn center(x: &mut [f64]) {
    let mean = x.iter().sum::<f64>() / x.len() as f64;
    x.iter_mut().for_each(|v| *v -= mean);
}

/// Independent RNG stream for one ensemble member.
pub fn member_rng(seed: u64, member: u64) -> ChaCha12Rng {
    let mut rng = ChaCha12Rng::seed_from_u64(seed);
    rng.set_stream(member);
    rng
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SamplerMethod {
    ProductTheta,
    ConstrainedMcmc,
}

/// Sampler knobs. Burn-in and thinning are measured in sweeps (n pairwise
/// moves each); `n_burn = 0` selects the 50·n-sweep default.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct SamplerConfig {
    pub method: SamplerMethod,
    pub n_burn: usize,
    pub thin: usize,
    pub seed: u64,
    /// 0 = one independent chain per member; otherwise the fixed number of
    /// chains shared by the ensemble.
    pub chains: usize,
}

impl SamplerConfig {
    pub fn validate(&self) -> Result<()> {
        if self.thin < 1 {
            return Err(Error::InvalidParams("thin must be >= 1".into()));
        }
        Ok(())
    }

    pub fn burn_sweeps(&self, n: usize) -> usize {
        if self.n_burn == 0 {
            50 * n
        } else {
            self.n_burn
        }
    }
}

impl Default for SamplerConfig {
    fn default() -> Self {
        Self {
            method: SamplerMethod::ConstrainedMcmc,
            n_burn: 0,
            thin: 5,
            seed: 0,
            chains: 0,
        }
    }
}

/// Toda tilt identity: the solved θ satisfies ψ(θ+β) = ln β.
pub fn toda_digamma_residual(tm: &ThetaMeasure) -> f64 {
    (digamma(tm.theta + tm.beta) - tm.beta.ln()).abs()
}

/// Flat snapshot of a sampled ensemble: a commented header carrying the
/// measure and sampler identity, then one `member,j,p,r` row per site.
pub fn ensemble_snapshot_csv(
    tm: &ThetaMeasure,
    cfg: &SamplerConfig,
    states: &[ChainState],
) -> String {
    let n = states.first().map_or(0, ChainState::len);
    let method = match cfg.method {
        SamplerMethod::ProductTheta => "product_theta",
        SamplerMethod::ConstrainedMcmc => "constrained_mcmc",
    };
    let mut out = format!(
        "# n={} beta={} chi={} model={:?} seed={} method={}\nmember,j,p,r\n",
        n, tm.beta, tm.chi, tm.model, cfg.seed, method
    );
    for (i, s) in states.iter().enumerate() {
        for j in 0..s.len() {
            out.push_str(&format!("{},{},{},{}\n", i, j, s.p[j], s.r[j]));
        }
    }
    out
}
