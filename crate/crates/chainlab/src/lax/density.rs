//! Closed-form local densities of the conserved quantities.
//!
//! The diagonal entries of the m-th power of the periodic Jacobi matrix are
//! sums over signed lattice paths of length m (steps up/down/flat, allowed
//! below the axis) that return to their starting height. Grouping paths by
//! their step-count profile gives a density
//! `h_j = Σ_terms sign · ρ · Π_i e^{−n_i r_{j+i}} · Π_h p_{j+h}^{k_h}`
//! where `n_i` counts up-steps from height i (offsets −m̃..m̃−1, m̃ = ⌊m/2⌋),
//! `k_h` counts flat steps at height h (offsets −m̃..m̃), and ρ is the exact
//! number of paths with that profile. The profile list is independent of the
//! ring size, so one density serves every n > 2m.

use std::collections::HashMap;
use std::sync::{Arc, Mutex, OnceLock};

use serde::Serialize;

use crate::chain::ChainState;
use crate::{Error, Result};

/// One monomial-exponential term of a density.
#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct DensityTerm {
    /// (−1)^{Σk}: each momentum factor enters through −p.
    pub sign: i8,
    /// Exact number of paths sharing this profile.
    pub rho: u64,
    /// Up-step counts per height offset −m̃..m̃−1 (length 2m̃).
    #[serde(rename = "n")]
    pub n_exp: Vec<u32>,
    /// Flat-step counts per height offset −m̃..m̃ (length 2m̃+1).
    #[serde(rename = "k")]
    pub k_exp: Vec<u32>,
}

/// The full local density of order m.
#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct IntegralDensity {
    pub m: usize,
    #[serde(skip)]
    pub mtilde: usize,
    pub terms: Vec<DensityTerm>,
}

/// Exact binomial coefficient; arguments stay far below overflow for the
/// supported orders.
fn binom(n: u64, k: u64) -> u64 {
    if k > n {
        return 0;
    }
    let k = k.min(n - k);
    let mut acc: u128 = 1;
    for i in 0..k {
        acc = acc * u128::from(n - i) / u128::from(i + 1);
    }
    u64::try_from(acc).expect("binomial overflow")
}

/// Ways to drop `j` identical items into `x` ordered slots.
fn multiset(x: u64, j: u64) -> u64 {
    if j == 0 {
        1
    } else {
        binom(x + j - 1, j)
    }
}

/// Default cap on the cached order; profile counts grow combinatorially.
pub const DEFAULT_MAX_ORDER: usize = 12;

static MAX_ORDER: std::sync::atomic::AtomicUsize =
    std::sync::atomic::AtomicUsize::new(DEFAULT_MAX_ORDER);

/// Raise or lower the order cap for [`density`].
pub fn set_max_order(m: usize) {
    MAX_ORDER.store(m, std::sync::atomic::Ordering::Relaxed);
}

pub fn max_order() -> usize {
    MAX_ORDER.load(std::sync::atomic::Ordering::Relaxed)
}

/// Number of paths with the given profile.
///
/// `n_of(i)` = up-steps from height i to i+1; `k_of(h)` = flat steps at h.
/// Flat steps at height h sit in one of the "visits" to h (arrivals from
/// below or above, plus the start for h = 0), counted with repetition;
/// excursions to the next level out are distributed over the visits to the
/// current level in the same way.
fn profile_count(mtilde: i64, n_of: &dyn Fn(i64) -> u64, k_of: &dyn Fn(i64) -> u64) -> u64 {
    let mut rho: u64 = multiset(n_of(-1) + n_of(0) + 1, k_of(0));
    rho *= binom(n_of(-1) + n_of(0), n_of(0));
    for h in 1..=mtilde {
        rho *= multiset(n_of(h - 1) + n_of(h), k_of(h));
        rho *= multiset(n_of(h - 1), n_of(h));
    }
    for h in -mtilde..=-1 {
        rho *= multiset(n_of(h) + n_of(h - 1), k_of(h));
        rho *= multiset(n_of(h), n_of(h - 1));
    }
    rho
}

fn build(m: usize) -> IntegralDensity {
    assert!(m >= 1);
    let mtilde = (m / 2) as i64;
    let mut terms = Vec::new();

    // A profile is determined by the visited height window [lo, hi] (with
    // every level in between reached exactly once per crossing), the extra
    // crossings x_i on each forced level, and the flat counts k_h.
    for lo in -mtilde..=0 {
        for hi in 0..=mtilde {
            let chain = (hi - lo) as usize;
            if 2 * chain > m {
                continue;
            }
            let budget = m - 2 * chain;
            // slots: chain n-extras (cost 2 each) then chain+1 flat counts.
            let n_slots = chain;
            let k_slots = chain + 1;
            let mut extras = vec![0u32; n_slots + k_slots];
            enumerate(&mut extras, 0, budget, n_slots, &mut |extras| {
                let n_of = |i: i64| -> u64 {
                    if i >= lo && i < hi {
                        1 + u64::from(extras[(i - lo) as usize])
                    } else {
                        0
                    }
                };
                let k_of = |h: i64| -> u64 {
                    if h >= lo && h <= hi {
                        u64::from(extras[n_slots + (h - lo) as usize])
                    } else {
                        0
                    }
                };
                let rho = profile_count(mtilde, &n_of, &k_of);
                if rho == 0 {
                    return;
                }
                let n_exp: Vec<u32> = (-mtilde..mtilde).map(|i| n_of(i) as u32).collect();
                let k_exp: Vec<u32> = (-mtilde..=mtilde).map(|h| k_of(h) as u32).collect();
                let ksum: u32 = k_exp.iter().sum();
                terms.push(DensityTerm {
                    sign: if ksum % 2 == 0 { 1 } else { -1 },
                    rho,
                    n_exp,
                    k_exp,
                });
            });
        }
    }
    terms.sort_by(|a, b| (&a.n_exp, &a.k_exp).cmp(&(&b.n_exp, &b.k_exp)));
    IntegralDensity { m, mtilde: mtilde as usize, terms }
}

/// Depth-first assignment of `budget` units over the profile slots; units in
/// the first `n_slots` positions cost 2 (a full extra crossing), the rest 1.
fn enumerate(
    extras: &mut Vec<u32>,
    pos: usize,
    budget: usize,
    n_slots: usize,
    emit: &mut impl FnMut(&[u32]),
) {
    if pos == extras.len() {
        if budget == 0 {
            emit(extras);
        }
        return;
    }
    let unit = if pos < n_slots { 2 } else { 1 };
    // last slot must absorb the remainder exactly
    if pos + 1 == extras.len() {
        if budget % unit == 0 {
            extras[pos] = (budget / unit) as u32;
            emit(extras);
            extras[pos] = 0;
        }
        return;
    }
    let mut used = 0;
    let mut count = 0u32;
    while used <= budget {
        extras[pos] = count;
        enumerate(extras, pos + 1, budget - used, n_slots, emit);
        used += unit;
        count += 1;
    }
    extras[pos] = 0;
}

/// Cached density of order m (thread-safe; built once per order).
pub fn density(m: usize) -> Result<Arc<IntegralDensity>> {
    if m == 0 {
        return Err(Error::InvalidParams("density order must be >= 1".into()));
    }
    if m > max_order() {
        return Err(Error::InvalidParams(format!(
            "density order {m} exceeds cap {} (see set_max_order)",
            max_order()
        )));
    }
    static CACHE: OnceLock<Mutex<HashMap<usize, Arc<IntegralDensity>>>> = OnceLock::new();
    let cache = CACHE.get_or_init(|| Mutex::new(HashMap::new()));
    let mut guard = cache.lock().expect("density cache poisoned");
    Ok(Arc::clone(
        guard.entry(m).or_insert_with(|| Arc::new(build(m))),
    ))
}

impl IntegralDensity {
    /// Value of the density at site j. Fails on exponential overflow.
    pub fn eval(&self, state: &ChainState, j: usize) -> Result<f64> {
        let n = state.len();
        let mt = self.mtilde;
        let mut total = 0.0f64;
        for t in &self.terms {
            let mut arg = 0.0f64;
            for (i, &ne) in t.n_exp.iter().enumerate() {
                if ne > 0 {
                    arg += f64::from(ne) * state.r[(j + n + i - mt) % n];
                }
            }
            let mut val = (-arg).exp();
            for (h, &ke) in t.k_exp.iter().enumerate() {
                if ke > 0 {
                    val *= state.p[(j + n + h - mt) % n].powi(ke as i32);
                }
            }
            total += f64::from(t.sign) * t.rho as f64 * val;
        }
        if total.is_finite() {
            Ok(total)
        } else {
            Err(Error::NonFinite(format!("density order {} at site {j}", self.m)))
        }
    }

    /// Value at the origin for the zero state: Σ over momentum-free terms of ρ.
    pub fn value_at_zero(&self) -> f64 {
        self.terms
            .iter()
            .filter(|t| t.k_exp.iter().all(|&k| k == 0))
            .map(|t| t.rho as f64)
            .sum()
    }
}
