//! Quadratic Taylor parts of the conserved quantities.
//!
//! Expanding each density term to total degree two in (p, r) and summing over
//! sites yields translation-invariant quadratic forms, hence circulant
//! matrices. Even orders give pᵀA p + rᵀA r with one symmetric circulant A;
//! odd orders give a single cross form pᵀB r.

use super::density::density;
use crate::chain::ChainState;
use crate::Result;

/// First column of a circulant matrix A_{j,k} = rep[(j−k) mod n].
#[derive(Debug, Clone, PartialEq)]
pub struct CirculantSpec {
    pub rep: Vec<f64>,
}

impl CirculantSpec {
    pub fn n(&self) -> usize {
        self.rep.len()
    }

    /// Evenness defect max_k |rep_k − rep_{n−k}|.
    pub fn evenness_defect(&self) -> f64 {
        let n = self.n();
        (1..n)
            .map(|k| (self.rep[k] - self.rep[n - k]).abs())
            .fold(0.0, f64::max)
    }

    /// y = A x as a periodic convolution, using only nonzero rep entries.
    pub fn apply(&self, x: &[f64]) -> Vec<f64> {
        let n = self.n();
        let nz: Vec<(usize, f64)> = self
            .rep
            .iter()
            .copied()
            .enumerate()
            .filter(|&(_, v)| v != 0.0)
            .collect();
        let mut y = vec![0.0; n];
        for (j, yj) in y.iter_mut().enumerate() {
            let mut acc = 0.0;
            for &(d, v) in &nz {
                acc += v * x[(j + n - d) % n];
            }
            *yj = acc;
        }
        y
    }

    /// Dense matrix; for small-n oracles.
    pub fn dense(&self) -> Vec<Vec<f64>> {
        let n = self.n();
        (0..n)
            .map(|j| (0..n).map(|k| self.rep[(j + n - k) % n]).collect())
            .collect()
    }
}

/// Degree-two Taylor part of a conserved quantity, as circulant forms.
#[derive(Debug, Clone)]
pub enum QuadraticPart {
    /// Even order: pᵀA p + rᵀA r.
    Even { a: CirculantSpec },
    /// Odd order: pᵀB r.
    Odd { b: CirculantSpec },
}

impl QuadraticPart {
    pub fn eval(&self, state: &ChainState) -> f64 {
        match self {
            QuadraticPart::Even { a } => {
                let ap = a.apply(&state.p);
                let ar = a.apply(&state.r);
                let pp: f64 = state.p.iter().zip(&ap).map(|(x, y)| x * y).sum();
                let rr: f64 = state.r.iter().zip(&ar).map(|(x, y)| x * y).sum();
                pp + rr
            }
            QuadraticPart::Odd { b } => {
                let br = b.apply(&state.r);
                state.p.iter().zip(&br).map(|(x, y)| x * y).sum()
            }
        }
    }

    pub fn rep(&self) -> &CirculantSpec {
        match self {
            QuadraticPart::Even { a } => a,
            QuadraticPart::Odd { b } => b,
        }
    }
}

/// Degree-zero Taylor part: n × (sum of momentum-free profile counts)/m for
/// even orders, zero for odd orders.
pub fn constant_part(m: usize, n: usize) -> Result<f64> {
    let d = density(m)?;
    Ok(if m % 2 == 0 {
        n as f64 * d.value_at_zero() / m as f64
    } else {
        0.0
    })
}

/// Build the quadratic part of order m on a ring of n sites (requires
/// n > 2m so that window offsets embed without wrap-around collisions).
pub fn quadratic_part(m: usize, n: usize) -> Result<QuadraticPart> {
    let d = density(m)?;
    assert!(n > 2 * m, "quadratic part needs n > 2m");
    let mt = d.mtilde as i64;
    let inv_m = 1.0 / m as f64;
    let idx = |off: i64| -> usize { ((off % n as i64 + n as i64) % n as i64) as usize };

    if m % 2 == 0 {
        // momentum pairs from Σk = 2, displacement pairs from (n·r)²/2
        let mut pair_p = vec![0.0f64; n];
        let mut rcoef = vec![0.0f64; n]; // signed offsets, folded below
        for t in &d.terms {
            let ksum: u32 = t.k_exp.iter().sum();
            if ksum == 2 {
                let offs: Vec<i64> = t
                    .k_exp
                    .iter()
                    .enumerate()
                    .flat_map(|(h, &k)| {
                        std::iter::repeat(h as i64 - mt).take(k as usize)
                    })
                    .collect();
                let dlt = (offs[1] - offs[0]).unsigned_abs() as usize;
                pair_p[dlt] += t.rho as f64 * inv_m;
            } else if ksum == 0 {
                for (i, &ni) in t.n_exp.iter().enumerate() {
                    if ni == 0 {
                        continue;
                    }
                    for (i2, &ni2) in t.n_exp.iter().enumerate() {
                        if ni2 == 0 {
                            continue;
                        }
                        let l = i2 as i64 - i as i64;
                        rcoef[idx(l)] +=
                            t.rho as f64 * f64::from(ni) * f64::from(ni2) * 0.5 * inv_m;
                    }
                }
            }
        }
        let mut pair_r = vec![0.0f64; n];
        pair_r[0] = rcoef[0];
        for dlt in 1..=n / 2 {
            pair_r[dlt] = rcoef[dlt] + rcoef[n - dlt];
        }
        // both collections must describe the same form
        for dlt in 0..n {
            debug_assert!(
                (pair_p[dlt] - pair_r[dlt]).abs() < 1e-12 * pair_p[dlt].abs().max(1.0),
                "p/r quadratic parts disagree at offset {dlt}"
            );
        }
        let mut rep = vec![0.0f64; n];
        rep[0] = pair_p[0];
        for dlt in 1..=n / 2 {
            rep[dlt] = 0.5 * pair_p[dlt];
            rep[n - dlt] = 0.5 * pair_p[dlt];
        }
        Ok(QuadraticPart::Even { a: CirculantSpec { rep } })
    } else {
        // cross pairs p_j r_{j+l} from Σk = 1 terms
        let mut cross = vec![0.0f64; n]; // indexed by l ≥ 0 or wrapped
        for t in &d.terms {
            let ksum: u32 = t.k_exp.iter().sum();
            if ksum != 1 {
                continue;
            }
            let u = t.k_exp.iter().position(|&k| k == 1).unwrap() as i64 - mt;
            for (i, &ni) in t.n_exp.iter().enumerate() {
                if ni == 0 {
                    continue;
                }
                let v = i as i64 - mt;
                cross[idx(v - u)] += t.rho as f64 * f64::from(ni) * inv_m;
            }
        }
        // pᵀB r with B_{j,k} = b_{(j−k) mod n}: coefficient of p_j r_{j+l}
        // lands at rep index (−l) mod n
        let mut rep = vec![0.0f64; n];
        for (l, &c) in cross.iter().enumerate() {
            if c != 0.0 {
                rep[idx(-(l as i64))] = c;
            }
        }
        Ok(QuadraticPart::Odd { b: CirculantSpec { rep } })
    }
}
