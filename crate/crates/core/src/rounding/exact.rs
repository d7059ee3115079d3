//! Exact joint law of matched statuses, maintained as a sparse map over
//! matched-vertex subsets.
//!
//! Each arrival splits every support state across the scheme's outcomes
//! (primary draw, optional gated secondary draw, drop coin), so marginal
//! and conditional free probabilities — and per-edge match probabilities
//! — are available without sampling error. The state space is capped at
//! [`MAX_EXACT_N`] vertices.

use std::collections::BTreeMap;

use crate::fractional::FractionalState;
use crate::graph::{ArrivalInstance, VertexId};
use crate::rounding::{build_arms, ArrivalArms, FreeSnapshot, RoundingConfig};
use crate::{Error, Result};

/// Largest vertex count the exact engine accepts.
pub const MAX_EXACT_N: usize = 22;

/// Exact distribution over matched-vertex subsets.
///
/// Keys are bitmasks with bit `u` set iff `u` is matched; values are
/// probabilities summing to 1 up to float drift. The map is ordered so
/// that iteration — and therefore every derived float — is deterministic.
#[derive(Debug, Clone, PartialEq)]
pub struct FreeStateDistribution {
    n: usize,
    map: BTreeMap<u64, f64>,
}

impl FreeStateDistribution {
    /// Point mass on the all-free state.
    pub fn initial(n: usize) -> Self {
        Self {
            n,
            map: BTreeMap::from([(0u64, 1.0)]),
        }
    }

    /// Number of vertices.
    pub fn n(&self) -> usize {
        self.n
    }

    /// Number of support states.
    pub fn support_size(&self) -> usize {
        self.map.len()
    }

    /// Total probability mass (1 up to float drift).
    pub fn total_mass(&self) -> f64 {
        self.map.values().sum()
    }

    /// Support states and their probabilities, in mask order.
    pub fn states(&self) -> impl Iterator<Item = (u64, f64)> + '_ {
        self.map.iter().map(|(&mask, &p)| (mask, p))
    }

    /// `Pr[u is free]`.
    pub fn pr_free(&self, u: VertexId) -> f64 {
        self.map
            .iter()
            .filter(|&(&mask, _)| mask & (1 << u) == 0)
            .map(|(_, &p)| p)
            .sum()
    }

    /// `Pr[u and w are both free]`.
    pub fn pr_both_free(&self, u: VertexId, w: VertexId) -> f64 {
        let bits = (1u64 << u) | (1 << w);
        self.map
            .iter()
            .filter(|&(&mask, _)| mask & bits == 0)
            .map(|(_, &p)| p)
            .sum()
    }

    /// `Pr[w is free | u is free]`, falling back to the unconditional
    /// probability when the conditioning event has no mass.
    pub fn conditional_free(&self, w: VertexId, given: VertexId) -> f64 {
        let denom = self.pr_free(given);
        if denom > 0.0 {
            self.pr_both_free(w, given) / denom
        } else {
            self.pr_free(w)
        }
    }

    /// `Pr[u is free]` for every vertex.
    pub fn free_marginals(&self) -> Vec<f64> {
        let mut marginals = vec![0.0; self.n];
        for (&mask, &p) in &self.map {
            for (u, m) in marginals.iter_mut().enumerate() {
                if mask & (1 << u) == 0 {
                    *m += p;
                }
            }
        }
        marginals
    }

    /// Marginal and pairwise-conditional free probabilities of `targets`
    /// in one pass over the support.
    pub(crate) fn snapshot(&self, targets: &[VertexId]) -> FreeSnapshot {
        let t = targets.len();
        let mut marginal = vec![0.0; t];
        let mut pair = vec![vec![0.0; t]; t];
        for (&mask, &p) in &self.map {
            for a in 0..t {
                if mask & (1 << targets[a]) != 0 {
                    continue;
                }
                marginal[a] += p;
                for b in 0..t {
                    if mask & (1 << targets[b]) == 0 {
                        pair[a][b] += p;
                    }
                }
            }
        }
        let cond = (0..t)
            .map(|a| {
                (0..t)
                    .map(|b| {
                        if marginal[a] > 0.0 {
                            pair[a][b] / marginal[a]
                        } else {
                            marginal[b]
                        }
                    })
                    .collect()
            })
            .collect();
        FreeSnapshot { marginal, cond }
    }

    /// Splits every state across the arrival's outcomes.
    ///
    /// Returns the probability mass matched along each target edge,
    /// indexed like `arms.targets`. Busy primary draws are collapsed
    /// into a single failure weight per state before the gated
    /// secondary draw, keeping the transition linear in the degree.
    pub(crate) fn apply_arrival(&mut self, v: VertexId, arms: &ArrivalArms) -> Vec<f64> {
        let t = arms.targets.len();
        let mut matched_mass = vec![0.0; t];
        let mut next: BTreeMap<u64, f64> = BTreeMap::new();
        for (&mask, &p) in &self.map {
            let mut fail = 0.0;
            for i in 0..t {
                let zp = arms.z_prime[i];
                if zp == 0.0 {
                    continue;
                }
                if mask & (1 << arms.targets[i]) == 0 {
                    let out = mask | (1 << arms.targets[i]) | (1 << v);
                    *next.entry(out).or_insert(0.0) += p * zp;
                    matched_mass[i] += p * zp;
                } else {
                    fail += zp;
                }
            }
            let mut stay = (1.0 - arms.sum_z_prime).max(0.0);
            if fail > 0.0 && arms.gate > 0.0 {
                let mut second = 0.0;
                for j in 0..t {
                    let q = arms.gate * arms.z_prime[j] * arms.keep[j];
                    if q == 0.0 || mask & (1 << arms.targets[j]) != 0 {
                        continue;
                    }
                    let out = mask | (1 << arms.targets[j]) | (1 << v);
                    *next.entry(out).or_insert(0.0) += p * fail * q;
                    matched_mass[j] += p * fail * q;
                    second += q;
                }
                stay += fail * (1.0 - second).max(0.0);
            } else {
                stay += fail;
            }
            if stay > 0.0 {
                *next.entry(mask).or_insert(0.0) += p * stay;
            }
        }
        self.map = next;
        matched_mass
    }
}

/// Exact matched-status law after the first `upto` arrivals.
///
/// Runs the allocator and the rounding transitions with the z values
/// induced by the distribution itself.
pub fn exact_free_distribution(
    inst: &ArrivalInstance,
    cfg: &RoundingConfig,
    upto: usize,
) -> Result<FreeStateDistribution> {
    let n = inst.n();
    if n > MAX_EXACT_N {
        return Err(Error::TooLarge {
            operation: "exact_free_distribution",
            n,
            limit: MAX_EXACT_N,
        });
    }
    if upto > n {
        return Err(Error::InvalidParameter(format!(
            "prefix length {upto} exceeds instance size {n}"
        )));
    }
    let mut frac = FractionalState::new(n, cfg.params);
    let mut dist = FreeStateDistribution::initial(n);
    for v in 0..upto {
        let nbrs = inst.earlier_neighbors(v);
        let (_, increments) = frac.process_arrival(v, nbrs);
        let targets_x: Vec<(VertexId, f64)> = nbrs
            .iter()
            .copied()
            .zip(increments)
            .filter(|&(_, x)| x > 0.0)
            .collect();
        let targets: Vec<VertexId> = targets_x.iter().map(|&(u, _)| u).collect();
        let snap = dist.snapshot(&targets);
        let arms = build_arms(&snap, &targets_x, cfg.params.epsilon);
        dist.apply_arrival(v, &arms);
    }
    Ok(dist)
}
