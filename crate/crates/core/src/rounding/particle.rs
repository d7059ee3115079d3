//! Particle ensemble: Monte Carlo estimate of the matched-status law.
//!
//! `K` particles each carry a matched-status vector and evolve under the
//! scheme's randomness from their own seed-derived substream, so the
//! ensemble is reproducible and order-independent within an arrival.
//! The z values of an arrival are computed once from ensemble marginals
//! and shared by all particles; particle 0 is the emitted run.

use rand::SeedableRng;
use rand_chacha::ChaCha12Rng;

use crate::graph::VertexId;
use crate::rounding::{step_trajectory, ArrivalArms, FreeSnapshot, VertexChoices};
use crate::util::splitmix64_stream;

#[derive(Debug, Clone)]
pub(crate) struct ParticleEnsemble {
    n: usize,
    k: usize,
    /// Row-major matched flags, `k` rows of `n`.
    matched: Vec<bool>,
    rngs: Vec<ChaCha12Rng>,
}

impl ParticleEnsemble {
    /// `k` all-free particles; particle `i` draws from substream `i` of `seed`.
    pub(crate) fn new(n: usize, k: usize, seed: u64) -> Self {
        assert!(k >= 1, "ensemble needs at least one particle");
        Self {
            n,
            k,
            matched: vec![false; n * k],
            rngs: (0..k)
                .map(|i| ChaCha12Rng::seed_from_u64(splitmix64_stream(seed, i as u64)))
                .collect(),
        }
    }

    /// Fraction of particles with `u` free.
    pub(crate) fn marginal(&self, u: VertexId) -> f64 {
        let free = (0..self.k)
            .filter(|&i| !self.matched[i * self.n + u])
            .count();
        free as f64 / self.k as f64
    }

    /// Ensemble free-marginals for every vertex.
    pub(crate) fn free_marginals(&self) -> Vec<f64> {
        (0..self.n).map(|u| self.marginal(u)).collect()
    }

    /// Marginals and pairwise conditionals of `targets`, estimated from
    /// bit-packed per-target free indicators.
    pub(crate) fn snapshot(&self, targets: &[VertexId]) -> FreeSnapshot {
        let t = targets.len();
        let words = self.k.div_ceil(64);
        let mut bits = vec![vec![0u64; words]; t];
        for (a, &u) in targets.iter().enumerate() {
            for i in 0..self.k {
                if !self.matched[i * self.n + u] {
                    bits[a][i / 64] |= 1 << (i % 64);
                }
            }
        }
        let count = |a: usize| -> u64 { bits[a].iter().map(|w| w.count_ones() as u64).sum() };
        let pair_count = |a: usize, b: usize| -> u64 {
            bits[a]
                .iter()
                .zip(&bits[b])
                .map(|(x, y)| (x & y).count_ones() as u64)
                .sum()
        };
        let marginal: Vec<f64> = (0..t).map(|a| count(a) as f64 / self.k as f64).collect();
        let cond = (0..t)
            .map(|a| {
                let denom = count(a);
                (0..t)
                    .map(|b| {
                        if denom > 0 {
                            pair_count(a, b) as f64 / denom as f64
                        } else {
                            marginal[b]
                        }
                    })
                    .collect()
            })
            .collect();
        FreeSnapshot { marginal, cond }
    }

    /// Advances every particle one arrival; returns particle 0's choices
    /// and match.
    pub(crate) fn apply_arrival(
        &mut self,
        v: VertexId,
        arms: &ArrivalArms,
    ) -> (VertexChoices, Option<VertexId>) {
        let mut emitted = (VertexChoices::default(), None);
        for i in 0..self.k {
            let base = i * self.n;
            let (choices, matched_to) = {
                let matched = &self.matched;
                step_trajectory(arms, &|u| !matched[base + u], &mut self.rngs[i])
            };
            if let Some(u) = matched_to {
                self.matched[base + u] = true;
                self.matched[base + v] = true;
            }
            if i == 0 {
                emitted = (choices, matched_to);
            }
        }
        emitted
    }
}
