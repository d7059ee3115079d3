//! Randomized rounding of the fractional allocation.
//!
//! Two schemes share one sampling core:
//!
//! - **Single-sample** ([`run_warmup`]): under `kappa = 1`, `beta = 2`
//!   the arriving vertex draws one earlier neighbor `u` with probability
//!   `z_u = x_{uv} / (1 - y_u)` and matches it iff it is free. The
//!   candidate mass never exceeds 1 and every edge is matched with
//!   probability exactly `x_e` — rounding loses nothing.
//! - **Two-sample** ([`run_improved`]): under `kappa = 1 + 2 epsilon`,
//!   `beta = 2 - epsilon` the mass `z_u = x_{uv} / Pr[u free]` can exceed
//!   1. The draw is normalized, and whenever normalization was needed a
//!   second candidate is drawn with probability `sqrt(epsilon)` and used
//!   if the first was busy — subject to a drop rule that keeps each
//!   edge's match probability at most `x_e`.
//!
//! The free probabilities feeding `z` come from one of two engines: the
//! exact joint law ([`FreeStateDistribution`], small instances) or a
//! seeded particle ensemble (any size). Each run records an
//! [`ArcProfile`]; replaying it with [`greedy_match_pruned`] reproduces
//! the run's matching exactly.

mod exact;
mod particle;
mod selection;

pub use exact::{exact_free_distribution, FreeStateDistribution, MAX_EXACT_N};
pub use selection::{
    build_selection, greedy_match_pruned, greedy_match_timeline, prune_selection, Arc, ArcKind,
    ArcProfile, SelectionGraph, VertexChoices,
};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha12Rng;

use crate::fractional::{run_fractional, AllocatorParams, FractionalRun, FractionalState};
use crate::graph::{ArrivalInstance, FractionalAssignment, Matching, VertexId};
use crate::util::{fmt_sig12, sample_discrete, splitmix64_stream};
use crate::{Error, Result};

use particle::ParticleEnsemble;

/// Default particle-ensemble size.
pub const DEFAULT_PARTICLES: usize = 20_000;

/// Smallest accepted particle-ensemble size.
pub const MIN_PARTICLES: usize = 1_000;

/// Floor applied to free-probability estimates before division.
pub(crate) const Z_FLOOR: f64 = 1e-6;

/// Which probability engine backs a rounding run.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum EngineKind {
    /// Exact joint law; instances up to [`MAX_EXACT_N`] vertices.
    Exact,
    /// Seeded Monte Carlo ensemble; any instance size.
    Particle,
}

/// Configuration of a rounding run.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RoundingConfig {
    pub params: AllocatorParams,
    pub engine: EngineKind,
    /// Ensemble size; ignored by the exact engine.
    pub particles: usize,
    pub seed: u64,
}

impl RoundingConfig {
    /// Exact-engine configuration.
    pub fn exact(params: AllocatorParams, seed: u64) -> Self {
        Self {
            params,
            engine: EngineKind::Exact,
            particles: 0,
            seed,
        }
    }

    /// Particle-engine configuration with at least [`MIN_PARTICLES`] particles.
    pub fn particle(params: AllocatorParams, particles: usize, seed: u64) -> Result<Self> {
        if particles < MIN_PARTICLES {
            return Err(Error::InvalidParameter(format!(
                "ensemble size {particles} below minimum {MIN_PARTICLES}"
            )));
        }
        Ok(Self {
            params,
            engine: EngineKind::Particle,
            particles,
            seed,
        })
    }
}

/// Free-probability estimates for one arrival's targets.
///
/// `cond[a][b]` is `Pr[target b free | target a free]`, falling back to
/// the unconditional estimate when the conditioning event has no mass.
#[derive(Debug, Clone)]
pub(crate) struct FreeSnapshot {
    pub marginal: Vec<f64>,
    pub cond: Vec<Vec<f64>>,
}

/// Sampling weights of one arrival, shared by every trajectory.
#[derive(Debug, Clone)]
pub(crate) struct ArrivalArms {
    pub targets: Vec<VertexId>,
    pub z: Vec<f64>,
    pub z_prime: Vec<f64>,
    pub sum_z: f64,
    pub sum_z_prime: f64,
    /// Second-draw probability: `sqrt(epsilon)` when `sum_z > 1`, else 0.
    pub gate: f64,
    pub keep: Vec<f64>,
    pub marginal_min: f64,
    pub marginal_max: f64,
}

/// Minimal retention probability for a second-draw match so that the
/// edge's total match probability stays at `min(x, first + second)`.
///
/// `first` is the probability of matching the edge via the first draw,
/// `second` via the second draw before dropping. Returns 1 when the
/// second route has no mass.
pub fn keep_probability(x: f64, first: f64, second: f64) -> f64 {
    if second <= 0.0 {
        1.0
    } else {
        ((x - first) / second).clamp(0.0, 1.0)
    }
}

/// Derives an arrival's sampling weights from free-probability estimates.
pub(crate) fn build_arms(
    snap: &FreeSnapshot,
    targets_x: &[(VertexId, f64)],
    epsilon: f64,
) -> ArrivalArms {
    let t = targets_x.len();
    let targets: Vec<VertexId> = targets_x.iter().map(|&(u, _)| u).collect();
    let x: Vec<f64> = targets_x.iter().map(|&(_, xi)| xi).collect();
    let z: Vec<f64> = (0..t)
        .map(|i| (x[i] / snap.marginal[i].max(Z_FLOOR)).clamp(0.0, 1.0))
        .collect();
    let sum_z: f64 = z.iter().sum();
    let norm = sum_z.max(1.0);
    let z_prime: Vec<f64> = z.iter().map(|&zi| zi / norm).collect();
    let sum_z_prime: f64 = z_prime.iter().sum();
    let gate = if sum_z > 1.0 { epsilon.sqrt() } else { 0.0 };
    let keep = if gate > 0.0 {
        (0..t)
            .map(|j| {
                let first = snap.marginal[j] * z_prime[j];
                let blocked: f64 = (0..t)
                    .map(|w| z_prime[w] * (1.0 - snap.cond[j][w]))
                    .sum();
                keep_probability(x[j], first, first * gate * blocked)
            })
            .collect()
    } else {
        vec![1.0; t]
    };
    let (marginal_min, marginal_max) = if t == 0 {
        (1.0, 1.0)
    } else {
        snap.marginal
            .iter()
            .fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), &m| {
                (lo.min(m), hi.max(m))
            })
    };
    ArrivalArms {
        targets,
        z,
        z_prime,
        sum_z,
        sum_z_prime,
        gate,
        keep,
        marginal_min,
        marginal_max,
    }
}

/// Advances one trajectory through an arrival.
///
/// Draw order: first candidate, then (only if the first was drawn and
/// busy) the gate coin, second candidate, and drop coin. A second-draw
/// arc erased by the drop rule is not recorded, so greedy replay of the
/// recorded choices reproduces the outcome.
pub(crate) fn step_trajectory(
    arms: &ArrivalArms,
    is_free: &dyn Fn(VertexId) -> bool,
    rng: &mut ChaCha12Rng,
) -> (VertexChoices, Option<VertexId>) {
    let mut choices = VertexChoices::default();
    let Some(i) = sample_discrete(&arms.z_prime, rng.gen()) else {
        return (choices, None);
    };
    let u1 = arms.targets[i];
    choices.primary = Some(u1);
    if is_free(u1) {
        return (choices, Some(u1));
    }
    if arms.gate > 0.0 && rng.gen::<f64>() < arms.gate {
        if let Some(j) = sample_discrete(&arms.z_prime, rng.gen()) {
            let u2 = arms.targets[j];
            let coin: f64 = rng.gen();
            choices.keep_coin = Some(coin);
            if is_free(u2) {
                if coin < arms.keep[j] {
                    choices.secondary = Some(u2);
                    return (choices, Some(u2));
                }
                // Dropped: the attempt is erased from the record too.
            } else {
                choices.secondary = Some(u2);
            }
        }
    }
    (choices, None)
}

// ---------------------------------------------------------------------------
// Single-sample scheme
// ---------------------------------------------------------------------------

/// A completed single-sample rounding run.
#[derive(Debug, Clone)]
pub struct WarmupRun {
    pub matching: Matching,
    /// Sampled target per arrival (`None` when the residual mass won).
    pub choices: Vec<Option<VertexId>>,
    /// Candidate mass per arrival; always at most 1.
    pub sum_z: Vec<f64>,
    pub fractional: FractionalRun,
}

/// Single-sample rounding: draw `u` with probability `x_{uv} / (1 - y_u)`,
/// match iff free.
///
/// Fails with [`Error::MassExceeded`] if the candidate mass of an
/// arrival exceeds 1 beyond float tolerance, which would contradict the
/// allocator's guarantees.
pub fn run_warmup(inst: &ArrivalInstance, seed: u64) -> Result<WarmupRun> {
    let n = inst.n();
    let params = AllocatorParams::warmup();
    let mut frac = FractionalState::new(n, params);
    let mut rng = ChaCha12Rng::seed_from_u64(splitmix64_stream(seed, 0));
    let mut matching = Matching::empty(n);
    let mut choices = Vec::with_capacity(n);
    let mut sums = Vec::with_capacity(n);
    for v in 0..n {
        let nbrs = inst.earlier_neighbors(v);
        let y_pre: Vec<f64> = nbrs.iter().map(|&u| frac.y(u)).collect();
        let (_, increments) = frac.process_arrival(v, nbrs);
        let mut targets = Vec::new();
        let mut z = Vec::new();
        for ((&u, &y), inc) in nbrs.iter().zip(&y_pre).zip(increments) {
            if inc > 0.0 {
                targets.push(u);
                z.push(inc / (1.0 - y).max(Z_FLOOR));
            }
        }
        let sum_z: f64 = z.iter().sum();
        if sum_z > 1.0 + 1e-9 {
            return Err(Error::MassExceeded {
                arrival: v,
                sum: sum_z,
            });
        }
        let target = sample_discrete(&z, rng.gen()).map(|i| targets[i]);
        choices.push(target);
        sums.push(sum_z);
        if let Some(u) = target {
            if !matching.is_matched(u) {
                matching.add_pair(u, v);
            }
        }
    }
    Ok(WarmupRun {
        matching,
        choices,
        sum_z: sums,
        fractional: run_fractional(inst, params),
    })
}

/// Exact law of the single-sample scheme.
#[derive(Debug, Clone)]
pub struct WarmupLaw {
    /// Per-edge match probability, computed by evolving the joint law.
    pub edge_probabilities: FractionalAssignment,
    /// Free marginals after each prefix; entry `t` covers arrivals `0..t`.
    pub free_marginals_by_prefix: Vec<Vec<f64>>,
}

/// Evolves the exact joint law of [`run_warmup`] (instances up to
/// [`MAX_EXACT_N`] vertices).
pub fn warmup_law(inst: &ArrivalInstance) -> Result<WarmupLaw> {
    let n = inst.n();
    if n > MAX_EXACT_N {
        return Err(Error::TooLarge {
            operation: "warmup_law",
            n,
            limit: MAX_EXACT_N,
        });
    }
    let params = AllocatorParams::warmup();
    let mut frac = FractionalState::new(n, params);
    let mut dist = FreeStateDistribution::initial(n);
    let mut probs = FractionalAssignment::new();
    let mut by_prefix = vec![dist.free_marginals()];
    for v in 0..n {
        let nbrs = inst.earlier_neighbors(v);
        let y_pre: Vec<f64> = nbrs.iter().map(|&u| frac.y(u)).collect();
        let (_, increments) = frac.process_arrival(v, nbrs);
        let mut targets = Vec::new();
        let mut z = Vec::new();
        for ((&u, &y), inc) in nbrs.iter().zip(&y_pre).zip(increments) {
            if inc > 0.0 {
                targets.push(u);
                z.push(inc / (1.0 - y).max(Z_FLOOR));
            }
        }
        let sum_z: f64 = z.iter().sum();
        if sum_z > 1.0 + 1e-9 {
            return Err(Error::MassExceeded {
                arrival: v,
                sum: sum_z,
            });
        }
        let (marginal_min, marginal_max) = if targets.is_empty() {
            (1.0, 1.0)
        } else {
            y_pre
                .iter()
                .fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), &y| {
                    (lo.min(1.0 - y), hi.max(1.0 - y))
                })
        };
        let t = targets.len();
        let arms = ArrivalArms {
            targets: targets.clone(),
            z: z.clone(),
            z_prime: z,
            sum_z,
            sum_z_prime: sum_z,
            gate: 0.0,
            keep: vec![1.0; t],
            marginal_min,
            marginal_max,
        };
        let mass = dist.apply_arrival(v, &arms);
        for (i, &m) in mass.iter().enumerate() {
            if m > 0.0 {
                probs.add(targets[i], v, m);
            }
        }
        by_prefix.push(dist.free_marginals());
    }
    Ok(WarmupLaw {
        edge_probabilities: probs,
        free_marginals_by_prefix: by_prefix,
    })
}

// ---------------------------------------------------------------------------
// Two-sample scheme
// ---------------------------------------------------------------------------

/// One arrival record of a two-sample run.
#[derive(Debug, Clone, PartialEq)]
pub struct ImprovedRow {
    pub arrival: usize,
    /// Candidate mass before normalization.
    pub sum_z: f64,
    /// Whether normalization was applied (`sum_z > 1`).
    pub normalized: bool,
    /// Whether the emitted trajectory drew a second candidate.
    pub second_sampled: bool,
    /// Match of the emitted trajectory at this arrival.
    pub matched_to: Option<VertexId>,
    /// Range of the engine's free-probability estimates over the
    /// arrival's targets (both 1 when there are none).
    pub engine_marginal_min: f64,
    pub engine_marginal_max: f64,
}

/// A completed two-sample rounding run.
#[derive(Debug, Clone)]
pub struct ImprovedRun {
    pub matching: Matching,
    pub profile: ArcProfile,
    pub rows: Vec<ImprovedRow>,
    /// Largest single-target z per arrival.
    pub max_z: Vec<f64>,
    /// Exact per-edge match probabilities (exact engine only).
    pub edge_probabilities: Option<FractionalAssignment>,
    /// Engine free-marginals after the final arrival.
    pub free_marginals: Vec<f64>,
    pub fractional: FractionalRun,
}

impl ImprovedRun {
    /// Arrivals in the normalized regime that break the expected
    /// structure bounds `sum_z <= 1 + C eps` and `max_u z_u <= 1/2 + C sqrt(eps)`.
    pub fn z_structure_violations(&self, big_c: f64) -> Vec<usize> {
        let eps = self.fractional.params.epsilon;
        self.rows
            .iter()
            .zip(&self.max_z)
            .filter(|(row, &mz)| {
                row.sum_z > 1.0
                    && (row.sum_z > 1.0 + big_c * eps || mz > 0.5 + big_c * eps.sqrt())
            })
            .map(|(row, _)| row.arrival)
            .collect()
    }
}

enum EngineState {
    Exact {
        dist: FreeStateDistribution,
        probs: FractionalAssignment,
        trajectory: u64,
        rng: ChaCha12Rng,
    },
    Particle(ParticleEnsemble),
}

/// Two-sample rounding of the allocation induced by `cfg.params`.
///
/// The emitted matching always equals the greedy replay of the returned
/// profile. With the exact engine the run also reports every edge's
/// exact match probability.
pub fn run_improved(inst: &ArrivalInstance, cfg: &RoundingConfig) -> Result<ImprovedRun> {
    let n = inst.n();
    let mut engine = match cfg.engine {
        EngineKind::Exact => {
            if n > MAX_EXACT_N {
                return Err(Error::TooLarge {
                    operation: "run_improved",
                    n,
                    limit: MAX_EXACT_N,
                });
            }
            EngineState::Exact {
                dist: FreeStateDistribution::initial(n),
                probs: FractionalAssignment::new(),
                trajectory: 0,
                rng: ChaCha12Rng::seed_from_u64(splitmix64_stream(cfg.seed, 0)),
            }
        }
        EngineKind::Particle => {
            if cfg.particles < MIN_PARTICLES {
                return Err(Error::InvalidParameter(format!(
                    "ensemble size {} below minimum {MIN_PARTICLES}",
                    cfg.particles
                )));
            }
            EngineState::Particle(ParticleEnsemble::new(n, cfg.particles, cfg.seed))
        }
    };
    let fractional = run_fractional(inst, cfg.params);
    let mut matching = Matching::empty(n);
    let mut profile = ArcProfile::empty(0);
    let mut rows = Vec::with_capacity(n);
    let mut max_z = Vec::with_capacity(n);
    for v in 0..n {
        let targets_x: Vec<(VertexId, f64)> = inst
            .earlier_neighbors(v)
            .iter()
            .map(|&u| (u, fractional.x.get(u, v)))
            .filter(|&(_, x)| x > 0.0)
            .collect();
        let targets: Vec<VertexId> = targets_x.iter().map(|&(u, _)| u).collect();
        let snap = match &engine {
            EngineState::Exact { dist, .. } => dist.snapshot(&targets),
            EngineState::Particle(e) => e.snapshot(&targets),
        };
        let arms = build_arms(&snap, &targets_x, cfg.params.epsilon);
        let (choices, matched_to) = match &mut engine {
            EngineState::Exact {
                dist,
                probs,
                trajectory,
                rng,
            } => {
                let mass = dist.apply_arrival(v, &arms);
                for (i, &m) in mass.iter().enumerate() {
                    if m > 0.0 {
                        probs.add(arms.targets[i], v, m);
                    }
                }
                let mask = *trajectory;
                let (choices, matched_to) =
                    step_trajectory(&arms, &|u| mask & (1 << u) == 0, rng);
                if let Some(u) = matched_to {
                    *trajectory |= (1 << u) | (1 << v);
                }
                (choices, matched_to)
            }
            EngineState::Particle(e) => e.apply_arrival(v, &arms),
        };
        rows.push(ImprovedRow {
            arrival: v,
            sum_z: arms.sum_z,
            normalized: arms.sum_z > 1.0,
            second_sampled: choices.keep_coin.is_some(),
            matched_to,
            engine_marginal_min: arms.marginal_min,
            engine_marginal_max: arms.marginal_max,
        });
        max_z.push(arms.z.iter().copied().fold(0.0, f64::max));
        profile.push(choices);
        if let Some(u) = matched_to {
            matching.add_pair(u, v);
        }
    }
    let (edge_probabilities, free_marginals) = match engine {
        EngineState::Exact { dist, probs, .. } => (Some(probs), dist.free_marginals()),
        EngineState::Particle(e) => (None, e.free_marginals()),
    };
    Ok(ImprovedRun {
        matching,
        profile,
        rows,
        max_z,
        edge_probabilities,
        free_marginals,
        fractional,
    })
}

/// Per-arrival sampling weights of the two-sample scheme under the exact
/// law. The weights depend only on the evolving joint distribution, never
/// on any sampled trajectory, so one pass serves any number of replays.
pub(crate) fn exact_arms_sequence(
    inst: &ArrivalInstance,
    params: AllocatorParams,
) -> Result<Vec<ArrivalArms>> {
    let n = inst.n();
    if n > MAX_EXACT_N {
        return Err(Error::TooLarge {
            operation: "exact_arms_sequence",
            n,
            limit: MAX_EXACT_N,
        });
    }
    let fractional = run_fractional(inst, params);
    let mut dist = FreeStateDistribution::initial(n);
    let mut seq = Vec::with_capacity(n);
    for v in 0..n {
        let targets_x: Vec<(VertexId, f64)> = inst
            .earlier_neighbors(v)
            .iter()
            .map(|&u| (u, fractional.x.get(u, v)))
            .filter(|&(_, x)| x > 0.0)
            .collect();
        let targets: Vec<VertexId> = targets_x.iter().map(|&(u, _)| u).collect();
        let snap = dist.snapshot(&targets);
        let arms = build_arms(&snap, &targets_x, params.epsilon);
        dist.apply_arrival(v, &arms);
        seq.push(arms);
    }
    Ok(seq)
}

/// Replays the choice process once over a precomputed arms sequence,
/// returning the recorded profile and the resulting matching.
pub(crate) fn sample_profile(
    arms_seq: &[ArrivalArms],
    rng: &mut ChaCha12Rng,
) -> (ArcProfile, Matching) {
    let n = arms_seq.len();
    let mut matching = Matching::empty(n);
    let mut profile = ArcProfile::empty(0);
    for (v, arms) in arms_seq.iter().enumerate() {
        let (choices, matched_to) = step_trajectory(arms, &|u| !matching.is_matched(u), rng);
        profile.push(choices);
        if let Some(u) = matched_to {
            matching.add_pair(u, v);
        }
    }
    (profile, matching)
}

/// Renders a two-sample run's records as CSV with 12-significant-digit
/// floats; booleans render as 0/1 and a missed match as an empty field.
pub fn improved_csv(run: &ImprovedRun) -> String {
    let mut out = String::from(
        "arrival,sum_z,normalized,second_sampled,matched_to,engine_marginal_min,engine_marginal_max\n",
    );
    for row in &run.rows {
        let matched = row.matched_to.map(|u| u.to_string()).unwrap_or_default();
        out.push_str(&format!(
            "{},{},{},{},{},{},{}\n",
            row.arrival,
            fmt_sig12(row.sum_z),
            row.normalized as u8,
            row.second_sampled as u8,
            matched,
            fmt_sig12(row.engine_marginal_min),
            fmt_sig12(row.engine_marginal_max),
        ));
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::rngs::StdRng;

    fn random_instance(rng: &mut StdRng, n: usize, p: f64) -> ArrivalInstance {
        let mut nbrs = Vec::with_capacity(n);
        for v in 0..n {
            nbrs.push((0..v).filter(|_| rng.gen_bool(p)).collect());
        }
        ArrivalInstance::new(nbrs).expect("valid")
    }

    fn path3() -> ArrivalInstance {
        ArrivalInstance::new(vec![vec![], vec![0], vec![1]]).expect("valid")
    }

    fn triangle() -> ArrivalInstance {
        ArrivalInstance::new(vec![vec![], vec![0], vec![0, 1]]).expect("valid")
    }

    /// Four disjoint edges, then a hub adjacent to one endpoint of each.
    /// Under `epsilon = 0.09` the hub arrival's candidate mass exceeds 1.
    fn hub_fixture() -> ArrivalInstance {
        ArrivalInstance::new(vec![
            vec![],
            vec![0],
            vec![],
            vec![2],
            vec![],
            vec![4],
            vec![],
            vec![6],
            vec![1, 3, 5, 7],
        ])
        .expect("valid")
    }

    #[test]
    fn keep_probability_clamps_to_unit_interval() {
        assert_eq!(keep_probability(0.3, 0.1, 0.0), 1.0);
        assert_eq!(keep_probability(0.3, 0.4, 0.2), 0.0);
        assert_eq!(keep_probability(0.3, 0.1, 0.1), 1.0);
        assert!((keep_probability(0.3, 0.25, 0.2) - 0.25).abs() < 1e-12);
    }

    #[test]
    fn particle_config_requires_minimum_ensemble() {
        let params = AllocatorParams::improved(0.05).expect("in range");
        assert!(RoundingConfig::particle(params, MIN_PARTICLES - 1, 0).is_err());
        assert!(RoundingConfig::particle(params, MIN_PARTICLES, 0).is_ok());
    }

    #[test]
    fn exact_engine_rejects_oversized_instances() {
        let inst = ArrivalInstance::new(vec![vec![]; MAX_EXACT_N + 1]).expect("valid");
        let cfg = RoundingConfig::exact(AllocatorParams::warmup(), 0);
        assert!(matches!(
            run_improved(&inst, &cfg),
            Err(Error::TooLarge { .. })
        ));
        assert!(matches!(warmup_law(&inst), Err(Error::TooLarge { .. })));
    }

    #[test]
    fn single_sample_law_is_lossless_on_examples() {
        let single = ArrivalInstance::new(vec![vec![], vec![0]]).expect("valid");
        let law = warmup_law(&single).expect("within cap");
        assert!((law.edge_probabilities.get(0, 1) - 0.5).abs() < 1e-12);

        let law = warmup_law(&path3()).expect("within cap");
        assert!((law.edge_probabilities.get(0, 1) - 0.5).abs() < 1e-9);
        assert!((law.edge_probabilities.get(1, 2) - 0.25).abs() < 1e-9);
    }

    #[test]
    fn single_sample_law_is_lossless_on_random_instances() {
        let mut rng = StdRng::seed_from_u64(0x5eed_0030);
        for _ in 0..25 {
            let n = rng.gen_range(1..=9);
            let inst = random_instance(&mut rng, n, 0.5);
            let law = warmup_law(&inst).expect("within cap");
            let run = run_fractional(&inst, AllocatorParams::warmup());
            for ((u, v), x) in run.x.iter() {
                assert!(
                    (law.edge_probabilities.get(u, v) - x).abs() < 1e-9,
                    "edge ({u}, {v})"
                );
            }
            // The law's free marginals match the dual prices at every prefix.
            let mut frac = FractionalState::new(inst.n(), AllocatorParams::warmup());
            for v in 0..inst.n() {
                frac.process_arrival(v, inst.earlier_neighbors(v));
                for u in 0..=v {
                    let expected = 1.0 - frac.y(u);
                    let got = law.free_marginals_by_prefix[v + 1][u];
                    assert!((got - expected).abs() < 1e-9, "prefix {v} vertex {u}");
                }
            }
        }
    }

    #[test]
    fn single_sample_run_frequency_matches_probability() {
        let inst = path3();
        let trials = 4000;
        let mut hits_01 = 0;
        for seed in 0..trials {
            let run = run_warmup(&inst, seed).expect("mass within bounds");
            assert!(run.sum_z.iter().all(|&s| s <= 1.0 + 1e-9));
            for (u, v) in run.matching.pairs() {
                assert!(inst.earlier_neighbors(v).contains(&u));
            }
            if run.matching.mate(0) == Some(1) {
                hits_01 += 1;
            }
        }
        let freq = hits_01 as f64 / trials as f64;
        let sigma = (0.5 * 0.5 / trials as f64).sqrt();
        assert!(
            (freq - 0.5).abs() <= 4.0 * sigma,
            "frequency {freq} too far from 0.5"
        );
    }

    #[test]
    fn single_sample_run_agrees_with_engine_trajectory() {
        // With kappa = 1 the engine's free probabilities equal 1 - y, so
        // the two samplers consume identical draws.
        let mut rng = StdRng::seed_from_u64(0x5eed_0031);
        for _ in 0..25 {
            let n = rng.gen_range(1..=8);
            let inst = random_instance(&mut rng, n, 0.5);
            for seed in 0..2 {
                let warmup = run_warmup(&inst, seed).expect("mass within bounds");
                let cfg = RoundingConfig::exact(AllocatorParams::warmup(), seed);
                let improved = run_improved(&inst, &cfg).expect("within cap");
                assert_eq!(warmup.matching, improved.matching);
            }
        }
    }

    #[test]
    fn two_sample_single_edge_is_lossless() {
        let inst = ArrivalInstance::new(vec![vec![], vec![0]]).expect("valid");
        let params = AllocatorParams::improved(0.05).expect("in range");
        let run = run_improved(&inst, &RoundingConfig::exact(params, 3)).expect("within cap");
        let x = run.fractional.x.get(0, 1);
        let probs = run.edge_probabilities.as_ref().expect("exact engine");
        assert!((probs.get(0, 1) - x).abs() < 1e-12);
        assert!(!run.rows[1].normalized);
        assert!((run.rows[1].sum_z - x).abs() < 1e-12);
    }

    #[test]
    fn two_sample_triangle_stays_below_threshold_and_lossless() {
        let params = AllocatorParams::improved(0.05).expect("in range");
        let run = run_improved(&triangle(), &RoundingConfig::exact(params, 5)).expect("cap");
        assert!(run.rows.iter().all(|r| !r.normalized));
        let probs = run.edge_probabilities.as_ref().expect("exact engine");
        for ((u, v), x) in run.fractional.x.iter() {
            let p = probs.get(u, v);
            assert!(p <= x + 1e-12, "edge ({u}, {v})");
            assert!((p - x).abs() < 1e-9, "edge ({u}, {v})");
        }
    }

    #[test]
    fn hub_fixture_normalizes_and_respects_edge_caps() {
        let inst = hub_fixture();
        let params = AllocatorParams::improved(0.09).expect("in range");
        let cfg = RoundingConfig::exact(params, 11);
        let run = run_improved(&inst, &cfg).expect("within cap");
        let hub_row = &run.rows[8];
        assert!(
            hub_row.normalized && hub_row.sum_z > 1.0,
            "hub mass {} should exceed 1",
            hub_row.sum_z
        );
        assert!(run.z_structure_violations(10.0).is_empty());

        // Every edge respects the cap, and the hub edges hit exactly
        // min(x, first + second) predicted from the pre-arrival law.
        let probs = run.edge_probabilities.as_ref().expect("exact engine");
        for ((u, v), x) in run.fractional.x.iter() {
            assert!(probs.get(u, v) <= x + 1e-12, "edge ({u}, {v})");
        }
        let pre = exact_free_distribution(&inst, &cfg, 8).expect("within cap");
        let targets = [1usize, 3, 5, 7];
        let zs: Vec<f64> = targets
            .iter()
            .map(|&u| run.fractional.x.get(u, 8) / pre.pr_free(u))
            .collect();
        let sum_z: f64 = zs.iter().sum();
        assert!(sum_z > 1.0);
        let z_prime: Vec<f64> = zs.iter().map(|z| z / sum_z).collect();
        for (i, &u) in targets.iter().enumerate() {
            let x = run.fractional.x.get(u, 8);
            let first = pre.pr_free(u) * z_prime[i];
            let blocked: f64 = targets
                .iter()
                .enumerate()
                .map(|(j, &w)| z_prime[j] * (1.0 - pre.conditional_free(w, u)))
                .sum();
            let second = first * params.epsilon.sqrt() * blocked;
            let predicted = x.min(first + second);
            assert!(
                (probs.get(u, 8) - predicted).abs() < 1e-9,
                "hub edge ({u}, 8): engine {} vs predicted {predicted}",
                probs.get(u, 8)
            );
        }
    }

    #[test]
    fn emitted_matching_equals_greedy_replay() {
        let mut rng = StdRng::seed_from_u64(0x5eed_0032);
        let params = AllocatorParams::improved(0.09).expect("in range");
        for trial in 0..60 {
            let inst = if trial % 3 == 0 {
                hub_fixture()
            } else {
                let n = rng.gen_range(1..=8);
                random_instance(&mut rng, n, 0.6)
            };
            let seed = rng.gen();
            let cfgs = [
                RoundingConfig::exact(params, seed),
                RoundingConfig::particle(params, MIN_PARTICLES, seed).expect("valid"),
            ];
            for cfg in cfgs {
                let run = run_improved(&inst, &cfg).expect("within cap");
                let g = build_selection(&inst, &run.profile).expect("profile is valid");
                let replay = greedy_match_pruned(&prune_selection(&g));
                assert_eq!(run.matching, replay);
            }
        }
    }

    #[test]
    fn runs_are_deterministic_given_seed() {
        let inst = hub_fixture();
        let params = AllocatorParams::improved(0.09).expect("in range");
        for cfg in [
            RoundingConfig::exact(params, 77),
            RoundingConfig::particle(params, MIN_PARTICLES, 77).expect("valid"),
        ] {
            let a = run_improved(&inst, &cfg).expect("within cap");
            let b = run_improved(&inst, &cfg).expect("within cap");
            assert_eq!(a.matching, b.matching);
            assert_eq!(a.profile, b.profile);
            assert_eq!(a.rows, b.rows);
            assert_eq!(improved_csv(&a), improved_csv(&b));
        }
    }

    #[test]
    fn particle_marginals_track_exact_marginals() {
        for (inst, eps) in [(triangle(), 0.05), (hub_fixture(), 0.09)] {
            let params = AllocatorParams::improved(eps).expect("in range");
            let exact = run_improved(&inst, &RoundingConfig::exact(params, 9)).expect("cap");
            let particle_cfg =
                RoundingConfig::particle(params, DEFAULT_PARTICLES, 9).expect("valid");
            let particle = run_improved(&inst, &particle_cfg).expect("any size");
            for u in 0..inst.n() {
                let m = exact.free_marginals[u];
                let sigma = (m * (1.0 - m) / DEFAULT_PARTICLES as f64).sqrt();
                let diff = (particle.free_marginals[u] - m).abs();
                assert!(
                    diff <= 4.0 * sigma + 1e-9,
                    "vertex {u}: particle {} vs exact {m}",
                    particle.free_marginals[u]
                );
            }
        }
    }

    #[test]
    fn improved_csv_is_well_formed() {
        let params = AllocatorParams::improved(0.09).expect("in range");
        let run =
            run_improved(&hub_fixture(), &RoundingConfig::exact(params, 2)).expect("within cap");
        let csv = improved_csv(&run);
        let mut lines = csv.lines();
        assert_eq!(
            lines.next(),
            Some("arrival,sum_z,normalized,second_sampled,matched_to,engine_marginal_min,engine_marginal_max")
        );
        let rows: Vec<&str> = lines.collect();
        assert_eq!(rows.len(), 9);
        for (v, row) in rows.iter().enumerate() {
            let fields: Vec<&str> = row.split(',').collect();
            assert_eq!(fields.len(), 7);
            assert_eq!(fields[0], v.to_string());
            assert!(fields[2] == "0" || fields[2] == "1");
            assert!(fields[3] == "0" || fields[3] == "1");
            let expected = run.rows[v]
                .matched_to
                .map(|u| u.to_string())
                .unwrap_or_default();
            assert_eq!(fields[4], expected);
        }
    }
}
