//! Instrumentation of the pruned selection structure: rooted primary
//! paths, blocking sets and their z-mass, certified termination
//! witnesses, good/bad vertex classification, and sampled tail
//! statistics against the `e^{-k/2}` envelope.
//!
//! Sampling always evolves the exact joint law once to fix the per-arc
//! weights, then replays the choice process cheaply per sample, so every
//! statistic here refers to the same distribution the rounding engine
//! realizes.

use std::collections::BTreeMap;
use std::collections::BTreeSet;

use rand::SeedableRng;
use rand_chacha::ChaCha12Rng;

use crate::graph::{ArrivalInstance, VertexId};
use crate::rounding::{
    build_selection, exact_arms_sequence, prune_selection, sample_profile, RoundingConfig,
    SelectionGraph,
};
use crate::util::{fmt_sig12, splitmix64_stream, wilson_interval};
use crate::{Error, Result};

/// z-values of every potential arc, recorded while evolving the exact law.
///
/// `z(source, target)` is the candidate weight of `target` at `source`'s
/// arrival, before normalization; arcs never formed (zero allocation)
/// report 0.
#[derive(Debug, Clone)]
pub struct ZRecord {
    per_source: Vec<Vec<(VertexId, f64)>>,
}

impl ZRecord {
    /// The recorded z-value of arc `(source, target)`, or 0 if absent.
    pub fn z(&self, source: VertexId, target: VertexId) -> f64 {
        self.per_source[source]
            .iter()
            .find(|&&(u, _)| u == target)
            .map_or(0.0, |&(_, z)| z)
    }
}

/// Records the z-value of every potential arc of an instance under the
/// given allocator parameters (exact law, so instance size is capped).
pub fn z_record(inst: &ArrivalInstance, cfg: &RoundingConfig) -> Result<ZRecord> {
    let arms = exact_arms_sequence(inst, cfg.params)?;
    Ok(z_record_from_arms(&arms))
}

fn z_record_from_arms(arms: &[crate::rounding::ArrivalArms]) -> ZRecord {
    ZRecord {
        per_source: arms
            .iter()
            .map(|a| a.targets.iter().copied().zip(a.z.iter().copied()).collect())
            .collect(),
    }
}

/// Arcs whose appearance as primaries would block `(source, target)`
/// from the pruned graph: every `(s, target)` with `{s, target}` an edge
/// and `s` arriving after `target` but before `source`.
pub fn blocking_set(
    inst: &ArrivalInstance,
    source: VertexId,
    target: VertexId,
) -> Vec<(VertexId, VertexId)> {
    (target + 1..source)
        .filter(|&s| inst.earlier_neighbors(s).binary_search(&target).is_ok())
        .map(|s| (s, target))
        .collect()
}

/// Total z-mass of the union of the given arcs' blocking sets. The union
/// is deduplicated, so shared blockers are counted once.
pub fn blocking_mass(
    inst: &ArrivalInstance,
    arcs: &[(VertexId, VertexId)],
    z: &ZRecord,
) -> f64 {
    let mut seen = BTreeSet::new();
    let mut total = 0.0;
    for &(source, target) in arcs {
        for arc in blocking_set(inst, source, target) {
            if seen.insert(arc) {
                total += z.z(arc.0, arc.1);
            }
        }
    }
    total
}

/// The maximal primary path rooted at `root`: the root followed by the
/// unique chain of surviving primary arcs. Targets arrive before sources,
/// so the walk strictly descends and always terminates.
pub fn primary_path(h: &SelectionGraph, root: VertexId) -> Vec<VertexId> {
    let mut path = vec![root];
    let mut cur = root;
    while let Some(next) = h.primary(cur) {
        path.push(next);
        cur = next;
    }
    path
}

/// Length and blocking mass of one vertex's maximal rooted primary path.
#[derive(Debug, Clone, PartialEq)]
pub struct PathStat {
    pub vertex: VertexId,
    /// Number of primary arcs on the maximal path rooted here.
    pub length: usize,
    /// z-mass of the path's blocking set.
    pub blocking_mass: f64,
}

/// Per-vertex maximal primary path statistics over a pruned graph.
pub fn primary_path_stats(
    inst: &ArrivalInstance,
    h: &SelectionGraph,
    z: &ZRecord,
) -> Vec<PathStat> {
    (0..h.n())
        .map(|root| {
            let path = primary_path(h, root);
            let arcs: Vec<(VertexId, VertexId)> =
                path.windows(2).map(|w| (w[0], w[1])).collect();
            PathStat {
                vertex: root,
                length: arcs.len(),
                blocking_mass: blocking_mass(inst, &arcs, z),
            }
        })
        .collect()
}

/// A maximal primary path together with its termination witness.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct CertifiedPath {
    /// Vertices from the root down to the last vertex of the chain.
    pub path: Vec<VertexId>,
    /// `None` when the last vertex drew no primary at all; otherwise the
    /// surviving primary arc into the target that blocked the last
    /// vertex's own primary draw.
    pub terminator: Option<(VertexId, VertexId)>,
}

/// The unique certified primary path rooted at `root`, given the raw
/// selection graph and its pruning.
pub fn certified_path(g: &SelectionGraph, h: &SelectionGraph, root: VertexId) -> CertifiedPath {
    let path = primary_path(h, root);
    let last = *path.last().expect("path contains its root");
    let terminator = g.primary(last).map(|w| {
        let keeper = (0..h.n())
            .find(|&s| h.primary(s) == Some(w))
            .expect("a blocked target keeps its earliest primary");
        (keeper, w)
    });
    CertifiedPath { path, terminator }
}

/// Blocking mass of a certified path: the union over the path's arcs and
/// the terminator arc, when present.
pub fn certified_blocking_mass(
    inst: &ArrivalInstance,
    cp: &CertifiedPath,
    z: &ZRecord,
) -> f64 {
    let mut arcs: Vec<(VertexId, VertexId)> =
        cp.path.windows(2).map(|w| (w[0], w[1])).collect();
    if let Some(t) = cp.terminator {
        arcs.push(t);
    }
    blocking_mass(inst, &arcs, z)
}

/// Thresholds of the good/bad vertex classifier.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GoodVertexParams {
    /// Path-length threshold `L`; a vertex is suspect when its rooted
    /// primary path reaches this many arcs.
    pub length_threshold: usize,
    /// Probability threshold: good iff the estimated long-path
    /// probability is at most this.
    pub prob_threshold: f64,
    /// Monte Carlo sample count.
    pub samples: usize,
}

impl Default for GoodVertexParams {
    fn default() -> Self {
        Self {
            length_threshold: 5,
            prob_threshold: 0.05,
            samples: 2000,
        }
    }
}

impl GoodVertexParams {
    fn validate(&self) -> Result<()> {
        if self.length_threshold == 0 {
            return Err(Error::InvalidParameter(
                "length threshold must be at least 1".into(),
            ));
        }
        if !(self.prob_threshold > 0.0 && self.prob_threshold < 1.0) {
            return Err(Error::InvalidParameter(format!(
                "probability threshold {} outside (0, 1)",
                self.prob_threshold
            )));
        }
        if self.samples == 0 {
            return Err(Error::InvalidParameter("zero samples".into()));
        }
        Ok(())
    }
}

/// One vertex's long-path estimate and classification.
#[derive(Debug, Clone, PartialEq)]
pub struct LongPathRow {
    pub vertex: VertexId,
    pub samples: usize,
    /// Fraction of samples whose rooted primary path reached the
    /// length threshold.
    pub frequency: f64,
    /// 95% Wilson interval around the frequency.
    pub ci_low: f64,
    pub ci_high: f64,
    /// Good iff `frequency <= prob_threshold`.
    pub good: bool,
}

/// Estimates per-vertex long-path probabilities by replaying the choice
/// process `params.samples` times and classifies each vertex.
pub fn estimate_long_path_prob(
    inst: &ArrivalInstance,
    cfg: &RoundingConfig,
    params: &GoodVertexParams,
) -> Result<Vec<LongPathRow>> {
    params.validate()?;
    let arms = exact_arms_sequence(inst, cfg.params)?;
    let n = inst.n();
    let mut hits = vec![0u64; n];
    for s in 0..params.samples {
        let mut rng = ChaCha12Rng::seed_from_u64(splitmix64_stream(cfg.seed, s as u64));
        let (profile, _) = sample_profile(&arms, &mut rng);
        let g = build_selection(inst, &profile)?;
        let h = prune_selection(&g);
        for (v, hit) in hits.iter_mut().enumerate() {
            if primary_path(&h, v).len() - 1 >= params.length_threshold {
                *hit += 1;
            }
        }
    }
    Ok(hits
        .iter()
        .enumerate()
        .map(|(v, &h)| {
            let frequency = h as f64 / params.samples as f64;
            let (ci_low, ci_high) = wilson_interval(h, params.samples as u64, 1.96);
            LongPathRow {
                vertex: v,
                samples: params.samples,
                frequency,
                ci_low,
                ci_high,
                good: frequency <= params.prob_threshold,
            }
        })
        .collect())
}

/// Report-only comparison of the classifier against the allocation size.
#[derive(Debug, Clone, PartialEq)]
pub struct ClassificationSummary {
    pub bad_vertices: usize,
    pub bad_fraction: f64,
    /// Total fractional value the bad count is compared against.
    pub fractional_value: f64,
}

/// Summarizes a classification next to the fractional value it rounds.
pub fn classification_summary(rows: &[LongPathRow], fractional_value: f64) -> ClassificationSummary {
    let bad = rows.iter().filter(|r| !r.good).count();
    ClassificationSummary {
        bad_vertices: bad,
        bad_fraction: if rows.is_empty() {
            0.0
        } else {
            bad as f64 / rows.len() as f64
        },
        fractional_value,
    }
}

/// One (vertex, k) cell of a tail report.
#[derive(Debug, Clone, PartialEq)]
pub struct TailRow {
    pub vertex: VertexId,
    pub k: f64,
    /// Fraction of samples whose certified path mass reached `k`.
    pub frequency: f64,
    /// The envelope `e^{-k/2}`.
    pub bound: f64,
    /// Four standard deviations of a frequency estimate at the bound.
    pub slack: f64,
}

impl TailRow {
    /// Whether the empirical frequency respects the envelope plus slack.
    pub fn within(&self) -> bool {
        self.frequency <= self.bound + self.slack
    }
}

/// Empirical exceedance frequencies of certified-path blocking mass.
#[derive(Debug, Clone)]
pub struct TailReport {
    pub samples: usize,
    /// Rows ordered by vertex, then by the k-grid.
    pub rows: Vec<TailRow>,
}

/// Samples certified primary paths and reports, per root vertex and per
/// `k`, how often the path's blocking mass reached `k`, next to the
/// `e^{-k/2}` envelope.
pub fn tail_bound_report(
    inst: &ArrivalInstance,
    cfg: &RoundingConfig,
    k_grid: &[f64],
    samples: usize,
) -> Result<TailReport> {
    if samples == 0 {
        return Err(Error::InvalidParameter("zero samples".into()));
    }
    if k_grid.is_empty() {
        return Err(Error::InvalidParameter("empty k grid".into()));
    }
    let arms = exact_arms_sequence(inst, cfg.params)?;
    let zrec = z_record_from_arms(&arms);
    let n = inst.n();
    // Arcs on a certified path have pairwise-distinct targets, and
    // blocking sets of arcs with distinct targets are disjoint, so the
    // union mass is a plain sum of per-arc masses.
    let mut arc_mass: BTreeMap<(VertexId, VertexId), f64> = BTreeMap::new();
    for v in 0..n {
        for &u in inst.earlier_neighbors(v) {
            arc_mass.insert((v, u), blocking_mass(inst, &[(v, u)], &zrec));
        }
    }
    let mut hits = vec![vec![0u64; k_grid.len()]; n];
    for s in 0..samples {
        let mut rng = ChaCha12Rng::seed_from_u64(splitmix64_stream(cfg.seed, s as u64));
        let (profile, _) = sample_profile(&arms, &mut rng);
        let g = build_selection(inst, &profile)?;
        let h = prune_selection(&g);
        for (v, counts) in hits.iter_mut().enumerate() {
            let cp = certified_path(&g, &h, v);
            let mut mass = 0.0;
            for w in cp.path.windows(2) {
                mass += arc_mass.get(&(w[0], w[1])).copied().unwrap_or(0.0);
            }
            if let Some(t) = cp.terminator {
                mass += arc_mass.get(&t).copied().unwrap_or(0.0);
            }
            for (ki, &k) in k_grid.iter().enumerate() {
                if mass >= k {
                    counts[ki] += 1;
                }
            }
        }
    }
    let mut rows = Vec::with_capacity(n * k_grid.len());
    for (v, counts) in hits.iter().enumerate() {
        for (ki, &k) in k_grid.iter().enumerate() {
            let bound = (-k / 2.0).exp();
            rows.push(TailRow {
                vertex: v,
                k,
                frequency: counts[ki] as f64 / samples as f64,
                bound,
                slack: 4.0 * (bound * (1.0 - bound) / samples as f64).sqrt(),
            });
        }
    }
    Ok(TailReport { samples, rows })
}

/// Renders classification and tail statistics as CSV, one row per
/// (vertex, k) cell; the per-vertex classification columns repeat across
/// that vertex's k rows.
pub fn diagnostics_csv(long: &[LongPathRow], tail: &TailReport) -> String {
    let by_vertex: BTreeMap<VertexId, &LongPathRow> =
        long.iter().map(|r| (r.vertex, r)).collect();
    let mut out =
        String::from("vertex,samples,long_path_freq,classification,k,tail_freq,tail_bound\n");
    for row in &tail.rows {
        let Some(lp) = by_vertex.get(&row.vertex) else {
            continue;
        };
        let class = if lp.good { "good" } else { "bad" };
        out.push_str(&format!(
            "{},{},{},{},{},{},{}\n",
            row.vertex,
            lp.samples,
            fmt_sig12(lp.frequency),
            class,
            fmt_sig12(row.k),
            fmt_sig12(row.frequency),
            fmt_sig12(row.bound),
        ));
    }
    out
}
