//! Selection graphs: the recorded arc choices of a rounding run, their
//! pruning, and deterministic greedy replay.
//!
//! A run's randomness is summarized per arrival as a primary target, an
//! optional kept secondary target, and the drop coin. Replaying the arcs
//! greedily in arrival order (primary first) reproduces the run's
//! matching exactly, which turns distributional questions about the
//! algorithm into pathwise questions about arc profiles.

use crate::graph::{ArrivalInstance, Matching, VertexId};
use crate::{Error, Result};

/// Recorded choices of one arrival.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct VertexChoices {
    /// First sampled target, if any.
    pub primary: Option<VertexId>,
    /// Second sampled target that survived the drop rule. Not recorded
    /// when the drop rule erased an actual secondary match attempt.
    pub secondary: Option<VertexId>,
    /// Uniform coin consumed by the drop rule, kept for audit; present
    /// iff a second target was sampled.
    pub keep_coin: Option<f64>,
}

/// Per-arrival choices of a whole run. Together with the instance this
/// determines the run's matching via [`greedy_match_pruned`].
#[derive(Debug, Clone, PartialEq, Default)]
pub struct ArcProfile {
    choices: Vec<VertexChoices>,
}

impl ArcProfile {
    /// Profile with no choices for any of the `n` arrivals.
    pub fn empty(n: usize) -> Self {
        Self {
            choices: vec![VertexChoices::default(); n],
        }
    }

    /// Wraps explicit per-arrival choices.
    pub fn from_choices(choices: Vec<VertexChoices>) -> Self {
        Self { choices }
    }

    /// Number of arrivals covered.
    pub fn len(&self) -> usize {
        self.choices.len()
    }

    /// Whether the profile covers no arrivals.
    pub fn is_empty(&self) -> bool {
        self.choices.is_empty()
    }

    /// Choices of arrival `v`.
    pub fn choices(&self, v: VertexId) -> VertexChoices {
        self.choices[v]
    }

    /// All choices in arrival order.
    pub fn all(&self) -> &[VertexChoices] {
        &self.choices
    }

    /// Copy with arrival `v`'s choices replaced.
    pub fn with_choice(&self, v: VertexId, choices: VertexChoices) -> Self {
        let mut out = self.clone();
        out.choices[v] = choices;
        out
    }

    pub(crate) fn push(&mut self, choices: VertexChoices) {
        self.choices.push(choices);
    }
}

/// Arc kind in a selection graph.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ArcKind {
    Primary,
    Secondary,
}

/// A directed arc from an arriving vertex to an earlier neighbor.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Arc {
    pub source: VertexId,
    pub target: VertexId,
    pub kind: ArcKind,
}

/// Out-arcs of one vertex.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
struct OutArcs {
    primary: Option<VertexId>,
    secondary: Option<VertexId>,
}

/// The arcs of an arc profile, possibly pruned.
#[derive(Debug, Clone, PartialEq)]
pub struct SelectionGraph {
    out: Vec<OutArcs>,
}

impl SelectionGraph {
    /// Number of vertices.
    pub fn n(&self) -> usize {
        self.out.len()
    }

    /// Primary target of `v`, if present.
    pub fn primary(&self, v: VertexId) -> Option<VertexId> {
        self.out[v].primary
    }

    /// Secondary target of `v`, if present.
    pub fn secondary(&self, v: VertexId) -> Option<VertexId> {
        self.out[v].secondary
    }

    /// All arcs in arrival order, primary before secondary per vertex.
    pub fn arcs(&self) -> Vec<Arc> {
        let mut arcs = Vec::new();
        for (source, out) in self.out.iter().enumerate() {
            if let Some(target) = out.primary {
                arcs.push(Arc {
                    source,
                    target,
                    kind: ArcKind::Primary,
                });
            }
            if let Some(target) = out.secondary {
                arcs.push(Arc {
                    source,
                    target,
                    kind: ArcKind::Secondary,
                });
            }
        }
        arcs
    }
}

/// Materializes a profile's arcs, validating each against the instance.
pub fn build_selection(inst: &ArrivalInstance, profile: &ArcProfile) -> Result<SelectionGraph> {
    if profile.len() != inst.n() {
        return Err(Error::InvalidInstance(format!(
            "profile covers {} arrivals, instance has {}",
            profile.len(),
            inst.n()
        )));
    }
    let check = |v: VertexId, target: Option<VertexId>| -> Result<()> {
        if let Some(u) = target {
            if !inst.earlier_neighbors(v).contains(&u) {
                return Err(Error::InvalidInstance(format!(
                    "arc {v} -> {u} does not point to an earlier neighbor"
                )));
            }
        }
        Ok(())
    };
    let mut out = Vec::with_capacity(profile.len());
    for v in 0..profile.len() {
        let c = profile.choices(v);
        check(v, c.primary)?;
        check(v, c.secondary)?;
        out.push(OutArcs {
            primary: c.primary,
            secondary: c.secondary,
        });
    }
    Ok(SelectionGraph { out })
}

/// Removes arcs that can never produce a match.
///
/// For each target, only the earliest incoming primary arc can match it;
/// every later arc into the same target (and the same source's secondary
/// arc onto its own primary target) finds it already matched. Greedy
/// replay is unchanged by the removal.
pub fn prune_selection(g: &SelectionGraph) -> SelectionGraph {
    let n = g.n();
    // Earliest primary source per target.
    let mut first_primary = vec![usize::MAX; n];
    for v in 0..n {
        if let Some(u) = g.primary(v) {
            if v < first_primary[u] {
                first_primary[u] = v;
            }
        }
    }
    let mut out = Vec::with_capacity(n);
    for v in 0..n {
        let primary = g.primary(v).filter(|&u| first_primary[u] >= v);
        let secondary = g.secondary(v).filter(|&u| first_primary[u] > v);
        out.push(OutArcs { primary, secondary });
    }
    SelectionGraph { out }
}

/// Replays arcs greedily in arrival order, primary arcs first.
///
/// Each vertex is free at its own step (only later sources could have
/// matched it); it matches its primary target if that target is free,
/// otherwise its secondary target if free.
pub fn greedy_match_pruned(g: &SelectionGraph) -> Matching {
    let mut m = Matching::empty(g.n());
    for v in 0..g.n() {
        debug_assert!(!m.is_matched(v));
        let target = g
            .primary(v)
            .filter(|&u| !m.is_matched(u))
            .or_else(|| g.secondary(v).filter(|&u| !m.is_matched(u)));
        if let Some(u) = target {
            m.add_pair(u, v);
        }
    }
    m
}

/// Matched-status bitmask after each arrival of the greedy replay.
///
/// Bit `u` of entry `v` is set iff `u` is matched once arrivals `0..=v`
/// are processed. Limited to 64 vertices.
pub fn greedy_match_timeline(g: &SelectionGraph) -> Vec<u64> {
    assert!(g.n() <= 64, "timeline limited to 64 vertices");
    let mut mask = 0u64;
    let mut timeline = Vec::with_capacity(g.n());
    for v in 0..g.n() {
        let free = |u: VertexId| mask & (1 << u) == 0;
        let target = g
            .primary(v)
            .filter(|&u| free(u))
            .or_else(|| g.secondary(v).filter(|&u| free(u)));
        if let Some(u) = target {
            mask |= (1 << u) | (1 << v);
        }
        timeline.push(mask);
    }
    timeline
}
