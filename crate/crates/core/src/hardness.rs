//! Hard edge-arrival family, its matching LP, and the exact-rational dual
//! certificate bounding every online fractional edge-arrival algorithm.
//!
//! The family `G_n` is bipartite on sides `u_1..u_n` and `v_1..v_n`. Edges
//! arrive in `n` rounds; round `i` reveals `(u_j, v_{i-j+1})` for
//! `j = 1..i`, so after round `k` the graph has a maximum matching of size
//! exactly `k` while every online assignment must hedge across rounds.
//! Writing `x_{i,j}` for the value assigned to round `i`'s edge at `u_j`,
//! feasibility and prefix-competitiveness constraints form a linear program
//! whose optimum upper-bounds the best possible competitive ratio; an
//! explicit feasible dual solution pins that optimum to
//! `1/2 + 1/(2n+2)` for even `n`. All certificate arithmetic is exact
//! (arbitrary-precision rationals), so feasibility claims carry no rounding
//! slack.

use std::fmt::Write as _;

use num_bigint::BigInt;
use num_rational::BigRational;
use num_traits::{One, Zero};

use crate::error::{Error, Result};
use crate::graph::{maximum_matching, EdgeArrivalInstance, VertexId};

/// The hard family instance `G_n` together with its round structure.
///
/// Vertices are numbered `u_j -> j-1` and `v_j -> n+j-1`; edges are stored
/// in arrival order (rounds ascending, `j` ascending within each round).
#[derive(Debug, Clone)]
pub struct HardFamilyInstance {
    n: usize,
    instance: EdgeArrivalInstance,
    round_ends: Vec<usize>,
}

impl HardFamilyInstance {
    /// Builds `G_n` for side size `n >= 1`.
    pub fn new(n: usize) -> Result<Self> {
        if n == 0 {
            return Err(Error::InvalidParameter(
                "hard family needs side size n >= 1".into(),
            ));
        }
        let mut edges = Vec::with_capacity(n * (n + 1) / 2);
        let mut round_ends = Vec::with_capacity(n);
        for i in 1..=n {
            for j in 1..=i {
                let u = j - 1;
                let v = n + (i - j + 1) - 1;
                edges.push((u, v));
            }
            round_ends.push(edges.len());
        }
        let instance = EdgeArrivalInstance::new(2 * n, edges)?;
        Ok(Self {
            n,
            instance,
            round_ends,
        })
    }

    /// Side size `n`.
    pub fn n(&self) -> usize {
        self.n
    }

    /// The underlying edge-arrival instance.
    pub fn edge_instance(&self) -> &EdgeArrivalInstance {
        &self.instance
    }

    /// Number of edges revealed once round `k` (1-based) has finished.
    pub fn round_end(&self, k: usize) -> usize {
        self.round_ends[k - 1]
    }

    /// Prefix lengths after each round: `[1, 3, 6, ..., n(n+1)/2]`.
    pub fn round_checkpoints(&self) -> &[usize] {
        &self.round_ends
    }
}

/// Convenience constructor returning the bare edge-arrival instance.
pub fn generate_hard_instance(n: usize) -> Result<EdgeArrivalInstance> {
    Ok(HardFamilyInstance::new(n)?.instance)
}

/// Exact-rational dual solution for the hard-family LP.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct DualCertificate {
    /// Multipliers for the left-side degree constraints, one per `u_j`.
    pub ell: Vec<BigRational>,
    /// Multipliers for the right-side degree constraints, one per `v_j`.
    pub r: Vec<BigRational>,
    /// Multipliers for the per-round competitiveness constraints.
    pub c: Vec<BigRational>,
}

fn ratio(num: i64, den: i64) -> BigRational {
    BigRational::new(BigInt::from(num), BigInt::from(den))
}

/// The canonical dual solution: `c_k = 2/(n(n+1))` for every round, and
/// `ell_j = r_j = (n - 2(j-1))/(n(n+1))` while positive, zero afterwards.
/// Only even `n` is supported; the odd case has no closed form here.
pub fn dual_certificate(n: usize) -> Result<DualCertificate> {
    if n < 2 || n % 2 != 0 {
        return Err(Error::InvalidParameter(format!(
            "dual certificate requires even n >= 2, got {n}"
        )));
    }
    let n_i = n as i64;
    let den = n_i * (n_i + 1);
    let c = vec![ratio(2, den); n];
    let side: Vec<BigRational> = (1..=n_i)
        .map(|j| {
            if j <= n_i / 2 + 1 {
                ratio(n_i - 2 * (j - 1), den)
            } else {
                BigRational::zero()
            }
        })
        .collect();
    Ok(DualCertificate {
        ell: side.clone(),
        r: side,
        c,
    })
}

/// The closed-form certificate value `1/2 + 1/(2n+2)`.
pub fn certificate_value_bound(n: usize) -> BigRational {
    ratio(1, 2) + ratio(1, 2 * n as i64 + 2)
}

/// Outcome of checking a dual solution against the LP's constraints.
#[derive(Debug, Clone)]
pub struct CertificateReport {
    /// True when every dual constraint holds.
    pub feasible: bool,
    /// Dual objective `sum_j (ell_j + r_j)`.
    pub value: BigRational,
    /// Exact `sum_k k*c_k`; feasibility needs this to be at least 1.
    pub round_mass: BigRational,
    /// Human-readable descriptions of each violated constraint.
    pub violations: Vec<String>,
}

/// Checks a dual solution in exact arithmetic: nonnegativity,
/// `sum_k k*c_k >= 1`, and `ell_j + r_{i-j+1} >= sum_{k>=i} c_k` for all
/// `i` and `j <= i`. Returns the report; errors only on dimension mismatch.
pub fn verify_certificate(cert: &DualCertificate, n: usize) -> Result<CertificateReport> {
    if cert.ell.len() != n || cert.r.len() != n || cert.c.len() != n {
        return Err(Error::InvalidParameter(format!(
            "certificate dimensions ({}, {}, {}) do not match n={n}",
            cert.ell.len(),
            cert.r.len(),
            cert.c.len()
        )));
    }
    let mut violations = Vec::new();
    for (name, vals) in [("ell", &cert.ell), ("r", &cert.r), ("c", &cert.c)] {
        for (j, val) in vals.iter().enumerate() {
            if val < &BigRational::zero() {
                violations.push(format!("{name}_{} = {val} is negative", j + 1));
            }
        }
    }
    let round_mass: BigRational = cert
        .c
        .iter()
        .enumerate()
        .map(|(k, ck)| BigRational::from(BigInt::from(k as i64 + 1)) * ck)
        .sum();
    if round_mass < BigRational::one() {
        violations.push(format!("sum_k k*c_k = {round_mass} is below 1"));
    }
    // Suffix sums of c: tail[i] = sum_{k=i}^{n} c_k with 1-based i.
    let mut tail = vec![BigRational::zero(); n + 2];
    for i in (1..=n).rev() {
        tail[i] = tail[i + 1].clone() + cert.c[i - 1].clone();
    }
    for i in 1..=n {
        for j in 1..=i {
            let lhs = cert.ell[j - 1].clone() + cert.r[i - j].clone();
            if lhs < tail[i] {
                violations.push(format!(
                    "ell_{j} + r_{} = {lhs} is below sum_{{k>={i}}} c_k = {}",
                    i - j + 1,
                    tail[i]
                ));
            }
        }
    }
    let value: BigRational = cert
        .ell
        .iter()
        .cloned()
        .sum::<BigRational>()
        + cert.r.iter().cloned().sum::<BigRational>();
    Ok(CertificateReport {
        feasible: violations.is_empty(),
        value,
        round_mass,
        violations,
    })
}

/// Serializes the hard-family LP in the `lp-matching v1` text format.
///
/// One line per constraint: `row <type> <coeff>,<var> ... <=|>= <rhs>`,
/// with variables `x_i_j` (round `i`, left index `j`) and `alpha`. Rows
/// appear as all left degree constraints, all right degree constraints,
/// then competitiveness rounds ascending; every variable is implicitly
/// nonnegative.
pub fn export_lp(n: usize) -> String {
    let mut out = String::new();
    let _ = writeln!(out, "lp-matching v1 n={n}");
    out.push_str("max alpha\n");
    for j in 1..=n {
        out.push_str("row left");
        for i in j..=n {
            let _ = write!(out, " 1,x_{i}_{j}");
        }
        out.push_str(" <= 1\n");
    }
    for j in 1..=n {
        out.push_str("row right");
        for i in j..=n {
            let _ = write!(out, " 1,x_{i}_{}", i - j + 1);
        }
        out.push_str(" <= 1\n");
    }
    for k in 1..=n {
        out.push_str("row comp");
        for i in 1..=k {
            for j in 1..=i {
                let _ = write!(out, " 1,x_{i}_{j}");
            }
        }
        let _ = writeln!(out, " -{k},alpha >= 0");
    }
    out
}

/// Bundled online fractional edge-arrival baselines.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum EdgeBaseline {
    /// Assigns each edge the full remaining residual `min(1-load_u, 1-load_v)`.
    MaximalGreedy,
    /// Assigns half the remaining residual, hedging against later rounds.
    WaterFilling,
}

impl EdgeBaseline {
    fn assign(&self, residual_u: f64, residual_v: f64) -> f64 {
        let room = residual_u.min(residual_v);
        match self {
            EdgeBaseline::MaximalGreedy => room,
            EdgeBaseline::WaterFilling => room / 2.0,
        }
    }
}

/// One checkpoint of a prefix-competitiveness trace.
#[derive(Debug, Clone)]
pub struct PrefixRow {
    /// 1-based checkpoint index (the round number on the hard family).
    pub round: usize,
    /// Number of edges revealed at this checkpoint.
    pub edges_seen: usize,
    /// Fractional value accumulated so far.
    pub value: f64,
    /// Maximum matching size of the revealed prefix.
    pub opt: usize,
    /// `value / opt`; infinite when the prefix has no edges.
    pub ratio: f64,
}

/// Full prefix-competitiveness trace of one algorithm run.
#[derive(Debug, Clone)]
pub struct PrefixTrace {
    /// Per-checkpoint rows in checkpoint order.
    pub rows: Vec<PrefixRow>,
    /// Worst `value/opt` over all checkpoints.
    pub min_ratio: f64,
    /// Final per-edge assignment in arrival order.
    pub assignment: Vec<f64>,
}

const LOAD_TOL: f64 = 1e-12;

/// Runs an arbitrary online assigner over the arrival order and measures
/// `value/opt` at each checkpoint (a strictly increasing list of prefix
/// lengths). The assigner sees `(edge_index, u, v, residual_u, residual_v)`
/// and must return the value for that edge; any assignment leaving the
/// fractional matching polytope is rejected.
pub fn prefix_competitive_ratio_with<F>(
    inst: &EdgeArrivalInstance,
    checkpoints: &[usize],
    mut assign: F,
) -> Result<PrefixTrace>
where
    F: FnMut(usize, VertexId, VertexId, f64, f64) -> f64,
{
    if checkpoints.is_empty() {
        return Err(Error::InvalidParameter("no checkpoints given".into()));
    }
    for w in checkpoints.windows(2) {
        if w[0] >= w[1] {
            return Err(Error::InvalidParameter(
                "checkpoints must be strictly increasing".into(),
            ));
        }
    }
    if *checkpoints.last().expect("nonempty") > inst.edges().len() {
        return Err(Error::InvalidParameter(
            "checkpoint beyond the last edge".into(),
        ));
    }
    let mut loads = vec![0.0f64; inst.n()];
    let mut assignment = Vec::with_capacity(inst.edges().len());
    let mut value = 0.0f64;
    let mut rows = Vec::with_capacity(checkpoints.len());
    let mut next_checkpoint = 0;
    for (idx, &(u, v)) in inst.edges().iter().enumerate() {
        let x = assign(idx, u, v, 1.0 - loads[u], 1.0 - loads[v]);
        if x < -LOAD_TOL {
            return Err(Error::InvalidInstance(format!(
                "edge {idx} assigned negative value {x}"
            )));
        }
        loads[u] += x;
        loads[v] += x;
        if loads[u] > 1.0 + LOAD_TOL || loads[v] > 1.0 + LOAD_TOL {
            return Err(Error::InvalidInstance(format!(
                "edge {idx} overloads a vertex (loads {}, {})",
                loads[u], loads[v]
            )));
        }
        assignment.push(x);
        value += x;
        while next_checkpoint < checkpoints.len() && checkpoints[next_checkpoint] == idx + 1 {
            let opt = maximum_matching(&inst.prefix_graph(idx + 1)).size();
            let ratio = if opt > 0 {
                value / opt as f64
            } else {
                f64::INFINITY
            };
            rows.push(PrefixRow {
                round: next_checkpoint + 1,
                edges_seen: idx + 1,
                value,
                opt,
                ratio,
            });
            next_checkpoint += 1;
        }
    }
    let min_ratio = rows.iter().map(|r| r.ratio).fold(f64::INFINITY, f64::min);
    Ok(PrefixTrace {
        rows,
        min_ratio,
        assignment,
    })
}

/// [`prefix_competitive_ratio_with`] specialized to a bundled baseline.
pub fn prefix_competitive_ratio(
    inst: &EdgeArrivalInstance,
    checkpoints: &[usize],
    baseline: EdgeBaseline,
) -> Result<PrefixTrace> {
    prefix_competitive_ratio_with(inst, checkpoints, |_, _, _, ru, rv| {
        baseline.assign(ru, rv)
    })
}

/// Runs a baseline over the full hard family, checkpointing at round ends.
pub fn run_hard_baseline(n: usize, baseline: EdgeBaseline) -> Result<PrefixTrace> {
    let hard = HardFamilyInstance::new(n)?;
    prefix_competitive_ratio(hard.edge_instance(), hard.round_checkpoints(), baseline)
}

#[cfg(test)]
mod tests {
    use super::*;
    use num_traits::ToPrimitive;

    fn rat(num: i64, den: i64) -> BigRational {
        ratio(num, den)
    }

    #[test]
    fn smallest_instances_match_hand_expansion() {
        let g1 = HardFamilyInstance::new(1).expect("n=1");
        assert_eq!(g1.edge_instance().edges(), &[(0, 1)]);
        let g2 = HardFamilyInstance::new(2).expect("n=2");
        assert_eq!(g2.edge_instance().edges(), &[(0, 2), (0, 3), (1, 2)]);
        assert_eq!(g2.round_checkpoints(), &[1, 3]);
        assert!(HardFamilyInstance::new(0).is_err());
    }

    #[test]
    fn round_structure_counts_hold_for_n_five() {
        let g5 = HardFamilyInstance::new(5).expect("n=5");
        assert_eq!(g5.edge_instance().edges().len(), 15);
        let mut prev = 0;
        for i in 1..=5 {
            assert_eq!(g5.round_end(i) - prev, i);
            prev = g5.round_end(i);
        }
        for (idx, &(u, v)) in g5.edge_instance().edges().iter().enumerate() {
            assert!(u < 5 && (5..10).contains(&v), "edge {idx} not bipartite");
        }
    }

    #[test]
    fn prefix_maximum_matching_equals_round_index() {
        for n in 1..=8 {
            let hard = HardFamilyInstance::new(n).expect("build");
            for k in 1..=n {
                let g = hard.edge_instance().prefix_graph(hard.round_end(k));
                assert_eq!(
                    maximum_matching(&g).size(),
                    k,
                    "n={n} round {k} prefix matching"
                );
            }
        }
    }

    #[test]
    fn certificate_closed_forms_for_small_n() {
        let c2 = dual_certificate(2).expect("n=2");
        assert_eq!(c2.c, vec![rat(1, 3), rat(1, 3)]);
        assert_eq!(c2.ell, vec![rat(1, 3), rat(0, 1)]);
        assert_eq!(c2.r, c2.ell);

        let c4 = dual_certificate(4).expect("n=4");
        assert_eq!(c4.c, vec![rat(1, 10); 4]);
        assert_eq!(
            c4.ell,
            vec![rat(1, 5), rat(1, 10), rat(0, 1), rat(0, 1)]
        );
    }

    #[test]
    fn certificate_rejects_odd_or_tiny_n() {
        assert!(dual_certificate(0).is_err());
        assert!(dual_certificate(1).is_err());
        assert!(dual_certificate(3).is_err());
        assert!(dual_certificate(7).is_err());
    }

    #[test]
    fn canonical_certificates_verify_with_exact_value() {
        let mut prev_value: Option<BigRational> = None;
        for n in (2..=50).step_by(2) {
            let cert = dual_certificate(n).expect("build");
            let report = verify_certificate(&cert, n).expect("verify");
            assert!(report.feasible, "n={n}: {:?}", report.violations);
            assert_eq!(report.value, certificate_value_bound(n), "value at n={n}");
            assert_eq!(report.round_mass, BigRational::one(), "tight at n={n}");
            if let Some(prev) = prev_value {
                assert!(report.value < prev, "value not decreasing at n={n}");
            }
            assert!(report.value > rat(1, 2), "value not above 1/2 at n={n}");
            prev_value = Some(report.value);
        }
    }

    #[test]
    fn perturbed_certificate_is_reported_infeasible() {
        let mut cert = dual_certificate(4).expect("build");
        cert.c[0] = BigRational::zero();
        let report = verify_certificate(&cert, 4).expect("verify");
        assert!(!report.feasible);
        assert!(
            report.violations.iter().any(|v| v.contains("k*c_k")),
            "round-mass violation missing: {:?}",
            report.violations
        );
    }

    #[test]
    fn verify_rejects_dimension_mismatch() {
        let cert = dual_certificate(4).expect("build");
        assert!(verify_certificate(&cert, 6).is_err());
    }

    #[test]
    fn lp_export_matches_frozen_n2_text() {
        let expected = "lp-matching v1 n=2\n\
                        max alpha\n\
                        row left 1,x_1_1 1,x_2_1 <= 1\n\
                        row left 1,x_2_2 <= 1\n\
                        row right 1,x_1_1 1,x_2_2 <= 1\n\
                        row right 1,x_2_1 <= 1\n\
                        row comp 1,x_1_1 -1,alpha >= 0\n\
                        row comp 1,x_1_1 1,x_2_1 1,x_2_2 -2,alpha >= 0\n";
        assert_eq!(export_lp(2), expected);
    }

    #[test]
    fn greedy_on_g2_saturates_round_one() {
        let trace = run_hard_baseline(2, EdgeBaseline::MaximalGreedy).expect("run");
        assert_eq!(trace.assignment, vec![1.0, 0.0, 0.0]);
        let values: Vec<f64> = trace.rows.iter().map(|r| r.value).collect();
        assert_eq!(values, vec![1.0, 1.0]);
        assert_eq!(trace.min_ratio, 0.5);
    }

    #[test]
    fn water_filling_on_g2_hedges_evenly() {
        let trace = run_hard_baseline(2, EdgeBaseline::WaterFilling).expect("run");
        assert_eq!(trace.assignment, vec![0.5, 0.25, 0.25]);
        assert_eq!(trace.min_ratio, 0.5);
    }

    #[test]
    fn water_filling_on_g4_stays_below_certificate_value() {
        let trace = run_hard_baseline(4, EdgeBaseline::WaterFilling).expect("run");
        let bound = certificate_value_bound(4).to_f64().expect("finite");
        assert!(
            trace.min_ratio <= bound + 1e-12,
            "ratio {} above bound {bound}",
            trace.min_ratio
        );
    }

    #[test]
    fn baselines_respect_certificate_bound_on_hard_family() {
        for n in 2..=12 {
            let bound = 0.5 + 1.0 / (2.0 * n as f64 + 2.0);
            for baseline in [EdgeBaseline::MaximalGreedy, EdgeBaseline::WaterFilling] {
                let trace = run_hard_baseline(n, baseline).expect("run");
                assert!(
                    trace.min_ratio <= bound + 1e-12,
                    "n={n} {baseline:?} ratio {} above {bound}",
                    trace.min_ratio
                );
                for row in &trace.rows {
                    assert_eq!(row.opt, row.round, "hard-family prefix opt");
                }
            }
        }
    }

    #[test]
    fn infeasible_assigner_is_rejected() {
        let hard = HardFamilyInstance::new(2).expect("build");
        let overload = prefix_competitive_ratio_with(
            hard.edge_instance(),
            hard.round_checkpoints(),
            |_, _, _, _, _| 0.9,
        );
        assert!(matches!(overload, Err(Error::InvalidInstance(_))));
        let negative = prefix_competitive_ratio_with(
            hard.edge_instance(),
            hard.round_checkpoints(),
            |_, _, _, _, _| -0.1,
        );
        assert!(matches!(negative, Err(Error::InvalidInstance(_))));
    }

    #[test]
    fn checkpoint_validation_catches_bad_lists() {
        let hard = HardFamilyInstance::new(2).expect("build");
        let inst = hard.edge_instance();
        assert!(prefix_competitive_ratio(inst, &[], EdgeBaseline::MaximalGreedy).is_err());
        assert!(prefix_competitive_ratio(inst, &[2, 2], EdgeBaseline::MaximalGreedy).is_err());
        assert!(prefix_competitive_ratio(inst, &[4], EdgeBaseline::MaximalGreedy).is_err());
    }
}
