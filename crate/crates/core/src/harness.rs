//! Experiment orchestration: instance families, online algorithms,
//! seeded trial loops, and reproducible result emission.
//!
//! Determinism contract: a spec plus base seed fixes every byte of the
//! result CSV. Trial `t` derives its seed from the base via a splitmix
//! stream, instance generation and algorithm randomness use separate
//! substreams of that, and parallel execution restores trial order
//! before emission, so thread counts never change output.

use std::time::{Duration, Instant};

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha12Rng;

use crate::fractional::{run_fractional, AllocatorParams};
use crate::graph::{
    check_fractional_feasibility, maximum_matching, ArrivalInstance, EdgeArrivalInstance,
    Instance, Matching,
};
use crate::hardness::{prefix_competitive_ratio, EdgeBaseline, HardFamilyInstance};
use crate::rounding::{run_improved, run_warmup, EngineKind, RoundingConfig};
use crate::util::{fmt_sig12, splitmix64_stream};
use crate::{Error, Result};

/// Environment variable capping harness parallelism.
pub const THREADS_ENV: &str = "MATCH_ARENA_THREADS";

/// Instance families the harness can generate.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Family {
    /// The hard edge-arrival family with side size `n`.
    HardGn { n: usize },
    /// Bipartite graph on `n` vertices (halves as even as possible),
    /// each cross pair an edge with probability `p`, arrival order a
    /// seeded permutation.
    RandomBipartite { n: usize, p: f64 },
    /// Every pair an edge with probability `p`, arrival order by id.
    RandomGeneral { n: usize, p: f64 },
    /// Path with `k` edges, vertices arriving along the path.
    Path { k: usize },
    /// Path on three edges with the two internal vertices arriving first.
    ThreeEdgePathInternalFirst,
    Triangle,
}

impl Family {
    /// Stable identifier used in result rows.
    pub fn id(&self) -> String {
        match self {
            Family::HardGn { n } => format!("hard-gn-{n}"),
            Family::RandomBipartite { n, p } => format!("random-bipartite-{n}-{p}"),
            Family::RandomGeneral { n, p } => format!("random-general-{n}-{p}"),
            Family::Path { k } => format!("path-{k}"),
            Family::ThreeEdgePathInternalFirst => "three-edge-path".into(),
            Family::Triangle => "triangle".into(),
        }
    }

    fn validate(&self) -> Result<()> {
        match *self {
            Family::HardGn { n } if n == 0 => {
                Err(Error::InvalidParameter("hard family needs n >= 1".into()))
            }
            Family::RandomBipartite { n, p } | Family::RandomGeneral { n, p } => {
                if n == 0 {
                    Err(Error::InvalidParameter("empty random instance".into()))
                } else if !(0.0..=1.0).contains(&p) {
                    Err(Error::InvalidParameter(format!(
                        "edge probability {p} outside [0, 1]"
                    )))
                } else {
                    Ok(())
                }
            }
            Family::Path { k } if k == 0 => {
                Err(Error::InvalidParameter("path needs at least one edge".into()))
            }
            _ => Ok(()),
        }
    }
}

/// Algorithms the harness can run.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Algorithm {
    /// Match each arrival to its first free earlier neighbor.
    GreedyIntegral,
    /// Single-sample lossless rounding.
    WarmupRounding,
    /// Two-sample rounding at the given `epsilon` and engine.
    ImprovedRounding {
        epsilon: f64,
        engine: EngineKind,
        particles: usize,
    },
    /// The fractional allocator itself; value is the allocation size.
    FractionalAllocator { kappa: f64, beta: f64 },
    /// A bundled fractional edge-arrival baseline.
    FractionalEdgeBaseline(EdgeBaseline),
}

impl Algorithm {
    /// Whether the algorithm consumes edge arrivals (vs vertex arrivals).
    pub fn wants_edge_arrivals(&self) -> bool {
        matches!(self, Algorithm::FractionalEdgeBaseline(_))
    }
}

/// One full experiment description.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ExperimentSpec {
    pub family: Family,
    pub algorithm: Algorithm,
    pub trials: usize,
    pub seed: u64,
}

/// One trial's outcome. `runtime` is informational and never serialized
/// into the byte-stable CSV.
#[derive(Debug, Clone)]
pub struct ResultRow {
    pub instance: String,
    pub trial: usize,
    /// Matched size or fractional value.
    pub value: f64,
    /// Maximum matching size of the full instance.
    pub opt: usize,
    /// `value / opt`; defined as 1 when the instance has no matching.
    pub ratio: f64,
    pub runtime: Duration,
}

/// Mean ratio and its standard error over a run's trials.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TrialSummary {
    pub trials: usize,
    pub mean_ratio: f64,
    pub std_error: f64,
}

/// Generates the family's instance for one seed.
pub fn generate_family(family: Family, seed: u64) -> Result<Instance> {
    family.validate()?;
    match family {
        Family::HardGn { n } => Ok(Instance::Edge(
            HardFamilyInstance::new(n)?.edge_instance().clone(),
        )),
        Family::RandomBipartite { n, p } => {
            let mut rng = ChaCha12Rng::seed_from_u64(seed);
            let left = n / 2;
            // Arrival position of each vertex: a seeded permutation.
            let mut order: Vec<usize> = (0..n).collect();
            order.shuffle(&mut rng);
            let mut edges = Vec::new();
            for a in 0..left {
                for b in left..n {
                    if rng.gen_bool(p) {
                        edges.push((order[a], order[b]));
                    }
                }
            }
            Ok(Instance::Vertex(ArrivalInstance::from_edges(n, &edges)?))
        }
        Family::RandomGeneral { n, p } => {
            let mut rng = ChaCha12Rng::seed_from_u64(seed);
            let mut nbrs = Vec::with_capacity(n);
            for v in 0..n {
                nbrs.push((0..v).filter(|_| rng.gen_bool(p)).collect());
            }
            Ok(Instance::Vertex(ArrivalInstance::new(nbrs)?))
        }
        Family::Path { k } => {
            let nbrs = (0..=k)
                .map(|v| if v == 0 { vec![] } else { vec![v - 1] })
                .collect();
            Ok(Instance::Vertex(ArrivalInstance::new(nbrs)?))
        }
        Family::ThreeEdgePathInternalFirst => Ok(Instance::Vertex(
            ArrivalInstance::new(vec![vec![], vec![0], vec![0], vec![1]])?,
        )),
        Family::Triangle => Ok(Instance::Vertex(ArrivalInstance::new(vec![
            vec![],
            vec![0],
            vec![0, 1],
        ])?)),
    }
}

fn greedy_integral(inst: &ArrivalInstance) -> Matching {
    let mut matching = Matching::empty(inst.n());
    for v in 0..inst.n() {
        if let Some(&u) = inst
            .earlier_neighbors(v)
            .iter()
            .find(|&&u| !matching.is_matched(u))
        {
            matching.add_pair(u, v);
        }
    }
    matching
}

fn run_vertex_algorithm(
    algorithm: Algorithm,
    inst: &ArrivalInstance,
    seed: u64,
) -> Result<f64> {
    match algorithm {
        Algorithm::GreedyIntegral => Ok(greedy_integral(inst).size() as f64),
        Algorithm::WarmupRounding => Ok(run_warmup(inst, seed)?.matching.size() as f64),
        Algorithm::ImprovedRounding {
            epsilon,
            engine,
            particles,
        } => {
            let params = AllocatorParams::improved(epsilon)?;
            let cfg = match engine {
                EngineKind::Exact => RoundingConfig::exact(params, seed),
                EngineKind::Particle => RoundingConfig::particle(params, particles, seed)?,
            };
            Ok(run_improved(inst, &cfg)?.matching.size() as f64)
        }
        Algorithm::FractionalAllocator { kappa, beta } => {
            let params = AllocatorParams::new(kappa, beta, 0.0)?;
            let run = run_fractional(inst, params);
            let report = check_fractional_feasibility(&run.x, inst.n(), 1e-9);
            if !report.feasible {
                return Err(Error::InvalidInstance(
                    "allocator left the fractional matching polytope".into(),
                ));
            }
            Ok(run.primal_value)
        }
        Algorithm::FractionalEdgeBaseline(_) => Err(Error::InvalidParameter(
            "edge baseline cannot run on vertex arrivals".into(),
        )),
    }
}

fn run_edge_algorithm(algorithm: Algorithm, inst: &EdgeArrivalInstance) -> Result<f64> {
    match algorithm {
        Algorithm::FractionalEdgeBaseline(baseline) => {
            let checkpoints = [inst.edges().len()];
            let trace = prefix_competitive_ratio(inst, &checkpoints, baseline)?;
            Ok(trace.rows.last().expect("one checkpoint").value)
        }
        _ => Err(Error::InvalidParameter(
            "vertex algorithm cannot run on edge arrivals".into(),
        )),
    }
}

fn run_one_trial(spec: &ExperimentSpec, trial: usize) -> Result<ResultRow> {
    let trial_seed = splitmix64_stream(spec.seed, trial as u64);
    let instance_seed = splitmix64_stream(trial_seed, 0);
    let algo_seed = splitmix64_stream(trial_seed, 1);
    let start = Instant::now();
    let instance = generate_family(spec.family, instance_seed)?;
    let (value, opt) = match &instance {
        Instance::Vertex(inst) => {
            if spec.algorithm.wants_edge_arrivals() {
                return Err(Error::InvalidParameter(format!(
                    "{} emits vertex arrivals, incompatible with the chosen algorithm",
                    spec.family.id()
                )));
            }
            let value = run_vertex_algorithm(spec.algorithm, inst, algo_seed)?;
            (value, maximum_matching(&inst.to_graph()).size())
        }
        Instance::Edge(inst) => {
            if !spec.algorithm.wants_edge_arrivals() {
                return Err(Error::InvalidParameter(format!(
                    "{} emits edge arrivals, incompatible with the chosen algorithm",
                    spec.family.id()
                )));
            }
            let value = run_edge_algorithm(spec.algorithm, inst)?;
            (value, maximum_matching(&inst.to_graph()).size())
        }
    };
    let ratio = if opt > 0 { value / opt as f64 } else { 1.0 };
    Ok(ResultRow {
        instance: spec.family.id(),
        trial,
        value,
        opt,
        ratio,
        runtime: start.elapsed(),
    })
}

/// Runs the experiment's trials on the current thread pool arrangement:
/// an explicit thread count, else the [`THREADS_ENV`] cap, else one
/// thread per core. Row order is always by trial index.
pub fn run_trials_with_threads(
    spec: &ExperimentSpec,
    threads: Option<usize>,
) -> Result<(Vec<ResultRow>, TrialSummary)> {
    if spec.trials == 0 {
        return Err(Error::InvalidParameter("at least one trial".into()));
    }
    let threads = threads
        .or_else(|| {
            std::env::var(THREADS_ENV)
                .ok()
                .and_then(|s| s.parse().ok())
        })
        .unwrap_or(0);
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(threads)
        .build()
        .map_err(|e| Error::InvalidParameter(format!("thread pool: {e}")))?;
    let rows: Result<Vec<ResultRow>> = pool.install(|| {
        use rayon::prelude::*;
        (0..spec.trials)
            .into_par_iter()
            .map(|t| run_one_trial(spec, t))
            .collect()
    });
    let rows = rows?;
    let summary = summarize(&rows)?;
    Ok((rows, summary))
}

/// [`run_trials_with_threads`] with the default thread arrangement.
pub fn run_trials(spec: &ExperimentSpec) -> Result<(Vec<ResultRow>, TrialSummary)> {
    run_trials_with_threads(spec, None)
}

/// Mean ratio and standard error of a nonempty result set.
pub fn summarize(rows: &[ResultRow]) -> Result<TrialSummary> {
    if rows.is_empty() {
        return Err(Error::InvalidParameter("no rows to summarize".into()));
    }
    let n = rows.len() as f64;
    let mean = rows.iter().map(|r| r.ratio).sum::<f64>() / n;
    let std_error = if rows.len() < 2 {
        0.0
    } else {
        let var = rows
            .iter()
            .map(|r| (r.ratio - mean).powi(2))
            .sum::<f64>()
            / (n - 1.0);
        (var / n).sqrt()
    };
    Ok(TrialSummary {
        trials: rows.len(),
        mean_ratio: mean,
        std_error,
    })
}

/// Byte-stable CSV of result rows; floats carry 12 significant digits
/// and runtimes are deliberately excluded.
pub fn results_csv(rows: &[ResultRow]) -> String {
    let mut out = String::from("instance,trial,value,opt,ratio\n");
    for row in rows {
        out.push_str(&format!(
            "{},{},{},{},{}\n",
            row.instance,
            row.trial,
            fmt_sig12(row.value),
            row.opt,
            fmt_sig12(row.ratio),
        ));
    }
    out
}

/// Console rendering of a run, including total runtime. Not byte-stable.
pub fn console_summary(rows: &[ResultRow], summary: &TrialSummary) -> String {
    let total: Duration = rows.iter().map(|r| r.runtime).sum();
    format!(
        "{} trials on {}: mean ratio {:.6} (std err {:.6}), total runtime {:?}",
        summary.trials,
        rows.first().map(|r| r.instance.as_str()).unwrap_or("?"),
        summary.mean_ratio,
        summary.std_error,
        total
    )
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::fractional::beta_star;
    use crate::rounding::DEFAULT_PARTICLES;

    fn spec(family: Family, algorithm: Algorithm, trials: usize, seed: u64) -> ExperimentSpec {
        ExperimentSpec {
            family,
            algorithm,
            trials,
            seed,
        }
    }

    #[test]
    fn three_edge_path_shape_is_internal_first() {
        let inst = generate_family(Family::ThreeEdgePathInternalFirst, 0).expect("gen");
        let Instance::Vertex(inst) = inst else {
            panic!("expected vertex arrivals");
        };
        assert_eq!(inst.n(), 4);
        assert_eq!(inst.edge_count(), 3);
        assert_eq!(inst.earlier_neighbors(1), &[0]);
        assert_eq!(inst.earlier_neighbors(2), &[0]);
        assert_eq!(inst.earlier_neighbors(3), &[1]);
    }

    #[test]
    fn greedy_on_three_edge_path_is_exactly_half() {
        for seed in [0, 7, 42, 9999] {
            let (rows, summary) = run_trials(&spec(
                Family::ThreeEdgePathInternalFirst,
                Algorithm::GreedyIntegral,
                20,
                seed,
            ))
            .expect("run");
            assert!(rows.iter().all(|r| r.ratio == 0.5), "seed {seed}");
            assert_eq!(summary.mean_ratio, 0.5);
            assert_eq!(summary.std_error, 0.0);
        }
    }

    #[test]
    fn random_bipartite_is_deterministic_and_two_colorable() {
        let family = Family::RandomBipartite { n: 8, p: 0.5 };
        let a = generate_family(family, 7).expect("gen");
        let b = generate_family(family, 7).expect("gen");
        let (Instance::Vertex(a), Instance::Vertex(b)) = (a, b) else {
            panic!("expected vertex arrivals");
        };
        assert_eq!(a.to_text(), b.to_text());
        // Two-color by BFS over the undirected view.
        let g = a.to_graph();
        let mut color = vec![None; g.n()];
        for start in 0..g.n() {
            if color[start].is_some() {
                continue;
            }
            color[start] = Some(false);
            let mut queue = vec![start];
            while let Some(v) = queue.pop() {
                let c = color[v].expect("colored");
                for &u in g.neighbors(v) {
                    match color[u] {
                        None => {
                            color[u] = Some(!c);
                            queue.push(u);
                        }
                        Some(cu) => assert_ne!(cu, c, "odd cycle in bipartite family"),
                    }
                }
            }
        }
    }

    #[test]
    fn identical_specs_rerun_to_identical_csv_bytes() {
        let s = spec(
            Family::RandomGeneral { n: 10, p: 0.4 },
            Algorithm::WarmupRounding,
            12,
            33,
        );
        let (rows_a, _) = run_trials(&s).expect("run");
        let (rows_b, _) = run_trials(&s).expect("run");
        assert_eq!(results_csv(&rows_a), results_csv(&rows_b));
    }

    #[test]
    fn thread_count_never_changes_results() {
        let s = spec(
            Family::RandomBipartite { n: 12, p: 0.5 },
            Algorithm::ImprovedRounding {
                epsilon: 0.05,
                engine: EngineKind::Exact,
                particles: DEFAULT_PARTICLES,
            },
            10,
            5,
        );
        let (rows_one, sum_one) = run_trials_with_threads(&s, Some(1)).expect("run");
        let (rows_four, sum_four) = run_trials_with_threads(&s, Some(4)).expect("run");
        assert_eq!(results_csv(&rows_one), results_csv(&rows_four));
        assert_eq!(sum_one, sum_four);
    }

    #[test]
    fn summary_mean_matches_arithmetic_mean() {
        let s = spec(
            Family::RandomGeneral { n: 9, p: 0.5 },
            Algorithm::GreedyIntegral,
            100,
            11,
        );
        let (rows, summary) = run_trials(&s).expect("run");
        let mean = rows.iter().map(|r| r.ratio).sum::<f64>() / rows.len() as f64;
        assert!((summary.mean_ratio - mean).abs() < 1e-12);
    }

    #[test]
    fn warmup_on_single_edge_matches_half_on_average() {
        let s = spec(Family::Path { k: 1 }, Algorithm::WarmupRounding, 10_000, 77);
        let (rows, summary) = run_trials(&s).expect("run");
        assert!(rows.iter().all(|r| r.value == 0.0 || r.value == 1.0));
        let sigma = (0.5f64 * 0.5 / 10_000.0).sqrt();
        assert!(
            (summary.mean_ratio - 0.5).abs() <= 4.0 * sigma,
            "mean {} too far from 0.5",
            summary.mean_ratio
        );
    }

    #[test]
    fn fractional_allocator_clears_its_guarantee_on_random_suite() {
        let kappa = 1.1997;
        let beta = beta_star(kappa);
        let guarantee = 1.0 / beta;
        assert!(guarantee > 0.526 && guarantee < 0.527);
        let s = spec(
            Family::RandomGeneral { n: 16, p: 0.3 },
            Algorithm::FractionalAllocator { kappa, beta },
            40,
            3,
        );
        let (rows, _) = run_trials(&s).expect("run");
        for row in rows {
            assert!(
                row.opt == 0 || row.ratio >= guarantee - 1e-9,
                "trial {}: ratio {} below {guarantee}",
                row.trial,
                row.ratio
            );
        }
    }

    #[test]
    fn edge_baseline_runs_on_hard_family_only() {
        let hard = spec(
            Family::HardGn { n: 6 },
            Algorithm::FractionalEdgeBaseline(EdgeBaseline::WaterFilling),
            1,
            0,
        );
        let (rows, _) = run_trials(&hard).expect("run");
        assert_eq!(rows[0].opt, 6);
        assert!(rows[0].value <= 6.0);

        let mismatch = spec(
            Family::Triangle,
            Algorithm::FractionalEdgeBaseline(EdgeBaseline::MaximalGreedy),
            1,
            0,
        );
        assert!(run_trials(&mismatch).is_err());
        let mismatch = spec(Family::HardGn { n: 4 }, Algorithm::GreedyIntegral, 1, 0);
        assert!(run_trials(&mismatch).is_err());
    }

    #[test]
    fn csv_golden_row_and_empty_summary_rejection() {
        let (rows, _) = run_trials(&spec(Family::Triangle, Algorithm::GreedyIntegral, 1, 0))
            .expect("run");
        assert_eq!(
            results_csv(&rows),
            "instance,trial,value,opt,ratio\n\
             triangle,0,1.00000000000e0,1,1.00000000000e0\n"
        );
        assert!(summarize(&[]).is_err());
        assert!(run_trials(&spec(Family::Triangle, Algorithm::GreedyIntegral, 0, 0)).is_err());
    }

    #[test]
    fn family_validation_rejects_degenerate_parameters() {
        assert!(generate_family(Family::HardGn { n: 0 }, 0).is_err());
        assert!(generate_family(Family::Path { k: 0 }, 0).is_err());
        assert!(generate_family(Family::RandomBipartite { n: 4, p: 1.5 }, 0).is_err());
        assert!(generate_family(Family::RandomGeneral { n: 0, p: 0.5 }, 0).is_err());
    }

    #[test]
    fn console_summary_mentions_instance_and_trials() {
        let (rows, summary) =
            run_trials(&spec(Family::Triangle, Algorithm::GreedyIntegral, 3, 1)).expect("run");
        let text = console_summary(&rows, &summary);
        assert!(text.contains("triangle"));
        assert!(text.contains("3 trials"));
    }
}
