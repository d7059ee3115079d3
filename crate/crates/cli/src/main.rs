//! Command-line harness: instance generation, experiment runs, hardness
//! certificates, and selection diagnostics. Data goes to stdout or
//! `--out`; runtime notes go to stderr so piped output stays clean.

use std::io::{self, Write};
use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use match_arena_core::diagnostics::{
    classification_summary, diagnostics_csv, estimate_long_path_prob, tail_bound_report,
    GoodVertexParams,
};
use match_arena_core::fractional::{beta_star, run_fractional, AllocatorParams};
use match_arena_core::graph::Instance;
use match_arena_core::hardness::{
    dual_certificate, export_lp, run_hard_baseline, verify_certificate, EdgeBaseline,
};
use match_arena_core::harness::{
    console_summary, generate_family, results_csv, run_trials_with_threads, Algorithm,
    ExperimentSpec, Family,
};
use match_arena_core::rounding::{EngineKind, RoundingConfig, DEFAULT_PARTICLES};
use match_arena_core::{Error, Result};

#[derive(Parser)]
#[command(
    name = "match-arena",
    about = "Online matching under general arrivals: experiments and certificates"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Emit an instance file for a family.
    Gen(GenArgs),
    /// Run an experiment and emit result rows as CSV.
    Run(RunArgs),
    /// Verify the hard-family dual certificate and export its LP.
    Hardness(HardnessArgs),
    /// Sample primary-path and tail diagnostics for an instance.
    Diagnose(DiagnoseArgs),
}

#[derive(Args)]
struct FamilyArgs {
    /// Family: hard-gn, random-bipartite, random-general, path,
    /// three-edge-path, triangle.
    #[arg(long)]
    family: String,
    /// Size parameter: side size for hard-gn, vertex count for random
    /// families, edge count for path.
    #[arg(long, default_value_t = 8)]
    n: usize,
    /// Edge probability for the random families.
    #[arg(long, default_value_t = 0.5)]
    p: f64,
}

impl FamilyArgs {
    fn parse(&self) -> Result<Family> {
        match self.family.as_str() {
            "hard-gn" => Ok(Family::HardGn { n: self.n }),
            "random-bipartite" => Ok(Family::RandomBipartite { n: self.n, p: self.p }),
            "random-general" => Ok(Family::RandomGeneral { n: self.n, p: self.p }),
            "path" => Ok(Family::Path { k: self.n }),
            "three-edge-path" => Ok(Family::ThreeEdgePathInternalFirst),
            "triangle" => Ok(Family::Triangle),
            other => Err(Error::InvalidParameter(format!("unknown family {other}"))),
        }
    }
}

#[derive(Args)]
struct GenArgs {
    #[command(flatten)]
    family: FamilyArgs,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Output path; stdout when omitted.
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct RunArgs {
    #[command(flatten)]
    family: FamilyArgs,
    /// Algorithm: greedy, warmup, improved, fractional, edge-greedy,
    /// edge-waterfill.
    #[arg(long)]
    alg: String,
    #[arg(long, default_value_t = 0.05)]
    epsilon: f64,
    /// Probability engine for improved rounding: exact or particle.
    #[arg(long, default_value = "exact")]
    engine: String,
    #[arg(long, default_value_t = DEFAULT_PARTICLES)]
    particles: usize,
    /// Allocator kappa for --alg fractional.
    #[arg(long, default_value_t = 1.1997)]
    kappa: f64,
    /// Allocator beta for --alg fractional; beta*(kappa) when omitted.
    #[arg(long)]
    beta: Option<f64>,
    #[arg(long, default_value_t = 10)]
    trials: usize,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Output path; stdout when omitted.
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct HardnessArgs {
    /// Side size; the certificate needs it even.
    #[arg(long)]
    n: usize,
    /// Path for the LP export; appended to stdout when omitted.
    #[arg(long)]
    lp_out: Option<PathBuf>,
}

#[derive(Args)]
struct DiagnoseArgs {
    #[command(flatten)]
    family: FamilyArgs,
    #[arg(long, default_value_t = 0.05)]
    epsilon: f64,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Path-length threshold for the good/bad classifier.
    #[arg(long = "threshold-L", default_value_t = 5)]
    threshold_l: usize,
    /// Probability threshold for the good/bad classifier.
    #[arg(long, default_value_t = 0.05)]
    delta: f64,
    #[arg(long, default_value_t = 2000)]
    samples: usize,
    /// Blocking-mass grid for the tail report.
    #[arg(long, value_delimiter = ',', default_values_t = vec![1.0, 2.0, 4.0])]
    k: Vec<f64>,
    /// Output path; stdout when omitted.
    #[arg(long)]
    out: Option<PathBuf>,
}

/// Writes data to stdout. A closed reading end (head, grep -q, ...) is
/// normal for a data producer: exit cleanly instead of erroring.
fn write_stdout(data: &str) -> Result<()> {
    let mut out = io::stdout().lock();
    match out.write_all(data.as_bytes()).and_then(|()| out.flush()) {
        Err(err) if err.kind() == io::ErrorKind::BrokenPipe => std::process::exit(0),
        other => Ok(other?),
    }
}

fn emit(out: &Option<PathBuf>, data: &str) -> Result<()> {
    match out {
        Some(path) => std::fs::write(path, data)?,
        None => write_stdout(data)?,
    }
    Ok(())
}

fn cmd_gen(args: &GenArgs) -> Result<()> {
    let text = match generate_family(args.family.parse()?, args.seed)? {
        Instance::Vertex(inst) => inst.to_text(),
        Instance::Edge(inst) => inst.to_text(),
    };
    emit(&args.out, &text)
}

fn cmd_run(args: &RunArgs) -> Result<()> {
    let engine = match args.engine.as_str() {
        "exact" => EngineKind::Exact,
        "particle" => EngineKind::Particle,
        other => {
            return Err(Error::InvalidParameter(format!("unknown engine {other}")));
        }
    };
    let algorithm = match args.alg.as_str() {
        "greedy" => Algorithm::GreedyIntegral,
        "warmup" => Algorithm::WarmupRounding,
        "improved" => Algorithm::ImprovedRounding {
            epsilon: args.epsilon,
            engine,
            particles: args.particles,
        },
        "fractional" => Algorithm::FractionalAllocator {
            kappa: args.kappa,
            beta: args.beta.unwrap_or_else(|| beta_star(args.kappa)),
        },
        "edge-greedy" => Algorithm::FractionalEdgeBaseline(EdgeBaseline::MaximalGreedy),
        "edge-waterfill" => Algorithm::FractionalEdgeBaseline(EdgeBaseline::WaterFilling),
        other => {
            return Err(Error::InvalidParameter(format!("unknown algorithm {other}")));
        }
    };
    let spec = ExperimentSpec {
        family: args.family.parse()?,
        algorithm,
        trials: args.trials,
        seed: args.seed,
    };
    let (rows, summary) = run_trials_with_threads(&spec, None)?;
    emit(&args.out, &results_csv(&rows))?;
    eprintln!("{}", console_summary(&rows, &summary));
    Ok(())
}

fn cmd_hardness(args: &HardnessArgs) -> Result<()> {
    let cert = dual_certificate(args.n)?;
    let report = verify_certificate(&cert, args.n)?;
    // The LP file must exist even if the stdout consumer goes away, so
    // write it before any stdout output.
    let lp = export_lp(args.n);
    if let Some(path) = &args.lp_out {
        std::fs::write(path, &lp)?;
        eprintln!("wrote LP to {}", path.display());
    }
    let mut text = String::new();
    text.push_str(&format!("n = {}\n", args.n));
    text.push_str(&format!("feasible = {}\n", report.feasible));
    text.push_str(&format!("value = {}\n", report.value));
    text.push_str(&format!("round_mass = {}\n", report.round_mass));
    for violation in &report.violations {
        text.push_str(&format!("violation: {violation}\n"));
    }
    for baseline in [EdgeBaseline::MaximalGreedy, EdgeBaseline::WaterFilling] {
        let trace = run_hard_baseline(args.n, baseline)?;
        text.push_str(&format!(
            "baseline {baseline:?}: min ratio = {}\n",
            trace.min_ratio
        ));
    }
    if args.lp_out.is_none() {
        text.push_str(&lp);
    }
    write_stdout(&text)
}

fn cmd_diagnose(args: &DiagnoseArgs) -> Result<()> {
    let Instance::Vertex(inst) = generate_family(args.family.parse()?, args.seed)? else {
        return Err(Error::InvalidParameter(
            "diagnostics need a vertex-arrival family".into(),
        ));
    };
    let cfg = RoundingConfig::exact(AllocatorParams::improved(args.epsilon)?, args.seed);
    let params = GoodVertexParams {
        length_threshold: args.threshold_l,
        prob_threshold: args.delta,
        samples: args.samples,
    };
    let rows = estimate_long_path_prob(&inst, &cfg, &params)?;
    let tail = tail_bound_report(&inst, &cfg, &args.k, args.samples)?;
    emit(&args.out, &diagnostics_csv(&rows, &tail))?;
    let frac = run_fractional(&inst, cfg.params);
    let summary = classification_summary(&rows, frac.primal_value);
    eprintln!(
        "{} of {} vertices bad (fraction {:.4}), fractional value {:.6}",
        summary.bad_vertices,
        rows.len(),
        summary.bad_fraction,
        summary.fractional_value
    );
    Ok(())
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let result = match &cli.command {
        Command::Gen(args) => cmd_gen(args),
        Command::Run(args) => cmd_run(args),
        Command::Hardness(args) => cmd_hardness(args),
        Command::Diagnose(args) => cmd_diagnose(args),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(err) => {
            eprintln!("error: {err}");
            ExitCode::from(2)
        }
    }
}
