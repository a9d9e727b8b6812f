use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::time::Duration;

use clap::{Args, Parser, Subcommand, ValueEnum};

use hyc_core::bench::{render_table, run_suite, BenchSettings};
use hyc_core::modelfile::{load_model, ModelFile};
use hyc_core::ode::Integrator;
use hyc_core::report::ReportFile;
use hyc_core::sampler::sample_trace;
use hyc_core::simulate::{mode_sequence_histogram, transition_histogram, write_header, write_trace_rows};
use hyc_core::strategy::{run_concolic, Clock, LengthMetric, RunConfig, StrategyMode, Verdict};

const EXIT_PASS: u8 = 0;
const EXIT_ERROR: u8 = 1;
const EXIT_COUNTEREXAMPLE: u8 = 2;
const EXIT_INCONCLUSIVE: u8 = 3;

#[derive(Parser)]
#[command(name = "hyc", version, about = "Falsification of hybrid automata by concolic sampling")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Search a model for a trace that reaches a negative mode.
    Check(CheckArgs),
    /// Write sampled traces as CSV, one row per integration grid point.
    Simulate(SimulateArgs),
    /// Run a bundled benchmark suite under every strategy.
    Bench(BenchArgs),
}

#[derive(Args)]
struct SamplingArgs {
    /// Run seed.
    #[arg(long, env = "HYC_SEED", default_value_t = 0)]
    seed: u64,
    /// Unit steps per trace; defaults to the model's `steps`, else 5.
    #[arg(long)]
    steps: Option<usize>,
    /// Uniform time points per unit step used to estimate guard windows.
    #[arg(long, default_value_t = 64)]
    points: usize,
    /// RK4 step size; must divide the unit interval.
    #[arg(long, default_value_t = 1e-3)]
    ode_step: f64,
}

#[derive(Clone, Copy, ValueEnum)]
enum MetricArg {
    Steps,
    NodeCount,
}

#[derive(Clone, Copy, ValueEnum)]
enum ClockArg {
    Nominal,
    Wall,
}

#[derive(Args)]
struct CheckArgs {
    model: PathBuf,
    #[command(flatten)]
    sampling: SamplingArgs,
    /// random, local, global or dynamic.
    #[arg(long, default_value = "local")]
    strategy: StrategyMode,
    /// Wall-clock limit in seconds.
    #[arg(long, default_value_t = 60.0)]
    timeout: f64,
    /// Random traces per decision.
    #[arg(long, default_value_t = 16)]
    batch: usize,
    /// Total trace budget.
    #[arg(long, default_value_t = 2000)]
    samples: u64,
    /// Error-probability tolerance for the confidence report.
    #[arg(long, default_value_t = 0.01)]
    delta: f64,
    #[arg(long, default_value_t = 0.99)]
    confidence_target: f64,
    /// Robustness margin separating infeasible from unknown.
    #[arg(long, default_value_t = 1e-3)]
    solver_precision: f64,
    /// Seconds per solver query.
    #[arg(long, default_value_t = 10.0)]
    solver_budget: f64,
    /// Evaluations per solver query.
    #[arg(long, default_value_t = 5_000)]
    solver_evaluations: u64,
    /// Longest path condition handed to the solver.
    #[arg(long, default_value_t = 4)]
    max_path: usize,
    /// Meaning of the query length in the solver cost curve.
    #[arg(long, value_enum, default_value = "steps")]
    length_metric: MetricArg,
    /// How the cost of a random trace is measured.
    #[arg(long, value_enum, default_value = "nominal")]
    clock: ClockArg,
    /// Worker threads for random batches.
    #[arg(long)]
    jobs: Option<usize>,
    /// Report path; standard output if absent.
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct SimulateArgs {
    model: PathBuf,
    #[command(flatten)]
    sampling: SamplingArgs,
    /// Number of traces.
    #[arg(long, default_value_t = 1)]
    traces: u64,
    /// CSV path; standard output if absent.
    #[arg(long)]
    out: Option<PathBuf>,
    /// Print transition and mode-sequence counts to standard error.
    #[arg(long)]
    histogram: bool,
}

#[derive(Args)]
struct BenchArgs {
    #[arg(default_value = "standard")]
    suite: String,
    #[arg(long, env = "HYC_SEED", default_value_t = 2024)]
    seed: u64,
    /// Trace budget per run.
    #[arg(long, default_value_t = 400)]
    samples: u64,
    /// Seconds per run.
    #[arg(long, default_value_t = 60.0)]
    timeout: f64,
    #[arg(long)]
    jobs: Option<usize>,
    /// Also write the rows as JSON.
    #[arg(long)]
    out: Option<PathBuf>,
}

struct Failure(String);

impl<E: std::fmt::Display> From<E> for Failure {
    fn from(e: E) -> Self {
        Failure(e.to_string())
    }
}

fn seconds(s: f64, what: &str) -> Result<Duration, Failure> {
    Duration::try_from_secs_f64(s)
        .ok()
        .filter(|d| !d.is_zero())
        .ok_or_else(|| Failure(format!("{what} must be a positive number of seconds")))
}

fn open_out(path: &Option<PathBuf>) -> Result<Box<dyn Write>, Failure> {
    Ok(match path {
        Some(p) => Box::new(BufWriter::new(
            File::create(p).map_err(|e| Failure(format!("{}: {e}", p.display())))?,
        )),
        None => Box::new(BufWriter::new(std::io::stdout().lock())),
    })
}

fn load(path: &Path) -> Result<(ModelFile, hyc_core::automaton::HybridAutomaton), Failure> {
    load_model(path).map_err(|e| Failure(format!("{}: {e}", path.display())))
}

fn base_config(model: &ModelFile, s: &SamplingArgs, mode: StrategyMode) -> RunConfig {
    let mut cfg = RunConfig::new(s.seed, mode);
    cfg.sampler.steps = s.steps.or(model.steps).unwrap_or(cfg.sampler.steps);
    cfg.sampler.points = s.points;
    cfg.integrator.step = s.ode_step;
    cfg
}

fn check(a: CheckArgs) -> Result<u8, Failure> {
    let (model, h) = load(&a.model)?;
    let mut cfg = base_config(&model, &a.sampling, a.strategy);
    cfg.strategy.timeout = seconds(a.timeout, "--timeout")?;
    cfg.strategy.batch = a.batch;
    cfg.strategy.max_traces = a.samples;
    cfg.strategy.delta = a.delta;
    cfg.strategy.confidence_target = a.confidence_target;
    cfg.strategy.jobs = a.jobs;
    cfg.strategy.length_metric = match a.length_metric {
        MetricArg::Steps => LengthMetric::Steps,
        MetricArg::NodeCount => LengthMetric::NodeCount,
    };
    if let ClockArg::Wall = a.clock {
        cfg.strategy.clock = Clock::Wall;
    }
    cfg.solver.precision = a.solver_precision;
    cfg.solver.budget = seconds(a.solver_budget, "--solver-budget")?;
    cfg.solver.max_evaluations = a.solver_evaluations;
    cfg.solver.max_path_len = a.max_path;
    let run = run_concolic(&h, &cfg)?;
    let t = run.tallies;
    let code = match run.verdict {
        Verdict::Counterexample => EXIT_COUNTEREXAMPLE,
        Verdict::Pass => EXIT_PASS,
        Verdict::TimeoutInconclusive => EXIT_INCONCLUSIVE,
    };
    eprintln!(
        "{}: {:?} ({}); {} traces, {} solver calls, confidence {:.6}",
        h.name, run.verdict, run.reason, t.traces, t.solver_calls, run.confidence.confidence
    );
    let report = ReportFile::new(&h, cfg, run);
    let mut out = open_out(&a.out)?;
    writeln!(out, "{}", report.to_json())?;
    out.flush()?;
    Ok(code)
}

fn simulate(a: SimulateArgs) -> Result<u8, Failure> {
    let (model, h) = load(&a.model)?;
    let cfg = base_config(&model, &a.sampling, StrategyMode::Random);
    let integ = Integrator::new(&h, cfg.integrator)?;
    let mut out = open_out(&a.out)?;
    write_header(&h, &mut out)?;
    let mut traces = Vec::new();
    for i in 0..a.traces {
        let tr = sample_trace(&integ, &cfg.sampler, i)?;
        write_trace_rows(&integ, i, &tr, &mut out)?;
        traces.push(tr);
    }
    out.flush()?;
    if a.histogram {
        for (k, n) in transition_histogram(&h, &traces) {
            eprintln!("{n:>8}  {k}");
        }
        for (k, n) in mode_sequence_histogram(&h, &traces) {
            eprintln!("{n:>8}  {k}");
        }
    }
    Ok(EXIT_PASS)
}

fn bench(a: BenchArgs) -> Result<u8, Failure> {
    let settings =
        BenchSettings { seed: a.seed, max_traces: a.samples, timeout: seconds(a.timeout, "--timeout")?, jobs: a.jobs };
    let rows = run_suite(&a.suite, &settings)?;
    print!("{}", render_table(&rows));
    if let Some(p) = &a.out {
        std::fs::write(p, serde_json::to_string_pretty(&rows)?)?;
    }
    Ok(EXIT_PASS)
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return ExitCode::from(if e.use_stderr() { EXIT_ERROR } else { EXIT_PASS });
        }
    };
    let result = match cli.command {
        Command::Check(a) => check(a),
        Command::Simulate(a) => simulate(a),
        Command::Bench(a) => bench(a),
    };
    match result {
        Ok(code) => ExitCode::from(code),
        Err(Failure(msg)) => {
            eprintln!("error: {msg}");
            ExitCode::from(EXIT_ERROR)
        }
    }
}
