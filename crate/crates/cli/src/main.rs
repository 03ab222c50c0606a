use std::fs::File;
use std::io::{BufReader, BufWriter, Read, Write};
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{anyhow, Context, Result};
use clap::{Parser, Subcommand, ValueEnum};
use serde::{Deserialize, Serialize};

use fchp::bench::scenario::write_profile_csv;
use fchp::bench::{
    build_instance, discretize_and_filter, load_suite_dir, run_suite, simulate_scenario, AccessLog, Catalog,
    ScenarioFile, ScenarioPolicy,
};
use fchp::construct::construct_solution;
use fchp::exact::{exact_solve, ExactConfig, ExactError, ExactOutcome};
use fchp::ils::{ils_solve, IlsConfig, RunStats};
use fchp::model::{check_feasibility, evaluate, CostBreakdown, Instance, Solution};
use fchp::rng::seeded;
use fchp::tracegen::{generate_trace, Trace, TraceConfig};

#[derive(Parser)]
#[command(name = "fchp", version, about = "Replica placement and server hiring for flash crowds")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Sample a synthetic access trace.
    GenTrace {
        #[arg(long)]
        config: PathBuf,
        /// Overrides the seed in the config.
        #[arg(long)]
        seed: Option<u64>,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Build an instance from a trace or access log CSV.
    MakeInstance {
        /// `time_step,content_id,access_count` trace or `timestamp_seconds,content_id` log.
        #[arg(long)]
        trace: PathBuf,
        /// Catalog JSON with servers and content sizes.
        #[arg(long)]
        servers: PathBuf,
        #[arg(long, default_value_t = 3600.0)]
        period_secs: f64,
        #[arg(long, default_value_t = 10)]
        topk: usize,
        /// Seconds per trace time step.
        #[arg(long, default_value_t = 1.0)]
        step_secs: f64,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Solve an instance.
    Solve {
        #[arg(long)]
        instance: PathBuf,
        #[arg(long, value_enum, default_value_t = SolveMethod::Ils)]
        method: SolveMethod,
        #[arg(long, default_value_t = 3)]
        iters: usize,
        #[arg(long, default_value_t = 7)]
        level_max: usize,
        #[arg(long, default_value_t = 1)]
        delay: usize,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long, default_value_t = 200)]
        move_cap: usize,
        #[arg(long, default_value_t = 50_000_000)]
        node_limit: u64,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Check and price a solution.
    Eval {
        #[arg(long)]
        instance: PathBuf,
        /// A solution or a report written by `solve`.
        #[arg(long)]
        solution: PathBuf,
    },
    /// Run every method over a directory of instances.
    Bench {
        #[arg(long)]
        suite: PathBuf,
        #[arg(long)]
        out: PathBuf,
    },
    /// Replay a flash-crowd scenario under a policy.
    Simulate {
        #[arg(long)]
        scenario: PathBuf,
        #[arg(long, value_enum)]
        policy: PolicyArg,
        #[arg(long)]
        out: Option<PathBuf>,
        /// Per-period CSV of arrivals, service and hired machines.
        #[arg(long)]
        profile: Option<PathBuf>,
    },
}

#[derive(Copy, Clone, Debug, PartialEq, Eq, ValueEnum, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
enum SolveMethod {
    Greedy,
    Ils,
    Exact,
}

#[derive(Copy, Clone, ValueEnum)]
enum PolicyArg {
    Ils,
    Autoscale,
}

#[derive(Serialize, Deserialize)]
struct SolveReport {
    method: SolveMethod,
    seed: u64,
    breakdown: CostBreakdown,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    ils: Option<IlsConfig>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    stats: Option<RunStats>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    exact: Option<ExactSummary>,
    solution: Solution,
}

#[derive(Serialize, Deserialize)]
struct ExactSummary {
    node_limit: u64,
    proven: bool,
    nodes: u64,
}

/// Failure on valid usage: bad or infeasible input data.
struct DataError(anyhow::Error);

impl<E: Into<anyhow::Error>> From<E> for DataError {
    fn from(e: E) -> Self {
        DataError(e.into())
    }
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { ExitCode::from(1) } else { ExitCode::SUCCESS };
        }
    };
    if let Err(e) = configure_threads() {
        eprintln!("error: {e:#}");
        return ExitCode::from(1);
    }
    match run(cli.command) {
        Ok(()) => ExitCode::SUCCESS,
        Err(DataError(e)) => {
            eprintln!("error: {e:#}");
            ExitCode::from(2)
        }
    }
}

fn configure_threads() -> Result<()> {
    let Ok(value) = std::env::var("FCHP_THREADS") else {
        return Ok(());
    };
    let n: usize = value.trim().parse().with_context(|| format!("FCHP_THREADS={value:?} is not a count"))?;
    if n > 0 {
        rayon::ThreadPoolBuilder::new().num_threads(n).build_global()?;
    }
    Ok(())
}

fn read_text(path: &Path) -> Result<String> {
    std::fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))
}

fn read_instance(path: &Path) -> Result<Instance> {
    Instance::from_json(&read_text(path)?).with_context(|| format!("parsing {}", path.display()))
}

/// Writes to `path`, or stdout when absent.
fn output(path: Option<&Path>) -> Result<Box<dyn Write>> {
    Ok(match path {
        Some(p) => Box::new(BufWriter::new(File::create(p).with_context(|| format!("creating {}", p.display()))?)),
        None => Box::new(BufWriter::new(std::io::stdout())),
    })
}

fn write_json<T: Serialize>(value: &T, path: Option<&Path>) -> Result<()> {
    let mut out = output(path)?;
    serde_json::to_writer_pretty(&mut out, value)?;
    writeln!(out)?;
    out.flush()?;
    Ok(())
}

fn run(command: Command) -> Result<(), DataError> {
    match command {
        Command::GenTrace { config, seed, out } => {
            let mut cfg = TraceConfig::from_json(&read_text(&config)?)?;
            if let Some(seed) = seed {
                cfg.seed = seed;
            }
            let trace = generate_trace(&cfg)?;
            let mut out = output(out.as_deref())?;
            trace.write_csv(&mut out)?;
            out.flush()?;
        }
        Command::MakeInstance { trace, servers, period_secs, topk, step_secs, out } => {
            let catalog = Catalog::from_json(&read_text(&servers)?)?;
            let log = read_log(&trace, step_secs)?;
            let counts = discretize_and_filter(&log, period_secs, topk)?;
            let instance = build_instance(&counts, &catalog, None)?;
            write_json(&instance, out.as_deref())?;
        }
        Command::Solve { instance, method, iters, level_max, delay, seed, move_cap, node_limit, out } => {
            let instance = read_instance(&instance)?;
            let ils = IlsConfig { iter_max: iters, level_max, delay_d: delay, seed, move_sample_cap: move_cap };
            let (report, proven) = solve(&instance, method, ils, node_limit)?;
            write_json(&report, out.as_deref())?;
            if !proven {
                return Err(DataError(anyhow!(
                    "node limit {node_limit} reached; the written solution is not proven optimal"
                )));
            }
        }
        Command::Eval { instance, solution } => {
            let instance = read_instance(&instance)?;
            let solution = read_solution(&solution)?;
            let violations = check_feasibility(&instance, &solution);
            if !violations.is_empty() {
                for v in &violations {
                    println!("{v}");
                }
                return Err(DataError(anyhow!("{} violation(s)", violations.len())));
            }
            write_json(&evaluate(&instance, &solution)?, None)?;
        }
        Command::Bench { suite, out } => {
            let (instances, config) = load_suite_dir(&suite)?;
            let rows = run_suite(&instances, &config, Some(&out))?;
            eprintln!("{} rows written to {}", rows.len(), out.display());
        }
        Command::Simulate { scenario, policy, out, profile } => {
            let file = ScenarioFile::from_json(&read_text(&scenario)?)?;
            let policy = match policy {
                PolicyArg::Ils => ScenarioPolicy::Ils,
                PolicyArg::Autoscale => ScenarioPolicy::Autoscale,
            };
            let report = simulate_scenario(&file, policy)?;
            if let Some(path) = profile {
                let f = File::create(&path).with_context(|| format!("creating {}", path.display()))?;
                write_profile_csv(&report.profile, f)?;
            }
            write_json(&report, out.as_deref())?;
        }
    }
    Ok(())
}

fn solve(instance: &Instance, method: SolveMethod, ils: IlsConfig, node_limit: u64) -> Result<(SolveReport, bool)> {
    let seed = ils.seed;
    let bare = |solution: Solution| -> Result<SolveReport> {
        Ok(SolveReport {
            method,
            seed,
            breakdown: evaluate(instance, &solution)?,
            ils: None,
            stats: None,
            exact: None,
            solution,
        })
    };
    match method {
        SolveMethod::Greedy => Ok((bare(construct_solution(instance, &mut seeded(seed))?)?, true)),
        SolveMethod::Ils => {
            let (solution, stats) = ils_solve(instance, &ils)?;
            let report = SolveReport { ils: Some(ils), stats: Some(stats), ..bare(solution)? };
            Ok((report, true))
        }
        SolveMethod::Exact => {
            let config = ExactConfig { node_limit, prune: true };
            let (outcome, proven): (ExactOutcome, bool) = match exact_solve(instance, &config) {
                Ok(o) => (o, true),
                Err(ExactError::BudgetExhausted(o)) => (*o, false),
                Err(e) => return Err(e.into()),
            };
            let exact = ExactSummary { node_limit, proven, nodes: outcome.nodes };
            Ok((SolveReport { exact: Some(exact), ..bare(outcome.solution)? }, proven))
        }
    }
}

/// A bare solution or a `solve` report.
fn read_solution(path: &Path) -> Result<Solution> {
    let text = read_text(path)?;
    let value: serde_json::Value = serde_json::from_str(&text).with_context(|| format!("parsing {}", path.display()))?;
    let inner = value.get("solution").cloned().unwrap_or(value);
    serde_json::from_value(inner).with_context(|| format!("{} holds no solution", path.display()))
}

fn read_log(path: &Path, step_secs: f64) -> Result<AccessLog> {
    let mut text = String::new();
    BufReader::new(File::open(path).with_context(|| format!("opening {}", path.display()))?)
        .read_to_string(&mut text)?;
    let source = path.display().to_string();
    if text.trim_start().starts_with("time_step") {
        let trace = Trace::read_csv(text.as_bytes())?;
        Ok(AccessLog::from_trace(&trace, step_secs, &source)?)
    } else {
        Ok(AccessLog::read_csv(source, text.as_bytes())?)
    }
}
