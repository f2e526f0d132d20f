//! `gps`: simulate, evaluate the fluid model, and run scaling sweeps from a
//! single JSON config file.

mod config;

use std::fs::{self, File};
use std::io::BufWriter;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use serde_json::json;

use gps_core::export::{self, Header};
use gps_core::harness::{check_convergence, run_sweep};
use gps_core::sim::{self, sojourn_stats};

use config::{RunConfig, SchemaError};

const SEED_ENV: &str = "GPS_SEED_OVERRIDE";

#[derive(Parser)]
#[command(name = "gps", version, about = "Gated processor-sharing queue: simulation, fluid model, scaling sweeps")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Simulate one path; writes jobs.csv, batches.csv, snapshots.csv.
    Simulate(Common),
    /// Evaluate the fluid model on the grid; writes fluid.csv.
    Fluid(Common),
    /// Run the scaling sweep; writes report.json and convergence.csv.
    Converge(Common),
    /// Simulate one path and summarize it; writes summary.json plus the
    /// final sigma.csv and mu.csv.
    Inspect(Common),
}

#[derive(Args)]
struct Common {
    #[arg(long)]
    config: PathBuf,
    #[arg(long)]
    out: PathBuf,
    /// Worker threads for replications (default: all cores).
    #[arg(long)]
    jobs: Option<usize>,
    #[arg(long, short)]
    verbose: bool,
}

#[derive(Debug, thiserror::Error)]
enum CliError {
    #[error("schema error: {0}")]
    Schema(#[from] SchemaError),
    #[error("runtime error: {0}")]
    Runtime(String),
    #[error("convergence check failed")]
    CheckFailed,
}

impl CliError {
    fn code(&self) -> u8 {
        match self {
            CliError::Schema(_) => 2,
            CliError::Runtime(_) => 3,
            CliError::CheckFailed => 4,
        }
    }
}

fn runtime(context: impl std::fmt::Display) -> impl Fn(Box<dyn std::error::Error>) -> CliError {
    let context = context.to_string();
    move |e| CliError::Runtime(format!("{context}: {e}"))
}

fn create(dir: &Path, name: &str) -> Result<BufWriter<File>, CliError> {
    let path = dir.join(name);
    File::create(&path)
        .map(BufWriter::new)
        .map_err(|e| CliError::Runtime(format!("{}: {e}", path.display())))
}

fn load(common: &Common) -> Result<RunConfig, CliError> {
    let text = fs::read_to_string(&common.config)
        .map_err(|e| CliError::Schema(SchemaError(format!("{}: {e}", common.config.display()))))?;
    let seed_override = match std::env::var(SEED_ENV) {
        Ok(v) => {
            let seed = v
                .trim()
                .parse::<u64>()
                .map_err(|e| CliError::Schema(SchemaError(format!("{SEED_ENV}={v}: {e}"))))?;
            log::warn!("{SEED_ENV} is set: using seed {seed} instead of the config seed");
            Some(seed)
        }
        Err(_) => None,
    };
    let cfg = RunConfig::parse(&text, seed_override)?;
    fs::create_dir_all(&common.out).map_err(|e| CliError::Runtime(format!("{}: {e}", common.out.display())))?;
    Ok(cfg)
}

fn simulate(common: &Common) -> Result<(), CliError> {
    let cfg = load(common)?;
    let sim_cfg = cfg.sim_config()?;
    let trace = sim::run(&sim_cfg).map_err(|e| CliError::Runtime(format!("seed {}: {e}", cfg.seed)))?;
    let header = Header::new(&cfg.hash);
    let fail = runtime("writing simulation output");
    export::write_jobs(create(&common.out, "jobs.csv")?, &header, &trace).map_err(|e| fail(e.into()))?;
    export::write_batches(create(&common.out, "batches.csv")?, &header, &trace).map_err(|e| fail(e.into()))?;
    export::write_snapshots(create(&common.out, "snapshots.csv")?, &header, &trace.snapshots).map_err(|e| fail(e.into()))?;
    log::info!("{} jobs in {} batches", trace.jobs.len(), trace.batches.len());
    Ok(())
}

fn fluid(common: &Common) -> Result<(), CliError> {
    let cfg = load(common)?;
    let params = cfg.fluid_params()?;
    let grid = cfg.grid("fluid")?;
    let header = Header::new(&cfg.hash);
    export::write_fluid(create(&common.out, "fluid.csv")?, &header, &params, grid, cfg.test_set.functions())
        .map_err(|e| runtime("writing fluid.csv")(e.into()))
}

fn converge(common: &Common) -> Result<(), CliError> {
    let cfg = load(common)?;
    let scaling = cfg.scaling_config()?;
    let mut report = run_sweep(&scaling).map_err(|e| runtime("sweep")(e.into()))?;
    report.config_hash = cfg.hash.clone();
    let header = Header::new(&cfg.hash);
    let fail = runtime("writing sweep output");
    export::write_report(create(&common.out, "report.json")?, &report).map_err(|e| fail(e.into()))?;
    export::write_convergence(create(&common.out, "convergence.csv")?, &header, &report).map_err(|e| fail(e.into()))?;
    let outcome = check_convergence(&report, &cfg.rule).map_err(|e| CliError::Schema(SchemaError(e.to_string())))?;
    for line in &outcome.narrative {
        println!("{line}");
    }
    if outcome.passed {
        Ok(())
    } else {
        Err(CliError::CheckFailed)
    }
}

fn inspect(common: &Common) -> Result<(), CliError> {
    let cfg = load(common)?;
    let sim_cfg = cfg.sim_config()?;
    let trace = sim::run(&sim_cfg).map_err(|e| CliError::Runtime(format!("seed {}: {e}", cfg.seed)))?;
    let end = trace.snapshot(trace.horizon).map_err(|e| runtime("snapshot")(e.into()))?;
    let header = Header::new(&cfg.hash);
    let fail = runtime("writing inspect output");
    export::write_atomic(create(&common.out, "sigma.csv")?, &header, &end.sigma).map_err(|e| fail(e.into()))?;
    export::write_atomic(create(&common.out, "mu.csv")?, &header, &end.mu).map_err(|e| fail(e.into()))?;
    let summary = json!({
        "tool_version": header.tool_version,
        "config_hash": header.config_hash,
        "seed": cfg.seed,
        "horizon": trace.horizon,
        "jobs": trace.jobs.len(),
        "batches": trace.batches.len(),
        "idle_time": end.idle_time,
        "final_workload": end.workload,
        "final_queue_length": end.queue_length,
        "sojourn": sojourn_stats(&trace),
    });
    let text = serde_json::to_string_pretty(&summary).map_err(|e| fail(e.into()))?;
    fs::write(common.out.join("summary.json"), format!("{text}\n")).map_err(|e| fail(e.into()))?;
    println!("{text}");
    Ok(())
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let common = match &cli.command {
        Command::Simulate(c) | Command::Fluid(c) | Command::Converge(c) | Command::Inspect(c) => c,
    };
    env_logger::Builder::new()
        .filter_level(if common.verbose {
            log::LevelFilter::Debug
        } else {
            log::LevelFilter::Warn
        })
        .parse_default_env()
        .init();
    if let Some(n) = common.jobs {
        if let Err(e) = rayon::ThreadPoolBuilder::new().num_threads(n).build_global() {
            log::warn!("could not size the worker pool: {e}");
        }
    }
    let result = match &cli.command {
        Command::Simulate(c) => simulate(c),
        Command::Fluid(c) => fluid(c),
        Command::Converge(c) => converge(c),
        Command::Inspect(c) => inspect(c),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("gps: {e}");
            ExitCode::from(e.code())
        }
    }
}
