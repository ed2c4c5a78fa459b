use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use scatter_cli::commands::{self, RunOptions};
use scatter_cli::config::ExperimentConfig;
use scatter_cli::output::write_json;
use scatter_cli::verify::{self, VerifyOptions, DEFAULT_SEED};
use scatter_cli::{CliError, CliResult};

const THREADS_VAR: &str = "SCATTER_THREADS";

#[derive(Debug, Parser)]
#[command(
    name = "scatter",
    version,
    about = "Tracers exchanging heat with a chain of scatterers"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Args)]
struct Common {
    /// JSON experiment configuration.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Overrides the configured seed.
    #[arg(long)]
    seed: Option<u64>,
    /// Overrides the configured output directory.
    #[arg(long)]
    out_dir: Option<PathBuf>,
    /// Shorter runs: a tenth of the horizon and replicas, or the quick acceptance subset.
    #[arg(long)]
    fast: bool,
}

#[derive(Debug, Args)]
struct VerifyArgs {
    #[command(flatten)]
    common: Common,
    /// Run only these criteria (comma separated ids).
    #[arg(long, value_delimiter = ',')]
    only: Vec<u32>,
    /// Make one criterion's tolerances unattainable to check failure reporting.
    #[arg(long, value_name = "ID")]
    corrupt_tolerance: Option<u32>,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Monte Carlo run of the configured model.
    Simulate(Common),
    /// Closed-form stationary report, profile table and CGF sweep.
    Analyze(Common),
    /// CGF sweep over the configured λ-grid.
    Cgf(Common),
    /// Temperature profile table.
    Profile(Common),
    /// Acceptance suite.
    Verify(VerifyArgs),
}

fn configure_threads() -> CliResult<()> {
    let Ok(value) = std::env::var(THREADS_VAR) else {
        return Ok(());
    };
    let n: usize = value
        .parse()
        .ok()
        .filter(|&n| n > 0)
        .ok_or_else(|| CliError::Validation(format!("{THREADS_VAR} must be a positive integer, got {value:?}")))?;
    rayon::ThreadPoolBuilder::new()
        .num_threads(n)
        .build_global()
        .map_err(|e| CliError::Runtime(e.to_string()))
}

fn options(c: &Common) -> RunOptions {
    RunOptions {
        seed: c.seed,
        out_dir: c.out_dir.clone(),
        fast: c.fast,
    }
}

fn run_configured(
    c: &Common,
    f: fn(&scatter_cli::config::Experiment, &RunOptions) -> CliResult<Vec<PathBuf>>,
) -> CliResult<()> {
    let path = c
        .config
        .as_ref()
        .ok_or_else(|| CliError::Validation("--config is required".into()))?;
    let exp = ExperimentConfig::load(path)?.resolve()?;
    for file in f(&exp, &options(c))? {
        println!("{}", file.display());
    }
    Ok(())
}

fn run_verify(a: &VerifyArgs) -> CliResult<()> {
    if a.common.config.is_some() {
        return Err(CliError::Validation("verify takes no configuration".into()));
    }
    let known = verify::criterion_ids();
    if let Some(id) = a.only.iter().chain(&a.corrupt_tolerance).find(|id| !known.contains(id)) {
        return Err(CliError::Validation(format!("unknown criterion {id}")));
    }
    let opts = VerifyOptions {
        seed: a.common.seed.unwrap_or(DEFAULT_SEED),
        fast: a.common.fast,
        corrupt: a.corrupt_tolerance,
        only: (!a.only.is_empty()).then(|| a.only.clone()),
    };
    let report = verify::run_with(&opts, |r| println!("{r}"));
    if let Some(dir) = &a.common.out_dir {
        std::fs::create_dir_all(dir)?;
        write_json(&dir.join("verify.json"), &report)?;
    }
    if report.passed() {
        println!("all criteria passed");
        Ok(())
    } else {
        Err(CliError::Acceptance(format!("criteria {:?} failed", report.failures())))
    }
}

fn dispatch(cli: &Cli) -> CliResult<()> {
    configure_threads()?;
    match &cli.command {
        Command::Simulate(c) => run_configured(c, commands::simulate),
        Command::Analyze(c) => run_configured(c, commands::analyze),
        Command::Cgf(c) => run_configured(c, commands::cgf),
        Command::Profile(c) => run_configured(c, commands::profile),
        Command::Verify(a) => run_verify(a),
    }
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let code = if e.use_stderr() { 1 } else { 0 };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    match dispatch(&cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code())
        }
    }
}
