use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand, ValueEnum};

mod commands;
mod config;
mod output;

use config::ExperimentConfig;

/// Exact enumeration, Monte Carlo and bound checks for long-range Ising
/// models with random fields.
#[derive(Debug, Parser)]
#[command(name = "lrising", version)]
struct Cli {
    /// JSON experiment config; built-in defaults when omitted.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Output directory.
    #[arg(
        long,
        global = true,
        env = "LRISING_OUT",
        default_value = "lrising-out"
    )]
    out: PathBuf,
    /// Overrides `run.seed`.
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Worker threads (default: logical cores).
    #[arg(long, global = true)]
    workers: Option<usize>,
    /// Exit with status 4 if any bound is violated.
    #[arg(long, global = true)]
    strict: bool,
    /// Raise the exact-enumeration and census size limits.
    #[arg(long, global = true)]
    override_scale_guard: bool,
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Exact log-partition and origin observables over the β × ε grid.
    Enumerate,
    /// Census of origin contours with cube covers.
    Contours,
    /// Disorder-averaged Monte Carlo estimates of P[σ_0 = −1].
    Sample,
    /// Run one bound check, or all of them.
    Verify {
        #[arg(value_enum)]
        bound: Bound,
    },
    /// Plus/minus boundary table over the β × ε grid.
    Sweep,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum)]
pub enum Bound {
    FlipEnergy,
    Concentration,
    Counting,
    Dudley,
    BadEvent,
    Peierls,
    All,
}

#[derive(Debug)]
pub enum CliError {
    Config(String),
    ScaleGuard(String),
    Violated(String),
    Compute(lrising::Error),
    Io(String),
}

impl CliError {
    fn code(&self) -> u8 {
        match self {
            CliError::Config(_) => 2,
            CliError::ScaleGuard(_) => 3,
            CliError::Violated(_) => 4,
            CliError::Compute(_) | CliError::Io(_) => 1,
        }
    }
}

impl std::fmt::Display for CliError {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            CliError::Config(m) => write!(f, "invalid config: {m}"),
            CliError::ScaleGuard(m) => write!(
                f,
                "scale guard: {m} (use --override-scale-guard to raise the limit)"
            ),
            CliError::Violated(m) => write!(f, "bound violated: {m}"),
            CliError::Compute(e) => write!(f, "{e}"),
            CliError::Io(m) => write!(f, "i/o error: {m}"),
        }
    }
}

impl From<lrising::Error> for CliError {
    fn from(e: lrising::Error) -> Self {
        match e {
            lrising::Error::VolumeTooLarge { .. } | lrising::Error::BoxTooSmall(_) => {
                CliError::ScaleGuard(e.to_string())
            }
            other => CliError::Compute(other),
        }
    }
}

fn run(cli: Cli) -> Result<(), CliError> {
    let mut cfg = ExperimentConfig::load(cli.config.as_deref())?;
    if let Some(seed) = cli.seed {
        cfg.run.seed = seed;
    }
    if let Some(w) = cli.workers {
        if w == 0 {
            return Err(CliError::Config("--workers must be at least 1".into()));
        }
        rayon::ThreadPoolBuilder::new()
            .num_threads(w)
            .build_global()
            .map_err(|e| CliError::Io(e.to_string()))?;
    }
    let ctx = commands::Context {
        cfg,
        override_guard: cli.override_scale_guard,
    };
    let started = std::time::Instant::now();
    let (name, result) = match cli.command {
        Command::Enumerate => ("enumerate".to_string(), commands::enumerate(&ctx)),
        Command::Contours => ("contours".to_string(), commands::contours(&ctx)),
        Command::Sample => ("sample".to_string(), commands::sample(&ctx)),
        Command::Sweep => ("sweep".to_string(), commands::sweep(&ctx)),
        Command::Verify { bound } => (
            format!(
                "verify {}",
                bound.to_possible_value().expect("named").get_name()
            ),
            commands::verify(&ctx, bound),
        ),
    };
    let out = result?;
    let manifest = output::Manifest::new(
        &name,
        &ctx.cfg,
        cli.workers,
        started.elapsed().as_secs_f64(),
        &out,
    );
    output::emit(&cli.out, &out, &manifest)?;
    if !out.summary.is_empty() {
        print!("{}", out.summary);
    }
    if cli.strict && !out.violated.is_empty() {
        return Err(CliError::Violated(out.violated.join(", ")));
    }
    Ok(())
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("lrising: {e}");
            ExitCode::from(e.code())
        }
    }
}
