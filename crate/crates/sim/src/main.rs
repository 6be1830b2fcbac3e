use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use hodm_sim::{Experiment, ExperimentConfig, RunError};

const THREADS_ENV: &str = "HODM_SIM_THREADS";

#[derive(Parser)]
#[command(name = "hodm-sim", version, about = "HODM link-level simulator: writes one CSV curve file per run")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Block gain of each path type versus axial distance
    GainVsDistance(RunArgs),
    /// Block gain versus number of OAM modes
    GainVsModes(RunArgs),
    /// Block gain versus OAM mode order
    GainVsModeOrder(RunArgs),
    /// SNR loss from channel-estimation error
    SnrLoss(RunArgs),
    /// Water-filling power per mode versus channel SNR
    PowerAlloc(RunArgs),
    /// Ergodic capacity versus channel SNR
    Capacity(RunArgs),
    /// HODM against OFDM capacity
    CapacityCompare(RunArgs),
}

#[derive(Args)]
struct RunArgs {
    /// TOML experiment configuration
    #[arg(long)]
    config: PathBuf,
    /// Output directory; created if missing
    #[arg(long)]
    out: PathBuf,
    /// Overrides the config's master seed
    #[arg(long)]
    seed: Option<u64>,
    /// Worker threads (falls back to HODM_SIM_THREADS, then all cores)
    #[arg(long)]
    threads: Option<usize>,
}

enum Failure {
    Invalid(String),
    Runtime(String),
}

impl Command {
    fn split(self) -> (Experiment, RunArgs) {
        match self {
            Command::GainVsDistance(a) => (Experiment::GainVsDistance, a),
            Command::GainVsModes(a) => (Experiment::GainVsModes, a),
            Command::GainVsModeOrder(a) => (Experiment::GainVsModeOrder, a),
            Command::SnrLoss(a) => (Experiment::SnrLoss, a),
            Command::PowerAlloc(a) => (Experiment::PowerAlloc, a),
            Command::Capacity(a) => (Experiment::Capacity, a),
            Command::CapacityCompare(a) => (Experiment::CapacityCompare, a),
        }
    }
}

fn thread_count(flag: Option<usize>) -> Result<Option<usize>, Failure> {
    let n = match (flag, std::env::var(THREADS_ENV)) {
        (Some(n), _) => n,
        (None, Ok(v)) => v
            .trim()
            .parse()
            .map_err(|_| Failure::Invalid(format!("{THREADS_ENV}: expected a positive integer, got {v:?}")))?,
        (None, Err(_)) => return Ok(None),
    };
    if n == 0 {
        return Err(Failure::Invalid("threads: must be at least 1".into()));
    }
    Ok(Some(n))
}

fn load(path: &Path) -> Result<ExperimentConfig, Failure> {
    let text = std::fs::read_to_string(path)
        .map_err(|e| Failure::Invalid(format!("cannot read config {}: {e}", path.display())))?;
    ExperimentConfig::from_toml(&text).map_err(|e| Failure::Invalid(e.to_string()))
}

fn run(experiment: Experiment, args: RunArgs) -> Result<PathBuf, Failure> {
    let threads = thread_count(args.threads)?;
    let mut cfg = load(&args.config)?;
    if let Some(seed) = args.seed {
        cfg.seed = seed;
    }
    let errs = experiment.validate(&cfg);
    if !errs.is_empty() {
        return Err(Failure::Invalid(errs.join("\n")));
    }
    if let Some(n) = threads {
        rayon::ThreadPoolBuilder::new()
            .num_threads(n)
            .build_global()
            .map_err(|e| Failure::Runtime(format!("thread pool: {e}")))?;
    }
    let curve = experiment.run(&cfg).map_err(|e| match e {
        RunError::Invalid(m) => Failure::Invalid(m.join("\n")),
        RunError::Core(e) => Failure::Runtime(e.to_string()),
    })?;
    std::fs::create_dir_all(&args.out)
        .map_err(|e| Failure::Runtime(format!("cannot create {}: {e}", args.out.display())))?;
    let path = args.out.join(experiment.file_name());
    curve.write_atomic(&path).map_err(|e| Failure::Runtime(e.to_string()))?;
    Ok(path)
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let code = if e.use_stderr() { 1 } else { 0 };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    let (experiment, args) = cli.command.split();
    match run(experiment, args) {
        Ok(path) => {
            println!("{}", path.display());
            ExitCode::SUCCESS
        }
        Err(Failure::Invalid(m)) => {
            eprintln!("invalid configuration:\n{m}");
            ExitCode::from(1)
        }
        Err(Failure::Runtime(m)) => {
            eprintln!("error: {m}");
            ExitCode::from(2)
        }
    }
}
