use std::fs;
use std::path::PathBuf;
use std::process::ExitCode;
use std::time::Instant;

use clap::{Parser, ValueEnum};

use netopt::cli::{run_experiment, CliError, Command, ExperimentConfig};

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
enum OutputFormat {
    Csv,
    Json,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
enum Subcommand {
    Price,
    Delta,
    Hedge,
    Paths,
    Selftest,
}

impl From<Subcommand> for Command {
    fn from(s: Subcommand) -> Self {
        match s {
            Subcommand::Price => Command::Price,
            Subcommand::Delta => Command::Delta,
            Subcommand::Hedge => Command::Hedge,
            Subcommand::Paths => Command::Paths,
            Subcommand::Selftest => Command::Selftest,
        }
    }
}

/// Price and hedge derivatives on network-capacity resources.
#[derive(Debug, Parser)]
#[command(name = "netopt", version)]
struct Args {
    /// Experiment to run.
    command: Subcommand,

    /// Path to the JSON experiment config.
    #[arg(long)]
    config: PathBuf,

    /// Override mc.n_samples.
    #[arg(long)]
    samples: Option<u64>,

    /// Override mc.seed (and hedge.seed).
    #[arg(long)]
    seed: Option<u64>,

    /// Worker thread count (default: all cores).
    #[arg(long)]
    threads: Option<usize>,

    /// Write the report here instead of stdout.
    #[arg(long)]
    output: Option<PathBuf>,

    #[arg(long, value_enum, default_value = "csv")]
    format: OutputFormat,

    /// Print the normalized config and exit.
    #[arg(long)]
    dump_config: bool,
}

fn main() -> ExitCode {
    let args = Args::parse();
    match run(&args) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}

fn run(args: &Args) -> Result<(), CliError> {
    let text = fs::read_to_string(&args.config).map_err(|e| CliError::Config {
        field: "config".to_string(),
        message: format!("{}: {e}", args.config.display()),
    })?;
    let mut cfg = ExperimentConfig::from_json(&text)?;
    if let Some(n) = args.samples {
        cfg.mc.n_samples = n;
    }
    if let Some(seed) = args.seed {
        cfg.mc.seed = seed;
        if let Some(h) = cfg.hedge.as_mut() {
            h.seed = seed;
        }
    }
    if let Some(threads) = args.threads {
        rayon::ThreadPoolBuilder::new()
            .num_threads(threads)
            .build_global()
            .map_err(|e| CliError::Numerical(format!("thread pool: {e}")))?;
    }

    if args.dump_config {
        emit(args, cfg.to_json())?;
        return Ok(());
    }

    let start = Instant::now();
    let report = run_experiment(args.command.into(), &cfg)?;
    let wall = start.elapsed();
    eprintln!(
        "{} digest={} seed={} wall={:.3}s",
        report.command,
        &report.config_digest[..12],
        report.seed,
        wall.as_secs_f64()
    );
    let body = match args.format {
        OutputFormat::Csv => report.to_csv(),
        OutputFormat::Json => report.to_json(),
    };
    emit(args, body)
}

fn emit(args: &Args, body: String) -> Result<(), CliError> {
    match &args.output {
        None => {
            print!("{body}");
            Ok(())
        }
        Some(path) => fs::write(path, body).map_err(|e| CliError::Config {
            field: "output".to_string(),
            message: format!("{}: {e}", path.display()),
        }),
    }
}
