use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};
use papr_lab::experiments::{self, Report};
use papr_lab::{ExperimentConfig, ExperimentKind, LabError};

/// Peak cancellation experiments for OFDM and E-SDM transmitters.
#[derive(Parser, Debug)]
#[command(name = "papr-lab", version)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Run the experiment described by a config file.
    Run(Common),
    /// Sweep the kernel window and report ACLR and complexity per EVM target.
    SweepWindow(Common),
    /// Compare complexity and PAPR across methods.
    Compare(Common),
}

#[derive(Copy, Clone, Debug, PartialEq, Eq, ValueEnum)]
enum Format {
    Csv,
}

#[derive(Args, Debug)]
struct Common {
    /// TOML experiment config.
    config: PathBuf,
    /// Override the master seed.
    #[arg(long)]
    seed: Option<u64>,
    /// Output path (defaults to the config's `output`, else `<kind>.csv`).
    #[arg(long)]
    out: Option<PathBuf>,
    /// Worker threads (0 = all cores).
    #[arg(long, default_value_t = 0)]
    threads: usize,
    #[arg(long, value_enum, default_value_t = Format::Csv)]
    format: Format,
}

fn execute(cli: Cli) -> Result<(), LabError> {
    let (common, forced) = match cli.command {
        Command::Run(c) => (c, None),
        Command::SweepWindow(c) => (c, Some(ExperimentKind::WindowSweep)),
        Command::Compare(c) => (c, Some(ExperimentKind::Complexity)),
    };
    let mut cfg = ExperimentConfig::load(&common.config)?;
    if let Some(k) = forced {
        cfg.kind = k;
    }
    if let Some(s) = common.seed {
        cfg.seed = s;
    }
    if let Some(o) = common.out {
        cfg.output = Some(o);
    }
    let Format::Csv = common.format;
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(common.threads)
        .build()
        .map_err(|e| LabError::Io(e.to_string()))?;
    let Report { table, summary } = pool.install(|| experiments::run(&cfg))?;
    let path = cfg.output_path();
    table.write_file(&path, &cfg.hash(), cfg.seed)?;
    println!("papr-lab {} seed={} -> {}", cfg.kind.name(), cfg.seed, path.display());
    for line in summary {
        println!("  {line}");
    }
    Ok(())
}

fn main() -> ExitCode {
    match execute(Cli::parse()) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(2)
        }
    }
}
