mod commands;
mod config;
mod exit;
mod io;

use std::path::PathBuf;

use anyhow::Result;
use clap::{Parser, Subcommand, ValueEnum};
use gcpim::compiler::SimMode;

use commands::Ctx;
use config::RunConfig;

#[derive(Parser)]
#[command(name = "gcpim", version, about = "Gain-cell eDRAM stateful logic simulator and compiler")]
struct Cli {
    /// JSON run configuration (defaults to the built-in constants)
    #[arg(long, global = true, value_name = "PATH")]
    config: Option<PathBuf>,
    /// Overrides the config seed
    #[arg(long, global = true, value_name = "N")]
    seed: Option<u64>,
    /// Monte Carlo trials per input combination
    #[arg(long, global = true, value_name = "N")]
    trials: Option<usize>,
    /// Output directory
    #[arg(long, global = true, value_name = "DIR")]
    out: Option<PathBuf>,
    #[command(subcommand)]
    cmd: Cmd,
}

#[derive(Clone, Copy, ValueEnum)]
enum Mode {
    Ideal,
    Nominal,
    Mc,
}

impl From<Mode> for SimMode {
    fn from(m: Mode) -> Self {
        match m {
            Mode::Ideal => SimMode::Ideal,
            Mode::Nominal => SimMode::Nominal,
            Mode::Mc => SimMode::MonteCarlo,
        }
    }
}

#[derive(Subcommand)]
enum Cmd {
    /// Compile expression programs to micro-op JSON
    Compile {
        #[arg(required = true)]
        programs: Vec<PathBuf>,
    },
    /// Run a compiled program over input vectors (one per CSV row)
    Run {
        program: PathBuf,
        inputs: PathBuf,
        #[arg(long, value_enum, default_value = "nominal")]
        mode: Mode,
        /// Write waveforms of the first columns to trace.csv
        #[arg(long)]
        trace: bool,
    },
    /// Monte Carlo campaign over a gate (`not`, `nor`) or a compiled program
    Mc {
        target: String,
        /// Input vectors for a program target (default: every combination)
        #[arg(long)]
        inputs: Option<PathBuf>,
        /// Input age at evaluation for gate targets, ns
        #[arg(long)]
        age: Option<u64>,
        /// Minimum success rate per combination
        #[arg(long)]
        floor: Option<f64>,
    },
    /// Fit tau and the variation magnitude; writes calibrated.json
    Calibrate {
        /// Worst-case single-'1' success rate
        #[arg(long)]
        target: Option<f64>,
    },
    /// Summarize ledger CSVs
    Report {
        #[arg(required = true)]
        ledgers: Vec<PathBuf>,
        /// Refresh period for availability, ns (default: ledger span)
        #[arg(long)]
        period: Option<u64>,
    },
}

fn run(cli: Cli) -> Result<()> {
    let mut cfg = match &cli.config {
        Some(p) => RunConfig::load(p)?,
        None => RunConfig::default(),
    };
    if let Some(s) = cli.seed {
        cfg.seed = s;
    }
    if let Some(n) = cli.trials {
        cfg.trials = n;
    }
    cfg.validate()?;
    let ctx = Ctx {
        out: cli.out.clone().unwrap_or_else(|| cfg.out_dir.clone()),
        seed_flag: cli.seed,
        cfg,
    };
    match &cli.cmd {
        Cmd::Compile { programs } => commands::cmd_compile(&ctx, programs),
        Cmd::Run {
            program,
            inputs,
            mode,
            trace,
        } => commands::cmd_run(&ctx, program, inputs, (*mode).into(), *trace),
        Cmd::Mc {
            target,
            inputs,
            age,
            floor,
        } => commands::cmd_mc(&ctx, target, inputs.as_deref(), *age, *floor),
        Cmd::Calibrate { target } => commands::cmd_calibrate(&ctx, *target),
        Cmd::Report { ledgers, period } => commands::cmd_report(&ctx, ledgers, *period),
    }
}

fn main() {
    let cli = Cli::parse();
    if let Err(e) = run(cli) {
        eprintln!("error: {e:#}");
        std::process::exit(exit::classify(&e) as i32);
    }
}
