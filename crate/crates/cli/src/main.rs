//! `realm-sim`: reproducible fault-injection, calibration and voltage-sweep
//! experiments for checksum-protected INT8 GEMM.

mod commands;
mod config;
mod error;
mod output;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use crate::config::{ExperimentConfig, Format, Resolved};
use crate::error::{CliError, CliResult};
use crate::output::OutputDir;

/// Environment variable capping worker threads.
const THREADS_ENV: &str = "REALM_SIM_THREADS";

#[derive(Debug, Parser)]
#[command(name = "realm-sim", version, about = "Checksum-protected INT8 GEMM under voltage scaling")]
struct Cli {
    /// JSON experiment configuration; defaults apply to omitted keys.
    #[arg(long, global = true, value_name = "PATH")]
    config: Option<PathBuf>,

    /// Experiment seed (overrides `seed` in the config).
    #[arg(long, global = true, value_name = "U64")]
    seed: Option<u64>,

    /// Output directory (overrides `output.directory`).
    #[arg(long, global = true, value_name = "DIR")]
    out: Option<PathBuf>,

    /// Output format (overrides `output.formats`).
    #[arg(long, global = true, value_enum)]
    format: Option<Format>,

    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Run the built-in oracle suite and print a pass/fail table.
    Verify(VerifyArgs),
    /// Sweep a quality grid, fit the critical region and write params.
    Calibrate,
    /// Compare detectors on the same faulted GEMMs.
    Compare,
    /// Energy and recovery versus supply voltage for each detector.
    Sweep,
    /// Dump one faulted GEMM: events, checksums and verdicts.
    Inject(InjectArgs),
}

#[derive(Debug, Args)]
struct VerifyArgs {
    /// Randomized cases per check (overrides `verify.min_cases`).
    #[arg(long)]
    cases: Option<usize>,

    /// Test hook: corrupt the named check to exercise the failure path.
    #[arg(long, hide = true, value_name = "CHECK")]
    corrupt: Option<String>,
}

#[derive(Debug, Args)]
struct InjectArgs {
    /// Weight matrix in text form (`rows cols` then values).
    #[arg(long, requires = "x")]
    w: Option<PathBuf>,

    /// Activation matrix in text form.
    #[arg(long, requires = "w")]
    x: Option<PathBuf>,

    /// Trial index for generated operands.
    #[arg(long, default_value_t = 0)]
    trial: u64,
}

/// Everything a command needs: the resolved config and output settings.
pub struct Ctx {
    pub res: Resolved,
    out_explicit: bool,
}

impl Ctx {
    pub fn cfg(&self) -> &ExperimentConfig {
        &self.res.cfg
    }

    pub fn out_explicit(&self) -> bool {
        self.out_explicit
    }

    /// Creates the output directory and records the resolved config in it.
    pub fn output(&self, command: &str) -> CliResult<OutputDir> {
        let o = &self.res.cfg.output;
        let dir = OutputDir::create(&o.directory, &o.formats)?;
        dir.write_resolved_config(command, &self.res.cfg)?;
        Ok(dir)
    }
}

fn configure_threads() -> CliResult<()> {
    let Ok(raw) = std::env::var(THREADS_ENV) else {
        return Ok(());
    };
    let n: usize = raw
        .trim()
        .parse()
        .ok()
        .filter(|&n| n > 0)
        .ok_or_else(|| CliError::Config(format!("{THREADS_ENV} must be a positive integer, got {raw:?}")))?;
    rayon::ThreadPoolBuilder::new()
        .num_threads(n)
        .build_global()
        .map_err(|e| CliError::Config(format!("cannot size thread pool: {e}")))
}

fn build_ctx(cli: &Cli) -> CliResult<Ctx> {
    let (mut cfg, base_dir) = match &cli.config {
        Some(path) => {
            let base = path
                .parent()
                .map(|p| p.to_path_buf())
                .unwrap_or_else(|| PathBuf::from("."));
            (ExperimentConfig::load(path)?, base)
        }
        None => (ExperimentConfig::default(), PathBuf::from(".")),
    };
    if let Some(seed) = cli.seed {
        cfg.seed = seed;
    }
    if let Some(out) = &cli.out {
        cfg.output.directory = out.clone();
    }
    if let Some(f) = cli.format {
        cfg.output.formats = vec![f];
    }
    cfg.validate()?;
    Ok(Ctx {
        res: Resolved { cfg, base_dir },
        out_explicit: cli.out.is_some(),
    })
}

fn run(cli: Cli) -> CliResult<()> {
    configure_threads()?;
    let ctx = build_ctx(&cli)?;
    match cli.command {
        Command::Verify(a) => commands::verify::run(&ctx, a.cases, a.corrupt.as_deref()),
        Command::Calibrate => commands::calibrate::run(&ctx),
        Command::Compare => commands::compare::run(&ctx),
        Command::Sweep => commands::sweep::run(&ctx),
        Command::Inject(a) => commands::inject::run(&ctx, a.w.as_deref(), a.x.as_deref(), a.trial),
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code())
        }
    }
}
