use std::path::PathBuf;
use std::process::ExitCode;
use std::time::{SystemTime, UNIX_EPOCH};

use clap::{Parser, Subcommand};

use noisy_hk::app::{
    certify, divergence_warning, execute, replay, DEFAULT_RATIOS, DEFAULT_REPLICATES,
    DIVERGENCE_EPS_LIMIT,
};
use noisy_hk::io::{load_config, AppError, CommandSpec};
use noisy_hk::{Execution, Scenario};

/// Simulate the noisy Hegselmann-Krause opinion model.
#[derive(Debug, Parser)]
#[command(name = "noisy-hk", version)]
struct Cli {
    #[command(subcommand)]
    command: Command,

    /// Master seed (overrides the config).
    #[arg(long, global = true)]
    seed: Option<u64>,

    /// Seed from the wall clock instead; the seed used is recorded in the manifest.
    #[arg(long, global = true, conflicts_with = "seed")]
    seed_from_clock: bool,

    /// Number of steps (overrides the config).
    #[arg(long, global = true)]
    horizon: Option<u64>,

    /// Replicates per sweep ratio.
    #[arg(long, global = true)]
    replicates: Option<u64>,

    #[arg(long, global = true, default_value = "out")]
    out_dir: PathBuf,

    /// Add one column per agent to trajectory CSVs.
    #[arg(long, global = true)]
    record_states: bool,

    /// Comma-separated noise ratios delta/eps for `sweep`.
    #[arg(long, global = true, value_delimiter = ',')]
    ratios: Option<Vec<f64>>,

    /// Report the closed-form residual of the synchronised walk (`walk`).
    #[arg(long, global = true)]
    identity_check: bool,

    /// Run replicates on one thread.
    #[arg(long, global = true)]
    serial: bool,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Simulate one trajectory.
    Run { config: PathBuf },
    /// Sweep Uniform(ratio * eps) noise over a list of ratios.
    Sweep { config: PathBuf },
    /// Noise-walk and boundary-recurrence diagnostics.
    Walk { config: PathBuf },
    /// Reproduce a reference scenario: fig1, fig2 or fig3.
    Reproduce { name: String },
    /// Print the sub-/super-critical certificates of a config's noise model.
    Certify { config: PathBuf },
    /// Re-run the command recorded in a manifest.
    Replay { manifest: PathBuf },
}

fn clock_seed() -> u64 {
    SystemTime::now()
        .duration_since(UNIX_EPOCH)
        .map(|d| d.as_nanos() as u64)
        .unwrap_or_default()
}

fn run(cli: Cli) -> Result<(), AppError> {
    let execution = if cli.serial {
        Execution::Serial
    } else {
        Execution::Parallel
    };
    let seed = if cli.seed_from_clock {
        Some(clock_seed())
    } else {
        cli.seed
    };
    let configured = |path: &PathBuf| {
        let mut config = load_config(path)?;
        if let Some(seed) = seed {
            config.master_seed = seed;
        }
        if let Some(horizon) = cli.horizon {
            if horizon == 0 {
                return Err(AppError::Usage("--horizon must be at least 1".into()));
            }
            config.horizon = horizon;
        }
        Ok(config)
    };
    let (command, config) = match &cli.command {
        Command::Run { config } => (
            CommandSpec::Run {
                record_states: cli.record_states,
            },
            configured(config)?,
        ),
        Command::Sweep { config } => {
            let config = configured(config)?;
            let ratios = cli.ratios.clone().unwrap_or_else(|| DEFAULT_RATIOS.to_vec());
            if let Some(bad) = ratios.iter().find(|r| !(r.is_finite() && **r >= 0.0)) {
                return Err(AppError::Usage(format!("invalid ratio {bad}")));
            }
            if ratios.iter().any(|&r| r > 0.5) && config.epsilon.value() > DIVERGENCE_EPS_LIMIT {
                eprintln!("warning: {}", divergence_warning(config.epsilon.value()));
            }
            let replicates = cli.replicates.unwrap_or(DEFAULT_REPLICATES);
            if replicates == 0 {
                return Err(AppError::Usage("--replicates must be at least 1".into()));
            }
            (CommandSpec::Sweep { ratios, replicates }, config)
        }
        Command::Walk { config } => (
            CommandSpec::Walk {
                identity_check: cli.identity_check,
            },
            configured(config)?,
        ),
        Command::Reproduce { name } => {
            let scenario: Scenario = name.parse().map_err(|e: noisy_hk::ensemble::UnknownScenario| {
                AppError::Usage(e.to_string())
            })?;
            let config = scenario.config(
                seed.unwrap_or(0),
                cli.horizon.unwrap_or(scenario.default_horizon()),
            );
            (CommandSpec::Reproduce { scenario }, config)
        }
        Command::Certify { config } => {
            let report = certify(&configured(config)?);
            for w in &report.warnings {
                eprintln!("warning: {w}");
            }
            println!("{}", serde_json::to_string_pretty(&report)?);
            return Ok(());
        }
        Command::Replay { manifest } => {
            let report = replay(manifest, &cli.out_dir, execution)?;
            print_report(&report)?;
            return Ok(());
        }
    };
    let report = execute(&command, &config, &cli.out_dir, execution)?;
    print_report(&report)
}

fn print_report(report: &noisy_hk::CommandReport) -> Result<(), AppError> {
    for f in &report.files {
        eprintln!("wrote {}", f.display());
    }
    println!("{}", serde_json::to_string_pretty(&report.summary)?);
    Ok(())
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
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
