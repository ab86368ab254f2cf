#![allow(clippy::neg_cmp_op_on_partial_ord)]

mod commands;
mod config;
mod error;
mod report;

use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::time::{Instant, SystemTime, UNIX_EPOCH};

use clap::{Parser, Subcommand};

use config::ExperimentConfig;
use error::CliError;
use report::{OutputDir, Report};

#[derive(Debug, Parser)]
#[command(name = "kinkspec", version, about = "Kinks of variable-coefficient wave equations: construction, spectra, simulation")]
struct Cli {
    #[command(subcommand)]
    command: Command,
    /// Experiment configuration (TOML).
    #[arg(long, global = true, value_name = "PATH")]
    config: Option<PathBuf>,
    /// Output directory for the report and CSV files.
    #[arg(long, global = true, value_name = "DIR", default_value = "out")]
    out: PathBuf,
    /// Overrides the `seed` of the configuration.
    #[arg(long, global = true, value_name = "N")]
    seed: Option<u64>,
    /// Worker threads (defaults to the number of cores).
    #[arg(long, global = true, value_name = "N")]
    threads: Option<usize>,
    /// Suppress the summary on stdout.
    #[arg(long, global = true)]
    quiet: bool,
}

#[derive(Debug, Clone, Copy, Subcommand)]
enum Command {
    /// Construct the perturbed kink by the fixed-point iteration.
    Kink,
    /// Evans-function eigenvalues and threshold classification.
    Spectrum,
    /// Eigenvalue drift predictions against the perturbed spectrum.
    Drift,
    /// Threshold-resonance criterion and eigenvalues near the threshold.
    Resonance,
    /// Orbital stability experiment for the time-dependent equation.
    Simulate,
    /// Spectral-vs-oracle comparison table.
    Validate,
}

impl Command {
    fn name(self) -> &'static str {
        match self {
            Command::Kink => "kink",
            Command::Spectrum => "spectrum",
            Command::Drift => "drift",
            Command::Resonance => "resonance",
            Command::Simulate => "simulate",
            Command::Validate => "validate",
        }
    }
}

fn prepare(cli: &Cli) -> Result<(ExperimentConfig, PathBuf), CliError> {
    let path = cli.config.as_deref().ok_or_else(|| CliError::config("--config", "a configuration file is required"))?;
    let (mut cfg, base) = ExperimentConfig::load(path)?;
    if let Some(seed) = cli.seed {
        cfg.seed = seed;
    }
    cfg.validate()?;
    if matches!(cli.command, Command::Simulate) {
        cfg.validate_simulate()?;
    }
    cfg.resolve();
    if let Some(n) = cli.threads {
        if n == 0 {
            return Err(CliError::config("--threads", "must be at least 1"));
        }
        rayon::ThreadPoolBuilder::new()
            .num_threads(n)
            .build_global()
            .map_err(|e| CliError::config("--threads", e.to_string()))?;
    }
    Ok((cfg, base))
}

fn run(cli: &Cli) -> Result<(), CliError> {
    let (cfg, base) = prepare(cli)?;
    let mut out = OutputDir::create(&cli.out)?;
    let started = SystemTime::now().duration_since(UNIX_EPOCH).map(|d| d.as_secs()).unwrap_or(0);
    let clock = Instant::now();
    let base: &Path = &base;
    let outcome = match cli.command {
        Command::Kink => commands::kink(&cfg, base, &mut out),
        Command::Spectrum => commands::spectrum(&cfg, base, &mut out),
        Command::Drift => commands::drift(&cfg, base, &mut out),
        Command::Resonance => commands::resonance(&cfg, base, &mut out),
        Command::Simulate => commands::simulate(&cfg, base, &mut out),
        Command::Validate => commands::validate(&cfg, base, &mut out),
    }?;
    let pass = outcome.checks.iter().all(|c| c.pass);
    let mut files = out.files().to_vec();
    files.push("report.json".into());
    files.sort();
    let report = Report {
        command: cli.command.name(),
        version: env!("CARGO_PKG_VERSION"),
        config: &cfg,
        outputs: outcome.outputs,
        checks: &outcome.checks,
        pass,
        files,
        timing_file: "timing.json",
    };
    out.json("report.json", &report)?;
    let timing = serde_json::json!({
        "command": cli.command.name(),
        "started_unix_s": started,
        "elapsed_s": clock.elapsed().as_secs_f64(),
    });
    out.json("timing.json", &timing)?;
    if !cli.quiet {
        for line in &outcome.summary {
            println!("{line}");
        }
        print!("{}", report::table(&outcome.checks));
        println!("report written to {}", cli.out.join("report.json").display());
    }
    if pass {
        Ok(())
    } else {
        let failed = outcome.checks.iter().filter(|c| !c.pass).count();
        Err(CliError::Validation { failed, total: outcome.checks.len() })
    }
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) if !e.use_stderr() => e.exit(),
        Err(e) => {
            let _ = e.print();
            return ExitCode::from(1);
        }
    };
    match run(&cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
