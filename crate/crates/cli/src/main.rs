//! `symset`: simulate anonymized systems, fit the estimators and reproduce
//! the reference experiments.
//!
//! Exit codes: 0 when every target is met, 1 on a target miss or a run
//! failure, 2 on a usage or configuration error.

mod config;
mod experiment;
mod reproduce;

use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::time::Instant;

use anyhow::{bail, Result};
use clap::{Args, Parser, Subcommand};

use config::{ExperimentSpec, RawConfig};
use reproduce::{Overrides, Target};

#[derive(Parser)]
#[command(name = "symset", version, about = "Parameter-set estimation from anonymized observations")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Args)]
struct Source {
    /// TOML experiment file.
    #[arg(long, value_name = "PATH", required_unless_present = "preset")]
    config: Option<PathBuf>,
    /// Built-in experiment instead of a file.
    #[arg(long, conflicts_with = "config", value_parser = ["example1", "example2", "example3", "example4"])]
    preset: Option<String>,
    #[command(flatten)]
    run: RunArgs,
}

#[derive(Args)]
struct RunArgs {
    /// Overrides the configured seed.
    #[arg(long, value_name = "N")]
    seed: Option<u64>,
    /// Overrides the configured number of trials.
    #[arg(long, value_name = "N")]
    trials: Option<usize>,
    /// Output directory.
    #[arg(long, value_name = "DIR", default_value = "out")]
    out: PathBuf,
}

#[derive(Subcommand)]
enum Command {
    /// Write the simulated observation records of every trial as CSV.
    Simulate {
        #[command(flatten)]
        source: Source,
        /// Include the hidden permutation, noise and true parameters.
        #[arg(long)]
        reveal: bool,
    },
    /// Run the configured filters and write logs, results and a summary.
    Fit {
        #[command(flatten)]
        source: Source,
    },
    /// Asymptotic covariance and MAP anonymity of the configured system.
    Analyze {
        #[command(flatten)]
        source: Source,
    },
    /// Run a reference experiment and check it against its targets.
    Reproduce {
        target: Target,
        #[command(flatten)]
        run: RunArgs,
    },
}

fn load(source: &Source) -> Result<ExperimentSpec> {
    let parsed: Result<RawConfig> = match (&source.config, &source.preset) {
        (Some(path), _) => config::load(path),
        (None, Some(name)) => config::preset(name),
        (None, None) => Err(anyhow::anyhow!("one of --config or --preset is required")),
    };
    let mut raw = parsed?;
    if let Some(s) = source.run.seed {
        raw.seed = s;
    }
    if let Some(t) = source.run.trials {
        raw.trials = t;
    }
    raw.into_spec()
}

fn simulate(spec: &ExperimentSpec, reveal: bool, out: &Path) -> Result<bool> {
    std::fs::create_dir_all(out)?;
    experiment::write_trajectories(spec, reveal, out)?;
    println!("wrote {} trajectories of {} steps to {}", spec.trials, spec.horizon, out.display());
    Ok(true)
}

fn fit(spec: &ExperimentSpec, out: &Path) -> Result<bool> {
    if spec.filters.is_empty() {
        bail!("the configuration has no filters");
    }
    let (table, logged) = experiment::run_experiment(spec)?;
    experiment::emit_outputs(spec, &table, &logged, &[], out)?;
    let mut ok = true;
    for f in &table.filters {
        let failed = f.failed();
        ok &= failed == 0;
        match &f.mean {
            Some(m) => println!("{}: mean estimate {m:.4?} ({failed} of {} trials failed)", f.label, f.rows.len()),
            None => println!("{}: every trial failed", f.label),
        }
    }
    println!("truth {:?}; outputs in {}", table.truth, out.display());
    Ok(ok)
}

fn analyze(spec: &ExperimentSpec, out: &Path) -> std::result::Result<bool, Failure> {
    let Some(value) = reproduce::analyze(spec).map_err(Failure::Run)? else {
        return Err(Failure::Config(anyhow::anyhow!(
            "nothing to analyze: covariance needs D = 1 with Gaussian input, anonymity needs identity input \
             and L <= {}",
            symset::analysis::MAX_STATES_L
        )));
    };
    let run = || -> Result<()> {
        std::fs::create_dir_all(out)?;
        let text = serde_json::to_string_pretty(&value)?;
        std::fs::write(out.join("analysis.json"), &text)?;
        println!("{text}");
        Ok(())
    };
    run().map_err(Failure::Run)?;
    Ok(true)
}

fn reproduce(target: Target, run: &RunArgs) -> Result<bool> {
    let start = Instant::now();
    let checks = reproduce::run(target, Overrides { seed: run.seed, trials: run.trials }, &run.out)?;
    for c in &checks {
        let mark = if c.summary.pass { "PASS" } else { "FAIL" };
        println!("target {} [{mark}]: {}", c.summary.experiment, c.detail);
    }
    let passed = checks.iter().filter(|c| c.summary.pass).count();
    println!(
        "{}: {passed}/{} targets met in {:.1} s; outputs in {}",
        target.name(),
        checks.len(),
        start.elapsed().as_secs_f64(),
        run.out.display()
    );
    Ok(passed == checks.len())
}

enum Failure {
    Config(anyhow::Error),
    Run(anyhow::Error),
}

fn dispatch(cli: Cli) -> std::result::Result<bool, Failure> {
    let spec_of = |s: &Source| load(s).map_err(Failure::Config);
    match cli.command {
        Command::Simulate { source, reveal } => simulate(&spec_of(&source)?, reveal, &source.run.out).map_err(Failure::Run),
        Command::Fit { source } => fit(&spec_of(&source)?, &source.run.out).map_err(Failure::Run),
        Command::Analyze { source } => analyze(&spec_of(&source)?, &source.run.out),
        Command::Reproduce { target, run } => reproduce(target, &run).map_err(Failure::Run),
    }
}

fn main() -> ExitCode {
    match dispatch(Cli::parse()) {
        Ok(true) => ExitCode::SUCCESS,
        Ok(false) => ExitCode::from(1),
        Err(Failure::Run(e)) => {
            eprintln!("error: {e:#}");
            ExitCode::from(1)
        }
        Err(Failure::Config(e)) => {
            eprintln!("configuration error: {e:#}");
            ExitCode::from(2)
        }
    }
}
