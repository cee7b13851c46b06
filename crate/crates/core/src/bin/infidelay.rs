//! Batch runner for delay-equation scenarios.
//!
//! Exit status: 0 when every check passes, 1 when a check fails or a run
//! cannot complete, 2 when any scenario file is unreadable or malformed.

use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::Context;
use clap::{Parser, Subcommand};
use rayon::prelude::*;

use infidelay::scenario::{list_checks, load_scenario, run_scenario, write_artifacts, RunOptions, Scenario};

const OUT_ENV: &str = "INFIDELAY_OUT";

#[derive(Parser, Debug)]
#[command(name = "infidelay", version, about = "Solve and verify linear equations with infinitely many delays")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Run one scenario file, or every `*.json` file in a directory.
    Run {
        path: PathBuf,
        /// Output root; each scenario writes into `<out>/<name>`. `INFIDELAY_OUT` takes precedence.
        #[arg(long, default_value = "out")]
        out: PathBuf,
        /// Scenarios run concurrently; 0 picks the number of cores.
        #[arg(long, default_value_t = 0)]
        jobs: usize,
        /// Seed for randomized probes.
        #[arg(long, default_value_t = 0)]
        seed: u64,
        /// Factor applied to every check tolerance.
        #[arg(long, default_value_t = 1.0)]
        tolerance_scale: f64,
    },
    /// Print the check catalog as JSON.
    Checks,
    /// Print the version.
    Version,
}

fn scenario_files(path: &Path) -> anyhow::Result<Vec<PathBuf>> {
    if !path.is_dir() {
        return Ok(vec![path.to_path_buf()]);
    }
    let mut files = Vec::new();
    for entry in std::fs::read_dir(path).with_context(|| format!("reading {}", path.display()))? {
        let p = entry?.path();
        if p.extension().is_some_and(|e| e == "json") {
            files.push(p);
        }
    }
    files.sort();
    Ok(files)
}

enum Outcome {
    Pass,
    Fail,
    Schema,
}

fn run(path: &Path, out: &Path, jobs: usize, opts: RunOptions) -> anyhow::Result<ExitCode> {
    if !(opts.tolerance_scale > 0.0 && opts.tolerance_scale.is_finite()) {
        eprintln!("error: --tolerance-scale must be finite and > 0");
        return Ok(ExitCode::from(2));
    }
    let files = scenario_files(path)?;
    if files.is_empty() {
        eprintln!("error: no scenario files under {}", path.display());
        return Ok(ExitCode::from(2));
    }
    let pool = rayon::ThreadPoolBuilder::new().num_threads(jobs).build()?;
    let outcomes: Vec<Outcome> = pool.install(|| {
        files
            .par_iter()
            .map(|file| match load_scenario(file) {
                Ok(scenario) => run_one(&scenario, out, opts),
                Err(e) => {
                    eprintln!("error: {e}");
                    Outcome::Schema
                }
            })
            .collect()
    });
    let code = if outcomes.iter().any(|o| matches!(o, Outcome::Schema)) {
        2
    } else if outcomes.iter().any(|o| matches!(o, Outcome::Fail)) {
        1
    } else {
        0
    };
    Ok(ExitCode::from(code))
}

fn run_one(scenario: &Scenario, out: &Path, opts: RunOptions) -> Outcome {
    let result = run_scenario(scenario, opts);
    let report = &result.report;
    let dir = match write_artifacts(&result, out) {
        Ok(dir) => dir,
        Err(e) => {
            eprintln!("error: writing results for {}: {e}", scenario.name);
            return Outcome::Fail;
        }
    };
    let status = if report.pass { "PASS" } else { "FAIL" };
    println!("{status} {} ({} checks) -> {}", scenario.name, report.checks.len(), dir.display());
    for c in report.checks.iter().filter(|c| !c.pass) {
        match &c.error {
            Some(e) => println!("  failed {}: {e}", c.check),
            None => println!("  failed {}", c.check),
        }
    }
    if report.pass {
        Outcome::Pass
    } else {
        Outcome::Fail
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let result = match cli.command {
        Command::Run { path, out, jobs, seed, tolerance_scale } => {
            let out = std::env::var_os(OUT_ENV).map(PathBuf::from).unwrap_or(out);
            run(&path, &out, jobs, RunOptions { tolerance_scale, seed })
        }
        Command::Checks => serde_json::to_string_pretty(&list_checks())
            .map(|s| {
                println!("{s}");
                ExitCode::SUCCESS
            })
            .map_err(Into::into),
        Command::Version => {
            println!("infidelay {}", env!("CARGO_PKG_VERSION"));
            Ok(ExitCode::SUCCESS)
        }
    };
    result.unwrap_or_else(|e| {
        eprintln!("error: {e:#}");
        ExitCode::from(1)
    })
}
