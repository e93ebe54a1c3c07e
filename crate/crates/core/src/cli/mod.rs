//! Command-line front end: `run <config.json>`, `verify` and `catalog --list`.
//!
//! Result files are written under `--out-dir` with the config's `output`
//! prefix. Timings go to stderr only, so reruns produce byte-identical files.

mod config;
mod output;
mod tasks;

pub use config::{parse_config, ComplexValue, EpsilonSpec, FamilyConfig, RunConfig, Task, DEFAULT_E_MAX};
pub use output::float;
pub use tasks::{run, ErrorScale, RunReport, Verdict};

use std::path::PathBuf;
use std::process::ExitCode;
use std::time::Instant;

use clap::{Parser, Subcommand};

use crate::potentials::catalog_names;
use crate::verify::{verify_all, SuiteOptions};

#[derive(Debug, Parser)]
#[command(name = "pt-spectra", version, about = "Spectra, perturbation series and stability checks for PT-symmetric operators")]
pub struct Args {
    /// Directory for result files.
    #[arg(long, global = true, default_value = ".")]
    pub out_dir: PathBuf,
    /// Worker threads (default: all cores).
    #[arg(long, global = true)]
    pub threads: Option<usize>,
    /// Seed for randomized audits; overrides the config.
    #[arg(long, global = true)]
    pub seed: Option<u64>,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Run the task described by a JSON config.
    Run { config: PathBuf },
    /// Run the acceptance suite.
    Verify {
        /// Comma-separated criterion ids.
        #[arg(long, value_delimiter = ',')]
        only: Option<Vec<u32>>,
        /// Flip the sign inside the PT residual; the suite must then fail.
        #[arg(long)]
        inject_pt_sign_error: bool,
    },
    /// Scenario catalog.
    Catalog {
        #[arg(long)]
        list: bool,
    },
}

/// Exit status for failed tasks and acceptance runs.
pub const EXIT_FAILURE: u8 = 1;
/// Exit status for unreadable or invalid configs.
pub const EXIT_CONFIG: u8 = 2;

pub fn main_with(args: Args) -> ExitCode {
    if let Some(n) = args.threads {
        if let Err(e) = rayon::ThreadPoolBuilder::new().num_threads(n).build_global() {
            eprintln!("warning: could not configure {n} threads: {e}");
        }
    }
    match args.command {
        Command::Catalog { .. } => {
            for name in catalog_names() {
                println!("{name}");
            }
            ExitCode::SUCCESS
        }
        Command::Verify { only, inject_pt_sign_error } => {
            let report = verify_all(&SuiteOptions { only, inject_pt_sign_error });
            for w in &report.warnings {
                eprintln!("warning: {w}");
            }
            for o in &report.outcomes {
                println!("{}", o.line());
            }
            if report.all_passed() {
                ExitCode::SUCCESS
            } else {
                ExitCode::from(EXIT_FAILURE)
            }
        }
        Command::Run { config } => run_config(&config, &args.out_dir, args.seed),
    }
}

fn run_config(path: &std::path::Path, out_dir: &std::path::Path, seed: Option<u64>) -> ExitCode {
    let text = match std::fs::read_to_string(path) {
        Ok(t) => t,
        Err(e) => {
            eprintln!("error: cannot read {}: {e}", path.display());
            return ExitCode::from(EXIT_CONFIG);
        }
    };
    let cfg = match parse_config(&text) {
        Ok(c) => c,
        Err(e) => {
            eprintln!("error: {}: {e}", path.display());
            return ExitCode::from(EXIT_CONFIG);
        }
    };
    let raw: serde_json::Value = serde_json::from_str(&text).expect("already parsed");
    let start = Instant::now();
    match run(&cfg, &raw, out_dir, seed) {
        Ok(report) => {
            for w in &report.warnings {
                eprintln!("warning: {w}");
            }
            for f in &report.files {
                eprintln!("wrote {}", out_dir.join(f).display());
            }
            eprintln!("{} finished in {:.2} s", report.task, start.elapsed().as_secs_f64());
            match report.error {
                None => ExitCode::SUCCESS,
                Some(e) => {
                    eprintln!("error: {e}");
                    ExitCode::from(EXIT_FAILURE)
                }
            }
        }
        Err(crate::Error::Config(e)) => {
            eprintln!("error: config: {e}");
            ExitCode::from(EXIT_CONFIG)
        }
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(EXIT_FAILURE)
        }
    }
}
