//! Command-line scenario runner.
//!
//! `periodic-reach analyze <config>` loads a scenario, runs the analysis
//! and writes `<name>.bounds.csv` and `<name>.metrics.json`.

mod config;
mod output;
mod runner;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};

pub use config::{ModelKind, ModelParams, OutputConfig, RequirementConfig, Scenario, SimpleParams};
pub use output::{csv_header, fmt_f64, write_metrics, write_trace_csv, CsvSink, Metrics, OracleSummary, RequirementSummary};
pub use runner::{oracle_checker, run_scenario, AnalysisReport, RunFlags, ORACLE_POINTS};

use crate::error::{ReachError, Result};
use crate::hybrid_engine::Algorithm;

/// Worker threads for split-level parallelism; unset means one per core.
pub const THREADS_ENV: &str = "PERIODIC_REACH_THREADS";

/// Exit status for `--strict` runs whose requirement or oracle check failed.
pub const EXIT_STRICT_FAILURE: u8 = 3;

#[derive(Debug, Parser)]
#[command(name = "periodic-reach", version, about = "Reachability analysis of periodically switched linear systems")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Run the analysis described by a scenario file.
    Analyze(AnalyzeArgs),
}

#[derive(Debug, clap::Args)]
pub struct AnalyzeArgs {
    /// Scenario file (JSON).
    pub config: PathBuf,
    /// Override the reachability algorithm (glgm06, asb07, exact).
    #[arg(long)]
    pub algorithm: Option<Algorithm>,
    /// Override the time step in seconds.
    #[arg(long)]
    pub delta: Option<f64>,
    /// Override the maximal zonotope order.
    #[arg(long)]
    pub order: Option<f64>,
    /// Override the number of parameter splits.
    #[arg(long)]
    pub splits: Option<usize>,
    /// Exit with status 3 if the requirement is not verified or the oracle
    /// finds a violation.
    #[arg(long)]
    pub strict: bool,
    /// Check N simulated trajectories against the computed sets.
    #[arg(long, value_name = "N", default_value_t = 0)]
    pub oracle: usize,
    /// Override the output directory.
    #[arg(long)]
    pub out_dir: Option<PathBuf>,
}

impl AnalyzeArgs {
    /// Loads the scenario and applies the command-line overrides.
    pub fn scenario(&self) -> Result<Scenario> {
        let mut s = Scenario::load(&self.config)?;
        if let Some(a) = self.algorithm {
            s.algorithm = a;
        }
        if let Some(d) = self.delta {
            s.delta = d;
        }
        if let Some(q) = self.order {
            s.max_order = Some(q);
        }
        if let Some(n) = self.splits {
            s.splits = n;
        }
        if let Some(dir) = &self.out_dir {
            s.output.dir = dir.clone();
        }
        s.validate()?;
        Ok(s)
    }
}

fn configure_threads() -> Result<()> {
    let Ok(value) = std::env::var(THREADS_ENV) else {
        return Ok(());
    };
    let n: usize = value
        .trim()
        .parse()
        .map_err(|_| ReachError::input(format!("{THREADS_ENV} must be a positive integer, got `{value}`")))?;
    rayon::ThreadPoolBuilder::new()
        .num_threads(n)
        .build_global()
        .map_err(|e| ReachError::input(e.to_string()))
}

fn print_report(report: &AnalysisReport) {
    let m = &report.metrics;
    println!(
        "{}: {} flowpipes, {} sets, {} jumps, reach loop {:.3} s",
        m.name, m.flowpipes, m.sets, m.jumps, m.runtime_s
    );
    for (key, d) in &m.final_diameters {
        println!("  {key} = {d:.6e}");
    }
    if let Some(r) = &m.requirement {
        let fmt = |v: Option<f64>| v.map_or("-".to_string(), |v| format!("{v:.6e}"));
        println!(
            "  requirement |{} - {}| <= {}: verified={} t_c={} v_r={}",
            r.variable,
            r.x0,
            r.result.epsilon,
            r.result.verified,
            fmt(r.result.t_c),
            fmt(r.result.v_r)
        );
    }
    if let Some(o) = &m.oracle {
        println!(
            "  oracle: {} trajectories, {} points, {} violations, {} outside the analysed horizon",
            o.trajectories, o.points, o.violations, o.uncovered
        );
    }
}

pub fn analyze(args: &AnalyzeArgs) -> Result<ExitCode> {
    let scenario = args.scenario()?;
    let report = run_scenario(
        &scenario,
        RunFlags {
            oracle: args.oracle,
            dry_run: false,
        },
    )?;
    print_report(&report);
    let failed = report.verified() == Some(false) || !report.is_sound();
    Ok(if args.strict && failed {
        ExitCode::from(EXIT_STRICT_FAILURE)
    } else {
        ExitCode::SUCCESS
    })
}

/// Entry point of the binary.
pub fn main() -> ExitCode {
    let cli = Cli::parse();
    let result = configure_threads().and_then(|()| match &cli.command {
        Command::Analyze(args) => analyze(args),
    });
    match result {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::FAILURE
        }
    }
}
