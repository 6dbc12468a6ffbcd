//! Bounds CSV and metrics JSON writers.

use std::collections::BTreeMap;
use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::Path;

use serde::Serialize;

use crate::continuous_reach::{Flowpipe, TimeInterval};
use crate::error::Result;
use crate::hybrid_engine::RunObserver;
use crate::verification::{ProjectionTrace, RequirementResult};

/// Full round-trip precision (17 significant digits).
pub fn fmt_f64(v: f64) -> String {
    format!("{v:.16e}")
}

pub fn csv_header(variables: &[String]) -> String {
    let mut cols = vec!["k".to_string(), "flowpipe".into(), "t_lo".into(), "t_hi".into()];
    for v in variables {
        cols.push(format!("{v}_lo"));
        cols.push(format!("{v}_hi"));
    }
    cols.join(",")
}

fn write_row(
    w: &mut impl Write,
    k: usize,
    flowpipe: usize,
    time: TimeInterval,
    bounds: impl Iterator<Item = (f64, f64)>,
) -> std::io::Result<()> {
    write!(w, "{k},{flowpipe},{},{}", fmt_f64(time.lo), fmt_f64(time.hi))?;
    for (lo, hi) in bounds {
        write!(w, ",{},{}", fmt_f64(lo), fmt_f64(hi))?;
    }
    writeln!(w)
}

/// Streams one CSV row per reach set while the run is produced.
pub struct CsvSink {
    writer: BufWriter<File>,
    dim: usize,
    rows: usize,
    error: Option<std::io::Error>,
}

impl CsvSink {
    pub fn create(path: &Path, variables: &[String]) -> Result<Self> {
        let mut writer = BufWriter::new(File::create(path)?);
        writeln!(writer, "{}", csv_header(variables))?;
        Ok(Self {
            writer,
            dim: variables.len(),
            rows: 0,
            error: None,
        })
    }

    /// Flushes and reports the first write error, if any.
    pub fn finish(mut self) -> Result<usize> {
        if let Some(e) = self.error.take() {
            return Err(e.into());
        }
        self.writer.flush()?;
        Ok(self.rows)
    }
}

impl RunObserver for CsvSink {
    fn on_flowpipe(&mut self, index: usize, fp: &Flowpipe) {
        if self.error.is_some() {
            return;
        }
        for (k, (time, z)) in fp.iter().enumerate() {
            let bounds = (0..self.dim).map(|j| z.axis_bounds(j));
            if let Err(e) = write_row(&mut self.writer, k, index, time, bounds) {
                self.error = Some(e);
                return;
            }
            self.rows += 1;
        }
    }
}

/// Writes a projection trace as CSV; returns the number of data rows.
pub fn write_trace_csv(path: &Path, variables: &[String], trace: &ProjectionTrace) -> Result<usize> {
    let mut w = BufWriter::new(File::create(path)?);
    writeln!(w, "{}", csv_header(variables))?;
    for row in trace.rows() {
        write_row(&mut w, row.k, row.flowpipe, row.time, (0..row.dim()).map(|j| row.bounds(j)))?;
    }
    w.flush()?;
    Ok(trace.len())
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct OracleSummary {
    pub trajectories: usize,
    pub points: usize,
    pub violations: usize,
    pub uncovered: usize,
    /// Time and state of the earliest violation.
    pub first_violation: Option<(f64, Vec<f64>)>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RequirementSummary {
    #[serde(flatten)]
    pub result: RequirementResult,
    pub x0: f64,
    pub variable: String,
    pub t_c_convention: &'static str,
    pub v_r_window: &'static str,
}

/// Contents of `<name>.metrics.json`. Everything except `runtime_s` is a
/// deterministic function of the scenario.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Metrics {
    pub name: String,
    pub model: String,
    pub algorithm: String,
    pub variation: serde_json::Value,
    pub delta: f64,
    pub max_order: Option<f64>,
    pub splits: usize,
    pub flowpipes: usize,
    pub sets: usize,
    pub jumps: usize,
    pub csv_rows: Option<usize>,
    #[serde(flatten)]
    pub final_diameters: BTreeMap<String, f64>,
    pub requirement: Option<RequirementSummary>,
    pub oracle: Option<OracleSummary>,
    pub runtime_s: f64,
}

pub fn write_metrics(path: &Path, metrics: &Metrics) -> Result<()> {
    let mut w = BufWriter::new(File::create(path)?);
    serde_json::to_writer_pretty(&mut w, metrics).map_err(std::io::Error::from)?;
    writeln!(w)?;
    w.flush()?;
    Ok(())
}
