//! Result document and CSV artifacts.

use crate::config::RunConfig;
use crate::error::CliError;
use igaodil::geometry::SampleRow;
use serde::{Deserialize, Serialize};
use std::io::Write;
use std::path::Path;

pub const SCHEMA_VERSION: u32 = 1;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DofCounts {
    pub interior: usize,
    pub total: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Recovered {
    pub kappa: Option<f64>,
    /// κ after each accepted iteration.
    pub kappa_history: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ConvergenceRow {
    pub degree: usize,
    pub elements: usize,
    pub collocation: usize,
    pub n_interior: usize,
    pub iterations: usize,
    pub solver_seconds: f64,
    pub l2_error: Option<f64>,
    pub h1_seminorm_error: Option<f64>,
    pub sqrt_loss: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ObservedRate {
    pub degree: usize,
    pub rate: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ConvergenceSummary {
    pub rows: Vec<ConvergenceRow>,
    pub rates: Vec<ObservedRate>,
}

/// Everything a run reports. Non-finite floats are stored as `null`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunResult {
    pub schema_version: u32,
    pub config: RunConfig,
    pub l2_error: Option<f64>,
    pub h1_seminorm_error: Option<f64>,
    pub initial_loss: Option<f64>,
    pub loss_history: Vec<Option<f64>>,
    pub iterations: Option<usize>,
    pub stop_reason: Option<String>,
    /// Solver phase only.
    pub wall_seconds: f64,
    pub dofs: Option<DofCounts>,
    pub collocation_points: Option<usize>,
    pub jacobian_nnz: Option<usize>,
    pub recovered: Option<Recovered>,
    pub convergence: Option<ConvergenceSummary>,
}

impl RunResult {
    pub fn new(config: RunConfig) -> Self {
        Self {
            schema_version: SCHEMA_VERSION,
            config,
            l2_error: None,
            h1_seminorm_error: None,
            initial_loss: None,
            loss_history: Vec::new(),
            iterations: None,
            stop_reason: None,
            wall_seconds: 0.0,
            dofs: None,
            collocation_points: None,
            jacobian_nnz: None,
            recovered: None,
            convergence: None,
        }
    }

    pub fn to_json(&self) -> String {
        let mut s = serde_json::to_string_pretty(self).expect("result serializes");
        s.push('\n');
        s
    }
}

pub fn finite(v: f64) -> Option<f64> {
    v.is_finite().then_some(v)
}

/// 17 significant digits, enough to round-trip any f64.
pub fn fmt_float(v: f64) -> String {
    if v.is_finite() {
        format!("{v:.16e}")
    } else {
        String::new()
    }
}

fn fmt_opt(v: Option<f64>) -> String {
    v.map(fmt_float).unwrap_or_default()
}

fn csv_bytes(header: &[&str], rows: &[Vec<String>]) -> Vec<u8> {
    let mut w = csv::WriterBuilder::new()
        .terminator(csv::Terminator::Any(b'\n'))
        .from_writer(Vec::new());
    w.write_record(header).expect("in-memory write");
    for r in rows {
        w.write_record(r).expect("in-memory write");
    }
    w.into_inner().expect("in-memory flush")
}

/// Rows plus `# observed_rate` footer lines.
pub fn convergence_csv(summary: &ConvergenceSummary) -> Vec<u8> {
    let header = [
        "degree",
        "elements",
        "collocation",
        "n_interior",
        "iterations",
        "solver_seconds",
        "l2_error",
        "h1_seminorm_error",
        "sqrt_loss",
    ];
    let rows: Vec<Vec<String>> = summary
        .rows
        .iter()
        .map(|r| {
            vec![
                r.degree.to_string(),
                r.elements.to_string(),
                r.collocation.to_string(),
                r.n_interior.to_string(),
                r.iterations.to_string(),
                fmt_float(r.solver_seconds),
                fmt_opt(r.l2_error),
                fmt_opt(r.h1_seminorm_error),
                fmt_opt(r.sqrt_loss),
            ]
        })
        .collect();
    let mut out = csv_bytes(&header, &rows);
    for r in &summary.rates {
        out.extend_from_slice(
            format!("# observed_rate degree={} rate={}\n", r.degree, fmt_opt(r.rate)).as_bytes(),
        );
    }
    out
}

pub fn kappa_history_csv(history: &[f64], losses: &[Option<f64>]) -> Vec<u8> {
    let rows: Vec<Vec<String>> = history
        .iter()
        .enumerate()
        .map(|(i, &k)| {
            vec![
                (i + 1).to_string(),
                fmt_float(k),
                fmt_opt(losses.get(i).copied().flatten()),
            ]
        })
        .collect();
    csv_bytes(&["iteration", "kappa", "loss"], &rows)
}

/// Header `x,y[,z],u`, one row per sample.
pub fn samples_csv(rows: &[SampleRow]) -> Vec<u8> {
    let d = rows.first().map_or(2, |r| r.physical.len());
    let header: Vec<&str> = ["x", "y", "z"][..d].iter().copied().chain(["u"]).collect();
    let body: Vec<Vec<String>> = rows
        .iter()
        .map(|r| {
            r.physical
                .iter()
                .map(|&v| fmt_float(v))
                .chain([fmt_float(r.value)])
                .collect()
        })
        .collect();
    csv_bytes(&header, &body)
}

pub fn write_file(path: &Path, bytes: &[u8]) -> Result<(), CliError> {
    let mut f = std::fs::File::create(path).map_err(|e| CliError::io(path, e))?;
    f.write_all(bytes).map_err(|e| CliError::io(path, e))
}
