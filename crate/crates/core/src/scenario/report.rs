use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};

use serde::Serialize;
use thiserror::Error;

use crate::agent::PostCounters;
use crate::controller::{Command, Occupancy, WaterMode};
use crate::safety::Alert;
use crate::scenario::analyze::OccupancyInterval;

pub const CSV_HEADER: &str = "time_s,distance_cm,temp_c,humidity_pct,occupancy,mode,entry_id";

/// State after one tick.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ReportRow {
    pub time_s: f64,
    pub distance_cm: f64,
    pub temp_c: i32,
    pub humidity_pct: i32,
    pub occupancy: Occupancy,
    pub mode: WaterMode,
    pub entry_id: u64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Transition {
    pub time_s: f64,
    pub from_occupancy: Occupancy,
    pub to_occupancy: Occupancy,
    pub from_mode: WaterMode,
    pub to_mode: WaterMode,
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct Report {
    pub rows: Vec<ReportRow>,
    pub transitions: Vec<Transition>,
    pub alerts: Vec<Alert>,
    pub intervals: Vec<OccupancyInterval>,
    pub counters: PostCounters,
    pub commands: Vec<(f64, Command)>,
    /// Status blocks printed on display boundaries, with their tick time.
    pub console: Vec<(f64, String)>,
}

impl Report {
    pub fn distance_series(&self) -> Vec<(f64, f64)> {
        self.rows
            .iter()
            .map(|r| (r.time_s, r.distance_cm))
            .collect()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ReportFormat {
    Csv,
    Jsonl,
}

impl ReportFormat {
    pub fn extension(self) -> &'static str {
        match self {
            ReportFormat::Csv => "csv",
            ReportFormat::Jsonl => "jsonl",
        }
    }
}

#[derive(Debug, Error)]
#[error("writing {path}: {message}")]
pub struct ReportError {
    pub path: PathBuf,
    pub message: String,
}

fn io_err(path: &Path) -> impl Fn(std::io::Error) -> ReportError + '_ {
    move |e| ReportError {
        path: path.to_path_buf(),
        message: e.to_string(),
    }
}

fn csv_err(path: &Path) -> impl Fn(csv::Error) -> ReportError + '_ {
    move |e| ReportError {
        path: path.to_path_buf(),
        message: e.to_string(),
    }
}

/// Companion alerts file for a report path: same stem, `.alerts` extension.
pub fn alerts_path(path: &Path) -> PathBuf {
    path.with_extension("alerts")
}

fn write_alerts(alerts: &[Alert], path: &Path) -> Result<(), ReportError> {
    let mut w = csv::WriterBuilder::new()
        .has_headers(false)
        .from_path(path)
        .map_err(csv_err(path))?;
    for a in alerts {
        w.serialize((a.timestamp, a.kind, &a.evidence))
            .map_err(csv_err(path))?;
    }
    w.flush().map_err(io_err(path))
}

/// Writes the per-tick rows to `path` and the alerts, one per line as
/// `time_s,kind,evidence`, to the companion `.alerts` file. Returns both paths.
pub fn emit_report(
    report: &Report,
    path: &Path,
    format: ReportFormat,
) -> Result<[PathBuf; 2], ReportError> {
    match format {
        ReportFormat::Csv => {
            let mut w = csv::Writer::from_path(path).map_err(csv_err(path))?;
            if report.rows.is_empty() {
                w.write_record(CSV_HEADER.split(','))
                    .map_err(csv_err(path))?;
            }
            for row in &report.rows {
                w.serialize(row).map_err(csv_err(path))?;
            }
            w.flush().map_err(io_err(path))?;
        }
        ReportFormat::Jsonl => {
            let file = File::create(path).map_err(io_err(path))?;
            let mut w = BufWriter::new(file);
            for row in &report.rows {
                let line = serde_json::to_string(row).map_err(|e| ReportError {
                    path: path.to_path_buf(),
                    message: e.to_string(),
                })?;
                writeln!(w, "{line}").map_err(io_err(path))?;
            }
            w.flush().map_err(io_err(path))?;
        }
    }
    let alerts = alerts_path(path);
    write_alerts(&report.alerts, &alerts)?;
    Ok([path.to_path_buf(), alerts])
}
