//! Occupancy intervals from a distance time series.

use std::io::Read;

use serde::Serialize;
use thiserror::Error;

use crate::controller::{classify_occupancy, ControllerConfig, Occupancy};

#[derive(Debug, Error)]
pub enum SeriesError {
    #[error(transparent)]
    Csv(#[from] csv::Error),
    #[error("no `{0}` column in header")]
    MissingColumn(&'static str),
    #[error("row {row}: `{value}` is not a number")]
    BadNumber { row: usize, value: String },
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct OccupancyInterval {
    pub start_s: f64,
    /// Start of the next interval; `None` for the final, still-open interval.
    pub end_s: Option<f64>,
    pub occupancy: Occupancy,
    /// Distance reading that opened the interval.
    pub entry_distance_cm: f64,
}

impl OccupancyInterval {
    pub fn label(&self) -> &'static str {
        match self.occupancy {
            Occupancy::Occupied => "Shower space occupied",
            Occupancy::Empty => "Shower space empty",
        }
    }

    pub fn duration_s(&self) -> Option<f64> {
        self.end_s.map(|end| end - self.start_s)
    }
}

impl std::fmt::Display for OccupancyInterval {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self.end_s {
            Some(end) => write!(f, "[{}, {})", self.start_s, end)?,
            None => write!(f, "[{}, ...)", self.start_s)?,
        }
        write!(f, " {} Distance= {}", self.label(), self.entry_distance_cm)
    }
}

/// Replays the occupancy classifier over `(time_s, distance_cm)` samples,
/// starting from an empty shower, and returns maximal constant runs.
pub fn analyze_occupancy(
    series: &[(f64, f64)],
    cfg: &ControllerConfig<f64>,
) -> Vec<OccupancyInterval> {
    let mut intervals: Vec<OccupancyInterval> = Vec::new();
    let mut occupancy = Occupancy::Empty;
    for &(t, d) in series {
        occupancy = classify_occupancy(d, occupancy, cfg);
        match intervals.last_mut() {
            Some(open) if open.occupancy == occupancy => {}
            last => {
                if let Some(open) = last {
                    open.end_s = Some(t);
                }
                intervals.push(OccupancyInterval {
                    start_s: t,
                    end_s: None,
                    occupancy,
                    entry_distance_cm: d,
                });
            }
        }
    }
    intervals
}

/// Reads a distance series from CSV. Accepts the report layout
/// (`time_s`, `distance_cm`) or a channel export (`created_at`, `field1`).
pub fn read_distance_series<R: Read>(reader: R) -> Result<Vec<(f64, f64)>, SeriesError> {
    let mut csv = csv::Reader::from_reader(reader);
    let headers = csv.headers()?.clone();
    let find = |names: &[&str]| headers.iter().position(|h| names.contains(&h.trim()));
    let time_col = find(&["time_s", "created_at"]).ok_or(SeriesError::MissingColumn("time_s"))?;
    let dist_col =
        find(&["distance_cm", "field1"]).ok_or(SeriesError::MissingColumn("distance_cm"))?;

    let mut series = Vec::new();
    for (i, record) in csv.records().enumerate() {
        let record = record?;
        let parse = |col: usize| {
            let raw = record.get(col).unwrap_or("").trim();
            raw.parse::<f64>().map_err(|_| SeriesError::BadNumber {
                row: i + 1,
                value: raw.to_string(),
            })
        };
        series.push((parse(time_col)?, parse(dist_col)?));
    }
    Ok(series)
}
