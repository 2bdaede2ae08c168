//! Source-data ingestion: incidents, GeoID demographics and daily weather, joined
//! into per-cell model rows.
//!
//! Every parser is single-pass and never drops a row silently: a row either
//! becomes a record or a [`Reject`] carrying its line number and the reason.

mod columns;
mod crimes;
mod demographics;
mod rows;
mod weather;

use std::io::Write;

use thiserror::Error;

pub use columns::{ColumnConfig, CrimeColumns, DemographicColumns, WeatherColumns};
pub use crimes::{parse_crimes, CrimeIncident};
pub use demographics::{parse_demographics, GeoUnit, GeoUnitTable};
pub use rows::{
    build_model_rows, feature_names, passthrough_mask, raw_features_for, standardizer_for, to_dataset, BuildOptions,
    CoverageReport, ModelRow, ModelRows, TimeBucket, DEFAULT_MIN_SUPPORT,
};
pub use weather::{parse_weather, WeatherDay, WeatherSeries};

#[derive(Debug, Error)]
pub enum IngestError {
    #[error("input is empty (no header row)")]
    EmptyInput,
    #[error("header is missing required columns: {}", .missing.join(", "))]
    MalformedHeader { missing: Vec<String> },
    #[error("csv: {0}")]
    Csv(#[from] csv::Error),
    #[error("io: {0}")]
    Io(#[from] std::io::Error),
    #[error("column config: {0}")]
    Config(String),
    #[error("incidents reference GeoIDs absent from the demographics table: {}", .0.join(", "))]
    UnknownGeoIds(Vec<String>),
    #[error("no weather record on or around {0}; cannot interpolate at the range ends")]
    WeatherGap(chrono::NaiveDate),
}

/// A row diverted from a parser, with its 1-based line number in the source.
#[derive(Debug, Clone, PartialEq, Eq, serde::Serialize)]
pub struct Reject {
    pub line_no: u64,
    pub reason: String,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ParseOutcome<T> {
    pub records: Vec<T>,
    pub rejects: Vec<Reject>,
    /// Data rows seen, excluding the header.
    pub total_rows: usize,
}

impl<T> ParseOutcome<T> {
    pub(crate) fn new() -> Self {
        Self { records: Vec::new(), rejects: Vec::new(), total_rows: 0 }
    }

    pub(crate) fn reject(&mut self, line_no: u64, reason: impl Into<String>) {
        self.rejects.push(Reject { line_no, reason: reason.into() });
    }
}

/// Writes rejects as `line_no,reason` CSV.
pub fn write_rejects<W: Write>(rejects: &[Reject], out: W) -> Result<(), IngestError> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(["line_no", "reason"])?;
    for r in rejects {
        w.write_record([r.line_no.to_string(), r.reason.clone()])?;
    }
    w.flush()?;
    Ok(())
}

/// Opens a CSV reader and resolves the named columns to positions.
pub(crate) fn open_csv<R: std::io::Read>(
    input: R,
    required: &[&str],
) -> Result<(csv::Reader<R>, Vec<usize>, csv::StringRecord), IngestError> {
    let mut reader = csv::ReaderBuilder::new()
        .flexible(true)
        .trim(csv::Trim::All)
        .from_reader(input);
    let header = reader.headers()?.clone();
    if header.is_empty() || (header.len() == 1 && header[0].is_empty()) {
        return Err(IngestError::EmptyInput);
    }
    let mut positions = Vec::with_capacity(required.len());
    let mut missing = Vec::new();
    for name in required {
        match header.iter().position(|h| h == *name) {
            Some(i) => positions.push(i),
            None => missing.push(name.to_string()),
        }
    }
    if !missing.is_empty() {
        return Err(IngestError::MalformedHeader { missing });
    }
    Ok((reader, positions, header))
}

pub(crate) fn line_of(record: &csv::StringRecord) -> u64 {
    record.position().map_or(0, |p| p.line())
}

pub(crate) fn parse_f64(s: &str, what: &str) -> Result<f64, String> {
    let v: f64 = s.parse().map_err(|_| format!("unparseable {what} {s:?}"))?;
    if v.is_finite() {
        Ok(v)
    } else {
        Err(format!("non-finite {what}"))
    }
}
