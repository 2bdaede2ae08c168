//! Descriptive statistics over incidents: when crime happens, at what
//! temperatures, and how features co-vary with response shares.

use std::io::Write;

use chrono::{Datelike, Timelike};
use serde::Serialize;
use thiserror::Error;

use crate::crime::CrimeType;
use crate::ingest::{CrimeIncident, IngestError, ModelRow, WeatherSeries};

/// Police shift-change hours.
pub const SHIFT_CHANGE_HOURS: [usize; 3] = [7, 15, 23];
pub const DEFAULT_TEMPERATURE_BIN_F: f64 = 5.0;

const MONTH_LABELS: [&str; 12] = [
    "Jan", "Feb", "Mar", "Apr", "May", "Jun", "Jul", "Aug", "Sep", "Oct", "Nov", "Dec",
];

#[derive(Debug, Error)]
pub enum StatsError {
    #[error("no incidents left after filtering")]
    EmptyAfterFilter,
    #[error("input is constant; correlation undefined")]
    ConstantInput,
    #[error("length mismatch: {0} vs {1}")]
    LengthMismatch(usize, usize),
    #[error("need at least 2 samples, got {0}")]
    TooShort(usize),
    #[error("expected a {expected}-bin histogram, got {got}")]
    WrongBins { expected: usize, got: usize },
    #[error("unknown feature {0:?}")]
    UnknownFeature(String),
    #[error("bin width must be positive, got {0}")]
    BinWidth(f64),
    #[error(transparent)]
    Weather(#[from] IngestError),
    #[error("csv: {0}")]
    Csv(#[from] csv::Error),
    #[error("io: {0}")]
    Io(#[from] std::io::Error),
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Histogram {
    pub labels: Vec<String>,
    /// Lower edges plus the final upper edge, for numeric bins only.
    pub bin_edges: Option<Vec<f64>>,
    pub counts: Vec<u64>,
    pub percentages: Vec<f64>,
    pub crime_filter: Option<CrimeType>,
}

impl Histogram {
    fn from_counts(
        labels: Vec<String>,
        bin_edges: Option<Vec<f64>>,
        counts: Vec<u64>,
        crime_filter: Option<CrimeType>,
    ) -> Self {
        let total: u64 = counts.iter().sum();
        let percentages = counts
            .iter()
            .map(|&c| if total > 0 { 100.0 * c as f64 / total as f64 } else { 0.0 })
            .collect();
        Self { labels, bin_edges, counts, percentages, crime_filter }
    }

    pub fn total(&self) -> u64 {
        self.counts.iter().sum()
    }

    /// Writes `bin_label,count,percentage` rows.
    pub fn write_csv<W: Write>(&self, out: W) -> Result<(), StatsError> {
        let mut w = csv::Writer::from_writer(out);
        w.write_record(["bin_label", "count", "percentage"])?;
        for ((l, c), p) in self.labels.iter().zip(&self.counts).zip(&self.percentages) {
            w.write_record([l.clone(), c.to_string(), p.to_string()])?;
        }
        w.flush()?;
        Ok(())
    }
}

fn filtered(incidents: &[CrimeIncident], filter: Option<CrimeType>) -> Result<Vec<&CrimeIncident>, StatsError> {
    let v: Vec<_> = incidents
        .iter()
        .filter(|i| filter.is_none_or(|t| i.crime_type == t))
        .collect();
    if v.is_empty() {
        return Err(StatsError::EmptyAfterFilter);
    }
    Ok(v)
}

/// 24 bins; bin `k` counts incidents whose hour is `k`.
pub fn hour_histogram(incidents: &[CrimeIncident], filter: Option<CrimeType>) -> Result<Histogram, StatsError> {
    let mut counts = vec![0u64; 24];
    for i in filtered(incidents, filter)? {
        counts[i.occurred_at.hour() as usize] += 1;
    }
    let labels = (0..24).map(|h| format!("{h:02}")).collect();
    Ok(Histogram::from_counts(labels, None, counts, filter))
}

/// 12 bins, January first.
pub fn month_histogram(incidents: &[CrimeIncident], filter: Option<CrimeType>) -> Result<Histogram, StatsError> {
    let mut counts = vec![0u64; 12];
    for i in filtered(incidents, filter)? {
        counts[i.occurred_at.month0() as usize] += 1;
    }
    let labels = MONTH_LABELS.iter().map(|s| s.to_string()).collect();
    Ok(Histogram::from_counts(labels, None, counts, filter))
}

/// Fixed-width bins aligned to multiples of `bin_width_f`, spanning the observed
/// range. Each incident takes its date's average temperature.
pub fn temperature_histogram(
    incidents: &[CrimeIncident],
    weather: &WeatherSeries,
    filter: Option<CrimeType>,
    bin_width_f: f64,
) -> Result<Histogram, StatsError> {
    if !(bin_width_f > 0.0 && bin_width_f.is_finite()) {
        return Err(StatsError::BinWidth(bin_width_f));
    }
    let temps = filtered(incidents, filter)?
        .iter()
        .map(|i| weather.temp_on(i.occurred_at.date()).map(|(t, _)| t))
        .collect::<Result<Vec<f64>, _>>()?;
    let lo = temps.iter().copied().fold(f64::INFINITY, f64::min);
    let hi = temps.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let start = (lo / bin_width_f).floor() * bin_width_f;
    let bins = ((hi - start) / bin_width_f).floor() as usize + 1;
    let mut counts = vec![0u64; bins];
    for t in &temps {
        let k = (((t - start) / bin_width_f).floor() as usize).min(bins - 1);
        counts[k] += 1;
    }
    let edges: Vec<f64> = (0..=bins).map(|k| start + k as f64 * bin_width_f).collect();
    let labels = edges.windows(2).map(|w| format!("{}..{}", w[0], w[1])).collect();
    Ok(Histogram::from_counts(labels, Some(edges), counts, filter))
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct MonthProfile {
    /// 1 = January.
    pub month: u32,
    pub crime_percentage: f64,
    /// Mean daily temperature over the weather table's days in this month.
    pub mean_temp_f: Option<f64>,
}

/// Crime share per month paired with that month's mean temperature.
pub fn month_temperature_profile(
    incidents: &[CrimeIncident],
    weather: &WeatherSeries,
) -> Result<Vec<MonthProfile>, StatsError> {
    let hist = month_histogram(incidents, None)?;
    let clim = weather.monthly_climatology();
    Ok((0..12)
        .map(|m| MonthProfile {
            month: m as u32 + 1,
            crime_percentage: hist.percentages[m],
            mean_temp_f: clim[m],
        })
        .collect())
}

/// Strict local maxima among occupied bins. A plateau that rises above both
/// neighbours is reported once, at its first bin.
pub fn modes(hist: &Histogram) -> Vec<usize> {
    let c = &hist.counts;
    let mut out = Vec::new();
    let mut i = 0;
    while i < c.len() {
        let mut j = i;
        while j + 1 < c.len() && c[j + 1] == c[i] {
            j += 1;
        }
        let left_ok = i == 0 || c[i - 1] < c[i];
        let right_ok = j + 1 == c.len() || c[j + 1] < c[i];
        if c[i] > 0 && left_ok && right_ok {
            out.push(i);
        }
        i = j + 1;
    }
    out
}

/// Sample Pearson correlation, clamped to `[-1, 1]`.
pub fn pearson(x: &[f64], y: &[f64]) -> Result<f64, StatsError> {
    if x.len() != y.len() {
        return Err(StatsError::LengthMismatch(x.len(), y.len()));
    }
    if x.len() < 2 {
        return Err(StatsError::TooShort(x.len()));
    }
    if x.iter().all(|v| *v == x[0]) || y.iter().all(|v| *v == y[0]) {
        return Err(StatsError::ConstantInput);
    }
    let n = x.len() as f64;
    let mx = x.iter().sum::<f64>() / n;
    let my = y.iter().sum::<f64>() / n;
    let (mut sxy, mut sxx, mut syy) = (0.0, 0.0, 0.0);
    for (a, b) in x.iter().zip(y) {
        let (da, db) = (a - mx, b - my);
        sxy += da * db;
        sxx += da * da;
        syy += db * db;
    }
    if sxx == 0.0 || syy == 0.0 {
        return Err(StatsError::ConstantInput);
    }
    Ok((sxy / (sxx.sqrt() * syy.sqrt())).clamp(-1.0, 1.0))
}

/// 24-vector with 1 at the shift-change hours.
pub fn shift_change_indicator() -> Vec<f64> {
    (0..24)
        .map(|h| if SHIFT_CHANGE_HOURS.contains(&h) { 1.0 } else { 0.0 })
        .collect()
}

/// Correlation between hourly crime percentages and the shift-change indicator.
pub fn shift_change_correlation(hour_hist: &Histogram) -> Result<f64, StatsError> {
    if hour_hist.percentages.len() != 24 {
        return Err(StatsError::WrongBins { expected: 24, got: hour_hist.percentages.len() });
    }
    pearson(&hour_hist.percentages, &shift_change_indicator())
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct FeatureCorrelation {
    pub feature: String,
    pub crime_type: CrimeType,
    pub r: f64,
    /// `(feature value, response share)` per row.
    pub pairs: Vec<(f64, f64)>,
}

impl FeatureCorrelation {
    pub fn write_pairs_csv<W: Write>(&self, out: W) -> Result<(), StatsError> {
        let mut w = csv::Writer::from_writer(out);
        w.write_record([self.feature.as_str(), self.crime_type.key()])?;
        for (x, y) in &self.pairs {
            w.write_record([x.to_string(), y.to_string()])?;
        }
        w.flush()?;
        Ok(())
    }
}

/// Pearson r between a named raw feature and one crime type's response share.
pub fn feature_response_correlation(
    rows: &[ModelRow],
    feature_names: &[String],
    feature: &str,
    crime_type: CrimeType,
) -> Result<FeatureCorrelation, StatsError> {
    let k = feature_names
        .iter()
        .position(|n| n == feature)
        .ok_or_else(|| StatsError::UnknownFeature(feature.to_string()))?;
    let pairs: Vec<(f64, f64)> = rows
        .iter()
        .map(|r| (r.features[k], r.response(crime_type)))
        .collect();
    let (x, y): (Vec<f64>, Vec<f64>) = pairs.iter().copied().unzip();
    let r = pearson(&x, &y)?;
    Ok(FeatureCorrelation { feature: feature.to_string(), crime_type, r, pairs })
}
