//! Joining incidents, demographics and weather into per-cell model rows.
//!
//! A cell is `(geoid, year, time_bucket)`. Each cell's response for a crime type is
//! that type's share of the cell's incidents, so the six responses sum to 1.

use std::collections::{BTreeMap, BTreeSet};

use chrono::{Datelike, NaiveDate, NaiveDateTime, Timelike};
use serde::{Deserialize, Serialize};

use super::{CrimeIncident, GeoUnit, GeoUnitTable, IngestError, WeatherSeries};
use crate::crime::CrimeType;
use crate::geo::GeoPoint;
use crate::gwr::{GwrDataset, GwrError, GwrRow};
use crate::standardize::Standardizer;

pub const DEFAULT_MIN_SUPPORT: usize = 5;

/// Six-hour time-of-day bucket. Night is the reference level and carries no indicator.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum TimeBucket {
    Night,
    Morning,
    Afternoon,
    Evening,
}

impl TimeBucket {
    pub const ALL: [TimeBucket; 4] = [
        TimeBucket::Night,
        TimeBucket::Morning,
        TimeBucket::Afternoon,
        TimeBucket::Evening,
    ];

    /// Half-open buckets `[0,6)`, `[6,12)`, `[12,18)`, `[18,24)`.
    pub fn from_hour(hour: u32) -> Self {
        match hour {
            0..=5 => TimeBucket::Night,
            6..=11 => TimeBucket::Morning,
            12..=17 => TimeBucket::Afternoon,
            _ => TimeBucket::Evening,
        }
    }

    pub fn of(t: &NaiveDateTime) -> Self {
        Self::from_hour(t.hour())
    }

    pub fn index(self) -> usize {
        self as usize
    }

    /// `(morning, afternoon, evening)` dummies.
    pub fn indicators(self) -> [f64; 3] {
        let mut v = [0.0; 3];
        if self != TimeBucket::Night {
            v[self.index() - 1] = 1.0;
        }
        v
    }

    pub fn name(self) -> &'static str {
        match self {
            TimeBucket::Night => "night",
            TimeBucket::Morning => "morning",
            TimeBucket::Afternoon => "afternoon",
            TimeBucket::Evening => "evening",
        }
    }
}

impl std::str::FromStr for TimeBucket {
    type Err = String;
    fn from_str(s: &str) -> Result<Self, Self::Err> {
        TimeBucket::ALL
            .into_iter()
            .find(|b| b.name().eq_ignore_ascii_case(s))
            .ok_or_else(|| format!("unknown time bucket {s:?} (night, morning, afternoon, evening)"))
    }
}

/// Feature names in model-row order.
pub fn feature_names(ethnicity_names: &[String]) -> Vec<String> {
    let mut names = vec![
        "intercept".to_string(),
        "population_density".to_string(),
        "property_rate".to_string(),
    ];
    // the first category is the reference level
    names.extend(ethnicity_names.iter().skip(1).map(|n| format!("eth_{n}")));
    names.push("median_age".into());
    names.extend(["morning", "afternoon", "evening"].map(String::from));
    names.push("avg_temp_f".into());
    names
}

/// True for the intercept and the time-bucket dummies, which are not standardised.
pub fn passthrough_mask(ethnicity_names: &[String]) -> Vec<bool> {
    let p = feature_names(ethnicity_names).len();
    (0..p).map(|k| k == 0 || (p - 4..p - 1).contains(&k)).collect()
}

/// Unstandardised feature vector for a GeoUnit in a temporal context.
pub fn raw_features_for(unit: &GeoUnit, bucket: TimeBucket, avg_temp_f: f64) -> Vec<f64> {
    let mut f = Vec::with_capacity(8 + unit.ethnicity_shares.len());
    f.push(1.0);
    f.push(unit.population_density);
    f.push(unit.property_rate);
    f.extend(unit.ethnicity_shares.iter().skip(1));
    f.push(unit.median_age);
    f.extend(bucket.indicators());
    f.push(avg_temp_f);
    f
}

/// One `(geoid, year, time_bucket)` cell.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ModelRow {
    pub geoid: String,
    pub location: GeoPoint,
    pub year: i32,
    pub time_bucket: TimeBucket,
    /// Raw (unstandardised) features; see [`feature_names`].
    pub features: Vec<f64>,
    /// Indexed by [`CrimeType::index`].
    pub responses: [f64; 6],
    pub counts: [u32; 6],
    pub support: u32,
}

impl ModelRow {
    pub fn response(&self, t: CrimeType) -> f64 {
        self.responses[t.index()]
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct BuildOptions {
    pub min_support: usize,
}

impl Default for BuildOptions {
    fn default() -> Self {
        Self { min_support: DEFAULT_MIN_SUPPORT }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct CoverageReport {
    pub min_support: usize,
    pub incidents_total: usize,
    pub cells_total: usize,
    pub cells_kept: usize,
    pub cells_excluded: usize,
    pub incidents_in_excluded_cells: usize,
    /// Incident dates whose temperature was interpolated between neighbouring days.
    pub interpolated_dates: Vec<NaiveDate>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ModelRows {
    pub feature_names: Vec<String>,
    pub rows: Vec<ModelRow>,
    pub coverage: CoverageReport,
}

#[derive(Default)]
struct CellAcc {
    counts: [u32; 6],
    dates: BTreeMap<NaiveDate, u32>,
}

/// Aggregates incidents into cells. Output order is sorted by `(geoid, year, bucket)`
/// and does not depend on input order.
pub fn build_model_rows(
    incidents: &[CrimeIncident],
    geounits: &GeoUnitTable,
    weather: &WeatherSeries,
    options: BuildOptions,
) -> Result<ModelRows, IngestError> {
    let unknown: BTreeSet<&str> = incidents
        .iter()
        .filter(|i| geounits.get(&i.geoid).is_none())
        .map(|i| i.geoid.as_str())
        .collect();
    if !unknown.is_empty() {
        return Err(IngestError::UnknownGeoIds(unknown.into_iter().map(String::from).collect()));
    }

    let mut cells: BTreeMap<(&str, i32, TimeBucket), CellAcc> = BTreeMap::new();
    for inc in incidents {
        let key = (inc.geoid.as_str(), inc.occurred_at.year(), TimeBucket::of(&inc.occurred_at));
        let cell = cells.entry(key).or_default();
        cell.counts[inc.crime_type.index()] += 1;
        *cell.dates.entry(inc.occurred_at.date()).or_default() += 1;
    }

    let mut interpolated = BTreeSet::new();
    let mut rows = Vec::new();
    let mut excluded = 0usize;
    let mut excluded_incidents = 0usize;
    for ((geoid, year, bucket), cell) in &cells {
        // Weather must cover every incident date, including those in cells
        // that end up excluded.
        let mut temp_sum = 0.0;
        for (date, n) in &cell.dates {
            let (t, interp) = weather.temp_on(*date)?;
            if interp {
                interpolated.insert(*date);
            }
            temp_sum += t * f64::from(*n);
        }
        let support: u32 = cell.counts.iter().sum();
        if (support as usize) < options.min_support {
            excluded += 1;
            excluded_incidents += support as usize;
            continue;
        }
        let unit = geounits.get(geoid).expect("geoids checked above");
        let total = f64::from(support);
        rows.push(ModelRow {
            geoid: geoid.to_string(),
            location: unit.centroid,
            year: *year,
            time_bucket: *bucket,
            features: raw_features_for(unit, *bucket, temp_sum / total),
            responses: cell.counts.map(|c| f64::from(c) / total),
            counts: cell.counts,
            support,
        });
    }

    Ok(ModelRows {
        feature_names: feature_names(&geounits.ethnicity_names),
        coverage: CoverageReport {
            min_support: options.min_support,
            incidents_total: incidents.len(),
            cells_total: cells.len(),
            cells_kept: rows.len(),
            cells_excluded: excluded,
            incidents_in_excluded_cells: excluded_incidents,
            interpolated_dates: interpolated.into_iter().collect(),
        },
        rows,
    })
}

/// Standardiser fitted on the given (training) rows.
pub fn standardizer_for<'a>(
    feature_names: &[String],
    ethnicity_names: &[String],
    rows: impl IntoIterator<Item = &'a ModelRow>,
) -> Standardizer {
    Standardizer::fit(
        feature_names.to_vec(),
        &passthrough_mask(ethnicity_names),
        rows.into_iter().map(|r| r.features.as_slice()),
    )
}

/// GWR training data for one crime type, with standardised features and GeoID labels.
pub fn to_dataset<'a>(
    rows: impl IntoIterator<Item = &'a ModelRow>,
    crime_type: CrimeType,
    standardizer: &Standardizer,
) -> Result<GwrDataset, GwrError> {
    let rows = rows
        .into_iter()
        .map(|r| {
            GwrRow::new(r.location, standardizer.apply(&r.features), r.response(crime_type))
                .with_geoid(r.geoid.clone())
        })
        .collect();
    GwrDataset::new(standardizer.feature_names.clone(), rows)
}
