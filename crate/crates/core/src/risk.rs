//! Deployable model bundle and the location/time risk query engine.
//!
//! A bundle holds one fitted model per crime type together with everything a
//! query needs to rebuild a feature vector: the GeoUnit table, standardisation
//! constants, monthly temperature climatology, and the standardised training
//! rows (refitting at an arbitrary point needs the training data).

use std::collections::BTreeMap;
use std::path::Path;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::crime::CrimeType;
use crate::experiment::{heatmap, BandwidthChoice, ExperimentError, HeatmapGrid};
use crate::geo::{BBox, GeoPoint};
use crate::gwr::{
    default_bandwidth_grid, fit, select_bandwidth, FittedGwr, GwrDataset, GwrError, GwrRow, PredictMode,
};
use crate::ingest::{raw_features_for, standardizer_for, to_dataset, GeoUnit, GeoUnitTable, ModelRows, TimeBucket, WeatherSeries};
use crate::kernel::KernelSpec;
use crate::standardize::Standardizer;

pub const BUNDLE_FORMAT_VERSION: u32 = 1;
pub const DEFAULT_GEOID_RADIUS_KM: f64 = 1.0;

#[derive(Debug, Error)]
pub enum RiskError {
    #[error("invalid query: {0}")]
    InvalidQuery(String),
    #[error("location is outside the model's support: {0}")]
    OutsideSupport(GwrError),
    #[error("no temperature supplied and no climatology for month {0}")]
    NoClimatology(u32),
    #[error("bundle: {0}")]
    Bundle(String),
    #[error(transparent)]
    Gwr(#[from] GwrError),
    #[error(transparent)]
    Experiment(#[from] ExperimentError),
    #[error("io: {0}")]
    Io(#[from] std::io::Error),
}

/// A standardised training cell shared by all six crime-type models.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrainingRow {
    pub geoid: String,
    pub location: GeoPoint,
    pub features: Vec<f64>,
    pub responses: [f64; 6],
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ModelBundle {
    pub version: u32,
    pub model_version: String,
    /// Training year, or `None` when all years were pooled.
    pub year: Option<i32>,
    pub feature_names: Vec<String>,
    pub standardizer: Standardizer,
    pub geounits: GeoUnitTable,
    /// Mean daily temperature per calendar month, January first.
    pub climatology: [Option<f64>; 12],
    pub training: Vec<TrainingRow>,
    pub models: BTreeMap<CrimeType, FittedGwr>,
}

/// FNV-1a over the serialised models; stable across runs and platforms.
fn content_version(models: &BTreeMap<CrimeType, FittedGwr>) -> String {
    let mut h: u64 = 0xcbf2_9ce4_8422_2325;
    for (t, m) in models {
        for b in t.key().bytes().chain(m.to_json().into_bytes()) {
            h ^= u64::from(b);
            h = h.wrapping_mul(0x0100_0000_01b3);
        }
    }
    format!("gwr-{h:016x}")
}

impl ModelBundle {
    /// Fits one model per crime type on `rows` (optionally restricted to `year`).
    /// Standardisation constants come from the rows used.
    pub fn fit(
        rows: &ModelRows,
        geounits: &GeoUnitTable,
        weather: &WeatherSeries,
        year: Option<i32>,
        bandwidth: &BandwidthChoice,
    ) -> Result<Self, RiskError> {
        let selected: Vec<_> = rows
            .rows
            .iter()
            .filter(|r| year.is_none_or(|y| r.year == y))
            .collect();
        if selected.is_empty() {
            return Err(RiskError::Bundle(format!("no model rows for year {year:?}")));
        }
        let standardizer = standardizer_for(&rows.feature_names, &geounits.ethnicity_names, selected.iter().copied());
        let mut models = BTreeMap::new();
        for t in CrimeType::ALL {
            let data = to_dataset(selected.iter().copied(), t, &standardizer)?;
            let h = match bandwidth {
                BandwidthChoice::Fixed(h) => *h,
                BandwidthChoice::Grid(g) => select_bandwidth(&data, g)?.best_h,
                BandwidthChoice::AutoGrid => select_bandwidth(&data, &default_bandwidth_grid(&data))?.best_h,
            };
            models.insert(t, fit(&data, &KernelSpec::gaussian(h)?)?);
        }
        let training = selected
            .iter()
            .map(|r| TrainingRow {
                geoid: r.geoid.clone(),
                location: r.location,
                features: standardizer.apply(&r.features),
                responses: r.responses,
            })
            .collect();
        Ok(Self {
            version: BUNDLE_FORMAT_VERSION,
            model_version: content_version(&models),
            year,
            feature_names: rows.feature_names.clone(),
            standardizer,
            geounits: geounits.clone(),
            climatology: weather.monthly_climatology(),
            training,
            models,
        })
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string(self).expect("bundle serialisation cannot fail")
    }

    pub fn from_json(s: &str) -> Result<Self, RiskError> {
        let b: Self = serde_json::from_str(s).map_err(|e| RiskError::Bundle(e.to_string()))?;
        if b.version != BUNDLE_FORMAT_VERSION {
            return Err(RiskError::Bundle(format!("unsupported bundle version {}", b.version)));
        }
        if b.models.len() != CrimeType::ALL.len() {
            return Err(RiskError::Bundle("bundle must hold a model for each crime type".into()));
        }
        Ok(b)
    }

    pub fn load(path: &Path) -> Result<Self, RiskError> {
        Self::from_json(&std::fs::read_to_string(path)?)
    }

    /// Standardised feature vector for a GeoUnit in a temporal context.
    pub fn features_for(&self, unit: &GeoUnit, bucket: TimeBucket, avg_temp_f: f64) -> Vec<f64> {
        self.standardizer.apply(&raw_features_for(unit, bucket, avg_temp_f))
    }

    fn dataset(&self, t: CrimeType) -> Result<GwrDataset, GwrError> {
        let rows = self
            .training
            .iter()
            .map(|r| GwrRow::new(r.location, r.features.clone(), r.responses[t.index()]).with_geoid(r.geoid.clone()))
            .collect();
        GwrDataset::new(self.feature_names.clone(), rows)
    }
}

/// A "where and when" question.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RiskQuery {
    pub location: GeoPoint,
    pub hour: u32,
    /// 1 = January.
    pub month: u32,
    pub temp_f: Option<f64>,
}

impl RiskQuery {
    pub fn new(lat: f64, lon: f64, hour: u32, month: u32, temp_f: Option<f64>) -> Result<Self, RiskError> {
        let location = GeoPoint::new(lon, lat).map_err(|e| RiskError::InvalidQuery(e.to_string()))?;
        if hour > 23 {
            return Err(RiskError::InvalidQuery(format!("hour {hour} outside 0..=23")));
        }
        if !(1..=12).contains(&month) {
            return Err(RiskError::InvalidQuery(format!("month {month} outside 1..=12")));
        }
        if let Some(t) = temp_f {
            if !(-60.0..=130.0).contains(&t) {
                return Err(RiskError::InvalidQuery(format!("temp_f {t} outside [-60, 130]")));
            }
        }
        Ok(Self { location, hour, month, temp_f })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ModeUsed {
    RefitAtPoint,
    GeoidAverage,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RiskReport {
    /// Clamped to `[0, 1]`.
    pub probabilities: BTreeMap<CrimeType, f64>,
    /// Unclamped model outputs.
    pub raw: BTreeMap<CrimeType, f64>,
    /// Set when the query fell within the GeoID radius of a centroid.
    pub geoid: Option<String>,
    pub mode: ModeUsed,
    pub temp_f: f64,
    pub model_version: String,
}

/// Immutable query engine over a loaded bundle. Safe to share across threads.
#[derive(Debug, Clone)]
pub struct RiskEngine {
    bundle: ModelBundle,
    datasets: BTreeMap<CrimeType, GwrDataset>,
    geoid_radius_km: f64,
}

impl RiskEngine {
    pub fn new(bundle: ModelBundle) -> Result<Self, RiskError> {
        if bundle.geounits.units.is_empty() {
            return Err(RiskError::Bundle("bundle has no GeoUnits".into()));
        }
        let datasets = CrimeType::ALL
            .into_iter()
            .map(|t| bundle.dataset(t).map(|d| (t, d)))
            .collect::<Result<_, _>>()?;
        Ok(Self { bundle, datasets, geoid_radius_km: DEFAULT_GEOID_RADIUS_KM })
    }

    pub fn with_geoid_radius(mut self, km: f64) -> Self {
        self.geoid_radius_km = km;
        self
    }

    /// Replaces the bundle's climatology, e.g. from a separate file.
    pub fn with_climatology(mut self, climatology: [Option<f64>; 12]) -> Self {
        self.bundle.climatology = climatology;
        self
    }

    pub fn bundle(&self) -> &ModelBundle {
        &self.bundle
    }

    pub fn model_version(&self) -> &str {
        &self.bundle.model_version
    }

    pub fn locals_count(&self) -> usize {
        self.bundle.models.values().next().map_or(0, |m| m.locals().len())
    }

    pub fn training_dataset(&self, t: CrimeType) -> &GwrDataset {
        &self.datasets[&t]
    }

    pub fn assess(&self, q: &RiskQuery) -> Result<RiskReport, RiskError> {
        let (unit, d) = self
            .bundle
            .geounits
            .nearest(&q.location)
            .expect("constructor checked for GeoUnits");
        let temp_f = match q.temp_f {
            Some(t) => t,
            None => self.bundle.climatology[(q.month - 1) as usize].ok_or(RiskError::NoClimatology(q.month))?,
        };
        let features = self.bundle.features_for(unit, TimeBucket::from_hour(q.hour), temp_f);

        let within = d <= self.geoid_radius_km;
        let any_model = self.bundle.models.values().next().expect("bundle has models");
        let (mode, mode_used) = if within && !any_model.locals_for_geoid(&unit.geoid).is_empty() {
            (PredictMode::GeoidAverage(unit.geoid.clone()), ModeUsed::GeoidAverage)
        } else {
            (PredictMode::RefitAtPoint, ModeUsed::RefitAtPoint)
        };

        let mut raw = BTreeMap::new();
        let mut probabilities = BTreeMap::new();
        for (t, model) in &self.bundle.models {
            let v = model
                .predict(&self.datasets[t], &q.location, &features, &mode)
                .map_err(|e| match e {
                    GwrError::DegenerateFit { .. } => RiskError::OutsideSupport(e),
                    other => RiskError::Gwr(other),
                })?;
            raw.insert(*t, v);
            probabilities.insert(*t, v.clamp(0.0, 1.0));
        }
        Ok(RiskReport {
            probabilities,
            raw,
            geoid: within.then(|| unit.geoid.clone()),
            mode: mode_used,
            temp_f,
            model_version: self.bundle.model_version.clone(),
        })
    }

    /// Heat map for one crime type: each cell uses its nearest GeoUnit's
    /// attributes with the given time bucket and temperature.
    pub fn heatmap(
        &self,
        crime_type: CrimeType,
        bbox: &BBox,
        resolution: usize,
        bucket: TimeBucket,
        avg_temp_f: f64,
    ) -> Result<HeatmapGrid, RiskError> {
        let model = &self.bundle.models[&crime_type];
        let mut grid = heatmap(model, &self.datasets[&crime_type], bbox, resolution, |p| {
            let (unit, _) = self.bundle.geounits.nearest(p).expect("nonempty table");
            self.bundle.features_for(unit, bucket, avg_temp_f)
        })?;
        grid.crime_type = Some(crime_type);
        grid.year = self.bundle.year;
        Ok(grid)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::experiment::{generate_city, CitySpec};
    use crate::ingest::{build_model_rows, BuildOptions};

    fn small_bundle() -> ModelBundle {
        let mut spec = CitySpec::rochester(11);
        spec.grid = 4;
        spec.first_year = 2016;
        spec.last_year = 2016;
        let city = generate_city(&spec).unwrap();
        let weather = WeatherSeries::new(city.weather.clone());
        let rows = build_model_rows(&city.incidents, &city.geounits, &weather, BuildOptions::default()).unwrap();
        ModelBundle::fit(&rows, &city.geounits, &weather, Some(2016), &BandwidthChoice::Fixed(5.0)).unwrap()
    }

    #[test]
    fn bundle_json_round_trip_is_exact() {
        let b = small_bundle();
        let back = ModelBundle::from_json(&b.to_json()).unwrap();
        assert_eq!(back, b);
        assert_eq!(back.geounits.get(&b.geounits.units[0].geoid), Some(&b.geounits.units[0]));
    }

    #[test]
    fn model_version_is_deterministic() {
        assert_eq!(small_bundle().model_version, small_bundle().model_version);
    }

    #[test]
    fn centroid_query_uses_geoid_average() {
        let engine = RiskEngine::new(small_bundle()).unwrap();
        let unit = &engine.bundle().geounits.units[0];
        let q = RiskQuery::new(unit.centroid.lat(), unit.centroid.lon(), 14, 7, Some(75.0)).unwrap();
        let r = engine.assess(&q).unwrap();
        assert_eq!(r.mode, ModeUsed::GeoidAverage);
        assert_eq!(r.geoid.as_deref(), Some(unit.geoid.as_str()));
        assert_eq!(r.probabilities.len(), 6);
        for (t, p) in &r.probabilities {
            assert!((0.0..=1.0).contains(p));
            assert_eq!(*p, r.raw[t].clamp(0.0, 1.0));
        }
    }

    #[test]
    fn distant_query_refits_at_point() {
        let engine = RiskEngine::new(small_bundle()).unwrap().with_geoid_radius(0.0);
        let q = RiskQuery::new(43.18, -77.60, 3, 1, None).unwrap();
        let r = engine.assess(&q).unwrap();
        assert_eq!(r.mode, ModeUsed::RefitAtPoint);
        assert!(r.geoid.is_none());
        assert_eq!(Some(r.temp_f), engine.bundle().climatology[0]);
    }

    #[test]
    fn far_outside_support_is_an_error() {
        let engine = RiskEngine::new(small_bundle()).unwrap();
        let q = RiskQuery::new(10.0, 10.0, 3, 1, Some(40.0)).unwrap();
        assert!(matches!(engine.assess(&q), Err(RiskError::OutsideSupport(_))));
    }

    #[test]
    fn query_validation() {
        assert!(RiskQuery::new(43.1, -77.6, 24, 1, None).is_err());
        assert!(RiskQuery::new(43.1, -77.6, 0, 0, None).is_err());
        assert!(RiskQuery::new(43.1, -77.6, 0, 13, None).is_err());
        assert!(RiskQuery::new(91.0, -77.6, 0, 1, None).is_err());
        assert!(RiskQuery::new(43.1, -77.6, 0, 1, Some(200.0)).is_err());
        assert!(RiskQuery::new(43.1, -77.6, 23, 12, Some(-10.0)).is_ok());
    }

    #[test]
    fn heatmap_is_labelled() {
        let engine = RiskEngine::new(small_bundle()).unwrap();
        let bbox = BBox::new(-77.70, 43.10, -77.50, 43.26).unwrap();
        let g = engine.heatmap(CrimeType::Larceny, &bbox, 6, TimeBucket::Afternoon, 50.0).unwrap();
        assert_eq!(g.crime_type, Some(CrimeType::Larceny));
        assert_eq!(g.year, Some(2016));
        assert_eq!(g.values.len(), 36);
    }
}
