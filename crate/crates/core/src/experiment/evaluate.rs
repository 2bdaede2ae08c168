//! Per-year holdout evaluation.
//!
//! Each year is fitted on its own training rows; held-out rows are predicted from
//! features alone, by averaging the coefficient vectors of their GeoID's training
//! fits. Rows whose GeoID has no training fit that year fall back to a refit at
//! their location.

use std::collections::BTreeSet;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::{split_indices, ExperimentError, SplitSpec, SyntheticData};
use crate::crime::CrimeType;
use crate::geo::GeoPoint;
use crate::gwr::{
    default_bandwidth_grid, fit, r_squared, select_bandwidth, CvScore, FittedGwr, GwrDataset,
    GwrRow, PredictMode,
};
use crate::ingest::{standardizer_for, to_dataset, ModelRows};
use crate::kernel::KernelSpec;
use crate::standardize::Standardizer;

#[derive(Debug, Clone, PartialEq)]
pub enum BandwidthChoice {
    Fixed(f64),
    Grid(Vec<f64>),
    /// Log-spaced default grid derived from the training locations.
    AutoGrid,
}

/// A held-out observation as the predictor sees it: no response.
#[derive(Debug, Clone, PartialEq)]
pub struct HoldoutRow {
    pub geoid: Option<String>,
    pub year: i32,
    pub location: GeoPoint,
    pub features: Vec<f64>,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct HoldoutPrediction {
    pub value: f64,
    pub geoid_average: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScatterPoint {
    pub geoid: String,
    pub year: i32,
    pub empirical: f64,
    pub predicted: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct YearEvaluation {
    pub year: i32,
    pub bandwidth_km: f64,
    pub cv_scores: Option<Vec<CvScore>>,
    pub n_train: usize,
    pub n_test: usize,
    /// `None` when the year's empirical responses are constant.
    pub r_squared: Option<f64>,
    /// Test rows predicted by refit because their GeoID had no training fit.
    pub fallback_refits: usize,
    #[serde(skip)]
    pub scatter: Vec<ScatterPoint>,
    #[serde(skip)]
    pub model: Option<FittedGwr>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct EvaluationReport {
    pub crime_type: Option<CrimeType>,
    pub seed: u64,
    pub test_fraction: f64,
    pub shared_bandwidth: bool,
    pub years: Vec<YearEvaluation>,
}

impl EvaluationReport {
    pub fn scatter(&self) -> impl Iterator<Item = &ScatterPoint> {
        self.years.iter().flat_map(|y| y.scatter.iter())
    }

    /// Writes `geoid,year,empirical,predicted`.
    pub fn write_scatter_csv<W: std::io::Write>(&self, out: W) -> Result<(), ExperimentError> {
        let mut w = csv::Writer::from_writer(out);
        w.write_record(["geoid", "year", "empirical", "predicted"])?;
        for s in self.scatter() {
            w.write_record([s.geoid.clone(), s.year.to_string(), s.empirical.to_string(), s.predicted.to_string()])?;
        }
        w.flush()?;
        Ok(())
    }
}

/// Predicts held-out rows from features only.
pub fn predict_holdout(
    model: &FittedGwr,
    training: &GwrDataset,
    rows: &[HoldoutRow],
) -> Result<Vec<HoldoutPrediction>, ExperimentError> {
    rows.par_iter()
        .map(|r| {
            let geoid_fit = r
                .geoid
                .as_ref()
                .filter(|g| !model.locals_for_geoid(g).is_empty());
            let (mode, geoid_average) = match geoid_fit {
                Some(g) => (PredictMode::GeoidAverage(g.clone()), true),
                None => (PredictMode::RefitAtPoint, false),
            };
            let value = model.predict(training, &r.location, &r.features, &mode)?;
            Ok(HoldoutPrediction { value, geoid_average })
        })
        .collect()
}

fn resolve_bandwidth(
    data: &GwrDataset,
    choice: &BandwidthChoice,
) -> Result<(f64, Option<Vec<CvScore>>), ExperimentError> {
    match choice {
        BandwidthChoice::Fixed(h) => Ok((KernelSpec::gaussian(*h)?.bandwidth_km(), None)),
        BandwidthChoice::Grid(grid) => {
            let sel = select_bandwidth(data, grid)?;
            Ok((sel.best_h, Some(sel.scores)))
        }
        BandwidthChoice::AutoGrid => {
            let sel = select_bandwidth(data, &default_bandwidth_grid(data))?;
            Ok((sel.best_h, Some(sel.scores)))
        }
    }
}

/// Fits each test year on that year's training rows and scores the held-out rows.
///
/// `test_responses` is only read after all predictions for a year are made.
pub fn evaluate_holdout(
    train: &GwrDataset,
    train_years: &[i32],
    test: &[HoldoutRow],
    test_responses: &[f64],
    bandwidth: &BandwidthChoice,
    shared_bandwidth: bool,
) -> Result<Vec<YearEvaluation>, ExperimentError> {
    if train_years.len() != train.n() || test_responses.len() != test.len() {
        return Err(ExperimentError::InvalidSpec("year/response vectors do not match row counts".into()));
    }
    let p = train.p();
    let shared = if shared_bandwidth {
        Some(resolve_bandwidth(train, bandwidth)?)
    } else {
        None
    };
    let years: BTreeSet<i32> = test.iter().map(|r| r.year).collect();
    let years: Vec<i32> = years.into_iter().collect();

    years
        .par_iter()
        .map(|&year| {
            let rows: Vec<GwrRow> = train
                .rows()
                .iter()
                .zip(train_years)
                .filter(|(_, y)| **y == year)
                .map(|(r, _)| r.clone())
                .collect();
            if rows.len() < 2 * p {
                return Err(ExperimentError::YearTooSmall { year, rows: rows.len(), required: 2 * p });
            }
            let data = GwrDataset::new(train.feature_names().to_vec(), rows)?;
            let (h, cv_scores) = match &shared {
                Some((h, _)) => (*h, None),
                None => resolve_bandwidth(&data, bandwidth)?,
            };
            let model = fit(&data, &KernelSpec::gaussian(h)?)?;

            let idx: Vec<usize> = (0..test.len()).filter(|&i| test[i].year == year).collect();
            let holdout: Vec<HoldoutRow> = idx.iter().map(|&i| test[i].clone()).collect();
            let preds = predict_holdout(&model, &data, &holdout)?;

            let empirical: Vec<f64> = idx.iter().map(|&i| test_responses[i]).collect();
            let predicted: Vec<f64> = preds.iter().map(|p| p.value).collect();
            let scatter = holdout
                .iter()
                .zip(empirical.iter().zip(&predicted))
                .map(|(r, (e, p))| ScatterPoint {
                    geoid: r.geoid.clone().unwrap_or_default(),
                    year,
                    empirical: *e,
                    predicted: *p,
                })
                .collect();
            Ok(YearEvaluation {
                year,
                bandwidth_km: h,
                cv_scores,
                n_train: data.n(),
                n_test: idx.len(),
                r_squared: r_squared(&empirical, &predicted).ok(),
                fallback_refits: preds.iter().filter(|p| !p.geoid_average).count(),
                scatter,
                model: Some(model),
            })
        })
        .collect()
}

/// Holdout protocol on model rows for one crime type. Standardisation constants
/// come from the training split only.
pub fn run_yearly_evaluation(
    rows: &ModelRows,
    ethnicity_names: &[String],
    crime_type: CrimeType,
    split: &SplitSpec,
    bandwidth: &BandwidthChoice,
    shared_bandwidth: bool,
) -> Result<(EvaluationReport, Standardizer), ExperimentError> {
    let strata: Vec<i64> = rows.rows.iter().map(|r| i64::from(r.year)).collect();
    let (tr, te) = split_indices(&strata, split);
    let standardizer = standardizer_for(&rows.feature_names, ethnicity_names, tr.iter().map(|&i| &rows.rows[i]));
    let train = to_dataset(tr.iter().map(|&i| &rows.rows[i]), crime_type, &standardizer)?;
    let train_years: Vec<i32> = tr.iter().map(|&i| rows.rows[i].year).collect();
    let test: Vec<HoldoutRow> = te
        .iter()
        .map(|&i| {
            let r = &rows.rows[i];
            HoldoutRow {
                geoid: Some(r.geoid.clone()),
                year: r.year,
                location: r.location,
                features: standardizer.apply(&r.features),
            }
        })
        .collect();
    let responses: Vec<f64> = te.iter().map(|&i| rows.rows[i].response(crime_type)).collect();
    let years = evaluate_holdout(&train, &train_years, &test, &responses, bandwidth, shared_bandwidth)?;
    Ok((
        EvaluationReport {
            crime_type: Some(crime_type),
            seed: split.seed,
            test_fraction: split.test_fraction,
            shared_bandwidth,
            years,
        },
        standardizer,
    ))
}

/// Holdout protocol on a synthetic dataset (features are already standard normal).
pub fn evaluate_synthetic(
    data: &SyntheticData,
    split: &SplitSpec,
    bandwidth: &BandwidthChoice,
) -> Result<EvaluationReport, ExperimentError> {
    let strata: Vec<i64> = data.years.iter().map(|y| i64::from(*y)).collect();
    let (tr, te) = split_indices(&strata, split);
    let rows = data.dataset.rows();
    let train = GwrDataset::new(
        data.dataset.feature_names().to_vec(),
        tr.iter().map(|&i| rows[i].clone()).collect(),
    )?;
    let train_years: Vec<i32> = tr.iter().map(|&i| data.years[i]).collect();
    let test: Vec<HoldoutRow> = te
        .iter()
        .map(|&i| HoldoutRow {
            geoid: rows[i].geoid.clone(),
            year: data.years[i],
            location: rows[i].location,
            features: rows[i].features.clone(),
        })
        .collect();
    let responses: Vec<f64> = te.iter().map(|&i| rows[i].response).collect();
    let years = evaluate_holdout(&train, &train_years, &test, &responses, bandwidth, false)?;
    Ok(EvaluationReport {
        crime_type: None,
        seed: split.seed,
        test_fraction: split.test_fraction,
        shared_bandwidth: false,
        years,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::experiment::{generate_synthetic, SyntheticSpec};

    #[test]
    fn noiseless_synthetic_is_recovered() {
        let mut spec = SyntheticSpec::smooth_default(11);
        spec.noise_sigma = 0.0;
        // enough rows per location that every leave-one-out fit stays determined
        // by its own location's rows
        spec.n_locations = 40;
        spec.rows_per_location = 10;
        let data = generate_synthetic(&spec).unwrap();
        // noiseless data favours the smallest bandwidth that keeps fits determined,
        // which sits below the default grid's floor
        let grid: Vec<f64> = (0..12).map(|i| 0.2 * 1.5f64.powi(i)).collect();
        let report = evaluate_synthetic(&data, &SplitSpec::new(0.2, 5).unwrap(), &BandwidthChoice::Grid(grid)).unwrap();
        assert_eq!(report.years.len(), 1);
        let y = &report.years[0];
        assert_eq!(y.n_test, 80);
        assert_eq!(y.fallback_refits, 0);
        assert_eq!(y.scatter.len(), y.n_test);
        assert!(y.r_squared.unwrap() >= 0.999, "{:?}", y.r_squared);
    }

    #[test]
    fn year_too_small() {
        let mut spec = SyntheticSpec::smooth_default(2);
        spec.n_locations = 10;
        spec.rows_per_location = 1;
        let data = generate_synthetic(&spec).unwrap();
        let err = evaluate_synthetic(&data, &SplitSpec::new(0.5, 1).unwrap(), &BandwidthChoice::Fixed(5.0)).unwrap_err();
        assert!(matches!(err, ExperimentError::YearTooSmall { rows: 5, required: 6, .. }));
    }
}
