//! Evaluation harness: holdout splits, per-year fit-and-predict, heat-map grids,
//! and synthetic data with known coefficient surfaces.

mod city;
mod evaluate;
mod heatmap;
mod split;
mod synthetic;

use thiserror::Error;

use crate::gwr::GwrError;
use crate::ingest::IngestError;

pub use city::{generate_city, CitySpec, SyntheticCity};
pub use evaluate::{
    evaluate_holdout, evaluate_synthetic, predict_holdout, run_yearly_evaluation, BandwidthChoice,
    EvaluationReport, HoldoutPrediction, HoldoutRow, ScatterPoint, YearEvaluation,
};
pub use heatmap::{
    export_geojson, heatmap, max_adjacent_difference, parse_geojson, HeatmapGrid,
};
pub use split::{split, split_indices, SplitSpec, DEFAULT_TEST_FRACTION};
pub use synthetic::{generate_synthetic, Surface, SyntheticData, SyntheticSpec};

#[derive(Debug, Error)]
pub enum ExperimentError {
    #[error(transparent)]
    Gwr(#[from] GwrError),
    #[error(transparent)]
    Ingest(#[from] IngestError),
    #[error("year {year} has {rows} training rows, need at least {required}")]
    YearTooSmall { year: i32, rows: usize, required: usize },
    #[error("invalid specification: {0}")]
    InvalidSpec(String),
    #[error("malformed heat-map document: {0}")]
    GeoJson(String),
    #[error("io: {0}")]
    Io(#[from] std::io::Error),
    #[error("csv: {0}")]
    Csv(#[from] csv::Error),
}
