//! Geographically weighted regression for spatial crime-risk modelling.
//!
//! The crate is organised bottom-up:
//!
//! - [`geo`] and [`kernel`]: great-circle distances and Gaussian distance-decay weights.
//! - [`gwr`]: local weighted least squares, bandwidth cross-validation, prediction and
//!   the serialisable [`gwr::FittedGwr`] artifact.
//! - [`ingest`]: CSV parsers for incidents, demographics and weather, and the join that
//!   produces per-cell [`ingest::ModelRow`]s with per-crime-type response shares.
//! - [`stats`]: descriptive histograms and correlations over incidents.
//! - [`experiment`]: holdout evaluation, heat-map grids and synthetic data generators.
//! - [`risk`]: the deployable model bundle and the location/time risk query engine.

pub mod crime;
pub mod experiment;
pub mod geo;
pub mod gwr;
pub mod ingest;
pub mod kernel;
pub mod linalg;
pub mod risk;
pub mod standardize;
pub mod stats;

pub use crime::CrimeType;
pub use geo::{distance_km, BBox, GeoError, GeoPoint, EARTH_RADIUS_KM};
pub use gwr::{
    fit, fit_local, r_squared, select_bandwidth, FitDiagnostics, FittedGwr, GwrDataset, GwrError,
    GwrRow, LocalFit, PredictMode,
};
pub use kernel::{kernel_weight, KernelKind, KernelSpec};
