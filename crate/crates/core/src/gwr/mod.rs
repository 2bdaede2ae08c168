//! Geographically weighted regression.
//!
//! Each regression point gets its own coefficient vector, estimated by least
//! squares with every training row weighted by a Gaussian of its distance to the
//! regression point:
//!
//! ```text
//! beta(point) = argmin_b  sum_j w_j(point) * (y_j - x_j . b)^2
//! w_j(point)  = exp(-(d(point, loc_j) / h)^2)
//! ```
//!
//! Normal equations are solved by Cholesky. When the weighted Gram matrix is
//! close to singular a small ridge term is added and the fit is flagged.

mod artifact;
mod bandwidth;

use std::collections::HashMap;

use rayon::prelude::*;
use thiserror::Error;

use crate::geo::{distance_km, GeoPoint};
use crate::kernel::KernelSpec;
use crate::linalg::{Cholesky, SymMatrix};

pub use artifact::FITTED_GWR_FORMAT_VERSION;
pub use bandwidth::{default_bandwidth_grid, loo_cv_score, select_bandwidth, BandwidthSelection, CvScore};

/// Rows with kernel weight at or below this do not count towards the minimum
/// of `p` supporting rows.
pub const MIN_SUPPORT_WEIGHT: f64 = 1e-12;
/// Pivot ratio above which the Gram matrix is treated as singular.
pub const MAX_PIVOT_RATIO: f64 = 1e12;
/// Ridge strength relative to `trace(Gram) / p`.
pub const RIDGE_SCALE: f64 = 1e-8;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum GwrError {
    #[error("invalid dataset: {0}")]
    InvalidDataset(String),
    #[error("bandwidth must be positive and finite, got {0}")]
    InvalidBandwidth(f64),
    #[error("bandwidth grid must be nonempty with positive finite entries")]
    InvalidGrid,
    #[error("row index {index} out of range for {n} rows")]
    RowIndex { index: usize, n: usize },
    #[error("degenerate local fit at {point}: {supporting} rows carry weight above 1e-12, need {required}")]
    DegenerateFit {
        point: GeoPoint,
        supporting: usize,
        required: usize,
    },
    #[error("every bandwidth candidate produced a degenerate local fit")]
    AllCandidatesDegenerate,
    #[error("no training fits belong to GeoID {0:?}")]
    EmptyGeoId(String),
    #[error("feature vector has length {got}, model expects {expected}")]
    FeatureLength { got: usize, expected: usize },
    #[error("length mismatch: {0} actual values vs {1} predictions")]
    LengthMismatch(usize, usize),
    #[error("cannot compute R-squared of an empty vector")]
    Empty,
    #[error("actual values have zero variance")]
    ZeroVariance,
    #[error("malformed model document: {0}")]
    Document(String),
}

/// One observation: where, what was measured, and the response.
#[derive(Debug, Clone, PartialEq)]
pub struct GwrRow {
    pub location: GeoPoint,
    /// Feature 0 is the intercept and must equal 1.
    pub features: Vec<f64>,
    pub response: f64,
    pub geoid: Option<String>,
}

impl GwrRow {
    pub fn new(location: GeoPoint, features: Vec<f64>, response: f64) -> Self {
        Self { location, features, response, geoid: None }
    }

    pub fn with_geoid(mut self, geoid: impl Into<String>) -> Self {
        self.geoid = Some(geoid.into());
        self
    }
}

/// Validated training data for a GWR fit.
#[derive(Debug, Clone, PartialEq)]
pub struct GwrDataset {
    feature_names: Vec<String>,
    rows: Vec<GwrRow>,
}

impl GwrDataset {
    pub fn new(feature_names: Vec<String>, rows: Vec<GwrRow>) -> Result<Self, GwrError> {
        let p = feature_names.len();
        if p == 0 {
            return Err(GwrError::InvalidDataset("at least the intercept feature is required".into()));
        }
        if rows.len() < p {
            return Err(GwrError::InvalidDataset(format!(
                "{} rows cannot support {p} features",
                rows.len()
            )));
        }
        for (i, row) in rows.iter().enumerate() {
            if row.features.len() != p {
                return Err(GwrError::InvalidDataset(format!(
                    "row {i} has {} features, expected {p}",
                    row.features.len()
                )));
            }
            if row.features[0] != 1.0 {
                return Err(GwrError::InvalidDataset(format!("row {i}: intercept column is not 1")));
            }
            if !row.response.is_finite() || row.features.iter().any(|x| !x.is_finite()) {
                return Err(GwrError::InvalidDataset(format!("row {i} has non-finite values")));
            }
        }
        Ok(Self { feature_names, rows })
    }

    /// Names the features `intercept, x1, x2, ...`.
    pub fn unnamed(rows: Vec<GwrRow>) -> Result<Self, GwrError> {
        let p = rows.first().map_or(0, |r| r.features.len());
        let names = (0..p)
            .map(|k| if k == 0 { "intercept".to_string() } else { format!("x{k}") })
            .collect();
        Self::new(names, rows)
    }

    pub fn n(&self) -> usize {
        self.rows.len()
    }

    pub fn p(&self) -> usize {
        self.feature_names.len()
    }

    pub fn rows(&self) -> &[GwrRow] {
        &self.rows
    }

    pub fn feature_names(&self) -> &[String] {
        &self.feature_names
    }

    pub fn responses(&self) -> Vec<f64> {
        self.rows.iter().map(|r| r.response).collect()
    }

    pub fn into_rows(self) -> Vec<GwrRow> {
        self.rows
    }

    /// Distinct locations in order of first appearance, each with the rows at it.
    pub fn location_groups(&self) -> Vec<LocationGroup> {
        let mut index: HashMap<(u64, u64), usize> = HashMap::new();
        let mut groups: Vec<LocationGroup> = Vec::new();
        for (i, row) in self.rows.iter().enumerate() {
            let g = *index.entry(row.location.key()).or_insert_with(|| {
                groups.push(LocationGroup {
                    point: row.location,
                    geoid: row.geoid.clone(),
                    rows: Vec::new(),
                });
                groups.len() - 1
            });
            groups[g].rows.push(i);
        }
        groups
    }
}

#[derive(Debug, Clone)]
pub struct LocationGroup {
    pub point: GeoPoint,
    pub geoid: Option<String>,
    pub rows: Vec<usize>,
}

/// Coefficients estimated at one regression point.
#[derive(Debug, Clone, PartialEq)]
pub struct LocalFit {
    pub point: GeoPoint,
    pub geoid: Option<String>,
    pub beta: Vec<f64>,
    /// Sum of kernel weights over the rows that entered the fit.
    pub effective_weight_sum: f64,
    pub ridge_applied: bool,
}

impl LocalFit {
    pub fn predict(&self, features: &[f64]) -> f64 {
        dot(&self.beta, features)
    }
}

#[derive(Debug, Clone, PartialEq, serde::Serialize, serde::Deserialize)]
pub struct FitDiagnostics {
    /// `None` when the training responses have zero variance.
    pub global_r_squared: Option<f64>,
    /// In-sample residuals, each row predicted by its own location's coefficients.
    pub residuals: Vec<f64>,
    /// Residual sum of squares over `n - p`.
    pub residual_variance: f64,
}

/// A fitted model: one [`LocalFit`] per distinct training location.
#[derive(Debug, Clone)]
pub struct FittedGwr {
    kernel: KernelSpec,
    feature_names: Vec<String>,
    locals: Vec<LocalFit>,
    diagnostics: FitDiagnostics,
    by_point: HashMap<(u64, u64), usize>,
}

impl PartialEq for FittedGwr {
    fn eq(&self, other: &Self) -> bool {
        self.kernel == other.kernel
            && self.feature_names == other.feature_names
            && self.locals == other.locals
            && self.diagnostics == other.diagnostics
    }
}

/// How a prediction obtains its coefficient vector.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum PredictMode {
    /// Run a fresh local fit at the query point against the training data.
    RefitAtPoint,
    /// Average the coefficient vectors of the training fits in this GeoID.
    GeoidAverage(String),
}

impl FittedGwr {
    pub(crate) fn from_parts(
        kernel: KernelSpec,
        feature_names: Vec<String>,
        locals: Vec<LocalFit>,
        diagnostics: FitDiagnostics,
    ) -> Self {
        let by_point = locals
            .iter()
            .enumerate()
            .map(|(i, l)| (l.point.key(), i))
            .collect();
        Self { kernel, feature_names, locals, diagnostics, by_point }
    }

    pub fn kernel(&self) -> &KernelSpec {
        &self.kernel
    }

    pub fn feature_names(&self) -> &[String] {
        &self.feature_names
    }

    pub fn p(&self) -> usize {
        self.feature_names.len()
    }

    pub fn locals(&self) -> &[LocalFit] {
        &self.locals
    }

    pub fn diagnostics(&self) -> &FitDiagnostics {
        &self.diagnostics
    }

    pub fn local_at(&self, point: &GeoPoint) -> Option<&LocalFit> {
        self.by_point.get(&point.key()).map(|&i| &self.locals[i])
    }

    pub fn locals_for_geoid(&self, geoid: &str) -> Vec<&LocalFit> {
        self.locals
            .iter()
            .filter(|l| l.geoid.as_deref() == Some(geoid))
            .collect()
    }

    pub fn predict(
        &self,
        training: &GwrDataset,
        point: &GeoPoint,
        features: &[f64],
        mode: &PredictMode,
    ) -> Result<f64, GwrError> {
        if features.len() != self.p() {
            return Err(GwrError::FeatureLength { got: features.len(), expected: self.p() });
        }
        match mode {
            PredictMode::RefitAtPoint => {
                Ok(fit_local(point, training, &self.kernel, None)?.predict(features))
            }
            PredictMode::GeoidAverage(geoid) => {
                let fits = self.locals_for_geoid(geoid);
                if fits.is_empty() {
                    return Err(GwrError::EmptyGeoId(geoid.clone()));
                }
                Ok(dot(&average_beta(&fits), features))
            }
        }
    }
}

/// Componentwise mean of the fits' coefficient vectors. Panics on an empty slice.
pub fn average_beta(fits: &[&LocalFit]) -> Vec<f64> {
    assert!(!fits.is_empty(), "average of zero coefficient vectors");
    let p = fits[0].beta.len();
    let mut acc = vec![0.0; p];
    for f in fits {
        for (a, b) in acc.iter_mut().zip(&f.beta) {
            *a += b;
        }
    }
    let m = fits.len() as f64;
    acc.iter_mut().for_each(|a| *a /= m);
    acc
}

#[inline]
pub(crate) fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

/// Weighted least-squares fit at `point`, optionally leaving out one row.
pub fn fit_local(
    point: &GeoPoint,
    data: &GwrDataset,
    kernel: &KernelSpec,
    exclude_index: Option<usize>,
) -> Result<LocalFit, GwrError> {
    let p = data.p();
    if let Some(index) = exclude_index {
        if index >= data.n() {
            return Err(GwrError::RowIndex { index, n: data.n() });
        }
    }

    let mut gram = SymMatrix::zeros(p);
    let mut rhs = vec![0.0; p];
    let mut weight_sum = 0.0;
    let mut supporting = 0usize;
    for (j, row) in data.rows.iter().enumerate() {
        if exclude_index == Some(j) {
            continue;
        }
        let w = kernel.weight(distance_km(point, &row.location));
        if w > MIN_SUPPORT_WEIGHT {
            supporting += 1;
        }
        if w == 0.0 {
            continue;
        }
        gram.add_outer_lower(w, &row.features);
        let wy = w * row.response;
        for (r, x) in rhs.iter_mut().zip(&row.features) {
            *r += wy * x;
        }
        weight_sum += w;
    }
    if supporting < p {
        return Err(GwrError::DegenerateFit { point: *point, supporting, required: p });
    }
    gram.mirror_lower();

    let (beta, ridge_applied) = match Cholesky::factor(&gram) {
        Some(c) if c.pivot_ratio() <= MAX_PIVOT_RATIO => (c.solve(&rhs), false),
        _ => {
            let lambda = RIDGE_SCALE * gram.trace() / p as f64;
            gram.add_diagonal(lambda);
            match Cholesky::factor(&gram) {
                Some(c) => (c.solve(&rhs), true),
                None => {
                    return Err(GwrError::DegenerateFit { point: *point, supporting, required: p })
                }
            }
        }
    };

    Ok(LocalFit {
        point: *point,
        geoid: None,
        beta,
        effective_weight_sum: weight_sum,
        ridge_applied,
    })
}

/// Fits one local model per distinct training location.
pub fn fit(data: &GwrDataset, kernel: &KernelSpec) -> Result<FittedGwr, GwrError> {
    let groups = data.location_groups();
    let locals = groups
        .par_iter()
        .map(|g| {
            fit_local(&g.point, data, kernel, None).map(|mut local| {
                local.geoid = g.geoid.clone();
                local
            })
        })
        .collect::<Result<Vec<_>, _>>()?;

    let mut fitted = vec![0.0; data.n()];
    for (g, local) in groups.iter().zip(&locals) {
        for &i in &g.rows {
            fitted[i] = local.predict(&data.rows[i].features);
        }
    }
    let actual = data.responses();
    let residuals: Vec<f64> = actual.iter().zip(&fitted).map(|(y, f)| y - f).collect();
    let ss_res: f64 = residuals.iter().map(|r| r * r).sum();
    let dof = data.n().saturating_sub(data.p()).max(1);
    let diagnostics = FitDiagnostics {
        global_r_squared: r_squared(&actual, &fitted).ok(),
        residuals,
        residual_variance: ss_res / dof as f64,
    };
    Ok(FittedGwr::from_parts(
        *kernel,
        data.feature_names.clone(),
        locals,
        diagnostics,
    ))
}

/// Proportion of variance in `actual` explained by `predicted`: `1 - SS_res / SS_tot`.
pub fn r_squared(actual: &[f64], predicted: &[f64]) -> Result<f64, GwrError> {
    if actual.len() != predicted.len() {
        return Err(GwrError::LengthMismatch(actual.len(), predicted.len()));
    }
    if actual.is_empty() {
        return Err(GwrError::Empty);
    }
    let mean = actual.iter().sum::<f64>() / actual.len() as f64;
    let ss_tot: f64 = actual.iter().map(|y| (y - mean).powi(2)).sum();
    if ss_tot == 0.0 {
        return Err(GwrError::ZeroVariance);
    }
    let ss_res: f64 = actual.iter().zip(predicted).map(|(y, f)| (y - f).powi(2)).sum();
    Ok(1.0 - ss_res / ss_tot)
}
