//! Leave-one-out cross-validation over a bandwidth grid.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::{fit_local, GwrDataset, GwrError};
use crate::geo::distance_km;
use crate::kernel::KernelSpec;

/// Number of points in the default log-spaced grid.
pub const DEFAULT_GRID_POINTS: usize = 16;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CvScore {
    pub bandwidth_km: f64,
    /// Sum of squared leave-one-out errors; `None` if some row's fit was degenerate.
    pub score: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BandwidthSelection {
    pub best_h: f64,
    pub scores: Vec<CvScore>,
}

/// `sum_i (y_i - x_i . beta_{-i}(loc_i))^2`, where `beta_{-i}` is fitted at row
/// `i`'s location with row `i` left out.
pub fn loo_cv_score(data: &GwrDataset, kernel: &KernelSpec) -> Result<f64, GwrError> {
    let errors = (0..data.n())
        .into_par_iter()
        .map(|i| {
            let row = &data.rows()[i];
            let local = fit_local(&row.location, data, kernel, Some(i))?;
            let e = row.response - local.predict(&row.features);
            Ok(e * e)
        })
        .collect::<Result<Vec<f64>, GwrError>>()?;
    Ok(errors.iter().sum())
}

/// Picks the candidate with the lowest LOO-CV score. Ties go to the larger bandwidth.
pub fn select_bandwidth(data: &GwrDataset, candidates: &[f64]) -> Result<BandwidthSelection, GwrError> {
    if candidates.is_empty() || candidates.iter().any(|h| !(*h > 0.0 && h.is_finite())) {
        return Err(GwrError::InvalidGrid);
    }
    let mut scores = Vec::with_capacity(candidates.len());
    let mut best: Option<(f64, f64)> = None;
    for &h in candidates {
        let kernel = KernelSpec::gaussian(h)?;
        let score = match loo_cv_score(data, &kernel) {
            Ok(s) => Some(s),
            Err(GwrError::DegenerateFit { .. }) => None,
            Err(e) => return Err(e),
        };
        if let Some(s) = score {
            let better = match best {
                None => true,
                Some((bh, bs)) => s < bs || (s == bs && h > bh),
            };
            if better {
                best = Some((h, s));
            }
        }
        scores.push(CvScore { bandwidth_km: h, score });
    }
    let (best_h, _) = best.ok_or(GwrError::AllCandidatesDegenerate)?;
    Ok(BandwidthSelection { best_h, scores })
}

/// Log-spaced grid from a tenth of the median to ten times the maximum pairwise
/// distance between distinct training locations.
pub fn default_bandwidth_grid(data: &GwrDataset) -> Vec<f64> {
    let points: Vec<_> = data.location_groups().into_iter().map(|g| g.point).collect();
    let mut dists: Vec<f64> = (0..points.len())
        .into_par_iter()
        .flat_map_iter(|i| {
            let points = &points;
            (i + 1..points.len()).map(move |j| distance_km(&points[i], &points[j]))
        })
        .filter(|d| *d > 0.0)
        .collect();
    if dists.is_empty() {
        return vec![1.0];
    }
    dists.sort_by(f64::total_cmp);
    let median = dists[dists.len() / 2];
    let max = dists[dists.len() - 1];
    let (lo, hi) = (0.1 * median, 10.0 * max);
    let steps = (DEFAULT_GRID_POINTS - 1) as f64;
    (0..DEFAULT_GRID_POINTS)
        .map(|i| lo * (hi / lo).powf(i as f64 / steps))
        .collect()
}
