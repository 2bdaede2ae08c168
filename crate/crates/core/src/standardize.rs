//! Z-score standardisation of continuous features.

use serde::{Deserialize, Serialize};

/// Per-column `(x - mean) / scale`. Columns with `scale == None` (intercept,
/// indicator dummies) pass through untouched.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Standardizer {
    pub feature_names: Vec<String>,
    pub columns: Vec<ColumnScaling>,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ColumnScaling {
    pub mean: f64,
    pub scale: Option<f64>,
}

impl Standardizer {
    /// Fits column statistics on `rows`. `passthrough[k]` marks columns to leave alone.
    /// A constant column is centred with unit scale.
    pub fn fit<'a>(
        feature_names: Vec<String>,
        passthrough: &[bool],
        rows: impl IntoIterator<Item = &'a [f64]>,
    ) -> Self {
        let p = feature_names.len();
        let mut n = 0usize;
        let mut sum = vec![0.0; p];
        let mut sq = vec![0.0; p];
        let collected: Vec<&[f64]> = rows.into_iter().collect();
        for r in &collected {
            n += 1;
            for k in 0..p {
                sum[k] += r[k];
            }
        }
        let mean: Vec<f64> = sum.iter().map(|s| if n > 0 { s / n as f64 } else { 0.0 }).collect();
        for r in &collected {
            for k in 0..p {
                sq[k] += (r[k] - mean[k]).powi(2);
            }
        }
        let columns = (0..p)
            .map(|k| {
                if passthrough[k] {
                    ColumnScaling { mean: 0.0, scale: None }
                } else {
                    let sd = if n > 1 { (sq[k] / (n - 1) as f64).sqrt() } else { 0.0 };
                    ColumnScaling { mean: mean[k], scale: Some(if sd > 0.0 { sd } else { 1.0 }) }
                }
            })
            .collect();
        Self { feature_names, columns }
    }

    pub fn apply(&self, raw: &[f64]) -> Vec<f64> {
        raw.iter()
            .zip(&self.columns)
            .map(|(x, c)| match c.scale {
                Some(s) => (x - c.mean) / s,
                None => *x,
            })
            .collect()
    }
}
