//! Synthetic GWR data drawn from known coefficient surfaces.

use std::f64::consts::PI;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal, StandardNormal};
use serde::{Deserialize, Serialize};

use super::ExperimentError;
use crate::geo::{BBox, GeoPoint};
use crate::gwr::{GwrDataset, GwrRow};

/// Analytic coefficient surface over the box-normalised position `(s, t)`, where
/// `s` runs west to east and `t` south to north, both in `[0, 1]`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Surface {
    Constant { value: f64 },
    LinearU { intercept: f64, slope: f64 },
    /// `offset + amplitude * sin(2 pi cycles t)`.
    SinusoidalV { offset: f64, amplitude: f64, cycles: f64 },
}

impl Surface {
    pub fn eval(&self, s: f64, t: f64) -> f64 {
        match *self {
            Surface::Constant { value } => value,
            Surface::LinearU { intercept, slope } => intercept + slope * s,
            Surface::SinusoidalV { offset, amplitude, cycles } => {
                offset + amplitude * (2.0 * PI * cycles * t).sin()
            }
        }
    }

    /// `max - min` over the unit square.
    pub fn range(&self) -> f64 {
        match *self {
            Surface::Constant { .. } => 0.0,
            Surface::LinearU { slope, .. } => slope.abs(),
            Surface::SinusoidalV { amplitude, cycles, .. } => {
                // dense scan; closed form needs case analysis on partial periods
                let (lo, hi) = (0..=10_000).fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), i| {
                    let v = (2.0 * PI * cycles * i as f64 / 10_000.0).sin();
                    (lo.min(v), hi.max(v))
                });
                amplitude.abs() * (hi - lo)
            }
        }
    }

    /// Lipschitz constants `(d/ds, d/dt)` in normalised units.
    pub fn lipschitz(&self) -> (f64, f64) {
        match *self {
            Surface::Constant { .. } => (0.0, 0.0),
            Surface::LinearU { slope, .. } => (slope.abs(), 0.0),
            Surface::SinusoidalV { amplitude, cycles, .. } => (0.0, (amplitude * 2.0 * PI * cycles).abs()),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SyntheticSpec {
    pub n_locations: usize,
    pub bbox: BBox,
    /// One surface per feature; the first multiplies the intercept.
    pub surfaces: Vec<Surface>,
    /// Rows drawn at each location. Each location is its own GeoID centroid,
    /// so rows at a location play the role of one GeoID's cells.
    pub rows_per_location: usize,
    pub noise_sigma: f64,
    pub seed: u64,
    pub year: i32,
}

impl SyntheticSpec {
    /// Rochester-sized box, three smooth surfaces, 100 locations with 4 rows each
    /// (400 rows), noise 0.05.
    pub fn smooth_default(seed: u64) -> Self {
        Self {
            n_locations: 100,
            bbox: BBox::new(-77.70, 43.10, -77.50, 43.26).expect("static box"),
            surfaces: vec![
                Surface::LinearU { intercept: 1.0, slope: 1.0 },
                Surface::SinusoidalV { offset: 0.0, amplitude: 1.0, cycles: 0.5 },
                Surface::SinusoidalV { offset: 0.5, amplitude: 0.5, cycles: 1.0 },
            ],
            rows_per_location: 4,
            noise_sigma: 0.05,
            seed,
            year: 2017,
        }
    }

    fn validate(&self) -> Result<(), ExperimentError> {
        if self.n_locations < 10 {
            return Err(ExperimentError::InvalidSpec("n_locations must be at least 10".into()));
        }
        if !(self.noise_sigma >= 0.0 && self.noise_sigma.is_finite()) {
            return Err(ExperimentError::InvalidSpec("noise_sigma must be nonnegative".into()));
        }
        if self.surfaces.is_empty() {
            return Err(ExperimentError::InvalidSpec("need at least the intercept surface".into()));
        }
        if self.rows_per_location == 0 {
            return Err(ExperimentError::InvalidSpec("rows_per_location must be positive".into()));
        }
        Ok(())
    }

    pub fn true_beta(&self, p: &GeoPoint) -> Vec<f64> {
        let (s, t) = self.bbox.normalized(p);
        self.surfaces.iter().map(|f| f.eval(s, t)).collect()
    }

}

#[derive(Debug, Clone)]
pub struct SyntheticData {
    pub spec: SyntheticSpec,
    pub dataset: GwrDataset,
    /// True coefficients at each row's location.
    pub true_betas: Vec<Vec<f64>>,
    pub years: Vec<i32>,
}

/// Uniform locations in the box, standard-normal features, and
/// `y = sum_k beta_k(u, v) x_k + N(0, noise_sigma^2)`. Rows are grouped by
/// location; location `i` carries GeoID `S{i:04}`.
pub fn generate_synthetic(spec: &SyntheticSpec) -> Result<SyntheticData, ExperimentError> {
    spec.validate()?;
    let mut rng = ChaCha8Rng::seed_from_u64(spec.seed);
    let p = spec.surfaces.len();
    let noise = Normal::new(0.0, spec.noise_sigma).map_err(|e| ExperimentError::InvalidSpec(e.to_string()))?;
    let n = spec.n_locations * spec.rows_per_location;
    let mut rows = Vec::with_capacity(n);
    let mut true_betas = Vec::with_capacity(n);
    for i in 0..spec.n_locations {
        let lon = rng.gen_range(spec.bbox.min_lon..spec.bbox.max_lon);
        let lat = rng.gen_range(spec.bbox.min_lat..spec.bbox.max_lat);
        let loc = GeoPoint::new(lon, lat).expect("inside a valid box");
        let beta = spec.true_beta(&loc);
        for _ in 0..spec.rows_per_location {
            let mut x = vec![1.0; p];
            for v in x.iter_mut().skip(1) {
                *v = StandardNormal.sample(&mut rng);
            }
            let eps = if spec.noise_sigma > 0.0 { noise.sample(&mut rng) } else { 0.0 };
            let y = beta.iter().zip(&x).map(|(b, v)| b * v).sum::<f64>() + eps;
            rows.push(GwrRow::new(loc, x, y).with_geoid(format!("S{i:04}")));
            true_betas.push(beta.clone());
        }
    }
    let dataset = GwrDataset::unnamed(rows)?;
    Ok(SyntheticData {
        spec: spec.clone(),
        years: vec![spec.year; n],
        dataset,
        true_betas,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn deterministic_under_seed() {
        let a = generate_synthetic(&SyntheticSpec::smooth_default(9)).unwrap();
        let b = generate_synthetic(&SyntheticSpec::smooth_default(9)).unwrap();
        assert_eq!(a.dataset, b.dataset);
        let c = generate_synthetic(&SyntheticSpec::smooth_default(10)).unwrap();
        assert_ne!(a.dataset, c.dataset);
    }

    #[test]
    fn noiseless_rows_follow_surfaces() {
        let mut spec = SyntheticSpec::smooth_default(3);
        spec.noise_sigma = 0.0;
        let d = generate_synthetic(&spec).unwrap();
        for (row, beta) in d.dataset.rows().iter().zip(&d.true_betas) {
            let y: f64 = beta.iter().zip(&row.features).map(|(b, x)| b * x).sum();
            assert_eq!(row.response, y);
            assert!(spec.bbox.contains(&row.location));
            assert!(row.geoid.as_deref().unwrap().starts_with('S'));
        }
    }

    #[test]
    fn surface_ranges() {
        assert_eq!(Surface::Constant { value: 3.0 }.range(), 0.0);
        assert_eq!(Surface::LinearU { intercept: 1.0, slope: -2.0 }.range(), 2.0);
        let half = Surface::SinusoidalV { offset: 0.0, amplitude: 1.0, cycles: 0.5 };
        assert!((half.range() - 1.0).abs() < 1e-9);
        let full = Surface::SinusoidalV { offset: 0.5, amplitude: 0.5, cycles: 1.0 };
        assert!((full.range() - 1.0).abs() < 1e-6);
    }

    #[test]
    fn spec_validation() {
        let mut s = SyntheticSpec::smooth_default(1);
        s.n_locations = 9;
        assert!(generate_synthetic(&s).is_err());
        let mut s = SyntheticSpec::smooth_default(1);
        s.noise_sigma = -0.1;
        assert!(generate_synthetic(&s).is_err());
    }
}
