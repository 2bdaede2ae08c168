#![allow(dead_code)]

use crimegwr::{GeoPoint, GwrDataset, GwrRow};
use rand::Rng;

pub struct Instance {
    pub data: GwrDataset,
    /// (lon, lat)
    pub locs: Vec<(f64, f64)>,
    pub x: Vec<Vec<f64>>,
    pub y: Vec<f64>,
}

/// Random points in a ~20 km box, intercept plus standard-ish normal features,
/// a linear signal and noise.
pub fn random_instance<R: Rng>(rng: &mut R, n: usize, p: usize) -> Instance {
    let mut locs = Vec::with_capacity(n);
    let mut x = Vec::with_capacity(n);
    let mut y = Vec::with_capacity(n);
    let beta: Vec<f64> = (0..p).map(|_| rng.gen_range(-2.0..2.0)).collect();
    for _ in 0..n {
        let lon = rng.gen_range(-77.70..-77.50);
        let lat = rng.gen_range(43.10..43.26);
        let mut row = vec![1.0];
        row.extend((1..p).map(|_| rng.gen_range(-2.0..2.0)));
        let signal: f64 = row.iter().zip(&beta).map(|(a, b)| a * b).sum();
        y.push(signal + rng.gen_range(-0.5..0.5));
        locs.push((lon, lat));
        x.push(row);
    }
    Instance { data: dataset(&locs, &x, &y), locs, x, y }
}

pub fn dataset(locs: &[(f64, f64)], x: &[Vec<f64>], y: &[f64]) -> GwrDataset {
    let rows = locs
        .iter()
        .zip(x)
        .zip(y)
        .map(|((&(lon, lat), f), &r)| GwrRow::new(GeoPoint::new(lon, lat).unwrap(), f.clone(), r))
        .collect();
    GwrDataset::unnamed(rows).unwrap()
}

pub fn weights_at(point: (f64, f64), locs: &[(f64, f64)], h: f64) -> Vec<f64> {
    locs.iter()
        .map(|&(lon, lat)| {
            crimegwr_oracles::gaussian_weight(crimegwr_oracles::haversine_km(point.0, point.1, lon, lat), h)
        })
        .collect()
}
