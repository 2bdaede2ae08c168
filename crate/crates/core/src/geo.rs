//! Geographic coordinates and great-circle distance.

use std::fmt;

use serde::{Deserialize, Serialize};
use thiserror::Error;

/// Mean Earth radius (IUGG / WGS-84 mean), kilometres.
pub const EARTH_RADIUS_KM: f64 = 6371.0088;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum GeoError {
    #[error("longitude {0} outside [-180, 180]")]
    Longitude(f64),
    #[error("latitude {0} outside [-90, 90]")]
    Latitude(f64),
    #[error("bounding box is empty or inverted: {0}")]
    BBox(String),
}

/// A location in decimal degrees. Longitude is the `u` coordinate, latitude `v`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "RawPoint", into = "RawPoint")]
pub struct GeoPoint {
    lon: f64,
    lat: f64,
}

#[derive(Serialize, Deserialize)]
struct RawPoint {
    lon: f64,
    lat: f64,
}

impl TryFrom<RawPoint> for GeoPoint {
    type Error = GeoError;
    fn try_from(raw: RawPoint) -> Result<Self, Self::Error> {
        GeoPoint::new(raw.lon, raw.lat)
    }
}

impl From<GeoPoint> for RawPoint {
    fn from(p: GeoPoint) -> Self {
        RawPoint { lon: p.lon, lat: p.lat }
    }
}

impl GeoPoint {
    pub fn new(lon: f64, lat: f64) -> Result<Self, GeoError> {
        if !(-180.0..=180.0).contains(&lon) {
            return Err(GeoError::Longitude(lon));
        }
        if !(-90.0..=90.0).contains(&lat) {
            return Err(GeoError::Latitude(lat));
        }
        Ok(Self { lon, lat })
    }

    pub fn lon(&self) -> f64 {
        self.lon
    }

    pub fn lat(&self) -> f64 {
        self.lat
    }

    /// Bitwise key, used to group rows that share a location exactly.
    pub(crate) fn key(&self) -> (u64, u64) {
        (self.lon.to_bits(), self.lat.to_bits())
    }
}

impl fmt::Display for GeoPoint {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "({}, {})", self.lon, self.lat)
    }
}

/// Haversine great-circle distance in kilometres.
pub fn distance_km(a: &GeoPoint, b: &GeoPoint) -> f64 {
    if a.key() == b.key() {
        return 0.0;
    }
    let (lat1, lat2) = (a.lat.to_radians(), b.lat.to_radians());
    let dlat = lat2 - lat1;
    let dlon = (b.lon - a.lon).to_radians();
    let h = (dlat / 2.0).sin().powi(2) + lat1.cos() * lat2.cos() * (dlon / 2.0).sin().powi(2);
    2.0 * EARTH_RADIUS_KM * h.sqrt().min(1.0).asin()
}

/// Axis-aligned lon/lat rectangle.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BBox {
    pub min_lon: f64,
    pub min_lat: f64,
    pub max_lon: f64,
    pub max_lat: f64,
}

impl BBox {
    pub fn new(min_lon: f64, min_lat: f64, max_lon: f64, max_lat: f64) -> Result<Self, GeoError> {
        GeoPoint::new(min_lon, min_lat)?;
        GeoPoint::new(max_lon, max_lat)?;
        if !(min_lon < max_lon && min_lat < max_lat) {
            return Err(GeoError::BBox(format!(
                "{min_lon},{min_lat},{max_lon},{max_lat}"
            )));
        }
        Ok(Self { min_lon, min_lat, max_lon, max_lat })
    }

    /// Smallest box containing every point, or `None` when the points are
    /// empty or collinear along an axis.
    pub fn enclosing<'a>(points: impl IntoIterator<Item = &'a GeoPoint>) -> Option<Self> {
        let mut it = points.into_iter();
        let first = it.next()?;
        let mut b = (first.lon, first.lat, first.lon, first.lat);
        for p in it {
            b.0 = b.0.min(p.lon);
            b.1 = b.1.min(p.lat);
            b.2 = b.2.max(p.lon);
            b.3 = b.3.max(p.lat);
        }
        Self::new(b.0, b.1, b.2, b.3).ok()
    }

    pub fn width(&self) -> f64 {
        self.max_lon - self.min_lon
    }

    pub fn height(&self) -> f64 {
        self.max_lat - self.min_lat
    }

    pub fn center(&self) -> GeoPoint {
        GeoPoint {
            lon: 0.5 * (self.min_lon + self.max_lon),
            lat: 0.5 * (self.min_lat + self.max_lat),
        }
    }

    /// Position of `p` relative to the box, each axis mapped to `[0, 1]`.
    pub fn normalized(&self, p: &GeoPoint) -> (f64, f64) {
        ((p.lon - self.min_lon) / self.width(), (p.lat - self.min_lat) / self.height())
    }

    pub fn contains(&self, p: &GeoPoint) -> bool {
        (self.min_lon..=self.max_lon).contains(&p.lon) && (self.min_lat..=self.max_lat).contains(&p.lat)
    }
}

impl std::str::FromStr for BBox {
    type Err = GeoError;

    /// Parses `min_lon,min_lat,max_lon,max_lat`.
    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let parts: Vec<f64> = s
            .split(',')
            .map(|t| t.trim().parse::<f64>())
            .collect::<Result<_, _>>()
            .map_err(|_| GeoError::BBox(s.to_string()))?;
        match parts.as_slice() {
            [a, b, c, d] => Self::new(*a, *b, *c, *d),
            _ => Err(GeoError::BBox(s.to_string())),
        }
    }
}
