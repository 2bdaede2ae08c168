//! Versioned JSON form of [`FittedGwr`].
//!
//! ```json
//! {"version":1,
//!  "kernel":{"kind":"gaussian","bandwidth_km":2.5},
//!  "feature_names":["intercept", ...],
//!  "locals":[{"geoid":"...","lon":-77.6,"lat":43.1,"beta":[...],"ridge_applied":false,
//!             "effective_weight_sum":12.3}],
//!  "diagnostics":{"global_r_squared":0.91,"residuals":[...],"residual_variance":0.002}}
//! ```

use serde::{Deserialize, Serialize};

use super::{FitDiagnostics, FittedGwr, GwrError, LocalFit};
use crate::geo::GeoPoint;
use crate::kernel::{KernelKind, KernelSpec};

pub const FITTED_GWR_FORMAT_VERSION: u32 = 1;

#[derive(Serialize, Deserialize)]
struct KernelDoc {
    kind: KernelKind,
    bandwidth_km: f64,
}

#[derive(Serialize, Deserialize)]
struct LocalDoc {
    geoid: Option<String>,
    lon: f64,
    lat: f64,
    beta: Vec<f64>,
    ridge_applied: bool,
    effective_weight_sum: f64,
}

#[derive(Serialize, Deserialize)]
struct ModelDoc {
    version: u32,
    kernel: KernelDoc,
    feature_names: Vec<String>,
    locals: Vec<LocalDoc>,
    diagnostics: FitDiagnostics,
}

impl From<&FittedGwr> for ModelDoc {
    fn from(m: &FittedGwr) -> Self {
        ModelDoc {
            version: FITTED_GWR_FORMAT_VERSION,
            kernel: KernelDoc { kind: m.kernel.kind(), bandwidth_km: m.kernel.bandwidth_km() },
            feature_names: m.feature_names.clone(),
            locals: m
                .locals
                .iter()
                .map(|l| LocalDoc {
                    geoid: l.geoid.clone(),
                    lon: l.point.lon(),
                    lat: l.point.lat(),
                    beta: l.beta.clone(),
                    ridge_applied: l.ridge_applied,
                    effective_weight_sum: l.effective_weight_sum,
                })
                .collect(),
            diagnostics: m.diagnostics.clone(),
        }
    }
}

impl TryFrom<ModelDoc> for FittedGwr {
    type Error = GwrError;

    fn try_from(doc: ModelDoc) -> Result<Self, Self::Error> {
        if doc.version != FITTED_GWR_FORMAT_VERSION {
            return Err(GwrError::Document(format!("unsupported version {}", doc.version)));
        }
        let kernel = KernelSpec::new(doc.kernel.kind, doc.kernel.bandwidth_km)?;
        let p = doc.feature_names.len();
        if p == 0 {
            return Err(GwrError::Document("no features".into()));
        }
        let locals = doc
            .locals
            .into_iter()
            .map(|l| {
                let point = GeoPoint::new(l.lon, l.lat).map_err(|e| GwrError::Document(e.to_string()))?;
                if l.beta.len() != p {
                    return Err(GwrError::Document(format!(
                        "local at {point} has {} coefficients, expected {p}",
                        l.beta.len()
                    )));
                }
                if !(l.effective_weight_sum > 0.0) {
                    return Err(GwrError::Document(format!("local at {point} has no weight")));
                }
                Ok(LocalFit {
                    point,
                    geoid: l.geoid,
                    beta: l.beta,
                    effective_weight_sum: l.effective_weight_sum,
                    ridge_applied: l.ridge_applied,
                })
            })
            .collect::<Result<Vec<_>, _>>()?;
        Ok(FittedGwr::from_parts(kernel, doc.feature_names, locals, doc.diagnostics))
    }
}

impl Serialize for FittedGwr {
    fn serialize<S: serde::Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
        ModelDoc::from(self).serialize(s)
    }
}

impl<'de> Deserialize<'de> for FittedGwr {
    fn deserialize<D: serde::Deserializer<'de>>(d: D) -> Result<Self, D::Error> {
        let doc = ModelDoc::deserialize(d)?;
        FittedGwr::try_from(doc).map_err(serde::de::Error::custom)
    }
}

impl FittedGwr {
    pub fn to_json(&self) -> String {
        serde_json::to_string(self).expect("model serialisation cannot fail")
    }

    pub fn from_json(s: &str) -> Result<Self, GwrError> {
        serde_json::from_str(s).map_err(|e| GwrError::Document(e.to_string()))
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::gwr::{fit, GwrDataset, GwrRow};

    fn model() -> FittedGwr {
        let rows = (0..9)
            .map(|i| {
                let loc = GeoPoint::new(-77.6 + 0.013 * (i % 3) as f64, 43.1 + 0.007 * (i / 3) as f64).unwrap();
                let x = (i as f64 * 1.3).sin();
                GwrRow::new(loc, vec![1.0, x], 0.1 + 0.3 * x + 0.01 * (i as f64).cos())
                    .with_geoid(format!("g{}", i % 3))
            })
            .collect();
        fit(&GwrDataset::unnamed(rows).unwrap(), &KernelSpec::gaussian(1.7).unwrap()).unwrap()
    }

    #[test]
    fn json_round_trip_is_exact() {
        let m = model();
        let json = m.to_json();
        let back = FittedGwr::from_json(&json).unwrap();
        assert_eq!(back, m);
        assert_eq!(back.to_json(), json);
    }

    #[test]
    fn field_order() {
        let json = model().to_json();
        let pos = |k: &str| json.find(k).unwrap();
        assert!(pos("\"version\"") < pos("\"kernel\""));
        assert!(pos("\"kernel\"") < pos("\"feature_names\""));
        assert!(pos("\"feature_names\"") < pos("\"locals\""));
        assert!(pos("\"locals\"") < pos("\"diagnostics\""));
        assert!(pos("\"geoid\"") < pos("\"lon\""));
        assert!(pos("\"beta\"") < pos("\"ridge_applied\""));
        assert!(json.starts_with("{\"version\":1,\"kernel\":{\"kind\":\"gaussian\",\"bandwidth_km\":1.7}"));
    }

    #[test]
    fn rejects_bad_documents() {
        let json = model().to_json();
        assert!(FittedGwr::from_json(&json.replacen("\"version\":1", "\"version\":2", 1)).is_err());
        assert!(FittedGwr::from_json(&json.replacen("\"bandwidth_km\":1.7", "\"bandwidth_km\":-1", 1)).is_err());
        assert!(FittedGwr::from_json(&json.replacen("\"intercept\",", "", 1)).is_err());
    }
}
