//! Distance-decay kernels.

use serde::{Deserialize, Serialize};

use crate::gwr::GwrError;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum KernelKind {
    Gaussian,
}

/// Fixed-bandwidth kernel. The bandwidth is a length in kilometres.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct KernelSpec {
    kind: KernelKind,
    bandwidth_km: f64,
}

impl KernelSpec {
    pub fn gaussian(bandwidth_km: f64) -> Result<Self, GwrError> {
        Self::new(KernelKind::Gaussian, bandwidth_km)
    }

    pub fn new(kind: KernelKind, bandwidth_km: f64) -> Result<Self, GwrError> {
        if !(bandwidth_km > 0.0 && bandwidth_km.is_finite()) {
            return Err(GwrError::InvalidBandwidth(bandwidth_km));
        }
        Ok(Self { kind, bandwidth_km })
    }

    pub fn kind(&self) -> KernelKind {
        self.kind
    }

    pub fn bandwidth_km(&self) -> f64 {
        self.bandwidth_km
    }

    #[inline]
    pub fn weight(&self, d_km: f64) -> f64 {
        kernel_weight(d_km, self)
    }
}

/// `exp(-(d/h)^2)`; 1 at zero distance, strictly decreasing, never truncated.
#[inline]
pub fn kernel_weight(d_km: f64, k: &KernelSpec) -> f64 {
    match k.kind {
        KernelKind::Gaussian => {
            let r = d_km / k.bandwidth_km;
            (-(r * r)).exp()
        }
    }
}
