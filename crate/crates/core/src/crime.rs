use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

/// The six offence categories modelled as separate responses.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum CrimeType {
    AggravatedAssault,
    Burglary,
    Larceny,
    MotorVehicleTheft,
    Murder,
    Robbery,
}

impl CrimeType {
    pub const ALL: [CrimeType; 6] = [
        CrimeType::AggravatedAssault,
        CrimeType::Burglary,
        CrimeType::Larceny,
        CrimeType::MotorVehicleTheft,
        CrimeType::Murder,
        CrimeType::Robbery,
    ];

    pub fn index(self) -> usize {
        self as usize
    }

    /// Wire name, e.g. `motor_vehicle_theft`.
    pub fn key(self) -> &'static str {
        match self {
            CrimeType::AggravatedAssault => "aggravated_assault",
            CrimeType::Burglary => "burglary",
            CrimeType::Larceny => "larceny",
            CrimeType::MotorVehicleTheft => "motor_vehicle_theft",
            CrimeType::Murder => "murder",
            CrimeType::Robbery => "robbery",
        }
    }

    pub fn label(self) -> &'static str {
        match self {
            CrimeType::AggravatedAssault => "Aggravated Assault",
            CrimeType::Burglary => "Burglary",
            CrimeType::Larceny => "Larceny",
            CrimeType::MotorVehicleTheft => "Motor Vehicle Theft",
            CrimeType::Murder => "Murder",
            CrimeType::Robbery => "Robbery",
        }
    }
}

impl fmt::Display for CrimeType {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.key())
    }
}

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
#[error("unknown crime type {0:?}")]
pub struct UnknownCrimeType(pub String);

impl FromStr for CrimeType {
    type Err = UnknownCrimeType;

    /// Accepts any spelling that matches after dropping case, spaces and punctuation:
    /// `Larceny`, `MOTOR VEHICLE THEFT`, `aggravated_assault`, `AggravatedAssault`.
    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let norm: String = s
            .chars()
            .filter(|c| c.is_ascii_alphanumeric())
            .map(|c| c.to_ascii_lowercase())
            .collect();
        let t = match norm.as_str() {
            "aggravatedassault" | "aggassault" => CrimeType::AggravatedAssault,
            "burglary" => CrimeType::Burglary,
            "larceny" => CrimeType::Larceny,
            "motorvehicletheft" | "mvt" => CrimeType::MotorVehicleTheft,
            "murder" => CrimeType::Murder,
            "robbery" => CrimeType::Robbery,
            _ => return Err(UnknownCrimeType(s.to_string())),
        };
        Ok(t)
    }
}
