//! Column-name mapping for the three input files.
//!
//! Loaded from a TOML file where each key maps a field to a header name:
//!
//! ```toml
//! [crimes]
//! occurred_at = "OccurredFrom"
//! crime_type = "Statute_Text"
//!
//! [weather]
//! avg_temp_f = "TAVG"
//! ```
//!
//! Unlisted keys keep their defaults.

use serde::Deserialize;

use super::IngestError;

#[derive(Debug, Clone, PartialEq, Eq, Default, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ColumnConfig {
    pub crimes: CrimeColumns,
    pub demographics: DemographicColumns,
    pub weather: WeatherColumns,
}

impl ColumnConfig {
    pub fn from_toml(s: &str) -> Result<Self, IngestError> {
        toml::from_str(s).map_err(|e| IngestError::Config(e.to_string()))
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct CrimeColumns {
    pub occurred_at: String,
    pub geoid: String,
    pub lon: String,
    pub lat: String,
    pub crime_type: String,
}

impl Default for CrimeColumns {
    fn default() -> Self {
        Self {
            occurred_at: "occurred_at".into(),
            geoid: "geoid".into(),
            lon: "lon".into(),
            lat: "lat".into(),
            crime_type: "crime_type".into(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct DemographicColumns {
    pub geoid: String,
    pub lon: String,
    pub lat: String,
    pub population_density: String,
    pub property_rate: String,
    pub median_age: String,
    /// Every header starting with this prefix is an ethnicity share column.
    pub ethnicity_prefix: String,
}

impl Default for DemographicColumns {
    fn default() -> Self {
        Self {
            geoid: "geoid".into(),
            lon: "lon".into(),
            lat: "lat".into(),
            population_density: "population_density".into(),
            property_rate: "property_rate".into(),
            median_age: "median_age".into(),
            ethnicity_prefix: "eth_".into(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct WeatherColumns {
    pub date: String,
    pub avg_temp_f: String,
    pub snowfall_in: String,
}

impl Default for WeatherColumns {
    fn default() -> Self {
        Self {
            date: "date".into(),
            avg_temp_f: "avg_temp_f".into(),
            snowfall_in: "snowfall_in".into(),
        }
    }
}
