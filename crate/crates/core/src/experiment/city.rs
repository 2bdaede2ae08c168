//! Synthetic city: GeoID demographics, daily weather and incidents written in
//! the same CSV formats the ingestion parsers read.
//!
//! Crime-type mix depends on location through property rate (burglary falls and
//! larceny rises with it) and on time of day, so fitted models have real spatial
//! structure to find.

use std::f64::consts::PI;
use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::Path;

use chrono::{Datelike, Duration, NaiveDate};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal, WeightedIndex};
use serde::{Deserialize, Serialize};

use super::ExperimentError;
use crate::crime::CrimeType;
use crate::geo::{BBox, GeoPoint};
use crate::ingest::{CrimeIncident, GeoUnit, GeoUnitTable, TimeBucket, WeatherDay};

/// Relative frequency of each hour, peaking at midnight and noon.
const HOUR_WEIGHTS: [f64; 24] = [
    7.0, 5.0, 4.0, 3.0, 2.5, 2.0, 2.5, 3.5, 4.5, 5.0, 5.5, 6.0, 7.5, 6.0, 5.5, 5.5, 5.5, 5.5, 5.5,
    5.5, 5.5, 5.5, 5.5, 6.0,
];

const ETHNICITIES: [&str; 3] = ["white", "black", "other"];

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CitySpec {
    pub seed: u64,
    pub bbox: BBox,
    /// GeoIDs are laid out on a jittered `grid x grid` lattice.
    pub grid: usize,
    pub first_year: i32,
    pub last_year: i32,
    pub min_incidents_per_geoid_year: usize,
    pub max_incidents_per_geoid_year: usize,
}

impl CitySpec {
    pub fn rochester(seed: u64) -> Self {
        Self {
            seed,
            bbox: BBox::new(-77.70, 43.10, -77.50, 43.26).expect("static box"),
            grid: 7,
            first_year: 2015,
            last_year: 2017,
            min_incidents_per_geoid_year: 40,
            max_incidents_per_geoid_year: 120,
        }
    }
}

#[derive(Debug, Clone)]
pub struct SyntheticCity {
    pub geounits: GeoUnitTable,
    pub weather: Vec<WeatherDay>,
    pub incidents: Vec<CrimeIncident>,
}

fn round_to(x: f64, digits: i32) -> f64 {
    let m = 10f64.powi(digits);
    (x * m).round() / m
}

pub fn generate_city(spec: &CitySpec) -> Result<SyntheticCity, ExperimentError> {
    if spec.grid == 0 || spec.first_year > spec.last_year {
        return Err(ExperimentError::InvalidSpec("empty grid or year range".into()));
    }
    if spec.min_incidents_per_geoid_year == 0
        || spec.min_incidents_per_geoid_year > spec.max_incidents_per_geoid_year
    {
        return Err(ExperimentError::InvalidSpec("bad incident count range".into()));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(spec.seed);
    let unit_noise = Normal::new(0.0, 1.0).expect("valid normal");

    let k = spec.grid;
    let (dw, dh) = (spec.bbox.width() / k as f64, spec.bbox.height() / k as f64);
    let mut units = Vec::with_capacity(k * k);
    for row in 0..k {
        for col in 0..k {
            let lon = spec.bbox.min_lon + (col as f64 + rng.gen_range(0.3..0.7)) * dw;
            let lat = spec.bbox.min_lat + (row as f64 + rng.gen_range(0.3..0.7)) * dh;
            let (s, t) = ((col as f64 + 0.5) / k as f64, (row as f64 + 0.5) / k as f64);
            let raw: Vec<f64> = vec![
                1.0 + 2.0 * s + 0.3 * rng.gen::<f64>(),
                0.3 + 1.5 * (1.0 - s) * t + 0.3 * rng.gen::<f64>(),
                0.2 + 0.3 * rng.gen::<f64>(),
            ];
            let total: f64 = raw.iter().map(|v| round_to(*v, 4)).sum();
            let mut shares: Vec<f64> = raw.iter().map(|v| round_to(round_to(*v, 4) / total, 4)).collect();
            let drift: f64 = 1.0 - shares.iter().sum::<f64>();
            shares[0] = round_to(shares[0] + drift, 4);
            units.push(GeoUnit {
                geoid: format!("G{row:02}{col:02}"),
                centroid: GeoPoint::new(round_to(lon, 6), round_to(lat, 6)).expect("inside box"),
                population_density: round_to(800.0 + 3500.0 * (1.0 - (2.0 * s - 1.0).abs()) * t + 300.0 * rng.gen::<f64>(), 1),
                property_rate: round_to(80.0 + 220.0 * s + 60.0 * t + 15.0 * unit_noise.sample(&mut rng), 2).max(5.0),
                ethnicity_shares: shares,
                median_age: round_to(28.0 + 15.0 * s + 4.0 * rng.gen::<f64>(), 1),
            });
        }
    }

    let start = NaiveDate::from_ymd_opt(spec.first_year, 1, 1).expect("valid year");
    let end = NaiveDate::from_ymd_opt(spec.last_year, 12, 31).expect("valid year");
    let mut weather = Vec::new();
    let mut day = start;
    while day <= end {
        let doy = f64::from(day.ordinal());
        let temp = 48.0 + 24.0 * (2.0 * PI * (doy - 105.0) / 365.25).sin() + 6.0 * unit_noise.sample(&mut rng);
        let temp = round_to(temp.clamp(-20.0, 100.0), 1);
        let snow = if temp < 32.0 && rng.gen_bool(0.4) { round_to(rng.gen_range(0.1..6.0), 1) } else { 0.0 };
        weather.push(WeatherDay { date: day, avg_temp_f: temp, snowfall_in: snow });
        day += Duration::days(1);
    }

    let prop_mean = units.iter().map(|u| u.property_rate).sum::<f64>() / units.len() as f64;
    let prop_sd = (units.iter().map(|u| (u.property_rate - prop_mean).powi(2)).sum::<f64>()
        / units.len() as f64)
        .sqrt()
        .max(1e-9);
    let hours = WeightedIndex::new(HOUR_WEIGHTS).expect("positive weights");
    let mut incidents = Vec::new();
    for unit in &units {
        let z = (unit.property_rate - prop_mean) / prop_sd;
        let (s, t) = spec.bbox.normalized(&unit.centroid);
        for year in spec.first_year..=spec.last_year {
            let n = rng.gen_range(spec.min_incidents_per_geoid_year..=spec.max_incidents_per_geoid_year);
            let year_start = NaiveDate::from_ymd_opt(year, 1, 1).expect("valid year");
            let days_in_year = if NaiveDate::from_ymd_opt(year, 12, 31).expect("valid").ordinal() == 366 { 366 } else { 365 };
            for _ in 0..n {
                let date = year_start + Duration::days(rng.gen_range(0..days_in_year));
                let hour = hours.sample(&mut rng) as u32;
                let minute = rng.gen_range(0..60);
                let bucket = TimeBucket::from_hour(hour);
                let scores = type_scores(z, s, t, bucket);
                let probs: Vec<f64> = scores.iter().map(|v| v.exp()).collect();
                let ty = CrimeType::ALL[WeightedIndex::new(&probs).expect("positive").sample(&mut rng)];
                let jitter_lon = round_to(unit.centroid.lon() + rng.gen_range(-0.002..0.002), 6);
                let jitter_lat = round_to(unit.centroid.lat() + rng.gen_range(-0.002..0.002), 6);
                incidents.push(CrimeIncident {
                    occurred_at: date.and_hms_opt(hour, minute, 0).expect("valid time"),
                    geoid: unit.geoid.clone(),
                    location: GeoPoint::new(jitter_lon, jitter_lat).expect("inside box"),
                    crime_type: ty,
                });
            }
        }
    }
    incidents.sort_by(|a, b| a.occurred_at.cmp(&b.occurred_at).then_with(|| a.geoid.cmp(&b.geoid)));

    Ok(SyntheticCity {
        geounits: GeoUnitTable::new(ETHNICITIES.iter().map(|s| s.to_string()).collect(), units),
        weather,
        incidents,
    })
}

/// Unnormalised log-odds per crime type, in [`CrimeType::ALL`] order.
fn type_scores(prop_z: f64, s: f64, t: f64, bucket: TimeBucket) -> [f64; 6] {
    let night = f64::from(u8::from(bucket == TimeBucket::Night));
    let afternoon = f64::from(u8::from(bucket == TimeBucket::Afternoon));
    [
        -0.6 - 0.3 * prop_z + 0.5 * night,
        0.2 - (0.4 + 0.5 * t) * prop_z + 0.3 * afternoon,
        1.0 + (0.3 + 0.4 * s) * prop_z + 0.2 * afternoon,
        -0.4 + 0.3 * (2.0 * PI * t).sin(),
        -3.2 - 0.2 * prop_z + 0.4 * night,
        -0.5 - 0.4 * prop_z + 0.4 * night,
    ]
}

impl SyntheticCity {
    /// Writes `crimes.csv`, `demographics.csv` and `weather.csv` into `dir`.
    pub fn write_csvs(&self, dir: &Path) -> Result<(), ExperimentError> {
        std::fs::create_dir_all(dir)?;

        let mut w = csv::Writer::from_writer(BufWriter::new(File::create(dir.join("crimes.csv"))?));
        w.write_record(["occurred_at", "geoid", "lon", "lat", "crime_type"])?;
        for i in &self.incidents {
            w.write_record([
                i.occurred_at.format("%Y-%m-%d %H:%M").to_string(),
                i.geoid.clone(),
                i.location.lon().to_string(),
                i.location.lat().to_string(),
                i.crime_type.label().to_string(),
            ])?;
        }
        w.flush()?;

        let mut w = csv::Writer::from_writer(BufWriter::new(File::create(dir.join("demographics.csv"))?));
        let mut header = vec![
            "geoid".to_string(),
            "lon".into(),
            "lat".into(),
            "population_density".into(),
            "property_rate".into(),
            "median_age".into(),
        ];
        header.extend(self.geounits.ethnicity_names.iter().map(|n| format!("eth_{n}")));
        w.write_record(&header)?;
        for u in &self.geounits.units {
            let mut rec = vec![
                u.geoid.clone(),
                u.centroid.lon().to_string(),
                u.centroid.lat().to_string(),
                u.population_density.to_string(),
                u.property_rate.to_string(),
                u.median_age.to_string(),
            ];
            rec.extend(u.ethnicity_shares.iter().map(|s| s.to_string()));
            w.write_record(&rec)?;
        }
        w.flush()?;

        let mut w = BufWriter::new(File::create(dir.join("weather.csv"))?);
        writeln!(w, "date,avg_temp_f,snowfall_in")?;
        for d in &self.weather {
            writeln!(w, "{},{},{}", d.date.format("%Y-%m-%d"), d.avg_temp_f, d.snowfall_in)?;
        }
        w.flush()?;
        let _ = self.weather.first().map(|d| d.date.year());
        Ok(())
    }
}
