use std::io::Read;

use chrono::{Datelike, NaiveDate};

use super::{line_of, open_csv, parse_f64, IngestError, ParseOutcome, WeatherColumns};

const DATE_FORMATS: [&str; 3] = ["%Y-%m-%d", "%m/%d/%Y", "%Y%m%d"];

#[derive(Debug, Clone, Copy, PartialEq, serde::Serialize, serde::Deserialize)]
pub struct WeatherDay {
    pub date: NaiveDate,
    pub avg_temp_f: f64,
    pub snowfall_in: f64,
}

pub fn parse_weather<R: Read>(
    input: R,
    columns: &WeatherColumns,
) -> Result<ParseOutcome<WeatherDay>, IngestError> {
    let required = [
        columns.date.as_str(),
        columns.avg_temp_f.as_str(),
        columns.snowfall_in.as_str(),
    ];
    let (mut reader, pos, _) = open_csv(input, &required)?;
    let mut out = ParseOutcome::new();
    let mut seen = std::collections::HashSet::new();
    for record in reader.records() {
        let record = record?;
        out.total_rows += 1;
        let line = line_of(&record);
        let field = |i: usize| record.get(pos[i]).unwrap_or("");
        let parsed = (|| {
            let raw = field(0);
            let date = DATE_FORMATS
                .iter()
                .find_map(|f| NaiveDate::parse_from_str(raw, f).ok())
                .ok_or_else(|| format!("unparseable date {raw:?}"))?;
            if !seen.insert(date) {
                return Err(format!("duplicate date {date}"));
            }
            let avg_temp_f = parse_f64(field(1), "avg_temp_f")?;
            if !(-60.0..=130.0).contains(&avg_temp_f) {
                return Err(format!("avg_temp_f {avg_temp_f} outside [-60, 130]"));
            }
            // NOAA writes "T" for a trace amount
            let snowfall_in = match field(2) {
                "" | "T" => 0.0,
                s => parse_f64(s, "snowfall_in")?,
            };
            if snowfall_in < 0.0 {
                return Err("negative snowfall".to_string());
            }
            Ok(WeatherDay { date, avg_temp_f, snowfall_in })
        })();
        match parsed {
            Ok(d) => out.records.push(d),
            Err(reason) => out.reject(line, reason),
        }
    }
    Ok(out)
}

/// Date-ordered weather with linear interpolation across missing days.
#[derive(Debug, Clone, PartialEq)]
pub struct WeatherSeries {
    days: Vec<WeatherDay>,
}

impl WeatherSeries {
    pub fn new(mut days: Vec<WeatherDay>) -> Self {
        days.sort_by_key(|d| d.date);
        days.dedup_by_key(|d| d.date);
        Self { days }
    }

    pub fn days(&self) -> &[WeatherDay] {
        &self.days
    }

    /// Temperature on `date` and whether it had to be interpolated.
    pub fn temp_on(&self, date: NaiveDate) -> Result<(f64, bool), IngestError> {
        match self.days.binary_search_by_key(&date, |d| d.date) {
            Ok(i) => Ok((self.days[i].avg_temp_f, false)),
            Err(i) if i == 0 || i == self.days.len() => Err(IngestError::WeatherGap(date)),
            Err(i) => {
                let (a, b) = (&self.days[i - 1], &self.days[i]);
                let span = (b.date - a.date).num_days() as f64;
                let t = (date - a.date).num_days() as f64 / span;
                Ok((a.avg_temp_f + t * (b.avg_temp_f - a.avg_temp_f), true))
            }
        }
    }

    /// Mean temperature per calendar month (index 0 = January); `None` for months
    /// without records.
    pub fn monthly_climatology(&self) -> [Option<f64>; 12] {
        let mut sum = [0.0; 12];
        let mut n = [0usize; 12];
        for d in &self.days {
            let m = d.date.month0() as usize;
            sum[m] += d.avg_temp_f;
            n[m] += 1;
        }
        std::array::from_fn(|m| (n[m] > 0).then(|| sum[m] / n[m] as f64))
    }
}
