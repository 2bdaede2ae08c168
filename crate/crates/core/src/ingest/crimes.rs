use std::io::Read;

use chrono::{NaiveDateTime, Timelike};

use super::{line_of, open_csv, parse_f64, CrimeColumns, IngestError, ParseOutcome};
use crate::crime::CrimeType;
use crate::geo::GeoPoint;

const TIMESTAMP_FORMATS: [&str; 5] = [
    "%Y-%m-%d %H:%M:%S",
    "%Y-%m-%d %H:%M",
    "%Y-%m-%dT%H:%M:%S",
    "%Y-%m-%dT%H:%M",
    "%m/%d/%Y %H:%M",
];

#[derive(Debug, Clone, PartialEq)]
pub struct CrimeIncident {
    /// Local civil time.
    pub occurred_at: NaiveDateTime,
    pub geoid: String,
    pub location: GeoPoint,
    pub crime_type: CrimeType,
}

impl CrimeIncident {
    pub fn hour(&self) -> u32 {
        self.occurred_at.hour()
    }
}

fn parse_timestamp(s: &str) -> Option<NaiveDateTime> {
    TIMESTAMP_FORMATS
        .iter()
        .find_map(|f| NaiveDateTime::parse_from_str(s, f).ok())
}

pub fn parse_crimes<R: Read>(
    input: R,
    columns: &CrimeColumns,
) -> Result<ParseOutcome<CrimeIncident>, IngestError> {
    let required = [
        columns.occurred_at.as_str(),
        columns.geoid.as_str(),
        columns.lon.as_str(),
        columns.lat.as_str(),
        columns.crime_type.as_str(),
    ];
    let (mut reader, pos, _) = open_csv(input, &required)?;
    let mut out = ParseOutcome::new();
    for record in reader.records() {
        let record = record?;
        out.total_rows += 1;
        let line = line_of(&record);
        let field = |i: usize| record.get(pos[i]).unwrap_or("");
        let parsed = (|| {
            let ts = field(0);
            let occurred_at =
                parse_timestamp(ts).ok_or_else(|| format!("unparseable timestamp {ts:?}"))?;
            let geoid = field(1);
            if geoid.is_empty() {
                return Err("missing geoid".to_string());
            }
            if field(2).is_empty() || field(3).is_empty() {
                return Err("missing coordinates".to_string());
            }
            let lon = parse_f64(field(2), "longitude")?;
            let lat = parse_f64(field(3), "latitude")?;
            let location = GeoPoint::new(lon, lat).map_err(|e| e.to_string())?;
            let crime_type: CrimeType = field(4).parse().map_err(|e: crate::crime::UnknownCrimeType| e.to_string())?;
            Ok(CrimeIncident { occurred_at, geoid: geoid.to_string(), location, crime_type })
        })();
        match parsed {
            Ok(inc) => out.records.push(inc),
            Err(reason) => out.reject(line, reason),
        }
    }
    Ok(out)
}
