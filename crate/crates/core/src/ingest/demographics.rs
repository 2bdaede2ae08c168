use std::collections::HashMap;
use std::io::Read;

use super::{line_of, open_csv, parse_f64, DemographicColumns, IngestError, ParseOutcome};
use crate::geo::{distance_km, GeoPoint};

/// Accepted band for the raw sum of ethnicity shares before renormalisation.
const SHARE_SUM_BAND: (f64, f64) = (0.98, 1.02);

/// Demographic attributes of one GeoID, located at its centroid.
#[derive(Debug, Clone, PartialEq, serde::Serialize, serde::Deserialize)]
pub struct GeoUnit {
    pub geoid: String,
    pub centroid: GeoPoint,
    /// Persons per km^2.
    pub population_density: f64,
    /// Median assessed value per unit area.
    pub property_rate: f64,
    /// Fractions summing to 1, ordered as [`GeoUnitTable::ethnicity_names`].
    pub ethnicity_shares: Vec<f64>,
    pub median_age: f64,
}

/// All GeoUnits plus the ethnicity category names shared by their share vectors.
#[derive(Debug, Clone, PartialEq, serde::Serialize, serde::Deserialize)]
#[serde(from = "TableDoc")]
pub struct GeoUnitTable {
    pub ethnicity_names: Vec<String>,
    pub units: Vec<GeoUnit>,
    #[serde(skip)]
    index: HashMap<String, usize>,
}

#[derive(serde::Deserialize)]
struct TableDoc {
    ethnicity_names: Vec<String>,
    units: Vec<GeoUnit>,
}

impl From<TableDoc> for GeoUnitTable {
    fn from(doc: TableDoc) -> Self {
        GeoUnitTable::new(doc.ethnicity_names, doc.units)
    }
}

impl GeoUnitTable {
    pub fn new(ethnicity_names: Vec<String>, units: Vec<GeoUnit>) -> Self {
        let index = units.iter().enumerate().map(|(i, u)| (u.geoid.clone(), i)).collect();
        Self { ethnicity_names, units, index }
    }

    pub fn get(&self, geoid: &str) -> Option<&GeoUnit> {
        self.index.get(geoid).map(|&i| &self.units[i])
    }

    /// Nearest centroid and its distance in km. Ties go to the earlier unit.
    pub fn nearest(&self, p: &GeoPoint) -> Option<(&GeoUnit, f64)> {
        self.units
            .iter()
            .map(|u| (u, distance_km(p, &u.centroid)))
            .fold(None, |best: Option<(&GeoUnit, f64)>, (u, d)| match best {
                Some((_, bd)) if bd <= d => best,
                _ => Some((u, d)),
            })
    }
}

pub fn parse_demographics<R: Read>(
    input: R,
    columns: &DemographicColumns,
) -> Result<(Vec<String>, ParseOutcome<GeoUnit>), IngestError> {
    let required = [
        columns.geoid.as_str(),
        columns.lon.as_str(),
        columns.lat.as_str(),
        columns.population_density.as_str(),
        columns.property_rate.as_str(),
        columns.median_age.as_str(),
    ];
    let (mut reader, pos, header) = open_csv(input, &required)?;
    let eth: Vec<(usize, String)> = header
        .iter()
        .enumerate()
        .filter_map(|(i, h)| {
            h.strip_prefix(columns.ethnicity_prefix.as_str())
                .map(|name| (i, name.to_string()))
        })
        .collect();
    if eth.is_empty() {
        return Err(IngestError::MalformedHeader {
            missing: vec![format!("{}*", columns.ethnicity_prefix)],
        });
    }
    let names: Vec<String> = eth.iter().map(|(_, n)| n.clone()).collect();

    let mut out = ParseOutcome::new();
    let mut seen = std::collections::HashSet::new();
    for record in reader.records() {
        let record = record?;
        out.total_rows += 1;
        let line = line_of(&record);
        let field = |i: usize| record.get(i).unwrap_or("");
        let parsed = (|| {
            let geoid = field(pos[0]);
            if geoid.is_empty() {
                return Err("missing geoid".to_string());
            }
            if !seen.insert(geoid.to_string()) {
                return Err(format!("duplicate geoid {geoid:?}"));
            }
            let lon = parse_f64(field(pos[1]), "longitude")?;
            let lat = parse_f64(field(pos[2]), "latitude")?;
            let centroid = GeoPoint::new(lon, lat).map_err(|e| e.to_string())?;
            let population_density = parse_f64(field(pos[3]), "population_density")?;
            let property_rate = parse_f64(field(pos[4]), "property_rate")?;
            let median_age = parse_f64(field(pos[5]), "median_age")?;
            if population_density < 0.0 {
                return Err("negative population_density".to_string());
            }
            if property_rate < 0.0 {
                return Err("negative property_rate".to_string());
            }
            if median_age <= 0.0 {
                return Err("median_age must be positive".to_string());
            }
            let shares = eth
                .iter()
                .map(|(i, n)| parse_f64(field(*i), &format!("ethnicity share {n}")))
                .collect::<Result<Vec<_>, _>>()?;
            let shares = normalize_shares(shares)?;
            Ok(GeoUnit {
                geoid: geoid.to_string(),
                centroid,
                population_density,
                property_rate,
                ethnicity_shares: shares,
                median_age,
            })
        })();
        match parsed {
            Ok(u) => out.records.push(u),
            Err(reason) => {
                out.reject(line, reason);
            }
        }
    }
    Ok((names, out))
}

/// Renormalises shares whose sum is within [`SHARE_SUM_BAND`]; rejects the rest.
fn normalize_shares(shares: Vec<f64>) -> Result<Vec<f64>, String> {
    if let Some(bad) = shares.iter().find(|s| !(0.0..=1.0).contains(*s)) {
        return Err(format!("ethnicity share {bad} outside [0, 1]"));
    }
    let sum: f64 = shares.iter().sum();
    if !(SHARE_SUM_BAND.0..=SHARE_SUM_BAND.1).contains(&sum) {
        return Err(format!("ethnicity shares sum to {sum}, outside [0.98, 1.02]"));
    }
    if sum == 1.0 {
        return Ok(shares);
    }
    Ok(shares.into_iter().map(|s| s / sum).collect())
}

#[cfg(test)]
mod tests {
    use super::*;

    const HEADER: &str = "geoid,lon,lat,population_density,property_rate,median_age,eth_a,eth_b,eth_c\n";

    fn parse(body: &str) -> (Vec<String>, ParseOutcome<GeoUnit>) {
        parse_demographics(format!("{HEADER}{body}").as_bytes(), &DemographicColumns::default()).unwrap()
    }

    #[test]
    fn exact_shares_accepted_unchanged() {
        let (names, out) = parse("G1,-77.6,43.1,1000,150,35,0.5,0.3,0.2\n");
        assert_eq!(names, vec!["a", "b", "c"]);
        assert_eq!(out.records[0].ethnicity_shares, vec![0.5, 0.3, 0.2]);
    }

    #[test]
    fn near_unit_shares_renormalised() {
        let (_, out) = parse("G1,-77.6,43.1,1000,150,35,0.50,0.30,0.21\n");
        let s = &out.records[0].ethnicity_shares;
        assert!((s.iter().sum::<f64>() - 1.0).abs() < 1e-12);
        assert!((s[0] - 0.5 / 1.01).abs() < 1e-15);
    }

    #[test]
    fn far_from_unit_shares_rejected() {
        let (_, out) = parse("G1,-77.6,43.1,1000,150,35,0.5,0.3,0.5\n");
        assert!(out.records.is_empty());
        assert_eq!(out.rejects[0].line_no, 2);
    }

    #[test]
    fn invariants_enforced() {
        let (_, out) = parse(
            "G1,-77.6,43.1,-1,150,35,0.5,0.3,0.2\n\
             G2,-77.6,43.1,10,-150,35,0.5,0.3,0.2\n\
             G3,-77.6,43.1,10,150,0,0.5,0.3,0.2\n\
             G4,-77.6,43.1,10,150,30,1.2,-0.2,0.0\n\
             G5,-77.6,43.1,10,150,30,0.5,0.3,0.2\n\
             G5,-77.6,43.1,10,150,30,0.5,0.3,0.2\n",
        );
        assert_eq!(out.records.len(), 1);
        assert_eq!(out.rejects.len(), 5);
        assert_eq!(out.total_rows, 6);
        assert!(out.rejects[4].reason.contains("duplicate"));
    }

    #[test]
    fn missing_ethnicity_columns() {
        let r = parse_demographics(
            "geoid,lon,lat,population_density,property_rate,median_age\n".as_bytes(),
            &DemographicColumns::default(),
        );
        assert!(matches!(r, Err(IngestError::MalformedHeader { .. })));
    }

    #[test]
    fn nearest_lookup() {
        let (names, out) = parse(
            "G1,-77.60,43.10,1,1,30,1,0,0\nG2,-77.50,43.10,1,1,30,1,0,0\n",
        );
        let t = GeoUnitTable::new(names, out.records);
        let (u, d) = t.nearest(&GeoPoint::new(-77.52, 43.1).unwrap()).unwrap();
        assert_eq!(u.geoid, "G2");
        assert!(d > 1.0 && d < 2.0);
        assert_eq!(t.get("G1").unwrap().geoid, "G1");
        assert!(t.get("G9").is_none());
    }
}
