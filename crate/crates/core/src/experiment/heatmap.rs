//! Prediction grids over a bounding box and their GeoJSON form.

use rayon::prelude::*;
use serde_json::{json, Value};

use super::ExperimentError;
use crate::crime::CrimeType;
use crate::geo::{BBox, GeoPoint};
use crate::gwr::{FittedGwr, GwrDataset, GwrError, PredictMode};

/// `resolution x resolution` cells, row-major from the south-west corner.
/// Cells whose local fit was degenerate hold `None`.
#[derive(Debug, Clone, PartialEq)]
pub struct HeatmapGrid {
    pub bbox: BBox,
    pub resolution: usize,
    pub values: Vec<Option<f64>>,
    pub crime_type: Option<CrimeType>,
    pub year: Option<i32>,
}

impl HeatmapGrid {
    pub fn get(&self, row: usize, col: usize) -> Option<f64> {
        self.values[row * self.resolution + col]
    }

    fn cell_size(&self) -> (f64, f64) {
        (self.bbox.width() / self.resolution as f64, self.bbox.height() / self.resolution as f64)
    }

    pub fn cell_center(&self, row: usize, col: usize) -> GeoPoint {
        cell_center(&self.bbox, self.resolution, row, col)
    }
}

fn cell_center(bbox: &BBox, resolution: usize, row: usize, col: usize) -> GeoPoint {
    let dw = bbox.width() / resolution as f64;
    let dh = bbox.height() / resolution as f64;
    GeoPoint::new(
        bbox.min_lon + (col as f64 + 0.5) * dw,
        bbox.min_lat + (row as f64 + 0.5) * dh,
    )
    .expect("cell centre inside a valid box")
}

/// Predicts every cell centre by refitting there. `features_at` supplies the
/// feature vector for a location (spatial attributes plus the fixed temporal
/// context). Values are clamped to `[0, 1]`.
pub fn heatmap<F>(
    model: &FittedGwr,
    training: &GwrDataset,
    bbox: &BBox,
    resolution: usize,
    features_at: F,
) -> Result<HeatmapGrid, ExperimentError>
where
    F: Fn(&GeoPoint) -> Vec<f64> + Sync,
{
    if resolution == 0 {
        return Err(ExperimentError::InvalidSpec("resolution must be positive".into()));
    }
    let values = (0..resolution * resolution)
        .into_par_iter()
        .map(|cell| {
            let center = cell_center(bbox, resolution, cell / resolution, cell % resolution);
            let features = features_at(&center);
            match model.predict(training, &center, &features, &PredictMode::RefitAtPoint) {
                Ok(v) => Ok(Some(v.clamp(0.0, 1.0))),
                Err(GwrError::DegenerateFit { .. }) => Ok(None),
                Err(e) => Err(e.into()),
            }
        })
        .collect::<Result<Vec<_>, ExperimentError>>()?;
    Ok(HeatmapGrid { bbox: *bbox, resolution, values, crime_type: None, year: None })
}

/// Largest absolute difference between horizontally or vertically adjacent
/// non-null cells.
pub fn max_adjacent_difference(grid: &HeatmapGrid) -> Option<f64> {
    let r = grid.resolution;
    let mut best: Option<f64> = None;
    for i in 0..r {
        for j in 0..r {
            let Some(v) = grid.get(i, j) else { continue };
            for (a, b) in [(i + 1, j), (i, j + 1)] {
                if a < r && b < r {
                    if let Some(w) = grid.get(a, b) {
                        let d = (v - w).abs();
                        best = Some(best.map_or(d, |x: f64| x.max(d)));
                    }
                }
            }
        }
    }
    best
}

/// GeoJSON `FeatureCollection` of cell polygons, each with properties
/// `row`, `col` and `p` (null for missing cells).
pub fn export_geojson(grid: &HeatmapGrid) -> String {
    let (dw, dh) = grid.cell_size();
    let b = &grid.bbox;
    let features: Vec<Value> = (0..grid.resolution)
        .flat_map(|row| (0..grid.resolution).map(move |col| (row, col)))
        .map(|(row, col)| {
            let (x0, y0) = (b.min_lon + col as f64 * dw, b.min_lat + row as f64 * dh);
            let (x1, y1) = (x0 + dw, y0 + dh);
            json!({
                "type": "Feature",
                "geometry": {
                    "type": "Polygon",
                    "coordinates": [[[x0, y0], [x1, y0], [x1, y1], [x0, y1], [x0, y0]]],
                },
                "properties": { "row": row, "col": col, "p": grid.get(row, col) },
            })
        })
        .collect();
    let doc = json!({
        "type": "FeatureCollection",
        "bbox": [b.min_lon, b.min_lat, b.max_lon, b.max_lat],
        "resolution": grid.resolution,
        "crime_type": grid.crime_type.map(|t| t.key()),
        "year": grid.year,
        "features": features,
    });
    serde_json::to_string(&doc).expect("json values always serialise")
}

/// Reads a grid back from [`export_geojson`] output.
pub fn parse_geojson(s: &str) -> Result<HeatmapGrid, ExperimentError> {
    let bad = |m: &str| ExperimentError::GeoJson(m.to_string());
    let doc: Value = serde_json::from_str(s).map_err(|e| ExperimentError::GeoJson(e.to_string()))?;
    let bbox = doc["bbox"]
        .as_array()
        .and_then(|a| a.iter().map(Value::as_f64).collect::<Option<Vec<f64>>>())
        .filter(|v| v.len() == 4)
        .ok_or_else(|| bad("bbox"))?;
    let bbox = BBox::new(bbox[0], bbox[1], bbox[2], bbox[3]).map_err(|e| ExperimentError::GeoJson(e.to_string()))?;
    let resolution = doc["resolution"].as_u64().ok_or_else(|| bad("resolution"))? as usize;
    let crime_type = match &doc["crime_type"] {
        Value::Null => None,
        v => Some(
            v.as_str()
                .and_then(|s| s.parse().ok())
                .ok_or_else(|| bad("crime_type"))?,
        ),
    };
    let year = match &doc["year"] {
        Value::Null => None,
        v => Some(v.as_i64().ok_or_else(|| bad("year"))? as i32),
    };
    let mut values = vec![None; resolution * resolution];
    let features = doc["features"].as_array().ok_or_else(|| bad("features"))?;
    if features.len() != values.len() {
        return Err(bad("feature count does not match resolution"));
    }
    for f in features {
        let props = &f["properties"];
        let row = props["row"].as_u64().ok_or_else(|| bad("row"))? as usize;
        let col = props["col"].as_u64().ok_or_else(|| bad("col"))? as usize;
        if row >= resolution || col >= resolution {
            return Err(bad("cell index out of range"));
        }
        values[row * resolution + col] = match &props["p"] {
            Value::Null => None,
            v => Some(v.as_f64().ok_or_else(|| bad("p"))?),
        };
    }
    Ok(HeatmapGrid { bbox, resolution, values, crime_type, year })
}
