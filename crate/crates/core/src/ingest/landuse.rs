use std::path::Path;

use serde::{Deserialize, Serialize};
use serde_json::Value;

use super::{read_to_string, Loaded};
use crate::error::{Error, Result};
use crate::geo::{GeoPoint, Polygon};

/// The three harmonized land-use classes.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum LandUseCategory {
    Residential,
    Commercial,
    Industrial,
}

impl LandUseCategory {
    pub const ALL: [LandUseCategory; 3] = [Self::Residential, Self::Commercial, Self::Industrial];

    pub fn index(self) -> usize {
        self as usize
    }

    pub fn parse(s: &str) -> Option<Self> {
        match s {
            "residential" => Some(Self::Residential),
            "commercial" => Some(Self::Commercial),
            "industrial" => Some(Self::Industrial),
            _ => None,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct LandUsePolygon {
    pub geometry: Polygon,
    pub category: LandUseCategory,
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct LandUseDataset {
    pub polygons: Vec<LandUsePolygon>,
}

pub fn load_land_use(path: impl AsRef<Path>) -> Result<Loaded<LandUseDataset>> {
    let path = path.as_ref();
    parse_land_use(&read_to_string(path)?, &path.display().to_string())
}

/// Reads a FeatureCollection of Polygon / MultiPolygon features whose
/// `properties.category` is one of the harmonized classes.
pub fn parse_land_use(text: &str, source_name: &str) -> Result<Loaded<LandUseDataset>> {
    let doc: Value =
        serde_json::from_str(text).map_err(|e| Error::parse(source_name, e.line(), e.to_string()))?;
    let features = doc
        .get("features")
        .and_then(Value::as_array)
        .ok_or_else(|| Error::parse(source_name, 1, "missing `features` array"))?;
    let mut polygons = Vec::new();
    for (i, f) in features.iter().enumerate() {
        let raw = f
            .pointer("/properties/category")
            .and_then(Value::as_str)
            .ok_or_else(|| Error::Validation(format!("land-use feature {i} lacks a category")))?;
        let category = LandUseCategory::parse(raw).ok_or_else(|| {
            Error::Validation(format!(
                "land-use feature {i}: category {raw:?} is not residential, commercial or industrial"
            ))
        })?;
        let gtype = f.pointer("/geometry/type").and_then(Value::as_str).unwrap_or("");
        let coords = f
            .pointer("/geometry/coordinates")
            .ok_or_else(|| Error::Validation(format!("land-use feature {i} has no coordinates")))?;
        let parts: Vec<&Value> = match gtype {
            "Polygon" => vec![coords],
            "MultiPolygon" => coords
                .as_array()
                .map(|a| a.iter().collect())
                .unwrap_or_default(),
            other => {
                return Err(Error::Validation(format!(
                    "land-use feature {i}: unsupported geometry {other:?}"
                )))
            }
        };
        for part in parts {
            let rings = part
                .as_array()
                .filter(|r| !r.is_empty())
                .ok_or_else(|| Error::Validation(format!("land-use feature {i}: empty polygon")))?;
            let mut rings = rings.iter().map(|r| ring(r, i));
            let outer = rings.next().unwrap()?;
            let inner = rings.collect::<Result<Vec<_>>>()?;
            let geometry = Polygon::new(outer, inner)
                .map_err(|e| Error::Validation(format!("land-use feature {i}: {e}")))?;
            polygons.push(LandUsePolygon { geometry, category });
        }
    }
    Ok(Loaded::new(LandUseDataset { polygons }, Vec::new()))
}

fn ring(v: &Value, feature: usize) -> Result<Vec<GeoPoint>> {
    let pts = v
        .as_array()
        .ok_or_else(|| Error::Validation(format!("land-use feature {feature}: ring is not an array")))?;
    pts.iter()
        .map(|c| {
            let lon = c.get(0).and_then(Value::as_f64);
            let lat = c.get(1).and_then(Value::as_f64);
            match (lon, lat) {
                (Some(lon), Some(lat)) => GeoPoint::new(lon, lat)
                    .map_err(|e| Error::Validation(format!("land-use feature {feature}: {e}"))),
                _ => Err(Error::Validation(format!("land-use feature {feature}: bad vertex"))),
            }
        })
        .collect()
}
