use std::collections::BTreeMap;
use std::path::Path;

use serde::{Deserialize, Serialize};

use super::{Loaded, Warning};
use crate::error::{Error, Result};
use crate::geo::GeoPoint;

/// Air-quality monitoring station with its yearly record.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AqiStation {
    pub id: String,
    pub location: GeoPoint,
    /// One entry per date: the maximum reading observed that day, µg/m³.
    pub daily_maxima: Vec<(String, f64)>,
    /// Arithmetic mean of `daily_maxima`.
    pub annual_mean: f64,
}

pub fn load_aqi_stations(path: impl AsRef<Path>) -> Result<Loaded<Vec<AqiStation>>> {
    let path = path.as_ref();
    let bytes = std::fs::read(path).map_err(|e| Error::io(path, e))?;
    parse_aqi_stations(&bytes, &path.display().to_string())
}

struct Accum {
    location: GeoPoint,
    rows: usize,
    days: BTreeMap<String, f64>,
}

/// Reads `station_id,lon,lat,date,value` rows.
///
/// Several rows for one station and date (one per pollutant) collapse to the
/// daily maximum. Rows with an empty `value` are skipped with a warning; a
/// station left without any readings is dropped with a warning.
pub fn parse_aqi_stations(bytes: &[u8], source_name: &str) -> Result<Loaded<Vec<AqiStation>>> {
    let mut reader = csv::ReaderBuilder::new().trim(csv::Trim::All).from_reader(bytes);
    let headers = reader
        .headers()
        .map_err(|e| Error::parse(source_name, 1, e.to_string()))?
        .clone();
    let col = |name: &str| {
        headers
            .iter()
            .position(|h| h == name)
            .ok_or_else(|| Error::parse(source_name, 1, format!("missing column {name}")))
    };
    let (c_id, c_lon, c_lat, c_date, c_value) = (col("station_id")?, col("lon")?, col("lat")?, col("date")?, col("value")?);

    let mut order: Vec<String> = Vec::new();
    let mut acc: BTreeMap<String, Accum> = BTreeMap::new();
    let mut warnings = Vec::new();
    for rec in reader.records() {
        let rec = rec.map_err(|e| {
            let line = e.position().map(|p| p.line() as usize).unwrap_or(0);
            Error::parse(source_name, line, e.to_string())
        })?;
        let line = rec.position().map(|p| p.line() as usize).unwrap_or(0);
        let field = |i: usize| rec.get(i).unwrap_or("");
        let id = field(c_id).to_string();
        let num = |i: usize, what: &str| -> Result<f64> {
            field(i)
                .parse::<f64>()
                .ok()
                .filter(|v| v.is_finite())
                .ok_or_else(|| Error::Validation(format!("{source_name} line {line}: non-numeric {what} {:?}", field(i))))
        };
        let location = GeoPoint::new(num(c_lon, "lon")?, num(c_lat, "lat")?)
            .map_err(|e| Error::Validation(format!("{source_name} line {line}: {e}")))?;
        let entry = acc.entry(id.clone()).or_insert_with(|| {
            order.push(id.clone());
            Accum {
                location,
                rows: 0,
                days: BTreeMap::new(),
            }
        });
        if entry.location != location {
            return Err(Error::Validation(format!(
                "{source_name} line {line}: station {id} has inconsistent coordinates"
            )));
        }
        if field(c_value).is_empty() {
            warnings.push(Warning(format!("{source_name} line {line}: station {id} has an empty value, row skipped")));
            continue;
        }
        let value = num(c_value, "value")?;
        if value < 0.0 {
            return Err(Error::Validation(format!(
                "{source_name} line {line}: negative value {value} for station {id}"
            )));
        }
        entry.rows += 1;
        let day = entry.days.entry(field(c_date).to_string()).or_insert(value);
        *day = day.max(value);
    }

    let mut stations = Vec::with_capacity(order.len());
    for id in order {
        let a = acc.remove(&id).unwrap();
        if a.rows == 0 {
            warnings.push(Warning(format!("{source_name}: station {id} has no readings and was excluded")));
            continue;
        }
        let daily_maxima: Vec<(String, f64)> = a.days.into_iter().collect();
        let annual_mean = daily_maxima.iter().map(|(_, v)| v).sum::<f64>() / daily_maxima.len() as f64;
        stations.push(AqiStation {
            id,
            location: a.location,
            daily_maxima,
            annual_mean,
        });
    }
    Ok(Loaded::new(stations, warnings))
}
