//! Result files: the scored GeoJSON layer and CSV reports, with loaders for
//! each.

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::path::Path;

use serde::{Deserialize, Serialize};
use serde_json::Value;

use crate::error::{Error, Result};
use crate::geo::GeoPoint;
use crate::index::{ComparisonReport, CompositeScore, SummaryRow, Variant};
use crate::indicators::{Category, IndicatorVector};
use crate::perception::{Dimension, MetricsReport, TTestResult};

pub const METRICS_HEADER: [&str; 5] = ["dimension", "MAE", "MAPE", "RMSE", "R2"];
pub const TTEST_HEADER: [&str; 10] = [
    "feature",
    "dimension",
    "t",
    "df",
    "p_value",
    "mean_below",
    "mean_above",
    "n_below",
    "n_above",
    "significant",
];
pub const COMPARISON_HEADER: [&str; 11] = [
    "variant_a",
    "variant_b",
    "n",
    "pearson_r",
    "r2",
    "mean_a",
    "sd_a",
    "kurtosis_a",
    "mean_b",
    "sd_b",
    "kurtosis_b",
];
pub const SUMMARY_HEADER: [&str; 4] = ["city", "category", "mean", "sd"];

pub const GEOJSON_FILE: &str = "bikeability.geojson";
pub const METRICS_FILE: &str = "perception_metrics.csv";
pub const TTEST_FILE: &str = "feature_ttests.csv";
pub const COMPARISON_FILE: &str = "variant_comparison.csv";
pub const SUMMARY_FILE: &str = "summary_statistics.csv";

fn fixed6(x: f64) -> String {
    let s = format!("{x:.6}");
    if s == "-0.000000" {
        "0.000000".into()
    } else {
        s
    }
}

fn opt_num(x: Option<f64>) -> String {
    x.map(|v| v.to_string()).unwrap_or_default()
}

fn variant_property(v: Variant) -> &'static str {
    match v {
        Variant::All => "bikeability_all",
        Variant::SviOnly => "bikeability_svi",
        Variant::NonSviOnly => "bikeability_nonsvi",
    }
}

/// Serializes one Point feature per indicator vector. Properties are
/// `point_id`, `ind_<name>` per indicator, `cat_<category>` from the
/// all-indicator composite, and one `bikeability_*` per variant (null when
/// the variant was not computed). Numbers carry 6 decimal places.
pub fn geojson_string(vectors: &[IndicatorVector], scores: &BTreeMap<Variant, Vec<CompositeScore>>) -> String {
    let lookup: BTreeMap<Variant, BTreeMap<&str, &CompositeScore>> = scores
        .iter()
        .map(|(v, s)| (*v, s.iter().map(|c| (c.point_id.as_str(), c)).collect()))
        .collect();
    let num = |x: Option<f64>| x.map(fixed6).unwrap_or_else(|| "null".into());
    let mut out = String::from("{\"type\":\"FeatureCollection\",\"features\":[");
    for (i, v) in vectors.iter().enumerate() {
        if i > 0 {
            out.push(',');
        }
        let _ = write!(
            out,
            "\n{{\"type\":\"Feature\",\"geometry\":{{\"type\":\"Point\",\"coordinates\":[{},{}]}},\"properties\":{{\"point_id\":{}",
            fixed6(v.location.lon()),
            fixed6(v.location.lat()),
            serde_json::to_string(&v.point_id).expect("string serializes"),
        );
        for e in &v.entries {
            let _ = write!(out, ",\"ind_{}\":{}", e.name, num(e.value));
        }
        let all = lookup.get(&Variant::All).and_then(|m| m.get(v.point_id.as_str()));
        for c in Category::ALL {
            let _ = write!(out, ",\"cat_{c}\":{}", num(all.and_then(|s| s.category_scores.get(&c).copied())));
        }
        for variant in Variant::ALL {
            let total = lookup
                .get(&variant)
                .and_then(|m| m.get(v.point_id.as_str()))
                .map(|s| s.total);
            let _ = write!(out, ",\"{}\":{}", variant_property(variant), num(total));
        }
        out.push_str("}}");
    }
    out.push_str("\n]}\n");
    out
}

pub fn export_geojson(
    vectors: &[IndicatorVector],
    scores: &BTreeMap<Variant, Vec<CompositeScore>>,
    path: impl AsRef<Path>,
) -> Result<()> {
    let path = path.as_ref();
    std::fs::write(path, geojson_string(vectors, scores)).map_err(|e| Error::io(path, e))
}

/// One feature of an exported GeoJSON layer.
#[derive(Debug, Clone, PartialEq)]
pub struct ExportedPoint {
    pub point_id: String,
    pub location: GeoPoint,
    /// Numeric properties; nulls are omitted.
    pub values: BTreeMap<String, f64>,
}

pub fn parse_geojson(text: &str) -> Result<Vec<ExportedPoint>> {
    let doc: Value = serde_json::from_str(text).map_err(|e| Error::parse("geojson", e.line(), e.to_string()))?;
    let features = doc["features"]
        .as_array()
        .ok_or_else(|| Error::Validation("GeoJSON has no features array".into()))?;
    features
        .iter()
        .map(|f| {
            let coords = &f["geometry"]["coordinates"];
            let (lon, lat) = (coords[0].as_f64(), coords[1].as_f64());
            let location = match (lon, lat) {
                (Some(lon), Some(lat)) => GeoPoint::new(lon, lat)?,
                _ => return Err(Error::Validation("feature without point coordinates".into())),
            };
            let props = f["properties"]
                .as_object()
                .ok_or_else(|| Error::Validation("feature without properties".into()))?;
            let point_id = props
                .get("point_id")
                .and_then(Value::as_str)
                .ok_or_else(|| Error::Validation("feature without point_id".into()))?
                .to_string();
            let values = props
                .iter()
                .filter_map(|(k, v)| v.as_f64().map(|x| (k.clone(), x)))
                .collect();
            Ok(ExportedPoint {
                point_id,
                location,
                values,
            })
        })
        .collect()
}

pub fn load_geojson(path: impl AsRef<Path>) -> Result<Vec<ExportedPoint>> {
    let path = path.as_ref();
    parse_geojson(&std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?)
}

fn write_csv(path: &Path, header: &[&str], rows: Vec<Vec<String>>) -> Result<()> {
    let io = |e: csv::Error| Error::Io {
        path: path.to_path_buf(),
        source: e.into(),
    };
    let mut w = csv::Writer::from_path(path).map_err(io)?;
    w.write_record(header).map_err(io)?;
    for r in rows {
        w.write_record(&r).map_err(io)?;
    }
    w.flush().map_err(|e| Error::io(path, e))
}

fn read_csv(path: &Path, header: &[&str]) -> Result<Vec<csv::StringRecord>> {
    let name = path.display().to_string();
    let mut r = csv::Reader::from_path(path).map_err(|e| Error::parse(&name, 0, e.to_string()))?;
    let found = r.headers().map_err(|e| Error::parse(&name, 1, e.to_string()))?.clone();
    if !found.iter().eq(header.iter().copied()) {
        return Err(Error::Validation(format!("{name}: unexpected header {found:?}")));
    }
    r.records()
        .enumerate()
        .map(|(i, rec)| rec.map_err(|e| Error::parse(&name, i + 2, e.to_string())))
        .collect()
}

fn field_f64(rec: &csv::StringRecord, i: usize) -> Result<Option<f64>> {
    let s = rec.get(i).unwrap_or("");
    if s.is_empty() {
        return Ok(None);
    }
    s.parse()
        .map(Some)
        .map_err(|_| Error::Validation(format!("column {i}: {s:?} is not a number")))
}

fn field_req(rec: &csv::StringRecord, i: usize) -> Result<f64> {
    field_f64(rec, i)?.ok_or_else(|| Error::Validation(format!("column {i} is empty")))
}

fn field_usize(rec: &csv::StringRecord, i: usize) -> Result<usize> {
    let s = rec.get(i).unwrap_or("");
    s.parse()
        .map_err(|_| Error::Validation(format!("column {i}: {s:?} is not a count")))
}

fn field_dimension(rec: &csv::StringRecord, i: usize) -> Result<Dimension> {
    let s = rec.get(i).unwrap_or("");
    Dimension::parse(s).ok_or_else(|| Error::Validation(format!("unknown dimension {s:?}")))
}

fn field_variant(rec: &csv::StringRecord, i: usize) -> Result<Variant> {
    let s = rec.get(i).unwrap_or("");
    Variant::ALL
        .into_iter()
        .find(|v| v.as_str() == s)
        .ok_or_else(|| Error::Validation(format!("unknown variant {s:?}")))
}

pub fn write_perception_metrics(metrics: &BTreeMap<Dimension, MetricsReport>, path: impl AsRef<Path>) -> Result<()> {
    let rows = metrics
        .iter()
        .map(|(d, m)| {
            vec![
                d.as_str().to_string(),
                m.mae.to_string(),
                opt_num(m.mape),
                m.rmse.to_string(),
                m.r2.to_string(),
            ]
        })
        .collect();
    write_csv(path.as_ref(), &METRICS_HEADER, rows)
}

/// Metrics rows; `n` is not stored in the file and reads back as 0.
pub fn read_perception_metrics(path: impl AsRef<Path>) -> Result<BTreeMap<Dimension, MetricsReport>> {
    read_csv(path.as_ref(), &METRICS_HEADER)?
        .iter()
        .map(|r| {
            Ok((
                field_dimension(r, 0)?,
                MetricsReport {
                    mae: field_req(r, 1)?,
                    mape: field_f64(r, 2)?,
                    rmse: field_req(r, 3)?,
                    r2: field_req(r, 4)?,
                    n: 0,
                },
            ))
        })
        .collect()
}

pub fn write_ttests(tests: &[TTestResult], path: impl AsRef<Path>) -> Result<()> {
    let rows = tests
        .iter()
        .map(|t| {
            vec![
                t.feature.clone(),
                t.dimension.as_str().to_string(),
                opt_num(t.t),
                opt_num(t.df),
                opt_num(t.p_value),
                opt_num(t.mean_below),
                opt_num(t.mean_above),
                t.n_below.to_string(),
                t.n_above.to_string(),
                t.significant.to_string(),
            ]
        })
        .collect();
    write_csv(path.as_ref(), &TTEST_HEADER, rows)
}

pub fn read_ttests(path: impl AsRef<Path>) -> Result<Vec<TTestResult>> {
    read_csv(path.as_ref(), &TTEST_HEADER)?
        .iter()
        .map(|r| {
            Ok(TTestResult {
                feature: r.get(0).unwrap_or("").to_string(),
                dimension: field_dimension(r, 1)?,
                t: field_f64(r, 2)?,
                df: field_f64(r, 3)?,
                p_value: field_f64(r, 4)?,
                mean_below: field_f64(r, 5)?,
                mean_above: field_f64(r, 6)?,
                n_below: field_usize(r, 7)?,
                n_above: field_usize(r, 8)?,
                significant: match r.get(9) {
                    Some("true") => true,
                    Some("false") => false,
                    other => return Err(Error::Validation(format!("significant must be true/false, got {other:?}"))),
                },
            })
        })
        .collect()
}

/// One row of the variant-comparison report.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ComparisonRow {
    pub variant_a: Variant,
    pub variant_b: Variant,
    pub n: usize,
    pub pearson_r: Option<f64>,
    pub r2: Option<f64>,
    pub mean_a: f64,
    pub sd_a: f64,
    pub kurtosis_a: Option<f64>,
    pub mean_b: f64,
    pub sd_b: f64,
    pub kurtosis_b: Option<f64>,
}

pub fn comparison_rows(report: &ComparisonReport) -> Vec<ComparisonRow> {
    let summary = |v: Variant| report.summaries.iter().find(|s| s.variant == v);
    report
        .pairs
        .iter()
        .filter_map(|p| {
            let (a, b) = (summary(p.variant_a)?, summary(p.variant_b)?);
            Some(ComparisonRow {
                variant_a: p.variant_a,
                variant_b: p.variant_b,
                n: p.n,
                pearson_r: p.pearson_r,
                r2: p.r2,
                mean_a: a.mean,
                sd_a: a.sd,
                kurtosis_a: a.kurtosis,
                mean_b: b.mean,
                sd_b: b.sd,
                kurtosis_b: b.kurtosis,
            })
        })
        .collect()
}

pub fn write_variant_comparison(report: &ComparisonReport, path: impl AsRef<Path>) -> Result<()> {
    let rows = comparison_rows(report)
        .into_iter()
        .map(|r| {
            vec![
                r.variant_a.to_string(),
                r.variant_b.to_string(),
                r.n.to_string(),
                opt_num(r.pearson_r),
                opt_num(r.r2),
                r.mean_a.to_string(),
                r.sd_a.to_string(),
                opt_num(r.kurtosis_a),
                r.mean_b.to_string(),
                r.sd_b.to_string(),
                opt_num(r.kurtosis_b),
            ]
        })
        .collect();
    write_csv(path.as_ref(), &COMPARISON_HEADER, rows)
}

pub fn read_variant_comparison(path: impl AsRef<Path>) -> Result<Vec<ComparisonRow>> {
    read_csv(path.as_ref(), &COMPARISON_HEADER)?
        .iter()
        .map(|r| {
            Ok(ComparisonRow {
                variant_a: field_variant(r, 0)?,
                variant_b: field_variant(r, 1)?,
                n: field_usize(r, 2)?,
                pearson_r: field_f64(r, 3)?,
                r2: field_f64(r, 4)?,
                mean_a: field_req(r, 5)?,
                sd_a: field_f64(r, 6)?.unwrap_or(f64::NAN),
                kurtosis_a: field_f64(r, 7)?,
                mean_b: field_req(r, 8)?,
                sd_b: field_f64(r, 9)?.unwrap_or(f64::NAN),
                kurtosis_b: field_f64(r, 10)?,
            })
        })
        .collect()
}

pub fn write_summary_statistics(rows: &[SummaryRow], path: impl AsRef<Path>) -> Result<()> {
    let rows = rows
        .iter()
        .map(|r| {
            vec![
                r.city.clone(),
                r.category.clone(),
                r.mean.to_string(),
                if r.sd.is_nan() { String::new() } else { r.sd.to_string() },
            ]
        })
        .collect();
    write_csv(path.as_ref(), &SUMMARY_HEADER, rows)
}

/// Summary rows; a blank `sd` (single point) reads back as NaN.
pub fn read_summary_statistics(path: impl AsRef<Path>) -> Result<Vec<SummaryRow>> {
    read_csv(path.as_ref(), &SUMMARY_HEADER)?
        .iter()
        .map(|r| {
            Ok(SummaryRow {
                city: r.get(0).unwrap_or("").to_string(),
                category: r.get(1).unwrap_or("").to_string(),
                mean: field_req(r, 2)?,
                sd: field_f64(r, 3)?.unwrap_or(f64::NAN),
            })
        })
        .collect()
}
