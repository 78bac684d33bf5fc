//! Raw and scaled indicator tables, missing-data handling, and the per-point
//! [`IndicatorVector`].

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use super::{Category, Registry, Source};
use crate::error::{Error, Result};
use crate::geo::GeoPoint;
use crate::scaling::{presence_score, width_score, Extrema, ScaleKind, ScalingScope};

/// Points missing more than this fraction of indicators are dropped.
pub const MAX_MISSING_FRACTION: f64 = 0.5;

/// One point's values, aligned with the registry order.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RawRow {
    pub point_id: String,
    pub city: String,
    pub image_id: Option<String>,
    pub location: GeoPoint,
    pub values: Vec<Option<f64>>,
}

/// Unscaled indicator values: counts, degrees, concentrations, fractions,
/// mean categorical scores, mean widths, and 0/1 presence flags.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RawTable {
    pub names: Vec<String>,
    pub rows: Vec<RawRow>,
}

/// Same layout as [`RawTable`] with every present value in [0,1].
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScaledTable {
    pub names: Vec<String>,
    pub rows: Vec<RawRow>,
}

fn check_layout(names: &[String], rows: &[RawRow], registry: &Registry) -> Result<()> {
    if !names.iter().map(String::as_str).eq(registry.names()) {
        return Err(Error::Configuration("indicator table columns do not match the registry".into()));
    }
    if let Some(r) = rows.iter().find(|r| r.values.len() != names.len()) {
        return Err(Error::Validation(format!(
            "point {} has {} values, expected {}",
            r.point_id,
            r.values.len(),
            names.len()
        )));
    }
    Ok(())
}

impl RawTable {
    pub fn new(registry: &Registry, rows: Vec<RawRow>) -> Self {
        RawTable {
            names: registry.names().map(String::from).collect(),
            rows,
        }
    }

    /// Appends another city's rows; column layouts must agree.
    pub fn append(&mut self, other: RawTable) -> Result<()> {
        if self.names != other.names {
            return Err(Error::Configuration("cannot merge indicator tables with different columns".into()));
        }
        self.rows.extend(other.rows);
        Ok(())
    }
}

/// Applies every spec's scaling rule. Min-max extrema are gathered over the
/// present values of the rule's scope (all rows, or rows of the same city)
/// before any value is mapped.
pub fn scale_table(raw: &RawTable, registry: &Registry, default_scope: ScalingScope) -> Result<ScaledTable> {
    check_layout(&raw.names, &raw.rows, registry)?;
    let mut rows = raw.rows.clone();
    for (j, spec) in registry.specs().iter().enumerate() {
        let scope = spec.scaling.scope.unwrap_or(default_scope);
        let group = |row: &RawRow| match scope {
            ScalingScope::Pooled => String::new(),
            ScalingScope::PerCity => row.city.clone(),
        };
        let mut extrema: BTreeMap<String, Extrema> = BTreeMap::new();
        if spec.scaling.is_min_max() {
            for row in &raw.rows {
                if let Some(v) = row.values[j] {
                    if !v.is_finite() {
                        return Err(Error::Numerical(format!(
                            "indicator {} at point {} is {v}",
                            spec.name, row.point_id
                        )));
                    }
                    let e = extrema.entry(group(row)).or_insert(Extrema { min: v, max: v });
                    e.min = e.min.min(v);
                    e.max = e.max.max(v);
                }
            }
        }
        for row in rows.iter_mut() {
            let Some(v) = row.values[j] else { continue };
            let scaled = match &spec.scaling.kind {
                ScaleKind::MinMax => extrema[&group(row)].scale(v),
                ScaleKind::NegMinMax => extrema[&group(row)].scale_negative(v),
                ScaleKind::Categorical(_) => v.clamp(0.0, 1.0),
                ScaleKind::WidthOver10 => width_score(v)?,
                ScaleKind::Presence { invert } => presence_score(v >= 0.5, *invert),
            };
            row.values[j] = Some(scaled);
        }
    }
    Ok(ScaledTable {
        names: raw.names.clone(),
        rows,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct IndicatorValue {
    pub name: String,
    pub category: Category,
    pub source: Source,
    pub value: Option<f64>,
    /// Set when `value` was filled in by imputation.
    #[serde(default)]
    pub imputed: bool,
}

/// Scaled indicators of one sample point, in registry order.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct IndicatorVector {
    pub point_id: String,
    pub city: String,
    pub location: GeoPoint,
    pub entries: Vec<IndicatorValue>,
}

impl IndicatorVector {
    pub fn get(&self, name: &str) -> Option<f64> {
        self.entries.iter().find(|e| e.name == name).and_then(|e| e.value)
    }

    pub fn is_complete(&self) -> bool {
        self.entries.iter().all(|e| e.value.is_some())
    }

    pub fn missing(&self) -> usize {
        self.entries.iter().filter(|e| e.value.is_none()).count()
    }
}

impl ScaledTable {
    /// Vector for row `i`, missing entries left as `None`.
    pub fn vector(&self, i: usize, registry: &Registry) -> IndicatorVector {
        let row = &self.rows[i];
        IndicatorVector {
            point_id: row.point_id.clone(),
            city: row.city.clone(),
            location: row.location,
            entries: registry
                .specs()
                .iter()
                .zip(&row.values)
                .map(|(s, v)| IndicatorValue {
                    name: s.name.clone(),
                    category: s.category,
                    source: s.source,
                    value: *v,
                    imputed: false,
                })
                .collect(),
        }
    }
}

/// Complete vectors plus an account of what the missing-data policy did.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AssembledTable {
    pub vectors: Vec<IndicatorVector>,
    /// Points dropped for missing too many indicators.
    pub dropped: Vec<String>,
    /// Number of imputed entries per indicator.
    pub imputed: BTreeMap<String, usize>,
    pub warnings: Vec<String>,
}

/// Drops points missing more than `max_missing_fraction` of their entries,
/// then fills remaining gaps with the mean of that indicator over the
/// retained points. An indicator missing everywhere is filled with 0.5.
pub fn finalize(scaled: &ScaledTable, registry: &Registry, max_missing_fraction: f64) -> Result<AssembledTable> {
    check_layout(&scaled.names, &scaled.rows, registry)?;
    let k = scaled.names.len();
    let mut dropped = Vec::new();
    let mut kept = Vec::new();
    for (i, row) in scaled.rows.iter().enumerate() {
        let missing = row.values.iter().filter(|v| v.is_none()).count();
        if missing as f64 / k as f64 > max_missing_fraction {
            dropped.push(row.point_id.clone());
        } else {
            kept.push(i);
        }
    }
    let mut warnings = Vec::new();
    if !dropped.is_empty() {
        warnings.push(format!(
            "dropped {} point(s) missing more than {:.0}% of indicators",
            dropped.len(),
            max_missing_fraction * 100.0
        ));
    }
    let mut fill = vec![0.5; k];
    let mut imputed = BTreeMap::new();
    for (j, name) in scaled.names.iter().enumerate() {
        let (mut sum, mut n, mut gaps) = (0.0, 0usize, 0usize);
        for &i in &kept {
            match scaled.rows[i].values[j] {
                Some(v) => {
                    sum += v;
                    n += 1;
                }
                None => gaps += 1,
            }
        }
        if n > 0 {
            fill[j] = sum / n as f64;
        } else if gaps > 0 {
            warnings.push(format!("indicator {name} is missing at every point; filled with 0.5"));
        }
        if gaps > 0 {
            imputed.insert(name.clone(), gaps);
        }
    }
    for w in &warnings {
        log::warn!("{w}");
    }
    let vectors = kept
        .into_iter()
        .map(|i| {
            let mut v = scaled.vector(i, registry);
            for (j, e) in v.entries.iter_mut().enumerate() {
                if e.value.is_none() {
                    e.value = Some(fill[j]);
                    e.imputed = true;
                }
            }
            v
        })
        .collect();
    Ok(AssembledTable {
        vectors,
        dropped,
        imputed,
        warnings,
    })
}
