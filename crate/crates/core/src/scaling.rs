//! Value-to-[0,1] transforms.
//!
//! Min-max rules are two-phase: [`Extrema`] is gathered over the whole
//! population first, then each value is mapped. A degenerate range
//! (max = min) maps every value to 0.5.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum ScaleKind {
    MinMax,
    NegMinMax,
    Categorical(CategoricalMap),
    WidthOver10,
    Presence { invert: bool },
}

/// Population over which min-max extrema are gathered.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ScalingScope {
    /// One set of extrema across every city in the run.
    #[default]
    Pooled,
    PerCity,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScalingRule {
    #[serde(flatten)]
    pub kind: ScaleKind,
    /// Overrides the run-wide scope for this rule.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub scope: Option<ScalingScope>,
}

impl ScalingRule {
    pub fn new(kind: ScaleKind) -> Self {
        ScalingRule { kind, scope: None }
    }

    pub fn validate(&self) -> Result<()> {
        if let ScaleKind::Categorical(map) = &self.kind {
            map.validate()?;
        }
        Ok(())
    }

    /// Whether the rule needs population extrema.
    pub fn is_min_max(&self) -> bool {
        matches!(self.kind, ScaleKind::MinMax | ScaleKind::NegMinMax)
    }
}

/// Exact-match lookup table with a fallback score.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CategoricalMap {
    pub map: BTreeMap<String, f64>,
    #[serde(default)]
    pub default: f64,
}

impl CategoricalMap {
    pub fn new(entries: &[(&[&str], f64)], default: f64) -> Self {
        let map = entries
            .iter()
            .flat_map(|(keys, v)| keys.iter().map(move |k| (k.to_string(), *v)))
            .collect();
        CategoricalMap { map, default }
    }

    pub fn validate(&self) -> Result<()> {
        let bad = self
            .map
            .iter()
            .map(|(k, v)| (k.as_str(), *v))
            .chain(std::iter::once(("<default>", self.default)))
            .find(|(_, v)| !(0.0..=1.0).contains(v));
        match bad {
            Some((k, v)) => Err(Error::Configuration(format!(
                "categorical score for {k:?} is {v}, outside [0,1]"
            ))),
            None => Ok(()),
        }
    }

    pub fn score(&self, value: &str) -> f64 {
        self.map.get(value).copied().unwrap_or(self.default)
    }
}

/// OSM `highway` classes.
pub fn road_type_map() -> CategoricalMap {
    CategoricalMap::new(
        &[
            (&["service", "track"], 0.1),
            (&["primary", "primary_link"], 0.2),
            (&["secondary", "secondary_link"], 0.4),
            (&["tertiary", "tertiary_link"], 0.5),
            (&["unclassified"], 0.6),
            (&["pedestrian", "path"], 0.8),
            (&["cycleway"], 1.0),
        ],
        0.0,
    )
}

/// OSM `surface` values.
pub fn pavement_map() -> CategoricalMap {
    CategoricalMap::new(
        &[
            (&["unhewn_cobblestone", "cobblestone"], 0.2),
            (&["sett", "metal", "wood"], 0.4),
            (&["paved"], 0.5),
            (&["concrete:lanes", "concrete:plates", "paving_stones"], 0.6),
            (&["asphalt", "concrete"], 1.0),
        ],
        0.0,
    )
}

/// Range of a population, gathered before mapping.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Extrema {
    pub min: f64,
    pub max: f64,
}

impl Extrema {
    /// `None` when the iterator yields nothing.
    pub fn of(values: impl IntoIterator<Item = f64>) -> Option<Self> {
        values.into_iter().fold(None, |acc, v| match acc {
            None => Some(Extrema { min: v, max: v }),
            Some(e) => Some(Extrema {
                min: e.min.min(v),
                max: e.max.max(v),
            }),
        })
    }

    /// Min-max position of `x`, clamped into [0,1].
    pub fn scale(&self, x: f64) -> f64 {
        let range = self.max - self.min;
        if range == 0.0 {
            return 0.5;
        }
        ((x - self.min) / range).clamp(0.0, 1.0)
    }

    pub fn scale_negative(&self, x: f64) -> f64 {
        if self.max == self.min {
            return 0.5;
        }
        1.0 - self.scale(x)
    }
}

fn extrema_checked(values: &[f64]) -> Result<Extrema> {
    if let Some(v) = values.iter().find(|v| !v.is_finite()) {
        return Err(Error::InvalidArgument(format!("non-finite value {v} in min-max input")));
    }
    Extrema::of(values.iter().copied()).ok_or_else(|| Error::InvalidArgument("min-max of an empty list".into()))
}

/// Affine map of `[min, max]` onto `[0, 1]`.
pub fn min_max(values: &[f64]) -> Result<Vec<f64>> {
    let e = extrema_checked(values)?;
    Ok(values.iter().map(|&x| e.scale(x)).collect())
}

/// `1 - min_max(x)`.
pub fn neg_min_max(values: &[f64]) -> Result<Vec<f64>> {
    let e = extrema_checked(values)?;
    Ok(values.iter().map(|&x| e.scale_negative(x)).collect())
}

pub fn categorical_score(value: &str, map: &CategoricalMap) -> f64 {
    map.score(value)
}

/// Width in meters divided by 10, capped at 1.
pub fn width_score(width: f64) -> Result<f64> {
    if !width.is_finite() || width < 0.0 {
        return Err(Error::Validation(format!("road width must be >= 0, got {width}")));
    }
    Ok((width / 10.0).min(1.0))
}

pub fn presence_score(present: bool, invert: bool) -> f64 {
    if present != invert {
        1.0
    } else {
        0.0
    }
}
