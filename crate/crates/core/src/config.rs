//! Run configuration: one JSON document, with dotted-path overrides.

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use serde_json::Value;

use crate::error::{Error, Result};
use crate::index::Variant;
use crate::indicators::{ExtractionSettings, Registry, MAX_MISSING_FRACTION};
use crate::perception::RegressorConfig;
use crate::scaling::ScalingScope;

/// Input datasets of one city. Relative paths resolve against the config
/// file's directory.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CityConfig {
    pub name: String,
    pub street_network: PathBuf,
    pub dem: PathBuf,
    pub land_use: PathBuf,
    pub aqi: PathBuf,
    pub features: PathBuf,
    /// Survey responses; optional for cities whose images were not rated.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub survey: Option<PathBuf>,
    /// Overrides the run-wide sample size.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub sample_size: Option<usize>,
}

impl CityConfig {
    pub fn paths(&self) -> Vec<(&'static str, &Path)> {
        let mut v = vec![
            ("street_network", self.street_network.as_path()),
            ("dem", self.dem.as_path()),
            ("land_use", self.land_use.as_path()),
            ("aqi", self.aqi.as_path()),
            ("features", self.features.as_path()),
        ];
        if let Some(s) = &self.survey {
            v.push(("survey", s.as_path()));
        }
        v
    }
}

fn default_seed() -> u64 {
    42
}
fn default_sample_size() -> usize {
    1000
}
fn default_image_distance() -> f64 {
    50.0
}
fn default_mad_threshold() -> f64 {
    3.0
}
fn default_missing() -> f64 {
    MAX_MISSING_FRACTION
}
fn default_variants() -> Vec<Variant> {
    Variant::ALL.to_vec()
}
fn default_split() -> f64 {
    0.8
}
fn default_alpha() -> f64 {
    0.05
}
fn default_output() -> PathBuf {
    PathBuf::from("output")
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    pub cities: Vec<CityConfig>,
    #[serde(default = "default_seed")]
    pub seed: u64,
    /// Points sampled per city.
    #[serde(default = "default_sample_size")]
    pub sample_size: usize,
    /// Largest point-to-image distance for binding, meters.
    #[serde(default = "default_image_distance")]
    pub image_max_distance: f64,
    #[serde(default)]
    pub extraction: ExtractionSettings,
    #[serde(default = "default_mad_threshold")]
    pub mad_threshold: f64,
    #[serde(default)]
    pub scaling_scope: ScalingScope,
    #[serde(default = "default_missing")]
    pub max_missing_fraction: f64,
    #[serde(default = "default_variants")]
    pub variants: Vec<Variant>,
    #[serde(default)]
    pub regressor: RegressorConfig,
    /// Training fraction of the rated images.
    #[serde(default = "default_split")]
    pub split: f64,
    /// Significance level for the feature t-tests.
    #[serde(default = "default_alpha")]
    pub alpha: f64,
    /// Path to an indicator registry document; the standard 34 when absent.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub registry: Option<PathBuf>,
    #[serde(default = "default_output")]
    pub output_dir: PathBuf,
    /// Worker threads for extraction; 0 picks the available parallelism.
    /// Does not affect results.
    #[serde(default)]
    pub threads: usize,
}

/// Applies `key=value` to a JSON document. Keys are dotted paths; numeric
/// segments index arrays. Values parse as JSON, falling back to a string.
pub fn apply_override(doc: &mut Value, assignment: &str) -> Result<()> {
    let (key, raw) = assignment
        .split_once('=')
        .ok_or_else(|| Error::Configuration(format!("override {assignment:?} is not key=value")))?;
    let value = serde_json::from_str(raw).unwrap_or_else(|_| Value::String(raw.to_string()));
    let mut cur = doc;
    let parts: Vec<&str> = key.split('.').collect();
    for (i, part) in parts.iter().enumerate() {
        let last = i + 1 == parts.len();
        cur = match cur {
            Value::Object(map) => {
                if last {
                    map.insert(part.to_string(), value);
                    return Ok(());
                }
                map.entry(part.to_string()).or_insert_with(|| Value::Object(Default::default()))
            }
            Value::Array(items) => {
                let idx: usize = part
                    .parse()
                    .map_err(|_| Error::Configuration(format!("override key {key:?}: {part:?} is not an index")))?;
                let len = items.len();
                let slot = items
                    .get_mut(idx)
                    .ok_or_else(|| Error::Configuration(format!("override key {key:?}: index {idx} out of {len}")))?;
                if last {
                    *slot = value;
                    return Ok(());
                }
                slot
            }
            _ => return Err(Error::Configuration(format!("override key {key:?} crosses a scalar"))),
        };
    }
    Err(Error::Configuration("empty override key".into()))
}

impl RunConfig {
    /// Parses a config document after applying overrides. Relative paths
    /// are resolved against `base_dir`.
    pub fn from_value(mut doc: Value, overrides: &[String], base_dir: &Path) -> Result<Self> {
        for o in overrides {
            apply_override(&mut doc, o)?;
        }
        let mut cfg: RunConfig =
            serde_json::from_value(doc).map_err(|e| Error::Configuration(format!("invalid config: {e}")))?;
        cfg.resolve_paths(base_dir);
        Ok(cfg)
    }

    pub fn load(path: impl AsRef<Path>, overrides: &[String]) -> Result<Self> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        let doc: Value = serde_json::from_str(&text)
            .map_err(|e| Error::Configuration(format!("{}: invalid JSON: {e}", path.display())))?;
        let base = path.parent().unwrap_or(Path::new("."));
        Self::from_value(doc, overrides, base)
    }

    fn resolve_paths(&mut self, base: &Path) {
        let fix = |p: &mut PathBuf| {
            if p.is_relative() {
                *p = base.join(&*p);
            }
        };
        for c in &mut self.cities {
            fix(&mut c.street_network);
            fix(&mut c.dem);
            fix(&mut c.land_use);
            fix(&mut c.aqi);
            fix(&mut c.features);
            if let Some(s) = &mut c.survey {
                fix(s);
            }
        }
        if let Some(r) = &mut self.registry {
            fix(r);
        }
        fix(&mut self.output_dir);
    }

    /// Checks values and that every referenced file exists.
    pub fn validate(&self) -> Result<()> {
        if self.cities.is_empty() {
            return Err(Error::Configuration("config lists no cities".into()));
        }
        let mut names = std::collections::HashSet::new();
        for c in &self.cities {
            if c.name.is_empty() || c.name.contains(':') {
                return Err(Error::Configuration(format!("city name {:?} must be non-empty without ':'", c.name)));
            }
            if !names.insert(&c.name) {
                return Err(Error::Configuration(format!("duplicate city {:?}", c.name)));
            }
            if c.sample_size.unwrap_or(self.sample_size) == 0 {
                return Err(Error::Configuration(format!("city {}: sample size must be > 0", c.name)));
            }
            for (what, p) in c.paths() {
                if !p.is_file() {
                    return Err(Error::Configuration(format!(
                        "city {}: {what} file {} does not exist",
                        c.name,
                        p.display()
                    )));
                }
            }
        }
        if let Some(r) = &self.registry {
            if !r.is_file() {
                return Err(Error::Configuration(format!("registry file {} does not exist", r.display())));
            }
        }
        self.extraction.validate()?;
        let checks = [
            ("image_max_distance", self.image_max_distance > 0.0 && self.image_max_distance.is_finite()),
            ("mad_threshold", self.mad_threshold > 0.0),
            ("max_missing_fraction", (0.0..=1.0).contains(&self.max_missing_fraction)),
            ("split", self.split > 0.0 && self.split < 1.0),
            ("alpha", self.alpha > 0.0 && self.alpha < 1.0),
        ];
        if let Some((name, _)) = checks.iter().find(|(_, ok)| !ok) {
            return Err(Error::Configuration(format!("{name} is out of range")));
        }
        if self.variants.is_empty() {
            return Err(Error::Configuration("no index variants requested".into()));
        }
        if let RegressorConfig::Gbt { params, .. } = &self.regressor {
            params.validate()?;
        }
        Ok(())
    }

    pub fn load_registry(&self) -> Result<Registry> {
        match &self.registry {
            None => Ok(Registry::default()),
            Some(p) => {
                let text = std::fs::read_to_string(p).map_err(|e| Error::io(p, e))?;
                serde_json::from_str(&text)
                    .map_err(|e| Error::Configuration(format!("{}: invalid registry: {e}", p.display())))
            }
        }
    }

    pub fn sample_size_for(&self, city: &CityConfig) -> usize {
        city.sample_size.unwrap_or(self.sample_size)
    }
}
