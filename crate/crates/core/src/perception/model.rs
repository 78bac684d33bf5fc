use std::collections::BTreeMap;
use std::path::Path;

use serde::{Deserialize, Serialize};

use super::gbt::{cross_validate, fit_gbt, GbtGrid, GbtModel, GbtParams};
use super::metrics::{regression_metrics, MetricsReport};
use super::ridge::{fit_ridge, RidgeModel};
use super::FeatureMatrix;
use crate::error::{Error, Result};

pub const MODEL_FORMAT_VERSION: u32 = 1;

/// Smallest training set accepted by [`train_regressor`].
pub const MIN_TRAINING_ROWS: usize = 10;

fn default_lambda() -> f64 {
    1e-3
}

fn default_folds() -> usize {
    10
}

/// Regression backend and its hyperparameters.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum RegressorConfig {
    Ridge {
        #[serde(default = "default_lambda")]
        lambda: f64,
    },
    /// Boosted trees; when `grid` is given, hyperparameters are chosen by
    /// k-fold cross-validation on the training split.
    Gbt {
        #[serde(default)]
        params: GbtParams,
        #[serde(default)]
        grid: Option<GbtGrid>,
        #[serde(default = "default_folds")]
        folds: usize,
    },
}

impl Default for RegressorConfig {
    fn default() -> Self {
        RegressorConfig::Ridge { lambda: default_lambda() }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", content = "parameters", rename_all = "snake_case")]
pub enum ModelParameters {
    Ridge(RidgeModel),
    Gbt(GbtModel),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrainingMetadata {
    pub seed: u64,
    /// Fraction of rows used for training.
    pub split: f64,
    pub train_ids: Vec<String>,
    pub validation_ids: Vec<String>,
    pub features: Vec<String>,
    /// Mean cross-validated MSE of the selected tree hyperparameters.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub cv_mse: Option<f64>,
}

/// A trained model with everything needed to reproduce it.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RegressionModel {
    pub format_version: u32,
    #[serde(flatten)]
    pub model: ModelParameters,
    pub metadata: TrainingMetadata,
}

impl RegressionModel {
    pub fn predict_row(&self, x: &[f64]) -> f64 {
        match &self.model {
            ModelParameters::Ridge(m) => m.predict(x),
            ModelParameters::Gbt(m) => m.predict(x),
        }
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("model serializes")
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let m: RegressionModel =
            serde_json::from_str(text).map_err(|e| Error::Validation(format!("invalid model document: {e}")))?;
        if m.format_version != MODEL_FORMAT_VERSION {
            return Err(Error::Validation(format!(
                "unsupported model format version {}",
                m.format_version
            )));
        }
        Ok(m)
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<()> {
        let path = path.as_ref();
        std::fs::write(path, self.to_json() + "\n").map_err(|e| Error::io(path, e))
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        Self::from_json(&std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?)
    }
}

fn fnv1a64(s: &str) -> u64 {
    let mut h: u64 = 0xcbf2_9ce4_8422_2325;
    for b in s.bytes() {
        h ^= u64::from(b);
        h = h.wrapping_mul(0x0000_0100_0000_01b3);
    }
    h
}

fn splitmix64(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9e37_79b9_7f4a_7c15);
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}

/// Seeded train/validation split keyed on image ids, so the assignment does
/// not depend on row order. Rows are ordered by `splitmix64(seed ^
/// fnv1a64(id))` (then id); the first `round(n * fraction)` (at most n − 1)
/// train.
pub fn split_ids(ids: &[String], fraction: f64, seed: u64) -> (Vec<String>, Vec<String>) {
    let mut keyed: Vec<(u64, &String)> = ids.iter().map(|id| (splitmix64(seed ^ fnv1a64(id)), id)).collect();
    keyed.sort();
    let n = ids.len();
    let n_train = ((n as f64 * fraction).round() as usize).min(n.saturating_sub(1));
    let (a, b) = keyed.split_at(n_train);
    (
        a.iter().map(|(_, id)| (*id).clone()).collect(),
        b.iter().map(|(_, id)| (*id).clone()).collect(),
    )
}

/// Fits a model on a seeded split of `(x, y)` and reports metrics on the
/// held-out part.
pub fn train_regressor(
    x: &FeatureMatrix,
    y: &[f64],
    config: &RegressorConfig,
    split: f64,
    seed: u64,
) -> Result<(RegressionModel, MetricsReport)> {
    if x.len() != y.len() {
        return Err(Error::Alignment(format!("{} feature rows but {} targets", x.len(), y.len())));
    }
    if x.len() < MIN_TRAINING_ROWS {
        return Err(Error::InvalidArgument(format!(
            "need at least {MIN_TRAINING_ROWS} rated images, got {}",
            x.len()
        )));
    }
    if !(split > 0.0 && split < 1.0) {
        return Err(Error::Configuration(format!("split must be in (0,1), got {split}")));
    }
    let target: BTreeMap<&str, f64> = x.image_ids.iter().map(String::as_str).zip(y.iter().copied()).collect();
    let (train_ids, validation_ids) = split_ids(&x.image_ids, split, seed);
    let xt = x.select(&train_ids)?;
    let yt: Vec<f64> = train_ids.iter().map(|id| target[id.as_str()]).collect();
    let xv = x.select(&validation_ids)?;
    let yv: Vec<f64> = validation_ids.iter().map(|id| target[id.as_str()]).collect();

    let mut cv_mse = None;
    let model = match config {
        RegressorConfig::Ridge { lambda } => ModelParameters::Ridge(fit_ridge(&xt.rows, &yt, *lambda)?),
        RegressorConfig::Gbt { params, grid, folds } => {
            let chosen = match grid {
                Some(g) => {
                    let (p, mse) = cross_validate(&xt.rows, &yt, params, g, *folds, seed)?;
                    cv_mse = Some(mse);
                    p
                }
                None => params.clone(),
            };
            ModelParameters::Gbt(fit_gbt(&xt.rows, &yt, &chosen, seed)?)
        }
    };
    let model = RegressionModel {
        format_version: MODEL_FORMAT_VERSION,
        model,
        metadata: TrainingMetadata {
            seed,
            split,
            train_ids,
            validation_ids,
            features: super::FEATURE_NAMES.iter().map(|s| s.to_string()).collect(),
            cv_mse,
        },
    };
    let predicted: Vec<f64> = xv.rows.iter().map(|r| model.predict_row(r)).collect();
    let metrics = regression_metrics(&yv, &predicted)?;
    Ok((model, metrics))
}

/// Predicted score for every row of `x`, keyed by image id.
pub fn predict_scores(model: &RegressionModel, x: &FeatureMatrix) -> BTreeMap<String, f64> {
    x.image_ids
        .iter()
        .zip(&x.rows)
        .map(|(id, r)| (id.clone(), model.predict_row(r)))
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn split_is_order_free() {
        let ids: Vec<String> = (0..50).map(|i| format!("img{i}")).collect();
        let (a, b) = split_ids(&ids, 0.8, 9);
        assert_eq!((a.len(), b.len()), (40, 10));
        let mut rev = ids.clone();
        rev.reverse();
        assert_eq!(split_ids(&rev, 0.8, 9), (a.clone(), b));
        assert_ne!(split_ids(&ids, 0.8, 10).0, a);
        assert_eq!(split_ids(&ids[..2], 0.99, 1).0.len(), 1);
    }

    #[test]
    fn document_shape() {
        let m = RegressionModel {
            format_version: MODEL_FORMAT_VERSION,
            model: ModelParameters::Ridge(RidgeModel {
                intercept: 1.0,
                coefficients: vec![2.0],
                lambda: 0.001,
            }),
            metadata: TrainingMetadata {
                seed: 1,
                split: 0.8,
                train_ids: vec![],
                validation_ids: vec![],
                features: vec![],
                cv_mse: None,
            },
        };
        let v: serde_json::Value = serde_json::from_str(&m.to_json()).unwrap();
        assert_eq!(v["kind"], "ridge");
        assert_eq!(v["format_version"], 1);
        assert_eq!(v["parameters"]["intercept"], 1.0);
        assert_eq!(RegressionModel::from_json(&m.to_json()).unwrap(), m);
        let bumped = m.to_json().replace("\"format_version\": 1", "\"format_version\": 9");
        assert!(RegressionModel::from_json(&bumped).is_err());
    }
}
