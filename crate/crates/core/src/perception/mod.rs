//! Survey aggregation, perception features, score regression, and
//! feature-score significance tests.

mod dimension;
mod features;
pub mod gbt;
mod metrics;
mod model;
mod ridge;
mod survey;
mod ttest;

pub use dimension::Dimension;
pub use features::{assemble_features, seg_entropy, FeatureMatrix, FEATURE_NAMES};
pub use metrics::{regression_metrics, MetricsReport};
pub use model::{
    predict_scores, split_ids, train_regressor, ModelParameters, RegressionModel, RegressorConfig, TrainingMetadata,
    MIN_TRAINING_ROWS, MODEL_FORMAT_VERSION,
};
pub use ridge::{fit_ridge, RidgeModel};
pub use survey::{aggregate_survey, filter_outliers, mad, PerceptionScoreTable, ScoreCell};
pub use ttest::{feature_score_analysis, welch_t, TTestResult, WelchTest};
