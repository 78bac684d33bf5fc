//! Readers and validators for every input dataset.
//!
//! Loaders are deterministic: the same bytes always produce the same
//! in-memory structures. Rows are only ever dropped together with a
//! [`Warning`] in the returned [`Loaded`] value.

mod aqi;
mod dem;
mod features;
#[cfg(feature = "fetch")]
mod fetch;
mod landuse;
mod street;
mod survey;

use std::fmt;

pub use aqi::{load_aqi_stations, parse_aqi_stations, AqiStation};
pub use dem::{load_dem_ascii_grid, parse_dem_ascii_grid, DemGrid};
pub use features::{
    load_feature_records, object_class, seg_class, parse_feature_records, write_feature_records, FeatureRecord, LowLevelFeatures,
    SceneFeatures,
};
#[cfg(feature = "fetch")]
pub use fetch::{fetch_street_network, BoundingBox, FetchOptions};
pub use landuse::{load_land_use, parse_land_use, LandUseCategory, LandUseDataset, LandUsePolygon};
pub use street::{
    load_street_graph, parse_street_graph, EdgeSpec, PointOfInterest, StreetEdge, StreetGraph, StreetNode};
pub use survey::{load_survey_responses, parse_survey_responses, SurveyResponse};

/// Non-fatal condition reported by a loader.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Warning(pub String);

impl fmt::Display for Warning {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.0)
    }
}

/// A loaded dataset plus any warnings raised while reading it.
#[derive(Debug, Clone)]
pub struct Loaded<T> {
    pub value: T,
    pub warnings: Vec<Warning>,
}

impl<T> Loaded<T> {
    pub(crate) fn new(value: T, warnings: Vec<Warning>) -> Self {
        for w in &warnings {
            log::warn!("{w}");
        }
        Loaded { value, warnings }
    }

    pub fn into_value(self) -> T {
        self.value
    }
}

pub(crate) fn read_to_string(path: &std::path::Path) -> crate::Result<String> {
    std::fs::read_to_string(path).map_err(|e| crate::Error::io(path, e))
}
