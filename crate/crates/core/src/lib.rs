//! Composite bikeability index: indicator extraction from street networks,
//! elevation, land use, air quality and street-level image features,
//! perception models trained on survey ratings, and an equal-weight index
//! with image-only and map-only variants.
//!
//! The staged, cached runner lives in [`pipeline`]; the `bikeability`
//! binary in the `bikeability-cli` crate wraps it.

pub mod config;
pub mod error;
pub mod export;
pub mod geo;
pub mod index;
pub mod indicators;
pub mod ingest;
pub mod perception;
pub mod pipeline;
pub mod sampling;
pub mod scaling;
pub mod stats;

pub use error::{Error, Result};

// Book chapters double as doc tests.
#[cfg(doctest)]
#[doc = include_str!("../../../book/src/introduction.md")]
mod book_introduction {}
#[cfg(doctest)]
#[doc = include_str!("../../../book/src/indicators.md")]
mod book_indicators {}
#[cfg(doctest)]
#[doc = include_str!("../../../book/src/land-use-mix.md")]
mod book_land_use_mix {}
#[cfg(doctest)]
#[doc = include_str!("../../../book/src/air-quality.md")]
mod book_air_quality {}
#[cfg(doctest)]
#[doc = include_str!("../../../book/src/spatial-queries.md")]
mod book_spatial_queries {}
#[cfg(doctest)]
#[doc = include_str!("../../../book/src/composition.md")]
mod book_composition {}
#[cfg(doctest)]
#[doc = include_str!("../../../book/src/perception.md")]
mod book_perception {}
#[cfg(doctest)]
#[doc = include_str!("../../../book/src/pipeline.md")]
mod book_pipeline {}
#[cfg(doctest)]
#[doc = include_str!("../../../book/src/formats.md")]
mod book_formats {}
