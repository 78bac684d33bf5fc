//! Seeded selection of evaluation sites from street-network nodes.
//!
//! The generator is ChaCha8 seeded with `seed_from_u64`; node positions are
//! drawn by a forward Fisher–Yates pass with rejection-sampled bounds, so
//! `sample_points(g, n, s)` is always a prefix of `sample_points(g, n + k, s)`.

use rand_chacha::rand_core::{RngCore, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geo::{GeoPoint, SpatialIndex};
use crate::ingest::{FeatureRecord, StreetGraph};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SamplePoint {
    /// Street-node id the point was drawn from.
    pub id: String,
    pub location: GeoPoint,
    pub image_id: Option<String>,
}

/// Uniform sample of `n` graph nodes without replacement.
pub fn sample_points(graph: &StreetGraph, n: usize, seed: u64) -> Result<Vec<SamplePoint>> {
    let nodes = graph.nodes();
    if n > nodes.len() {
        return Err(Error::InvalidArgument(format!(
            "cannot sample {n} points from {} nodes",
            nodes.len()
        )));
    }
    let order = seeded_prefix(nodes.len(), n, seed);
    Ok(order
        .into_iter()
        .map(|i| SamplePoint {
            id: nodes[i].id.clone(),
            location: nodes[i].location,
            image_id: None,
        })
        .collect())
}

/// First `n` entries of a seeded shuffle of `0..len`.
pub fn seeded_prefix(len: usize, n: usize, seed: u64) -> Vec<usize> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut idx: Vec<usize> = (0..len).collect();
    for i in 0..n.min(len) {
        let j = i + bounded(&mut rng, (len - i) as u64) as usize;
        idx.swap(i, j);
    }
    idx.truncate(n);
    idx
}

/// Unbiased draw from `0..bound`.
fn bounded(rng: &mut ChaCha8Rng, bound: u64) -> u64 {
    debug_assert!(bound > 0);
    let zone = u64::MAX - (u64::MAX % bound);
    loop {
        let x = rng.next_u64();
        if x < zone {
            return x % bound;
        }
    }
}

/// Binds each point to the nearest record within `max_distance` meters.
/// Equidistant records resolve to the one listed first.
pub fn bind_images(points: &[SamplePoint], records: &[FeatureRecord], max_distance: f64) -> Result<Vec<SamplePoint>> {
    if !(max_distance > 0.0) {
        return Err(Error::InvalidArgument(format!(
            "max_distance must be positive, got {max_distance}"
        )));
    }
    let index = SpatialIndex::new(records.iter().enumerate().map(|(i, r)| (i, r.location)));
    points
        .iter()
        .map(|p| {
            let hit = index.nearest_within(p.location, max_distance)?;
            Ok(SamplePoint {
                image_id: hit.map(|(i, _)| records[i].image_id.clone()),
                ..p.clone()
            })
        })
        .collect()
}
