#![allow(dead_code)]

pub mod checks;

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};

use bikeability::config::RunConfig;
use bikeability::geo::GeoPoint;
use bikeability::indicators::{default_registry, IndicatorValue, IndicatorVector, Registry};
use bikeability::pipeline::{run_pipeline, RunOutcome, Stage};
use rand::Rng;

pub fn fixture_dir() -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("tests/fixtures/mini_city")
}

pub fn fixture_config(out: &Path, overrides: &[&str]) -> RunConfig {
    let overrides: Vec<String> = overrides.iter().map(|s| s.to_string()).collect();
    let mut c = RunConfig::load(fixture_dir().join("config.json"), &overrides).unwrap();
    c.output_dir = out.to_path_buf();
    c
}

pub fn run_fixture(out: &Path, overrides: &[&str]) -> RunOutcome {
    run_pipeline(fixture_config(out, overrides), Stage::Export).unwrap()
}

/// `point_id -> indicator -> value` from the oracle ledger.
pub fn ledger() -> BTreeMap<String, BTreeMap<String, f64>> {
    let mut out: BTreeMap<String, BTreeMap<String, f64>> = BTreeMap::new();
    let mut r = csv::Reader::from_path(fixture_dir().join("ledger.csv")).unwrap();
    for rec in r.records() {
        let rec = rec.unwrap();
        out.entry(rec[0].to_string())
            .or_default()
            .insert(rec[1].to_string(), rec[2].parse().unwrap());
    }
    out
}

pub fn vector_from(registry: &Registry, values: &[f64]) -> IndicatorVector {
    IndicatorVector {
        point_id: "p".into(),
        city: "c".into(),
        location: GeoPoint::new(0.0, 0.0).unwrap(),
        entries: registry
            .specs()
            .iter()
            .zip(values)
            .map(|(s, v)| IndicatorValue {
                name: s.name.clone(),
                category: s.category,
                source: s.source,
                value: Some(*v),
                imputed: false,
            })
            .collect(),
    }
}

pub fn random_vector<R: Rng>(rng: &mut R) -> IndicatorVector {
    let reg = default_registry();
    let values: Vec<f64> = (0..reg.len()).map(|_| rng.random::<f64>()).collect();
    vector_from(&reg, &values)
}
