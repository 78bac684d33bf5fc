use std::collections::{BTreeMap, HashSet};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::ingest::{object_class, seg_class, FeatureRecord};

/// Column order of the perception feature matrix.
pub const FEATURE_NAMES: [&str; 26] = [
    "tree_ss",
    "sky_ss",
    "street_ss",
    "built_ss",
    "others_ss",
    "nature",
    "shannon",
    "slum_ic",
    "market_ic",
    "built_other_ic",
    "green_other_ic",
    "bicycle_od",
    "bus_od",
    "car_od",
    "motorcycle_od",
    "person_od",
    "traffic_light_od",
    "truck_od",
    "canny_edge_llf",
    "no_of_blobs_llf",
    "hue_mean_llf",
    "hue_std_llf",
    "lightness_mean_llf",
    "lightness_std_llf",
    "saturation_mean_llf",
    "saturation_std_llf",
];

const STREET_CLASSES: [&str; 2] = [seg_class::STREET, seg_class::SIDEWALK];
const NATURE_CLASSES: [&str; 4] = [seg_class::GREENERY, seg_class::SKY, seg_class::WATER, seg_class::TERRAIN];

/// Shannon entropy (natural log) of the positive class fractions after
/// renormalizing them to sum to 1.
pub fn seg_entropy(seg_fraction: &BTreeMap<String, f64>) -> f64 {
    let total: f64 = seg_fraction.values().filter(|&&f| f > 0.0).sum();
    if total <= 0.0 {
        return 0.0;
    }
    seg_fraction
        .values()
        .filter(|&&f| f > 0.0)
        .map(|&f| {
            let p = f / total;
            -p * p.ln()
        })
        .sum::<f64>()
        .max(0.0)
}

/// One row of 26 features per image.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct FeatureMatrix {
    pub image_ids: Vec<String>,
    pub rows: Vec<[f64; 26]>,
}

impl FeatureMatrix {
    pub fn len(&self) -> usize {
        self.rows.len()
    }

    pub fn is_empty(&self) -> bool {
        self.rows.is_empty()
    }

    pub fn column_index(name: &str) -> Option<usize> {
        FEATURE_NAMES.iter().position(|&n| n == name)
    }

    pub fn row_of(&self, image_id: &str) -> Option<&[f64; 26]> {
        self.image_ids.iter().position(|id| id == image_id).map(|i| &self.rows[i])
    }

    pub fn column(&self, j: usize) -> Vec<f64> {
        self.rows.iter().map(|r| r[j]).collect()
    }

    /// Rows for the listed images, in that order.
    pub fn select(&self, image_ids: &[String]) -> Result<FeatureMatrix> {
        let index: BTreeMap<&str, usize> = self.image_ids.iter().enumerate().map(|(i, id)| (id.as_str(), i)).collect();
        let rows = image_ids
            .iter()
            .map(|id| {
                index
                    .get(id.as_str())
                    .map(|&i| self.rows[i])
                    .ok_or_else(|| Error::Validation(format!("no feature record for image {id}")))
            })
            .collect::<Result<Vec<_>>>()?;
        Ok(FeatureMatrix {
            image_ids: image_ids.to_vec(),
            rows,
        })
    }
}

fn feature_row(r: &FeatureRecord) -> [f64; 26] {
    let seg = |c: &str| r.seg(c);
    let sum = |cs: &[&str]| cs.iter().map(|c| seg(c)).sum::<f64>();
    let named: HashSet<&str> = [seg_class::GREENERY, seg_class::SKY, seg_class::BUILDING]
        .into_iter()
        .chain(STREET_CLASSES)
        .collect();
    let others: f64 = r
        .seg_fraction
        .iter()
        .filter(|(k, _)| !named.contains(k.as_str()))
        .map(|(_, v)| v)
        .sum();
    let od = |c: &str| f64::from(r.count(c));
    let s = &r.scene;
    let l = &r.lowlevel;
    [
        seg(seg_class::GREENERY),
        seg(seg_class::SKY),
        sum(&STREET_CLASSES),
        seg(seg_class::BUILDING),
        others,
        sum(&NATURE_CLASSES),
        seg_entropy(&r.seg_fraction),
        s.slum_ic,
        s.market_ic,
        s.built_other_ic,
        s.green_other_ic,
        od(object_class::BICYCLE),
        od(object_class::BUS),
        od(object_class::CAR),
        od(object_class::MOTORCYCLE),
        od(object_class::PERSON),
        od(object_class::TRAFFIC_LIGHT),
        od(object_class::TRUCK),
        l.canny_edge_llf,
        l.no_of_blobs_llf,
        l.hue_mean_llf,
        l.hue_std_llf,
        l.lightness_mean_llf,
        l.lightness_std_llf,
        l.saturation_mean_llf,
        l.saturation_std_llf,
    ]
}

/// Builds the feature matrix in record order. Records are validated first;
/// duplicate image ids are rejected.
pub fn assemble_features(records: &[FeatureRecord]) -> Result<FeatureMatrix> {
    let mut seen = HashSet::new();
    let mut m = FeatureMatrix::default();
    for r in records {
        if !seen.insert(r.image_id.as_str()) {
            return Err(Error::Validation(format!("duplicate image_id {}", r.image_id)));
        }
        r.validate()?;
        let row = feature_row(r);
        if let Some(j) = row.iter().position(|v| !v.is_finite()) {
            return Err(Error::Validation(format!(
                "image {}: feature {} is not finite",
                r.image_id, FEATURE_NAMES[j]
            )));
        }
        m.image_ids.push(r.image_id.clone());
        m.rows.push(row);
    }
    Ok(m)
}
