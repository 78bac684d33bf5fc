use std::collections::{BTreeMap, HashSet};
use std::io::Write;
use std::path::Path;

use serde::{Deserialize, Serialize};

use super::{read_to_string, Loaded};
use crate::error::{Error, Result};
use crate::geo::GeoPoint;

/// Segmentation class keys understood by the indicator extractors.
pub mod seg_class {
    pub const GREENERY: &str = "greenery";
    pub const BUILDING: &str = "building";
    pub const WATER: &str = "water";
    pub const SKY: &str = "sky";
    pub const STREET: &str = "street";
    pub const CURB: &str = "curb";
    pub const TERRAIN: &str = "terrain";
    pub const UTILITY_POLE: &str = "utility_pole";
    pub const POTHOLE: &str = "pothole";
    pub const STREET_LIGHT: &str = "street_light";
    pub const BIKE_LANE: &str = "bike_lane";
    pub const STREET_AMENITY: &str = "street_amenity";
    pub const BIKE_PARKING: &str = "bike_parking";
    pub const SIDEWALK: &str = "sidewalk";
    pub const CROSSWALK: &str = "crosswalk";
    pub const CURB_CUT: &str = "curb_cut";
    pub const TRAFFIC_LIGHT: &str = "traffic_light";
    pub const STOP_SIGN: &str = "stop_sign";
}

/// Object-detection class keys.
pub mod object_class {
    pub const BICYCLE: &str = "bicycle";
    pub const BUS: &str = "bus";
    pub const CAR: &str = "car";
    pub const MOTORCYCLE: &str = "motorcycle";
    pub const PERSON: &str = "person";
    pub const TRAFFIC_LIGHT: &str = "traffic_light";
    pub const TRUCK: &str = "truck";
}

/// Scene-classification probabilities, already grouped.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct SceneFeatures {
    pub slum_ic: f64,
    pub market_ic: f64,
    pub built_other_ic: f64,
    pub green_other_ic: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct LowLevelFeatures {
    pub canny_edge_llf: f64,
    pub no_of_blobs_llf: f64,
    pub hue_mean_llf: f64,
    pub hue_std_llf: f64,
    pub lightness_mean_llf: f64,
    pub lightness_std_llf: f64,
    pub saturation_mean_llf: f64,
    pub saturation_std_llf: f64,
}

/// Computer-vision outputs for one street-level image.
#[derive(Debug, Clone, PartialEq)]
pub struct FeatureRecord {
    pub image_id: String,
    pub location: GeoPoint,
    /// Pixel fraction per segmentation class.
    pub seg_fraction: BTreeMap<String, f64>,
    /// Detected objects per class.
    pub object_count: BTreeMap<String, u32>,
    /// Raw scene-label probabilities, informational only.
    pub scene_prob: BTreeMap<String, f64>,
    pub scene: SceneFeatures,
    pub lowlevel: LowLevelFeatures,
}

/// Wire shape of one JSON-lines record.
#[derive(Serialize, Deserialize)]
struct RawRecord {
    image_id: String,
    lon: f64,
    lat: f64,
    seg_fraction: BTreeMap<String, f64>,
    object_count: BTreeMap<String, u32>,
    #[serde(default, skip_serializing_if = "BTreeMap::is_empty")]
    scene_prob: BTreeMap<String, f64>,
    #[serde(flatten)]
    scene: SceneFeatures,
    #[serde(flatten)]
    lowlevel: LowLevelFeatures,
}

impl FeatureRecord {
    pub fn seg(&self, class: &str) -> f64 {
        self.seg_fraction.get(class).copied().unwrap_or(0.0)
    }

    pub fn count(&self, class: &str) -> u32 {
        self.object_count.get(class).copied().unwrap_or(0)
    }

    /// Checks ranges and the fraction-sum invariant.
    pub fn validate(&self) -> Result<()> {
        let id = &self.image_id;
        let mut sum = 0.0;
        for (class, &f) in &self.seg_fraction {
            if !f.is_finite() || !(0.0..=1.0).contains(&f) {
                return Err(Error::Validation(format!(
                    "image {id}: seg_fraction for class {class} is {f}, outside [0,1]"
                )));
            }
            sum += f;
        }
        if sum > 1.0 + 1e-6 {
            return Err(Error::Validation(format!("image {id}: seg_fraction sums to {sum} > 1")));
        }
        let probs = [
            ("slum_ic", self.scene.slum_ic),
            ("market_ic", self.scene.market_ic),
            ("built_other_ic", self.scene.built_other_ic),
            ("green_other_ic", self.scene.green_other_ic),
            ("canny_edge_llf", self.lowlevel.canny_edge_llf),
        ];
        for (name, v) in probs {
            if !v.is_finite() || !(0.0..=1.0).contains(&v) {
                return Err(Error::Validation(format!("image {id}: {name} is {v}, outside [0,1]")));
            }
        }
        for (label, &p) in &self.scene_prob {
            if !p.is_finite() || !(0.0..=1.0).contains(&p) {
                return Err(Error::Validation(format!("image {id}: scene_prob {label} is {p}, outside [0,1]")));
            }
        }
        let l = &self.lowlevel;
        let non_negative = [
            ("no_of_blobs_llf", l.no_of_blobs_llf),
            ("hue_mean_llf", l.hue_mean_llf),
            ("hue_std_llf", l.hue_std_llf),
            ("lightness_mean_llf", l.lightness_mean_llf),
            ("lightness_std_llf", l.lightness_std_llf),
            ("saturation_mean_llf", l.saturation_mean_llf),
            ("saturation_std_llf", l.saturation_std_llf),
        ];
        for (name, v) in non_negative {
            if !v.is_finite() || v < 0.0 {
                return Err(Error::Validation(format!("image {id}: {name} is {v}, must be finite and >= 0")));
            }
        }
        Ok(())
    }

    fn from_raw(raw: RawRecord) -> Result<Self> {
        let location = GeoPoint::new(raw.lon, raw.lat)
            .map_err(|e| Error::Validation(format!("image {}: {e}", raw.image_id)))?;
        let rec = FeatureRecord {
            image_id: raw.image_id,
            location,
            seg_fraction: raw.seg_fraction,
            object_count: raw.object_count,
            scene_prob: raw.scene_prob,
            scene: raw.scene,
            lowlevel: raw.lowlevel,
        };
        rec.validate()?;
        Ok(rec)
    }

    fn to_raw(&self) -> RawRecord {
        RawRecord {
            image_id: self.image_id.clone(),
            lon: self.location.lon(),
            lat: self.location.lat(),
            seg_fraction: self.seg_fraction.clone(),
            object_count: self.object_count.clone(),
            scene_prob: self.scene_prob.clone(),
            scene: self.scene,
            lowlevel: self.lowlevel,
        }
    }

    /// One JSON-lines record, without the trailing newline.
    pub fn to_json_line(&self) -> String {
        serde_json::to_string(&self.to_raw()).expect("feature record serializes")
    }
}

pub fn load_feature_records(path: impl AsRef<Path>) -> Result<Loaded<Vec<FeatureRecord>>> {
    let path = path.as_ref();
    parse_feature_records(&read_to_string(path)?, &path.display().to_string())
}

/// Parses JSON-lines feature records. Blank lines are ignored; image ids
/// must be unique.
pub fn parse_feature_records(text: &str, source_name: &str) -> Result<Loaded<Vec<FeatureRecord>>> {
    let mut out = Vec::new();
    let mut seen = HashSet::new();
    for (i, line) in text.lines().enumerate() {
        if line.trim().is_empty() {
            continue;
        }
        let raw: RawRecord = serde_json::from_str(line).map_err(|e| {
            if e.is_data() {
                Error::Validation(format!("{source_name} line {}: {e}", i + 1))
            } else {
                Error::parse(source_name, i + 1, e.to_string())
            }
        })?;
        let rec = FeatureRecord::from_raw(raw)
            .map_err(|e| Error::Validation(format!("{source_name} line {}: {}", i + 1, strip_prefix(&e))))?;
        if !seen.insert(rec.image_id.clone()) {
            return Err(Error::Validation(format!(
                "{source_name} line {}: duplicate image_id {}",
                i + 1,
                rec.image_id
            )));
        }
        out.push(rec);
    }
    Ok(Loaded::new(out, Vec::new()))
}

fn strip_prefix(e: &Error) -> String {
    match e {
        Error::Validation(m) => m.clone(),
        other => other.to_string(),
    }
}

pub fn write_feature_records(path: impl AsRef<Path>, records: &[FeatureRecord]) -> Result<()> {
    let path = path.as_ref();
    let mut buf = Vec::new();
    for r in records {
        buf.extend_from_slice(r.to_json_line().as_bytes());
        buf.push(b'\n');
    }
    std::fs::File::create(path)
        .and_then(|mut f| f.write_all(&buf))
        .map_err(|e| Error::io(path, e))
}

#[cfg(test)]
mod tests {
    use super::*;

    const LINE: &str = r#"{"image_id":"img1","lon":103.8,"lat":1.3,"seg_fraction":{"greenery":0.3,"sky":0.2},"object_count":{"car":3},"slum_ic":0.1,"market_ic":0.0,"built_other_ic":0.2,"green_other_ic":0.05,"canny_edge_llf":0.12,"no_of_blobs_llf":14,"hue_mean_llf":120.5,"hue_std_llf":30.0,"lightness_mean_llf":0.5,"lightness_std_llf":0.1,"saturation_mean_llf":0.3,"saturation_std_llf":0.05}"#;

    #[test]
    fn empty_input() {
        assert!(parse_feature_records("", "t").unwrap().value.is_empty());
    }

    #[test]
    fn record_round_trips() {
        let recs = parse_feature_records(LINE, "t").unwrap().value;
        assert_eq!(recs[0].seg("greenery"), 0.3);
        assert_eq!(recs[0].count("car"), 3);
        let again = parse_feature_records(&recs[0].to_json_line(), "t").unwrap().value;
        assert_eq!(recs, again);
    }

    #[test]
    fn fraction_above_one_names_image_and_class() {
        let bad = LINE.replace("\"greenery\":0.3", "\"greenery\":1.2");
        let err = parse_feature_records(&bad, "t").unwrap_err().to_string();
        assert!(err.contains("img1") && err.contains("greenery"), "{err}");
    }

    #[test]
    fn fraction_sum_invariant() {
        let bad = LINE.replace("\"sky\":0.2", "\"sky\":0.8");
        assert!(matches!(parse_feature_records(&bad, "t"), Err(Error::Validation(_))));
    }

    #[test]
    fn missing_field_is_named() {
        let bad = LINE.replace(r#""hue_mean_llf":120.5,"#, "");
        let err = parse_feature_records(&bad, "t").unwrap_err();
        assert!(matches!(err, Error::Validation(_)));
        assert!(err.to_string().contains("hue_mean_llf"));
    }

    #[test]
    fn duplicate_ids_rejected() {
        let text = format!("{LINE}\n{LINE}\n");
        assert!(parse_feature_records(&text, "t").is_err());
    }
}
