//! The 34-indicator registry, raw extraction, and scaled indicator vectors.

mod extract;
mod table;

use std::collections::HashSet;
use std::fmt;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::ingest::{object_class, seg_class};
use crate::perception::Dimension;
use crate::scaling::{pavement_map, road_type_map, ScaleKind, ScalingRule};

pub use extract::{
    aqi_at, connectivity_counts, landuse_mix, mix_entropy, pavement_score, poi_count, road_type_score, road_width_score,
    scenery_fractions, slope_at, svi_presence_indicators, transit_count, vci_flags, vehicle_count_buffer,
    ConnectivityCounts, Datasets, ExtractionSettings, Extractor, GraphIndex, LandUseIndex, PerceptionPredictions,
    RecordIndex, SviPresence, VciFlags,
};
pub use table::{
    finalize, scale_table, AssembledTable, IndicatorValue, IndicatorVector, RawRow, RawTable, ScaledTable,
    MAX_MISSING_FRACTION,
};

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Category {
    Connectivity,
    Environment,
    Infrastructure,
    Perception,
    Vci,
}

impl Category {
    pub const ALL: [Category; 5] = [
        Category::Connectivity,
        Category::Environment,
        Category::Infrastructure,
        Category::Perception,
        Category::Vci,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            Category::Connectivity => "connectivity",
            Category::Environment => "environment",
            Category::Infrastructure => "infrastructure",
            Category::Perception => "perception",
            Category::Vci => "vci",
        }
    }
}

impl fmt::Display for Category {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

/// Where an indicator's data comes from.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Source {
    /// Derived from street-level imagery.
    Svi,
    NonSvi,
}

/// Which buffer radius an extraction uses by default.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum BufferClass {
    /// Area aggregation, 500 m by default.
    Area,
    /// Street-segment aggregation, 100 m by default.
    Segment,
}

/// How the raw value of an indicator is obtained.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "rule", rename_all = "snake_case")]
pub enum Extraction {
    SignalizedIntersections,
    UnsignalizedIntersections,
    CulDeSacs,
    /// Terrain slope in degrees from the DEM.
    Slope,
    PoiCount,
    LandUseMix,
    /// IDW-interpolated annual mean concentration.
    AirQuality,
    /// Pixel fraction of one segmentation class in the bound image.
    SegFraction { class: String },
    /// Whether any of the classes occupies more than the presence threshold.
    SegPresence { classes: Vec<String> },
    RoadType,
    Pavement,
    /// Mean tagged width of nearby street segments, meters.
    RoadWidth,
    TransitCount,
    /// Whether any nearby street segment has on-street parking.
    OnstreetParking,
    /// Whether any nearby node carries a traffic-calming device.
    SpeedControl,
    /// Summed detections of the classes across images in the buffer.
    VehicleCount { classes: Vec<String> },
    /// Predicted survey score of the bound image.
    Perception { dimension: Dimension },
}

impl Extraction {
    pub fn buffer_class(&self) -> Option<BufferClass> {
        use Extraction::*;
        match self {
            SignalizedIntersections | UnsignalizedIntersections | CulDeSacs | PoiCount | LandUseMix
            | TransitCount | VehicleCount { .. } => Some(BufferClass::Area),
            RoadType | Pavement | RoadWidth | OnstreetParking | SpeedControl => Some(BufferClass::Segment),
            Slope | AirQuality | SegFraction { .. } | SegPresence { .. } | Perception { .. } => None,
        }
    }

    /// Whether `kind` can interpret the raw values this extraction emits.
    pub fn accepts(&self, kind: &ScaleKind) -> bool {
        use Extraction::*;
        match self {
            SignalizedIntersections | UnsignalizedIntersections | CulDeSacs | Slope | PoiCount | LandUseMix
            | AirQuality | SegFraction { .. } | TransitCount | VehicleCount { .. } | Perception { .. } => {
                matches!(kind, ScaleKind::MinMax | ScaleKind::NegMinMax)
            }
            RoadType | Pavement => matches!(kind, ScaleKind::Categorical(_)),
            RoadWidth => matches!(kind, ScaleKind::WidthOver10),
            SegPresence { .. } | OnstreetParking | SpeedControl => matches!(kind, ScaleKind::Presence { .. }),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct IndicatorSpec {
    pub name: String,
    pub category: Category,
    pub source: Source,
    pub extraction: Extraction,
    pub scaling: ScalingRule,
    /// Buffer radius in meters; `None` uses the run-wide default for the
    /// extraction's buffer class.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub radius: Option<f64>,
}

/// Ordered, validated list of indicator specs.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "RegistryDoc", into = "RegistryDoc")]
pub struct Registry {
    specs: Vec<IndicatorSpec>,
}

#[derive(Serialize, Deserialize)]
struct RegistryDoc {
    indicators: Vec<IndicatorSpec>,
}

impl TryFrom<RegistryDoc> for Registry {
    type Error = Error;
    fn try_from(doc: RegistryDoc) -> Result<Self> {
        Registry::new(doc.indicators)
    }
}

impl From<Registry> for RegistryDoc {
    fn from(r: Registry) -> Self {
        RegistryDoc { indicators: r.specs }
    }
}

impl Registry {
    pub fn new(specs: Vec<IndicatorSpec>) -> Result<Self> {
        if specs.is_empty() {
            return Err(Error::Configuration("indicator registry is empty".into()));
        }
        let mut seen = HashSet::new();
        for s in &specs {
            if !seen.insert(s.name.as_str()) {
                return Err(Error::Configuration(format!("duplicate indicator name {:?}", s.name)));
            }
            s.scaling.validate()?;
            if !s.extraction.accepts(&s.scaling.kind) {
                return Err(Error::Configuration(format!(
                    "indicator {}: scaling rule {:?} does not fit extraction {:?}",
                    s.name, s.scaling.kind, s.extraction
                )));
            }
            if let Some(r) = s.radius {
                if !(r > 0.0) || !r.is_finite() {
                    return Err(Error::Configuration(format!("indicator {}: radius must be > 0, got {r}", s.name)));
                }
            }
        }
        Ok(Registry { specs })
    }

    pub fn specs(&self) -> &[IndicatorSpec] {
        &self.specs
    }

    pub fn len(&self) -> usize {
        self.specs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.specs.is_empty()
    }

    pub fn position(&self, name: &str) -> Option<usize> {
        self.specs.iter().position(|s| s.name == name)
    }

    pub fn names(&self) -> impl Iterator<Item = &str> {
        self.specs.iter().map(|s| s.name.as_str())
    }
}

impl Default for Registry {
    fn default() -> Self {
        default_registry()
    }
}

fn spec(name: &str, category: Category, source: Source, extraction: Extraction, kind: ScaleKind) -> IndicatorSpec {
    IndicatorSpec {
        name: name.into(),
        category,
        source,
        extraction,
        scaling: ScalingRule::new(kind),
        radius: None,
    }
}

fn classes(names: &[&str]) -> Vec<String> {
    names.iter().map(|s| s.to_string()).collect()
}

/// The standard 34 indicators.
pub fn default_registry() -> Registry {
    use Category::*;
    use Extraction as E;
    use ScaleKind::*;
    use Source::*;
    let seg = |c: &str| E::SegFraction { class: c.into() };
    let present = |c: &[&str]| E::SegPresence { classes: classes(c) };
    let yes = Presence { invert: false };
    let no = Presence { invert: true };

    let mut specs = vec![
        spec("signalized_intersections", Connectivity, NonSvi, E::SignalizedIntersections, NegMinMax),
        spec("unsignalized_intersections", Connectivity, NonSvi, E::UnsignalizedIntersections, NegMinMax),
        spec("culdesacs", Connectivity, NonSvi, E::CulDeSacs, NegMinMax),
        spec("slope", Environment, NonSvi, E::Slope, NegMinMax),
        spec("poi", Environment, NonSvi, E::PoiCount, MinMax),
        spec("landuse_mix", Environment, NonSvi, E::LandUseMix, MinMax),
        spec("air_quality", Environment, NonSvi, E::AirQuality, NegMinMax),
        spec("greenery", Environment, Svi, seg(seg_class::GREENERY), MinMax),
        spec("buildings", Environment, Svi, seg(seg_class::BUILDING), MinMax),
        spec("water", Environment, Svi, seg(seg_class::WATER), MinMax),
        spec("road_type", Infrastructure, NonSvi, E::RoadType, Categorical(road_type_map())),
        spec("potholes", Infrastructure, Svi, present(&[seg_class::POTHOLE]), no.clone()),
        spec("street_light", Infrastructure, Svi, present(&[seg_class::STREET_LIGHT]), yes.clone()),
        spec("bike_lanes", Infrastructure, Svi, present(&[seg_class::BIKE_LANE]), yes.clone()),
        spec("transit", Infrastructure, NonSvi, E::TransitCount, MinMax),
        spec("pavement", Infrastructure, NonSvi, E::Pavement, Categorical(pavement_map())),
        spec("street_amenities", Infrastructure, Svi, present(&[seg_class::STREET_AMENITY]), yes.clone()),
        spec("utility_pole", Infrastructure, Svi, present(&[seg_class::UTILITY_POLE]), no.clone()),
        spec("bike_parking", Infrastructure, Svi, present(&[seg_class::BIKE_PARKING]), yes.clone()),
        spec("road_width", Infrastructure, NonSvi, E::RoadWidth, WidthOver10),
        spec("sidewalk", Infrastructure, Svi, present(&[seg_class::SIDEWALK]), yes.clone()),
        spec("crosswalk", Infrastructure, Svi, present(&[seg_class::CROSSWALK]), yes.clone()),
        spec("curb_cuts", Infrastructure, Svi, present(&[seg_class::CURB_CUT]), yes.clone()),
    ];
    for d in Dimension::ALL {
        specs.push(spec(d.as_str(), Perception, Svi, E::Perception { dimension: d }, MinMax));
    }
    specs.extend([
        spec(
            "vehicles",
            Vci,
            Svi,
            E::VehicleCount {
                classes: classes(&[object_class::CAR, object_class::BUS, object_class::TRUCK, object_class::MOTORCYCLE]),
            },
            NegMinMax,
        ),
        spec("onstreet_parking", Vci, NonSvi, E::OnstreetParking, no),
        spec(
            "traffic_control",
            Vci,
            Svi,
            present(&[seg_class::TRAFFIC_LIGHT, seg_class::STOP_SIGN]),
            yes.clone(),
        ),
        spec("speed_control", Vci, NonSvi, E::SpeedControl, yes),
    ]);
    Registry::new(specs).expect("default registry is valid")
}
