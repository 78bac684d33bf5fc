//! Per-point raw indicator extraction over immutable, pre-indexed datasets.

use std::collections::{BTreeMap, BTreeSet, HashMap};

use serde::{Deserialize, Serialize};

use super::table::{RawRow, RawTable};
use super::{BufferClass, Extraction, IndicatorSpec, Registry};
use crate::error::{Error, Result};
use crate::geo::{buffer_grid_samples, haversine_distance, GeoPoint, SpatialIndex, METERS_PER_DEGREE};
use crate::ingest::{seg_class, AqiStation, DemGrid, FeatureRecord, LandUseCategory, LandUseDataset, StreetGraph};
use crate::perception::Dimension;
use crate::sampling::SamplePoint;
use crate::scaling::{presence_score, width_score, CategoricalMap, ScaleKind};

/// Predicted perception score per image and dimension.
pub type PerceptionPredictions = BTreeMap<String, BTreeMap<Dimension, f64>>;

/// Bucket size for street-layer indexes; about 500 m of latitude.
const STREET_CELL_DEGREES: f64 = 0.0045;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct ExtractionSettings {
    /// Radius for area aggregation (counts, land use, vehicles), meters.
    pub area_radius: f64,
    /// Radius for street-segment aggregation, meters.
    pub segment_radius: f64,
    pub idw_power: f64,
    /// Distance under which a station's own value is used, meters.
    pub idw_epsilon: f64,
    /// Spacing of the land-use sampling grid, meters.
    pub landuse_cell: f64,
    /// A segmentation class counts as present above this pixel fraction.
    pub presence_threshold: f64,
}

impl Default for ExtractionSettings {
    fn default() -> Self {
        ExtractionSettings {
            area_radius: 500.0,
            segment_radius: 100.0,
            idw_power: 2.0,
            idw_epsilon: 1.0,
            landuse_cell: 25.0,
            presence_threshold: 0.0,
        }
    }
}

impl ExtractionSettings {
    pub fn validate(&self) -> Result<()> {
        let positive = [
            ("area_radius", self.area_radius),
            ("segment_radius", self.segment_radius),
            ("idw_power", self.idw_power),
            ("idw_epsilon", self.idw_epsilon),
            ("landuse_cell", self.landuse_cell),
        ];
        for (name, v) in positive {
            if !(v > 0.0) || !v.is_finite() {
                return Err(Error::Configuration(format!("{name} must be > 0, got {v}")));
            }
        }
        if self.landuse_cell > self.area_radius {
            return Err(Error::Configuration(format!(
                "landuse_cell {} exceeds area_radius {}",
                self.landuse_cell, self.area_radius
            )));
        }
        if !(0.0..1.0).contains(&self.presence_threshold) {
            return Err(Error::Configuration(format!(
                "presence_threshold must be in [0,1), got {}",
                self.presence_threshold
            )));
        }
        Ok(())
    }

    fn radius_for(&self, spec: &IndicatorSpec) -> f64 {
        spec.radius.unwrap_or(match spec.extraction.buffer_class() {
            Some(BufferClass::Segment) => self.segment_radius,
            _ => self.area_radius,
        })
    }
}

/// Borrowed inputs for one city.
#[derive(Debug, Clone, Copy)]
pub struct Datasets<'a> {
    pub graph: &'a StreetGraph,
    pub dem: Option<&'a DemGrid>,
    pub land_use: Option<&'a LandUseDataset>,
    pub aqi: &'a [AqiStation],
    pub records: &'a [FeatureRecord],
}

/// Street graph with spatial indexes over nodes, POIs and transit stops.
#[derive(Debug)]
pub struct GraphIndex<'a> {
    graph: &'a StreetGraph,
    nodes: SpatialIndex<usize>,
    pois: SpatialIndex<usize>,
    transit: SpatialIndex<usize>,
}

impl<'a> GraphIndex<'a> {
    pub fn new(graph: &'a StreetGraph) -> Self {
        let layer = |pts: &[crate::ingest::PointOfInterest]| {
            SpatialIndex::with_cell_degrees(pts.iter().enumerate().map(|(i, p)| (i, p.location)), STREET_CELL_DEGREES)
        };
        GraphIndex {
            graph,
            nodes: SpatialIndex::with_cell_degrees(
                graph.nodes().iter().enumerate().map(|(i, n)| (i, n.location)),
                STREET_CELL_DEGREES,
            ),
            pois: layer(graph.pois()),
            transit: layer(graph.transit_stops()),
        }
    }

    pub fn graph(&self) -> &'a StreetGraph {
        self.graph
    }

    /// Node indices within `radius`, ascending.
    pub fn nodes_within(&self, p: GeoPoint, radius: f64) -> Result<Vec<usize>> {
        self.nodes.positions_within(p, radius)
    }

    /// Edges with at least one endpoint within `radius`, ascending.
    pub fn edges_near(&self, p: GeoPoint, radius: f64) -> Result<Vec<usize>> {
        let mut edges = BTreeSet::new();
        for n in self.nodes_within(p, radius)? {
            edges.extend(self.graph.incident_edges(n).iter().copied());
        }
        Ok(edges.into_iter().collect())
    }
}

/// Feature records indexed by location and by image id.
#[derive(Debug)]
pub struct RecordIndex<'a> {
    records: &'a [FeatureRecord],
    spatial: SpatialIndex<usize>,
    by_id: HashMap<&'a str, usize>,
}

impl<'a> RecordIndex<'a> {
    pub fn new(records: &'a [FeatureRecord]) -> Self {
        RecordIndex {
            records,
            spatial: SpatialIndex::with_cell_degrees(
                records.iter().enumerate().map(|(i, r)| (i, r.location)),
                STREET_CELL_DEGREES,
            ),
            by_id: records.iter().enumerate().map(|(i, r)| (r.image_id.as_str(), i)).collect(),
        }
    }

    pub fn get(&self, image_id: &str) -> Option<&'a FeatureRecord> {
        self.by_id.get(image_id).map(|&i| &self.records[i])
    }

    pub fn within(&self, p: GeoPoint, radius: f64) -> Result<impl Iterator<Item = &'a FeatureRecord> + '_> {
        Ok(self.spatial.positions_within(p, radius)?.into_iter().map(|i| &self.records[i]))
    }
}

/// Land-use polygons bucketed by bounding box for point lookups.
#[derive(Debug)]
pub struct LandUseIndex<'a> {
    dataset: &'a LandUseDataset,
    buckets: HashMap<(i64, i64), Vec<u32>>,
}

const LANDUSE_CELL_DEGREES: f64 = 0.005;

impl<'a> LandUseIndex<'a> {
    pub fn new(dataset: &'a LandUseDataset) -> Self {
        let mut buckets: HashMap<(i64, i64), Vec<u32>> = HashMap::new();
        for (i, poly) in dataset.polygons.iter().enumerate() {
            let b = poly.geometry.bbox();
            let (r0, c0) = Self::key(b.min_lon, b.min_lat);
            let (r1, c1) = Self::key(b.max_lon, b.max_lat);
            for r in r0..=r1 {
                for c in c0..=c1 {
                    buckets.entry((r, c)).or_default().push(i as u32);
                }
            }
        }
        LandUseIndex { dataset, buckets }
    }

    fn key(lon: f64, lat: f64) -> (i64, i64) {
        (
            (lat / LANDUSE_CELL_DEGREES).floor() as i64,
            (lon / LANDUSE_CELL_DEGREES).floor() as i64,
        )
    }

    /// Category of the first polygon (in dataset order) containing `p`.
    pub fn category_at(&self, p: GeoPoint) -> Option<LandUseCategory> {
        let bucket = self.buckets.get(&Self::key(p.lon(), p.lat()))?;
        bucket
            .iter()
            .map(|&i| &self.dataset.polygons[i as usize])
            .find(|poly| poly.geometry.contains(p))
            .map(|poly| poly.category)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
pub struct ConnectivityCounts {
    pub signalized_intersections: u32,
    pub unsignalized_intersections: u32,
    pub culdesacs: u32,
}

/// Intersections (degree ≥ 3) split by signal flag, and dead ends (degree 1),
/// among nodes within `radius`.
pub fn connectivity_counts(p: GeoPoint, graph: &GraphIndex, radius: f64) -> Result<ConnectivityCounts> {
    let mut out = ConnectivityCounts::default();
    let g = graph.graph();
    for n in graph.nodes_within(p, radius)? {
        match g.degree(n) {
            1 => out.culdesacs += 1,
            d if d >= 3 => {
                if g.nodes()[n].signalized {
                    out.signalized_intersections += 1;
                } else {
                    out.unsignalized_intersections += 1;
                }
            }
            _ => {}
        }
    }
    Ok(out)
}

/// Terrain slope in degrees from a Horn 3×3 gradient around the cell holding
/// `p`. `None` off-grid, on the border, or next to nodata.
pub fn slope_at(p: GeoPoint, dem: &DemGrid) -> Option<f64> {
    let (r, c) = dem.cell_of(p)?;
    if r == 0 || c == 0 || r + 1 >= dem.nrows() || c + 1 >= dem.ncols() {
        return None;
    }
    let mut z = [[0.0; 3]; 3];
    for (i, row) in z.iter_mut().enumerate() {
        for (j, v) in row.iter_mut().enumerate() {
            // z[0] is the northern row
            *v = dem.get(r + 1 - i, c + j - 1)?;
        }
    }
    let dy = dem.cell_size() * METERS_PER_DEGREE;
    let dx = dy * dem.row_lat(r).to_radians().cos();
    let dzdx = ((z[0][2] + 2.0 * z[1][2] + z[2][2]) - (z[0][0] + 2.0 * z[1][0] + z[2][0])) / (8.0 * dx);
    let dzdy = ((z[0][0] + 2.0 * z[0][1] + z[0][2]) - (z[2][0] + 2.0 * z[2][1] + z[2][2])) / (8.0 * dy);
    Some(dzdx.hypot(dzdy).atan().to_degrees())
}

pub fn poi_count(p: GeoPoint, graph: &GraphIndex, radius: f64) -> Result<usize> {
    Ok(graph.pois.positions_within(p, radius)?.len())
}

pub fn transit_count(p: GeoPoint, graph: &GraphIndex, radius: f64) -> Result<usize> {
    Ok(graph.transit.positions_within(p, radius)?.len())
}

/// Normalized Shannon entropy of land-use proportions over a sampling grid
/// clipped to the buffer. Samples outside every polygon are ignored; with
/// none classified the mix is 0.
pub fn landuse_mix(p: GeoPoint, land_use: &LandUseIndex, radius: f64, cell: f64) -> Result<f64> {
    let mut counts = [0.0f64; 3];
    for s in buffer_grid_samples(p, radius, cell)? {
        if let Some(cat) = land_use.category_at(s) {
            counts[cat.index()] += 1.0;
        }
    }
    Ok(mix_entropy(&counts))
}

/// `-Σ q ln q / ln 3` over the shares of the three land-use classes. Inputs
/// are normalized first; all-zero input gives 0.
pub fn mix_entropy(amounts: &[f64]) -> f64 {
    let total: f64 = amounts.iter().filter(|&&a| a > 0.0).sum();
    if total <= 0.0 {
        return 0.0;
    }
    let h: f64 = amounts
        .iter()
        .filter(|&&a| a > 0.0)
        .map(|&a| {
            let q = a / total;
            -q * q.ln()
        })
        .sum();
    (h / (LandUseCategory::ALL.len() as f64).ln()).clamp(0.0, 1.0)
}

/// Inverse-distance-weighted annual mean at `p`. A station closer than
/// `epsilon` meters contributes its own value directly.
pub fn aqi_at(p: GeoPoint, stations: &[AqiStation], power: f64, epsilon: f64) -> Result<f64> {
    if stations.is_empty() {
        return Err(Error::Configuration("air-quality interpolation needs at least one station".into()));
    }
    let dists: Vec<f64> = stations.iter().map(|s| haversine_distance(p, s.location)).collect();
    let nearest = dists
        .iter()
        .enumerate()
        .min_by(|a, b| a.1.total_cmp(b.1))
        .map(|(i, &d)| (i, d))
        .expect("non-empty");
    if nearest.1 <= epsilon {
        return Ok(stations[nearest.0].annual_mean);
    }
    // weights relative to the nearest station; same ratios, no underflow
    let (mut num, mut den) = (0.0, 0.0);
    for (s, d) in stations.iter().zip(&dists) {
        let w = (nearest.1 / d).powf(power);
        num += w * s.annual_mean;
        den += w;
    }
    Ok(num / den)
}

/// Greenery, building and water pixel fractions of a bound image.
pub fn scenery_fractions(record: Option<&FeatureRecord>) -> Option<(f64, f64, f64)> {
    record.map(|r| (r.seg(seg_class::GREENERY), r.seg(seg_class::BUILDING), r.seg(seg_class::WATER)))
}

fn mean(values: impl Iterator<Item = f64>) -> Option<f64> {
    let (sum, n) = values.fold((0.0, 0usize), |(s, n), v| (s + v, n + 1));
    (n > 0).then(|| sum / n as f64)
}

/// Mean categorical score of `highway` over nearby segments; `None` when no
/// segment is near.
pub fn road_type_score(p: GeoPoint, graph: &GraphIndex, radius: f64, map: &CategoricalMap) -> Result<Option<f64>> {
    let edges = graph.graph().edges();
    Ok(mean(graph.edges_near(p, radius)?.into_iter().map(|e| map.score(&edges[e].highway))))
}

/// Mean categorical score of `surface` over nearby segments that carry one.
pub fn pavement_score(p: GeoPoint, graph: &GraphIndex, radius: f64, map: &CategoricalMap) -> Result<Option<f64>> {
    let edges = graph.graph().edges();
    Ok(mean(
        graph
            .edges_near(p, radius)?
            .into_iter()
            .filter_map(|e| edges[e].surface.as_deref().map(|s| map.score(s))),
    ))
}

fn mean_width(p: GeoPoint, graph: &GraphIndex, radius: f64) -> Result<Option<f64>> {
    let edges = graph.graph().edges();
    Ok(mean(graph.edges_near(p, radius)?.into_iter().filter_map(|e| edges[e].width)))
}

/// Width rule applied to the mean tagged width of nearby segments.
pub fn road_width_score(p: GeoPoint, graph: &GraphIndex, radius: f64) -> Result<Option<f64>> {
    mean_width(p, graph, radius)?.map(width_score).transpose()
}

fn seg_present(record: &FeatureRecord, classes: &[&str], threshold: f64) -> bool {
    classes.iter().any(|c| record.seg(c) > threshold)
}

/// Scaled presence indicators read from one image.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SviPresence {
    pub potholes: f64,
    pub street_light: f64,
    pub bike_lanes: f64,
    pub street_amenities: f64,
    pub utility_pole: f64,
    pub bike_parking: f64,
    pub sidewalk: f64,
    pub crosswalk: f64,
    pub curb_cuts: f64,
}

pub fn svi_presence_indicators(record: &FeatureRecord, threshold: f64) -> SviPresence {
    let score = |class: &str, invert: bool| presence_score(seg_present(record, &[class], threshold), invert);
    SviPresence {
        potholes: score(seg_class::POTHOLE, true),
        street_light: score(seg_class::STREET_LIGHT, false),
        bike_lanes: score(seg_class::BIKE_LANE, false),
        street_amenities: score(seg_class::STREET_AMENITY, false),
        utility_pole: score(seg_class::UTILITY_POLE, true),
        bike_parking: score(seg_class::BIKE_PARKING, false),
        sidewalk: score(seg_class::SIDEWALK, false),
        crosswalk: score(seg_class::CROSSWALK, false),
        curb_cuts: score(seg_class::CURB_CUT, false),
    }
}

fn vehicles_in(records: &RecordIndex, p: GeoPoint, radius: f64, classes: &[String]) -> Result<Option<u64>> {
    let mut seen = false;
    let mut total = 0u64;
    for r in records.within(p, radius)? {
        seen = true;
        total += classes.iter().map(|c| u64::from(r.count(c))).sum::<u64>();
    }
    Ok(seen.then_some(total))
}

/// Cars, buses, trucks and motorcycles detected across every image in the
/// buffer; `None` when the buffer holds no images.
pub fn vehicle_count_buffer(p: GeoPoint, records: &RecordIndex, radius: f64) -> Result<Option<u64>> {
    use crate::ingest::object_class::{BUS, CAR, MOTORCYCLE, TRUCK};
    let classes = [CAR, BUS, TRUCK, MOTORCYCLE].map(String::from);
    vehicles_in(records, p, radius, &classes)
}

/// Scaled vehicle–cyclist interaction flags.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct VciFlags {
    /// 1 when no nearby segment has on-street parking.
    pub onstreet_parking: f64,
    /// 1 when the image shows a traffic light or stop sign; `None` without an image.
    pub traffic_control: Option<f64>,
    /// 1 when a nearby node has a traffic-calming device.
    pub speed_control: f64,
}

fn parking_near(p: GeoPoint, graph: &GraphIndex, radius: f64) -> Result<bool> {
    let edges = graph.graph().edges();
    Ok(graph.edges_near(p, radius)?.into_iter().any(|e| edges[e].onstreet_parking))
}

fn calming_near(p: GeoPoint, graph: &GraphIndex, radius: f64) -> Result<bool> {
    let nodes = graph.graph().nodes();
    Ok(graph.nodes_within(p, radius)?.into_iter().any(|n| nodes[n].traffic_calming))
}

pub fn vci_flags(
    p: GeoPoint,
    graph: &GraphIndex,
    record: Option<&FeatureRecord>,
    radius: f64,
    threshold: f64,
) -> Result<VciFlags> {
    Ok(VciFlags {
        onstreet_parking: presence_score(parking_near(p, graph, radius)?, true),
        traffic_control: record.map(|r| {
            presence_score(seg_present(r, &[seg_class::TRAFFIC_LIGHT, seg_class::STOP_SIGN], threshold), false)
        }),
        speed_control: presence_score(calming_near(p, graph, radius)?, false),
    })
}

/// Raw extraction over one city's datasets.
#[derive(Debug)]
pub struct Extractor<'a> {
    settings: ExtractionSettings,
    graph: GraphIndex<'a>,
    dem: Option<&'a DemGrid>,
    land_use: Option<LandUseIndex<'a>>,
    aqi: &'a [AqiStation],
    records: RecordIndex<'a>,
    predictions: Option<&'a PerceptionPredictions>,
}

impl<'a> Extractor<'a> {
    pub fn new(data: Datasets<'a>, settings: ExtractionSettings) -> Result<Self> {
        settings.validate()?;
        Ok(Extractor {
            settings,
            graph: GraphIndex::new(data.graph),
            dem: data.dem,
            land_use: data.land_use.map(LandUseIndex::new),
            aqi: data.aqi,
            records: RecordIndex::new(data.records),
            predictions: None,
        })
    }

    pub fn with_predictions(mut self, predictions: &'a PerceptionPredictions) -> Self {
        self.predictions = Some(predictions);
        self
    }

    /// Checks that every dataset the registry depends on was supplied.
    pub fn check_registry(&self, registry: &Registry) -> Result<()> {
        for s in registry.specs() {
            let missing = match s.extraction {
                Extraction::Slope if self.dem.is_none() => Some("an elevation grid"),
                Extraction::LandUseMix if self.land_use.is_none() => Some("a land-use dataset"),
                Extraction::AirQuality if self.aqi.is_empty() => Some("air-quality stations"),
                _ => None,
            };
            if let Some(what) = missing {
                return Err(Error::Configuration(format!("indicator {} needs {what}", s.name)));
            }
        }
        Ok(())
    }

    /// Raw (unscaled) value of one indicator at one point. Presence rules
    /// yield 1 for present and 0 for absent; categorical rules yield the
    /// mean mapped score.
    pub fn extract(&self, point: &SamplePoint, spec: &IndicatorSpec) -> Result<Option<f64>> {
        let p = point.location;
        let radius = self.settings.radius_for(spec);
        let record = point.image_id.as_deref().and_then(|id| self.records.get(id));
        let threshold = self.settings.presence_threshold;
        let flag = |b: bool| if b { 1.0 } else { 0.0 };
        Ok(match &spec.extraction {
            Extraction::SignalizedIntersections => {
                Some(f64::from(connectivity_counts(p, &self.graph, radius)?.signalized_intersections))
            }
            Extraction::UnsignalizedIntersections => {
                Some(f64::from(connectivity_counts(p, &self.graph, radius)?.unsignalized_intersections))
            }
            Extraction::CulDeSacs => Some(f64::from(connectivity_counts(p, &self.graph, radius)?.culdesacs)),
            Extraction::Slope => self.dem.and_then(|dem| slope_at(p, dem)),
            Extraction::PoiCount => Some(poi_count(p, &self.graph, radius)? as f64),
            Extraction::TransitCount => Some(transit_count(p, &self.graph, radius)? as f64),
            Extraction::LandUseMix => match &self.land_use {
                Some(lu) => Some(landuse_mix(p, lu, radius, self.settings.landuse_cell)?),
                None => None,
            },
            Extraction::AirQuality => {
                if self.aqi.is_empty() {
                    None
                } else {
                    Some(aqi_at(p, self.aqi, self.settings.idw_power, self.settings.idw_epsilon)?)
                }
            }
            Extraction::SegFraction { class } => record.map(|r| r.seg(class)),
            Extraction::SegPresence { classes } => {
                let classes: Vec<&str> = classes.iter().map(String::as_str).collect();
                record.map(|r| flag(seg_present(r, &classes, threshold)))
            }
            Extraction::RoadType | Extraction::Pavement => {
                let ScaleKind::Categorical(map) = &spec.scaling.kind else {
                    return Err(Error::Configuration(format!("indicator {} needs a categorical rule", spec.name)));
                };
                if spec.extraction == Extraction::RoadType {
                    road_type_score(p, &self.graph, radius, map)?
                } else {
                    pavement_score(p, &self.graph, radius, map)?
                }
            }
            Extraction::RoadWidth => mean_width(p, &self.graph, radius)?,
            Extraction::OnstreetParking => Some(flag(parking_near(p, &self.graph, radius)?)),
            Extraction::SpeedControl => Some(flag(calming_near(p, &self.graph, radius)?)),
            Extraction::VehicleCount { classes } => {
                vehicles_in(&self.records, p, radius, classes)?.map(|n| n as f64)
            }
            Extraction::Perception { dimension } => match (self.predictions, point.image_id.as_deref()) {
                (Some(pred), Some(id)) => pred.get(id).and_then(|m| m.get(dimension)).copied(),
                _ => None,
            },
        })
    }

    pub fn raw_row(&self, city: &str, point: &SamplePoint, registry: &Registry) -> Result<RawRow> {
        let values = registry
            .specs()
            .iter()
            .map(|s| self.extract(point, s))
            .collect::<Result<Vec<_>>>()?;
        Ok(RawRow {
            point_id: point.id.clone(),
            city: city.to_string(),
            image_id: point.image_id.clone(),
            location: point.location,
            values,
        })
    }

    /// Raw values for every point, in input order.
    pub fn raw_table(&self, city: &str, points: &[SamplePoint], registry: &Registry) -> Result<RawTable> {
        self.check_registry(registry)?;
        let rows = points
            .iter()
            .map(|p| self.raw_row(city, p, registry))
            .collect::<Result<Vec<_>>>()?;
        Ok(RawTable::new(registry, rows))
    }
}
