//! Geometric primitives on WGS84 coordinates.
//!
//! Distances use a spherical earth of radius [`EARTH_RADIUS_M`]. Buffer
//! membership is inclusive: a point at exactly `radius` meters is inside.

use std::collections::HashMap;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Mean earth radius used for every great-circle computation.
pub const EARTH_RADIUS_M: f64 = 6_371_000.0;

/// Meters spanned by one degree of arc on the sphere.
pub const METERS_PER_DEGREE: f64 = EARTH_RADIUS_M * std::f64::consts::PI / 180.0;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "RawPoint", into = "RawPoint")]
pub struct GeoPoint {
    lon: f64,
    lat: f64,
}

#[derive(Serialize, Deserialize)]
struct RawPoint {
    lon: f64,
    lat: f64,
}

impl TryFrom<RawPoint> for GeoPoint {
    type Error = Error;

    fn try_from(raw: RawPoint) -> Result<Self> {
        GeoPoint::new(raw.lon, raw.lat)
    }
}

impl From<GeoPoint> for RawPoint {
    fn from(p: GeoPoint) -> Self {
        RawPoint { lon: p.lon, lat: p.lat }
    }
}

impl GeoPoint {
    pub fn new(lon: f64, lat: f64) -> Result<Self> {
        if !lon.is_finite() || !lat.is_finite() {
            return Err(Error::InvalidArgument(format!(
                "non-finite coordinate ({lon}, {lat})"
            )));
        }
        if !(-180.0..=180.0).contains(&lon) || !(-90.0..=90.0).contains(&lat) {
            return Err(Error::InvalidArgument(format!(
                "coordinate ({lon}, {lat}) outside WGS84 bounds"
            )));
        }
        Ok(GeoPoint { lon, lat })
    }

    #[inline]
    pub fn lon(&self) -> f64 {
        self.lon
    }

    #[inline]
    pub fn lat(&self) -> f64 {
        self.lat
    }

    /// Offsets this point by `east_m`/`north_m` meters on the local tangent
    /// plane. Returns `None` when the result leaves the valid latitude range.
    pub fn offset_meters(&self, east_m: f64, north_m: f64) -> Option<GeoPoint> {
        let lat = self.lat + north_m / METERS_PER_DEGREE;
        if !(-90.0..=90.0).contains(&lat) {
            return None;
        }
        let cos_lat = self.lat.to_radians().cos();
        if cos_lat <= f64::EPSILON {
            return None;
        }
        let lon = normalize_lon(self.lon + east_m / (METERS_PER_DEGREE * cos_lat));
        Some(GeoPoint { lon, lat })
    }
}

fn normalize_lon(lon: f64) -> f64 {
    if (-180.0..=180.0).contains(&lon) {
        lon
    } else {
        (lon + 180.0).rem_euclid(360.0) - 180.0
    }
}

/// Great-circle distance in meters.
pub fn haversine_distance(a: GeoPoint, b: GeoPoint) -> f64 {
    let (phi1, phi2) = (a.lat.to_radians(), b.lat.to_radians());
    let dphi = phi2 - phi1;
    let dlambda = (b.lon - a.lon).to_radians();
    let s1 = (dphi / 2.0).sin();
    let s2 = (dlambda / 2.0).sin();
    let h = s1 * s1 + phi1.cos() * phi2.cos() * s2 * s2;
    2.0 * EARTH_RADIUS_M * h.clamp(0.0, 1.0).sqrt().asin()
}

/// Uniform lat/lon bucket grid over keyed points.
///
/// Queries return exactly what a linear scan with [`haversine_distance`]
/// would, in insertion order.
#[derive(Debug, Clone)]
pub struct SpatialIndex<K> {
    entries: Vec<(K, GeoPoint)>,
    buckets: HashMap<(i32, i32), Vec<u32>>,
    cell_deg: f64,
    ncols: i32,
}

/// Default bucket edge, roughly 1.1 km in latitude.
pub const DEFAULT_CELL_DEGREES: f64 = 0.01;

impl<K: Clone> SpatialIndex<K> {
    pub fn new(entries: impl IntoIterator<Item = (K, GeoPoint)>) -> Self {
        Self::with_cell_degrees(entries, DEFAULT_CELL_DEGREES)
    }

    pub fn with_cell_degrees(entries: impl IntoIterator<Item = (K, GeoPoint)>, cell_deg: f64) -> Self {
        assert!(cell_deg > 0.0 && cell_deg <= 90.0, "cell size must be in (0, 90] degrees");
        let entries: Vec<(K, GeoPoint)> = entries.into_iter().collect();
        let ncols = (360.0 / cell_deg).ceil() as i32;
        let mut buckets: HashMap<(i32, i32), Vec<u32>> = HashMap::new();
        for (i, (_, p)) in entries.iter().enumerate() {
            let key = Self::key(cell_deg, ncols, p);
            buckets.entry(key).or_default().push(i as u32);
        }
        SpatialIndex {
            entries,
            buckets,
            cell_deg,
            ncols,
        }
    }

    fn key(cell_deg: f64, ncols: i32, p: &GeoPoint) -> (i32, i32) {
        let row = ((p.lat + 90.0) / cell_deg).floor() as i32;
        let col = (((p.lon + 180.0) / cell_deg).floor() as i32).rem_euclid(ncols);
        (row, col)
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn entries(&self) -> &[(K, GeoPoint)] {
        &self.entries
    }

    /// Keys of every entry with `haversine_distance(center, p) <= radius`.
    pub fn points_within(&self, center: GeoPoint, radius: f64) -> Result<Vec<K>> {
        Ok(self
            .positions_within(center, radius)?
            .into_iter()
            .map(|i| self.entries[i].0.clone())
            .collect())
    }

    /// Like [`points_within`](Self::points_within) but yields entry positions
    /// (insertion indices) with their distances.
    pub fn positions_within(&self, center: GeoPoint, radius: f64) -> Result<Vec<usize>> {
        Ok(self
            .within_with_distance(center, radius)?
            .into_iter()
            .map(|(i, _)| i)
            .collect())
    }

    pub fn within_with_distance(&self, center: GeoPoint, radius: f64) -> Result<Vec<(usize, f64)>> {
        if !(radius > 0.0) || !radius.is_finite() {
            return Err(Error::InvalidArgument(format!(
                "radius must be positive and finite, got {radius}"
            )));
        }
        let mut hits = Vec::new();
        let test = |i: usize, hits: &mut Vec<(usize, f64)>| {
            let d = haversine_distance(center, self.entries[i].1);
            if d <= radius {
                hits.push((i, d));
            }
        };

        match self.candidate_ranges(center, radius) {
            Some((rows, cols)) => {
                let ncells = (rows.1 - rows.0 + 1) as usize * cols.len();
                if ncells > self.entries.len() {
                    for i in 0..self.entries.len() {
                        test(i, &mut hits);
                    }
                } else {
                    for row in rows.0..=rows.1 {
                        for &col in &cols {
                            if let Some(bucket) = self.buckets.get(&(row, col)) {
                                for &i in bucket {
                                    test(i as usize, &mut hits);
                                }
                            }
                        }
                    }
                    hits.sort_unstable_by_key(|&(i, _)| i);
                }
            }
            None => {
                for i in 0..self.entries.len() {
                    test(i, &mut hits);
                }
            }
        }
        Ok(hits)
    }

    /// Nearest entry within `max_distance`; ties go to the earlier entry.
    pub fn nearest_within(&self, center: GeoPoint, max_distance: f64) -> Result<Option<(K, f64)>> {
        let hits = self.within_with_distance(center, max_distance)?;
        let best = hits
            .into_iter()
            .min_by(|a, b| a.1.total_cmp(&b.1).then(a.0.cmp(&b.0)));
        Ok(best.map(|(i, d)| (self.entries[i].0.clone(), d)))
    }

    /// Bucket rows and columns that can hold points within `radius`, or
    /// `None` when the search must cover every longitude.
    fn candidate_ranges(&self, center: GeoPoint, radius: f64) -> Option<((i32, i32), Vec<i32>)> {
        let delta = radius / EARTH_RADIUS_M;
        if delta >= std::f64::consts::FRAC_PI_2 {
            return None;
        }
        let delta_deg = delta.to_degrees() * (1.0 + 1e-9) + 1e-9;
        let lat_min = center.lat - delta_deg;
        let lat_max = center.lat + delta_deg;
        if lat_min <= -90.0 || lat_max >= 90.0 {
            return None;
        }
        let cos_lat = center.lat.to_radians().cos();
        let ratio = delta.sin() / cos_lat;
        if ratio >= 1.0 {
            return None;
        }
        let dlon_deg = ratio.asin().to_degrees() * (1.0 + 1e-9) + 1e-9;
        if dlon_deg >= 180.0 {
            return None;
        }
        let row_lo = ((lat_min + 90.0) / self.cell_deg).floor() as i32 - 1;
        let row_hi = ((lat_max + 90.0) / self.cell_deg).floor() as i32 + 1;
        let col_lo = ((center.lon - dlon_deg + 180.0) / self.cell_deg).floor() as i32 - 1;
        let col_hi = ((center.lon + dlon_deg + 180.0) / self.cell_deg).floor() as i32 + 1;
        if col_hi - col_lo + 1 >= self.ncols {
            return None;
        }
        let cols = (col_lo..=col_hi).map(|c| c.rem_euclid(self.ncols)).collect();
        Some(((row_lo, row_hi), cols))
    }
}

/// Closed polygon with optional holes, tested with the even-odd rule on
/// raw lon/lat coordinates.
#[derive(Debug, Clone, PartialEq)]
pub struct Polygon {
    outer: Vec<GeoPoint>,
    inner: Vec<Vec<GeoPoint>>,
    bbox: BBox,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BBox {
    pub min_lon: f64,
    pub min_lat: f64,
    pub max_lon: f64,
    pub max_lat: f64,
}

impl BBox {
    pub fn contains(&self, p: GeoPoint) -> bool {
        p.lon >= self.min_lon && p.lon <= self.max_lon && p.lat >= self.min_lat && p.lat <= self.max_lat
    }
}

impl Polygon {
    /// Rings are closed automatically if the last vertex differs from the first.
    pub fn new(outer: Vec<GeoPoint>, inner: Vec<Vec<GeoPoint>>) -> Result<Self> {
        let outer = close_ring(outer)?;
        let inner = inner.into_iter().map(close_ring).collect::<Result<Vec<_>>>()?;
        let mut bbox = BBox {
            min_lon: f64::INFINITY,
            min_lat: f64::INFINITY,
            max_lon: f64::NEG_INFINITY,
            max_lat: f64::NEG_INFINITY,
        };
        for p in &outer {
            bbox.min_lon = bbox.min_lon.min(p.lon);
            bbox.min_lat = bbox.min_lat.min(p.lat);
            bbox.max_lon = bbox.max_lon.max(p.lon);
            bbox.max_lat = bbox.max_lat.max(p.lat);
        }
        Ok(Polygon { outer, inner, bbox })
    }

    pub fn outer(&self) -> &[GeoPoint] {
        &self.outer
    }

    pub fn inner(&self) -> &[Vec<GeoPoint>] {
        &self.inner
    }

    pub fn bbox(&self) -> BBox {
        self.bbox
    }

    pub fn contains(&self, pt: GeoPoint) -> bool {
        if !self.bbox.contains(pt) {
            return false;
        }
        let mut inside = ring_crossings(&self.outer, pt);
        for ring in &self.inner {
            inside ^= ring_crossings(ring, pt);
        }
        inside
    }
}

fn close_ring(mut ring: Vec<GeoPoint>) -> Result<Vec<GeoPoint>> {
    let mut distinct: Vec<GeoPoint> = Vec::new();
    for p in &ring {
        if !distinct.iter().any(|q| q == p) {
            distinct.push(*p);
            if distinct.len() >= 3 {
                break;
            }
        }
    }
    if distinct.len() < 3 {
        return Err(Error::InvalidGeometry(format!(
            "ring has {} distinct vertices, need at least 3",
            distinct.len()
        )));
    }
    if ring.first() != ring.last() {
        ring.push(ring[0]);
    }
    Ok(ring)
}

/// Odd number of edge crossings of a ray cast towards +lon.
fn ring_crossings(ring: &[GeoPoint], pt: GeoPoint) -> bool {
    let mut inside = false;
    for w in ring.windows(2) {
        let (a, b) = (w[0], w[1]);
        if (a.lat > pt.lat) != (b.lat > pt.lat) {
            let x = a.lon + (pt.lat - a.lat) * (b.lon - a.lon) / (b.lat - a.lat);
            if pt.lon < x {
                inside = !inside;
            }
        }
    }
    inside
}

/// Even-odd point-in-polygon test.
pub fn point_in_polygon(pt: GeoPoint, poly: &Polygon) -> bool {
    poly.contains(pt)
}

/// Regular grid of points, `cell` meters apart on the local tangent plane,
/// clipped to the disk of `radius` meters around `center`.
///
/// The output is ordered south-to-north, then west-to-east, and always
/// includes `center` itself.
pub fn buffer_grid_samples(center: GeoPoint, radius: f64, cell: f64) -> Result<Vec<GeoPoint>> {
    if !(cell > 0.0) || !radius.is_finite() {
        return Err(Error::InvalidArgument(format!("cell size must be positive, got {cell}")));
    }
    if cell > radius {
        return Err(Error::InvalidArgument(format!(
            "cell size {cell} exceeds radius {radius}"
        )));
    }
    let k = (radius / cell).floor() as i64;
    let mut out = Vec::with_capacity(((2 * k + 1) * (2 * k + 1)) as usize);
    for j in -k..=k {
        for i in -k..=k {
            let (dx, dy) = (i as f64 * cell, j as f64 * cell);
            if dx * dx + dy * dy > radius * radius * 1.01 {
                continue;
            }
            if let Some(p) = center.offset_meters(dx, dy) {
                if haversine_distance(center, p) <= radius {
                    out.push(p);
                }
            }
        }
    }
    Ok(out)
}
