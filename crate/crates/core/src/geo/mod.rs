//! Balancing-authority regions and spatial assignment of facilities and plants.
//!
//! Containment uses planar geometry on (longitude, latitude); distances use
//! the haversine formula.

mod geojson;

pub use geojson::{parse_regions_geojson, regions_to_geojson};

use crate::record::AssignmentFlag;
use serde::{Deserialize, Serialize};
use std::collections::HashSet;
use thiserror::Error;

/// Mean Earth radius in meters.
pub const EARTH_RADIUS_M: f64 = 6_371_008.8;
pub const METERS_PER_DEGREE_LAT: f64 = EARTH_RADIUS_M * std::f64::consts::PI / 180.0;

#[derive(Debug, Error)]
pub enum GeoError {
    #[error("region set is empty")]
    EmptyRegionSet,
    #[error("duplicate ba_id {0:?}")]
    DuplicateBaId(String),
    #[error("region {ba_id}: {problem}")]
    InvalidRing { ba_id: String, problem: String },
    #[error("invalid GeoJSON: {0}")]
    GeoJson(String),
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LonLat {
    pub lon: f64,
    pub lat: f64,
}

impl LonLat {
    pub fn new(lon: f64, lat: f64) -> Self {
        LonLat { lon, lat }
    }
}

/// Closed ring: the first vertex is repeated as the last.
pub type Ring = Vec<LonLat>;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Polygon {
    pub exterior: Ring,
    #[serde(default)]
    pub holes: Vec<Ring>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MultiPolygon(pub Vec<Polygon>);

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BaRegion {
    pub ba_id: String,
    pub name: String,
    pub geometry: MultiPolygon,
    #[serde(default)]
    pub member_plant_ids: Vec<String>,
}

#[derive(Debug, Clone, Copy, PartialEq)]
struct BBox {
    min_lon: f64,
    min_lat: f64,
    max_lon: f64,
    max_lat: f64,
}

impl BBox {
    fn of(geometry: &MultiPolygon) -> BBox {
        let mut b = BBox {
            min_lon: f64::INFINITY,
            min_lat: f64::INFINITY,
            max_lon: f64::NEG_INFINITY,
            max_lat: f64::NEG_INFINITY,
        };
        for poly in &geometry.0 {
            for p in &poly.exterior {
                b.min_lon = b.min_lon.min(p.lon);
                b.max_lon = b.max_lon.max(p.lon);
                b.min_lat = b.min_lat.min(p.lat);
                b.max_lat = b.max_lat.max(p.lat);
            }
        }
        b
    }

    fn contains(&self, p: LonLat) -> bool {
        p.lon >= self.min_lon && p.lon <= self.max_lon && p.lat >= self.min_lat && p.lat <= self.max_lat
    }
}

/// Great-circle distance in meters.
pub fn haversine_m(lat1: f64, lon1: f64, lat2: f64, lon2: f64) -> f64 {
    let (phi1, phi2) = (lat1.to_radians(), lat2.to_radians());
    let dphi = (lat2 - lat1).to_radians();
    let dlambda = (lon2 - lon1).to_radians();
    let a = (dphi / 2.0).sin().powi(2) + phi1.cos() * phi2.cos() * (dlambda / 2.0).sin().powi(2);
    2.0 * EARTH_RADIUS_M * a.sqrt().min(1.0).asin()
}

const BOUNDARY_EPS: f64 = 1e-12;

fn on_segment(p: LonLat, a: LonLat, b: LonLat) -> bool {
    let (dx, dy) = (b.lon - a.lon, b.lat - a.lat);
    let len2 = dx * dx + dy * dy;
    if len2 == 0.0 {
        return p == a;
    }
    let cross = dx * (p.lat - a.lat) - dy * (p.lon - a.lon);
    if cross.abs() > BOUNDARY_EPS * len2.sqrt() {
        return false;
    }
    let dot = (p.lon - a.lon) * dx + (p.lat - a.lat) * dy;
    dot >= -BOUNDARY_EPS && dot <= len2 + BOUNDARY_EPS
}

fn edges(ring: &[LonLat]) -> impl Iterator<Item = (LonLat, LonLat)> + '_ {
    ring.windows(2).map(|w| (w[0], w[1]))
}

fn on_ring_boundary(p: LonLat, ring: &[LonLat]) -> bool {
    edges(ring).any(|(a, b)| on_segment(p, a, b))
}

/// Even-odd crossing test. Each edge is evaluated with its endpoints in a
/// canonical order so the result does not depend on ring direction.
fn ring_contains(p: LonLat, ring: &[LonLat]) -> bool {
    let mut inside = false;
    for (a, b) in edges(ring) {
        let (lo, hi) = if (a.lat, a.lon) <= (b.lat, b.lon) { (a, b) } else { (b, a) };
        if (lo.lat > p.lat) != (hi.lat > p.lat) {
            let x = lo.lon + (p.lat - lo.lat) * (hi.lon - lo.lon) / (hi.lat - lo.lat);
            if p.lon < x {
                inside = !inside;
            }
        }
    }
    inside
}

fn polygon_contains(p: LonLat, poly: &Polygon) -> bool {
    if on_ring_boundary(p, &poly.exterior) || poly.holes.iter().any(|h| on_ring_boundary(p, h)) {
        return true;
    }
    ring_contains(p, &poly.exterior) && !poly.holes.iter().any(|h| ring_contains(p, h))
}

/// True iff `point` lies inside, or on the boundary of, any polygon of the
/// region. Points strictly inside a hole are outside.
pub fn point_in_region(point: LonLat, region: &BaRegion) -> bool {
    region.geometry.0.iter().any(|poly| polygon_contains(point, poly))
}

fn ring_area(ring: &[LonLat]) -> f64 {
    let twice: f64 = edges(ring).map(|(a, b)| a.lon * b.lat - b.lon * a.lat).sum();
    twice.abs() / 2.0
}

/// Planar (square-degree) area of a multipolygon, holes subtracted.
pub fn planar_area(geometry: &MultiPolygon) -> f64 {
    geometry.0.iter().map(|poly| ring_area(&poly.exterior) - poly.holes.iter().map(|h| ring_area(h)).sum::<f64>()).sum()
}

/// Distance in meters from `p` to the closest point of segment `a`-`b`. The
/// closest point is found in a local equirectangular frame centred on `p`,
/// then measured with haversine.
fn segment_distance_m(p: LonLat, a: LonLat, b: LonLat) -> f64 {
    let kx = p.lat.to_radians().cos();
    let (ax, ay) = ((a.lon - p.lon) * kx, a.lat - p.lat);
    let (bx, by) = ((b.lon - p.lon) * kx, b.lat - p.lat);
    let (dx, dy) = (bx - ax, by - ay);
    let len2 = dx * dx + dy * dy;
    let t = if len2 == 0.0 { 0.0 } else { (-(ax * dx + ay * dy) / len2).clamp(0.0, 1.0) };
    let closest = LonLat::new(a.lon + t * (b.lon - a.lon), a.lat + t * (b.lat - a.lat));
    haversine_m(p.lat, p.lon, closest.lat, closest.lon)
}

/// Minimum distance in meters from `p` to any ring of the region.
pub fn boundary_distance_m(p: LonLat, region: &BaRegion) -> f64 {
    region
        .geometry
        .0
        .iter()
        .flat_map(|poly| std::iter::once(&poly.exterior).chain(poly.holes.iter()))
        .flat_map(|ring| edges(ring))
        .map(|(a, b)| segment_distance_m(p, a, b))
        .fold(f64::INFINITY, f64::min)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Assignment {
    pub ba_id: String,
    pub flag: Option<AssignmentFlag>,
}

/// An immutable, validated set of regions with cached bounding boxes and areas.
#[derive(Debug, Clone)]
pub struct RegionSet {
    regions: Vec<BaRegion>,
    bboxes: Vec<BBox>,
    areas: Vec<f64>,
}

impl RegionSet {
    /// Validate and index regions. Rings must be closed, have at least four
    /// positions, finite coordinates and no self-intersections; ids must be unique.
    pub fn new(mut regions: Vec<BaRegion>) -> Result<Self, GeoError> {
        if regions.is_empty() {
            return Err(GeoError::EmptyRegionSet);
        }
        let mut seen = HashSet::new();
        for region in &regions {
            if !seen.insert(region.ba_id.clone()) {
                return Err(GeoError::DuplicateBaId(region.ba_id.clone()));
            }
            validate_region(region)?;
        }
        regions.sort_by(|a, b| a.ba_id.cmp(&b.ba_id));
        let bboxes = regions.iter().map(|r| BBox::of(&r.geometry)).collect();
        let areas = regions.iter().map(|r| planar_area(&r.geometry)).collect();
        Ok(RegionSet { regions, bboxes, areas })
    }

    pub fn regions(&self) -> &[BaRegion] {
        &self.regions
    }

    pub fn get(&self, ba_id: &str) -> Option<&BaRegion> {
        self.regions.binary_search_by(|r| r.ba_id.as_str().cmp(ba_id)).ok().map(|i| &self.regions[i])
    }

    pub fn len(&self) -> usize {
        self.regions.len()
    }

    pub fn is_empty(&self) -> bool {
        self.regions.is_empty()
    }

    /// Replace every region's member plant list.
    pub fn set_members(&mut self, mut members: impl FnMut(&str) -> Vec<String>) {
        for r in &mut self.regions {
            r.member_plant_ids = members(&r.ba_id);
        }
    }

    /// Assign a point to exactly one region.
    ///
    /// A single containing region is returned unflagged. Several containing
    /// regions resolve to the smallest by planar area (flag `Ambiguous`); no
    /// containing region resolves to the nearest boundary (flag `Fallback`).
    /// Remaining ties go to the lexicographically smallest ba_id.
    pub fn assign(&self, point: LonLat) -> Assignment {
        let containing: Vec<usize> = (0..self.regions.len())
            .filter(|&i| self.bboxes[i].contains(point) && point_in_region(point, &self.regions[i]))
            .collect();
        match containing.len() {
            1 => Assignment { ba_id: self.regions[containing[0]].ba_id.clone(), flag: None },
            0 => {
                // regions are sorted by id, so the first strict minimum wins ties
                let mut best = (f64::INFINITY, 0usize);
                for (i, region) in self.regions.iter().enumerate() {
                    let d = boundary_distance_m(point, region);
                    if d < best.0 {
                        best = (d, i);
                    }
                }
                Assignment { ba_id: self.regions[best.1].ba_id.clone(), flag: Some(AssignmentFlag::Fallback) }
            }
            _ => {
                let mut best = containing[0];
                for &i in &containing[1..] {
                    if self.areas[i] < self.areas[best] {
                        best = i;
                    }
                }
                Assignment { ba_id: self.regions[best].ba_id.clone(), flag: Some(AssignmentFlag::Ambiguous) }
            }
        }
    }
}

/// Assign a point given a plain slice of regions.
pub fn assign_ba(point: LonLat, regions: &[BaRegion]) -> Result<Assignment, GeoError> {
    Ok(RegionSet::new(regions.to_vec())?.assign(point))
}

fn validate_region(region: &BaRegion) -> Result<(), GeoError> {
    let bad = |problem: String| GeoError::InvalidRing { ba_id: region.ba_id.clone(), problem };
    if region.geometry.0.is_empty() {
        return Err(bad("no polygons".into()));
    }
    for poly in &region.geometry.0 {
        for ring in std::iter::once(&poly.exterior).chain(poly.holes.iter()) {
            if ring.len() < 4 {
                return Err(bad(format!("ring has {} positions, need at least 4", ring.len())));
            }
            if ring.iter().any(|p| !p.lon.is_finite() || !p.lat.is_finite()) {
                return Err(bad("non-finite coordinate".into()));
            }
            if ring.first() != ring.last() {
                return Err(bad("ring is not closed".into()));
            }
            if !ring_is_simple(ring) {
                return Err(bad("ring self-intersects".into()));
            }
        }
    }
    Ok(())
}

fn orient(a: LonLat, b: LonLat, c: LonLat) -> f64 {
    (b.lon - a.lon) * (c.lat - a.lat) - (b.lat - a.lat) * (c.lon - a.lon)
}

fn segments_touch(p1: LonLat, p2: LonLat, q1: LonLat, q2: LonLat) -> bool {
    let d1 = orient(q1, q2, p1);
    let d2 = orient(q1, q2, p2);
    let d3 = orient(p1, p2, q1);
    let d4 = orient(p1, p2, q2);
    if ((d1 > 0.0 && d2 < 0.0) || (d1 < 0.0 && d2 > 0.0)) && ((d3 > 0.0 && d4 < 0.0) || (d3 < 0.0 && d4 > 0.0)) {
        return true;
    }
    let within = |a: LonLat, b: LonLat, c: LonLat| {
        c.lon >= a.lon.min(b.lon) && c.lon <= a.lon.max(b.lon) && c.lat >= a.lat.min(b.lat) && c.lat <= a.lat.max(b.lat)
    };
    (d1 == 0.0 && within(q1, q2, p1))
        || (d2 == 0.0 && within(q1, q2, p2))
        || (d3 == 0.0 && within(p1, p2, q1))
        || (d4 == 0.0 && within(p1, p2, q2))
}

/// True when no two non-adjacent edges of the closed ring touch.
pub fn ring_is_simple(ring: &[LonLat]) -> bool {
    let n = ring.len() - 1;
    if n < 3 {
        return false;
    }
    let mut order: Vec<usize> = (0..n).collect();
    let min_x = |i: usize| ring[i].lon.min(ring[i + 1].lon);
    let max_x = |i: usize| ring[i].lon.max(ring[i + 1].lon);
    order.sort_by(|&a, &b| min_x(a).total_cmp(&min_x(b)));
    for (pos, &i) in order.iter().enumerate() {
        for &j in &order[pos + 1..] {
            if min_x(j) > max_x(i) {
                break;
            }
            let adjacent = i.abs_diff(j) == 1 || i.abs_diff(j) == n - 1;
            if adjacent {
                continue;
            }
            if segments_touch(ring[i], ring[i + 1], ring[j], ring[j + 1]) {
                return false;
            }
        }
    }
    true
}
