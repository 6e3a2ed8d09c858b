//! Polygon primitives shared by the vector stages: spherical area and
//! perimeter, ring hygiene, and planar segment predicates.

use std::f64::consts::PI;

use geo::BooleanOps;
use serde::{Deserialize, Serialize};

use crate::tilegrid::{GeoBBox, GeoPoint};

/// Authalic sphere radius (m) used for every area in the crate.
pub const AUTHALIC_RADIUS_M: f64 = 6_371_007.2;

/// A WGS84 polygon with closed rings; after [`GeoPolygon::normalized`] the
/// exterior is counter-clockwise in (lon, lat) and holes are clockwise.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GeoPolygon {
    pub exterior: Vec<GeoPoint>,
    pub holes: Vec<Vec<GeoPoint>>,
}

impl GeoPolygon {
    /// Closes rings, drops consecutive duplicates and fixes orientation.
    /// Returns `None` when the exterior has fewer than 3 distinct vertices;
    /// degenerate holes are dropped.
    pub fn normalized(exterior: Vec<GeoPoint>, holes: Vec<Vec<GeoPoint>>) -> Option<Self> {
        let exterior = clean_ring(exterior)?;
        let exterior = orient(exterior, true);
        let holes = holes
            .into_iter()
            .filter_map(clean_ring)
            .map(|h| orient(h, false))
            .collect();
        Some(GeoPolygon { exterior, holes })
    }

    pub fn rings(&self) -> impl Iterator<Item = &Vec<GeoPoint>> {
        std::iter::once(&self.exterior).chain(self.holes.iter())
    }

    pub fn vertex_count(&self) -> usize {
        self.rings().map(|r| r.len()).sum()
    }

    /// Spherical area of the exterior minus holes, in m².
    pub fn area_m2(&self) -> f64 {
        let outer = ring_signed_area_m2(&self.exterior).abs();
        let holes: f64 = self.holes.iter().map(|h| ring_signed_area_m2(h).abs()).sum();
        (outer - holes).max(0.0)
    }

    /// Great-circle length of all rings, in m.
    pub fn perimeter_m(&self) -> f64 {
        self.rings().map(|r| ring_length_m(r)).sum()
    }

    /// `4π·area / perimeter²`: 1 for a disc, near 0 for slivers.
    pub fn compactness(&self) -> f64 {
        let p = self.perimeter_m();
        if p <= 0.0 {
            return 0.0;
        }
        (4.0 * PI * self.area_m2() / (p * p)).clamp(0.0, 1.0)
    }

    pub fn bbox(&self) -> GeoBBox {
        let mut b = GeoBBox {
            west: f64::INFINITY,
            south: f64::INFINITY,
            east: f64::NEG_INFINITY,
            north: f64::NEG_INFINITY,
        };
        for p in &self.exterior {
            b.west = b.west.min(p.lon);
            b.east = b.east.max(p.lon);
            b.south = b.south.min(p.lat);
            b.north = b.north.max(p.lat);
        }
        b
    }

    /// Area-weighted planar centroid in (lon, lat); adequate at building scale.
    pub fn centroid(&self) -> GeoPoint {
        let origin = self.exterior[0];
        let mut a_sum = 0.0;
        let mut cx = 0.0;
        let mut cy = 0.0;
        for ring in self.rings() {
            for w in ring.windows(2) {
                let (x0, y0) = (w[0].lon - origin.lon, w[0].lat - origin.lat);
                let (x1, y1) = (w[1].lon - origin.lon, w[1].lat - origin.lat);
                let cross = x0 * y1 - x1 * y0;
                a_sum += cross;
                cx += (x0 + x1) * cross;
                cy += (y0 + y1) * cross;
            }
        }
        if a_sum.abs() < f64::MIN_POSITIVE {
            return origin;
        }
        GeoPoint {
            lon: origin.lon + cx / (3.0 * a_sum),
            lat: origin.lat + cy / (3.0 * a_sum),
        }
    }

    /// Lexicographically smallest vertex, used for canonical ordering.
    pub fn min_vertex(&self) -> (f64, f64) {
        self.exterior
            .iter()
            .map(|p| (p.lon, p.lat))
            .fold((f64::INFINITY, f64::INFINITY), |m, v| {
                if v.0 < m.0 || (v.0 == m.0 && v.1 < m.1) {
                    v
                } else {
                    m
                }
            })
    }

    /// Rotates every ring to start at its smallest vertex and sorts holes,
    /// so equal point sets compare equal.
    pub fn canonicalize(&mut self) {
        rotate_to_min(&mut self.exterior);
        for h in &mut self.holes {
            rotate_to_min(h);
        }
        self.holes.sort_by(|a, b| {
            let ka = (a[0].lon, a[0].lat);
            let kb = (b[0].lon, b[0].lat);
            ka.partial_cmp(&kb).unwrap_or(std::cmp::Ordering::Equal)
        });
    }

    pub fn to_geo(&self) -> geo::Polygon<f64> {
        let ring = |r: &Vec<GeoPoint>| {
            geo::LineString::from(r.iter().map(|p| (p.lon, p.lat)).collect::<Vec<_>>())
        };
        geo::Polygon::new(ring(&self.exterior), self.holes.iter().map(ring).collect())
    }

    pub fn from_geo(p: &geo::Polygon<f64>) -> Option<Self> {
        let ring = |ls: &geo::LineString<f64>| {
            ls.0.iter()
                .map(|c| GeoPoint { lon: c.x, lat: c.y })
                .collect::<Vec<_>>()
        };
        GeoPolygon::normalized(ring(p.exterior()), p.interiors().iter().map(ring).collect())
    }
}

/// Spherical area (m²) of the overlap between two polygons.
pub fn intersection_area_m2(a: &GeoPolygon, b: &GeoPolygon) -> f64 {
    let ab = a.bbox();
    let bb = b.bbox();
    if !ab.intersects(&bb) {
        return 0.0;
    }
    a.to_geo()
        .intersection(&b.to_geo())
        .0
        .iter()
        .filter_map(GeoPolygon::from_geo)
        .map(|p| p.area_m2())
        .sum()
}

/// Signed spherical area of a closed ring in m², positive when the ring is
/// counter-clockwise in (lon, lat). Sums the exact spherical excess of the
/// strip between each edge and the equator.
pub fn ring_signed_area_m2(ring: &[GeoPoint]) -> f64 {
    let mut excess = 0.0;
    for w in ring.windows(2) {
        let (l1, p1) = (w[0].lon.to_radians(), w[0].lat.to_radians());
        let (l2, p2) = (w[1].lon.to_radians(), w[1].lat.to_radians());
        let t1 = (p1 / 2.0).tan();
        let t2 = (p2 / 2.0).tan();
        let dl = l2 - l1;
        excess += 2.0 * ((dl / 2.0).tan() * (t1 + t2)).atan2(1.0 + t1 * t2);
    }
    -excess * AUTHALIC_RADIUS_M * AUTHALIC_RADIUS_M
}

pub fn haversine_m(a: GeoPoint, b: GeoPoint) -> f64 {
    let (p1, p2) = (a.lat.to_radians(), b.lat.to_radians());
    let dp = p2 - p1;
    let dl = (b.lon - a.lon).to_radians();
    let h = (dp / 2.0).sin().powi(2) + p1.cos() * p2.cos() * (dl / 2.0).sin().powi(2);
    2.0 * AUTHALIC_RADIUS_M * h.sqrt().min(1.0).asin()
}

pub fn ring_length_m(ring: &[GeoPoint]) -> f64 {
    ring.windows(2).map(|w| haversine_m(w[0], w[1])).sum()
}

/// Planar shoelace area in the ring's own coordinates (positive = CCW).
pub fn planar_signed_area(ring: &[[f64; 2]]) -> f64 {
    if ring.len() < 3 {
        return 0.0;
    }
    let o = ring[0];
    let mut s = 0.0;
    for w in ring.windows(2) {
        s += (w[0][0] - o[0]) * (w[1][1] - o[1]) - (w[1][0] - o[0]) * (w[0][1] - o[1]);
    }
    s / 2.0
}

fn as_xy(ring: &[GeoPoint]) -> Vec<[f64; 2]> {
    ring.iter().map(|p| [p.lon, p.lat]).collect()
}

fn clean_ring(ring: Vec<GeoPoint>) -> Option<Vec<GeoPoint>> {
    let mut out: Vec<GeoPoint> = Vec::with_capacity(ring.len() + 1);
    for p in ring {
        if out.last() != Some(&p) {
            out.push(p);
        }
    }
    while out.len() > 1 && out.first() == out.last() {
        out.pop();
    }
    if out.len() < 3 {
        return None;
    }
    out.push(out[0]);
    if planar_signed_area(&as_xy(&out)) == 0.0 {
        return None;
    }
    Some(out)
}

fn orient(mut ring: Vec<GeoPoint>, ccw: bool) -> Vec<GeoPoint> {
    let area = planar_signed_area(&as_xy(&ring));
    if (area > 0.0) != ccw {
        ring.reverse();
    }
    ring
}

fn rotate_to_min(ring: &mut Vec<GeoPoint>) {
    if ring.len() < 2 {
        return;
    }
    ring.pop();
    let (idx, _) = ring
        .iter()
        .enumerate()
        .fold((0, (f64::INFINITY, f64::INFINITY)), |(bi, bv), (i, p)| {
            let v = (p.lon, p.lat);
            if v.0 < bv.0 || (v.0 == bv.0 && v.1 < bv.1) {
                (i, v)
            } else {
                (bi, bv)
            }
        });
    ring.rotate_left(idx);
    ring.push(ring[0]);
}

fn orient2d(a: [f64; 2], b: [f64; 2], c: [f64; 2]) -> f64 {
    (b[0] - a[0]) * (c[1] - a[1]) - (b[1] - a[1]) * (c[0] - a[0])
}

fn on_segment(a: [f64; 2], b: [f64; 2], p: [f64; 2]) -> bool {
    p[0] >= a[0].min(b[0]) && p[0] <= a[0].max(b[0]) && p[1] >= a[1].min(b[1]) && p[1] <= a[1].max(b[1])
}

/// How two segments meet, if at all.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Contact {
    None,
    /// They share only an endpoint.
    Endpoint,
    /// Interiors cross, overlap collinearly, or an endpoint lies inside the other segment.
    Interior,
}

pub fn segment_contact(a0: [f64; 2], a1: [f64; 2], b0: [f64; 2], b1: [f64; 2]) -> Contact {
    let d1 = orient2d(b0, b1, a0);
    let d2 = orient2d(b0, b1, a1);
    let d3 = orient2d(a0, a1, b0);
    let d4 = orient2d(a0, a1, b1);
    if ((d1 > 0.0 && d2 < 0.0) || (d1 < 0.0 && d2 > 0.0))
        && ((d3 > 0.0 && d4 < 0.0) || (d3 < 0.0 && d4 > 0.0))
    {
        return Contact::Interior;
    }
    let shared = [a0, a1].iter().any(|p| *p == b0 || *p == b1);
    if d1 == 0.0 && d2 == 0.0 {
        // collinear: overlap beyond a single shared endpoint is interior contact
        let touching: Vec<_> = [(a0, b0, b1), (a1, b0, b1), (b0, a0, a1), (b1, a0, a1)]
            .iter()
            .filter(|(p, s, e)| on_segment(*s, *e, *p))
            .map(|(p, _, _)| *p)
            .collect();
        if touching.is_empty() {
            return Contact::None;
        }
        let mut distinct = touching.clone();
        distinct.dedup();
        return if shared && distinct.iter().all(|p| *p == distinct[0]) {
            Contact::Endpoint
        } else {
            Contact::Interior
        };
    }
    let t_touch = (d1 == 0.0 && on_segment(b0, b1, a0) && a0 != b0 && a0 != b1)
        || (d2 == 0.0 && on_segment(b0, b1, a1) && a1 != b0 && a1 != b1)
        || (d3 == 0.0 && on_segment(a0, a1, b0) && b0 != a0 && b0 != a1)
        || (d4 == 0.0 && on_segment(a0, a1, b1) && b1 != a0 && b1 != a1);
    if t_touch {
        Contact::Interior
    } else if shared {
        Contact::Endpoint
    } else {
        Contact::None
    }
}

/// Checks a set of closed rings for contacts between non-adjacent segments.
/// With `allow_vertex_touch`, rings may meet at shared vertices (pinch
/// points) but not cross or run along each other.
pub fn rings_have_bad_contact(rings: &[Vec<[f64; 2]>], allow_vertex_touch: bool) -> bool {
    struct Seg {
        ring: usize,
        idx: usize,
        len: usize,
        a: [f64; 2],
        b: [f64; 2],
        min_x: f64,
        max_x: f64,
    }
    let mut segs = Vec::new();
    for (ri, ring) in rings.iter().enumerate() {
        let n = ring.len().saturating_sub(1);
        for i in 0..n {
            let (a, b) = (ring[i], ring[i + 1]);
            segs.push(Seg {
                ring: ri,
                idx: i,
                len: n,
                a,
                b,
                min_x: a[0].min(b[0]),
                max_x: a[0].max(b[0]),
            });
        }
    }
    segs.sort_by(|s, t| s.min_x.total_cmp(&t.min_x));
    for i in 0..segs.len() {
        let s = &segs[i];
        for t in segs[i + 1..].iter() {
            if t.min_x > s.max_x {
                break;
            }
            let adjacent = s.ring == t.ring
                && (s.idx + 1 == t.idx
                    || t.idx + 1 == s.idx
                    || (s.idx == 0 && t.idx + 1 == s.len)
                    || (t.idx == 0 && s.idx + 1 == t.len));
            match segment_contact(s.a, s.b, t.a, t.b) {
                Contact::None => {}
                Contact::Endpoint => {
                    if !adjacent && !allow_vertex_touch {
                        return true;
                    }
                }
                Contact::Interior => {
                    if !adjacent {
                        return true;
                    }
                    // adjacent segments folding back onto each other
                    let shared = if s.b == t.a { s.b } else { s.a };
                    let other_s = if s.a == shared { s.b } else { s.a };
                    let other_t = if t.a == shared { t.b } else { t.a };
                    if orient2d(shared, other_s, other_t) == 0.0 {
                        return true;
                    }
                }
            }
        }
    }
    false
}
