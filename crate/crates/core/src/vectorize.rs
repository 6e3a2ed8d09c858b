//! Mask to polygon conversion: boundary tracing, Douglas-Peucker
//! simplification, georeferencing and cross-tile merging.

use std::collections::BTreeSet;

use geo::Intersects;
use log::debug;
use rstar::{primitives::GeomWithData, primitives::Rectangle, RTree, RTreeObject};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geometry::{intersection_area_m2, planar_signed_area, rings_have_bad_contact, GeoPolygon};
use crate::raster::{connected_components, despeckle, threshold, BinaryMask, Connectivity, ProbabilityMask};
use crate::tilegrid::{geo_to_pixel, pixel_to_geo, GeoPoint, TileId};
use crate::Typology;

/// Vertex snap distance (degrees) when deciding whether polygons touch.
pub const SNAP_TOLERANCE_DEG: f64 = 1e-9;

/// A closed ring in tile pixel space (x right, y down). Exterior rings have
/// positive shoelace area in these raw coordinates, holes negative.
#[derive(Debug, Clone, PartialEq)]
pub struct PixelRing {
    pub points: Vec<[f64; 2]>,
}

impl PixelRing {
    pub fn new(mut points: Vec<[f64; 2]>) -> Self {
        if points.first() != points.last() {
            points.push(points[0]);
        }
        PixelRing { points }
    }

    /// Vertex count without the closing repeat.
    pub fn len(&self) -> usize {
        self.points.len().saturating_sub(1)
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn signed_area(&self) -> f64 {
        planar_signed_area(&self.points)
    }
}

/// One traced foreground component: its outer boundary and holes.
#[derive(Debug, Clone, PartialEq)]
pub struct TracedPolygon {
    /// Component id in the labelling the trace was built from.
    pub component: u32,
    pub pixel_area: u64,
    pub exterior: PixelRing,
    pub holes: Vec<PixelRing>,
}

impl TracedPolygon {
    pub fn rings(&self) -> impl Iterator<Item = &PixelRing> {
        std::iter::once(&self.exterior).chain(self.holes.iter())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PredictionPolygon {
    pub typology: Typology,
    pub geometry: GeoPolygon,
    pub source_tiles: Vec<TileId>,
    pub pixel_area: u64,
    pub geo_area: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct VectorizeParams {
    pub threshold: f32,
    pub min_pixels: usize,
    pub tolerance_px: f64,
    pub connectivity: Connectivity,
}

impl Default for VectorizeParams {
    fn default() -> Self {
        VectorizeParams {
            threshold: 0.5,
            min_pixels: 60,
            tolerance_px: 1.0,
            connectivity: Connectivity::Eight,
        }
    }
}

impl VectorizeParams {
    pub fn validate(&self) -> Result<()> {
        if !(self.threshold > 0.0 && self.threshold < 1.0) {
            return Err(Error::config(format!("threshold {} must lie in (0, 1)", self.threshold)));
        }
        if !(self.tolerance_px >= 0.0 && self.tolerance_px.is_finite()) {
            return Err(Error::config(format!(
                "simplify tolerance {} must be >= 0",
                self.tolerance_px
            )));
        }
        Ok(())
    }
}

// Directions of boundary edges between pixel corners.
const RIGHT: u8 = 0;
const DOWN: u8 = 1;
const LEFT: u8 = 2;
const UP: u8 = 3;

fn dir_vec(d: u8) -> (i64, i64) {
    match d {
        RIGHT => (1, 0),
        DOWN => (0, 1),
        LEFT => (-1, 0),
        _ => (0, -1),
    }
}

struct Edge {
    from: u32,
    to: u32,
    dir: u8,
    label: u32,
}

/// Traces pixel-edge boundaries of every foreground component.
///
/// Each ring follows the outer edges of foreground pixels, so rasterizing
/// the rings at pixel centers reproduces `b` exactly. Where two foreground
/// pixels touch only diagonally, `connectivity` decides whether the ring
/// joins them (8) or keeps them apart (4); joined rings touch themselves at
/// that corner but never cross. Exactly one exterior ring is produced per
/// component of the given connectivity.
pub fn trace_contours(b: &BinaryMask, connectivity: Connectivity) -> Vec<TracedPolygon> {
    let comps = connected_components(b, connectivity);
    let (w, h) = (b.width, b.height);
    let vw = w + 1;
    let vid = |x: u32, y: u32| y * vw + x;

    let mut edges: Vec<Edge> = Vec::new();
    for y in 0..h {
        for x in 0..w {
            if !b.get(x, y) {
                continue;
            }
            let label = comps.label(x, y);
            let (xi, yi) = (i64::from(x), i64::from(y));
            if !b.get_or_bg(xi, yi - 1) {
                edges.push(Edge { from: vid(x, y), to: vid(x + 1, y), dir: RIGHT, label });
            }
            if !b.get_or_bg(xi + 1, yi) {
                edges.push(Edge { from: vid(x + 1, y), to: vid(x + 1, y + 1), dir: DOWN, label });
            }
            if !b.get_or_bg(xi, yi + 1) {
                edges.push(Edge { from: vid(x + 1, y + 1), to: vid(x, y + 1), dir: LEFT, label });
            }
            if !b.get_or_bg(xi - 1, yi) {
                edges.push(Edge { from: vid(x, y + 1), to: vid(x, y), dir: UP, label });
            }
        }
    }

    let mut outgoing = vec![[u32::MAX; 2]; (vw * (h + 1)) as usize];
    for (i, e) in edges.iter().enumerate() {
        let slot = &mut outgoing[e.from as usize];
        if slot[0] == u32::MAX {
            slot[0] = i as u32;
        } else {
            slot[1] = i as u32;
        }
    }

    let mut visited = vec![false; edges.len()];
    let mut polys: Vec<TracedPolygon> = Vec::new();
    let mut by_label: Vec<Option<usize>> = vec![None; comps.count() + 1];
    let mut pending_holes: Vec<(u32, PixelRing)> = Vec::new();

    for start in 0..edges.len() {
        if visited[start] {
            continue;
        }
        let mut verts: Vec<[f64; 2]> = Vec::new();
        let mut cur = start;
        loop {
            visited[cur] = true;
            let e = &edges[cur];
            let next = {
                let slot = outgoing[e.to as usize];
                if slot[1] == u32::MAX {
                    slot[0] as usize
                } else {
                    // pinch vertex: pick the turn that matches the connectivity
                    let (ix, iy) = dir_vec(e.dir);
                    let cross = |c: u32| {
                        let (ox, oy) = dir_vec(edges[c as usize].dir);
                        ix * oy - iy * ox
                    };
                    let want_positive = connectivity == Connectivity::Four;
                    let pick = slot
                        .iter()
                        .copied()
                        .find(|&c| (cross(c) > 0) == want_positive)
                        .unwrap_or(slot[0]);
                    pick as usize
                }
            };
            if edges[next].dir != e.dir {
                let v = e.to;
                verts.push([f64::from(v % vw), f64::from(v / vw)]);
            }
            cur = next;
            if cur == start {
                break;
            }
        }
        let ring = canonical_pixel_ring(verts);
        let label = edges[start].label;
        if ring.signed_area() > 0.0 {
            by_label[label as usize] = Some(polys.len());
            polys.push(TracedPolygon {
                component: label,
                pixel_area: comps.size(label) as u64,
                exterior: ring,
                holes: Vec::new(),
            });
        } else {
            pending_holes.push((label, ring));
        }
    }
    for (label, ring) in pending_holes {
        if let Some(i) = by_label[label as usize] {
            polys[i].holes.push(ring);
        }
    }
    polys
}

/// Rotates a ring to start at its top-most, then left-most vertex and closes it.
fn canonical_pixel_ring(mut verts: Vec<[f64; 2]>) -> PixelRing {
    let start = verts
        .iter()
        .enumerate()
        .min_by(|(_, a), (_, b)| (a[1], a[0]).partial_cmp(&(b[1], b[0])).unwrap())
        .map(|(i, _)| i)
        .unwrap_or(0);
    verts.rotate_left(start);
    PixelRing::new(verts)
}

fn point_segment_distance(p: [f64; 2], a: [f64; 2], b: [f64; 2]) -> f64 {
    let (dx, dy) = (b[0] - a[0], b[1] - a[1]);
    let len2 = dx * dx + dy * dy;
    let t = if len2 == 0.0 {
        0.0
    } else {
        (((p[0] - a[0]) * dx + (p[1] - a[1]) * dy) / len2).clamp(0.0, 1.0)
    };
    let (cx, cy) = (a[0] + t * dx, a[1] + t * dy);
    ((p[0] - cx).powi(2) + (p[1] - cy).powi(2)).sqrt()
}

/// Douglas-Peucker over `pts[lo..=hi]`, marking kept interior vertices.
fn douglas_peucker(pts: &[[f64; 2]], lo: usize, hi: usize, tol: f64, keep: &mut [bool]) {
    let mut stack = vec![(lo, hi)];
    while let Some((a, b)) = stack.pop() {
        if b <= a + 1 {
            continue;
        }
        let (mut far, mut dmax) = (a, -1.0);
        for (i, p) in pts.iter().enumerate().take(b).skip(a + 1) {
            let d = point_segment_distance(*p, pts[a], pts[b]);
            if d > dmax {
                dmax = d;
                far = i;
            }
        }
        if dmax > tol {
            keep[far] = true;
            stack.push((a, far));
            stack.push((far, b));
        }
    }
}

/// Douglas-Peucker simplification of a closed ring. Returns `None` when the
/// result would have fewer than 3 distinct vertices.
pub fn simplify(r: &PixelRing, tolerance_px: f64) -> Option<PixelRing> {
    simplify_pinned(r, tolerance_px, |_| false)
}

/// As [`simplify`], but vertices for which `pinned` returns true always survive.
pub fn simplify_pinned(
    r: &PixelRing,
    tolerance_px: f64,
    pinned: impl Fn([f64; 2]) -> bool,
) -> Option<PixelRing> {
    let n = r.len();
    if n < 3 {
        return None;
    }
    let verts = &r.points[..n];
    let mut anchors: Vec<usize> = (0..n).filter(|&i| pinned(verts[i])).collect();
    if anchors.is_empty() {
        anchors.push(0);
    }
    if anchors.len() == 1 {
        let a = verts[anchors[0]];
        let far = (0..n)
            .max_by(|&i, &j| {
                let di = (verts[i][0] - a[0]).hypot(verts[i][1] - a[1]);
                let dj = (verts[j][0] - a[0]).hypot(verts[j][1] - a[1]);
                di.partial_cmp(&dj).unwrap().then(j.cmp(&i))
            })
            .unwrap();
        anchors.push(far);
        anchors.sort_unstable();
    }

    let mut keep = vec![false; n];
    for &a in &anchors {
        keep[a] = true;
    }
    // unroll so every chain is a contiguous index range
    let unrolled: Vec<[f64; 2]> = verts.iter().chain(verts.iter()).copied().collect();
    let mut keep2 = vec![false; 2 * n];
    for k in 0..anchors.len() {
        let a = anchors[k];
        let b = if k + 1 < anchors.len() { anchors[k + 1] } else { anchors[0] + n };
        douglas_peucker(&unrolled, a, b, tolerance_px, &mut keep2);
    }
    for i in 0..2 * n {
        if keep2[i] {
            keep[i % n] = true;
        }
    }
    let out: Vec<[f64; 2]> = (0..n).filter(|&i| keep[i]).map(|i| verts[i]).collect();
    let mut distinct = out.clone();
    distinct.sort_by(|a, b| a.partial_cmp(b).unwrap());
    distinct.dedup();
    if distinct.len() < 3 {
        return None;
    }
    let ring = PixelRing::new(out);
    if ring.signed_area() == 0.0 {
        return None;
    }
    Some(ring)
}

/// Result of simplifying a traced polygon as a unit.
#[derive(Debug, Clone, PartialEq)]
pub struct SimplifiedPolygon {
    pub polygon: TracedPolygon,
    pub dropped_holes: usize,
}

/// Simplifies every ring of `poly`, pinning tile-border vertices (so shared
/// tile edges stay bit-identical across neighbours) and vertices where rings
/// touch. If simplification would introduce a crossing, the tolerance is
/// halved until the rings are valid; tolerance 0 returns the input rings.
pub fn simplify_polygon(
    poly: &TracedPolygon,
    tolerance_px: f64,
    tile_size: u32,
) -> Option<SimplifiedPolygon> {
    let edge = f64::from(tile_size);
    let mut seen = std::collections::HashMap::new();
    for r in poly.rings() {
        for p in &r.points[..r.len()] {
            *seen.entry((p[0].to_bits(), p[1].to_bits())).or_insert(0u32) += 1;
        }
    }
    let pinned = |p: [f64; 2]| {
        p[0] == 0.0
            || p[1] == 0.0
            || p[0] == edge
            || p[1] == edge
            || seen.get(&(p[0].to_bits(), p[1].to_bits())).copied().unwrap_or(0) > 1
    };

    let mut tol = tolerance_px;
    loop {
        let exterior = simplify_pinned(&poly.exterior, tol, pinned);
        let mut holes = Vec::new();
        let mut dropped = 0;
        for h in &poly.holes {
            match simplify_pinned(h, tol, pinned) {
                Some(s) => holes.push(s),
                None => dropped += 1,
            }
        }
        if let Some(exterior) = exterior {
            let mut rings = vec![exterior.points.clone()];
            rings.extend(holes.iter().map(|h| h.points.clone()));
            if tol == 0.0 || !rings_have_bad_contact(&rings, true) {
                return Some(SimplifiedPolygon {
                    polygon: TracedPolygon {
                        component: poly.component,
                        pixel_area: poly.pixel_area,
                        exterior,
                        holes,
                    },
                    dropped_holes: dropped,
                });
            }
        } else if tol == 0.0 {
            return None;
        }
        tol = if tol > 1.0 / 64.0 { tol / 2.0 } else { 0.0 };
    }
}

pub fn georeference_ring(r: &PixelRing, t: TileId, tile_size: u32) -> Vec<GeoPoint> {
    r.points
        .iter()
        .map(|p| pixel_to_geo(t, p[0], p[1], tile_size))
        .collect()
}

/// Maps a pixel-space polygon into WGS84 with normalized orientation.
pub fn georeference(poly: &TracedPolygon, t: TileId, tile_size: u32) -> Option<GeoPolygon> {
    GeoPolygon::normalized(
        georeference_ring(&poly.exterior, t, tile_size),
        poly.holes
            .iter()
            .map(|h| georeference_ring(h, t, tile_size))
            .collect(),
    )
}

/// threshold → components → despeckle → trace → simplify, in pixel space.
pub fn vectorize_tile_pixels(m: &ProbabilityMask, params: &VectorizeParams) -> Result<Vec<TracedPolygon>> {
    params.validate()?;
    let binary = threshold(m, params.threshold)?;
    let clean = despeckle(&connected_components(&binary, params.connectivity), params.min_pixels);
    let traced = trace_contours(&clean, params.connectivity);
    let mut out = Vec::with_capacity(traced.len());
    for poly in &traced {
        match simplify_polygon(poly, params.tolerance_px, m.width) {
            Some(s) => {
                if s.dropped_holes > 0 {
                    debug!("{}: {} hole(s) collapsed during simplification", m.tile, s.dropped_holes);
                }
                out.push(s.polygon);
            }
            None => debug!("{}: component {} collapsed during simplification", m.tile, poly.component),
        }
    }
    Ok(out)
}

/// Full per-tile vector step, returning georeferenced polygons.
pub fn vectorize_tile(
    t: TileId,
    m: &ProbabilityMask,
    typology: Typology,
    params: &VectorizeParams,
) -> Result<Vec<PredictionPolygon>> {
    if m.tile != t {
        return Err(Error::domain(format!("mask belongs to {}, not {t}", m.tile)));
    }
    let pixel_polys = vectorize_tile_pixels(m, params)?;
    let mut out = Vec::with_capacity(pixel_polys.len());
    for p in &pixel_polys {
        if let Some(geometry) = georeference(p, t, m.width) {
            let geo_area = geometry.area_m2();
            if geo_area > 0.0 {
                out.push(PredictionPolygon {
                    typology,
                    geometry,
                    source_tiles: vec![t],
                    pixel_area: p.pixel_area,
                    geo_area,
                });
            }
        }
    }
    Ok(out)
}

/// Even-odd scanline fill of pixel-space rings, sampled at pixel centers.
pub fn rasterize_rings<'a>(
    rings: impl IntoIterator<Item = &'a [[f64; 2]]>,
    tile: TileId,
    width: u32,
    height: u32,
) -> BinaryMask {
    let mut edges: Vec<([f64; 2], [f64; 2])> = Vec::new();
    for r in rings {
        for w in r.windows(2) {
            if w[0][1] != w[1][1] {
                edges.push((w[0], w[1]));
            }
        }
    }
    let mut mask = BinaryMask::empty(tile, width, height);
    let mut xs: Vec<f64> = Vec::new();
    for y in 0..height {
        let yc = f64::from(y) + 0.5;
        xs.clear();
        for (a, b) in &edges {
            let (lo, hi) = if a[1] < b[1] { (a, b) } else { (b, a) };
            if lo[1] <= yc && yc < hi[1] {
                xs.push(lo[0] + (yc - lo[1]) * (hi[0] - lo[0]) / (hi[1] - lo[1]));
            }
        }
        xs.sort_by(|a, b| a.partial_cmp(b).unwrap());
        for pair in xs.chunks_exact(2) {
            let start = (pair[0] - 0.5).ceil().max(0.0);
            let end = (pair[1] - 0.5).ceil().min(f64::from(width));
            let mut x = start;
            while x < end {
                let xi = x as u32;
                let on = mask.get(xi, y);
                mask.set(xi, y, !on);
                x += 1.0;
            }
        }
    }
    mask
}

/// Rasterizes georeferenced polygons back into tile `t`'s pixel grid.
pub fn rasterize_geo(polys: &[PredictionPolygon], t: TileId, width: u32, height: u32) -> BinaryMask {
    let rings: Vec<Vec<[f64; 2]>> = polys
        .iter()
        .flat_map(|p| p.geometry.rings())
        .map(|r| {
            r.iter()
                .map(|g| {
                    let (x, y) = geo_to_pixel(t, *g, width);
                    [x, y]
                })
                .collect()
        })
        .collect();
    rasterize_rings(rings.iter().map(Vec::as_slice), t, width, height)
}

fn rect_of(p: &GeoPolygon, pad: f64) -> Rectangle<[f64; 2]> {
    let b = p.bbox();
    Rectangle::from_corners([b.west - pad, b.south - pad], [b.east + pad, b.north + pad])
}

fn boundary_distance_within(a: &GeoPolygon, b: &GeoPolygon, tol: f64) -> bool {
    let check = |p: &GeoPolygon, q: &GeoPolygon| {
        p.rings().flatten().any(|v| {
            q.rings().any(|r| {
                r.windows(2).any(|s| {
                    point_segment_distance([v.lon, v.lat], [s[0].lon, s[0].lat], [s[1].lon, s[1].lat]) <= tol
                })
            })
        })
    };
    check(a, b) || check(b, a)
}

fn find_root(parent: &mut [usize], mut i: usize) -> usize {
    while parent[i] != i {
        parent[i] = parent[parent[i]];
        i = parent[i];
    }
    i
}

fn canonical_order(a: &PredictionPolygon, b: &PredictionPolygon) -> std::cmp::Ordering {
    a.typology
        .cmp(&b.typology)
        .then_with(|| a.geometry.min_vertex().partial_cmp(&b.geometry.min_vertex()).unwrap())
        .then_with(|| a.geo_area.total_cmp(&b.geo_area))
}

/// Unions polygons that overlap or touch (within [`SNAP_TOLERANCE_DEG`]).
/// Output is canonical: independent of input order.
pub fn merge_cross_tile(polys: Vec<PredictionPolygon>) -> Result<Vec<PredictionPolygon>> {
    if let Some(first) = polys.first() {
        if polys.iter().any(|p| p.typology != first.typology) {
            return Err(Error::domain("merge_cross_tile needs a single typology"));
        }
    }
    let mut polys = polys;
    for p in &mut polys {
        p.geometry.canonicalize();
    }
    polys.sort_by(canonical_order);

    let tree = RTree::bulk_load(
        polys
            .iter()
            .enumerate()
            .map(|(i, p)| GeomWithData::new(rect_of(&p.geometry, SNAP_TOLERANCE_DEG), i))
            .collect(),
    );
    let geo_polys: Vec<geo::Polygon<f64>> = polys.iter().map(|p| p.geometry.to_geo()).collect();
    let mut parent: Vec<usize> = (0..polys.len()).collect();
    for (i, p) in polys.iter().enumerate() {
        let env = rect_of(&p.geometry, SNAP_TOLERANCE_DEG).envelope();
        for cand in tree.locate_in_envelope_intersecting(env) {
            let j = cand.data;
            if j <= i {
                continue;
            }
            if find_root(&mut parent, i) == find_root(&mut parent, j) {
                continue;
            }
            let touch = geo_polys[i].intersects(&geo_polys[j])
                || boundary_distance_within(&p.geometry, &polys[j].geometry, SNAP_TOLERANCE_DEG);
            if touch {
                let (ri, rj) = (find_root(&mut parent, i), find_root(&mut parent, j));
                parent[ri.max(rj)] = ri.min(rj);
            }
        }
    }

    let mut groups: std::collections::BTreeMap<usize, Vec<usize>> = Default::default();
    for i in 0..polys.len() {
        let r = find_root(&mut parent, i);
        groups.entry(r).or_default().push(i);
    }

    let mut out = Vec::with_capacity(groups.len());
    for members in groups.into_values() {
        if members.len() == 1 {
            out.push(polys[members[0]].clone());
            continue;
        }
        let typology = polys[members[0]].typology;
        let union = geo::unary_union(members.iter().map(|&i| &geo_polys[i]));
        let mut parts: Vec<GeoPolygon> = union.0.iter().filter_map(GeoPolygon::from_geo).collect();
        for p in &mut parts {
            p.canonicalize();
        }
        let mut tiles: Vec<BTreeSet<TileId>> = vec![BTreeSet::new(); parts.len()];
        let mut pixel_area = vec![0u64; parts.len()];
        for &m in &members {
            let k = if parts.len() == 1 {
                0
            } else {
                (0..parts.len())
                    .map(|k| (k, intersection_area_m2(&parts[k], &polys[m].geometry)))
                    .fold((0, -1.0), |best, c| if c.1 > best.1 { c } else { best })
                    .0
            };
            tiles[k].extend(polys[m].source_tiles.iter().copied());
            pixel_area[k] += polys[m].pixel_area;
        }
        for (k, geometry) in parts.into_iter().enumerate() {
            let geo_area = geometry.area_m2();
            if geo_area <= 0.0 {
                continue;
            }
            out.push(PredictionPolygon {
                typology,
                geometry,
                source_tiles: tiles[k].iter().copied().collect(),
                pixel_area: pixel_area[k],
                geo_area,
            });
        }
    }
    out.sort_by(canonical_order);
    Ok(out)
}

/// Vectorizes a batch of tiles of one typology and merges across tile edges.
pub fn vectorize_tiles(
    masks: &[ProbabilityMask],
    typology: Typology,
    params: &VectorizeParams,
) -> Result<Vec<PredictionPolygon>> {
    use rayon::prelude::*;
    let per_tile: Vec<Vec<PredictionPolygon>> = masks
        .par_iter()
        .map(|m| vectorize_tile(m.tile, m, typology, params))
        .collect::<Result<_>>()?;
    merge_cross_tile(per_tile.into_iter().flatten().collect())
}
