//! A generated test city: rectangular buildings on a grid, painted imagery
//! tiles with solar panels and vegetation, footprints and ground truth.
//!
//! All geometry is aligned to the global pixel grid at the chosen zoom, so
//! the painted rectangles are exactly what the colour-rule segmenter finds.
//! Features are placed so that every tagging decision clears or misses its
//! threshold by a clear margin, and so that no tile-clipped piece of a
//! feature is accidentally removed as a speckle.

use std::collections::BTreeMap;
use std::f64::consts::PI;
use std::fs;
use std::path::{Path, PathBuf};

use geojson::{feature::Id, Feature, Geometry, GeometryValue, JsonObject, JsonValue, Position};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};
use crate::geojson_io::write_features_file;
use crate::geometry::AUTHALIC_RADIUS_M;
use crate::layout::tile_path;
use crate::segment::{RgbTile, PANEL_RGB, VEGETATION_RGB};
use crate::tagging::TaggingParams;
use crate::tilegrid::{pixel_to_geo, tile_of, GeoPoint, TileId, TILE_SIZE};
use crate::Typology;

pub const GROUND_RGB: [u8; 3] = [128, 128, 128];
pub const ROOF_RGB: [u8; 3] = [180, 90, 60];

/// Half-open rectangle `[x0, x1) × [y0, y1)` in global pixel coordinates.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct PixelRect {
    pub x0: u64,
    pub y0: u64,
    pub x1: u64,
    pub y1: u64,
}

impl PixelRect {
    pub fn new(x0: u64, y0: u64, w: u64, h: u64) -> Self {
        PixelRect { x0, y0, x1: x0 + w, y1: y0 + h }
    }

    pub fn width(&self) -> u64 {
        self.x1 - self.x0
    }

    pub fn height(&self) -> u64 {
        self.y1 - self.y0
    }

    pub fn area(&self) -> u64 {
        self.width() * self.height()
    }

    pub fn intersection(&self, o: &PixelRect) -> Option<PixelRect> {
        let r = PixelRect {
            x0: self.x0.max(o.x0),
            y0: self.y0.max(o.y0),
            x1: self.x1.min(o.x1),
            y1: self.y1.min(o.y1),
        };
        (r.x0 < r.x1 && r.y0 < r.y1).then_some(r)
    }

    pub fn grown(&self, d: u64) -> PixelRect {
        PixelRect { x0: self.x0 - d, y0: self.y0 - d, x1: self.x1 + d, y1: self.y1 + d }
    }

    pub fn contains(&self, o: &PixelRect) -> bool {
        self.x0 <= o.x0 && self.y0 <= o.y0 && o.x1 <= self.x1 && o.y1 <= self.y1
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum FeatureKind {
    /// Well inside a roof.
    Roof,
    /// Below the despeckle size.
    Speckle,
    /// Thin and long, crossing a roof.
    Sliver,
    /// On the ground, touching no roof.
    Ground,
    /// Straddling a roof edge.
    Grazing,
    /// Centred on a tile corner, so it spans four tiles.
    TileCorner,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct PaintedFeature {
    pub typology: Typology,
    pub kind: FeatureKind,
    pub rect: PixelRect,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SyntheticBuilding {
    pub id: String,
    pub parent_id: String,
    pub rect: PixelRect,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SyntheticSpec {
    pub seed: u64,
    pub city: String,
    /// Buildings per side; one building per grid cell.
    pub grid: u32,
    pub cell_px: u64,
    pub zoom: u8,
    pub anchor: GeoPoint,
    /// Uniform per-channel colour noise amplitude.
    pub noise: u8,
    /// Every n-th row of cells pairs neighbours into MultiPolygon buildings.
    pub multipolygon_row_step: u32,
    pub min_pixels: u64,
    pub tagging: TaggingParams,
}

impl Default for SyntheticSpec {
    fn default() -> Self {
        SyntheticSpec {
            seed: 7,
            city: "Synthetica".into(),
            grid: 24,
            cell_px: 100,
            zoom: 19,
            anchor: GeoPoint { lon: 8.54, lat: 47.37 },
            noise: 6,
            multipolygon_row_step: 6,
            min_pixels: 60,
            tagging: TaggingParams::default(),
        }
    }
}

#[derive(Debug, Clone)]
pub struct SyntheticCity {
    pub spec: SyntheticSpec,
    /// Painted extent in global pixels; tiles cover it entirely.
    pub extent: PixelRect,
    pub buildings: Vec<SyntheticBuilding>,
    pub features: Vec<PaintedFeature>,
}

const MARGIN: f64 = 0.03;
const TS: u64 = TILE_SIZE as u64;

/// WGS84 position of a global pixel corner.
pub fn global_pixel_to_geo(zoom: u8, gx: u64, gy: u64) -> GeoPoint {
    let t = TileId { zoom, x: (gx / TS) as u32, y: (gy / TS) as u32 };
    pixel_to_geo(t, (gx % TS) as f64, (gy % TS) as f64, TILE_SIZE)
}

/// Approximate area of one pixel at global row `gy`, in m².
fn pixel_area_m2(zoom: u8, gy: f64) -> f64 {
    let n = (TS << zoom) as f64;
    let lat = (PI * (1.0 - 2.0 * gy / n)).sinh().atan();
    let side = AUTHALIC_RADIUS_M * 2.0 * PI / n * lat.cos();
    side * side
}

fn near(value: f64, threshold: f64) -> bool {
    threshold > 0.0 && (value / threshold - 1.0).abs() < MARGIN
}

fn tile_pieces(r: &PixelRect) -> Vec<PixelRect> {
    let mut out = Vec::new();
    for tx in r.x0 / TS..=(r.x1 - 1) / TS {
        for ty in r.y0 / TS..=(r.y1 - 1) / TS {
            let tile = PixelRect::new(tx * TS, ty * TS, TS, TS);
            out.extend(tile.intersection(r));
        }
    }
    out
}

struct Builder<'a> {
    spec: &'a SyntheticSpec,
    rng: ChaCha8Rng,
    features: Vec<PaintedFeature>,
}

impl Builder<'_> {
    /// Accepts a feature only if its fate is unambiguous: clipped tile
    /// pieces are all kept (or, for speckles, the whole feature sits in one
    /// tile), and each tagging quantity is away from its threshold.
    fn try_add(&mut self, typology: Typology, kind: FeatureKind, rect: PixelRect, cell: &PixelRect, building: &PixelRect) -> bool {
        if !cell.grown(0).contains(&rect.grown(1)) {
            return false;
        }
        if self.features.iter().any(|f| f.rect.grown(2).intersection(&rect).is_some()) {
            return false;
        }
        let pieces = tile_pieces(&rect);
        let min = self.spec.min_pixels;
        let clean = if pieces.len() == 1 {
            true
        } else if rect.area() < min {
            false
        } else {
            pieces.iter().all(|p| p.area() >= min + min / 10)
        };
        if !clean {
            return false;
        }
        if rect.area() >= min {
            if let Some(ov) = rect.intersection(building) {
                let p = &self.spec.tagging;
                let px = pixel_area_m2(self.spec.zoom, (rect.y0 + rect.y1) as f64 / 2.0);
                let overlap = ov.area() as f64 * px;
                let ratio = ov.area() as f64 / rect.area() as f64;
                let (w, h) = (rect.width() as f64, rect.height() as f64);
                let compact = 4.0 * PI * w * h / (2.0 * (w + h)).powi(2);
                if near(overlap, p.min_overlap_m2) || near(ratio, p.min_overlap_ratio) || near(compact, p.min_compactness) {
                    return false;
                }
            }
        }
        self.features.push(PaintedFeature { typology, kind, rect });
        true
    }

    fn typology(&mut self) -> Typology {
        if self.rng.gen_bool(0.5) {
            Typology::Solar
        } else {
            Typology::Green
        }
    }

    /// A random rectangle inside `area` with at least 2 px inset.
    fn inside(&mut self, area: &PixelRect, w: u64, h: u64) -> Option<PixelRect> {
        if area.width() < w + 4 || area.height() < h + 4 {
            return None;
        }
        let x = self.rng.gen_range(area.x0 + 2..=area.x1 - 2 - w);
        let y = self.rng.gen_range(area.y0 + 2..=area.y1 - 2 - h);
        Some(PixelRect::new(x, y, w, h))
    }

    fn roof_feature(&mut self, t: Typology, area: &PixelRect, cell: &PixelRect, b: &PixelRect) -> bool {
        for _ in 0..20 {
            let (w, h) = match t {
                Typology::Solar => (self.rng.gen_range(8..=26), self.rng.gen_range(8..=20)),
                Typology::Green => (self.rng.gen_range(10..=40), self.rng.gen_range(8..=40)),
            };
            if w * h < 70 {
                continue;
            }
            if let Some(r) = self.inside(area, w, h) {
                if self.try_add(t, FeatureKind::Roof, r, cell, b) {
                    return true;
                }
            }
        }
        false
    }

    fn decorate(&mut self, cell: &PixelRect, b: &PixelRect) {
        let roll = self.rng.gen_range(0..100);
        match roll {
            0..=27 => {}
            28..=57 => {
                let t = if roll < 43 { Typology::Solar } else { Typology::Green };
                self.roof_feature(t, b, cell, b);
            }
            58..=65 => {
                let mid = (b.x0 + b.x1) / 2;
                let left = PixelRect { x1: mid, ..*b };
                let right = PixelRect { x0: mid, ..*b };
                self.roof_feature(Typology::Solar, &left, cell, b);
                self.roof_feature(Typology::Green, &right, cell, b);
            }
            66..=70 => {
                for _ in 0..10 {
                    if let Some(r) = self.inside(b, 5, 5) {
                        if self.try_add(Typology::Solar, FeatureKind::Speckle, r, cell, b) {
                            break;
                        }
                    }
                }
            }
            71..=75 => {
                for _ in 0..20 {
                    let len = self.rng.gen_range(70..=cell.width() - 4);
                    let x = self.rng.gen_range(cell.x0 + 2..=cell.x1 - 2 - len);
                    let y = self.rng.gen_range(b.y0 + 2..=b.y1 - 4);
                    let t = self.typology();
                    if self.try_add(t, FeatureKind::Sliver, PixelRect::new(x, y, len, 2), cell, b) {
                        break;
                    }
                }
            }
            76..=82 => {
                for _ in 0..20 {
                    let w = self.rng.gen_range(6..=8);
                    let h = self.rng.gen_range(11..=16);
                    let (w, h) = if self.rng.gen_bool(0.5) { (w, h) } else { (h, w) };
                    let x = self.rng.gen_range(cell.x0 + 1..=cell.x1 - 1 - w);
                    let y = self.rng.gen_range(cell.y0 + 1..=cell.y1 - 1 - h);
                    let r = PixelRect::new(x, y, w, h);
                    if r.grown(2).intersection(b).is_none() {
                        let t = self.typology();
                        if self.try_add(t, FeatureKind::Ground, r, cell, b) {
                            break;
                        }
                    }
                }
            }
            _ => {
                for _ in 0..30 {
                    let w = self.rng.gen_range(6..=30);
                    let h = self.rng.gen_range(6..=30);
                    let depth = self.rng.gen_range(1..=6u64);
                    let (x, y) = match self.rng.gen_range(0..4) {
                        0 => (b.x1 - depth.min(w - 1), self.rng.gen_range(b.y0..b.y1)),
                        1 => ((b.x0 + depth.min(w - 1)).saturating_sub(w), self.rng.gen_range(b.y0..b.y1)),
                        2 => (self.rng.gen_range(b.x0..b.x1), b.y1 - depth.min(h - 1)),
                        _ => (self.rng.gen_range(b.x0..b.x1), (b.y0 + depth.min(h - 1)).saturating_sub(h)),
                    };
                    let r = PixelRect::new(x, y, w, h);
                    let t = self.typology();
                    if r.intersection(b).is_some() && !b.contains(&r) && self.try_add(t, FeatureKind::Grazing, r, cell, b) {
                        break;
                    }
                }
            }
        }
    }
}

impl SyntheticCity {
    pub fn generate(spec: SyntheticSpec) -> Result<Self> {
        if spec.grid == 0 || spec.cell_px < 90 {
            return Err(Error::config("synthetic grid needs at least one cell of 90 px or more"));
        }
        let t = tile_of(spec.anchor, spec.zoom)?;
        let ox = u64::from(t.x) * TS + 40;
        let oy = u64::from(t.y) * TS + 40;
        let span = u64::from(spec.grid) * spec.cell_px;
        let x1 = (ox + span).div_ceil(TS) * TS;
        let y1 = (oy + span).div_ceil(TS) * TS;
        let extent = PixelRect { x0: u64::from(t.x) * TS, y0: u64::from(t.y) * TS, x1, y1 };

        let mut b = Builder { spec: &spec, rng: ChaCha8Rng::seed_from_u64(spec.seed), features: Vec::new() };
        let mut buildings = Vec::new();
        let mut cells = Vec::new();
        for r in 0..u64::from(spec.grid) {
            for c in 0..u64::from(spec.grid) {
                let cell = PixelRect::new(ox + c * spec.cell_px, oy + r * spec.cell_px, spec.cell_px, spec.cell_px);
                let w = b.rng.gen_range(44..=72u64.min(spec.cell_px - 20));
                let h = b.rng.gen_range(44..=72u64.min(spec.cell_px - 20));
                let x = b.rng.gen_range(cell.x0 + 10..=cell.x1 - 10 - w);
                let y = b.rng.gen_range(cell.y0 + 10..=cell.y1 - 10 - h);
                let rect = PixelRect::new(x, y, w, h);
                let paired = spec.multipolygon_row_step > 0 && r % u64::from(spec.multipolygon_row_step) == 0;
                let (id, parent_id) = if paired {
                    let parent = format!("m{r:02}_{:02}", c / 2 * 2);
                    (format!("{parent}#{}", c % 2), parent)
                } else {
                    let id = format!("b{r:02}_{c:02}");
                    (id.clone(), id)
                };
                buildings.push(SyntheticBuilding { id, parent_id, rect });
                cells.push(cell);
            }
        }
        // an odd grid leaves the last pair incomplete
        let mut parts: BTreeMap<String, usize> = BTreeMap::new();
        for bl in &buildings {
            *parts.entry(bl.parent_id.clone()).or_default() += 1;
        }
        for bl in &mut buildings {
            if parts[&bl.parent_id] == 1 {
                bl.id = bl.parent_id.clone();
            }
        }

        for (cell, bl) in cells.iter().zip(&buildings) {
            let corner_x = bl.rect.x0.div_ceil(TS) * TS;
            let corner_y = bl.rect.y0.div_ceil(TS) * TS;
            let corner_inside = corner_x >= bl.rect.x0 + 12
                && corner_x + 12 <= bl.rect.x1
                && corner_y >= bl.rect.y0 + 12
                && corner_y + 12 <= bl.rect.y1;
            if corner_inside {
                let r = PixelRect::new(corner_x - 10, corner_y - 10, 20, 20);
                if b.try_add(Typology::Green, FeatureKind::TileCorner, r, cell, &bl.rect) {
                    continue;
                }
            }
            b.decorate(cell, &bl.rect);
        }
        let features = b.features;
        Ok(SyntheticCity { spec, extent, buildings, features })
    }

    pub fn tiles(&self) -> Vec<TileId> {
        let z = self.spec.zoom;
        let mut out = Vec::new();
        for x in self.extent.x0 / TS..self.extent.x1 / TS {
            for y in self.extent.y0 / TS..self.extent.y1 / TS {
                out.push(TileId { zoom: z, x: x as u32, y: y as u32 });
            }
        }
        out
    }

    pub fn render_tile(&self, t: TileId) -> RgbTile {
        let mut img = RgbTile::filled(t, TILE_SIZE, TILE_SIZE, GROUND_RGB);
        let frame = PixelRect::new(u64::from(t.x) * TS, u64::from(t.y) * TS, TS, TS);
        let mut paint = |r: &PixelRect, rgb: [u8; 3]| {
            if let Some(c) = frame.intersection(r) {
                for gy in c.y0..c.y1 {
                    for gx in c.x0..c.x1 {
                        img.set((gx - frame.x0) as u32, (gy - frame.y0) as u32, rgb);
                    }
                }
            }
        };
        for b in &self.buildings {
            paint(&b.rect, ROOF_RGB);
        }
        for f in &self.features {
            let rgb = match f.typology {
                Typology::Solar => PANEL_RGB,
                Typology::Green => VEGETATION_RGB,
            };
            paint(&f.rect, rgb);
        }
        let mut rng = ChaCha8Rng::seed_from_u64(self.spec.seed ^ (u64::from(t.x) << 32 | u64::from(t.y)));
        let a = i16::from(self.spec.noise);
        for y in 0..TILE_SIZE {
            for x in 0..TILE_SIZE {
                let px = img.get(x, y).map(|c| (i16::from(c) + rng.gen_range(-a..=a)).clamp(0, 255) as u8);
                img.set(x, y, px);
            }
        }
        img
    }

    fn ring(&self, r: &PixelRect) -> Vec<Position> {
        let z = self.spec.zoom;
        [(r.x0, r.y1), (r.x1, r.y1), (r.x1, r.y0), (r.x0, r.y0), (r.x0, r.y1)]
            .iter()
            .map(|&(x, y)| {
                let p = global_pixel_to_geo(z, x, y);
                Position::from([p.lon, p.lat])
            })
            .collect()
    }

    /// Truth label: any painted feature of the typology touches the roof.
    pub fn truth_labels(&self, b: &SyntheticBuilding) -> (bool, bool) {
        let hit = |t: Typology| {
            self.buildings
                .iter()
                .filter(|o| o.parent_id == b.parent_id)
                .any(|o| self.features.iter().any(|f| f.typology == t && f.rect.intersection(&o.rect).is_some()))
        };
        (hit(Typology::Green), hit(Typology::Solar))
    }

    /// Footprint features; with `truth`, each carries `green` and `solar`.
    pub fn footprint_features(&self, truth: bool) -> Vec<Feature> {
        let mut groups: BTreeMap<&str, Vec<&SyntheticBuilding>> = BTreeMap::new();
        for b in &self.buildings {
            groups.entry(b.parent_id.as_str()).or_default().push(b);
        }
        groups
            .into_iter()
            .map(|(parent, parts)| {
                let mut props = JsonObject::new();
                props.insert("levels".into(), JsonValue::from(1 + parts[0].rect.width() % 5));
                if truth {
                    let (g, s) = self.truth_labels(parts[0]);
                    props.insert("green".into(), JsonValue::from(g));
                    props.insert("solar".into(), JsonValue::from(s));
                }
                let value = if parts.len() == 1 {
                    GeometryValue::Polygon { coordinates: vec![self.ring(&parts[0].rect)] }
                } else {
                    let mut sorted = parts.clone();
                    sorted.sort_by(|a, b| a.id.cmp(&b.id));
                    GeometryValue::MultiPolygon {
                        coordinates: sorted.iter().map(|p| vec![self.ring(&p.rect)]).collect(),
                    }
                };
                Feature {
                    bbox: None,
                    geometry: Some(Geometry::new(value)),
                    id: Some(Id::String(parent.to_string())),
                    properties: Some(props),
                    foreign_members: None,
                }
            })
            .collect()
    }

    /// Writes imagery tiles, `footprints.geojson`, `truth.geojson` and a
    /// `city.toml` config into `dir`; returns the config path.
    pub fn write(&self, dir: &Path) -> Result<PathBuf> {
        for t in self.tiles() {
            self.render_tile(t).write_png(&tile_path(&dir.join("imagery"), t, "png"))?;
        }
        write_features_file(&dir.join("footprints.geojson"), &self.footprint_features(false))?;
        write_features_file(&dir.join("truth.geojson"), &self.footprint_features(true))?;
        let p = &self.spec.tagging;
        let config = format!(
            "city = \"{}\"\nimagery_dir = \"imagery\"\nmask_dir = \"masks\"\nfootprints = \"footprints.geojson\"\n\
             output_dir = \"output\"\nzoom = {}\n\n[truth]\ngreen = \"truth.geojson\"\nsolar = \"truth.geojson\"\n\n\
             [green]\nmin_pixels = {mp}\n\n[solar]\nmin_pixels = {mp}\n\n\
             [tagging]\nmin_overlap_m2 = {:?}\nmin_overlap_ratio = {:?}\nmin_compactness = {:?}\n",
            self.spec.city,
            self.spec.zoom,
            p.min_overlap_m2,
            p.min_overlap_ratio,
            p.min_compactness,
            mp = self.spec.min_pixels,
        );
        let path = dir.join("city.toml");
        fs::write(&path, config).map_err(|e| Error::io(&path, e))?;
        Ok(path)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn generation_is_seeded() {
        let a = SyntheticCity::generate(SyntheticSpec::default()).unwrap();
        let b = SyntheticCity::generate(SyntheticSpec::default()).unwrap();
        assert_eq!(a.features, b.features);
        assert_eq!(a.buildings.len(), 576);
        let c = SyntheticCity::generate(SyntheticSpec { seed: 8, ..Default::default() }).unwrap();
        assert_ne!(a.features, c.features);
    }

    #[test]
    fn features_are_separated_and_every_kind_occurs() {
        let city = SyntheticCity::generate(SyntheticSpec::default()).unwrap();
        for (i, f) in city.features.iter().enumerate() {
            for g in &city.features[i + 1..] {
                assert!(f.rect.grown(1).intersection(&g.rect).is_none());
            }
        }
        for kind in [
            FeatureKind::Roof,
            FeatureKind::Speckle,
            FeatureKind::Sliver,
            FeatureKind::Ground,
            FeatureKind::Grazing,
            FeatureKind::TileCorner,
        ] {
            assert!(city.features.iter().any(|f| f.kind == kind), "{kind:?}");
        }
    }

    #[test]
    fn tile_edges_are_shared() {
        let p = global_pixel_to_geo(19, 256 * 1000, 256 * 2000 + 17);
        let t = TileId::new(19, 999, 2000).unwrap();
        assert_eq!(p, pixel_to_geo(t, 256.0, 17.0, 256));
    }
}
