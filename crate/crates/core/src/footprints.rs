//! Building footprint ingestion, areas and the bounding-box index.

use std::collections::HashSet;
use std::io::Read;
use std::path::Path;

use geojson::{feature::Id, FeatureCollection, JsonObject};
use log::warn;
use rstar::{primitives::GeomWithData, primitives::Rectangle, RTree, AABB};
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::error::{Error, Result};
use crate::geojson_io::{polygon_parts, raw_to_polygon, read_feature_collection, read_feature_collection_file, RawPolygon};
use crate::geometry::{rings_have_bad_contact, GeoPolygon};
use crate::tilegrid::{GeoBBox, GeoPoint};
use crate::Typology;

/// Per-building roof labels; "both" is simply both flags set.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct RoofLabels {
    pub green: bool,
    pub solar: bool,
}

impl RoofLabels {
    pub fn get(&self, t: Typology) -> bool {
        match t {
            Typology::Green => self.green,
            Typology::Solar => self.solar,
        }
    }

    pub fn set(&mut self, t: Typology, on: bool) {
        match t {
            Typology::Green => self.green = on,
            Typology::Solar => self.solar = on,
        }
    }

    pub fn any(&self) -> bool {
        self.green || self.solar
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct BuildingFootprint {
    pub id: String,
    /// Source feature id; differs from `id` only for MultiPolygon parts.
    pub parent_id: String,
    pub geometry: GeoPolygon,
    pub area_m2: f64,
    pub centroid: GeoPoint,
    pub labels: RoofLabels,
    pub properties: JsonObject,
}

impl BuildingFootprint {
    pub fn new(id: impl Into<String>, geometry: GeoPolygon) -> Self {
        let id = id.into();
        BuildingFootprint {
            parent_id: id.clone(),
            id,
            area_m2: geometry.area_m2(),
            centroid: geometry.centroid(),
            geometry,
            labels: RoofLabels::default(),
            properties: JsonObject::new(),
        }
    }
}

pub fn polygon_area_m2(g: &GeoPolygon) -> f64 {
    g.area_m2()
}

#[derive(Debug, Clone, Default)]
pub struct LoadReport {
    pub footprints: Vec<BuildingFootprint>,
    pub features_read: usize,
    pub warnings: Vec<String>,
}

impl LoadReport {
    fn skip(&mut self, msg: String) {
        warn!("{msg}");
        self.warnings.push(msg);
    }
}

fn id_string(id: &Id) -> String {
    match id {
        Id::String(s) => s.clone(),
        Id::Number(n) => n.to_string(),
    }
}

/// Stable id for features without one: hash of the coordinate values.
pub fn content_id(parts: &[RawPolygon]) -> String {
    let mut h = Sha256::new();
    for part in parts {
        h.update(b"P");
        for ring in part {
            h.update(b"R");
            for p in ring {
                h.update(p.lon.to_le_bytes());
                h.update(p.lat.to_le_bytes());
            }
        }
    }
    let digest = h.finalize();
    digest[..12].iter().map(|b| format!("{b:02x}")).collect()
}

fn is_simple(p: &GeoPolygon) -> bool {
    let xy = |r: &Vec<GeoPoint>| r.iter().map(|q| [q.lon, q.lat]).collect::<Vec<_>>();
    let rings: Vec<Vec<[f64; 2]>> = p.rings().map(xy).collect();
    rings.iter().all(|r| !rings_have_bad_contact(std::slice::from_ref(r), false))
        && !rings_have_bad_contact(&rings, true)
}

pub fn load_footprints(reader: impl Read) -> Result<LoadReport> {
    Ok(load_footprint_collection(&read_feature_collection(reader)?))
}

pub fn load_footprints_file(path: &Path) -> Result<LoadReport> {
    Ok(load_footprint_collection(&read_feature_collection_file(path)?))
}

/// Validates and normalizes footprint features. Bad features are skipped
/// with a warning; MultiPolygon parts become `<id>#<ordinal>`.
pub fn load_footprint_collection(fc: &FeatureCollection) -> LoadReport {
    let mut report = LoadReport::default();
    let mut seen: HashSet<String> = HashSet::new();
    for (n, feature) in fc.features.iter().enumerate() {
        report.features_read += 1;
        let Some(geom) = &feature.geometry else {
            report.skip(format!("feature {n}: no geometry"));
            continue;
        };
        let parts = match polygon_parts(geom) {
            Ok(Some(parts)) => parts,
            Ok(None) => {
                report.skip(format!("feature {n}: {} geometry is not a polygon", geom.value.type_name()));
                continue;
            }
            Err(e) => {
                report.skip(format!("feature {n}: {e}"));
                continue;
            }
        };
        let parent = feature
            .id
            .as_ref()
            .map(id_string)
            .unwrap_or_else(|| content_id(&parts));
        let multi = parts.len() > 1;
        for (k, raw) in parts.into_iter().enumerate() {
            let id = if multi { format!("{parent}#{k}") } else { parent.clone() };
            let Some(poly) = raw_to_polygon(raw) else {
                report.skip(format!("footprint {id}: ring has fewer than 3 distinct vertices"));
                continue;
            };
            if !is_simple(&poly) {
                report.skip(format!("footprint {id}: self-intersecting ring"));
                continue;
            }
            if !seen.insert(id.clone()) {
                report.skip(format!("footprint {id}: duplicate id"));
                continue;
            }
            let mut fp = BuildingFootprint::new(id, poly);
            fp.parent_id = parent.clone();
            fp.properties = feature.properties.clone().unwrap_or_default();
            if fp.area_m2 <= 0.0 {
                report.skip(format!("footprint {}: zero area", fp.id));
                seen.remove(&fp.id);
                continue;
            }
            report.footprints.push(fp);
        }
    }
    report
}

type Entry = GeomWithData<Rectangle<[f64; 2]>, usize>;

/// Immutable R-tree over footprint bounding boxes.
#[derive(Debug)]
pub struct SpatialIndex {
    tree: RTree<Entry>,
    ids: Vec<String>,
}

pub fn build_spatial_index(fps: &[BuildingFootprint]) -> Result<SpatialIndex> {
    if fps.is_empty() {
        return Err(Error::domain("cannot index an empty footprint list"));
    }
    let entries = fps
        .iter()
        .enumerate()
        .map(|(i, f)| {
            let b = f.geometry.bbox();
            GeomWithData::new(Rectangle::from_corners([b.west, b.south], [b.east, b.north]), i)
        })
        .collect();
    Ok(SpatialIndex {
        tree: RTree::bulk_load(entries),
        ids: fps.iter().map(|f| f.id.clone()).collect(),
    })
}

impl SpatialIndex {
    pub fn len(&self) -> usize {
        self.ids.len()
    }

    pub fn is_empty(&self) -> bool {
        self.ids.is_empty()
    }

    /// Positions (in the indexed slice) of footprints whose bbox meets `bbox`, ascending.
    pub fn query_indices(&self, bbox: &GeoBBox) -> Vec<usize> {
        let env = AABB::from_corners([bbox.west, bbox.south], [bbox.east, bbox.north]);
        let mut out: Vec<usize> = self
            .tree
            .locate_in_envelope_intersecting(env)
            .map(|e| e.data)
            .collect();
        out.sort_unstable();
        out
    }

    /// Ids of candidate footprints, sorted ascending.
    pub fn query_candidates(&self, bbox: &GeoBBox) -> Vec<String> {
        let mut ids: Vec<String> = self
            .query_indices(bbox)
            .into_iter()
            .map(|i| self.ids[i].clone())
            .collect();
        ids.sort();
        ids
    }
}
