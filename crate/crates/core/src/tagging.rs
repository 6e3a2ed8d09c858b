//! Labelling footprints from prediction polygons, and registry export.

use std::collections::{BTreeMap, BTreeSet};
use std::fs;
use std::path::Path;

use geojson::{feature::Id, Feature, JsonObject, JsonValue};
use log::info;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::footprints::{build_spatial_index, load_footprint_collection, BuildingFootprint};
use crate::geojson_io::{point_geometry, polygon_geometry, read_feature_collection_file, write_features_file};
use crate::geometry::intersection_area_m2;
use crate::vectorize::PredictionPolygon;
use crate::Typology;

pub const POLYGONS_FILE: &str = "registry_polygons.geojson";
pub const CENTROIDS_FILE: &str = "registry_centroids.geojson";
pub const SUMMARY_FILE: &str = "summary.json";

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct TaggingParams {
    pub min_overlap_m2: f64,
    /// Overlap divided by the prediction polygon's area.
    pub min_overlap_ratio: f64,
    pub min_compactness: f64,
}

impl Default for TaggingParams {
    fn default() -> Self {
        TaggingParams {
            min_overlap_m2: 2.0,
            min_overlap_ratio: 0.05,
            min_compactness: 0.1,
        }
    }
}

impl TaggingParams {
    pub fn validate(&self) -> Result<()> {
        if !(self.min_overlap_m2 >= 0.0 && self.min_overlap_m2.is_finite()) {
            return Err(Error::config(format!("min_overlap_m2 must be >= 0, got {}", self.min_overlap_m2)));
        }
        for (name, v) in [("min_overlap_ratio", self.min_overlap_ratio), ("min_compactness", self.min_compactness)] {
            if !(0.0..=1.0).contains(&v) {
                return Err(Error::config(format!("{name} must lie in [0, 1], got {v}")));
            }
        }
        Ok(())
    }

    /// The threshold test on a precomputed intersection area.
    pub fn accepts(&self, overlap_m2: f64, pred_area_m2: f64, compactness: f64) -> bool {
        overlap_m2 > 0.0
            && overlap_m2 >= self.min_overlap_m2
            && pred_area_m2 > 0.0
            && overlap_m2 / pred_area_m2 >= self.min_overlap_ratio
            && compactness >= self.min_compactness
    }
}

pub fn significant_overlap(p: &PredictionPolygon, b: &BuildingFootprint, params: &TaggingParams) -> bool {
    let overlap = intersection_area_m2(&p.geometry, &b.geometry);
    params.accepts(overlap, p.geo_area, p.geometry.compactness())
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize, Deserialize)]
pub struct TypologyTotals {
    pub count: u64,
    pub area_m2: f64,
}

/// Totals of one city registry; this is also the on-disk `summary.json`.
/// A typology that was not analysed is `null`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RegistrySummary {
    pub city: String,
    pub buildings: u64,
    pub total_area_m2: f64,
    pub green: Option<TypologyTotals>,
    pub solar: Option<TypologyTotals>,
}

impl RegistrySummary {
    pub fn typology(&self, t: Typology) -> Option<&TypologyTotals> {
        match t {
            Typology::Green => self.green.as_ref(),
            Typology::Solar => self.solar.as_ref(),
        }
    }

    pub fn read(path: &Path) -> Result<Self> {
        let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        serde_json::from_str(&text).map_err(|e| Error::data(format!("{}: {e}", path.display())))
    }
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct TaggingStats {
    pub predictions: usize,
    /// Predictions with zero overlap against every footprint.
    pub discarded: usize,
    /// Predictions that touch a footprint but clear no threshold anywhere.
    pub insignificant: usize,
}

#[derive(Debug, Clone)]
pub struct CityRegistry {
    pub city: String,
    /// Sorted by id.
    pub footprints: Vec<BuildingFootprint>,
    pub analyzed: BTreeSet<Typology>,
}

impl CityRegistry {
    pub fn new(city: impl Into<String>, mut footprints: Vec<BuildingFootprint>, analyzed: &[Typology]) -> Self {
        footprints.sort_by(|a, b| a.id.cmp(&b.id));
        CityRegistry {
            city: city.into(),
            footprints,
            analyzed: analyzed.iter().copied().collect(),
        }
    }

    /// Building count with MultiPolygon parts counted once per parent.
    pub fn building_count(&self) -> u64 {
        self.footprints.iter().map(|f| f.parent_id.as_str()).collect::<BTreeSet<_>>().len() as u64
    }

    pub fn total_area_m2(&self) -> f64 {
        self.footprints.iter().map(|f| f.area_m2).sum()
    }

    pub fn tagged(&self, t: Typology) -> TypologyTotals {
        let parents: BTreeSet<&str> = self
            .footprints
            .iter()
            .filter(|f| f.labels.get(t))
            .map(|f| f.parent_id.as_str())
            .collect();
        TypologyTotals {
            count: parents.len() as u64,
            area_m2: self.footprints.iter().filter(|f| f.labels.get(t)).map(|f| f.area_m2).sum(),
        }
    }

    pub fn summary(&self) -> RegistrySummary {
        let totals = |t| self.analyzed.contains(&t).then(|| self.tagged(t));
        RegistrySummary {
            city: self.city.clone(),
            buildings: self.building_count(),
            total_area_m2: self.total_area_m2(),
            green: totals(Typology::Green),
            solar: totals(Typology::Solar),
        }
    }
}

/// Labels every footprint that some prediction of its typology overlaps
/// significantly. Parts of a MultiPolygon building share labels.
pub fn tag_buildings(
    city: &str,
    footprints: Vec<BuildingFootprint>,
    predictions: &[PredictionPolygon],
    analyzed: &[Typology],
    params: &TaggingParams,
) -> Result<(CityRegistry, TaggingStats)> {
    params.validate()?;
    let mut registry = CityRegistry::new(city, footprints, analyzed);
    for f in &mut registry.footprints {
        f.labels = Default::default();
    }
    let mut stats = TaggingStats {
        predictions: predictions.len(),
        ..Default::default()
    };
    if registry.footprints.is_empty() || predictions.is_empty() {
        stats.discarded = predictions.len();
        return Ok((registry, stats));
    }
    let index = build_spatial_index(&registry.footprints)?;
    let fps = &registry.footprints;

    // per prediction: (touched anything, footprint positions it labels)
    let hits: Vec<(bool, Vec<usize>)> = predictions
        .par_iter()
        .map(|p| {
            let compactness = p.geometry.compactness();
            let mut touched = false;
            let mut labels = Vec::new();
            for i in index.query_indices(&p.geometry.bbox()) {
                let overlap = intersection_area_m2(&p.geometry, &fps[i].geometry);
                if overlap > 0.0 {
                    touched = true;
                    if params.accepts(overlap, p.geo_area, compactness) {
                        labels.push(i);
                    }
                }
            }
            (touched, labels)
        })
        .collect();

    let mut tagged_parents: BTreeMap<Typology, BTreeSet<String>> = BTreeMap::new();
    for (p, (touched, labels)) in predictions.iter().zip(&hits) {
        if !touched {
            stats.discarded += 1;
        } else if labels.is_empty() {
            stats.insignificant += 1;
        }
        if !registry.analyzed.contains(&p.typology) {
            continue;
        }
        let set = tagged_parents.entry(p.typology).or_default();
        for &i in labels {
            set.insert(fps[i].parent_id.clone());
        }
    }
    for f in &mut registry.footprints {
        for (t, parents) in &tagged_parents {
            if parents.contains(&f.parent_id) {
                f.labels.set(*t, true);
            }
        }
    }
    info!(
        "{city}: {} predictions, {} discarded off-footprint, {} insignificant",
        stats.predictions, stats.discarded, stats.insignificant
    );
    Ok((registry, stats))
}

fn typology_label(f: &BuildingFootprint) -> Option<&'static str> {
    match (f.labels.green, f.labels.solar) {
        (true, true) => Some("both"),
        (true, false) => Some("green"),
        (false, true) => Some("solar"),
        (false, false) => None,
    }
}

fn feature(id: &str, geometry: geojson::Geometry, properties: JsonObject) -> Feature {
    Feature {
        bbox: None,
        geometry: Some(geometry),
        id: Some(Id::String(id.to_string())),
        properties: Some(properties),
        foreign_members: None,
    }
}

pub fn polygon_features(r: &CityRegistry) -> Vec<Feature> {
    r.footprints
        .iter()
        .map(|f| {
            let mut props = f.properties.clone();
            props.insert("id".into(), JsonValue::from(f.id.clone()));
            if f.parent_id != f.id {
                props.insert("parent_id".into(), JsonValue::from(f.parent_id.clone()));
            }
            props.insert("green".into(), JsonValue::from(f.labels.green));
            props.insert("solar".into(), JsonValue::from(f.labels.solar));
            props.insert("area_m2".into(), JsonValue::from(f.area_m2));
            feature(&f.id, polygon_geometry(&f.geometry), props)
        })
        .collect()
}

pub fn centroid_features(r: &CityRegistry) -> Vec<Feature> {
    r.footprints
        .iter()
        .filter_map(|f| {
            let label = typology_label(f)?;
            let mut props = JsonObject::new();
            props.insert("id".into(), JsonValue::from(f.id.clone()));
            props.insert("typology".into(), JsonValue::from(label));
            Some(feature(&f.id, point_geometry(f.centroid), props))
        })
        .collect()
}

pub fn write_summary(summary: &RegistrySummary, path: &Path) -> Result<()> {
    let mut text = serde_json::to_string_pretty(summary).expect("summary serializes");
    text.push('\n');
    fs::write(path, text).map_err(|e| Error::io(path, e))
}

/// Writes the polygon layer, the centroid layer and `summary.json`.
pub fn export_registry(r: &CityRegistry, out_dir: &Path) -> Result<()> {
    fs::create_dir_all(out_dir).map_err(|e| Error::io(out_dir, e))?;
    write_features_file(&out_dir.join(POLYGONS_FILE), &polygon_features(r))?;
    write_features_file(&out_dir.join(CENTROIDS_FILE), &centroid_features(r))?;
    write_summary(&r.summary(), &out_dir.join(SUMMARY_FILE))
}

/// Reads a registry polygon layer, or any footprint file whose features carry
/// boolean `green` / `solar` properties. A numeric `area_m2` property is
/// trusted over the recomputed area. `analyzed` lists the typologies whose
/// properties are meaningful.
pub fn load_registry(city: &str, path: &Path, analyzed: &[Typology]) -> Result<(CityRegistry, Vec<String>)> {
    let fc = read_feature_collection_file(path)?;
    let report = load_footprint_collection(&fc);
    let mut fps = report.footprints;
    for f in &mut fps {
        for t in Typology::ALL {
            if let Some(v) = f.properties.get(t.as_str()) {
                let on = v
                    .as_bool()
                    .ok_or_else(|| Error::data(format!("{}: footprint {} has non-boolean {t}", path.display(), f.id)))?;
                f.labels.set(t, on);
            }
        }
        if let Some(a) = f.properties.get("area_m2").and_then(JsonValue::as_f64) {
            if a > 0.0 {
                f.area_m2 = a;
            }
        }
        for key in ["id", "parent_id", "green", "solar", "area_m2"] {
            f.properties.remove(key);
        }
    }
    Ok((CityRegistry::new(city, fps, analyzed), report.warnings))
}
