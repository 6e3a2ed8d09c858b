//! GeoJSON reading and deterministic writing.

use std::fs::File;
use std::io::{BufReader, BufWriter, Read, Write};
use std::path::Path;

use geojson::{feature::Id, Feature, FeatureCollection, GeoJson, Geometry, GeometryValue, JsonObject, JsonValue, Position};

use crate::error::{Error, Result};
use crate::geometry::GeoPolygon;
use crate::tilegrid::{GeoPoint, TileId};
use crate::vectorize::PredictionPolygon;
use crate::Typology;

/// Raw polygon rings as read from a feature, before validation.
pub type RawPolygon = Vec<Vec<GeoPoint>>;

pub fn read_feature_collection(reader: impl Read) -> Result<FeatureCollection> {
    let gj = GeoJson::from_reader(reader).map_err(|e| Error::data(format!("malformed GeoJSON: {e}")))?;
    match gj {
        GeoJson::FeatureCollection(fc) => Ok(fc),
        GeoJson::Feature(f) => Ok(FeatureCollection::new([f])),
        GeoJson::Geometry(_) => Err(Error::data("expected a FeatureCollection, found a bare geometry")),
    }
}

pub fn read_feature_collection_file(path: &Path) -> Result<FeatureCollection> {
    let file = File::open(path).map_err(|e| Error::io(path, e))?;
    read_feature_collection(BufReader::new(file)).map_err(|e| match e {
        Error::Data(msg) => Error::data(format!("{}: {msg}", path.display())),
        other => other,
    })
}

/// Writes a FeatureCollection with one feature per line. Output bytes depend
/// only on the features, so identical inputs give identical files.
pub fn write_features(out: &mut impl Write, features: &[Feature]) -> std::io::Result<()> {
    out.write_all(b"{\"type\":\"FeatureCollection\",\"features\":[")?;
    for (i, f) in features.iter().enumerate() {
        out.write_all(if i == 0 { b"\n" } else { b",\n" })?;
        serde_json::to_writer(&mut *out, f)?;
    }
    out.write_all(b"\n]}\n")
}

pub fn write_features_file(path: &Path, features: &[Feature]) -> Result<()> {
    if let Some(dir) = path.parent() {
        std::fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    }
    let file = File::create(path).map_err(|e| Error::io(path, e))?;
    let mut w = BufWriter::new(file);
    write_features(&mut w, features).map_err(|e| Error::io(path, e))?;
    w.flush().map_err(|e| Error::io(path, e))
}

fn ring_positions(ring: &[GeoPoint]) -> Vec<Position> {
    ring.iter().map(|p| Position::from([p.lon, p.lat])).collect()
}

pub fn polygon_geometry(p: &GeoPolygon) -> Geometry {
    let rings = p.rings().map(|r| ring_positions(r)).collect::<Vec<_>>();
    Geometry::new(GeometryValue::Polygon { coordinates: rings })
}

pub fn point_geometry(p: GeoPoint) -> Geometry {
    Geometry::new(GeometryValue::Point {
        coordinates: Position::from([p.lon, p.lat]),
    })
}

fn positions_ring(ring: &[Position]) -> Result<Vec<GeoPoint>> {
    ring.iter()
        .map(|pos| {
            if pos.len() < 2 {
                return Err(Error::data("position with fewer than 2 coordinates"));
            }
            Ok(GeoPoint { lon: pos[0], lat: pos[1] })
        })
        .collect()
}

/// Polygon parts of a geometry: one for Polygon, several for MultiPolygon,
/// `None` for other geometry types.
pub fn polygon_parts(g: &Geometry) -> Result<Option<Vec<RawPolygon>>> {
    let to_raw = |rings: &Vec<Vec<Position>>| -> Result<RawPolygon> {
        rings.iter().map(|r| positions_ring(r)).collect()
    };
    match &g.value {
        GeometryValue::Polygon { coordinates } => Ok(Some(vec![to_raw(coordinates)?])),
        GeometryValue::MultiPolygon { coordinates } => {
            Ok(Some(coordinates.iter().map(to_raw).collect::<Result<_>>()?))
        }
        _ => Ok(None),
    }
}

/// Splits raw rings into a validated polygon, or `None` if the exterior is degenerate.
pub fn raw_to_polygon(raw: RawPolygon) -> Option<GeoPolygon> {
    let mut rings = raw.into_iter();
    let exterior = rings.next()?;
    GeoPolygon::normalized(exterior, rings.collect())
}

/// Prediction polygons as features with `typology`, `pixel_area`,
/// `geo_area_m2` and `source_tiles` properties.
pub fn prediction_features(preds: &[PredictionPolygon]) -> Vec<Feature> {
    preds
        .iter()
        .enumerate()
        .map(|(i, p)| {
            let mut props = JsonObject::new();
            props.insert("typology".into(), JsonValue::from(p.typology.as_str()));
            props.insert("pixel_area".into(), JsonValue::from(p.pixel_area));
            props.insert("geo_area_m2".into(), JsonValue::from(p.geo_area));
            let tiles: Vec<JsonValue> = p.source_tiles.iter().map(|t| JsonValue::from(t.to_string())).collect();
            props.insert("source_tiles".into(), JsonValue::from(tiles));
            Feature {
                bbox: None,
                geometry: Some(polygon_geometry(&p.geometry)),
                id: Some(Id::String(format!("{}-{i}", p.typology))),
                properties: Some(props),
                foreign_members: None,
            }
        })
        .collect()
}

pub fn write_predictions(path: &Path, preds: &[PredictionPolygon]) -> Result<()> {
    write_features_file(path, &prediction_features(preds))
}

/// Reads a file written by [`write_predictions`]. Geometry is kept as written.
pub fn read_predictions(path: &Path) -> Result<Vec<PredictionPolygon>> {
    let fc = read_feature_collection_file(path)?;
    let bad = |n: usize, what: &str| Error::data(format!("{}: prediction {n}: {what}", path.display()));
    let mut out = Vec::with_capacity(fc.features.len());
    for (n, f) in fc.features.iter().enumerate() {
        let typology: Typology = f
            .property("typology")
            .and_then(JsonValue::as_str)
            .ok_or_else(|| bad(n, "missing typology"))?
            .parse()?;
        let geom = f.geometry.as_ref().ok_or_else(|| bad(n, "no geometry"))?;
        let rings = match &geom.value {
            GeometryValue::Polygon { coordinates } => coordinates
                .iter()
                .map(|r| positions_ring(r))
                .collect::<Result<Vec<_>>>()?,
            _ => return Err(bad(n, "geometry is not a Polygon")),
        };
        let mut rings = rings.into_iter();
        let exterior = rings.next().ok_or_else(|| bad(n, "empty polygon"))?;
        let geometry = GeoPolygon { exterior, holes: rings.collect() };
        let source_tiles = f
            .property("source_tiles")
            .and_then(JsonValue::as_array)
            .map(|a| {
                a.iter()
                    .map(|v| v.as_str().ok_or_else(|| bad(n, "bad tile id"))?.parse::<TileId>())
                    .collect::<Result<Vec<_>>>()
            })
            .transpose()?
            .unwrap_or_default();
        let geo_area = f
            .property("geo_area_m2")
            .and_then(JsonValue::as_f64)
            .unwrap_or_else(|| geometry.area_m2());
        out.push(PredictionPolygon {
            typology,
            pixel_area: f.property("pixel_area").and_then(JsonValue::as_u64).unwrap_or(0),
            geo_area,
            geometry,
            source_tiles,
        });
    }
    Ok(out)
}
