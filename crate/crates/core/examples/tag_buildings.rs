//! Tags footprints from prediction polygons and prints the summary.

use rooftop::footprints::BuildingFootprint;
use rooftop::geometry::GeoPolygon;
use rooftop::tagging::{tag_buildings, TaggingParams};
use rooftop::tilegrid::GeoPoint;
use rooftop::vectorize::PredictionPolygon;
use rooftop::Typology;

fn rect(lon: f64, lat: f64, w: f64, h: f64) -> GeoPolygon {
    let p = GeoPoint::new;
    GeoPolygon::normalized(vec![p(lon, lat), p(lon + w, lat), p(lon + w, lat + h), p(lon, lat + h)], vec![])
        .expect("valid rectangle")
}

fn prediction(t: Typology, g: GeoPolygon) -> PredictionPolygon {
    PredictionPolygon { typology: t, geo_area: g.area_m2(), geometry: g, source_tiles: vec![], pixel_area: 0 }
}

fn main() -> rooftop::Result<()> {
    let d = 2e-4;
    let footprints = (0..4)
        .map(|i| BuildingFootprint::new(format!("b{i}"), rect(8.54 + i as f64 * 1.5 * d, 47.37, d, d)))
        .collect();
    let predictions = vec![
        // covers most of b0
        prediction(Typology::Green, rect(8.54 + 0.1 * d, 47.37 + 0.1 * d, 0.8 * d, 0.8 * d)),
        // a thin sliver on b1: too elongated
        prediction(Typology::Green, rect(8.54 + 1.5 * d, 47.37, d, 0.01 * d)),
        // panels on b2
        prediction(Typology::Solar, rect(8.54 + 3.2 * d, 47.37 + 0.2 * d, 0.3 * d, 0.2 * d)),
        // off any roof
        prediction(Typology::Solar, rect(8.54, 47.38, d, d)),
    ];
    let (registry, stats) = tag_buildings("Demo", footprints, &predictions, &Typology::ALL, &TaggingParams::default())?;
    for f in &registry.footprints {
        println!("{}: green={} solar={} area {:.0} m²", f.id, f.labels.green, f.labels.solar, f.area_m2);
    }
    println!("{stats:?}");
    println!("{}", serde_json::to_string_pretty(&registry.summary()).expect("serializable"));
    Ok(())
}
