//! Turns a mask that straddles two tiles into merged, georeferenced polygons.

use rooftop::raster::ProbabilityMask;
use rooftop::tilegrid::TileId;
use rooftop::vectorize::{vectorize_tiles, VectorizeParams};
use rooftop::Typology;

fn main() -> rooftop::Result<()> {
    let west = TileId::new(19, 274_450, 183_600)?;
    let east = TileId::new(19, 274_451, 183_600)?;
    // One L-shaped roof crossing the shared edge, in global pixels.
    let on = |gx: u32, gy: u32| (200..300).contains(&gx) && (40..80).contains(&gy) || (200..230).contains(&gx) && (80..140).contains(&gy);
    let masks = [west, east]
        .iter()
        .enumerate()
        .map(|(i, &t)| {
            let v = (0..256 * 256u32).map(|p| if on(i as u32 * 256 + p % 256, p / 256) { 1.0 } else { 0.0 }).collect();
            ProbabilityMask::new(t, 256, 256, v)
        })
        .collect::<rooftop::Result<Vec<_>>>()?;
    let polys = vectorize_tiles(&masks, Typology::Solar, &VectorizeParams::default())?;
    for p in &polys {
        let tiles: Vec<String> = p.source_tiles.iter().map(|t| t.to_string()).collect();
        println!(
            "{} polygon: {} vertices, {} px, {:.1} m², compactness {:.3}, tiles {}",
            p.typology,
            p.geometry.exterior.len(),
            p.pixel_area,
            p.geo_area,
            p.geometry.compactness(),
            tiles.join(" ")
        );
    }
    Ok(())
}
