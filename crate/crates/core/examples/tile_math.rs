//! Slippy-tile lookups for a point in Zurich.

use rooftop::tilegrid::{ground_resolution, pixel_to_geo, tile_bounds, tile_of, GeoPoint};

fn main() -> rooftop::Result<()> {
    let p = GeoPoint::new(8.5417, 47.3769);
    for zoom in [12, 16, 19] {
        let t = tile_of(p, zoom)?;
        let b = tile_bounds(t);
        println!(
            "z{zoom}: tile {t}, bounds [{:.6}, {:.6}, {:.6}, {:.6}], {:.3} m/px",
            b.west,
            b.south,
            b.east,
            b.north,
            ground_resolution(p.lat, zoom)
        );
    }
    let t = tile_of(p, 19)?;
    let c = pixel_to_geo(t, 128.0, 128.0, 256);
    println!("centre of {t}: {:.7}, {:.7}", c.lon, c.lat);
    for child in t.children()? {
        println!("  child {child}");
    }
    Ok(())
}
