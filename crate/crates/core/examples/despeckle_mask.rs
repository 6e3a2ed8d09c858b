//! Thresholds a probability mask and removes small components.

use rooftop::raster::{connected_components, despeckle, threshold, Connectivity, ProbabilityMask};
use rooftop::tilegrid::TileId;

fn main() -> rooftop::Result<()> {
    let tile = TileId::new(19, 274_450, 183_600)?;
    let (w, h) = (64u32, 64u32);
    let values = (0..w * h)
        .map(|i| {
            let (x, y) = (i % w, i / w);
            let roof = (10..40).contains(&x) && (12..30).contains(&y);
            let speck = (50..53).contains(&x) && (50..52).contains(&y);
            if roof { 0.9 } else if speck { 0.7 } else { 0.1 }
        })
        .collect();
    let mask = ProbabilityMask::new(tile, w, h, values)?;
    let binary = threshold(&mask, 0.5)?;
    let comps = connected_components(&binary, Connectivity::Eight);
    println!("{} pixels in {} components", binary.count(), comps.count());
    let clean = despeckle(&comps, 20);
    println!("after despeckle(20): {} pixels", clean.count());
    Ok(())
}
