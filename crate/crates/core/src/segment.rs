//! Colour-rule mask provider. It stands in for a trained segmentation model
//! so the full pipeline can run on painted fixtures; detection quality on
//! real imagery is not a goal.

use std::path::Path;

use image::RgbImage;

use crate::error::{Error, Result};
use crate::raster::ProbabilityMask;
use crate::tilegrid::TileId;
use crate::Typology;

/// Solar panel colour the solar rule is centred on.
pub const PANEL_RGB: [u8; 3] = [40, 44, 56];
/// A vegetation colour that scores 1 under the green rule.
pub const VEGETATION_RGB: [u8; 3] = [60, 140, 50];

/// An 8-bit RGB imagery tile, row-major from the northwest corner.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct RgbTile {
    pub tile: TileId,
    pub width: u32,
    pub height: u32,
    pixels: Vec<u8>,
}

impl RgbTile {
    pub fn new(tile: TileId, width: u32, height: u32, pixels: Vec<u8>) -> Result<Self> {
        if pixels.len() != 3 * (width * height) as usize {
            return Err(Error::data(format!("imagery tile {tile} has the wrong number of bytes")));
        }
        Ok(RgbTile { tile, width, height, pixels })
    }

    pub fn filled(tile: TileId, width: u32, height: u32, rgb: [u8; 3]) -> Self {
        let pixels = rgb.iter().copied().cycle().take(3 * (width * height) as usize).collect();
        RgbTile { tile, width, height, pixels }
    }

    pub fn get(&self, x: u32, y: u32) -> [u8; 3] {
        let i = 3 * (y * self.width + x) as usize;
        [self.pixels[i], self.pixels[i + 1], self.pixels[i + 2]]
    }

    pub fn set(&mut self, x: u32, y: u32, rgb: [u8; 3]) {
        let i = 3 * (y * self.width + x) as usize;
        self.pixels[i..i + 3].copy_from_slice(&rgb);
    }

    /// Reads a PNG or JPEG tile.
    pub fn read(path: &Path, tile: TileId) -> Result<Self> {
        let img = image::open(path)
            .map_err(|source| Error::Image { path: path.to_path_buf(), source })?
            .into_rgb8();
        let (w, h) = img.dimensions();
        Self::new(tile, w, h, img.into_raw())
    }

    pub fn write_png(&self, path: &Path) -> Result<()> {
        if let Some(dir) = path.parent() {
            std::fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
        }
        let img = RgbImage::from_raw(self.width, self.height, self.pixels.clone()).expect("buffer size checked");
        img.save_with_format(path, image::ImageFormat::Png)
            .map_err(|source| match source {
                image::ImageError::IoError(e) => Error::io(path, e),
                source => Error::Image { path: path.to_path_buf(), source },
            })
    }
}

fn unit(rgb: [u8; 3]) -> [f32; 3] {
    rgb.map(|c| f32::from(c) / 255.0)
}

fn luminance(rgb: [u8; 3]) -> f32 {
    let [r, g, b] = unit(rgb);
    0.299 * r + 0.587 * g + 0.114 * b
}

/// (hue degrees, saturation, value) in HSV.
fn hsv(rgb: [u8; 3]) -> (f32, f32, f32) {
    let [r, g, b] = unit(rgb);
    let max = r.max(g).max(b);
    let min = r.min(g).min(b);
    let d = max - min;
    let s = if max > 0.0 { d / max } else { 0.0 };
    let h = if d == 0.0 {
        0.0
    } else if max == r {
        60.0 * ((g - b) / d).rem_euclid(6.0)
    } else if max == g {
        60.0 * ((b - r) / d + 2.0)
    } else {
        60.0 * ((r - g) / d + 4.0)
    };
    (h, s, max)
}

fn ramp(x: f32, lo: f32, hi: f32) -> f32 {
    ((x - lo) / (hi - lo)).clamp(0.0, 1.0)
}

fn green_score(rgb: [u8; 3]) -> f32 {
    let (h, s, v) = hsv(rgb);
    let hue = ramp(h, 70.0, 80.0).min(1.0 - ramp(h, 160.0, 170.0));
    hue * ramp(s, 0.15, 0.25) * ramp(v, 0.15, 0.2)
}

/// Mean absolute luminance step to the 4-neighbours, scaled to [0, 1].
fn edge_density(img: &RgbTile, x: u32, y: u32) -> f32 {
    let here = luminance(img.get(x, y));
    let mut sum = 0.0;
    let mut n = 0.0;
    for (dx, dy) in [(-1i64, 0i64), (1, 0), (0, -1), (0, 1)] {
        let (nx, ny) = (i64::from(x) + dx, i64::from(y) + dy);
        if nx >= 0 && ny >= 0 && nx < i64::from(img.width) && ny < i64::from(img.height) {
            sum += (luminance(img.get(nx as u32, ny as u32)) - here).abs();
            n += 1.0;
        }
    }
    if n == 0.0 {
        0.0
    } else {
        (sum / n / 0.1).min(1.0)
    }
}

fn solar_score(img: &RgbTile, x: u32, y: u32) -> f32 {
    let rgb = img.get(x, y);
    let (_, s, _) = hsv(rgb);
    if luminance(rgb) >= 0.45 || s >= 0.5 {
        return 0.0;
    }
    let dist = rgb
        .iter()
        .zip(PANEL_RGB)
        .map(|(&a, b)| (f32::from(a) - f32::from(b)).powi(2))
        .sum::<f32>()
        .sqrt();
    let colour = (1.0 - dist / 60.0).clamp(0.0, 1.0);
    colour * (0.7 + 0.3 * edge_density(img, x, y))
}

/// Per-pixel score for one typology. Green follows a vegetation hue band
/// with moderate saturation; solar favours dark, unsaturated, panel-coloured
/// pixels and rises with local edge density.
pub fn segment_tile(img: &RgbTile, t: Typology) -> ProbabilityMask {
    let mut values = Vec::with_capacity((img.width * img.height) as usize);
    for y in 0..img.height {
        for x in 0..img.width {
            values.push(match t {
                Typology::Green => green_score(img.get(x, y)),
                Typology::Solar => solar_score(img, x, y),
            });
        }
    }
    ProbabilityMask::new(img.tile, img.width, img.height, values).expect("scores lie in [0, 1]")
}

#[cfg(test)]
mod tests {
    use super::*;

    fn tile() -> TileId {
        TileId::new(19, 100, 100).unwrap()
    }

    #[test]
    fn grey_scores_low() {
        let img = RgbTile::filled(tile(), 256, 256, [128, 128, 128]);
        for t in Typology::ALL {
            assert!(segment_tile(&img, t).values().iter().all(|&v| v < 0.5));
        }
    }

    #[test]
    fn panel_rectangle_detected() {
        let mut img = RgbTile::filled(tile(), 256, 256, [128, 128, 128]);
        for y in 50..80 {
            for x in 40..100 {
                img.set(x, y, PANEL_RGB);
            }
        }
        let m = segment_tile(&img, Typology::Solar);
        let mut hits = 0;
        for y in 50..80 {
            for x in 40..100 {
                hits += usize::from(m.get(x, y) >= 0.5);
            }
        }
        assert!(hits as f64 >= 0.9 * 1800.0);
        assert_eq!(segment_tile(&img, Typology::Solar), m);
        assert!(segment_tile(&img, Typology::Green).values().iter().all(|&v| v < 0.5));
    }

    #[test]
    fn vegetation_scores_one() {
        let img = RgbTile::filled(tile(), 8, 8, VEGETATION_RGB);
        assert!(segment_tile(&img, Typology::Green).values().iter().all(|&v| v == 1.0));
        assert!(segment_tile(&img, Typology::Solar).values().iter().all(|&v| v < 0.5));
    }

    #[test]
    fn hsv_primaries() {
        assert_eq!(hsv([255, 0, 0]).0, 0.0);
        assert_eq!(hsv([0, 255, 0]).0, 120.0);
        assert_eq!(hsv([0, 0, 255]).0, 240.0);
    }
}
