//! Per-tile mask operations: thresholding, connected components, speckle
//! removal and mean IoU.

use std::path::Path;

use image::{GrayImage, Luma};

use crate::error::{Error, Result};
use crate::tilegrid::TileId;

/// Model output: per-pixel probabilities, row-major from the northwest corner.
#[derive(Debug, Clone, PartialEq)]
pub struct ProbabilityMask {
    pub tile: TileId,
    pub width: u32,
    pub height: u32,
    values: Vec<f32>,
}

impl ProbabilityMask {
    pub fn new(tile: TileId, width: u32, height: u32, values: Vec<f32>) -> Result<Self> {
        if values.len() != (width * height) as usize {
            return Err(Error::data(format!(
                "mask for {tile} has {} values, expected {}x{}",
                values.len(),
                width,
                height
            )));
        }
        if let Some(v) = values.iter().find(|v| !(0.0..=1.0).contains(*v)) {
            return Err(Error::data(format!("probability {v} outside [0, 1] in {tile}")));
        }
        Ok(ProbabilityMask {
            tile,
            width,
            height,
            values,
        })
    }

    pub fn filled(tile: TileId, width: u32, height: u32, value: f32) -> Result<Self> {
        Self::new(tile, width, height, vec![value; (width * height) as usize])
    }

    pub fn values(&self) -> &[f32] {
        &self.values
    }

    pub fn get(&self, x: u32, y: u32) -> f32 {
        self.values[(y * self.width + x) as usize]
    }

    /// Reads an 8-bit single-channel PNG; each pixel becomes `value / 255`.
    pub fn read_png(path: &Path, tile: TileId) -> Result<Self> {
        let img = image::open(path)
            .map_err(|source| Error::Image {
                path: path.to_path_buf(),
                source,
            })?
            .into_luma8();
        let values = img.pixels().map(|p| f32::from(p.0[0]) / 255.0).collect();
        Self::new(tile, img.width(), img.height(), values)
    }

    pub fn write_png(&self, path: &Path) -> Result<()> {
        let img = GrayImage::from_fn(self.width, self.height, |x, y| {
            Luma([(self.get(x, y) * 255.0).round() as u8])
        });
        save_gray(&img, path)
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct BinaryMask {
    pub tile: TileId,
    pub width: u32,
    pub height: u32,
    data: Vec<u8>,
}

impl BinaryMask {
    pub fn new(tile: TileId, width: u32, height: u32, data: Vec<u8>) -> Result<Self> {
        if data.len() != (width * height) as usize {
            return Err(Error::data(format!(
                "binary mask for {tile} has {} values, expected {}x{}",
                data.len(),
                width,
                height
            )));
        }
        if data.iter().any(|&v| v > 1) {
            return Err(Error::data("binary mask values must be 0 or 1"));
        }
        Ok(BinaryMask {
            tile,
            width,
            height,
            data,
        })
    }

    pub fn empty(tile: TileId, width: u32, height: u32) -> Self {
        BinaryMask {
            tile,
            width,
            height,
            data: vec![0; (width * height) as usize],
        }
    }

    pub fn data(&self) -> &[u8] {
        &self.data
    }

    #[inline]
    pub fn get(&self, x: u32, y: u32) -> bool {
        self.data[(y * self.width + x) as usize] != 0
    }

    /// Like [`get`](Self::get) but treats out-of-range coordinates as background.
    #[inline]
    pub fn get_or_bg(&self, x: i64, y: i64) -> bool {
        x >= 0
            && y >= 0
            && x < i64::from(self.width)
            && y < i64::from(self.height)
            && self.get(x as u32, y as u32)
    }

    pub fn set(&mut self, x: u32, y: u32, on: bool) {
        self.data[(y * self.width + x) as usize] = u8::from(on);
    }

    pub fn count(&self) -> usize {
        self.data.iter().filter(|&&v| v != 0).count()
    }

    /// Reads a PNG where any nonzero pixel is foreground.
    pub fn read_png(path: &Path, tile: TileId) -> Result<Self> {
        let img = image::open(path)
            .map_err(|source| Error::Image {
                path: path.to_path_buf(),
                source,
            })?
            .into_luma8();
        let data = img.pixels().map(|p| u8::from(p.0[0] != 0)).collect();
        Self::new(tile, img.width(), img.height(), data)
    }

    /// Writes `{0, 255}` single-channel PNG.
    pub fn write_png(&self, path: &Path) -> Result<()> {
        let img = GrayImage::from_fn(self.width, self.height, |x, y| {
            Luma([if self.get(x, y) { 255 } else { 0 }])
        });
        save_gray(&img, path)
    }
}

fn save_gray(img: &GrayImage, path: &Path) -> Result<()> {
    if let Some(dir) = path.parent() {
        std::fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    }
    img.save_with_format(path, image::ImageFormat::Png)
        .map_err(|source| match source {
            image::ImageError::IoError(e) => Error::io(path, e),
            source => Error::Image {
                path: path.to_path_buf(),
                source,
            },
        })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, serde::Serialize, serde::Deserialize)]
pub enum Connectivity {
    Four,
    #[default]
    Eight,
}

impl Connectivity {
    pub fn from_count(n: u8) -> Result<Self> {
        match n {
            4 => Ok(Connectivity::Four),
            8 => Ok(Connectivity::Eight),
            _ => Err(Error::config(format!("connectivity must be 4 or 8, got {n}"))),
        }
    }
}

/// Labelled foreground components. Ids are contiguous `1..=k` in order of
/// first appearance in a row-major scan; 0 is background.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ComponentSet {
    pub tile: TileId,
    pub width: u32,
    pub height: u32,
    pub connectivity: Connectivity,
    labels: Vec<u32>,
    sizes: Vec<usize>,
}

impl ComponentSet {
    pub fn labels(&self) -> &[u32] {
        &self.labels
    }

    pub fn label(&self, x: u32, y: u32) -> u32 {
        self.labels[(y * self.width + x) as usize]
    }

    pub fn count(&self) -> usize {
        self.sizes.len()
    }

    /// Pixel count of component `id` (1-based).
    pub fn size(&self, id: u32) -> usize {
        self.sizes[id as usize - 1]
    }

    pub fn sizes(&self) -> &[usize] {
        &self.sizes
    }
}

/// Pixels with value `>= t` become foreground.
pub fn threshold(m: &ProbabilityMask, t: f32) -> Result<BinaryMask> {
    if !(t > 0.0 && t < 1.0) {
        return Err(Error::domain(format!("threshold {t} must lie in (0, 1)")));
    }
    let data = m.values.iter().map(|&v| u8::from(v >= t)).collect();
    Ok(BinaryMask {
        tile: m.tile,
        width: m.width,
        height: m.height,
        data,
    })
}

fn find(parent: &mut [u32], mut x: u32) -> u32 {
    while parent[x as usize] != x {
        let p = parent[x as usize];
        parent[x as usize] = parent[p as usize];
        x = p;
    }
    x
}

fn union(parent: &mut [u32], a: u32, b: u32) {
    let (ra, rb) = (find(parent, a), find(parent, b));
    if ra != rb {
        let (lo, hi) = if ra < rb { (ra, rb) } else { (rb, ra) };
        parent[hi as usize] = lo;
    }
}

/// Two-pass union-find labelling.
pub fn connected_components(b: &BinaryMask, connectivity: Connectivity) -> ComponentSet {
    let (w, h) = (b.width, b.height);
    let mut provisional = vec![0u32; (w * h) as usize];
    let mut parent: Vec<u32> = vec![0];
    let back: &[(i64, i64)] = match connectivity {
        Connectivity::Four => &[(-1, 0), (0, -1)],
        Connectivity::Eight => &[(-1, 0), (-1, -1), (0, -1), (1, -1)],
    };

    for y in 0..h {
        for x in 0..w {
            if !b.get(x, y) {
                continue;
            }
            let mut current = 0u32;
            for &(dx, dy) in back {
                let (nx, ny) = (i64::from(x) + dx, i64::from(y) + dy);
                if !b.get_or_bg(nx, ny) {
                    continue;
                }
                let l = provisional[(ny as u32 * w + nx as u32) as usize];
                if current == 0 {
                    current = l;
                } else if l != current {
                    union(&mut parent, current, l);
                }
            }
            if current == 0 {
                current = parent.len() as u32;
                parent.push(current);
            }
            provisional[(y * w + x) as usize] = current;
        }
    }

    // resolve roots, numbering them in scan order of first appearance
    let mut final_id = vec![0u32; parent.len()];
    let mut sizes = Vec::new();
    let mut labels = vec![0u32; (w * h) as usize];
    for (i, l) in provisional.iter().enumerate() {
        if *l == 0 {
            continue;
        }
        let root = find(&mut parent, *l);
        if final_id[root as usize] == 0 {
            sizes.push(0);
            final_id[root as usize] = sizes.len() as u32;
        }
        let id = final_id[root as usize];
        labels[i] = id;
        sizes[id as usize - 1] += 1;
    }

    ComponentSet {
        tile: b.tile,
        width: w,
        height: h,
        connectivity,
        labels,
        sizes,
    }
}

/// Zeroes every component smaller than `min_pixels`.
pub fn despeckle(c: &ComponentSet, min_pixels: usize) -> BinaryMask {
    let data = c
        .labels
        .iter()
        .map(|&l| u8::from(l != 0 && c.sizes[l as usize - 1] >= min_pixels))
        .collect();
    BinaryMask {
        tile: c.tile,
        width: c.width,
        height: c.height,
        data,
    }
}

/// IoU of one pair; an empty union counts as perfect agreement.
pub fn iou(pred: &BinaryMask, truth: &BinaryMask) -> Result<f64> {
    if pred.width != truth.width || pred.height != truth.height {
        return Err(Error::domain(format!(
            "mask size mismatch: {}x{} vs {}x{}",
            pred.width, pred.height, truth.width, truth.height
        )));
    }
    let (mut inter, mut uni) = (0u64, 0u64);
    for (&p, &t) in pred.data.iter().zip(&truth.data) {
        inter += u64::from(p & t);
        uni += u64::from(p | t);
    }
    Ok(if uni == 0 {
        1.0
    } else {
        inter as f64 / uni as f64
    })
}

pub fn mean_iou(pairs: &[(BinaryMask, BinaryMask)]) -> Result<f64> {
    if pairs.is_empty() {
        return Err(Error::domain("mean IoU of an empty list"));
    }
    let mut sum = 0.0;
    for (p, t) in pairs {
        sum += iou(p, t)?;
    }
    Ok(sum / pairs.len() as f64)
}

/// Reference mIoU values reported for the trained segmentation models.
/// Documentation only; nothing in this crate reproduces them.
pub mod reported {
    pub const SOLAR_MIOU: f64 = 0.784;
    pub const GREEN_MIOU: f64 = 0.396;
}

#[cfg(test)]
mod tests {
    use super::*;

    fn tile() -> TileId {
        TileId::new(19, 100, 100).unwrap()
    }

    fn mask_from(rows: &[&str]) -> BinaryMask {
        let h = rows.len() as u32;
        let w = rows[0].len() as u32;
        let data = rows
            .iter()
            .flat_map(|r| r.bytes().map(|c| u8::from(c == b'#')))
            .collect();
        BinaryMask::new(tile(), w, h, data).unwrap()
    }

    #[test]
    fn threshold_is_inclusive() {
        let m = ProbabilityMask::new(tile(), 3, 1, vec![0.49, 0.50, 0.51]).unwrap();
        assert_eq!(threshold(&m, 0.5).unwrap().data(), &[0, 1, 1]);
        let zeros = ProbabilityMask::filled(tile(), 4, 4, 0.0).unwrap();
        assert_eq!(threshold(&zeros, 0.5).unwrap().count(), 0);
        let ones = ProbabilityMask::filled(tile(), 4, 4, 1.0).unwrap();
        assert_eq!(threshold(&ones, 0.5).unwrap().count(), 16);
    }

    #[test]
    fn threshold_domain() {
        let m = ProbabilityMask::filled(tile(), 2, 2, 0.3).unwrap();
        assert!(threshold(&m, 0.0).is_err());
        assert!(threshold(&m, 1.0).is_err());
    }

    #[test]
    fn out_of_range_probability_rejected() {
        assert!(ProbabilityMask::new(tile(), 1, 1, vec![1.5]).is_err());
    }

    #[test]
    fn two_squares() {
        let m = mask_from(&[
            "###.....", "###.....", "###.....", "........", ".....###", ".....###", ".....###",
        ]);
        let c = connected_components(&m, Connectivity::Eight);
        assert_eq!(c.count(), 2);
        assert_eq!(c.sizes(), &[9, 9]);
    }

    #[test]
    fn diagonal_connectivity() {
        let m = mask_from(&["#.", ".#"]);
        assert_eq!(connected_components(&m, Connectivity::Four).count(), 2);
        assert_eq!(connected_components(&m, Connectivity::Eight).count(), 1);
    }

    #[test]
    fn u_shape_merges_in_second_pass() {
        let m = mask_from(&["#.#", "#.#", "###"]);
        let c = connected_components(&m, Connectivity::Four);
        assert_eq!(c.count(), 1);
        assert_eq!(c.size(1), 7);
    }

    #[test]
    fn despeckle_size_filter() {
        let mut rows = vec!["..........".to_string(); 14];
        for r in rows.iter_mut().take(10) {
            *r = "##########".into();
        }
        rows[12] = "#####.....".into();
        let refs: Vec<&str> = rows.iter().map(String::as_str).collect();
        let m = mask_from(&refs);
        let c = connected_components(&m, Connectivity::Eight);
        assert_eq!(c.sizes(), &[100, 5]);
        let d = despeckle(&c, 20);
        assert_eq!(d.count(), 100);
        assert_eq!(despeckle(&c, 0), m);
    }

    #[test]
    fn iou_cases() {
        let a = mask_from(&["##..", "##.."]);
        assert_eq!(mean_iou(&[(a.clone(), a.clone())]).unwrap(), 1.0);
        let b = mask_from(&["..##", "..##"]);
        assert_eq!(mean_iou(&[(a.clone(), b)]).unwrap(), 0.0);
        let r1 = mask_from(&["##."]);
        let r2 = mask_from(&[".##"]);
        assert!((mean_iou(&[(r1, r2)]).unwrap() - 1.0 / 3.0).abs() < 1e-15);
        let e = mask_from(&["...."]);
        assert_eq!(iou(&e, &e).unwrap(), 1.0);
        assert!(mean_iou(&[]).is_err());
    }

    #[test]
    fn png_roundtrip() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("19/100/100.png");
        let m = ProbabilityMask::new(tile(), 2, 2, vec![0.0, 1.0, 128.0 / 255.0, 0.2]).unwrap();
        m.write_png(&path).unwrap();
        let back = ProbabilityMask::read_png(&path, tile()).unwrap();
        assert_eq!(back.values()[..3], m.values()[..3]);
        assert_eq!(back.values()[3], 51.0 / 255.0);

        let b = mask_from(&["#.", ".#"]);
        let bp = dir.path().join("b.png");
        b.write_png(&bp).unwrap();
        assert_eq!(BinaryMask::read_png(&bp, tile()).unwrap(), b);
    }
}
