//! Slippy directory layout: `<dir>/<zoom>/<x>/<y>.<ext>`.
//!
//! Masks for a typology live under `<mask_dir>/<typology>/`.

use std::path::{Path, PathBuf};

use crate::error::{Error, Result};
use crate::tilegrid::TileId;
use crate::Typology;

pub const IMAGERY_EXTENSIONS: [&str; 3] = ["png", "jpg", "jpeg"];

pub fn tile_path(dir: &Path, t: TileId, ext: &str) -> PathBuf {
    dir.join(t.zoom.to_string())
        .join(t.x.to_string())
        .join(format!("{}.{ext}", t.y))
}

pub fn mask_dir(mask_root: &Path, typology: Typology) -> PathBuf {
    mask_root.join(typology.as_str())
}

pub fn mask_path(mask_root: &Path, typology: Typology, t: TileId) -> PathBuf {
    tile_path(&mask_dir(mask_root, typology), t, "png")
}

fn numeric_entries(dir: &Path) -> Result<Vec<(u32, PathBuf)>> {
    let mut out = Vec::new();
    for entry in std::fs::read_dir(dir).map_err(|e| Error::io(dir, e))? {
        let entry = entry.map_err(|e| Error::io(dir, e))?;
        let path = entry.path();
        if let Some(n) = path.file_name().and_then(|s| s.to_str()).and_then(|s| s.parse().ok()) {
            if path.is_dir() {
                out.push((n, path));
            }
        }
    }
    Ok(out)
}

/// Every tile file under `dir` at `zoom` with one of `exts`, sorted by tile.
/// A tile present with several extensions keeps the first in `exts` order.
/// A missing directory lists as empty.
pub fn list_tiles(dir: &Path, zoom: u8, exts: &[&str]) -> Result<Vec<(TileId, PathBuf)>> {
    let zdir = dir.join(zoom.to_string());
    if !zdir.is_dir() {
        return Ok(Vec::new());
    }
    let mut out: Vec<(TileId, usize, PathBuf)> = Vec::new();
    for (x, xdir) in numeric_entries(&zdir)? {
        for entry in std::fs::read_dir(&xdir).map_err(|e| Error::io(&xdir, e))? {
            let path = entry.map_err(|e| Error::io(&xdir, e))?.path();
            let (Some(stem), Some(ext)) = (
                path.file_stem().and_then(|s| s.to_str()),
                path.extension().and_then(|s| s.to_str()),
            ) else {
                continue;
            };
            let Some(rank) = exts.iter().position(|e| e.eq_ignore_ascii_case(ext)) else {
                continue;
            };
            let Ok(y) = stem.parse::<u32>() else { continue };
            let t = TileId::new(zoom, x, y).map_err(|e| Error::data(format!("{}: {e}", path.display())))?;
            out.push((t, rank, path));
        }
    }
    out.sort();
    out.dedup_by(|b, a| a.0 == b.0);
    Ok(out.into_iter().map(|(t, _, p)| (t, p)).collect())
}
