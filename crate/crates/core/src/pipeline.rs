//! Stage runners shared by the CLI: segment, vectorize, tag, evaluate.
//!
//! Each stage reads and writes files under the configured directories, so
//! stages can be rerun or replaced independently. Output bytes never depend
//! on the worker count.

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};

use log::{info, warn};
use rayon::prelude::*;

use crate::config::PipelineConfig;
use crate::error::{Error, Result};
use crate::footprints::load_footprints_file;
use crate::geojson_io::{read_predictions, write_predictions};
use crate::layout::{list_tiles, mask_dir, mask_path, IMAGERY_EXTENSIONS};
use crate::metrics::{evaluation_report, EvaluationReport, Region, Unit};
use crate::raster::ProbabilityMask;
use crate::segment::{segment_tile, RgbTile};
use crate::tagging::{export_registry, load_registry, tag_buildings, CityRegistry, TaggingStats, POLYGONS_FILE};
use crate::vectorize::{vectorize_tiles, PredictionPolygon};
use crate::Typology;

pub fn predictions_path(out_dir: &Path, t: Typology) -> PathBuf {
    out_dir.join(format!("predictions_{t}.geojson"))
}

pub fn evaluation_path(out_dir: &Path, t: Typology, unit: Unit) -> PathBuf {
    out_dir.join("evaluation").join(format!("{t}_{}.csv", unit.as_str()))
}

/// Runs `f` on a dedicated pool with `workers` threads.
pub fn with_workers<T: Send>(workers: usize, f: impl FnOnce() -> T + Send) -> Result<T> {
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(workers.max(1))
        .build()
        .map_err(|e| Error::config(format!("cannot start {workers} workers: {e}")))?;
    Ok(pool.install(f))
}

/// Writes baseline masks for every imagery tile. Returns the tile count.
pub fn run_segment(cfg: &PipelineConfig) -> Result<usize> {
    let tiles = list_tiles(&cfg.imagery_dir, cfg.zoom, &IMAGERY_EXTENSIONS)?;
    let typologies = cfg.enabled();
    with_workers(cfg.workers, || {
        tiles.par_iter().try_for_each(|(t, path)| {
            let img = RgbTile::read(path, *t)?;
            for &typ in &typologies {
                segment_tile(&img, typ).write_png(&mask_path(&cfg.mask_dir, typ, *t))?;
            }
            Ok::<_, Error>(())
        })
    })??;
    info!("segmented {} imagery tiles", tiles.len());
    Ok(tiles.len())
}

/// Vectorizes the mask directory of every enabled typology and writes
/// `predictions_<typology>.geojson`.
pub fn run_vectorize(cfg: &PipelineConfig) -> Result<BTreeMap<Typology, Vec<PredictionPolygon>>> {
    let mut out = BTreeMap::new();
    for t in cfg.enabled() {
        let tiles = list_tiles(&mask_dir(&cfg.mask_dir, t), cfg.zoom, &["png"])?;
        if tiles.is_empty() {
            warn!("no {t} masks under {}", mask_dir(&cfg.mask_dir, t).display());
        }
        let params = cfg.typology(t).vectorize;
        let preds = with_workers(cfg.workers, || {
            let masks = tiles
                .par_iter()
                .map(|(tile, path)| ProbabilityMask::read_png(path, *tile))
                .collect::<Result<Vec<_>>>()?;
            vectorize_tiles(&masks, t, &params)
        })??;
        info!("{t}: {} prediction polygons from {} tiles", preds.len(), tiles.len());
        write_predictions(&predictions_path(&cfg.output_dir, t), &preds)?;
        out.insert(t, preds);
    }
    Ok(out)
}

/// Tags footprints from the prediction files and exports the registry.
pub fn run_tag(cfg: &PipelineConfig) -> Result<(CityRegistry, TaggingStats)> {
    let report = load_footprints_file(&cfg.footprints)?;
    info!(
        "{}: loaded {} footprints from {} features ({} skipped)",
        cfg.city,
        report.footprints.len(),
        report.features_read,
        report.warnings.len()
    );
    let mut preds = Vec::new();
    for t in cfg.enabled() {
        let path = predictions_path(&cfg.output_dir, t);
        if !path.exists() {
            return Err(Error::config(format!(
                "{} not found; run the vectorize stage first",
                path.display()
            )));
        }
        preds.extend(read_predictions(&path)?);
    }
    let (registry, stats) = with_workers(cfg.workers, || {
        tag_buildings(&cfg.city, report.footprints, &preds, &cfg.enabled(), &cfg.tagging)
    })??;
    export_registry(&registry, &cfg.output_dir)?;
    Ok((registry, stats))
}

/// A region to evaluate: its config, with the predicted registry taken from
/// the config's output directory.
pub struct LoadedRegion {
    pub name: String,
    pub area_km2: Option<f64>,
    pub predicted: CityRegistry,
    pub truth: BTreeMap<Typology, CityRegistry>,
}

pub fn load_region(cfg: &PipelineConfig) -> Result<LoadedRegion> {
    let reg_path = cfg.output_dir.join(POLYGONS_FILE);
    if !reg_path.exists() {
        return Err(Error::config(format!("{} not found; run the tag stage first", reg_path.display())));
    }
    let (predicted, _) = load_registry(&cfg.city, &reg_path, &cfg.enabled())?;
    let mut truth = BTreeMap::new();
    for (t, path) in &cfg.truth {
        let (r, warnings) = load_registry(&cfg.city, path, &[*t])?;
        for w in warnings {
            warn!("truth {}: {w}", path.display());
        }
        truth.insert(*t, r);
    }
    Ok(LoadedRegion { name: cfg.city.clone(), area_km2: cfg.area_km2, predicted, truth })
}

/// Count and area reports per typology, over every region that has truth
/// for it. Writes `evaluation/<typology>_<unit>.csv` under `out_dir`.
pub fn run_evaluate(regions: &[LoadedRegion], out_dir: &Path) -> Result<Vec<EvaluationReport>> {
    let mut reports = Vec::new();
    for t in Typology::ALL {
        let rs: Vec<Region<'_>> = regions
            .iter()
            .filter_map(|r| {
                r.truth.get(&t).map(|truth| Region {
                    name: r.name.clone(),
                    area_km2: r.area_km2,
                    predicted: &r.predicted,
                    truth,
                })
            })
            .collect();
        if rs.is_empty() {
            continue;
        }
        for unit in [Unit::Count, Unit::Area] {
            let report = evaluation_report(&rs, t, unit)?;
            report.write_csv_file(&evaluation_path(out_dir, t, unit))?;
            reports.push(report);
        }
    }
    if reports.is_empty() {
        return Err(Error::config("no ground truth configured; nothing to evaluate"));
    }
    Ok(reports)
}

#[derive(Debug, Clone)]
pub struct PipelineRun {
    pub segmented_tiles: usize,
    pub predictions: BTreeMap<Typology, usize>,
    pub registry: CityRegistry,
    pub stats: TaggingStats,
    pub evaluation: Vec<EvaluationReport>,
}

/// All stages for one city. Segmentation runs only when imagery is present,
/// so externally produced masks can be used as they are.
pub fn run_pipeline(cfg: &PipelineConfig) -> Result<PipelineRun> {
    let segmented_tiles = if list_tiles(&cfg.imagery_dir, cfg.zoom, &IMAGERY_EXTENSIONS)?.is_empty() {
        warn!("no imagery under {}; using existing masks", cfg.imagery_dir.display());
        0
    } else {
        run_segment(cfg)?
    };
    let predictions = run_vectorize(cfg)?.into_iter().map(|(t, p)| (t, p.len())).collect();
    let (registry, stats) = run_tag(cfg)?;
    let evaluation = if cfg.truth.is_empty() {
        Vec::new()
    } else {
        run_evaluate(&[load_region(cfg)?], &cfg.output_dir)?
    };
    Ok(PipelineRun { segmented_tiles, predictions, registry, stats, evaluation })
}
