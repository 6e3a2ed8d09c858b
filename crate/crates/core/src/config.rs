//! Per-city TOML configuration with command-line overrides.
//!
//! ```toml
//! city = "Zurich"
//! imagery_dir = "imagery"          # <z>/<x>/<y>.png|jpg
//! mask_dir = "masks"               # <typology>/<z>/<x>/<y>.png
//! footprints = "footprints.geojson"
//! output_dir = "out"
//! zoom = 19
//! workers = 4
//!
//! [truth]
//! green = "truth.geojson"
//!
//! [solar]
//! threshold = 0.5
//! min_pixels = 60
//! simplify_tolerance_px = 1.0
//!
//! [tagging]
//! min_overlap_m2 = 2.0
//! ```
//!
//! Relative paths are resolved against the directory holding the file.

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};

use serde::Deserialize;

use crate::error::{Error, Result};
use crate::raster::Connectivity;
use crate::tagging::TaggingParams;
use crate::tilegrid::MAX_ZOOM;
use crate::vectorize::VectorizeParams;
use crate::Typology;

pub const DEFAULT_ZOOM: u8 = 19;

#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawTypology {
    enabled: Option<bool>,
    threshold: Option<f32>,
    min_pixels: Option<usize>,
    simplify_tolerance_px: Option<f64>,
}

#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawTruth {
    green: Option<PathBuf>,
    solar: Option<PathBuf>,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawConfig {
    city: Option<String>,
    imagery_dir: Option<PathBuf>,
    mask_dir: Option<PathBuf>,
    footprints: Option<PathBuf>,
    output_dir: Option<PathBuf>,
    zoom: Option<u8>,
    workers: Option<usize>,
    connectivity: Option<u8>,
    area_km2: Option<f64>,
    #[serde(default)]
    truth: RawTruth,
    #[serde(default)]
    green: RawTypology,
    #[serde(default)]
    solar: RawTypology,
    #[serde(default)]
    tagging: TaggingParams,
}

#[derive(Debug, Clone, PartialEq)]
pub struct TypologyConfig {
    pub enabled: bool,
    pub vectorize: VectorizeParams,
}

#[derive(Debug, Clone, PartialEq)]
pub struct PipelineConfig {
    pub city: String,
    pub imagery_dir: PathBuf,
    pub mask_dir: PathBuf,
    pub footprints: PathBuf,
    pub truth: BTreeMap<Typology, PathBuf>,
    pub output_dir: PathBuf,
    pub zoom: u8,
    pub workers: usize,
    /// Region area for evaluation tables; derived from footprints if absent.
    pub area_km2: Option<f64>,
    pub green: TypologyConfig,
    pub solar: TypologyConfig,
    pub tagging: TaggingParams,
}

/// Command-line values that replace config entries.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct Overrides {
    pub city: Option<String>,
    pub zoom: Option<u8>,
    pub threshold: Option<f32>,
    pub min_pixels: Option<usize>,
    pub tolerance: Option<f64>,
    pub workers: Option<usize>,
    pub out: Option<PathBuf>,
}

fn default_workers() -> usize {
    std::thread::available_parallelism().map_or(1, |n| n.get())
}

impl PipelineConfig {
    /// All defaults, with paths under `base`.
    pub fn with_base(city: impl Into<String>, base: &Path) -> Self {
        let typ = TypologyConfig { enabled: true, vectorize: VectorizeParams::default() };
        PipelineConfig {
            city: city.into(),
            imagery_dir: base.join("imagery"),
            mask_dir: base.join("masks"),
            footprints: base.join("footprints.geojson"),
            truth: BTreeMap::new(),
            output_dir: base.join("output"),
            zoom: DEFAULT_ZOOM,
            workers: default_workers(),
            area_km2: None,
            green: typ.clone(),
            solar: typ,
            tagging: TaggingParams::default(),
        }
    }

    pub fn from_toml_str(text: &str, base: &Path) -> Result<Self> {
        let raw: RawConfig = toml::from_str(text).map_err(|e| Error::config(e.to_string()))?;
        let city = raw.city.ok_or_else(|| Error::config("config is missing `city`"))?;
        let mut c = Self::with_base(city, base);
        let resolve = |p: PathBuf| if p.is_absolute() { p } else { base.join(p) };
        if let Some(p) = raw.imagery_dir {
            c.imagery_dir = resolve(p);
        }
        if let Some(p) = raw.mask_dir {
            c.mask_dir = resolve(p);
        }
        if let Some(p) = raw.footprints {
            c.footprints = resolve(p);
        }
        if let Some(p) = raw.output_dir {
            c.output_dir = resolve(p);
        }
        if let Some(p) = raw.truth.green {
            c.truth.insert(Typology::Green, resolve(p));
        }
        if let Some(p) = raw.truth.solar {
            c.truth.insert(Typology::Solar, resolve(p));
        }
        c.zoom = raw.zoom.unwrap_or(DEFAULT_ZOOM);
        c.workers = raw.workers.unwrap_or(c.workers);
        c.area_km2 = raw.area_km2;
        let connectivity = match raw.connectivity {
            Some(n) => Connectivity::from_count(n).map_err(|e| Error::config(e.to_string()))?,
            None => Connectivity::default(),
        };
        for (t, r) in [(Typology::Green, raw.green), (Typology::Solar, raw.solar)] {
            let tc = c.typology_mut(t);
            tc.enabled = r.enabled.unwrap_or(true);
            let v = &mut tc.vectorize;
            v.connectivity = connectivity;
            v.threshold = r.threshold.unwrap_or(v.threshold);
            v.min_pixels = r.min_pixels.unwrap_or(v.min_pixels);
            v.tolerance_px = r.simplify_tolerance_px.unwrap_or(v.tolerance_px);
        }
        c.tagging = raw.tagging;
        c.validate()?;
        Ok(c)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| Error::config(format!("cannot read config {}: {e}", path.display())))?;
        let base = path.parent().unwrap_or(Path::new("."));
        Self::from_toml_str(&text, base).map_err(|e| match e {
            Error::Config(msg) => Error::config(format!("{}: {msg}", path.display())),
            other => other,
        })
    }

    pub fn apply(&mut self, o: &Overrides) -> Result<()> {
        if let Some(c) = &o.city {
            self.city = c.clone();
        }
        if let Some(z) = o.zoom {
            self.zoom = z;
        }
        if let Some(w) = o.workers {
            self.workers = w;
        }
        if let Some(p) = &o.out {
            self.output_dir = p.clone();
        }
        for t in Typology::ALL {
            let v = &mut self.typology_mut(t).vectorize;
            if let Some(x) = o.threshold {
                v.threshold = x;
            }
            if let Some(x) = o.min_pixels {
                v.min_pixels = x;
            }
            if let Some(x) = o.tolerance {
                v.tolerance_px = x;
            }
        }
        self.validate()
    }

    pub fn validate(&self) -> Result<()> {
        if self.city.trim().is_empty() {
            return Err(Error::config("city name is empty"));
        }
        if self.zoom > MAX_ZOOM {
            return Err(Error::config(format!("zoom {} exceeds {MAX_ZOOM}", self.zoom)));
        }
        if self.workers == 0 {
            return Err(Error::config("workers must be at least 1"));
        }
        if let Some(a) = self.area_km2 {
            if !(a > 0.0 && a.is_finite()) {
                return Err(Error::config(format!("area_km2 must be positive, got {a}")));
            }
        }
        for t in Typology::ALL {
            self.typology(t).vectorize.validate()?;
        }
        self.tagging.validate()
    }

    pub fn typology(&self, t: Typology) -> &TypologyConfig {
        match t {
            Typology::Green => &self.green,
            Typology::Solar => &self.solar,
        }
    }

    pub fn typology_mut(&mut self, t: Typology) -> &mut TypologyConfig {
        match t {
            Typology::Green => &mut self.green,
            Typology::Solar => &mut self.solar,
        }
    }

    pub fn enabled(&self) -> Vec<Typology> {
        Typology::ALL.into_iter().filter(|t| self.typology(*t).enabled).collect()
    }
}
