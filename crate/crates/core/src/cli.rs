//! Command-line front end. [`run`] returns the process exit code:
//! 0 success, 1 usage or config error, 2 malformed data, 3 I/O failure.
//! Failures also print a one-line JSON summary to standard error.

use std::ffi::OsString;
use std::path::{Path, PathBuf};

use clap::{Parser, Subcommand};

use crate::config::{Overrides, PipelineConfig};
use crate::error::{Error, Result};
use crate::index::{build_index_tables, write_index};
use crate::pipeline::{load_region, run_evaluate, run_pipeline, run_segment, run_tag, run_vectorize};
use crate::tagging::{RegistrySummary, SUMMARY_FILE};

#[derive(Debug, Parser)]
#[command(name = "rooftop", version, about = "Green and solar roof registries from segmentation masks")]
pub struct Cli {
    /// Per-city TOML config.
    #[arg(long, global = true)]
    pub config: Option<PathBuf>,
    #[arg(long, global = true)]
    pub city: Option<String>,
    #[arg(long, global = true)]
    pub zoom: Option<u8>,
    /// Mask probability threshold, applied to both typologies.
    #[arg(long, global = true)]
    pub threshold: Option<f32>,
    /// Speckle size limit in pixels.
    #[arg(long, global = true)]
    pub min_pixels: Option<usize>,
    /// Simplification tolerance in pixels.
    #[arg(long, global = true)]
    pub tolerance: Option<f64>,
    #[arg(long, global = true)]
    pub workers: Option<usize>,
    /// Output directory.
    #[arg(long, global = true)]
    pub out: Option<PathBuf>,
    /// More log output (-v info, -vv debug).
    #[arg(short, long, global = true, action = clap::ArgAction::Count)]
    pub verbose: u8,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Baseline colour-rule masks from imagery tiles.
    Segment,
    /// Masks to prediction polygons.
    Vectorize,
    /// Predictions and footprints to a registry.
    Tag,
    /// Registry against ground truth; extra configs add regions.
    Evaluate { regions: Vec<PathBuf> },
    /// Cross-city index from `summary.json` files or their directories.
    Index { summaries: Vec<PathBuf> },
    /// segment, vectorize, tag and (with truth) evaluate.
    Pipeline,
}

impl Cli {
    fn overrides(&self) -> Overrides {
        Overrides {
            city: self.city.clone(),
            zoom: self.zoom,
            threshold: self.threshold,
            min_pixels: self.min_pixels,
            tolerance: self.tolerance,
            workers: self.workers,
            out: self.out.clone(),
        }
    }

    fn load_config(&self, path: &Path) -> Result<PipelineConfig> {
        let mut cfg = PipelineConfig::load(path)?;
        cfg.apply(&self.overrides())?;
        Ok(cfg)
    }

    /// For `evaluate`, `--out` names the report directory and leaves each
    /// region's own output directory alone.
    fn load_region_config(&self, path: &Path) -> Result<PipelineConfig> {
        let mut cfg = PipelineConfig::load(path)?;
        cfg.apply(&Overrides { out: None, ..self.overrides() })?;
        Ok(cfg)
    }

    fn config(&self) -> Result<PipelineConfig> {
        let path = self.config.as_ref().ok_or_else(|| Error::config("--config is required"))?;
        self.load_config(path)
    }
}

fn print_summary(s: &RegistrySummary) {
    println!("{}", serde_json::to_string(s).expect("summary serializes"));
}

fn summary_file(p: &Path) -> PathBuf {
    if p.is_dir() {
        p.join(SUMMARY_FILE)
    } else {
        p.to_path_buf()
    }
}

fn execute(cli: &Cli) -> Result<()> {
    match &cli.command {
        Command::Segment => {
            let n = run_segment(&cli.config()?)?;
            println!("segmented {n} tiles");
        }
        Command::Vectorize => {
            for (t, preds) in run_vectorize(&cli.config()?)? {
                println!("{t}: {} polygons", preds.len());
            }
        }
        Command::Tag => print_summary(&run_tag(&cli.config()?)?.0.summary()),
        Command::Evaluate { regions } => {
            let mut paths: Vec<&PathBuf> = cli.config.iter().collect();
            paths.extend(regions);
            if paths.is_empty() {
                return Err(Error::config("evaluate needs --config or region config files"));
            }
            let cfgs = paths.iter().map(|p| cli.load_region_config(p)).collect::<Result<Vec<_>>>()?;
            let loaded = cfgs.iter().map(load_region).collect::<Result<Vec<_>>>()?;
            let out = cli.out.clone().unwrap_or_else(|| cfgs[0].output_dir.clone());
            for r in run_evaluate(&loaded, &out)? {
                println!(
                    "{} {}: {} regions, average %Matching {}",
                    r.typology,
                    r.unit.as_str(),
                    r.rows.len(),
                    r.avg_matching.map_or("N/A".into(), |v| format!("{v:.2}"))
                );
            }
        }
        Command::Index { summaries } => {
            if summaries.len() < 2 {
                return Err(Error::config("at least 2 cities required"));
            }
            let cities = summaries
                .iter()
                .map(|p| RegistrySummary::read(&summary_file(p)))
                .collect::<Result<Vec<_>>>()?;
            let tables = build_index_tables(&cities)?;
            let out = cli.out.clone().unwrap_or_else(|| PathBuf::from("."));
            write_index(&tables, &out)?;
            for r in &tables.overall {
                println!("{} {} {}", r.rank, r.city, crate::index::round_half_up(r.overall_score));
            }
        }
        Command::Pipeline => print_summary(&run_pipeline(&cli.config()?)?.registry.summary()),
    }
    Ok(())
}

fn report(e: &Error) -> i32 {
    let code = e.exit_code();
    let summary = serde_json::json!({ "error": e.kind(), "message": e.to_string(), "exit_code": code });
    eprintln!("{summary}");
    code
}

/// Parses `args` (including the program name) and runs the command.
pub fn run<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            let code = if e.use_stderr() { 1 } else { 0 };
            let _ = e.print();
            return code;
        }
    };
    let level = match cli.verbose {
        0 => log::LevelFilter::Warn,
        1 => log::LevelFilter::Info,
        _ => log::LevelFilter::Debug,
    };
    let _ = env_logger::Builder::new().filter_level(level).parse_default_env().try_init();
    match execute(&cli) {
        Ok(()) => 0,
        Err(e) => report(&e),
    }
}
