//! Generates a painted synthetic city and runs the whole pipeline on it.
//!
//! `cargo run --example synthetic_city -- <dir>` keeps the files in `<dir>`.

use rooftop::config::PipelineConfig;
use rooftop::pipeline::run_pipeline;
use rooftop::synthetic::{SyntheticCity, SyntheticSpec};

fn main() -> rooftop::Result<()> {
    let keep = std::env::args().nth(1);
    let tmp = tempdir(keep.as_deref());
    let city = SyntheticCity::generate(SyntheticSpec { grid: 8, ..Default::default() })?;
    let cfg_path = city.write(&tmp)?;
    println!("{} buildings, {} painted features in {}", city.buildings.len(), city.features.len(), tmp.display());
    let run = run_pipeline(&PipelineConfig::load(&cfg_path)?)?;
    println!("segmented {} tiles; predictions {:?}", run.segmented_tiles, run.predictions);
    println!("{}", serde_json::to_string(&run.registry.summary()).expect("serializable"));
    for r in &run.evaluation {
        let row = &r.rows[0];
        println!(
            "{} {}: %Matching {:.2} %FP {:.2} %Cover {:.2}",
            r.typology,
            r.unit.as_str(),
            row.pct_matching.unwrap_or(f64::NAN),
            row.pct_fp,
            row.pct_cover
        );
    }
    if keep.is_none() {
        std::fs::remove_dir_all(&tmp).ok();
    }
    Ok(())
}

fn tempdir(keep: Option<&str>) -> std::path::PathBuf {
    match keep {
        Some(d) => d.into(),
        None => std::env::temp_dir().join(format!("rooftop-synthetic-{}", std::process::id())),
    }
}
