//! Acceptance suite: one PASS/FAIL line per criterion.
//!
//! Runs as a plain binary (`harness = false`). Checks that cannot pass because
//! the published numbers are internally inconsistent are reported as FAIL with
//! the reason and listed in `KNOWN_RED`; only other failures fail the run.

mod common;

use std::collections::BTreeMap;
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::path::Path;
use std::time::{Duration, Instant};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use sha2::{Digest, Sha256};

use rooftop::index::{
    city_penetration, overall_score, rank_overall, rank_typology, round_half_up, CityIndexRow, CityPenetration,
};
use rooftop::metrics::{Confusion, EvaluationReport, Unit};
use rooftop::raster::{connected_components, despeckle, iou, mean_iou, threshold, BinaryMask};
use rooftop::synthetic::{SyntheticCity, SyntheticSpec};
use rooftop::tagging::{load_registry, RegistrySummary, POLYGONS_FILE};
use rooftop::tilegrid::{ground_resolution, pixel_to_geo, tile_bounds, tile_of, GeoPoint, TileId};
use rooftop::vectorize::{rasterize_geo, vectorize_tile, VectorizeParams};
use rooftop::raster::ProbabilityMask;
use rooftop::Typology;

use common::*;

/// Criteria whose failure is explained in the decisions log.
const KNOWN_RED: &[u32] = &[1];

type Outcome = Result<String, String>;

fn check(cond: bool, msg: impl FnOnce() -> String) -> Result<(), String> {
    if cond {
        Ok(())
    } else {
        Err(msg())
    }
}

fn within(got: f64, want: f64, tol: f64) -> bool {
    (got - want).abs() <= tol + 1e-9
}

fn timed(limit: Duration, start: Instant) -> Result<(), String> {
    let el = start.elapsed();
    check(el < limit, || format!("took {el:?}, limit {limit:?}"))
}

fn criterion_1() -> Outcome {
    let start = Instant::now();
    let mut cells = 0;
    let mut bad_cells = Vec::new();
    let mut bad_avgs = Vec::new();
    for table in evaluation_tables() {
        let unit = if table.area { Unit::Area } else { Unit::Count };
        let confs = table
            .rows
            .iter()
            .map(|r| Ok((r.0.to_string(), r.1, Confusion::from_raw(unit, r.2, r.3, r.4, r.5)?)))
            .collect::<rooftop::Result<Vec<_>>>()
            .map_err(|e| e.to_string())?;
        let rep = EvaluationReport::from_confusions(table.typology, unit, confs).map_err(|e| e.to_string())?;
        for (row, want) in rep.rows.iter().zip(table.rows) {
            let got = [row.pct_matching.unwrap_or(f64::NAN), row.pct_fp, row.pct_cover];
            for (g, w) in got.iter().zip([want.6, want.7, want.8]) {
                cells += 1;
                if !within(*g, w, 0.01) {
                    bad_cells.push(format!("{} {} {}: {g:.4} vs {w}", table.typology, unit.as_str(), row.region));
                }
            }
        }
        let got = [rep.avg_matching.unwrap_or(f64::NAN), rep.avg_fp, rep.avg_cover];
        if got.iter().zip(table.average).any(|(g, w)| !within(*g, w, 0.01)) {
            bad_avgs.push(format!(
                "{} {} average {:.2}/{:.2}/{:.2} vs published {}/{}/{}",
                table.typology,
                unit.as_str(),
                got[0],
                got[1],
                got[2],
                table.average[0],
                table.average[1],
                table.average[2]
            ));
        }
    }
    timed(Duration::from_secs(1), start)?;
    check(bad_cells.is_empty(), || format!("cells off: {}", bad_cells.join("; ")))?;
    check(bad_avgs.is_empty(), || {
        format!(
            "{cells} row cells within 0.01, 3 of 4 average rows match; {} (the published row is not the mean of its own rows)",
            bad_avgs.join("; ")
        )
    })?;
    Ok(format!("{cells} row cells and 4 average rows within 0.01"))
}

fn penetrations(t: Typology, rows: &[IndexRow]) -> Vec<CityPenetration> {
    rows.iter()
        .map(|r| CityPenetration::from_percentages(r.1, t, r.2, r.3, r.4, r.5))
        .collect()
}

fn compare_index(t: Typology, published: &[IndexRow], got: &[CityIndexRow]) -> Result<usize, String> {
    let by_city: BTreeMap<&str, &CityIndexRow> = got.iter().map(|r| (r.city.as_str(), r)).collect();
    let mut n = 0;
    for p in published {
        let g = by_city.get(p.1).ok_or_else(|| format!("{t}: {} missing", p.1))?;
        for (name, got, want) in [
            ("score by count", g.score_by_count, p.6),
            ("score by area", g.score_by_area, p.7),
            ("score", g.score, p.8),
        ] {
            n += 1;
            check((round_half_up(got) - want).abs() <= 2, || {
                format!("{t} {} {name}: {got:.2} vs {want}", p.1)
            })?;
        }
    }
    Ok(n)
}

fn criterion_2() -> Outcome {
    let start = Instant::now();
    let green = rank_typology(&penetrations(Typology::Green, GREEN_INDEX)).map_err(|e| e.to_string())?;
    let solar = rank_typology(&penetrations(Typology::Solar, SOLAR_INDEX)).map_err(|e| e.to_string())?;
    let n = compare_index(Typology::Green, GREEN_INDEX, &green)? + compare_index(Typology::Solar, SOLAR_INDEX, &solar)?;

    for &(_, city, s, g, want) in OVERALL_INDEX {
        let got = round_half_up(overall_score(s as f64, g as f64));
        check(got == want, || format!("overall {city}: {got} vs {want}"))?;
    }
    // Ranking the published integer scores must give the published order.
    let as_rows = |pick: fn(&(usize, &str, i64, i64, i64)) -> i64| -> Vec<CityIndexRow> {
        OVERALL_INDEX
            .iter()
            .map(|r| CityIndexRow {
                rank: 0,
                city: r.1.to_string(),
                buildings: 0,
                tagged: 0,
                pct_count: 0.0,
                pct_area: 0.0,
                score_by_count: 0.0,
                score_by_area: 0.0,
                score: pick(r) as f64,
            })
            .collect()
    };
    let (overall, excluded) = rank_overall(&as_rows(|r| r.3), &as_rows(|r| r.2));
    check(excluded.is_empty(), || format!("unexpected exclusions {excluded:?}"))?;
    let order: Vec<&str> = overall.iter().map(|r| r.city.as_str()).collect();
    let want: Vec<&str> = OVERALL_INDEX.iter().map(|r| r.1).collect();
    check(order == want, || format!("overall order {order:?}"))?;
    timed(Duration::from_secs(1), start)?;
    Ok(format!("{n} score cells within 2, 16 overall scores exact and in published order"))
}

fn criterion_3() -> Outcome {
    let mut out = Vec::new();
    for (city, t, buildings, tagged, want) in [
        ("Zurich", Typology::Green, 18440u64, 5760u64, "31.2"),
        ("Singapore", Typology::Solar, 51750, 1222, "2.4"),
    ] {
        let json = serde_json::json!({
            "city": city,
            "buildings": buildings,
            "total_area_m2": 1.0e6,
            t.as_str(): { "count": tagged, "area_m2": 2.0e5 },
        });
        let s: RegistrySummary = serde_json::from_value(json).map_err(|e| e.to_string())?;
        let p = city_penetration(&s, t).map_err(|e| e.to_string())?;
        let shown = format!("{:.1}", p.pct_count);
        check(shown == want, || format!("{city}: {shown} vs {want}"))?;
        out.push(format!("{city} {shown}"));
    }
    Ok(out.join(", "))
}

fn tree_digest(root: &Path) -> BTreeMap<String, Vec<u8>> {
    fn walk(root: &Path, dir: &Path, out: &mut BTreeMap<String, Vec<u8>>) {
        for e in std::fs::read_dir(dir).unwrap() {
            let p = e.unwrap().path();
            if p.is_dir() {
                walk(root, &p, out);
            } else {
                let rel = p.strip_prefix(root).unwrap().to_string_lossy().into_owned();
                out.insert(rel, Sha256::digest(std::fs::read(&p).unwrap()).to_vec());
            }
        }
    }
    let mut out = BTreeMap::new();
    for sub in ["masks", "output"] {
        walk(root, &root.join(sub), &mut out);
    }
    out
}

fn criterion_4() -> Outcome {
    let start = Instant::now();
    let city = SyntheticCity::generate(SyntheticSpec::default()).map_err(|e| e.to_string())?;
    check(city.buildings.len() >= 500, || format!("only {} footprints", city.buildings.len()))?;
    let expected = expected_labels(&city, &city.spec.tagging);
    let positives = expected.values().filter(|(g, s)| *g || *s).count();
    let mut digests = Vec::new();
    let mut four_tile = false;
    for workers in [1, 4, 8] {
        let dir = tempfile::tempdir().map_err(|e| e.to_string())?;
        let cfg = city.write(dir.path()).map_err(|e| e.to_string())?;
        let args = ["rooftop", "pipeline", "--config", cfg.to_str().unwrap(), "--workers", &workers.to_string()];
        let code = rooftop::cli::run(args);
        check(code == 0, || format!("pipeline exited {code} with {workers} workers"))?;
        let (reg, _) = load_registry(&city.spec.city, &dir.path().join("output").join(POLYGONS_FILE), &Typology::ALL)
            .map_err(|e| e.to_string())?;
        let got: BTreeMap<String, (bool, bool)> =
            reg.footprints.iter().map(|f| (f.id.clone(), (f.labels.green, f.labels.solar))).collect();
        check(got.len() == expected.len(), || format!("{} footprints in registry, {} expected", got.len(), expected.len()))?;
        let mut missed = 0;
        let mut spurious = 0;
        for (id, want) in &expected {
            let have = got.get(id).copied().unwrap_or_default();
            missed += usize::from(want.0 && !have.0) + usize::from(want.1 && !have.1);
            spurious += usize::from(!want.0 && have.0) + usize::from(!want.1 && have.1);
        }
        check(missed == 0 && spurious == 0, || {
            format!("{workers} workers: {missed} missed, {spurious} spurious")
        })?;
        let preds = rooftop::geojson_io::read_predictions(&rooftop::pipeline::predictions_path(
            &dir.path().join("output"),
            Typology::Green,
        ))
        .map_err(|e| e.to_string())?;
        four_tile |= preds.iter().any(|p| p.source_tiles.len() == 4);
        digests.push(tree_digest(dir.path()));
    }
    check(four_tile, || "no prediction was merged across four tiles".into())?;
    check(digests.windows(2).all(|w| w[0] == w[1]), || "outputs differ between worker counts".into())?;
    timed(Duration::from_secs(60), start)?;
    Ok(format!(
        "{} footprints, {positives} tagged, 0 missed, 0 spurious, {} files identical for 1/4/8 workers",
        expected.len(),
        digests[0].len()
    ))
}

fn blob_mask(rng: &mut ChaCha8Rng, tile: TileId) -> ProbabilityMask {
    let mut v = vec![0.0f32; 256 * 256];
    for _ in 0..rng.gen_range(1..8) {
        let (cx, cy) = (rng.gen_range(0.0..256.0), rng.gen_range(0.0..256.0));
        let (rx, ry) = (rng.gen_range(6.0..40.0), rng.gen_range(6.0..40.0));
        for y in 0..256 {
            for x in 0..256 {
                let d = ((x as f64 + 0.5 - cx) / rx).powi(2) + ((y as f64 + 0.5 - cy) / ry).powi(2);
                let p = &mut v[y * 256 + x];
                *p = p.max((1.0 - d / 2.0).clamp(0.0, 1.0) as f32);
            }
        }
    }
    ProbabilityMask::new(tile, 256, 256, v).unwrap()
}

fn criterion_5() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    let mut worst: f64 = 1.0;
    let mut worst_area: f64 = 0.0;
    for i in 0..100 {
        let tile = TileId::new(19, 274_000 + i, rng.gen_range(150_000..190_000)).unwrap();
        let m = blob_mask(&mut rng, tile);
        let base = VectorizeParams::default();
        let clean = despeckle(&connected_components(&threshold(&m, base.threshold).unwrap(), base.connectivity), base.min_pixels);
        for tol in [1.0, 0.0] {
            let params = VectorizeParams { tolerance_px: tol, ..base };
            let polys = vectorize_tile(tile, &m, Typology::Green, &params).map_err(|e| e.to_string())?;
            let back = rasterize_geo(&polys, tile, 256, 256);
            let score = if clean.count() == 0 && back.count() == 0 { 1.0 } else { iou(&back, &clean).unwrap() };
            if tol == 0.0 {
                check(back == clean, || format!("mask {i}: tolerance 0 round trip not exact"))?;
                let lat = rooftop::tilegrid::pixel_to_geo(tile, 128.0, 128.0, 256).lat;
                let want = clean.count() as f64 * ground_resolution(lat, 19).powi(2);
                let got: f64 = polys.iter().map(|p| p.geo_area).sum();
                if want > 0.0 {
                    let rel = (got - want).abs() / want;
                    worst_area = worst_area.max(rel);
                    check(rel <= 0.01, || format!("mask {i}: area {got:.2} vs {want:.2}"))?;
                }
            } else {
                worst = worst.min(score);
                check(score >= 0.9, || format!("mask {i}: IoU {score:.4} at tolerance 1"))?;
            }
        }
    }
    Ok(format!("100 masks; min IoU at 1 px {worst:.4}; exact at 0 px; max area error {:.4}%", worst_area * 100.0))
}

fn criterion_6() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(6);
    let lat_max = rooftop::tilegrid::max_latitude();
    for _ in 0..10_000 {
        let p = GeoPoint::new(rng.gen_range(-180.0..180.0), rng.gen_range(-lat_max..lat_max));
        let z = rng.gen_range(0..=22u8);
        let t = tile_of(p, z).map_err(|e| e.to_string())?;
        let b = tile_bounds(t);
        check(b.contains_half_open(p), || format!("{p:?} not in bounds of {t}"))?;
        if z < 22 {
            let kids = t.children().unwrap();
            let (w, s, e, n) = (b.west, b.south, b.east, b.north);
            let kb: Vec<_> = kids.iter().map(|k| tile_bounds(*k)).collect();
            let mid_lon = kb[0].east;
            let mid_lat = kb[0].south;
            check(kb.iter().filter(|k| k.contains_half_open(p)).count() == 1, || format!("{p:?}: children overlap"))?;
            check(
                (kb[0].west - w).abs() <= 1e-12
                    && (kb[0].north - n).abs() <= 1e-12
                    && (kb[3].east - e).abs() <= 1e-12
                    && (kb[3].south - s).abs() <= 1e-12
                    && (kb[1].west - mid_lon).abs() <= 1e-12
                    && (kb[2].north - mid_lat).abs() <= 1e-12,
                || format!("{t}: children do not partition"),
            )?;
        }
        let n = t.grid_size();
        if t.x + 1 < n {
            let right = TileId::new(z, t.x + 1, t.y).unwrap();
            for py in [0.0, 17.0, 255.0] {
                let a = pixel_to_geo(t, 256.0, py, 256);
                let c = pixel_to_geo(right, 0.0, py, 256);
                check((a.lon - c.lon).abs() <= 1e-12 && (a.lat - c.lat).abs() <= 1e-12, || format!("{t}: east edge mismatch"))?;
            }
        }
        if t.y + 1 < n {
            let below = TileId::new(z, t.x, t.y + 1).unwrap();
            let a = pixel_to_geo(t, 100.0, 256.0, 256);
            let c = pixel_to_geo(below, 100.0, 0.0, 256);
            check((a.lon - c.lon).abs() <= 1e-12 && (a.lat - c.lat).abs() <= 1e-12, || format!("{t}: south edge mismatch"))?;
        }
    }
    Ok("10000 points: containment, child partition and edge adjacency within 1e-12 deg".into())
}

fn random_mask(rng: &mut ChaCha8Rng, tile: TileId, w: u32, h: u32) -> BinaryMask {
    let p = rng.gen_range(0.05..0.9);
    let data = (0..w * h).map(|_| u8::from(rng.gen_bool(p))).collect();
    BinaryMask::new(tile, w, h, data).unwrap()
}

fn criterion_7() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(7);
    let tile = TileId::new(19, 1, 1).unwrap();
    let mut pairs = Vec::new();
    let mut brute = Vec::new();
    for i in 0..50 {
        let (w, h) = (rng.gen_range(1..64), rng.gen_range(1..64));
        let a = random_mask(&mut rng, tile, w, h);
        let b = if i % 10 == 0 { BinaryMask::empty(tile, w, h) } else { random_mask(&mut rng, tile, w, h) };
        let (mut inter, mut uni) = (0u64, 0u64);
        for y in 0..h {
            for x in 0..w {
                inter += u64::from(a.get(x, y) && b.get(x, y));
                uni += u64::from(a.get(x, y) || b.get(x, y));
            }
        }
        let want = if uni == 0 { 1.0 } else { inter as f64 / uni as f64 };
        let got = iou(&a, &b).map_err(|e| e.to_string())?;
        check(got == want, || format!("pair {i}: IoU {got} vs brute force {want}"))?;
        brute.push(want);
        pairs.push((a, b));
    }
    let got = mean_iou(&pairs).map_err(|e| e.to_string())?;
    let want = brute.iter().sum::<f64>() / brute.len() as f64;
    check(got == want, || format!("mean IoU {got} vs {want}"))?;
    Ok(format!(
        "mean_iou exact on 50 pairs; CNN mIoU (solar {}, green {}) and real-city registries not reproducible without the trained models and licensed imagery",
        rooftop::raster::reported::SOLAR_MIOU,
        rooftop::raster::reported::GREEN_MIOU
    ))
}

fn main() {
    let criteria: [(u32, fn() -> Outcome); 7] = [
        (1, criterion_1),
        (2, criterion_2),
        (3, criterion_3),
        (4, criterion_4),
        (5, criterion_5),
        (6, criterion_6),
        (7, criterion_7),
    ];
    let mut unexpected = 0;
    for (n, f) in criteria {
        let start = Instant::now();
        let outcome = catch_unwind(AssertUnwindSafe(f)).unwrap_or_else(|e| {
            Err(e.downcast_ref::<String>().cloned().or(e.downcast_ref::<&str>().map(|s| s.to_string())).unwrap_or_default())
        });
        let el = start.elapsed().as_secs_f64();
        match outcome {
            Ok(msg) => println!("criterion {n}: PASS ({el:.2}s) {msg}"),
            Err(msg) => {
                let known = KNOWN_RED.contains(&n);
                println!("criterion {n}: FAIL ({el:.2}s){} {msg}", if known { " [known]" } else { "" });
                unexpected += usize::from(!known);
            }
        }
    }
    if unexpected > 0 {
        std::process::exit(1);
    }
}
