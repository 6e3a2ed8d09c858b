//! Cross-city rooftop index: penetration, min-max normalisation and ranking.
//!
//! Everything is computed at full precision; [`round_half_up`] is applied
//! only when tables are presented or ranked.

use std::cmp::Ordering;
use std::collections::BTreeMap;
use std::io::Write;
use std::path::Path;

use log::warn;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::tagging::RegistrySummary;
use crate::Typology;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CityPenetration {
    pub city: String,
    pub typology: Typology,
    pub buildings: u64,
    pub tagged: u64,
    pub total_area_m2: Option<f64>,
    pub tagged_area_m2: Option<f64>,
    pub pct_count: f64,
    pub pct_area: f64,
}

impl CityPenetration {
    /// A row known only by its published percentages.
    pub fn from_percentages(
        city: impl Into<String>,
        typology: Typology,
        buildings: u64,
        tagged: u64,
        pct_count: f64,
        pct_area: f64,
    ) -> Self {
        CityPenetration {
            city: city.into(),
            typology,
            buildings,
            tagged,
            total_area_m2: None,
            tagged_area_m2: None,
            pct_count,
            pct_area,
        }
    }
}

/// `%Count = 100·tagged/buildings`, `%Area = 100·tagged_area/total_area`.
pub fn city_penetration(s: &RegistrySummary, t: Typology) -> Result<CityPenetration> {
    let totals = s
        .typology(t)
        .ok_or_else(|| Error::data(format!("{}: {t} roofs were not analysed", s.city)))?;
    if s.buildings == 0 || s.total_area_m2 <= 0.0 {
        return Err(Error::domain(format!("{}: registry has no buildings", s.city)));
    }
    if totals.count > s.buildings || totals.area_m2 > s.total_area_m2 * (1.0 + 1e-12) {
        return Err(Error::data(format!("{}: tagged {t} totals exceed the city totals", s.city)));
    }
    Ok(CityPenetration {
        city: s.city.clone(),
        typology: t,
        buildings: s.buildings,
        tagged: totals.count,
        total_area_m2: Some(s.total_area_m2),
        tagged_area_m2: Some(totals.area_m2),
        pct_count: 100.0 * totals.count as f64 / s.buildings as f64,
        pct_area: (100.0 * totals.area_m2 / s.total_area_m2).min(100.0),
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct NormalizedScore {
    pub score_by_count: f64,
    pub score_by_area: f64,
}

fn min_max(values: &[f64], what: &str) -> Vec<f64> {
    let lo = values.iter().copied().fold(f64::INFINITY, f64::min);
    let hi = values.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    if hi <= lo {
        warn!("all cities share the same {what}; its scores are 0");
        return vec![0.0; values.len()];
    }
    values.iter().map(|v| 100.0 * ((v - lo) / (hi - lo))).collect()
}

/// Min-max normalises %Count and %Area over exactly the given cities.
pub fn normalize_scores(pens: &[CityPenetration]) -> Result<Vec<NormalizedScore>> {
    if pens.len() < 2 {
        return Err(Error::domain("at least 2 cities required"));
    }
    let counts = min_max(&pens.iter().map(|p| p.pct_count).collect::<Vec<_>>(), "%Count");
    let areas = min_max(&pens.iter().map(|p| p.pct_area).collect::<Vec<_>>(), "%Area");
    Ok(counts
        .into_iter()
        .zip(areas)
        .map(|(c, a)| NormalizedScore { score_by_count: c, score_by_area: a })
        .collect())
}

pub fn typology_score(score_by_count: f64, score_by_area: f64) -> f64 {
    (score_by_count + score_by_area) / 2.0
}

pub fn overall_score(solar: f64, green: f64) -> f64 {
    (solar + green) / 2.0
}

/// Presentation rounding: halves go up (47.5 → 48).
pub fn round_half_up(x: f64) -> i64 {
    (x + 0.5).floor() as i64
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CityIndexRow {
    pub rank: usize,
    pub city: String,
    pub buildings: u64,
    pub tagged: u64,
    pub pct_count: f64,
    pub pct_area: f64,
    pub score_by_count: f64,
    pub score_by_area: f64,
    pub score: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OverallRow {
    pub rank: usize,
    pub city: String,
    pub solar_score: f64,
    pub green_score: f64,
    pub overall_score: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct IndexTables {
    pub green: Vec<CityIndexRow>,
    pub solar: Vec<CityIndexRow>,
    pub overall: Vec<OverallRow>,
    /// Cities left out of the overall table for lacking a typology.
    pub excluded: Vec<String>,
}

/// Scores and ranks one typology table. Ties on the rounded score fall back
/// to %Area (descending) and then the city name.
pub fn rank_typology(pens: &[CityPenetration]) -> Result<Vec<CityIndexRow>> {
    let scores = normalize_scores(pens)?;
    let mut rows: Vec<CityIndexRow> = pens
        .iter()
        .zip(scores)
        .map(|(p, s)| CityIndexRow {
            rank: 0,
            city: p.city.clone(),
            buildings: p.buildings,
            tagged: p.tagged,
            pct_count: p.pct_count,
            pct_area: p.pct_area,
            score_by_count: s.score_by_count,
            score_by_area: s.score_by_area,
            score: typology_score(s.score_by_count, s.score_by_area),
        })
        .collect();
    rows.sort_by(|a, b| {
        round_half_up(b.score)
            .cmp(&round_half_up(a.score))
            .then(b.pct_area.partial_cmp(&a.pct_area).unwrap_or(Ordering::Equal))
            .then_with(|| a.city.cmp(&b.city))
    });
    for (i, r) in rows.iter_mut().enumerate() {
        r.rank = i + 1;
    }
    Ok(rows)
}

pub fn rank_overall(green: &[CityIndexRow], solar: &[CityIndexRow]) -> (Vec<OverallRow>, Vec<String>) {
    let g: BTreeMap<&str, f64> = green.iter().map(|r| (r.city.as_str(), r.score)).collect();
    let s: BTreeMap<&str, f64> = solar.iter().map(|r| (r.city.as_str(), r.score)).collect();
    let mut rows = Vec::new();
    let mut excluded = Vec::new();
    for city in g.keys().chain(s.keys()).copied().collect::<std::collections::BTreeSet<_>>() {
        match (s.get(city), g.get(city)) {
            (Some(&solar_score), Some(&green_score)) => rows.push(OverallRow {
                rank: 0,
                city: city.to_string(),
                solar_score,
                green_score,
                overall_score: overall_score(solar_score, green_score),
            }),
            _ => excluded.push(city.to_string()),
        }
    }
    rows.sort_by(|a, b| {
        round_half_up(b.overall_score)
            .cmp(&round_half_up(a.overall_score))
            .then_with(|| a.city.cmp(&b.city))
    });
    for (i, r) in rows.iter_mut().enumerate() {
        r.rank = i + 1;
    }
    (rows, excluded)
}

/// Builds the green, solar and overall tables from city summaries. A
/// typology analysed by no city gives an empty table; by exactly one, an error.
pub fn build_index_tables(cities: &[RegistrySummary]) -> Result<IndexTables> {
    let mut names = std::collections::BTreeSet::new();
    for c in cities {
        if !names.insert(c.city.as_str()) {
            return Err(Error::data(format!("city {} appears twice", c.city)));
        }
    }
    let mut tables = BTreeMap::new();
    for t in Typology::ALL {
        let pens = cities
            .iter()
            .filter(|c| c.typology(t).is_some())
            .map(|c| city_penetration(c, t))
            .collect::<Result<Vec<_>>>()?;
        let rows = match pens.len() {
            0 => Vec::new(),
            1 => return Err(Error::domain(format!("at least 2 cities required for the {t} index"))),
            _ => rank_typology(&pens)?,
        };
        tables.insert(t, rows);
    }
    let green = tables.remove(&Typology::Green).unwrap_or_default();
    let solar = tables.remove(&Typology::Solar).unwrap_or_default();
    if green.is_empty() && solar.is_empty() {
        return Err(Error::domain("at least 2 cities required"));
    }
    let (overall, excluded) = rank_overall(&green, &solar);
    for city in &excluded {
        warn!("{city} lacks a typology and is left out of the overall ranking");
    }
    Ok(IndexTables { green, solar, overall, excluded })
}

fn csv_error(e: impl std::fmt::Display) -> Error {
    Error::data(format!("csv: {e}"))
}

pub fn write_typology_csv(rows: &[CityIndexRow], t: Typology, out: impl Write) -> Result<()> {
    let (roofs, score) = match t {
        Typology::Green => ("Green Roofs", "Green Score"),
        Typology::Solar => ("Solar Roofs", "Solar Score"),
    };
    let mut w = csv::Writer::from_writer(out);
    w.write_record(["Rank", "City", "Bldg.", roofs, "%Count", "%Area", "Score by Count", "Score by Area", score])
        .map_err(csv_error)?;
    for r in rows {
        w.write_record([
            r.rank.to_string(),
            r.city.clone(),
            r.buildings.to_string(),
            r.tagged.to_string(),
            format!("{:.1}", r.pct_count),
            format!("{:.1}", r.pct_area),
            round_half_up(r.score_by_count).to_string(),
            round_half_up(r.score_by_area).to_string(),
            round_half_up(r.score).to_string(),
        ])
        .map_err(csv_error)?;
    }
    w.flush().map_err(csv_error)
}

pub fn write_overall_csv(rows: &[OverallRow], out: impl Write) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(["Rank", "City", "Solar Score", "Green Score", "Overall Score"])
        .map_err(csv_error)?;
    for r in rows {
        w.write_record([
            r.rank.to_string(),
            r.city.clone(),
            round_half_up(r.solar_score).to_string(),
            round_half_up(r.green_score).to_string(),
            round_half_up(r.overall_score).to_string(),
        ])
        .map_err(csv_error)?;
    }
    w.flush().map_err(csv_error)
}

/// Writes `index_green.csv`, `index_solar.csv`, `index_overall.csv` and
/// the full-precision `index.json` into `dir`.
pub fn write_index(tables: &IndexTables, dir: &Path) -> Result<()> {
    std::fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    let put = |name: &str, bytes: Vec<u8>| {
        let path = dir.join(name);
        std::fs::write(&path, bytes).map_err(|e| Error::io(path, e))
    };
    let mut buf = Vec::new();
    write_typology_csv(&tables.green, Typology::Green, &mut buf)?;
    put("index_green.csv", std::mem::take(&mut buf))?;
    write_typology_csv(&tables.solar, Typology::Solar, &mut buf)?;
    put("index_solar.csv", std::mem::take(&mut buf))?;
    write_overall_csv(&tables.overall, &mut buf)?;
    put("index_overall.csv", std::mem::take(&mut buf))?;
    let mut json = serde_json::to_vec_pretty(tables).expect("index serializes");
    json.push(b'\n');
    put("index.json", json)
}
