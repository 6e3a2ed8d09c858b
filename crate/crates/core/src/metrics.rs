//! Predicted-versus-truth evaluation in building counts and roof areas.

use std::collections::BTreeMap;
use std::io::Write;
use std::path::Path;

use log::warn;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geometry::ring_signed_area_m2;
use crate::tagging::CityRegistry;
use crate::tilegrid::GeoPoint;
use crate::Typology;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Unit {
    Count,
    Area,
}

impl Unit {
    pub fn as_str(&self) -> &'static str {
        match self {
            Unit::Count => "count",
            Unit::Area => "area",
        }
    }
}

/// Tallies for one region. Counts are whole numbers stored as `f64` so both
/// units share the formulas; areas are in m².
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Confusion {
    pub unit: Unit,
    pub total: f64,
    pub truth: f64,
    /// Predicted positives, tp + fp.
    pub pred: f64,
    pub tp: f64,
    pub fp: f64,
}

impl Confusion {
    /// From the raw table columns; `fp` is derived as `pred - tp`.
    pub fn from_raw(unit: Unit, total: f64, truth: f64, pred: f64, tp: f64) -> Result<Self> {
        let ok = [total, truth, pred, tp].iter().all(|v| v.is_finite() && *v >= 0.0)
            && tp <= truth.min(pred)
            && pred <= total
            && truth <= total;
        if !ok {
            return Err(Error::data(format!(
                "inconsistent tallies: total {total}, truth {truth}, pred {pred}, tp {tp}"
            )));
        }
        Ok(Confusion { unit, total, truth, pred, tp, fp: pred - tp })
    }
}

/// `100·tp/truth`; `None` when there are no true positives to find.
pub fn percent_matching(c: &Confusion) -> Option<f64> {
    (c.truth > 0.0).then(|| 100.0 * c.tp / c.truth)
}

pub fn percent_fp(c: &Confusion) -> Result<f64> {
    if c.total <= 0.0 {
        return Err(Error::domain("%FP undefined for a region with zero total"));
    }
    Ok(100.0 * c.fp / c.total)
}

pub fn percent_cover(c: &Confusion) -> Result<f64> {
    if c.total <= 0.0 {
        return Err(Error::domain("%Cover undefined for a region with zero total"));
    }
    Ok(100.0 * c.tp / c.total)
}

fn orphan_error(pred_only: &[&str], truth_only: &[&str]) -> Error {
    let show = |ids: &[&str]| {
        let mut s = ids.iter().take(10).copied().collect::<Vec<_>>().join(", ");
        if ids.len() > 10 {
            s.push_str(&format!(", ... ({} total)", ids.len()));
        }
        s
    };
    Error::data(format!(
        "registries disagree on footprint ids; only in prediction: [{}]; only in truth: [{}]",
        show(pred_only),
        show(truth_only)
    ))
}

/// Joins two registries on footprint id. Count unit counts a MultiPolygon
/// building once (labelled if any part is); area unit sums footprint areas.
pub fn confusion(predicted: &CityRegistry, truth: &CityRegistry, t: Typology, unit: Unit) -> Result<Confusion> {
    let pmap: BTreeMap<&str, _> = predicted.footprints.iter().map(|f| (f.id.as_str(), f)).collect();
    let tmap: BTreeMap<&str, _> = truth.footprints.iter().map(|f| (f.id.as_str(), f)).collect();
    let pred_only: Vec<&str> = pmap.keys().filter(|k| !tmap.contains_key(*k)).copied().collect();
    let truth_only: Vec<&str> = tmap.keys().filter(|k| !pmap.contains_key(*k)).copied().collect();
    if !pred_only.is_empty() || !truth_only.is_empty() {
        return Err(orphan_error(&pred_only, &truth_only));
    }

    let (mut total, mut n_truth, mut n_pred, mut tp) = (0.0, 0.0, 0.0, 0.0);
    match unit {
        Unit::Area => {
            for (id, tf) in &tmap {
                let is_t = tf.labels.get(t);
                let is_p = pmap[id].labels.get(t);
                total += tf.area_m2;
                if is_t {
                    n_truth += tf.area_m2;
                }
                if is_p {
                    n_pred += tf.area_m2;
                }
                if is_t && is_p {
                    tp += tf.area_m2;
                }
            }
        }
        Unit::Count => {
            let mut parents: BTreeMap<&str, (bool, bool)> = BTreeMap::new();
            for (id, tf) in &tmap {
                let e = parents.entry(tf.parent_id.as_str()).or_default();
                e.0 |= tf.labels.get(t);
                e.1 |= pmap[id].labels.get(t);
            }
            for (is_t, is_p) in parents.values() {
                total += 1.0;
                n_truth += f64::from(u8::from(*is_t));
                n_pred += f64::from(u8::from(*is_p));
                tp += f64::from(u8::from(*is_t && *is_p));
            }
        }
    }
    Ok(Confusion { unit, total, truth: n_truth, pred: n_pred, tp, fp: n_pred - tp })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvaluationRow {
    pub region: String,
    pub area_km2: f64,
    pub confusion: Confusion,
    pub pct_matching: Option<f64>,
    pub pct_fp: f64,
    pub pct_cover: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvaluationReport {
    pub typology: Typology,
    pub unit: Unit,
    pub rows: Vec<EvaluationRow>,
    /// Unweighted means over rows; regions without truth positives are
    /// left out of the %Matching mean.
    pub avg_matching: Option<f64>,
    pub avg_fp: f64,
    pub avg_cover: f64,
}

impl EvaluationReport {
    pub fn from_confusions(
        typology: Typology,
        unit: Unit,
        regions: impl IntoIterator<Item = (String, f64, Confusion)>,
    ) -> Result<Self> {
        let mut rows = Vec::new();
        for (region, area_km2, c) in regions {
            if c.unit != unit {
                return Err(Error::data(format!("region {region}: unit mismatch")));
            }
            let pct_matching = percent_matching(&c);
            if pct_matching.is_none() {
                warn!("region {region}: no {typology} truth positives; %Matching is N/A");
            }
            rows.push(EvaluationRow {
                pct_fp: percent_fp(&c)?,
                pct_cover: percent_cover(&c)?,
                pct_matching,
                region,
                area_km2,
                confusion: c,
            });
        }
        if rows.is_empty() {
            return Err(Error::domain("an evaluation report needs at least one region"));
        }
        let mean = |v: Vec<f64>| (!v.is_empty()).then(|| v.iter().sum::<f64>() / v.len() as f64);
        Ok(EvaluationReport {
            typology,
            unit,
            avg_matching: mean(rows.iter().filter_map(|r| r.pct_matching).collect()),
            avg_fp: mean(rows.iter().map(|r| r.pct_fp).collect()).unwrap_or(0.0),
            avg_cover: mean(rows.iter().map(|r| r.pct_cover).collect()).unwrap_or(0.0),
            rows,
        })
    }

    pub fn write_csv(&self, out: impl Write) -> Result<()> {
        let mut w = csv::Writer::from_writer(out);
        let csv_err = |e: csv::Error| Error::data(format!("csv: {e}"));
        w.write_record(["Region", "Area km²", "Total", "Truth", "Pred", "Matching", "%Matching", "%FP", "%Cover"])
            .map_err(csv_err)?;
        let pct = |v: Option<f64>| v.map_or("N/A".to_string(), |x| format!("{x:.2}"));
        let tally = |v: f64| format!("{}", v.round() as i64);
        for r in &self.rows {
            let c = &r.confusion;
            w.write_record([
                r.region.clone(),
                format!("{:.2}", r.area_km2),
                tally(c.total),
                tally(c.truth),
                tally(c.pred),
                tally(c.tp),
                pct(r.pct_matching),
                pct(Some(r.pct_fp)),
                pct(Some(r.pct_cover)),
            ])
            .map_err(csv_err)?;
        }
        w.write_record([
            "Average".to_string(),
            String::new(),
            String::new(),
            String::new(),
            String::new(),
            String::new(),
            pct(self.avg_matching),
            pct(Some(self.avg_fp)),
            pct(Some(self.avg_cover)),
        ])
        .map_err(csv_err)?;
        w.flush().map_err(|e| Error::data(format!("csv: {e}")))
    }

    pub fn write_csv_file(&self, path: &Path) -> Result<()> {
        let mut buf = Vec::new();
        self.write_csv(&mut buf)?;
        if let Some(dir) = path.parent() {
            std::fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
        }
        std::fs::write(path, buf).map_err(|e| Error::io(path, e))
    }
}

/// One evaluated neighbourhood.
#[derive(Debug, Clone)]
pub struct Region<'a> {
    pub name: String,
    /// Falls back to the footprints' bounding-box area when `None`.
    pub area_km2: Option<f64>,
    pub predicted: &'a CityRegistry,
    pub truth: &'a CityRegistry,
}

pub fn evaluation_report(regions: &[Region<'_>], t: Typology, unit: Unit) -> Result<EvaluationReport> {
    let mut rows = Vec::with_capacity(regions.len());
    for r in regions {
        let c = confusion(r.predicted, r.truth, t, unit)?;
        let km2 = r.area_km2.unwrap_or_else(|| bbox_area_km2(r.truth));
        rows.push((r.name.clone(), km2, c));
    }
    EvaluationReport::from_confusions(t, unit, rows)
}

/// Spherical area of the bounding box of all footprints, in km².
pub fn bbox_area_km2(r: &CityRegistry) -> f64 {
    if r.footprints.is_empty() {
        return 0.0;
    }
    let (mut w, mut s, mut e, mut n) = (f64::INFINITY, f64::INFINITY, f64::NEG_INFINITY, f64::NEG_INFINITY);
    for f in &r.footprints {
        let b = f.geometry.bbox();
        w = w.min(b.west);
        s = s.min(b.south);
        e = e.max(b.east);
        n = n.max(b.north);
    }
    let p = |lon, lat| GeoPoint { lon, lat };
    let ring = [p(w, s), p(e, s), p(e, n), p(w, n), p(w, s)];
    ring_signed_area_m2(&ring).abs() / 1e6
}
