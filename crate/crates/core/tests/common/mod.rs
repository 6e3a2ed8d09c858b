//! Published evaluation and index tables, plus an independent oracle for the
//! synthetic city.
#![allow(dead_code)]

use std::collections::{BTreeMap, BTreeSet};

use rooftop::synthetic::{PixelRect, SyntheticCity};
use rooftop::tagging::TaggingParams;
use rooftop::Typology;

/// Region, km², total, truth, pred, matching, %matching, %FP, %cover.
pub type EvalRow = (&'static str, f64, f64, f64, f64, f64, f64, f64, f64);

pub struct EvalTable {
    pub typology: Typology,
    pub area: bool,
    pub rows: &'static [EvalRow],
    pub average: [f64; 3],
}

pub const GREEN_COUNT: &[EvalRow] = &[
    ("Berlin 1", 1.20, 754.0, 153.0, 158.0, 121.0, 79.08, 4.91, 16.05),
    ("Berlin 2", 1.21, 1009.0, 93.0, 108.0, 86.0, 92.47, 2.18, 8.52),
    ("Melbourne", 4.50, 1079.0, 26.0, 44.0, 24.0, 92.31, 1.85, 2.22),
    ("New York 1", 1.02, 757.0, 145.0, 89.0, 81.0, 55.86, 1.06, 10.70),
    ("New York 2", 2.05, 1481.0, 73.0, 56.0, 52.0, 71.23, 0.27, 3.51),
    ("Paris", 1.70, 3425.0, 83.0, 78.0, 64.0, 77.11, 0.41, 1.87),
    ("Seattle", 1.80, 598.0, 35.0, 32.0, 29.0, 82.86, 0.50, 4.85),
    ("Zurich", 1.13, 475.0, 115.0, 99.0, 79.0, 68.70, 4.21, 16.63),
];

pub const GREEN_AREA: &[EvalRow] = &[
    ("Berlin 1", 1.20, 673152.0, 234785.0, 234616.0, 180603.0, 76.92, 8.02, 26.83),
    ("Berlin 2", 1.21, 533421.0, 76766.0, 113235.0, 73418.0, 95.64, 7.46, 13.76),
    ("Melbourne", 4.50, 1042319.0, 61436.0, 108072.0, 60071.0, 97.78, 4.61, 5.76),
    ("New York 1", 1.02, 364340.0, 123435.0, 101075.0, 91310.0, 73.97, 2.68, 25.06),
    ("New York 2", 2.05, 889578.0, 263599.0, 245665.0, 245431.0, 93.11, 0.03, 27.59),
    ("Paris", 1.70, 866545.0, 91143.0, 104551.0, 79547.0, 87.28, 2.89, 9.18),
    ("Seattle", 1.80, 771931.0, 76402.0, 70469.0, 68408.0, 89.54, 0.27, 8.86),
    ("Zurich", 1.13, 221836.0, 97946.0, 92136.0, 84677.0, 86.45, 3.36, 38.17),
];

pub const SOLAR_COUNT: &[EvalRow] = &[
    ("Berlin 1", 2.31, 2251.0, 87.0, 90.0, 72.0, 82.76, 0.80, 3.20),
    ("Berlin 2", 1.22, 754.0, 31.0, 43.0, 28.0, 90.32, 1.99, 3.71),
    ("Copenhagen", 1.64, 1397.0, 9.0, 12.0, 7.0, 77.78, 0.36, 0.50),
    ("Marseille", 3.51, 5639.0, 73.0, 79.0, 72.0, 98.63, 0.12, 1.28),
    ("Melbourne", 4.52, 1079.0, 36.0, 59.0, 36.0, 100.00, 2.13, 3.34),
    ("New York 1", 1.54, 1414.0, 26.0, 26.0, 26.0, 100.00, 0.00, 1.84),
    ("New York 2", 5.52, 3079.0, 28.0, 27.0, 24.0, 85.71, 0.10, 0.78),
    ("Washington D.C.", 2.10, 562.0, 37.0, 51.0, 37.0, 100.00, 2.49, 6.58),
];

pub const SOLAR_AREA: &[EvalRow] = &[
    ("Berlin 1", 2.31, 809753.0, 74151.0, 113425.0, 69314.0, 93.48, 5.45, 8.56),
    ("Berlin 2", 1.22, 669506.0, 75217.0, 106371.0, 72403.0, 96.26, 5.07, 10.81),
    ("Copenhagen", 1.64, 465472.0, 18885.0, 21211.0, 15386.0, 81.47, 1.25, 3.31),
    ("Marseille", 3.51, 612603.0, 63316.0, 67446.0, 61976.0, 97.88, 0.89, 10.12),
    ("Melbourne", 4.52, 1042319.0, 76263.0, 184071.0, 76263.0, 100.00, 10.34, 7.32),
    ("New York 1", 1.54, 449264.0, 41442.0, 41442.0, 41442.0, 100.00, 0.00, 9.22),
    ("New York 2", 5.52, 1746588.0, 136615.0, 123048.0, 113901.0, 83.37, 0.52, 6.52),
    ("D.C.", 2.10, 905803.0, 161260.0, 268043.0, 161260.0, 100.00, 11.79, 17.80),
];

pub fn evaluation_tables() -> [EvalTable; 4] {
    [
        EvalTable { typology: Typology::Green, area: false, rows: GREEN_COUNT, average: [77.45, 1.92, 8.04] },
        EvalTable { typology: Typology::Green, area: true, rows: GREEN_AREA, average: [87.59, 3.66, 19.40] },
        EvalTable { typology: Typology::Solar, area: false, rows: SOLAR_COUNT, average: [91.90, 1.00, 2.65] },
        EvalTable { typology: Typology::Solar, area: true, rows: SOLAR_AREA, average: [96.25, 4.71, 10.20] },
    ]
}

/// Rank, city, buildings, tagged, %count, %area, score by count, score by
/// area, score.
pub type IndexRow = (usize, &'static str, u64, u64, f64, f64, i64, i64, i64);

pub const GREEN_INDEX: &[IndexRow] = &[
    (1, "Zurich", 18440, 5760, 31.2, 41.6, 100, 99, 100),
    (2, "Berlin", 28677, 3899, 13.6, 24.8, 43, 58, 51),
    (3, "New York", 34385, 1924, 5.6, 17.2, 17, 39, 28),
    (4, "Copenhagen", 15505, 735, 4.7, 13.1, 14, 29, 22),
    (5, "Paris", 74014, 2766, 3.7, 11.2, 11, 25, 18),
    (6, "San Diego", 28303, 373, 1.3, 11.0, 4, 24, 14),
    (7, "San Jose", 182314, 2650, 1.5, 10.2, 4, 22, 13),
    (8, "Phoenix", 15217, 245, 1.6, 9.9, 4, 21, 13),
    (9, "Melbourne", 16809, 258, 1.5, 8.4, 4, 18, 11),
    (10, "Las Vegas", 20389, 192, 0.9, 7.8, 2, 16, 9),
    (11, "Seattle", 81044, 347, 0.4, 5.6, 1, 11, 6),
    (12, "Los Angeles", 50978, 419, 0.8, 4.7, 2, 9, 6),
    (13, "Luxembourg City", 11131, 125, 1.1, 2.7, 3, 4, 4),
    (14, "Portland", 122900, 302, 0.2, 3.7, 0, 6, 3),
    (15, "San Francisco", 165814, 389, 0.2, 2.6, 0, 3, 2),
    (16, "Vancouver", 163818, 108, 0.1, 1.0, 0, 0, 0),
];

pub const SOLAR_INDEX: &[IndexRow] = &[
    (1, "Las Vegas", 20389, 805, 3.9, 17.3, 86, 85, 86),
    (2, "Zurich", 18440, 838, 4.5, 12.9, 100, 61, 81),
    (3, "Singapore", 51750, 1222, 2.4, 20.0, 51, 99, 75),
    (4, "Phoenix", 15217, 576, 3.8, 14.1, 82, 67, 75),
    (5, "Melbourne", 16809, 486, 2.9, 17.3, 62, 85, 74),
    (6, "Berlin", 28677, 809, 2.8, 11.3, 61, 52, 57),
    (7, "Copenhagen", 15505, 354, 2.3, 9.0, 49, 40, 45),
    (8, "New York", 34385, 677, 2.0, 9.4, 42, 42, 42),
    (9, "Paris", 74014, 1507, 2.0, 9.1, 43, 40, 42),
    (10, "San Diego", 28303, 237, 0.8, 7.4, 16, 31, 24),
    (11, "Los Angeles", 50978, 384, 0.8, 6.3, 14, 25, 20),
    (12, "Seattle", 81044, 263, 0.3, 5.4, 5, 20, 13),
    (13, "San Jose", 182314, 732, 0.4, 4.9, 7, 17, 12),
    (14, "Portland", 122900, 482, 0.4, 4.2, 6, 14, 10),
    (15, "San Francisco", 165814, 560, 0.3, 3.9, 5, 12, 9),
    (16, "Luxembourg City", 11131, 73, 0.7, 1.9, 12, 1, 7),
    (17, "Vancouver", 163818, 145, 0.1, 1.6, 0, 0, 0),
];

/// Rank, city, solar score, green score, overall score.
pub const OVERALL_INDEX: &[(usize, &str, i64, i64, i64)] = &[
    (1, "Zurich", 81, 100, 91),
    (2, "Berlin", 57, 51, 54),
    (3, "Las Vegas", 86, 9, 48),
    (4, "Phoenix", 75, 13, 44),
    (5, "Melbourne", 74, 11, 43),
    (6, "New York", 42, 28, 35),
    (7, "Copenhagen", 45, 22, 34),
    (8, "Paris", 42, 18, 30),
    (9, "San Diego", 24, 14, 19),
    (10, "Los Angeles", 20, 6, 13),
    (11, "San Jose", 12, 13, 13),
    (12, "Seattle", 13, 6, 10),
    (13, "Portland", 10, 3, 7),
    (14, "Luxembourg City", 7, 4, 6),
    (15, "San Francisco", 9, 2, 6),
    (16, "Vancouver", 0, 0, 0),
];

const AUTHALIC_R: f64 = 6_371_007.2;

fn lat_of_row(zoom: u8, gy: u64) -> f64 {
    let n = 256.0 * f64::from(1u32 << zoom);
    (std::f64::consts::PI * (1.0 - 2.0 * gy as f64 / n)).sinh().atan()
}

/// Exact spherical area of a global-pixel rectangle; on the sphere a
/// Mercator pixel rectangle is a lat-lon cell.
pub fn rect_area_m2(zoom: u8, r: &PixelRect) -> f64 {
    let n = 256.0 * f64::from(1u32 << zoom);
    let dlon = 2.0 * std::f64::consts::PI * (r.x1 - r.x0) as f64 / n;
    AUTHALIC_R * AUTHALIC_R * dlon * (lat_of_row(zoom, r.y0).sin() - lat_of_row(zoom, r.y1).sin())
}

pub fn rect_compactness(r: &PixelRect) -> f64 {
    let (w, h) = (r.width() as f64, r.height() as f64);
    4.0 * std::f64::consts::PI * w * h / (2.0 * (w + h)).powi(2)
}

/// Expected (green, solar) label for every footprint id: a painted feature
/// that survives despeckling tags every part of each parent it significantly
/// overlaps.
pub fn expected_labels(city: &SyntheticCity, params: &TaggingParams) -> BTreeMap<String, (bool, bool)> {
    let zoom = city.spec.zoom;
    let mut hit: BTreeMap<Typology, BTreeSet<&str>> = BTreeMap::new();
    for f in &city.features {
        if f.rect.area() < city.spec.min_pixels {
            continue;
        }
        let pred_area = rect_area_m2(zoom, &f.rect);
        let compact = rect_compactness(&f.rect);
        for b in &city.buildings {
            let Some(ov) = f.rect.intersection(&b.rect) else { continue };
            let o = rect_area_m2(zoom, &ov);
            if o >= params.min_overlap_m2 && o / pred_area >= params.min_overlap_ratio && compact >= params.min_compactness {
                hit.entry(f.typology).or_default().insert(b.parent_id.as_str());
            }
        }
    }
    let has = |t: Typology, p: &str| hit.get(&t).is_some_and(|s| s.contains(p));
    city.buildings
        .iter()
        .map(|b| (b.id.clone(), (has(Typology::Green, &b.parent_id), has(Typology::Solar, &b.parent_id))))
        .collect()
}
