//! Cross-city rooftop index from registry summaries.

use rooftop::index::{build_index_tables, round_half_up};
use rooftop::tagging::{RegistrySummary, TypologyTotals};

fn city(name: &str, buildings: u64, area: f64, green: (u64, f64), solar: (u64, f64)) -> RegistrySummary {
    RegistrySummary {
        city: name.into(),
        buildings,
        total_area_m2: area,
        green: Some(TypologyTotals { count: green.0, area_m2: green.1 }),
        solar: Some(TypologyTotals { count: solar.0, area_m2: solar.1 }),
    }
}

fn main() -> rooftop::Result<()> {
    let cities = [
        city("Northport", 18_000, 9.0e6, (5_600, 3.7e6), (800, 1.1e6)),
        city("Southvale", 28_000, 1.4e7, (3_900, 3.4e6), (790, 1.6e6)),
        city("Eastham", 20_000, 1.1e7, (190, 0.8e6), (780, 1.9e6)),
        city("Westbury", 160_000, 6.0e7, (110, 0.6e6), (140, 0.9e6)),
    ];
    let tables = build_index_tables(&cities)?;
    for (label, rows) in [("green", &tables.green), ("solar", &tables.solar)] {
        println!("{label}:");
        for r in rows {
            println!(
                "  {:>2} {:<10} {:>5.1} {:>5.1} {:>4} {:>4} {:>4}",
                r.rank,
                r.city,
                r.pct_count,
                r.pct_area,
                round_half_up(r.score_by_count),
                round_half_up(r.score_by_area),
                round_half_up(r.score)
            );
        }
    }
    println!("overall:");
    for r in &tables.overall {
        println!("  {:>2} {:<10} {:>4}", r.rank, r.city, round_half_up(r.overall_score));
    }
    Ok(())
}
