//! Evaluation report from raw confusion counts, written as CSV to stdout.

use rooftop::metrics::{Confusion, EvaluationReport, Unit};
use rooftop::Typology;

fn main() -> rooftop::Result<()> {
    // region, km², buildings, truth, predicted, matching
    let raw = [
        ("Old Town", 1.2, 754.0, 153.0, 158.0, 121.0),
        ("Harbour", 1.21, 1009.0, 93.0, 108.0, 86.0),
        ("Riverside", 4.5, 1079.0, 26.0, 44.0, 24.0),
        ("Airport", 2.0, 310.0, 0.0, 3.0, 0.0),
    ];
    let rows = raw
        .iter()
        .map(|&(name, km2, total, truth, pred, tp)| {
            Ok((name.to_string(), km2, Confusion::from_raw(Unit::Count, total, truth, pred, tp)?))
        })
        .collect::<rooftop::Result<Vec<_>>>()?;
    let report = EvaluationReport::from_confusions(Typology::Green, Unit::Count, rows)?;
    report.write_csv(std::io::stdout())
}
