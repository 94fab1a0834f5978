//! SPD against tuned projected SGD on every desk-scale setting of the
//! comparison table, printed as the summary CSV.
//!
//! cargo run --release --example compare_table [replicates]

use proxdist::datagen::Truth;
use proxdist::experiments::{compare_table, write_summary, CompareSpec, Setting};
use proxdist::Family;

fn main() -> proxdist::Result<()> {
    let replicates = std::env::args().nth(1).and_then(|r| r.parse().ok()).unwrap_or(3);
    let (n, p) = (2000, 100);
    let huber = Family::Huber { delta: 2.0 };
    let mut settings = Vec::new();
    for family in [Family::Linear, Family::Logistic, huber] {
        settings.push(Setting::vector(family, Truth::Sparse { s: 5 }, n, p));
        settings.push(Setting::vector(family, Truth::Sparse { s: 20 }, n, p));
        settings.push(Setting::vector(family, Truth::UnitBall, n, p));
    }
    for r in [1, 2, 5] {
        settings.push(Setting::matrix(Truth::LowRank { r }, n, 16, 16));
    }

    let mut spec = CompareSpec::new(settings);
    spec.replicates = replicates;
    let rows = compare_table(&spec)?;
    write_summary(&rows, std::io::stdout().lock())?;
    Ok(())
}
