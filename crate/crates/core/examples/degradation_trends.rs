//! Scores the synthetic stimulus bank under every degradation and prints the
//! per-level medians and spreads for each variant.
//!
//!     cargo run --release --example degradation_trends

use std::time::Instant;

use mixclarity::eval::trend_report;
use mixclarity::fixtures::{degradation_scores, synthetic_bank};
use mixclarity::{DegradationKind, PsyVariant, RunConfig};

fn main() -> mixclarity::Result<()> {
    let start = Instant::now();
    let bank = synthetic_bank()?;
    let cfg = RunConfig::default();
    let scores = degradation_scores(&bank, &PsyVariant::ALL, cfg.seed, &cfg)?;
    for (variant, points) in &scores {
        let report = trend_report(points)?;
        println!("== {variant}");
        for set in &report.sets {
            println!(
                "{:<10} monotonic {:.1}  spread ref {:.2} -> L6 {:.2}",
                set.set.to_string(),
                set.monotonic_fraction.unwrap_or(f64::NAN),
                set.spread_reference.unwrap_or(f64::NAN),
                set.spread_max_level.unwrap_or(f64::NAN),
            );
            let medians: Vec<String> = set.levels.iter().map(|l| format!("{:6.2}", l.median)).collect();
            println!("           medians {}", medians.join(" "));
        }
        for kind in DegradationKind::SETS {
            println!("  {kind}");
            for (stem, _) in &bank {
                let row: Vec<String> = points
                    .iter()
                    .filter(|p| &p.stimulus == stem && (p.set == kind || p.level_index.is_none()))
                    .map(|p| format!("{:6.2}", p.score))
                    .collect();
                println!("    {stem} {}", row.join(" "));
            }
        }
    }
    eprintln!("took {:.1?}", start.elapsed());
    Ok(())
}
