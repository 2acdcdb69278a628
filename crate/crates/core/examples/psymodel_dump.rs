//! Runs the three psychoacoustic model variants on a 1 kHz tone and prints
//! the band energies against their masking thresholds for one frame.
//! `--csv` dumps every partition of that frame instead.
//!
//!     cargo run --example psymodel_dump
//!     cargo run --example psymodel_dump -- --csv

use std::f64::consts::PI;

use mixclarity::psymodel::write_partition_csv;
use mixclarity::{AudioClip, PsyConfig, PsyModel, PsyVariant};

fn main() -> mixclarity::Result<()> {
    let samples: Vec<f64> = (0..44_100)
        .map(|i| 0.25 * (2.0 * PI * 1000.0 * i as f64 / 44_100.0).sin())
        .collect();
    let tone = AudioClip::at_analysis_rate(samples)?;

    if std::env::args().any(|a| a == "--csv") {
        let model = PsyModel::new(PsyVariant::L2pm, PsyConfig::default());
        let analyses = model.analyze(&tone)?;
        return write_partition_csv(&analyses[10..11], std::io::stdout().lock());
    }

    for variant in PsyVariant::ALL {
        let model = PsyModel::new(variant, PsyConfig::default());
        let frames = model.band_frames(&tone)?;
        let frame = &frames[10];
        println!(
            "{variant}: {} partitions, {} bands, {} frames",
            model.table().len(),
            frame.n_bands(),
            frames.len()
        );
        for (sb, (e, mt)) in frame.energy.iter().zip(&frame.threshold).enumerate().take(8) {
            println!("  band {sb:2}  E {:9.3e}  MT {:9.3e}  SMR {:7.2} dB", e, mt, 10.0 * (e / mt).log10());
        }
    }
    Ok(())
}
