//! Clarity scores of one clip under all three model variants.
//!
//!     cargo run --release --example analyze_clip               # synthetic mixes
//!     cargo run --release --example analyze_clip -- song.wav

use mixclarity::fixtures::{bank_seed, pseudo_mix};
use mixclarity::{analyze_clip_variants, load_wav, MetricConfig, PsyConfig, PsyVariant, SeparationParams};

fn main() -> mixclarity::Result<()> {
    let clips = match std::env::args().nth(1) {
        Some(path) => vec![(path.clone(), load_wav(path)?)],
        None => (0..3).map(|i| (format!("mix{i:02}"), pseudo_mix(bank_seed(i)))).collect(),
    };
    for (name, clip) in &clips {
        let results = analyze_clip_variants(
            clip,
            &PsyVariant::ALL,
            &SeparationParams::default(),
            &PsyConfig::default(),
            &MetricConfig::default(),
        )?;
        for r in results {
            println!(
                "{name}  {:<13} {:7.2} dB   P5(TSS) {:.3}  P95(R) {:.3}  {} frames, {} windows",
                r.variant.to_string(),
                r.overall_score_db,
                r.p5_tss,
                r.p95_r,
                r.frames(),
                r.windows.len()
            );
        }
    }
    Ok(())
}
