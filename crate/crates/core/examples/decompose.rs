//! Splits a clip into transient+steady-state and residual signals.
//!
//!     cargo run --example decompose               # synthetic mix
//!     cargo run --example decompose -- song.wav   # 44.1 kHz WAV
//!
//! Stems are written next to the system temp dir.

use mixclarity::fixtures::{bank_seed, pseudo_mix};
use mixclarity::{decompose, load_wav, write_wav, AudioClip, SeparationParams, WavFormat};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};

fn report(label: &str, clip: &AudioClip) -> mixclarity::Result<mixclarity::TsrDecomposition> {
    let parts = decompose(clip, &SeparationParams::default())?;
    let (steady, transient, residual) = parts.label_fractions();
    println!(
        "{label:<14} residual energy {:5.1}%   bins S {:4.1}% T {:4.1}% R {:4.1}%",
        100.0 * parts.residual_energy_share(),
        100.0 * steady,
        100.0 * transient,
        100.0 * residual
    );
    Ok(parts)
}

fn main() -> mixclarity::Result<()> {
    let input = match std::env::args().nth(1) {
        Some(path) => load_wav(path)?,
        None => pseudo_mix(bank_seed(3)),
    };
    let parts = report("input", &input)?;

    // White noise splits roughly evenly.
    let mut rng = ChaCha8Rng::seed_from_u64(1);
    let noise: Vec<f64> = (0..441_000)
        .map(|_| 0.1 * Distribution::<f64>::sample(&StandardNormal, &mut rng))
        .collect();
    report("white noise", &AudioClip::at_analysis_rate(noise)?)?;

    let dir = std::env::temp_dir();
    write_wav(&parts.tss, dir.join("decompose.tss.wav"), WavFormat::Float32)?;
    write_wav(&parts.residual, dir.join("decompose.residual.wav"), WavFormat::Float32)?;
    println!("stems in {}", dir.display());
    Ok(())
}
