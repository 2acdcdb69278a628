//! Forward and inverse STFT with the separation defaults (2048/1024,
//! periodic Hann), and the reconstruction error.
//!
//!     cargo run --example stft_roundtrip

use mixclarity::fixtures::{bank_seed, pseudo_mix};
use mixclarity::{istft, stft};

fn main() -> mixclarity::Result<()> {
    let clip = pseudo_mix(bank_seed(0));
    let spec = stft(&clip, 2048, 1024)?;
    println!(
        "{} samples -> {} frames x {} bins (hop {})",
        clip.len(),
        spec.n_frames(),
        spec.n_bins(),
        spec.hop()
    );

    let back = istft(&spec)?;
    let err = clip
        .samples()
        .iter()
        .zip(back.samples())
        .map(|(a, b)| (a - b).powi(2))
        .sum::<f64>()
        / clip.len() as f64;
    println!("round-trip RMS error {:.3e}", err.sqrt());

    let loudest = (0..spec.n_frames())
        .max_by(|&a, &b| spec.frame_energy(a).total_cmp(&spec.frame_energy(b)))
        .unwrap_or(0);
    println!("loudest frame {loudest} starts at sample {}", spec.frame_start(loudest));
    Ok(())
}
