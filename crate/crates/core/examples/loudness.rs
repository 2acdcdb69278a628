//! Integrated loudness of a few test signals, and normalisation to -23 LUFS.
//!
//!     cargo run --example loudness

use std::f64::consts::PI;

use mixclarity::{measure_loudness, normalize_loudness, AudioClip, TARGET_LUFS};

fn sine(freq: f64, amp: f64, seconds: f64) -> AudioClip {
    let n = (seconds * 44_100.0) as usize;
    let samples = (0..n).map(|i| amp * (2.0 * PI * freq * i as f64 / 44_100.0).sin()).collect();
    AudioClip::at_analysis_rate(samples).unwrap()
}

fn main() -> mixclarity::Result<()> {
    for (label, clip) in [
        ("997 Hz full scale", sine(997.0, 1.0, 5.0)),
        ("997 Hz at -20 dBFS", sine(997.0, 0.1, 5.0)),
        ("100 Hz full scale", sine(100.0, 1.0, 5.0)),
        ("8 kHz full scale", sine(8000.0, 1.0, 5.0)),
    ] {
        let reading = measure_loudness(&clip)?;
        let normalized = normalize_loudness(&clip, TARGET_LUFS)?;
        println!(
            "{label:<20} {:7.2} LUFS  ({} blocks)  -> {:7.2} LUFS after normalisation",
            reading.integrated_lufs,
            reading.gated_block_count,
            measure_loudness(&normalized)?.integrated_lufs
        );
    }

    // Silence has no loudness to normalise.
    let silence = AudioClip::at_analysis_rate(vec![0.0; 44_100])?;
    println!("silence              {}", measure_loudness(&silence).unwrap_err());
    Ok(())
}
