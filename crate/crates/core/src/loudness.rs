//! Integrated loudness (ITU-R BS.1770-4) for mono clips, and gain-only
//! loudness normalization.
//!
//! The measurement is the standard K-weighted, two-stage gated mean square:
//! 400 ms blocks at 75% overlap, an absolute gate at -70 LUFS, then a
//! relative gate 10 LU below the absolutely-gated loudness.

use std::f64::consts::PI;

use crate::audio::AudioClip;
use crate::error::{Error, Result};

/// Loudness target used throughout the pipeline.
pub const TARGET_LUFS: f64 = -23.0;

const ABSOLUTE_GATE_LUFS: f64 = -70.0;
const RELATIVE_GATE_LU: f64 = -10.0;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LoudnessReading {
    pub integrated_lufs: f64,
    /// Blocks surviving both gates; always at least one.
    pub gated_block_count: usize,
}

/// Direct-form I biquad; `a0` is normalized to 1.
#[derive(Debug, Clone, Copy)]
struct Biquad {
    b0: f64,
    b1: f64,
    b2: f64,
    a1: f64,
    a2: f64,
}

impl Biquad {
    /// Stage 1 of the K-weighting pre-filter (head-related high shelf).
    fn high_shelf(sample_rate: f64) -> Self {
        let gain_db = 3.999_843_853_97;
        let q = 0.707_175_236_955_419_3;
        let center_hz = 1_681.974_450_955_532;
        let k = (PI * center_hz / sample_rate).tan();
        let vh = 10f64.powf(gain_db / 20.0);
        let vb = vh.powf(0.499_666_774_155);
        let a0 = 1.0 + k / q + k * k;
        Self {
            b0: (vh + vb * k / q + k * k) / a0,
            b1: 2.0 * (k * k - vh) / a0,
            b2: (vh - vb * k / q + k * k) / a0,
            a1: 2.0 * (k * k - 1.0) / a0,
            a2: (1.0 - k / q + k * k) / a0,
        }
    }

    /// Stage 2 of the K-weighting pre-filter (RLB high-pass).
    fn high_pass(sample_rate: f64) -> Self {
        let q = 0.500_327_037_325_395_3;
        let center_hz = 38.135_470_876_139_82;
        let k = (PI * center_hz / sample_rate).tan();
        let a0 = 1.0 + k / q + k * k;
        Self {
            b0: 1.0,
            b1: -2.0,
            b2: 1.0,
            a1: 2.0 * (k * k - 1.0) / a0,
            a2: (1.0 - k / q + k * k) / a0,
        }
    }

    fn filter(&self, input: &[f64]) -> Vec<f64> {
        let (mut x1, mut x2, mut y1, mut y2) = (0.0, 0.0, 0.0, 0.0);
        input
            .iter()
            .map(|&x0| {
                let y0 = self.b0 * x0 + self.b1 * x1 + self.b2 * x2 - self.a1 * y1 - self.a2 * y2;
                x2 = x1;
                x1 = x0;
                y2 = y1;
                y1 = y0;
                y0
            })
            .collect()
    }
}

fn block_loudness(mean_square: f64) -> f64 {
    -0.691 + 10.0 * mean_square.log10()
}

/// K-weighted mean square of every 400 ms gating block.
fn block_powers(clip: &AudioClip) -> Result<Vec<f64>> {
    let rate = clip.sample_rate() as f64;
    let block = (0.4 * rate).round() as usize;
    let step = (0.1 * rate).round() as usize;
    if clip.len() < block {
        return Err(Error::ClipTooShort {
            needed: block,
            found: clip.len(),
        });
    }
    let weighted = Biquad::high_pass(rate).filter(&Biquad::high_shelf(rate).filter(clip.samples()));

    // Squares summed per 100 ms step, then four steps per block.
    let steps = weighted.len() / step;
    let step_sums: Vec<f64> = weighted
        .chunks_exact(step)
        .take(steps)
        .map(|c| c.iter().map(|v| v * v).sum())
        .collect();
    let per_block = block / step;
    let n_blocks = (clip.len() - block) / step + 1;
    Ok((0..n_blocks)
        .map(|j| step_sums[j..j + per_block].iter().sum::<f64>() / block as f64)
        .collect())
}

/// Gated integrated loudness of a clip at 44.1 kHz, at least 400 ms long.
pub fn measure_loudness(clip: &AudioClip) -> Result<LoudnessReading> {
    clip.ensure_analysis_rate()?;
    let powers = block_powers(clip)?;

    let above_absolute: Vec<f64> = powers
        .into_iter()
        .filter(|&z| z > 0.0 && block_loudness(z) > ABSOLUTE_GATE_LUFS)
        .collect();
    if above_absolute.is_empty() {
        return Err(Error::ImmeasurableLoudness);
    }
    let mean_abs = above_absolute.iter().sum::<f64>() / above_absolute.len() as f64;
    let relative_gate = block_loudness(mean_abs) + RELATIVE_GATE_LU;

    let gated: Vec<f64> = above_absolute
        .into_iter()
        .filter(|&z| block_loudness(z) > relative_gate)
        .collect();
    // The loudest block always clears the relative gate.
    let mean = gated.iter().sum::<f64>() / gated.len() as f64;
    Ok(LoudnessReading {
        integrated_lufs: block_loudness(mean),
        gated_block_count: gated.len(),
    })
}

/// Linear gain that moves `clip` to `target_lufs`.
pub fn normalization_gain(clip: &AudioClip, target_lufs: f64) -> Result<f64> {
    let reading = measure_loudness(clip)?;
    Ok(10f64.powf((target_lufs - reading.integrated_lufs) / 20.0))
}

/// Applies pure gain so the clip measures `target_lufs`. No limiting: the
/// result may exceed full scale.
pub fn normalize_loudness(clip: &AudioClip, target_lufs: f64) -> Result<AudioClip> {
    let gain = normalization_gain(clip, target_lufs)?;
    Ok(clip.scaled(gain))
}
