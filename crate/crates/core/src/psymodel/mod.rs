//! MPEG-1 psychoacoustic model 2: per-band energies and masking thresholds.
//!
//! Each analysis frame is a Hann-windowed 1024-point FFT centred on one
//! granule. Magnitude and phase are extrapolated linearly from the two
//! previous frames; the prediction error gives an unpredictability measure
//! per line. Energy and unpredictability are pooled into partitions of about
//! a third of a critical band, spread across partitions, and the spread
//! unpredictability sets a tonality index that picks the masking offset
//! between tone-masking-noise and noise-masking-tone. The result is floored
//! at the threshold in quiet.
//!
//! Three variants are provided:
//!
//! * [`PsyVariant::L2pm`]: Layer II flavour with 1152-sample granules,
//!   symmetric spreading, results in 32 linear bands.
//! * [`PsyVariant::L3pm`]: Layer III flavour with 576-sample granules,
//!   asymmetric spreading, fixed unpredictability above line 205, results in
//!   the long-block scale-factor bands.
//! * [`PsyVariant::ModifiedL3pm`]: Layer III thresholds spread back to the
//!   FFT lines and regrouped into the 32 linear bands.
//!
//! Only long blocks are analysed. Perceptual entropy is computed and the
//! block-switch decision reported, but short blocks are never used.
//!
//! Levels follow the usual convention that a full-scale sine sits at 96 dB
//! SPL; all energies are in linear units of that scale.

pub mod bands;
pub mod partition;

use std::f64::consts::PI;
use std::fmt;
use std::io::Write;
use std::str::FromStr;

use rustfft::num_complex::Complex64;
use rustfft::FftPlanner;
use serde::{Deserialize, Serialize};

use crate::audio::AudioClip;
use crate::error::{Error, Result};

pub use bands::{map_to_bands, threshold_density, BandFrame, BandLayout};
pub use partition::{PartitionTable, SpreadingShape, FFT_LEN, N_BINS};

/// Level of a full-scale sine in the model's absolute domain, dB SPL.
pub const FULL_SCALE_SPL_DB: f64 = 96.0;

/// Lines from here up get a fixed unpredictability in the Layer III model.
pub const L3_FIXED_UNPREDICTABILITY_FROM: usize = 206;
pub const L3_FIXED_UNPREDICTABILITY: f64 = 0.4;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum PsyVariant {
    #[serde(rename = "L2PM")]
    L2pm,
    #[serde(rename = "L3PM")]
    L3pm,
    #[serde(rename = "ModifiedL3PM")]
    ModifiedL3pm,
}

impl PsyVariant {
    pub const ALL: [PsyVariant; 3] = [PsyVariant::L2pm, PsyVariant::L3pm, PsyVariant::ModifiedL3pm];

    /// Samples between successive analysis frames.
    pub fn granule(self) -> usize {
        match self {
            PsyVariant::L2pm => 1152,
            PsyVariant::L3pm | PsyVariant::ModifiedL3pm => 576,
        }
    }

    pub fn spreading(self) -> SpreadingShape {
        match self {
            PsyVariant::L2pm => SpreadingShape::Layer2,
            PsyVariant::L3pm | PsyVariant::ModifiedL3pm => SpreadingShape::Layer3,
        }
    }

    pub fn band_layout(self) -> BandLayout {
        match self {
            PsyVariant::L2pm | PsyVariant::ModifiedL3pm => BandLayout::linear32(),
            PsyVariant::L3pm => BandLayout::layer3(),
        }
    }

    fn layer3_threshold(self) -> bool {
        !matches!(self, PsyVariant::L2pm)
    }
}

impl fmt::Display for PsyVariant {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            PsyVariant::L2pm => "L2PM",
            PsyVariant::L3pm => "L3PM",
            PsyVariant::ModifiedL3pm => "ModifiedL3PM",
        })
    }
}

impl FromStr for PsyVariant {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "l2pm" => Ok(PsyVariant::L2pm),
            "l3pm" => Ok(PsyVariant::L3pm),
            "mod-l3pm" | "modified-l3pm" | "modifiedl3pm" => Ok(PsyVariant::ModifiedL3pm),
            other => Err(Error::InvalidParameter(format!("unknown variant {other:?}"))),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct PsyConfig {
    /// Tone-masking-noise offset, dB.
    pub tmn_db: f64,
    /// Noise-masking-tone offset, dB.
    pub nmt_db: f64,
    /// Perceptual entropy above which a coder would switch to short blocks.
    pub pe_switch_threshold: f64,
    /// Overrides the variant's granule advance when set.
    pub advance: Option<usize>,
}

impl Default for PsyConfig {
    fn default() -> Self {
        Self {
            tmn_db: 29.0,
            nmt_db: 6.0,
            pe_switch_threshold: 1800.0,
            advance: None,
        }
    }
}

/// Spectrum, prediction and unpredictability of one analysis frame.
#[derive(Debug, Clone, PartialEq)]
pub struct PsyFrame {
    pub index: usize,
    /// First sample under the window (may be negative; outside is zero).
    pub start: isize,
    pub magnitude: Vec<f64>,
    pub phase: Vec<f64>,
    pub predicted_magnitude: Vec<f64>,
    pub predicted_phase: Vec<f64>,
    /// In `[0, 1]`; zero for lines with no energy.
    pub unpredictability: Vec<f64>,
}

impl PsyFrame {
    pub fn bin_energy(&self) -> Vec<f64> {
        self.magnitude.iter().map(|r| r * r).collect()
    }
}

/// Per-partition intermediate values, exposed for inspection and dumps.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct PartitionDetail {
    pub energy: Vec<f64>,
    pub weighted_unpredictability: Vec<f64>,
    pub spread_energy: Vec<f64>,
    /// Spread unpredictability divided by spread energy.
    pub spread_unpredictability: Vec<f64>,
    pub tonality: Vec<f64>,
    pub snr_db: Vec<f64>,
    /// Spread threshold before the quiet floor.
    pub nb: Vec<f64>,
    /// Final threshold after the quiet floor.
    pub threshold: Vec<f64>,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct PerceptualEntropy {
    pub pe: f64,
    /// Whether a coder would switch to short blocks. Reported only.
    pub switch_to_short: bool,
}

#[derive(Debug, Clone, PartialEq)]
pub struct FrameAnalysis {
    pub partitions: PartitionDetail,
    pub entropy: PerceptualEntropy,
    pub bands: BandFrame,
}

/// The ISO Hann window, offset by half a sample.
fn analysis_window() -> Vec<f64> {
    (0..FFT_LEN)
        .map(|i| 0.5 - 0.5 * (2.0 * PI * (i as f64 + 0.5) / FFT_LEN as f64).cos())
        .collect()
}

/// Amplitude scale that puts a full-scale sine at [`FULL_SCALE_SPL_DB`].
///
/// A sine of amplitude 1 windowed by Hann carries `3 N^2 / 32` of one-sided
/// spectral energy.
pub fn level_scale() -> f64 {
    let n = FFT_LEN as f64;
    (10f64.powf(FULL_SCALE_SPL_DB / 10.0) / (3.0 * n * n / 32.0)).sqrt()
}

fn unpredictability(r: f64, phi: f64, r_pred: f64, phi_pred: f64) -> f64 {
    let denom = r + r_pred.abs();
    if denom == 0.0 {
        return 0.0;
    }
    let dx = r * phi.cos() - r_pred * phi_pred.cos();
    let dy = r * phi.sin() - r_pred * phi_pred.sin();
    ((dx * dx + dy * dy).sqrt() / denom).clamp(0.0, 1.0)
}

/// FFT frames with unpredictability for every granule of `clip`.
pub fn psy_frames(clip: &AudioClip, variant: PsyVariant, config: &PsyConfig) -> Result<Vec<PsyFrame>> {
    clip.ensure_analysis_rate()?;
    let advance = config.advance.unwrap_or_else(|| variant.granule());
    if advance == 0 {
        return Err(Error::InvalidParameter("frame advance must be positive".into()));
    }
    if clip.len() < advance {
        return Err(Error::ClipTooShort {
            needed: advance,
            found: clip.len(),
        });
    }
    let n_frames = clip.len() / advance;
    let window = analysis_window();
    let scale = level_scale();
    let fft = FftPlanner::new().plan_fft_forward(FFT_LEN);
    let samples = clip.samples();
    let fixed_high = variant.layer3_threshold();

    let mut frames: Vec<PsyFrame> = Vec::with_capacity(n_frames);
    let mut buf = vec![Complex64::new(0.0, 0.0); FFT_LEN];
    for index in 0..n_frames {
        // Window centred on the granule.
        let start = (index * advance + advance / 2) as isize - (FFT_LEN / 2) as isize;
        for (i, slot) in buf.iter_mut().enumerate() {
            let idx = start + i as isize;
            let x = if idx >= 0 && (idx as usize) < samples.len() {
                samples[idx as usize]
            } else {
                0.0
            };
            *slot = Complex64::new(x * window[i] * scale, 0.0);
        }
        fft.process(&mut buf);
        let magnitude: Vec<f64> = buf[..N_BINS].iter().map(|c| c.norm()).collect();
        let phase: Vec<f64> = buf[..N_BINS].iter().map(|c| c.arg()).collect();

        let (predicted_magnitude, predicted_phase): (Vec<f64>, Vec<f64>) = match index {
            0 => (vec![0.0; N_BINS], vec![0.0; N_BINS]),
            1 => {
                let prev = &frames[0];
                (
                    prev.magnitude.iter().map(|r| 2.0 * r).collect(),
                    prev.phase.iter().map(|f| 2.0 * f).collect(),
                )
            }
            _ => {
                let (older, prev) = (&frames[index - 2], &frames[index - 1]);
                (
                    (0..N_BINS).map(|w| 2.0 * prev.magnitude[w] - older.magnitude[w]).collect(),
                    (0..N_BINS).map(|w| 2.0 * prev.phase[w] - older.phase[w]).collect(),
                )
            }
        };

        let unpredictability = (0..N_BINS)
            .map(|w| {
                if magnitude[w] == 0.0 {
                    0.0
                } else if fixed_high && w >= L3_FIXED_UNPREDICTABILITY_FROM {
                    L3_FIXED_UNPREDICTABILITY
                } else {
                    unpredictability(magnitude[w], phase[w], predicted_magnitude[w], predicted_phase[w])
                }
            })
            .collect();

        frames.push(PsyFrame {
            index,
            start,
            magnitude,
            phase,
            predicted_magnitude,
            predicted_phase,
            unpredictability,
        });
    }
    Ok(frames)
}

/// Pools line energy `r^2` and energy-weighted unpredictability `r^2 c` into
/// partitions.
pub fn partition_energy(frame: &PsyFrame, table: &PartitionTable) -> (Vec<f64>, Vec<f64>) {
    let mut energy = vec![0.0; table.len()];
    let mut weighted = vec![0.0; table.len()];
    for (w, (&r, &c)) in frame.magnitude.iter().zip(&frame.unpredictability).enumerate() {
        let b = table.partition_of(w);
        let e = r * r;
        energy[b] += e;
        weighted[b] += e * c;
    }
    (energy, weighted)
}

/// Spreads partition energy and unpredictability, derives tonality, and
/// returns the threshold before the quiet floor.
pub fn spread_and_threshold(
    energy: &[f64],
    weighted_unpredictability: &[f64],
    table: &PartitionTable,
    config: &PsyConfig,
) -> PartitionDetail {
    let n = table.len();
    let mut detail = PartitionDetail {
        energy: energy.to_vec(),
        weighted_unpredictability: weighted_unpredictability.to_vec(),
        spread_energy: vec![0.0; n],
        spread_unpredictability: vec![0.0; n],
        tonality: vec![0.0; n],
        snr_db: vec![0.0; n],
        nb: vec![0.0; n],
        threshold: vec![0.0; n],
    };
    for b in 0..n {
        let row = &table.spread()[b];
        let ecb: f64 = row.iter().zip(energy).map(|(s, e)| s * e).sum();
        let ctb: f64 = row.iter().zip(weighted_unpredictability).map(|(s, c)| s * c).sum();
        let cb = if ecb > 0.0 { ctb / ecb } else { 0.0 };
        // ln(0) = -inf clamps to fully tonal; irrelevant when ecb is zero.
        let tb = (-0.299 - 0.43 * cb.ln()).clamp(0.0, 1.0);
        let snr = tb * config.tmn_db + (1.0 - tb) * config.nmt_db;
        detail.spread_energy[b] = ecb;
        detail.spread_unpredictability[b] = cb;
        detail.tonality[b] = tb;
        detail.snr_db[b] = snr;
        detail.nb[b] = ecb * table.spread_norm()[b] * 10f64.powf(-snr / 10.0);
    }
    detail
}

/// Final threshold: the larger of the spread threshold and the threshold in
/// quiet, per partition.
pub fn apply_quiet_floor(nb: &[f64], table: &PartitionTable) -> Vec<f64> {
    nb.iter()
        .zip(table.partitions())
        .map(|(&t, p)| t.max(p.quiet_threshold()))
        .collect()
}

/// Perceptual entropy of one long block: `sum numlines * ln((e+1)/(thr+1))`
/// over partitions whose energy exceeds their threshold.
pub fn perceptual_entropy(
    threshold: &[f64],
    energy: &[f64],
    table: &PartitionTable,
    config: &PsyConfig,
) -> PerceptualEntropy {
    let pe = table
        .partitions()
        .iter()
        .zip(threshold.iter().zip(energy))
        .filter(|(_, (t, e))| e > t)
        .map(|(p, (t, e))| p.width() as f64 * ((e + 1.0) / (t + 1.0)).ln())
        .sum();
    PerceptualEntropy {
        pe,
        switch_to_short: pe > config.pe_switch_threshold,
    }
}

/// A configured model: partition table, band layout and constants.
#[derive(Debug, Clone)]
pub struct PsyModel {
    variant: PsyVariant,
    config: PsyConfig,
    table: PartitionTable,
    layout: BandLayout,
}

impl PsyModel {
    pub fn new(variant: PsyVariant, config: PsyConfig) -> Self {
        Self {
            variant,
            config,
            table: PartitionTable::standard(variant.spreading()),
            layout: variant.band_layout(),
        }
    }

    pub fn variant(&self) -> PsyVariant {
        self.variant
    }

    pub fn config(&self) -> &PsyConfig {
        &self.config
    }

    pub fn table(&self) -> &PartitionTable {
        &self.table
    }

    pub fn layout(&self) -> &BandLayout {
        &self.layout
    }

    pub fn frames(&self, clip: &AudioClip) -> Result<Vec<PsyFrame>> {
        psy_frames(clip, self.variant, &self.config)
    }

    pub fn analyze_frame(&self, frame: &PsyFrame) -> Result<FrameAnalysis> {
        let (energy, weighted) = partition_energy(frame, &self.table);
        let mut partitions = spread_and_threshold(&energy, &weighted, &self.table, &self.config);
        partitions.threshold = apply_quiet_floor(&partitions.nb, &self.table);
        let entropy = perceptual_entropy(&partitions.threshold, &energy, &self.table, &self.config);
        let bands = map_to_bands(
            frame.index,
            &partitions.threshold,
            &frame.bin_energy(),
            &self.table,
            &self.layout,
        )?;
        Ok(FrameAnalysis {
            partitions,
            entropy,
            bands,
        })
    }

    pub fn analyze(&self, clip: &AudioClip) -> Result<Vec<FrameAnalysis>> {
        self.frames(clip)?
            .iter()
            .map(|f| self.analyze_frame(f))
            .collect()
    }

    /// Band energies and thresholds for every frame of `clip`.
    pub fn band_frames(&self, clip: &AudioClip) -> Result<Vec<BandFrame>> {
        Ok(self.analyze(clip)?.into_iter().map(|a| a.bands).collect())
    }
}

/// Per-partition CSV dump:
/// `frame,partition,e,c_spread,tb,nb,mt`.
pub fn write_partition_csv<W: Write>(analyses: &[FrameAnalysis], out: W) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(["frame", "partition", "e", "c_spread", "tb", "nb", "mt"])?;
    for (f, a) in analyses.iter().enumerate() {
        let p = &a.partitions;
        for b in 0..p.energy.len() {
            w.write_record([
                f.to_string(),
                b.to_string(),
                format!("{:e}", p.energy[b]),
                format!("{:e}", p.spread_unpredictability[b]),
                format!("{}", p.tonality[b]),
                format!("{:e}", p.nb[b]),
                format!("{:e}", p.threshold[b]),
            ])?;
        }
    }
    w.flush()?;
    Ok(())
}

/// Per-band CSV dump: `frame,sb,E,MT`.
pub fn write_band_csv<W: Write>(frames: &[BandFrame], out: W) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(["frame", "sb", "E", "MT"])?;
    for f in frames {
        for sb in 0..f.n_bands() {
            w.write_record([
                f.frame_index.to_string(),
                sb.to_string(),
                format!("{:e}", f.energy[sb]),
                format!("{:e}", f.threshold[sb]),
            ])?;
        }
    }
    w.flush()?;
    Ok(())
}
