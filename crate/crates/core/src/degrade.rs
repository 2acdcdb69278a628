//! Degraded-stimulus generation: pink noise, hall reverb and percentile
//! clipping at seven severities each, every output renormalised to
//! -23 LUFS.

use std::fmt;
use std::path::{Path, PathBuf};

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use rayon::prelude::*;
use rustfft::num_complex::Complex64;
use rustfft::FftPlanner;
use serde::{Deserialize, Serialize};

use crate::audio::{write_wav, AudioClip, WavFormat, ANALYSIS_RATE};
use crate::error::{Error, Result};
use crate::loudness::{normalize_loudness, TARGET_LUFS};
use crate::metric::percentile;

/// Noise and wet-reverb levels, dBFS, from mildest to most severe.
pub const LEVEL_DBFS: [f64; 7] = [-36.0, -30.0, -24.0, -18.0, -12.0, -6.0, 0.0];
/// Clipping percentile ranges, %, from mildest to most severe.
pub const CLIP_RANGE_PERCENT: [f64; 7] = [90.0, 80.0, 70.0, 60.0, 50.0, 40.0, 30.0];

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum DegradationKind {
    Reference,
    PinkNoise,
    Reverb,
    Clipping,
}

impl DegradationKind {
    pub const SETS: [DegradationKind; 3] = [
        DegradationKind::PinkNoise,
        DegradationKind::Reverb,
        DegradationKind::Clipping,
    ];

    pub fn name(self) -> &'static str {
        match self {
            DegradationKind::Reference => "reference",
            DegradationKind::PinkNoise => "pink_noise",
            DegradationKind::Reverb => "reverb",
            DegradationKind::Clipping => "clipping",
        }
    }

    /// Severity values for each level (empty for the reference).
    pub fn levels(self) -> &'static [f64] {
        match self {
            DegradationKind::Reference => &[],
            DegradationKind::PinkNoise | DegradationKind::Reverb => &LEVEL_DBFS,
            DegradationKind::Clipping => &CLIP_RANGE_PERCENT,
        }
    }

    fn tag(self) -> u64 {
        self as u64
    }
}

impl fmt::Display for DegradationKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl std::str::FromStr for DegradationKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "reference" => Ok(DegradationKind::Reference),
            "pink_noise" => Ok(DegradationKind::PinkNoise),
            "reverb" => Ok(DegradationKind::Reverb),
            "clipping" => Ok(DegradationKind::Clipping),
            other => Err(Error::InvalidParameter(format!("unknown degradation set {other:?}"))),
        }
    }
}

/// One degradation to apply.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DegradationSpec {
    pub kind: DegradationKind,
    pub level_index: usize,
    /// dBFS for noise and reverb, percent for clipping, unused for the
    /// reference.
    pub level_value: f64,
    pub seed: u64,
}

/// Synthetic hall impulse response settings.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct ReverbConfig {
    pub length_s: f64,
    pub low_crossover_hz: f64,
    pub high_crossover_hz: f64,
    pub rt60_low_s: f64,
    pub rt60_high_s: f64,
}

impl Default for ReverbConfig {
    fn default() -> Self {
        Self {
            length_s: 4.0,
            low_crossover_hz: 500.0,
            high_crossover_hz: 8000.0,
            rt60_low_s: 3.0,
            rt60_high_s: 1.5,
        }
    }
}

impl ReverbConfig {
    /// Decay time of the middle band: geometric mean of the outer two.
    pub fn rt60_mid_s(&self) -> f64 {
        (self.rt60_low_s * self.rt60_high_s).sqrt()
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.length_s > 0.0 && self.rt60_low_s > 0.0 && self.rt60_high_s > 0.0) {
            return Err(Error::InvalidParameter("reverb times must be positive".into()));
        }
        if !(0.0 < self.low_crossover_hz && self.low_crossover_hz < self.high_crossover_hz) {
            return Err(Error::InvalidParameter("reverb crossovers must rise".into()));
        }
        Ok(())
    }
}

fn gaussian(len: usize, seed: u64) -> Vec<f64> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    (0..len).map(|_| Distribution::<f64>::sample(&StandardNormal, &mut rng)).collect()
}

fn forward(signal: &[f64], n: usize) -> Vec<Complex64> {
    let mut buf: Vec<Complex64> = signal.iter().map(|&x| Complex64::new(x, 0.0)).collect();
    buf.resize(n, Complex64::new(0.0, 0.0));
    FftPlanner::new().plan_fft_forward(n).process(&mut buf);
    buf
}

fn inverse_real(mut spectrum: Vec<Complex64>) -> Vec<f64> {
    let n = spectrum.len();
    FftPlanner::new().plan_fft_inverse(n).process(&mut spectrum);
    spectrum.iter().map(|c| c.re / n as f64).collect()
}

fn rms(x: &[f64]) -> f64 {
    (x.iter().map(|s| s * s).sum::<f64>() / x.len() as f64).sqrt()
}

/// Seeded pink (1/f power) noise with RMS 1.
pub fn gen_pink_noise(len: usize, seed: u64) -> Result<AudioClip> {
    if len == 0 {
        return Err(Error::EmptyClip);
    }
    let white = gaussian(len, seed);
    let mut spectrum = forward(&white, len);
    spectrum[0] = Complex64::new(0.0, 0.0);
    for (k, bin) in spectrum.iter_mut().enumerate().skip(1) {
        // Symmetric index keeps the output real.
        let f = k.min(len - k) as f64;
        *bin /= f.sqrt();
    }
    let mut noise = inverse_real(spectrum);
    let level = rms(&noise);
    if level > 0.0 {
        noise.iter_mut().for_each(|s| *s /= level);
    }
    AudioClip::at_analysis_rate(noise)
}

/// Adds pink noise at `level_dbfs` RMS, then renormalises loudness.
pub fn apply_pink_noise(clip: &AudioClip, level_dbfs: f64, seed: u64) -> Result<AudioClip> {
    let noise = gen_pink_noise(clip.len(), seed)?;
    let gain = 10f64.powf(level_dbfs / 20.0);
    let mixed = clip
        .samples()
        .iter()
        .zip(noise.samples())
        .map(|(x, n)| x + gain * n)
        .collect();
    normalize_loudness(&clip.with_samples(mixed)?, TARGET_LUFS)
}

/// Splits `signal` into three brick-wall bands at the two crossovers.
/// The signal is zero-padded to twice its length first so nothing wraps
/// around.
fn split_bands(signal: &[f64], low_hz: f64, high_hz: f64, rate: f64) -> [Vec<f64>; 3] {
    let len = signal.len();
    let n = 2 * len;
    let spectrum = forward(signal, n);
    let band_of = |k: usize| {
        let f = k.min(n - k) as f64 * rate / n as f64;
        if f < low_hz {
            0
        } else if f < high_hz {
            1
        } else {
            2
        }
    };
    let pick = |band: usize| {
        let s = spectrum
            .iter()
            .enumerate()
            .map(|(k, &c)| if band_of(k) == band { c } else { Complex64::new(0.0, 0.0) })
            .collect();
        let mut out = inverse_real(s);
        out.truncate(len);
        out
    };
    [pick(0), pick(1), pick(2)]
}

/// Noise-burst hall impulse response with a slower decay at low frequencies,
/// normalised to unit energy.
pub fn synth_hall_ir(seed: u64, cfg: &ReverbConfig) -> Result<AudioClip> {
    cfg.validate()?;
    let rate = ANALYSIS_RATE as f64;
    let len = (cfg.length_s * rate).round() as usize;
    let bands = split_bands(&gaussian(len, seed), cfg.low_crossover_hz, cfg.high_crossover_hz, rate);
    let rt60 = [cfg.rt60_low_s, cfg.rt60_mid_s(), cfg.rt60_high_s];
    let mut ir = vec![0.0; len];
    for (band, t60) in bands.iter().zip(rt60) {
        for (i, (out, x)) in ir.iter_mut().zip(band).enumerate() {
            // -60 dB amplitude at t60.
            *out += x * 10f64.powf(-3.0 * (i as f64 / rate) / t60);
        }
    }
    let energy = ir.iter().map(|s| s * s).sum::<f64>().sqrt();
    ir.iter_mut().for_each(|s| *s /= energy);
    AudioClip::at_analysis_rate(ir)
}

/// Linear convolution by FFT, full length.
pub fn convolve(a: &[f64], b: &[f64]) -> Vec<f64> {
    let out_len = a.len() + b.len() - 1;
    let n = out_len.next_power_of_two();
    let fa = forward(a, n);
    let fb = forward(b, n);
    let product = fa.iter().zip(&fb).map(|(x, y)| x * y).collect();
    let mut out = inverse_real(product);
    out.truncate(out_len);
    out
}

/// Adds a peak-normalised reverberant copy at `wet_level_dbfs`, keeps the
/// original length and renormalises loudness.
pub fn apply_reverb(clip: &AudioClip, wet_level_dbfs: f64, seed: u64, cfg: &ReverbConfig) -> Result<AudioClip> {
    let ir = synth_hall_ir(seed, cfg)?;
    let wet = convolve(clip.samples(), ir.samples());
    let peak = wet[..clip.len()].iter().fold(0.0f64, |m, s| m.max(s.abs()));
    if peak == 0.0 {
        return Err(Error::DegenerateClip("reverberant signal is silent".into()));
    }
    let gain = 10f64.powf(wet_level_dbfs / 20.0) / peak;
    let mixed = clip
        .samples()
        .iter()
        .zip(&wet)
        .map(|(x, w)| x + gain * w)
        .collect();
    normalize_loudness(&clip.with_samples(mixed)?, TARGET_LUFS)
}

/// Clamp bounds for a percentile range centred on the median.
pub fn clip_bounds(samples: &[f64], range_percent: f64) -> Result<(f64, f64)> {
    if !(range_percent > 0.0 && range_percent <= 100.0) {
        return Err(Error::InvalidParameter(format!(
            "clipping range {range_percent}% outside (0, 100]"
        )));
    }
    let half = range_percent / 200.0;
    let lower = percentile(samples, 0.5 - half)?;
    let upper = percentile(samples, 0.5 + half)?;
    if !(upper > lower) {
        return Err(Error::DegenerateClip(format!(
            "clipping bounds collapse to {lower} at {range_percent}%"
        )));
    }
    Ok((lower, upper))
}

/// Clamps samples to a percentile range about the median, then
/// renormalises loudness.
pub fn apply_clipping(clip: &AudioClip, range_percent: f64) -> Result<AudioClip> {
    let (lower, upper) = clip_bounds(clip.samples(), range_percent)?;
    let clipped = clip.samples().iter().map(|s| s.clamp(lower, upper)).collect();
    normalize_loudness(&clip.with_samples(clipped)?, TARGET_LUFS)
}

/// Applies one degradation to an already-normalised clip.
pub fn apply(clip: &AudioClip, spec: &DegradationSpec, reverb: &ReverbConfig) -> Result<AudioClip> {
    match spec.kind {
        DegradationKind::Reference => normalize_loudness(clip, TARGET_LUFS),
        DegradationKind::PinkNoise => apply_pink_noise(clip, spec.level_value, spec.seed),
        DegradationKind::Reverb => apply_reverb(clip, spec.level_value, spec.seed, reverb),
        DegradationKind::Clipping => apply_clipping(clip, spec.level_value),
    }
}

/// Seed for one (clip, set) pair, independent of processing order. Every
/// level of a set shares it, so the noise track or hall response stays the
/// same along the severity ladder and only the level changes.
pub fn derive_seed(base: u64, clip_index: usize, kind: DegradationKind) -> u64 {
    // splitmix64 finaliser over a packed key.
    let mut z = base
        ^ (clip_index as u64).wrapping_mul(0x9E37_79B9_7F4A_7C15)
        ^ kind.tag().wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// Reference plus every set and level for one clip, in manifest order.
pub fn dataset_specs(clip_index: usize, seed: u64) -> Vec<DegradationSpec> {
    let mut specs = vec![DegradationSpec {
        kind: DegradationKind::Reference,
        level_index: 0,
        level_value: f64::NAN,
        seed: derive_seed(seed, clip_index, DegradationKind::Reference),
    }];
    for kind in DegradationKind::SETS {
        for (level_index, &level_value) in kind.levels().iter().enumerate() {
            specs.push(DegradationSpec {
                kind,
                level_index,
                level_value,
                seed: derive_seed(seed, clip_index, kind),
            });
        }
    }
    specs
}

pub fn file_name(stem: &str, spec: &DegradationSpec) -> String {
    format!("{stem}__{}__L{}.wav", spec.kind, spec.level_index)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ManifestRow {
    pub file: String,
    pub set: DegradationKind,
    pub level_index: usize,
    /// Empty for the reference.
    pub level_value: Option<f64>,
    pub seed: u64,
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct Manifest {
    pub rows: Vec<ManifestRow>,
}

impl Manifest {
    pub const FILE_NAME: &'static str = "manifest.csv";

    pub fn write_csv(&self, path: impl AsRef<Path>) -> Result<()> {
        let path = path.as_ref();
        let mut w = csv::Writer::from_path(path).map_err(|e| Error::from(e).at_path(path))?;
        for row in &self.rows {
            w.serialize(row)?;
        }
        w.flush()?;
        Ok(())
    }

    pub fn read_csv(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let mut r = csv::Reader::from_path(path).map_err(|e| Error::from(e).at_path(path))?;
        let rows = r.deserialize().collect::<std::result::Result<Vec<ManifestRow>, _>>()?;
        Ok(Self { rows })
    }
}

/// A named input for [`build_dataset`].
#[derive(Debug, Clone)]
pub struct DatasetInput {
    pub stem: String,
    pub clip: AudioClip,
}

/// Writes the reference and 21 degraded versions of every clip to
/// `out_dir` as float WAV, plus `manifest.csv`.
pub fn build_dataset(
    inputs: &[DatasetInput],
    out_dir: impl AsRef<Path>,
    seed: u64,
    reverb: &ReverbConfig,
) -> Result<Manifest> {
    let out_dir = out_dir.as_ref();
    std::fs::create_dir_all(out_dir).map_err(|e| Error::from(e).at_path(out_dir))?;
    let jobs: Vec<(usize, DegradationSpec)> = inputs
        .iter()
        .enumerate()
        .flat_map(|(i, _)| dataset_specs(i, seed).into_iter().map(move |s| (i, s)))
        .collect();

    let references: Vec<AudioClip> = inputs
        .par_iter()
        .map(|input| {
            normalize_loudness(&input.clip, TARGET_LUFS)
                .map_err(|e| e.at_path(PathBuf::from(&input.stem)))
        })
        .collect::<Result<_>>()?;

    let rows = jobs
        .par_iter()
        .map(|(i, spec)| {
            let input = &inputs[*i];
            let name = file_name(&input.stem, spec);
            let path = out_dir.join(&name);
            let degraded = apply(&references[*i], spec, reverb).map_err(|e| e.at_path(&path))?;
            write_wav(&degraded, &path, WavFormat::Float32)?;
            Ok(ManifestRow {
                file: name,
                set: spec.kind,
                level_index: spec.level_index,
                level_value: (spec.kind != DegradationKind::Reference).then_some(spec.level_value),
                seed: spec.seed,
            })
        })
        .collect::<Result<Vec<_>>>()?;

    let manifest = Manifest { rows };
    manifest.write_csv(out_dir.join(Manifest::FILE_NAME))?;
    Ok(manifest)
}
