//! Median-filter separation of a mix into transient + steady-state (TSS) and
//! residual (R) signals.
//!
//! Each STFT bin is labelled from two median-filtered magnitude spectrograms:
//! the time-axis median (which favours horizontal, harmonic ridges) and the
//! frequency-axis median (which favours vertical, percussive ridges). Bins
//! that win neither comparison by the required margin are residual. Labels
//! are binary masks applied to the complex spectrogram, so phase is kept and
//! the three masked spectrograms sum exactly to the original.

use std::fmt;
use std::io::Write;

use rayon::prelude::*;
use rustfft::num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::audio::AudioClip;
use crate::error::{Error, Result};
use crate::spectral::{istft, stft, ComplexSpectrogram, Grid};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct SeparationParams {
    /// Margin by which the frequency median must beat the time median.
    pub percussive_threshold: f64,
    /// Margin by which the time median must beat the frequency median.
    pub harmonic_threshold: f64,
    /// Median filter length, used on both axes.
    pub median_order: usize,
    pub window_len: usize,
    pub hop: usize,
}

impl Default for SeparationParams {
    fn default() -> Self {
        Self {
            percussive_threshold: 1.75,
            harmonic_threshold: 1.0,
            median_order: 17,
            window_len: 2048,
            hop: 1024,
        }
    }
}

impl SeparationParams {
    pub fn validate(&self) -> Result<()> {
        let (p, h) = (self.percussive_threshold, self.harmonic_threshold);
        if !(p > 0.0 && h > 0.0) {
            return Err(Error::InvalidParameter(format!(
                "separation thresholds must be positive (percussive {p}, harmonic {h})"
            )));
        }
        // Both labels could apply to one bin if p * h < 1.
        if p * h < 1.0 {
            return Err(Error::InvalidParameter(format!(
                "percussive x harmonic threshold = {} < 1 makes the labels overlap",
                p * h
            )));
        }
        if self.median_order < 3 || self.median_order.is_multiple_of(2) {
            return Err(Error::InvalidParameter(format!(
                "median order must be odd and >= 3, got {}",
                self.median_order
            )));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Label {
    Steady,
    Transient,
    Residual,
}

impl Label {
    pub fn as_char(self) -> char {
        match self {
            Label::Steady => 'S',
            Label::Transient => 'T',
            Label::Residual => 'R',
        }
    }
}

impl fmt::Display for Label {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.as_char())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Axis {
    Time,
    Frequency,
}

/// Median of `buf` at index `len / 2` after sorting; for even lengths this is
/// the upper of the two middle values.
fn median_in_place(buf: &mut [f64]) -> f64 {
    let mid = buf.len() / 2;
    let (_, m, _) = buf.select_nth_unstable_by(mid, |a, b| a.total_cmp(b));
    *m
}

/// Running median over one line. Windows shrink at the edges to the samples
/// that exist.
fn median_line(line: &[f64], order: usize) -> Vec<f64> {
    let half = order / 2;
    let mut buf = Vec::with_capacity(order);
    (0..line.len())
        .map(|i| {
            let lo = i.saturating_sub(half);
            let hi = (i + half + 1).min(line.len());
            buf.clear();
            buf.extend_from_slice(&line[lo..hi]);
            median_in_place(&mut buf)
        })
        .collect()
}

/// Median-filters a frame × bin magnitude matrix along one axis.
pub fn median_filter(mag: &Grid<f64>, axis: Axis, order: usize) -> Result<Grid<f64>> {
    if order == 0 || order.is_multiple_of(2) {
        return Err(Error::InvalidParameter(format!(
            "median order must be odd, got {order}"
        )));
    }
    let (rows, cols) = mag.shape();
    if rows == 0 || cols == 0 {
        return Err(Error::InvalidParameter("empty magnitude matrix".into()));
    }
    match axis {
        Axis::Frequency => {
            let filtered: Vec<Vec<f64>> = (0..rows)
                .into_par_iter()
                .map(|t| median_line(mag.row(t), order))
                .collect();
            Grid::from_rows(filtered)
        }
        Axis::Time => {
            let columns: Vec<Vec<f64>> = (0..cols)
                .into_par_iter()
                .map(|k| {
                    let column: Vec<f64> = (0..rows).map(|t| *mag.get(t, k)).collect();
                    median_line(&column, order)
                })
                .collect();
            let mut out = Grid::filled(rows, cols, 0.0);
            for (k, column) in columns.iter().enumerate() {
                for (t, &v) in column.iter().enumerate() {
                    out.set(t, k, v);
                }
            }
            Ok(out)
        }
    }
}

/// Labels one bin from its time-axis and frequency-axis medians. Equality
/// falls to residual.
pub fn classify(time_median: f64, freq_median: f64, params: &SeparationParams) -> Label {
    if time_median > params.harmonic_threshold * freq_median {
        Label::Steady
    } else if freq_median > params.percussive_threshold * time_median {
        Label::Transient
    } else {
        Label::Residual
    }
}

/// Labels every bin of a magnitude spectrogram.
pub fn classify_bins(mag: &Grid<f64>, params: &SeparationParams) -> Result<Grid<Label>> {
    params.validate()?;
    let along_time = median_filter(mag, Axis::Time, params.median_order)?;
    let along_freq = median_filter(mag, Axis::Frequency, params.median_order)?;
    let labels = along_time
        .as_slice()
        .iter()
        .zip(along_freq.as_slice())
        .map(|(&t, &f)| classify(t, f, params))
        .collect();
    Grid::from_vec(mag.rows(), mag.cols(), labels)
}

/// Splits a complex spectrogram into its transient, steady-state and residual
/// parts according to `masks`.
pub fn masked_spectrograms(
    spec: &ComplexSpectrogram,
    masks: &Grid<Label>,
) -> Result<[ComplexSpectrogram; 3]> {
    if masks.shape() != spec.frames().shape() {
        return Err(Error::InconsistentFrames(format!(
            "mask shape {:?} vs spectrogram {:?}",
            masks.shape(),
            spec.frames().shape()
        )));
    }
    let zero = Complex64::new(0.0, 0.0);
    let select = |want: Label| -> Result<ComplexSpectrogram> {
        let data = spec
            .frames()
            .as_slice()
            .iter()
            .zip(masks.as_slice())
            .map(|(&c, &l)| if l == want { c } else { zero })
            .collect();
        spec.with_frames(Grid::from_vec(spec.n_frames(), spec.n_bins(), data)?)
    };
    Ok([
        select(Label::Transient)?,
        select(Label::Steady)?,
        select(Label::Residual)?,
    ])
}

#[derive(Debug, Clone)]
pub struct TsrDecomposition {
    pub tss: AudioClip,
    pub residual: AudioClip,
    pub masks: Grid<Label>,
}

impl TsrDecomposition {
    /// Residual energy as a fraction of TSS + residual energy.
    pub fn residual_energy_share(&self) -> f64 {
        let energy = |c: &AudioClip| c.samples().iter().map(|s| s * s).sum::<f64>();
        let r = energy(&self.residual);
        let total = r + energy(&self.tss);
        if total > 0.0 {
            r / total
        } else {
            0.0
        }
    }

    /// Fraction of bins carrying each label, as (steady, transient, residual).
    pub fn label_fractions(&self) -> (f64, f64, f64) {
        let n = self.masks.as_slice().len() as f64;
        let count = |l: Label| self.masks.as_slice().iter().filter(|&&m| m == l).count() as f64 / n;
        (
            count(Label::Steady),
            count(Label::Transient),
            count(Label::Residual),
        )
    }

    /// Labels as CSV: one frame per row, one `S`/`T`/`R` per bin.
    pub fn write_mask_csv<W: Write>(&self, out: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(out);
        for t in 0..self.masks.rows() {
            w.write_record(self.masks.row(t).iter().map(|l| l.to_string()))?;
        }
        w.flush()?;
        Ok(())
    }
}

/// Separates `clip` into TSS and residual signals.
pub fn decompose(clip: &AudioClip, params: &SeparationParams) -> Result<TsrDecomposition> {
    params.validate()?;
    let spec = stft(clip, params.window_len, params.hop)?;
    let masks = classify_bins(&spec.magnitudes(), params)?;
    let [transient, steady, residual] = masked_spectrograms(&spec, &masks)?;

    let tss_bins = transient
        .frames()
        .as_slice()
        .iter()
        .zip(steady.frames().as_slice())
        .map(|(a, b)| a + b)
        .collect();
    let tss_spec = spec.with_frames(Grid::from_vec(spec.n_frames(), spec.n_bins(), tss_bins)?)?;

    Ok(TsrDecomposition {
        tss: istft(&tss_spec)?,
        residual: istft(&residual)?,
        masks,
    })
}
