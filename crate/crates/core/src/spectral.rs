//! Short-time Fourier analysis and weighted overlap-add synthesis.
//!
//! Frames use a periodic Hann window at 50% overlap. The first frame starts
//! one hop *before* sample 0 (the leading hop is zero-filled) and the tail is
//! zero-padded, so every source sample is covered by exactly two frames and
//! the round trip is exact up to floating-point error, edges included.

use std::f64::consts::PI;
use std::io::Write;
use std::sync::Arc;

use rayon::prelude::*;
use rustfft::num_complex::Complex64;
use rustfft::{Fft, FftPlanner};

use crate::audio::AudioClip;
use crate::error::{Error, Result};

/// Row-major frame × bin matrix.
#[derive(Debug, Clone, PartialEq)]
pub struct Grid<T> {
    rows: usize,
    cols: usize,
    data: Vec<T>,
}

impl<T: Clone> Grid<T> {
    pub fn filled(rows: usize, cols: usize, value: T) -> Self {
        Self {
            rows,
            cols,
            data: vec![value; rows * cols],
        }
    }

    pub fn from_vec(rows: usize, cols: usize, data: Vec<T>) -> Result<Self> {
        if data.len() != rows * cols {
            return Err(Error::InvalidParameter(format!(
                "grid data has {} elements, expected {rows}x{cols}",
                data.len()
            )));
        }
        Ok(Self { rows, cols, data })
    }

    pub fn from_rows(rows: Vec<Vec<T>>) -> Result<Self> {
        let n_rows = rows.len();
        let n_cols = rows.first().map_or(0, Vec::len);
        if rows.iter().any(|r| r.len() != n_cols) {
            return Err(Error::InvalidParameter("ragged grid rows".into()));
        }
        Self::from_vec(n_rows, n_cols, rows.into_iter().flatten().collect())
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    pub fn shape(&self) -> (usize, usize) {
        (self.rows, self.cols)
    }

    pub fn get(&self, row: usize, col: usize) -> &T {
        &self.data[row * self.cols + col]
    }

    pub fn set(&mut self, row: usize, col: usize, value: T) {
        self.data[row * self.cols + col] = value;
    }

    pub fn row(&self, row: usize) -> &[T] {
        &self.data[row * self.cols..(row + 1) * self.cols]
    }

    pub fn row_mut(&mut self, row: usize) -> &mut [T] {
        &mut self.data[row * self.cols..(row + 1) * self.cols]
    }

    pub fn as_slice(&self) -> &[T] {
        &self.data
    }

    pub fn map<U, F: Fn(&T) -> U>(&self, f: F) -> Grid<U> {
        Grid {
            rows: self.rows,
            cols: self.cols,
            data: self.data.iter().map(f).collect(),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum WindowKind {
    PeriodicHann,
}

impl WindowKind {
    pub fn coefficients(self, len: usize) -> Vec<f64> {
        match self {
            WindowKind::PeriodicHann => periodic_hann(len),
        }
    }
}

pub fn periodic_hann(len: usize) -> Vec<f64> {
    (0..len)
        .map(|n| 0.5 - 0.5 * (2.0 * PI * n as f64 / len as f64).cos())
        .collect()
}

/// One-sided complex STFT with its framing metadata.
#[derive(Debug, Clone, PartialEq)]
pub struct ComplexSpectrogram {
    frames: Grid<Complex64>,
    window_len: usize,
    hop: usize,
    window_kind: WindowKind,
    source_len: usize,
    sample_rate: u32,
}

impl ComplexSpectrogram {
    pub fn frames(&self) -> &Grid<Complex64> {
        &self.frames
    }

    pub fn n_frames(&self) -> usize {
        self.frames.rows()
    }

    pub fn n_bins(&self) -> usize {
        self.frames.cols()
    }

    pub fn window_len(&self) -> usize {
        self.window_len
    }

    pub fn hop(&self) -> usize {
        self.hop
    }

    pub fn window_kind(&self) -> WindowKind {
        self.window_kind
    }

    pub fn source_len(&self) -> usize {
        self.source_len
    }

    pub fn sample_rate(&self) -> u32 {
        self.sample_rate
    }

    /// Sample index (possibly negative) where frame `t` begins.
    pub fn frame_start(&self, t: usize) -> isize {
        frame_start(t, self.window_len, self.hop)
    }

    pub fn magnitudes(&self) -> Grid<f64> {
        self.frames.map(|c| c.norm())
    }

    /// Same framing, new bin values.
    pub fn with_frames(&self, frames: Grid<Complex64>) -> Result<Self> {
        if frames.shape() != self.frames.shape() {
            return Err(Error::InconsistentFrames(format!(
                "expected {:?}, got {:?}",
                self.frames.shape(),
                frames.shape()
            )));
        }
        Ok(Self {
            frames,
            ..self.clone()
        })
    }

    /// Energy of frame `t` in the time domain, recovered through Parseval on
    /// the one-sided spectrum.
    pub fn frame_energy(&self, t: usize) -> f64 {
        let row = self.frames.row(t);
        let last = row.len() - 1;
        let inner: f64 = row[1..last].iter().map(|c| c.norm_sqr()).sum();
        (row[0].norm_sqr() + 2.0 * inner + row[last].norm_sqr()) / self.window_len as f64
    }

    /// Writes magnitudes as CSV, one frame per row.
    pub fn write_magnitude_csv<W: Write>(&self, out: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(out);
        for t in 0..self.n_frames() {
            w.write_record(self.frames.row(t).iter().map(|c| format!("{:e}", c.norm())))?;
        }
        w.flush()?;
        Ok(())
    }
}

fn frame_start(t: usize, window_len: usize, hop: usize) -> isize {
    t as isize * hop as isize - (window_len - hop) as isize
}

/// Frames needed so the last source sample is covered twice.
fn frame_count(source_len: usize, hop: usize) -> usize {
    source_len.div_ceil(hop) + 1
}

fn plan(len: usize, inverse: bool) -> Arc<dyn Fft<f64>> {
    let mut planner = FftPlanner::new();
    if inverse {
        planner.plan_fft_inverse(len)
    } else {
        planner.plan_fft_forward(len)
    }
}

/// Windowed one-sided STFT. `window_len` must be a power of two and `hop`
/// exactly half of it.
pub fn stft(clip: &AudioClip, window_len: usize, hop: usize) -> Result<ComplexSpectrogram> {
    if !window_len.is_power_of_two() || window_len < 4 {
        return Err(Error::InvalidParameter(format!(
            "window length {window_len} is not a power of two"
        )));
    }
    if hop * 2 != window_len {
        return Err(Error::InvalidParameter(format!(
            "hop {hop} must be half the window length {window_len}"
        )));
    }
    if clip.len() < window_len {
        return Err(Error::ClipTooShort {
            needed: window_len,
            found: clip.len(),
        });
    }

    let window = periodic_hann(window_len);
    let fft = plan(window_len, false);
    let n_frames = frame_count(clip.len(), hop);
    let n_bins = window_len / 2 + 1;
    let samples = clip.samples();

    let rows: Vec<Vec<Complex64>> = (0..n_frames)
        .into_par_iter()
        .map(|t| {
            let start = frame_start(t, window_len, hop);
            let mut buf: Vec<Complex64> = (0..window_len)
                .map(|n| {
                    let idx = start + n as isize;
                    let x = if idx >= 0 && (idx as usize) < samples.len() {
                        samples[idx as usize]
                    } else {
                        0.0
                    };
                    Complex64::new(x * window[n], 0.0)
                })
                .collect();
            fft.process(&mut buf);
            buf.truncate(n_bins);
            buf
        })
        .collect();

    Ok(ComplexSpectrogram {
        frames: Grid::from_rows(rows)?,
        window_len,
        hop,
        window_kind: WindowKind::PeriodicHann,
        source_len: clip.len(),
        sample_rate: clip.sample_rate(),
    })
}

/// Weighted overlap-add inverse of [`stft`]. Hermitian symmetry is imposed
/// on each frame (imaginary parts of the DC and Nyquist bins are dropped).
pub fn istft(spec: &ComplexSpectrogram) -> Result<AudioClip> {
    let n = spec.window_len;
    let hop = spec.hop;
    if spec.n_bins() != n / 2 + 1 {
        return Err(Error::InconsistentFrames(format!(
            "{} bins for window length {n}",
            spec.n_bins()
        )));
    }
    if spec.n_frames() < frame_count(spec.source_len, hop) {
        return Err(Error::InconsistentFrames(format!(
            "{} frames cannot cover {} samples",
            spec.n_frames(),
            spec.source_len
        )));
    }

    let window = spec.window_kind.coefficients(n);
    let ifft = plan(n, true);
    let scale = 1.0 / n as f64;

    let segments: Vec<Vec<f64>> = (0..spec.n_frames())
        .into_par_iter()
        .map(|t| {
            let half = spec.frames.row(t);
            let mut buf = vec![Complex64::new(0.0, 0.0); n];
            buf[0] = Complex64::new(half[0].re, 0.0);
            buf[n / 2] = Complex64::new(half[n / 2].re, 0.0);
            for k in 1..n / 2 {
                buf[k] = half[k];
                buf[n - k] = half[k].conj();
            }
            ifft.process(&mut buf);
            buf.iter()
                .zip(&window)
                .map(|(c, w)| c.re * scale * w)
                .collect()
        })
        .collect();

    let pad = n - hop;
    let total = spec.source_len + pad;
    let mut acc = vec![0.0; total + n];
    let mut norm = vec![0.0; total + n];
    for (t, seg) in segments.iter().enumerate() {
        let offset = t * hop;
        for (i, (v, w)) in seg.iter().zip(&window).enumerate() {
            acc[offset + i] += v;
            norm[offset + i] += w * w;
        }
    }
    let samples = (pad..pad + spec.source_len)
        .map(|i| if norm[i] > 1e-12 { acc[i] / norm[i] } else { 0.0 })
        .collect();
    AudioClip::new(samples, spec.sample_rate)
}
