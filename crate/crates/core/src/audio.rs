//! Mono PCM clips and WAV file I/O.
//!
//! Everything downstream of this module works on a single channel at
//! 44.1 kHz. Multichannel files are averaged down to mono on load; files at
//! any other rate are rejected rather than resampled.

use std::path::Path;

use hound::{SampleFormat, WavReader, WavSpec, WavWriter};

use crate::error::{Error, Result};

/// The only sample rate the analysis pipeline accepts.
pub const ANALYSIS_RATE: u32 = 44_100;

/// A mono sequence of linear amplitudes (nominal full scale is `[-1, 1]`).
#[derive(Debug, Clone, PartialEq)]
pub struct AudioClip {
    samples: Vec<f64>,
    sample_rate: u32,
}

impl AudioClip {
    pub fn new(samples: Vec<f64>, sample_rate: u32) -> Result<Self> {
        if samples.is_empty() {
            return Err(Error::EmptyClip);
        }
        if sample_rate == 0 {
            return Err(Error::InvalidParameter("sample rate must be positive".into()));
        }
        Ok(Self {
            samples,
            sample_rate,
        })
    }

    /// Shorthand for a clip at [`ANALYSIS_RATE`].
    pub fn at_analysis_rate(samples: Vec<f64>) -> Result<Self> {
        Self::new(samples, ANALYSIS_RATE)
    }

    pub fn samples(&self) -> &[f64] {
        &self.samples
    }

    pub fn into_samples(self) -> Vec<f64> {
        self.samples
    }

    pub fn sample_rate(&self) -> u32 {
        self.sample_rate
    }

    pub fn len(&self) -> usize {
        self.samples.len()
    }

    pub fn is_empty(&self) -> bool {
        self.samples.is_empty()
    }

    pub fn duration_secs(&self) -> f64 {
        self.samples.len() as f64 / self.sample_rate as f64
    }

    /// Returns a copy with every sample multiplied by `gain`.
    pub fn scaled(&self, gain: f64) -> AudioClip {
        AudioClip {
            samples: self.samples.iter().map(|s| s * gain).collect(),
            sample_rate: self.sample_rate,
        }
    }

    /// Replaces the samples, keeping the rate.
    pub fn with_samples(&self, samples: Vec<f64>) -> Result<AudioClip> {
        AudioClip::new(samples, self.sample_rate)
    }

    pub fn rms(&self) -> f64 {
        let sum: f64 = self.samples.iter().map(|s| s * s).sum();
        (sum / self.samples.len() as f64).sqrt()
    }

    pub fn peak(&self) -> f64 {
        self.samples.iter().fold(0.0_f64, |m, s| m.max(s.abs()))
    }

    pub fn ensure_analysis_rate(&self) -> Result<()> {
        if self.sample_rate != ANALYSIS_RATE {
            return Err(Error::SampleRate {
                found: self.sample_rate,
                expected: ANALYSIS_RATE,
            });
        }
        Ok(())
    }
}

/// Sample encoding used by [`write_wav`].
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum WavFormat {
    Int16,
    Float32,
}

/// Loads a 16-bit integer or 32-bit float WAV file as a mono clip.
pub fn load_wav(path: impl AsRef<Path>) -> Result<AudioClip> {
    let path = path.as_ref();
    read_wav(path).map_err(|e| e.at_path(path))
}

fn read_wav(path: &Path) -> Result<AudioClip> {
    let mut reader = WavReader::open(path)?;
    let spec = reader.spec();
    if spec.sample_rate != ANALYSIS_RATE {
        return Err(Error::SampleRate {
            found: spec.sample_rate,
            expected: ANALYSIS_RATE,
        });
    }
    let channels = spec.channels as usize;
    if channels == 0 {
        return Err(Error::UnsupportedFormat("zero channels".into()));
    }

    let interleaved: Vec<f64> = match (spec.sample_format, spec.bits_per_sample) {
        (SampleFormat::Int, 16) => reader
            .samples::<i16>()
            .map(|s| s.map(|v| v as f64 / 32768.0))
            .collect::<std::result::Result<_, _>>()?,
        (SampleFormat::Float, 32) => reader
            .samples::<f32>()
            .map(|s| s.map(f64::from))
            .collect::<std::result::Result<_, _>>()?,
        (format, bits) => {
            return Err(Error::UnsupportedFormat(format!(
                "{bits}-bit {format:?} PCM"
            )))
        }
    };

    let mono = if channels == 1 {
        interleaved
    } else {
        interleaved
            .chunks_exact(channels)
            .map(|frame| frame.iter().sum::<f64>() / channels as f64)
            .collect()
    };
    AudioClip::new(mono, spec.sample_rate)
}

/// Writes a mono WAV file.
///
/// 16-bit output refuses samples beyond full scale instead of clipping them.
pub fn write_wav(clip: &AudioClip, path: impl AsRef<Path>, format: WavFormat) -> Result<()> {
    let path = path.as_ref();
    encode_wav(clip, path, format).map_err(|e| e.at_path(path))
}

fn encode_wav(clip: &AudioClip, path: &Path, format: WavFormat) -> Result<()> {
    let (bits_per_sample, sample_format) = match format {
        WavFormat::Int16 => (16, SampleFormat::Int),
        WavFormat::Float32 => (32, SampleFormat::Float),
    };
    if format == WavFormat::Int16 {
        let max_abs = clip.peak();
        if max_abs > 1.0 {
            return Err(Error::OutOfRange { max_abs });
        }
    }
    let spec = WavSpec {
        channels: 1,
        sample_rate: clip.sample_rate(),
        bits_per_sample,
        sample_format,
    };
    let mut writer = WavWriter::create(path, spec)?;
    match format {
        WavFormat::Int16 => {
            for &s in clip.samples() {
                let q = (s * 32768.0).round().clamp(-32768.0, 32767.0) as i16;
                writer.write_sample(q)?;
            }
        }
        WavFormat::Float32 => {
            for &s in clip.samples() {
                writer.write_sample(s as f32)?;
            }
        }
    }
    writer.finalize()?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    fn tmp() -> tempfile::TempDir {
        tempfile::tempdir().unwrap()
    }

    #[test]
    fn silence_round_trips_as_zeros() {
        let dir = tmp();
        let path = dir.path().join("zeros.wav");
        let clip = AudioClip::at_analysis_rate(vec![0.0; 44_100]).unwrap();
        write_wav(&clip, &path, WavFormat::Int16).unwrap();
        let back = load_wav(&path).unwrap();
        assert_eq!(back.len(), 44_100);
        assert!(back.samples().iter().all(|&s| s == 0.0));
    }

    #[test]
    fn stereo_with_equal_channels_downmixes_to_identity() {
        let dir = tmp();
        let path = dir.path().join("stereo.wav");
        let spec = WavSpec {
            channels: 2,
            sample_rate: ANALYSIS_RATE,
            bits_per_sample: 32,
            sample_format: SampleFormat::Float,
        };
        let mut w = WavWriter::create(&path, spec).unwrap();
        for _ in 0..100 {
            w.write_sample(0.5_f32).unwrap();
            w.write_sample(0.5_f32).unwrap();
        }
        w.finalize().unwrap();
        let clip = load_wav(&path).unwrap();
        assert_eq!(clip.len(), 100);
        assert!(clip.samples().iter().all(|&s| s == 0.5));
    }

    #[test]
    fn most_negative_int16_maps_to_minus_one() {
        let dir = tmp();
        let path = dir.path().join("min.wav");
        let spec = WavSpec {
            channels: 1,
            sample_rate: ANALYSIS_RATE,
            bits_per_sample: 16,
            sample_format: SampleFormat::Int,
        };
        let mut w = WavWriter::create(&path, spec).unwrap();
        w.write_sample(i16::MIN).unwrap();
        w.write_sample(16384_i16).unwrap();
        w.finalize().unwrap();
        let clip = load_wav(&path).unwrap();
        assert_eq!(clip.samples(), &[-32768.0 / 32768.0, 16384.0 / 32768.0]);
        assert_eq!(clip.samples()[0], -1.0);
    }

    #[test]
    fn rejects_other_sample_rates() {
        let dir = tmp();
        let path = dir.path().join("48k.wav");
        let clip = AudioClip::new(vec![0.1; 480], 48_000).unwrap();
        write_wav(&clip, &path, WavFormat::Float32).unwrap();
        let err = load_wav(&path).unwrap_err();
        assert!(err.to_string().contains("48000"), "{err}");
    }

    #[test]
    fn rejects_unsupported_bit_depth() {
        let dir = tmp();
        let path = dir.path().join("24bit.wav");
        let spec = WavSpec {
            channels: 1,
            sample_rate: ANALYSIS_RATE,
            bits_per_sample: 24,
            sample_format: SampleFormat::Int,
        };
        let mut w = WavWriter::create(&path, spec).unwrap();
        w.write_sample(1000_i32).unwrap();
        w.finalize().unwrap();
        let err = load_wav(&path).unwrap_err();
        assert!(err.to_string().contains("24-bit"), "{err}");
    }

    #[test]
    fn corrupt_header_is_an_error() {
        let dir = tmp();
        let path = dir.path().join("junk.wav");
        std::fs::write(&path, b"RIFF\x10\x00\x00\x00WAVEjunkjunk").unwrap();
        assert!(load_wav(&path).is_err());
    }

    #[test]
    fn int16_refuses_out_of_range_samples() {
        let dir = tmp();
        let clip = AudioClip::at_analysis_rate(vec![0.0, 2.0, -0.5]).unwrap();
        let err = write_wav(&clip, dir.path().join("hot.wav"), WavFormat::Int16).unwrap_err();
        assert!(matches!(
            err,
            Error::WithPath { ref source, .. } if matches!(**source, Error::OutOfRange { .. })
        ));
    }

    #[test]
    fn int16_quantization_error_is_bounded() {
        let dir = tmp();
        let path = dir.path().join("q.wav");
        let samples: Vec<f64> = (0..2000)
            .map(|i| ((i as f64) * 0.0137).sin() * 0.999)
            .chain([1.0, -1.0])
            .collect();
        let clip = AudioClip::at_analysis_rate(samples).unwrap();
        write_wav(&clip, &path, WavFormat::Int16).unwrap();
        let back = load_wav(&path).unwrap();
        let max_err = clip
            .samples()
            .iter()
            .zip(back.samples())
            .map(|(a, b)| (a - b).abs())
            .fold(0.0, f64::max);
        assert!(max_err <= 1.0 / 32768.0, "max error {max_err}");
    }

    #[test]
    fn empty_clip_is_rejected() {
        assert!(matches!(
            AudioClip::at_analysis_rate(vec![]),
            Err(Error::EmptyClip)
        ));
    }

    mod props {
        use super::*;
        use proptest::prelude::*;

        proptest! {
            #![proptest_config(ProptestConfig::with_cases(32))]

            #[test]
            fn float32_round_trip_is_exact(values in prop::collection::vec(-4.0f32..4.0, 1..512)) {
                let dir = tmp();
                let path = dir.path().join("rt.wav");
                let clip = AudioClip::at_analysis_rate(values.iter().map(|&v| v as f64).collect()).unwrap();
                write_wav(&clip, &path, WavFormat::Float32).unwrap();
                let back = load_wav(&path).unwrap();
                prop_assert_eq!(back, clip);
            }
        }
    }
}
