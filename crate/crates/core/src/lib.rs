//! Objective mix-clarity prediction.
//!
//! A clip is loudness-normalised, split into a transient-plus-steady (TSS)
//! part and a noise-like residual, and each part is run through an MPEG-1
//! style psychoacoustic model. How much each part masks the other, summarised
//! over time, gives a single masking score in dB: higher means a muddier mix.
//!
//! ```no_run
//! use mixclarity::{analyze_clip, load_wav, MetricConfig, PsyConfig, PsyVariant, SeparationParams};
//!
//! let clip = load_wav("mix.wav")?;
//! let result = analyze_clip(
//!     &clip,
//!     PsyVariant::L2pm,
//!     &SeparationParams::default(),
//!     &PsyConfig::default(),
//!     &MetricConfig::default(),
//! )?;
//! println!("{:.2} dB", result.overall_score_db);
//! # Ok::<(), mixclarity::Error>(())
//! ```

pub mod audio;
pub mod config;
pub mod degrade;
pub mod error;
pub mod eval;
pub mod fixtures;
pub mod loudness;
pub mod metric;
pub mod psymodel;
pub mod separation;
pub mod spectral;

pub use config::{OutputFormat, RunConfig, VariantSelection};
pub use degrade::{build_dataset, DatasetInput, DegradationKind, Manifest, ReverbConfig};
pub use eval::{correlate, trend_report, CorrelationReport, ScoreTable, TrendReport};
pub use audio::{load_wav, write_wav, AudioClip, WavFormat, ANALYSIS_RATE};
pub use error::{Error, Result};
pub use loudness::{measure_loudness, normalize_loudness, LoudnessReading, TARGET_LUFS};
pub use metric::{analyze_clip, analyze_clip_variants, ClarityResult, MetricConfig};
pub use psymodel::{BandFrame, PsyConfig, PsyModel, PsyVariant};
pub use separation::{decompose, SeparationParams, TsrDecomposition};
pub use spectral::{istft, stft, ComplexSpectrogram};
