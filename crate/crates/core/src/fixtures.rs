//! Seeded synthetic stimuli and a self-checking fixture suite.
//!
//! The stimulus bank stands in for real music excerpts: each pseudo-mix has
//! a harmonic pad, a bass line, a drum pattern and a noise bed, with the
//! balance between them drawn from the seed.

use std::f64::consts::PI;

use rand::{RngExt, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use rayon::prelude::*;
use serde::Serialize;

use crate::audio::{AudioClip, ANALYSIS_RATE};
use crate::config::RunConfig;
use crate::degrade::{self, dataset_specs, DegradationKind, DegradationSpec};
use crate::error::Result;
use crate::eval::{correlation_p_value, median_ci, pearson, spearman, TrendPoint};
use crate::loudness::{measure_loudness, normalize_loudness, TARGET_LUFS};
use crate::metric::{analyze_clip_variants, frame_masking_metric, msr_db, percentile, score_from_percentiles, MetricConfig};
use crate::psymodel::PsyVariant;
use crate::separation::{decompose, SeparationParams};
use crate::spectral::{istft, stft};

pub const BANK_SIZE: usize = 10;
pub const BANK_SECONDS: f64 = 10.0;

/// Where an expected value comes from.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum Basis {
    /// Follows directly from the definition.
    Identity,
    /// Computed by an independent reference method, named here.
    Oracle(&'static str),
    /// A figure from the published evaluation.
    Published,
}

/// Seed of the `index`-th bank stimulus.
pub fn bank_seed(index: usize) -> u64 {
    0x5EED_0000 + index as u64
}

fn white(rng: &mut ChaCha8Rng) -> f64 {
    Distribution::<f64>::sample(&StandardNormal, rng)
}

/// One-pole low-pass in place.
fn smooth(x: &mut [f64], coeff: f64) {
    let mut y = 0.0;
    for s in x.iter_mut() {
        y += coeff * (*s - y);
        *s = y;
    }
}

/// A 10 s pseudo-mix at 44.1 kHz, not yet loudness-normalised.
pub fn pseudo_mix(seed: u64) -> AudioClip {
    let rate = ANALYSIS_RATE as f64;
    let n = (BANK_SECONDS * rate) as usize;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut out = vec![0.0; n];

    // Pad: a chord every bar, each note with a decaying harmonic series.
    let tempo = 80.0 + 60.0 * rng.random::<f64>();
    let beat = 60.0 / tempo;
    let bar = (4.0 * beat * rate) as usize;
    let pad_gain = 0.05 + 0.15 * rng.random::<f64>();
    let roots = [45.0, 48.0, 50.0, 52.0, 53.0, 55.0, 57.0];
    let mut start = 0;
    while start < n {
        let root = roots[rng.random_range(0..roots.len())];
        let chord = [root, root + if rng.random::<bool>() { 3.0 } else { 4.0 }, root + 7.0, root + 12.0];
        let end = (start + bar).min(n);
        for &midi in &chord {
            let f0 = 440.0 * 2f64.powf((midi - 69.0) / 12.0);
            let phase0 = rng.random::<f64>() * 2.0 * PI;
            for h in 1..=8 {
                let f = f0 * h as f64;
                if f > 0.45 * rate {
                    break;
                }
                let amp = pad_gain / (h as f64).powf(1.3);
                for (i, s) in out[start..end].iter_mut().enumerate() {
                    let t = i as f64 / rate;
                    let env = (t / 0.08).min(1.0) * ((end - start - i) as f64 / rate / 0.05).min(1.0);
                    *s += amp * env * (2.0 * PI * f * t + phase0 * h as f64).sin();
                }
            }
        }
        start = end;
    }

    // Bass: one note per beat.
    let bass_gain = 0.1 + 0.2 * rng.random::<f64>();
    let beat_len = (beat * rate) as usize;
    let mut pos = 0;
    while pos < n {
        let f = 440.0 * 2f64.powf((roots[rng.random_range(0..roots.len())] - 12.0 - 69.0) / 12.0);
        let end = (pos + beat_len).min(n);
        for (i, s) in out[pos..end].iter_mut().enumerate() {
            let t = i as f64 / rate;
            *s += bass_gain * (-t * 4.0).exp() * ((2.0 * PI * f * t).sin() + 0.3 * (4.0 * PI * f * t).sin());
        }
        pos = end;
    }

    // Drums on an eighth-note grid.
    let drum_gain = 0.2 + 0.5 * rng.random::<f64>();
    let step = beat_len / 2;
    let pattern: Vec<u8> = (0..8).map(|_| rng.random_range(0..4u8)).collect();
    let mut k = 0;
    let mut pos = 0;
    while pos < n {
        let hit = match k % 8 {
            0 | 4 => 1,
            2 | 6 => 2,
            _ if pattern[k % 8] >= 2 => 3,
            _ => 0,
        };
        let len = ((0.25 * rate) as usize).min(n - pos);
        match hit {
            // Kick: falling sine.
            1 => {
                for i in 0..len {
                    let t = i as f64 / rate;
                    let f = 50.0 + 100.0 * (-t * 30.0).exp();
                    out[pos + i] += drum_gain * (-t * 12.0).exp() * (2.0 * PI * f * t).sin();
                }
            }
            // Snare: noise burst plus a body tone.
            2 => {
                for i in 0..len {
                    let t = i as f64 / rate;
                    out[pos + i] += drum_gain
                        * (-t * 25.0).exp()
                        * (0.5 * white(&mut rng) + 0.4 * (2.0 * PI * 190.0 * t).sin());
                }
            }
            // Hat: short differentiated noise.
            3 => {
                let mut prev = 0.0;
                for i in 0..len.min((0.05 * rate) as usize) {
                    let t = i as f64 / rate;
                    let w = white(&mut rng);
                    out[pos + i] += 0.4 * drum_gain * (-t * 90.0).exp() * (w - prev);
                    prev = w;
                }
            }
            _ => {}
        }
        k += 1;
        pos += step;
    }

    // Noise bed, coloured by a random low-pass.
    let bed_gain = 10f64.powf((-46.0 + 26.0 * rng.random::<f64>()) / 20.0);
    let mut bed: Vec<f64> = (0..n).map(|_| white(&mut rng)).collect();
    smooth(&mut bed, 0.05 + 0.9 * rng.random::<f64>());
    let bed_rms = (bed.iter().map(|s| s * s).sum::<f64>() / n as f64).sqrt();
    for (s, b) in out.iter_mut().zip(&bed) {
        *s += bed_gain * b / bed_rms;
    }

    AudioClip::at_analysis_rate(out).expect("non-empty")
}

/// The stimulus bank, each mix normalised to -23 LUFS, with stems
/// `mix00`..`mix09`.
pub fn synthetic_bank() -> Result<Vec<(String, AudioClip)>> {
    (0..BANK_SIZE)
        .map(|i| {
            let clip = normalize_loudness(&pseudo_mix(bank_seed(i)), TARGET_LUFS)?;
            Ok((format!("mix{i:02}"), clip))
        })
        .collect()
}

/// Scores of every reference and degraded version of `bank`, for each
/// variant. Degradations are generated in memory with the dataset seeds.
pub fn degradation_scores(
    bank: &[(String, AudioClip)],
    variants: &[PsyVariant],
    seed: u64,
    cfg: &RunConfig,
) -> Result<Vec<(PsyVariant, Vec<TrendPoint>)>> {
    let jobs: Vec<(usize, DegradationSpec)> = (0..bank.len())
        .flat_map(|i| dataset_specs(i, seed).into_iter().map(move |s| (i, s)))
        .collect();
    let scored = jobs
        .par_iter()
        .map(|(i, spec)| {
            let degraded = degrade::apply(&bank[*i].1, spec, &cfg.reverb)?;
            let results = analyze_clip_variants(&degraded, variants, &cfg.separation, &cfg.psy, &cfg.metric)?;
            Ok(results.into_iter().map(|r| r.overall_score_db).collect::<Vec<_>>())
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(variants
        .iter()
        .enumerate()
        .map(|(v, &variant)| {
            let points = jobs
                .iter()
                .zip(&scored)
                .map(|((i, spec), scores)| TrendPoint {
                    stimulus: bank[*i].0.clone(),
                    set: spec.kind,
                    level_index: (spec.kind != DegradationKind::Reference).then_some(spec.level_index),
                    score: scores[v],
                })
                .collect();
            (variant, points)
        })
        .collect())
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct FixtureResult {
    pub name: &'static str,
    pub basis: Basis,
    pub expected: f64,
    pub actual: f64,
    pub tolerance: f64,
    pub passed: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct FixtureReport {
    pub results: Vec<FixtureResult>,
}

impl FixtureReport {
    pub fn all_passed(&self) -> bool {
        self.results.iter().all(|r| r.passed)
    }

    pub fn failures(&self) -> impl Iterator<Item = &FixtureResult> {
        self.results.iter().filter(|r| !r.passed)
    }
}

struct Suite {
    results: Vec<FixtureResult>,
}

impl Suite {
    fn check(&mut self, name: &'static str, basis: Basis, expected: f64, actual: f64, tolerance: f64) {
        let passed = (expected - actual).abs() <= tolerance || (expected == actual);
        self.results.push(FixtureResult {
            name,
            basis,
            expected,
            actual,
            tolerance,
            passed,
        });
    }
}

fn noise_clip(len: usize, seed: u64) -> AudioClip {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    AudioClip::at_analysis_rate((0..len).map(|_| 0.1 * white(&mut rng)).collect()).expect("non-empty")
}

/// Runs every fixture with default settings.
pub fn run_fixture_suite() -> Result<FixtureReport> {
    run_fixture_suite_with(&MetricConfig::default())
}

/// Runs every fixture; metric fixtures use `metric` so changes to it show
/// up as failures.
pub fn run_fixture_suite_with(metric: &MetricConfig) -> Result<FixtureReport> {
    let mut s = Suite { results: Vec::new() };

    s.check("msr of equal energy and threshold", Basis::Identity, 0.0, msr_db(3.0, 3.0), 0.0);
    s.check("msr of a 100x threshold", Basis::Identity, 20.0, msr_db(1.0, 100.0), 1e-12);
    s.check(
        "frame metric of one 20 dB band",
        Basis::Identity,
        1.0,
        frame_masking_metric(&[1.0], &[100.0], metric)?,
        1e-12,
    );
    s.check(
        "frame metric of 10 and 30 dB bands",
        Basis::Identity,
        2.0,
        frame_masking_metric(&[1.0, 1.0, 10f64.sqrt()], &[10.0, 1000.0, 1.0], metric)?,
        1e-12,
    );
    s.check(
        "score for percentiles 10 and 1",
        Basis::Identity,
        10.0,
        score_from_percentiles(10.0, 1.0, metric),
        1e-12,
    );
    let ramp: Vec<f64> = (0..=100).map(f64::from).collect();
    s.check("5th percentile of 0..=100", Basis::Identity, 5.0, percentile(&ramp, 0.05)?, 1e-12);

    s.check(
        "pearson of a hand-computed pair",
        Basis::Oracle("hand computation"),
        0.8,
        pearson(&[1.0, 2.0, 3.0, 4.0], &[1.0, 3.0, 2.0, 4.0])?,
        1e-12,
    );
    s.check(
        "spearman of one swapped pair each end",
        Basis::Oracle("sum of squared rank differences"),
        0.8,
        spearman(&[1.0, 2.0, 3.0, 4.0, 5.0], &[2.0, 1.0, 4.0, 3.0, 5.0])?,
        1e-12,
    );
    s.check(
        "p-value of the best published rank correlation",
        Basis::Published,
        0.0,
        correlation_p_value(-0.8382, 16)?,
        0.01,
    );
    let fifteen: Vec<f64> = (1..=15).map(f64::from).collect();
    let (_, lo, hi) = median_ci(&fifteen)?;
    s.check("median interval lower bound for 1..=15", Basis::Oracle("rank formula by hand"), 4.0, lo, 0.0);
    s.check("median interval upper bound for 1..=15", Basis::Oracle("rank formula by hand"), 12.0, hi, 0.0);

    let sine = AudioClip::at_analysis_rate(
        (0..5 * 44_100)
            .map(|i| (2.0 * PI * 997.0 * i as f64 / 44_100.0).sin())
            .collect(),
    )?;
    s.check(
        "loudness of a full-scale 997 Hz sine",
        Basis::Published,
        -3.01,
        measure_loudness(&sine)?.integrated_lufs,
        0.1,
    );

    let noise = noise_clip(3 * 44_100, 1);
    let params = SeparationParams::default();
    let rebuilt = istft(&stft(&noise, params.window_len, params.hop)?)?;
    let err = rms_diff(noise.samples(), rebuilt.samples());
    s.check("transform round trip error", Basis::Identity, 0.0, err, 1e-6);

    let parts = decompose(&noise, &params)?;
    let summed: Vec<f64> = parts.tss.samples().iter().zip(parts.residual.samples()).map(|(a, b)| a + b).collect();
    s.check("TSS plus residual rebuilds the input", Basis::Identity, 0.0, rms_diff(&summed, rebuilt.samples()), 1e-6);
    s.check(
        "white noise residual share",
        Basis::Published,
        0.5,
        parts.residual_energy_share(),
        0.1,
    );

    Ok(FixtureReport { results: s.results })
}

fn rms_diff(a: &[f64], b: &[f64]) -> f64 {
    (a.iter().zip(b).map(|(x, y)| (x - y).powi(2)).sum::<f64>() / a.len() as f64).sqrt()
}

/// Fixture results as CSV: `name,basis,expected,actual,tolerance,passed`.
pub fn write_report_csv<W: std::io::Write>(report: &FixtureReport, out: W) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(["name", "basis", "expected", "actual", "tolerance", "passed"])?;
    for r in &report.results {
        let basis = match r.basis {
            Basis::Identity => "identity".to_string(),
            Basis::Oracle(how) => format!("oracle: {how}"),
            Basis::Published => "published".to_string(),
        };
        w.write_record([
            r.name.to_string(),
            basis,
            r.expected.to_string(),
            r.actual.to_string(),
            r.tolerance.to_string(),
            r.passed.to_string(),
        ])?;
    }
    w.flush()?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn suite_passes_with_defaults() {
        let report = run_fixture_suite().unwrap();
        let failed: Vec<_> = report.failures().collect();
        assert!(failed.is_empty(), "{failed:#?}");
        assert!(report.results.len() >= 15);
    }

    #[test]
    fn suite_notices_a_changed_tmax() {
        let cfg = MetricConfig {
            tmax_db: 10.0,
            ..MetricConfig::default()
        };
        let report = run_fixture_suite_with(&cfg).unwrap();
        let failed: Vec<&str> = report.failures().map(|r| r.name).collect();
        assert!(failed.contains(&"frame metric of one 20 dB band"));
        assert!(failed.contains(&"frame metric of 10 and 30 dB bands"));
    }

    #[test]
    fn bank_is_seeded() {
        assert_eq!(pseudo_mix(bank_seed(3)), pseudo_mix(bank_seed(3)));
        assert_ne!(pseudo_mix(bank_seed(3)), pseudo_mix(bank_seed(4)));
        let clip = pseudo_mix(bank_seed(0));
        assert_eq!(clip.len(), 441_000);
        assert!(clip.peak() > 0.0);
    }

    #[test]
    fn report_csv_lists_every_fixture() {
        let report = run_fixture_suite().unwrap();
        let mut out = Vec::new();
        write_report_csv(&report, &mut out).unwrap();
        assert_eq!(String::from_utf8(out).unwrap().lines().count(), 1 + report.results.len());
    }
}
