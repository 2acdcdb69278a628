//! Cross-component masking metrics and the overall masking score.
//!
//! For every frame the TSS energy in each band is compared against the
//! residual's masking threshold (and vice versa). Bands where the other
//! component's threshold exceeds the energy contribute their masker-to-signal
//! ratio, scaled by `tmax_db`. The overall score is the log ratio of a low
//! percentile of the TSS series to a high percentile of the residual series;
//! higher scores mean a less clear mix.

use std::io::Write;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::audio::AudioClip;
use crate::error::{Error, Result};
use crate::loudness::{normalize_loudness, TARGET_LUFS};
use crate::psymodel::{BandFrame, PsyConfig, PsyModel, PsyVariant};
use crate::separation::{decompose, SeparationParams};

/// Score bounds applied after the epsilon floor.
pub const SCORE_LIMIT_DB: f64 = 120.0;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct MetricConfig {
    pub tmax_db: f64,
    pub low_percentile: f64,
    pub high_percentile: f64,
    pub analysis_window_s: f64,
    pub epsilon: f64,
}

impl Default for MetricConfig {
    fn default() -> Self {
        Self {
            tmax_db: 20.0,
            low_percentile: 0.05,
            high_percentile: 0.95,
            analysis_window_s: 10.0,
            epsilon: 1e-12,
        }
    }
}

impl MetricConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.tmax_db > 0.0) {
            return Err(Error::InvalidParameter("tmax_db must be positive".into()));
        }
        if !(0.0 < self.low_percentile
            && self.low_percentile < self.high_percentile
            && self.high_percentile < 1.0)
        {
            return Err(Error::InvalidParameter(
                "percentiles must satisfy 0 < low < high < 1".into(),
            ));
        }
        if !(self.analysis_window_s > 0.0) {
            return Err(Error::InvalidParameter("analysis window must be positive".into()));
        }
        if !(self.epsilon > 0.0) {
            return Err(Error::InvalidParameter("epsilon must be positive".into()));
        }
        Ok(())
    }
}

/// Signal-to-mask ratio `E / MT`.
pub fn smr(energy: f64, threshold: f64) -> Result<f64> {
    if !(threshold > 0.0) {
        return Err(Error::InvalidParameter(format!(
            "masking threshold must be positive, got {threshold}"
        )));
    }
    Ok(energy / threshold)
}

/// Masker-to-signal ratio in dB. Energy is floored at 1e-12.
pub fn msr_db(energy: f64, other_threshold: f64) -> f64 {
    10.0 * (other_threshold / energy.max(1e-12)).log10()
}

/// Sum of `msr_db / tmax_db` over the bands where the other component's
/// threshold exceeds this component's energy.
pub fn frame_masking_metric(energy: &[f64], other_threshold: &[f64], cfg: &MetricConfig) -> Result<f64> {
    if energy.len() != other_threshold.len() {
        return Err(Error::BandMismatch {
            expected: energy.len(),
            found: other_threshold.len(),
        });
    }
    Ok(energy
        .iter()
        .zip(other_threshold)
        .filter(|(e, mt)| e < mt)
        .map(|(&e, &mt)| msr_db(e, mt) / cfg.tmax_db)
        .sum())
}

/// Per-frame metrics in both directions: TSS energy against the residual
/// threshold, and residual energy against the TSS threshold.
pub fn cross_component_series(
    tss: &[BandFrame],
    residual: &[BandFrame],
    cfg: &MetricConfig,
) -> Result<(Vec<f64>, Vec<f64>)> {
    if tss.len() != residual.len() {
        return Err(Error::MisalignedFrames {
            left: tss.len(),
            right: residual.len(),
        });
    }
    let pairs: Vec<(f64, f64)> = tss
        .par_iter()
        .zip(residual)
        .map(|(t, r)| {
            if t.layout != r.layout {
                return Err(Error::BandMismatch {
                    expected: t.n_bands(),
                    found: r.n_bands(),
                });
            }
            Ok((
                frame_masking_metric(&t.energy, &r.threshold, cfg)?,
                frame_masking_metric(&r.energy, &t.threshold, cfg)?,
            ))
        })
        .collect::<Result<_>>()?;
    Ok(pairs.into_iter().unzip())
}

/// Linear-interpolation percentile at rank `p * (n - 1)` of the sorted
/// series.
pub fn percentile(series: &[f64], p: f64) -> Result<f64> {
    if series.is_empty() {
        return Err(Error::EmptySeries);
    }
    if !(0.0..=1.0).contains(&p) {
        return Err(Error::InvalidParameter(format!("percentile {p} outside [0, 1]")));
    }
    let mut sorted = series.to_vec();
    sorted.sort_by(f64::total_cmp);
    let rank = p * (sorted.len() - 1) as f64;
    let lo = rank.floor() as usize;
    let hi = rank.ceil() as usize;
    let frac = rank - lo as f64;
    Ok(sorted[lo] + (sorted[hi] - sorted[lo]) * frac)
}

/// `10 log10(P_low(tss) / P_high(residual))` with both percentiles floored at
/// `epsilon`, clamped to +-[`SCORE_LIMIT_DB`].
pub fn overall_score(tss: &[f64], residual: &[f64], cfg: &MetricConfig) -> Result<f64> {
    if tss.len() != residual.len() {
        return Err(Error::MisalignedFrames {
            left: tss.len(),
            right: residual.len(),
        });
    }
    let low = percentile(tss, cfg.low_percentile)?;
    let high = percentile(residual, cfg.high_percentile)?;
    Ok(score_from_percentiles(low, high, cfg))
}

pub fn score_from_percentiles(p_low_tss: f64, p_high_residual: f64, cfg: &MetricConfig) -> f64 {
    let ratio = p_low_tss.max(cfg.epsilon) / p_high_residual.max(cfg.epsilon);
    (10.0 * ratio.log10()).clamp(-SCORE_LIMIT_DB, SCORE_LIMIT_DB)
}

/// Score of one analysis window.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct WindowScore {
    pub start_frame: usize,
    pub frames: usize,
    pub p5_tss: f64,
    pub p95_r: f64,
    pub score_db: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ClarityResult {
    pub variant: PsyVariant,
    pub m_tss_series: Vec<f64>,
    pub m_r_series: Vec<f64>,
    /// Percentiles over the whole clip.
    pub p5_tss: f64,
    pub p95_r: f64,
    /// Mean of the per-window scores.
    pub overall_score_db: f64,
    pub windows: Vec<WindowScore>,
}

impl ClarityResult {
    pub fn frames(&self) -> usize {
        self.m_tss_series.len()
    }

    /// Per-frame series as CSV: `frame,m_tss,m_r`.
    pub fn write_series_csv<W: Write>(&self, out: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(out);
        w.write_record(["frame", "m_tss", "m_r"])?;
        for (i, (t, r)) in self.m_tss_series.iter().zip(&self.m_r_series).enumerate() {
            w.write_record([i.to_string(), t.to_string(), r.to_string()])?;
        }
        w.flush()?;
        Ok(())
    }
}

/// Splits `n` frames into windows of `len`. A trailing piece shorter than
/// half a window joins the previous window.
pub fn window_bounds(n: usize, len: usize) -> Vec<(usize, usize)> {
    let len = len.max(1);
    let mut out = Vec::new();
    let mut start = 0;
    while start < n {
        let end = (start + len).min(n);
        out.push((start, end));
        start = end;
    }
    if out.len() > 1 {
        let (s, e) = out[out.len() - 1];
        if (e - s) * 2 < len {
            out.pop();
            out.last_mut().unwrap().1 = e;
        }
    }
    out
}

/// Scores already-computed series window by window.
pub fn score_series(
    variant: PsyVariant,
    m_tss: Vec<f64>,
    m_r: Vec<f64>,
    frames_per_window: usize,
    cfg: &MetricConfig,
) -> Result<ClarityResult> {
    if m_tss.len() != m_r.len() {
        return Err(Error::MisalignedFrames {
            left: m_tss.len(),
            right: m_r.len(),
        });
    }
    let windows = window_bounds(m_tss.len(), frames_per_window)
        .into_iter()
        .map(|(s, e)| {
            let p5 = percentile(&m_tss[s..e], cfg.low_percentile)?;
            let p95 = percentile(&m_r[s..e], cfg.high_percentile)?;
            Ok(WindowScore {
                start_frame: s,
                frames: e - s,
                p5_tss: p5,
                p95_r: p95,
                score_db: score_from_percentiles(p5, p95, cfg),
            })
        })
        .collect::<Result<Vec<_>>>()?;
    let overall = windows.iter().map(|w| w.score_db).sum::<f64>() / windows.len() as f64;
    Ok(ClarityResult {
        variant,
        p5_tss: percentile(&m_tss, cfg.low_percentile)?,
        p95_r: percentile(&m_r, cfg.high_percentile)?,
        m_tss_series: m_tss,
        m_r_series: m_r,
        overall_score_db: overall,
        windows,
    })
}

/// Full pipeline: loudness normalisation, TSR decomposition, psychoacoustic
/// analysis of both components and the cross-component score.
pub fn analyze_clip(
    clip: &AudioClip,
    variant: PsyVariant,
    params: &SeparationParams,
    psy: &PsyConfig,
    cfg: &MetricConfig,
) -> Result<ClarityResult> {
    analyze_clip_variants(clip, &[variant], params, psy, cfg).map(|mut v| v.remove(0))
}

/// Like [`analyze_clip`] for several variants, sharing the decomposition.
pub fn analyze_clip_variants(
    clip: &AudioClip,
    variants: &[PsyVariant],
    params: &SeparationParams,
    psy: &PsyConfig,
    cfg: &MetricConfig,
) -> Result<Vec<ClarityResult>> {
    cfg.validate()?;
    let normalized = normalize_loudness(clip, TARGET_LUFS)?;
    let parts = decompose(&normalized, params)?;
    variants
        .iter()
        .map(|&variant| {
            let model = PsyModel::new(variant, *psy);
            let (tss, residual) = rayon::join(
                || model.band_frames(&parts.tss),
                || model.band_frames(&parts.residual),
            );
            let (m_tss, m_r) = cross_component_series(&tss?, &residual?, cfg)?;
            let advance = psy.advance.unwrap_or_else(|| variant.granule());
            let per_window =
                ((cfg.analysis_window_s * clip.sample_rate() as f64) / advance as f64).round() as usize;
            score_series(variant, m_tss, m_r, per_window, cfg)
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::psymodel::BandLayout;
    use proptest::prelude::*;
    use rand::{RngExt, SeedableRng};
    use rand_chacha::ChaCha8Rng;
    use std::f64::consts::PI;

    fn band_frame(energy: Vec<f64>, threshold: Vec<f64>) -> BandFrame {
        let n = energy.len();
        let edges = (0..=n).map(|i| i * (512 / n)).collect::<Vec<_>>();
        BandFrame {
            frame_index: 0,
            quiet: vec![0.0; n],
            energy,
            threshold,
            layout: BandLayout::from_edges(edges).unwrap(),
        }
    }

    #[test]
    fn smr_examples() {
        assert_eq!(smr(2.5, 2.5).unwrap(), 1.0);
        assert_eq!(smr(0.0, 1.0).unwrap(), 0.0);
        assert_eq!(smr(3.0, 1.5).unwrap(), 2.0);
        assert!(smr(1.0, 0.0).is_err());
        assert!(smr(1.0, -1.0).is_err());
    }

    #[test]
    fn msr_examples() {
        assert_eq!(msr_db(4.2, 4.2), 0.0);
        assert!((msr_db(1.0, 100.0) - 20.0).abs() < 1e-12);
        assert!((msr_db(10.0, 1.0) + 10.0).abs() < 1e-12);
        assert!(msr_db(0.0, 1.0).is_finite());
    }

    #[test]
    fn frame_metric_examples() {
        let cfg = MetricConfig::default();
        assert_eq!(frame_masking_metric(&[5.0, 5.0], &[1.0, 5.0], &cfg).unwrap(), 0.0);
        assert!((frame_masking_metric(&[1.0], &[100.0], &cfg).unwrap() - 1.0).abs() < 1e-12);
        // 10 dB and 30 dB masked, one band at -5 dB left out.
        let e = [1.0, 1.0, 10f64.powf(0.5)];
        let mt = [10.0, 1000.0, 1.0];
        assert!((frame_masking_metric(&e, &mt, &cfg).unwrap() - 2.0).abs() < 1e-12);
        assert!(frame_masking_metric(&[1.0], &[1.0, 2.0], &cfg).is_err());
    }

    #[test]
    fn tmax_scales_the_frame_metric() {
        let cfg = MetricConfig {
            tmax_db: 10.0,
            ..MetricConfig::default()
        };
        let e = [1.0, 1.0];
        let mt = [10.0, 1000.0];
        assert!((frame_masking_metric(&e, &mt, &cfg).unwrap() - 4.0).abs() < 1e-12);
    }

    #[test]
    fn identical_components_give_identical_series() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let frames: Vec<BandFrame> = (0..20)
            .map(|_| {
                band_frame(
                    (0..32).map(|_| rng.random::<f64>() * 10.0).collect(),
                    (0..32).map(|_| rng.random::<f64>() * 10.0 + 0.1).collect(),
                )
            })
            .collect();
        let (a, b) = cross_component_series(&frames, &frames, &MetricConfig::default()).unwrap();
        assert_eq!(a, b);
        let s = overall_score(&a, &b, &MetricConfig::default()).unwrap();
        assert!(percentile(&a, 0.05).unwrap() <= percentile(&a, 0.95).unwrap());
        assert!(s <= 0.0);

        let constant = vec![0.7; 30];
        assert_eq!(overall_score(&constant, &constant, &MetricConfig::default()).unwrap(), 0.0);
    }

    #[test]
    fn silent_residual_leaves_loud_tss_unmasked() {
        let quiet = vec![1e-3; 32];
        let tss = vec![band_frame(vec![10.0; 32], vec![1.0; 32]); 5];
        let residual = vec![band_frame(vec![0.0; 32], quiet.clone()); 5];
        let (m_tss, m_r) = cross_component_series(&tss, &residual, &MetricConfig::default()).unwrap();
        assert!(m_tss.iter().all(|&m| m == 0.0));
        // Silent residual sits under the TSS threshold in every band.
        assert!(m_r.iter().all(|&m| m > 0.0));
    }

    #[test]
    fn series_match_direct_double_loop() {
        let cfg = MetricConfig::default();
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        let mut gen = |n: usize| -> Vec<BandFrame> {
            (0..n)
                .map(|_| {
                    band_frame(
                        (0..16).map(|_| 10f64.powf(rng.random::<f64>() * 6.0)).collect(),
                        (0..16).map(|_| 10f64.powf(rng.random::<f64>() * 6.0)).collect(),
                    )
                })
                .collect()
        };
        let tss = gen(40);
        let res = gen(40);
        let (m_tss, m_r) = cross_component_series(&tss, &res, &cfg).unwrap();
        for f in 0..40 {
            let mut a = 0.0;
            let mut b = 0.0;
            for sb in 0..16 {
                if tss[f].energy[sb] < res[f].threshold[sb] {
                    a += 10.0 * (res[f].threshold[sb] / tss[f].energy[sb]).log10() / 20.0;
                }
                if res[f].energy[sb] < tss[f].threshold[sb] {
                    b += 10.0 * (tss[f].threshold[sb] / res[f].energy[sb]).log10() / 20.0;
                }
            }
            assert!((m_tss[f] - a).abs() <= 1e-12 * a.max(1.0));
            assert!((m_r[f] - b).abs() <= 1e-12 * b.max(1.0));
        }
    }

    #[test]
    fn misaligned_series_error() {
        let f = band_frame(vec![1.0; 32], vec![1.0; 32]);
        let cfg = MetricConfig::default();
        assert!(matches!(
            cross_component_series(&[f.clone(), f.clone()], std::slice::from_ref(&f), &cfg),
            Err(Error::MisalignedFrames { .. })
        ));
        let g = band_frame(vec![1.0; 16], vec![1.0; 16]);
        assert!(cross_component_series(&[f], &[g], &cfg).is_err());
    }

    #[test]
    fn percentile_examples() {
        assert_eq!(percentile(&[3.5; 9], 0.37).unwrap(), 3.5);
        let ramp: Vec<f64> = (0..=100).map(f64::from).collect();
        assert!((percentile(&ramp, 0.05).unwrap() - 5.0).abs() < 1e-12);
        assert_eq!(percentile(&[2.0, 1.0], 0.5).unwrap(), 1.5);
        assert!(matches!(percentile(&[], 0.5), Err(Error::EmptySeries)));
        assert!(percentile(&[1.0], 1.5).is_err());
    }

    #[test]
    fn overall_score_examples() {
        let cfg = MetricConfig::default();
        assert_eq!(score_from_percentiles(1.0, 1.0, &cfg), 0.0);
        assert!((score_from_percentiles(10.0, 1.0, &cfg) - 10.0).abs() < 1e-12);
        assert_eq!(score_from_percentiles(0.0, 5.0, &cfg), -SCORE_LIMIT_DB);
        assert_eq!(score_from_percentiles(5.0, 0.0, &cfg), SCORE_LIMIT_DB);
        assert_eq!(score_from_percentiles(0.0, 0.0, &cfg), 0.0);
    }

    #[test]
    fn window_bounds_merge_short_tail() {
        assert_eq!(window_bounds(10, 10), vec![(0, 10)]);
        assert_eq!(window_bounds(7, 10), vec![(0, 7)]);
        assert_eq!(window_bounds(24, 10), vec![(0, 10), (10, 24)]);
        assert_eq!(window_bounds(25, 10), vec![(0, 10), (10, 20), (20, 25)]);
        assert_eq!(window_bounds(26, 10), vec![(0, 10), (10, 20), (20, 26)]);
        assert_eq!(window_bounds(0, 10), vec![]);
    }

    #[test]
    fn config_validation() {
        assert!(MetricConfig::default().validate().is_ok());
        let bad = MetricConfig {
            low_percentile: 0.9,
            high_percentile: 0.1,
            ..MetricConfig::default()
        };
        assert!(bad.validate().is_err());
        let bad = MetricConfig {
            tmax_db: 0.0,
            ..MetricConfig::default()
        };
        assert!(bad.validate().is_err());
    }

    fn tone_clicks(n: usize) -> AudioClip {
        AudioClip::at_analysis_rate(
            (0..n)
                .map(|i| {
                    let t = i as f64 / 44_100.0;
                    let click = if i % 11_025 < 40 { 0.8 } else { 0.0 };
                    0.3 * (2.0 * PI * 440.0 * t).sin() + click
                })
                .collect(),
        )
        .unwrap()
    }

    fn white(n: usize, seed: u64) -> AudioClip {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        AudioClip::at_analysis_rate((0..n).map(|_| rng.random::<f64>() - 0.5).collect()).unwrap()
    }

    #[test]
    fn silence_cannot_be_analyzed() {
        let clip = AudioClip::at_analysis_rate(vec![0.0; 44_100]).unwrap();
        let r = analyze_clip(
            &clip,
            PsyVariant::L2pm,
            &SeparationParams::default(),
            &PsyConfig::default(),
            &MetricConfig::default(),
        );
        assert!(matches!(r, Err(Error::ImmeasurableLoudness)));
    }

    #[test]
    fn noise_scores_above_tone_with_clicks() {
        let n = 3 * 44_100;
        let params = SeparationParams::default();
        let psy = PsyConfig::default();
        let cfg = MetricConfig::default();
        let noise = analyze_clip_variants(&white(n, 3), &PsyVariant::ALL, &params, &psy, &cfg).unwrap();
        let tone = analyze_clip_variants(&tone_clicks(n), &PsyVariant::ALL, &params, &psy, &cfg).unwrap();
        for (a, b) in noise.iter().zip(&tone) {
            assert!(
                a.overall_score_db > b.overall_score_db,
                "{}: noise {} vs tone {}",
                a.variant,
                a.overall_score_db,
                b.overall_score_db
            );
            assert!(a.m_tss_series.iter().chain(&a.m_r_series).all(|&m| m >= 0.0));
            assert_eq!(a.m_tss_series.len(), a.m_r_series.len());
        }
    }

    #[test]
    fn analysis_is_deterministic() {
        let clip = white(2 * 44_100, 4);
        let run = || {
            analyze_clip(
                &clip,
                PsyVariant::L3pm,
                &SeparationParams::default(),
                &PsyConfig::default(),
                &MetricConfig::default(),
            )
            .unwrap()
        };
        assert_eq!(run(), run());
    }

    proptest! {
        #[test]
        fn metric_never_decreases_when_a_threshold_rises(
            e in prop::collection::vec(1e-3f64..1e3, 8),
            mt in prop::collection::vec(1e-3f64..1e3, 8),
            band in 0usize..8,
            lift in 1.0f64..100.0,
        ) {
            let cfg = MetricConfig::default();
            let before = frame_masking_metric(&e, &mt, &cfg).unwrap();
            let mut raised = mt.clone();
            raised[band] = raised[band].max(e[band]) * lift;
            let after = frame_masking_metric(&e, &raised, &cfg).unwrap();
            prop_assert!(after >= before - 1e-12);
            prop_assert!(before >= 0.0);
        }

        #[test]
        fn percentiles_are_ordered(
            series in prop::collection::vec(-1e6f64..1e6, 1..200),
            a in 0.0f64..1.0,
            b in 0.0f64..1.0,
        ) {
            let (lo, hi) = if a <= b { (a, b) } else { (b, a) };
            prop_assert!(percentile(&series, lo).unwrap() <= percentile(&series, hi).unwrap());
        }
    }
}
