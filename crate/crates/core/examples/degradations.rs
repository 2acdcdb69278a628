//! The three degradations applied to one synthetic mix at each level:
//! pink noise, hall reverb and percentile clipping. Every output is back at
//! -23 LUFS; the crest factor shows what changed.
//!
//!     cargo run --release --example degradations

use mixclarity::degrade::{
    apply_clipping, apply_pink_noise, apply_reverb, clip_bounds, gen_pink_noise, synth_hall_ir, CLIP_RANGE_PERCENT,
    LEVEL_DBFS,
};
use mixclarity::fixtures::{bank_seed, pseudo_mix};
use mixclarity::{measure_loudness, normalize_loudness, AudioClip, ReverbConfig, TARGET_LUFS};

fn crest_db(clip: &AudioClip) -> f64 {
    20.0 * (clip.peak() / clip.rms()).log10()
}

fn main() -> mixclarity::Result<()> {
    let mix = normalize_loudness(&pseudo_mix(bank_seed(4)), TARGET_LUFS)?;
    println!("reference   crest {:5.2} dB", crest_db(&mix));

    let pink = gen_pink_noise(1 << 16, 1)?;
    println!("pink noise  rms {:.3}  crest {:5.2} dB", pink.rms(), crest_db(&pink));

    let cfg = ReverbConfig::default();
    let ir = synth_hall_ir(1, &cfg)?;
    println!(
        "hall IR     {:.1} s, RT60 {} / {:.2} / {} s",
        ir.duration_secs(),
        cfg.rt60_low_s,
        cfg.rt60_mid_s(),
        cfg.rt60_high_s
    );

    println!("level  noise dBFS  crest   reverb dBFS  crest   clip range  bounds              crest");
    for (i, (&db, &range)) in LEVEL_DBFS.iter().zip(&CLIP_RANGE_PERCENT).enumerate() {
        let noisy = apply_pink_noise(&mix, db, 1)?;
        let wet = apply_reverb(&mix, db, 1, &cfg)?;
        let clipped = apply_clipping(&mix, range)?;
        let (lo, hi) = clip_bounds(mix.samples(), range)?;
        println!(
            "L{i}     {db:6.0}     {:6.2}   {db:6.0}      {:6.2}   {range:5.0}%    [{lo:+.4}, {hi:+.4}]  {:6.2}",
            crest_db(&noisy),
            crest_db(&wet),
            crest_db(&clipped)
        );
        debug_assert!((measure_loudness(&clipped)?.integrated_lufs - TARGET_LUFS).abs() < 0.01);
    }
    Ok(())
}
