use std::collections::HashSet;
use std::fs::File;
use std::io::{self, BufWriter, Write};
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use rayon::prelude::*;
use serde::Serialize;

use mixclarity::eval::{evaluate_correlation, trend_points};
use mixclarity::metric::WindowScore;
use mixclarity::{
    analyze_clip_variants, build_dataset, decompose, load_wav, normalize_loudness, trend_report, write_wav,
    ClarityResult, DatasetInput, Error, Manifest, OutputFormat, PsyVariant, Result, RunConfig, ScoreTable,
    VariantSelection, WavFormat, TARGET_LUFS,
};

/// Mix-clarity analysis from transient, steady-state and residual masking.
#[derive(Debug, Parser)]
#[command(name = "mixclarity", version)]
struct Cli {
    #[command(flatten)]
    common: Common,
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Args)]
struct Common {
    /// Psychoacoustic model variant: l2pm, l3pm, mod-l3pm or all.
    #[arg(long, global = true)]
    variant: Option<VariantSelection>,
    /// Base seed for every random draw.
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Output file (analyze, evaluate) or directory (decompose, degrade).
    #[arg(long, global = true)]
    out: Option<PathBuf>,
    /// TOML config file; command-line flags take precedence.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Record format: json or csv.
    #[arg(long, global = true)]
    format: Option<OutputFormat>,
    /// More log output on stderr (repeat for debug).
    #[arg(short, long, global = true, action = clap::ArgAction::Count)]
    verbose: u8,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Score WAV files.
    Analyze {
        #[arg(required = true)]
        paths: Vec<PathBuf>,
        /// Also write per-frame metric series as CSV into this directory.
        #[arg(long)]
        series_dir: Option<PathBuf>,
    },
    /// Split a WAV file into TSS and residual stems.
    Decompose {
        path: PathBuf,
        /// Also write the per-bin S/T/R labels as CSV.
        #[arg(long)]
        masks: bool,
    },
    /// Build the reference + 21-file degradation set for each input.
    Degrade {
        #[arg(required = true)]
        paths: Vec<PathBuf>,
    },
    /// Correlate model scores with subjective scores, or summarise a
    /// degradation dataset by set and level.
    Evaluate {
        /// Model scores: `analyze --format csv` output or `stimulus_id,value`.
        scores: PathBuf,
        /// Subjective scores as `stimulus_id,value`.
        #[arg(long, conflicts_with = "manifest", required_unless_present = "manifest")]
        subjective: Option<PathBuf>,
        /// Manifest written by `degrade`.
        #[arg(long)]
        manifest: Option<PathBuf>,
    },
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let level = match cli.common.verbose {
        0 => "warn",
        1 => "info",
        _ => "debug",
    };
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or(level)).init();

    let cfg = match effective_config(&cli.common) {
        Ok(cfg) => cfg,
        Err(e) => {
            eprintln!("error: {e}");
            return ExitCode::from(2);
        }
    };
    let out = cli.common.out.as_deref();
    let outcome = match &cli.command {
        Command::Analyze { paths, series_dir } => cmd_analyze(paths, series_dir.as_deref(), out, &cfg),
        Command::Decompose { path, masks } => cmd_decompose(path, *masks, out, &cfg),
        Command::Degrade { paths } => cmd_degrade(paths, out, &cfg),
        Command::Evaluate {
            scores,
            subjective,
            manifest,
        } => {
            let filter = match cli.common.variant {
                Some(VariantSelection::One(v)) => Some(v),
                _ => None,
            };
            cmd_evaluate(scores, subjective.as_deref(), manifest.as_deref(), filter, out, &cfg)
        }
    };
    match outcome {
        Ok(true) => ExitCode::SUCCESS,
        Ok(false) => ExitCode::FAILURE,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::FAILURE
        }
    }
}

fn effective_config(flags: &Common) -> Result<RunConfig> {
    let mut cfg = match &flags.config {
        Some(path) => RunConfig::load(path)?,
        None => RunConfig::default(),
    };
    if let Some(v) = flags.variant {
        cfg.variant = v;
    }
    if let Some(s) = flags.seed {
        cfg.seed = s;
    }
    if let Some(f) = flags.format {
        cfg.format = f;
    }
    Ok(cfg)
}

fn open_output(out: Option<&Path>) -> Result<Box<dyn Write>> {
    Ok(match out {
        Some(path) => Box::new(BufWriter::new(
            File::create(path).map_err(|e| Error::from(e).at_path(path))?,
        )),
        None => Box::new(BufWriter::new(io::stdout().lock())),
    })
}

fn file_stem(path: &Path) -> String {
    path.file_stem()
        .map(|s| s.to_string_lossy().into_owned())
        .unwrap_or_else(|| path.to_string_lossy().into_owned())
}

#[derive(Serialize)]
struct AnalyzeRecord<'a> {
    path: String,
    variant: String,
    overall_score_db: f64,
    p5_tss: f64,
    p95_r: f64,
    frames: usize,
    windows: &'a [WindowScore],
    config: &'a RunConfig,
}

fn cmd_analyze(paths: &[PathBuf], series_dir: Option<&Path>, out: Option<&Path>, cfg: &RunConfig) -> Result<bool> {
    let variants = cfg.variant.variants();
    // Results are buffered so output order follows the argument order.
    let results: Vec<Result<Vec<ClarityResult>>> = paths
        .par_iter()
        .map(|path| {
            let clip = load_wav(path)?;
            analyze_clip_variants(&clip, &variants, &cfg.separation, &cfg.psy, &cfg.metric)
                .map_err(|e| e.at_path(path))
        })
        .collect();

    if let Some(dir) = series_dir {
        std::fs::create_dir_all(dir).map_err(|e| Error::from(e).at_path(dir))?;
    }
    let mut w = open_output(out)?;
    let mut csv_out = (cfg.format == OutputFormat::Csv).then(|| csv::Writer::from_writer(Vec::new()));
    if let Some(c) = csv_out.as_mut() {
        c.write_record(["path", "variant", "overall_score_db", "p5_tss", "p95_r", "frames", "windows"])?;
    }
    let mut ok = true;
    for (path, result) in paths.iter().zip(results) {
        let results = match result {
            Ok(r) => r,
            Err(e) => {
                eprintln!("error: {e}");
                ok = false;
                continue;
            }
        };
        for r in &results {
            if let Some(dir) = series_dir {
                let name = format!("{}.{}.series.csv", file_stem(path), VariantSelection::One(r.variant));
                let target = dir.join(name);
                let file = File::create(&target).map_err(|e| Error::from(e).at_path(&target))?;
                r.write_series_csv(BufWriter::new(file))?;
            }
            let record = AnalyzeRecord {
                path: path.display().to_string(),
                variant: r.variant.to_string(),
                overall_score_db: r.overall_score_db,
                p5_tss: r.p5_tss,
                p95_r: r.p95_r,
                frames: r.frames(),
                windows: &r.windows,
                config: cfg,
            };
            match csv_out.as_mut() {
                Some(c) => c.write_record([
                    record.path.clone(),
                    record.variant.clone(),
                    record.overall_score_db.to_string(),
                    record.p5_tss.to_string(),
                    record.p95_r.to_string(),
                    record.frames.to_string(),
                    record.windows.len().to_string(),
                ])?,
                None => {
                    serde_json::to_writer(&mut w, &record)?;
                    writeln!(w)?;
                }
            }
            eprintln!("{}\t{}\t{:.3} dB", record.path, record.variant, record.overall_score_db);
        }
    }
    if let Some(c) = csv_out {
        let bytes = c.into_inner().map_err(|e| Error::from(e.into_error()))?;
        w.write_all(&bytes)?;
    }
    w.flush()?;
    Ok(ok)
}

#[derive(Serialize)]
struct DecomposeRecord {
    path: String,
    tss: String,
    residual: String,
    masks: Option<String>,
    residual_energy_share: f64,
    steady_fraction: f64,
    transient_fraction: f64,
    residual_fraction: f64,
}

fn cmd_decompose(path: &Path, masks: bool, out: Option<&Path>, cfg: &RunConfig) -> Result<bool> {
    let clip = load_wav(path)?;
    let parts = decompose(&clip, &cfg.separation).map_err(|e| e.at_path(path))?;
    let dir = match out {
        Some(d) => d.to_path_buf(),
        None => path.parent().map(Path::to_path_buf).unwrap_or_default(),
    };
    std::fs::create_dir_all(&dir).map_err(|e| Error::from(e).at_path(&dir))?;
    let stem = file_stem(path);
    let tss = dir.join(format!("{stem}.tss.wav"));
    let residual = dir.join(format!("{stem}.residual.wav"));
    write_wav(&parts.tss, &tss, WavFormat::Float32)?;
    write_wav(&parts.residual, &residual, WavFormat::Float32)?;
    let mask_path = if masks {
        let p = dir.join(format!("{stem}.masks.csv"));
        let file = File::create(&p).map_err(|e| Error::from(e).at_path(&p))?;
        parts.write_mask_csv(BufWriter::new(file))?;
        Some(p)
    } else {
        None
    };
    let (steady, transient, resid) = parts.label_fractions();
    let record = DecomposeRecord {
        path: path.display().to_string(),
        tss: tss.display().to_string(),
        residual: residual.display().to_string(),
        masks: mask_path.map(|p| p.display().to_string()),
        residual_energy_share: parts.residual_energy_share(),
        steady_fraction: steady,
        transient_fraction: transient,
        residual_fraction: resid,
    };
    let mut w = io::stdout().lock();
    serde_json::to_writer(&mut w, &record)?;
    writeln!(w)?;
    eprintln!(
        "{}: residual energy share {:.3}",
        record.path, record.residual_energy_share
    );
    Ok(true)
}

#[derive(Serialize)]
struct DegradeRecord {
    out_dir: String,
    manifest: String,
    clips: usize,
    files: usize,
    skipped: Vec<String>,
    seed: u64,
}

fn cmd_degrade(paths: &[PathBuf], out: Option<&Path>, cfg: &RunConfig) -> Result<bool> {
    let out_dir = out.ok_or_else(|| Error::InvalidParameter("degrade needs --out DIR".into()))?;
    let mut inputs = Vec::new();
    let mut skipped = Vec::new();
    let mut stems = HashSet::new();
    for path in paths {
        let loaded = load_wav(path).and_then(|clip| match normalize_loudness(&clip, TARGET_LUFS) {
            Ok(_) => Ok(clip),
            Err(e) => Err(e.at_path(path)),
        });
        match loaded {
            Ok(clip) => {
                let stem = file_stem(path);
                if !stems.insert(stem.clone()) {
                    return Err(Error::InvalidParameter(format!("two inputs share the name {stem:?}")));
                }
                inputs.push(DatasetInput { stem, clip });
            }
            Err(e) => {
                log::warn!("skipping: {e}");
                skipped.push(path.display().to_string());
            }
        }
    }
    let manifest = build_dataset(&inputs, out_dir, cfg.seed, &cfg.reverb)?;
    let record = DegradeRecord {
        out_dir: out_dir.display().to_string(),
        manifest: out_dir.join(Manifest::FILE_NAME).display().to_string(),
        clips: inputs.len(),
        files: manifest.rows.len(),
        skipped,
        seed: cfg.seed,
    };
    let mut w = io::stdout().lock();
    serde_json::to_writer(&mut w, &record)?;
    writeln!(w)?;
    eprintln!(
        "wrote {} files for {} clips to {}",
        record.files, record.clips, record.out_dir
    );
    Ok(record.skipped.is_empty())
}

fn cmd_evaluate(
    scores: &Path,
    subjective: Option<&Path>,
    manifest: Option<&Path>,
    variant: Option<PsyVariant>,
    out: Option<&Path>,
    cfg: &RunConfig,
) -> Result<bool> {
    let model = ScoreTable::read_csv(scores, variant)?;
    let mut w = open_output(out)?;
    if let Some(subjective) = subjective {
        let subjective = ScoreTable::read_csv(subjective, None)?;
        let (report, joined) = evaluate_correlation(&model, &subjective)?;
        match cfg.format {
            OutputFormat::Json => {
                serde_json::to_writer(&mut w, &report)?;
                writeln!(w)?;
            }
            OutputFormat::Csv => {
                let mut c = csv::Writer::from_writer(&mut w);
                c.serialize(report)?;
                c.flush()?;
            }
        }
        eprintln!(
            "n = {}  r = {:.4} (p = {:.3e})  rho = {:.4} (p = {:.3e})  unmatched = {}",
            report.n,
            report.pearson_r,
            report.p_value_pearson,
            report.spearman_rho,
            report.p_value_spearman,
            joined.unmatched.len()
        );
    } else if let Some(manifest) = manifest {
        let manifest = Manifest::read_csv(manifest).map_err(|e| e.at_path(manifest))?;
        let points = trend_points(&manifest, &model);
        if points.len() < manifest.rows.len() {
            log::warn!("{} manifest files have no score", manifest.rows.len() - points.len());
        }
        let report = trend_report(&points)?;
        match cfg.format {
            OutputFormat::Json => {
                serde_json::to_writer(&mut w, &report)?;
                writeln!(w)?;
            }
            OutputFormat::Csv => report.write_csv(&mut w)?,
        }
        for s in &report.sets {
            eprintln!(
                "{}: monotonic {:?}  spread ref {:?} -> last {:?}",
                s.set, s.monotonic_fraction, s.spread_reference, s.spread_max_level
            );
        }
    }
    w.flush()?;
    Ok(true)
}
