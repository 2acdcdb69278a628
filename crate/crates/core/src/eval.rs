//! Correlation against subjective ratings and degradation-trend summaries.

use std::collections::{BTreeMap, HashMap};
use std::io::{Read, Write};
use std::path::Path;

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::Serialize;
use statrs::distribution::{ContinuousCDF, StudentsT};

use crate::degrade::{DegradationKind, Manifest};
use crate::error::{Error, Result};
use crate::metric::percentile;
use crate::psymodel::PsyVariant;

fn check_pair(x: &[f64], y: &[f64]) -> Result<()> {
    if x.len() != y.len() {
        return Err(Error::InvalidParameter(format!(
            "paired sequences differ in length: {} vs {}",
            x.len(),
            y.len()
        )));
    }
    if x.len() < 3 {
        return Err(Error::InsufficientData {
            needed: 3,
            found: x.len(),
        });
    }
    Ok(())
}

fn mean(x: &[f64]) -> f64 {
    x.iter().sum::<f64>() / x.len() as f64
}

/// Product-moment correlation coefficient.
pub fn pearson(x: &[f64], y: &[f64]) -> Result<f64> {
    check_pair(x, y)?;
    let (mx, my) = (mean(x), mean(y));
    let (mut sxy, mut sxx, mut syy) = (0.0, 0.0, 0.0);
    for (a, b) in x.iter().zip(y) {
        let (dx, dy) = (a - mx, b - my);
        sxy += dx * dy;
        sxx += dx * dx;
        syy += dy * dy;
    }
    if sxx == 0.0 || syy == 0.0 {
        return Err(Error::UndefinedCorrelation("a sequence has zero variance".into()));
    }
    Ok((sxy / (sxx * syy).sqrt()).clamp(-1.0, 1.0))
}

/// 1-based ranks; tied values share the mean of their ranks.
pub fn mid_ranks(x: &[f64]) -> Vec<f64> {
    let mut order: Vec<usize> = (0..x.len()).collect();
    order.sort_by(|&a, &b| x[a].total_cmp(&x[b]));
    let mut ranks = vec![0.0; x.len()];
    let mut i = 0;
    while i < order.len() {
        let mut j = i;
        while j + 1 < order.len() && x[order[j + 1]] == x[order[i]] {
            j += 1;
        }
        let rank = (i + j) as f64 / 2.0 + 1.0;
        for &k in &order[i..=j] {
            ranks[k] = rank;
        }
        i = j + 1;
    }
    ranks
}

/// Rank correlation: Pearson on mid-ranks.
pub fn spearman(x: &[f64], y: &[f64]) -> Result<f64> {
    check_pair(x, y)?;
    pearson(&mid_ranks(x), &mid_ranks(y))
}

/// Two-tailed p-value of a correlation coefficient from the t distribution
/// with `n - 2` degrees of freedom.
pub fn correlation_p_value(r: f64, n: usize) -> Result<f64> {
    if n < 4 {
        return Err(Error::InsufficientData { needed: 4, found: n });
    }
    if !(-1.0..=1.0).contains(&r) {
        return Err(Error::InvalidParameter(format!("coefficient {r} outside [-1, 1]")));
    }
    if r.abs() >= 1.0 {
        return Ok(0.0);
    }
    let df = (n - 2) as f64;
    let t = r.abs() * (df / (1.0 - r * r)).sqrt();
    let dist = StudentsT::new(0.0, 1.0, df).expect("positive degrees of freedom");
    Ok((2.0 * (1.0 - dist.cdf(t))).clamp(0.0, 1.0))
}

/// Which coefficient a permutation test shuffles against.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Coefficient {
    Pearson,
    Spearman,
}

/// Two-tailed permutation p-value: share of shuffles whose coefficient is at
/// least as extreme as the observed one (observed included).
pub fn permutation_p_value(x: &[f64], y: &[f64], which: Coefficient, shuffles: usize, seed: u64) -> Result<f64> {
    let stat = |a: &[f64], b: &[f64]| match which {
        Coefficient::Pearson => pearson(a, b),
        Coefficient::Spearman => spearman(a, b),
    };
    let observed = stat(x, y)?.abs();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut shuffled = y.to_vec();
    let mut extreme = 1;
    for _ in 0..shuffles {
        shuffled.shuffle(&mut rng);
        if stat(x, &shuffled)?.abs() >= observed - 1e-12 {
            extreme += 1;
        }
    }
    Ok(extreme as f64 / (shuffles + 1) as f64)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct CorrelationReport {
    pub pearson_r: f64,
    pub spearman_rho: f64,
    pub p_value_pearson: f64,
    pub p_value_spearman: f64,
    pub n: usize,
}

pub fn correlate(x: &[f64], y: &[f64]) -> Result<CorrelationReport> {
    let pearson_r = pearson(x, y)?;
    let spearman_rho = spearman(x, y)?;
    let n = x.len();
    Ok(CorrelationReport {
        pearson_r,
        spearman_rho,
        p_value_pearson: correlation_p_value(pearson_r, n)?,
        p_value_spearman: correlation_p_value(spearman_rho, n)?,
        n,
    })
}

/// Sample median with a rank-based 95% interval: ranks
/// `ceil(n/2 -+ 1.96 sqrt(n) / 2)` of the sorted sample.
pub fn median_ci(values: &[f64]) -> Result<(f64, f64, f64)> {
    let n = values.len();
    if n < 6 {
        return Err(Error::InsufficientData { needed: 6, found: n });
    }
    let mut sorted = values.to_vec();
    sorted.sort_by(f64::total_cmp);
    let median = percentile(&sorted, 0.5)?;
    let half_width = 1.96 * (n as f64).sqrt() / 2.0;
    let rank = |r: f64| (r.ceil() as usize).clamp(1, n);
    let lo = sorted[rank(n as f64 / 2.0 - half_width) - 1];
    let hi = sorted[rank(n as f64 / 2.0 + half_width) - 1];
    Ok((median, lo, hi))
}

/// Strips directories and a `.wav` extension so paths and bare ids match.
pub fn normalize_stimulus_id(id: &str) -> String {
    let base = id.rsplit(['/', '\\']).next().unwrap_or(id).trim();
    base.strip_suffix(".wav")
        .or_else(|| base.strip_suffix(".WAV"))
        .unwrap_or(base)
        .to_string()
}

/// Stimulus id to value, in file order.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct ScoreTable {
    pub rows: Vec<(String, f64)>,
}

impl ScoreTable {
    /// Reads either `stimulus_id,value` or the CSV written by `analyze`
    /// (`path,variant,overall_score_db,...`). For the latter, `variant`
    /// selects rows when the file holds several variants.
    pub fn from_reader<R: Read>(reader: R, variant: Option<PsyVariant>) -> Result<Self> {
        let mut r = csv::Reader::from_reader(reader);
        let headers = r.headers()?.clone();
        let col = |name: &str| headers.iter().position(|h| h.trim() == name);
        let (id_col, value_col, variant_col) = match (col("stimulus_id"), col("value")) {
            (Some(i), Some(v)) => (i, v, None),
            _ => match (col("path"), col("overall_score_db")) {
                (Some(i), Some(v)) => (i, v, col("variant")),
                _ => {
                    return Err(Error::InvalidParameter(
                        "score table needs stimulus_id,value or path,overall_score_db columns".into(),
                    ))
                }
            },
        };
        let wanted = variant.map(|v| v.to_string());
        let mut rows = Vec::new();
        let mut seen = HashMap::new();
        let mut variants_seen = std::collections::BTreeSet::new();
        for record in r.records() {
            let record = record?;
            if let Some(vc) = variant_col {
                let v = record.get(vc).unwrap_or("").trim().to_string();
                variants_seen.insert(v.clone());
                if let Some(w) = &wanted {
                    if &v != w {
                        continue;
                    }
                }
            }
            let id = normalize_stimulus_id(record.get(id_col).unwrap_or(""));
            let raw = record.get(value_col).unwrap_or("").trim();
            let value: f64 = raw
                .parse()
                .map_err(|_| Error::InvalidParameter(format!("non-numeric value {raw:?} for {id}")))?;
            if seen.insert(id.clone(), ()).is_some() {
                return Err(Error::InvalidParameter(format!("duplicate stimulus id {id}")));
            }
            rows.push((id, value));
        }
        if wanted.is_none() && variants_seen.len() > 1 {
            return Err(Error::InvalidParameter(
                "score table mixes variants; pick one with --variant".into(),
            ));
        }
        Ok(Self { rows })
    }

    pub fn read_csv(path: impl AsRef<Path>, variant: Option<PsyVariant>) -> Result<Self> {
        let path = path.as_ref();
        let file = std::fs::File::open(path).map_err(|e| Error::from(e).at_path(path))?;
        Self::from_reader(file, variant).map_err(|e| e.at_path(path))
    }

    pub fn get(&self, id: &str) -> Option<f64> {
        self.rows.iter().find(|(k, _)| k == id).map(|(_, v)| *v)
    }

    pub fn len(&self) -> usize {
        self.rows.len()
    }

    pub fn is_empty(&self) -> bool {
        self.rows.is_empty()
    }
}

/// Inner join of two tables on stimulus id, in the order of `left`.
#[derive(Debug, Clone, PartialEq)]
pub struct Joined {
    pub ids: Vec<String>,
    pub left: Vec<f64>,
    pub right: Vec<f64>,
    /// Ids present in only one table.
    pub unmatched: Vec<String>,
}

pub fn join(left: &ScoreTable, right: &ScoreTable) -> Result<Joined> {
    let lookup: HashMap<&str, f64> = right.rows.iter().map(|(k, v)| (k.as_str(), *v)).collect();
    let mut out = Joined {
        ids: Vec::new(),
        left: Vec::new(),
        right: Vec::new(),
        unmatched: Vec::new(),
    };
    for (id, v) in &left.rows {
        match lookup.get(id.as_str()) {
            Some(&r) => {
                out.ids.push(id.clone());
                out.left.push(*v);
                out.right.push(r);
            }
            None => out.unmatched.push(id.clone()),
        }
    }
    let matched: std::collections::HashSet<&str> = out.ids.iter().map(String::as_str).collect();
    out.unmatched
        .extend(right.rows.iter().filter(|(k, _)| !matched.contains(k.as_str())).map(|(k, _)| k.clone()));
    if out.ids.len() < 3 {
        return Err(Error::InsufficientMatches {
            needed: 3,
            found: out.ids.len(),
        });
    }
    Ok(out)
}

/// Correlates model scores with subjective ratings over shared stimuli.
pub fn evaluate_correlation(model: &ScoreTable, subjective: &ScoreTable) -> Result<(CorrelationReport, Joined)> {
    let joined = join(model, subjective)?;
    if !joined.unmatched.is_empty() {
        log::warn!("{} stimuli without a partner: {:?}", joined.unmatched.len(), joined.unmatched);
    }
    Ok((correlate(&joined.left, &joined.right)?, joined))
}

/// One score of one degraded file.
#[derive(Debug, Clone, PartialEq)]
pub struct TrendPoint {
    pub stimulus: String,
    pub set: DegradationKind,
    /// `None` for the reference.
    pub level_index: Option<usize>,
    pub score: f64,
}

/// Pairs manifest rows with analysed scores. The stimulus is the file name
/// up to the first `__`.
pub fn trend_points(manifest: &Manifest, scores: &ScoreTable) -> Vec<TrendPoint> {
    let lookup: HashMap<&str, f64> = scores.rows.iter().map(|(k, v)| (k.as_str(), *v)).collect();
    manifest
        .rows
        .iter()
        .filter_map(|row| {
            let id = normalize_stimulus_id(&row.file);
            let score = *lookup.get(id.as_str())?;
            let stimulus = id.split("__").next().unwrap_or(&id).to_string();
            Some(TrendPoint {
                stimulus,
                set: row.set,
                level_index: (row.set != DegradationKind::Reference).then_some(row.level_index),
                score,
            })
        })
        .collect()
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct LevelSummary {
    /// `None` for the reference.
    pub level_index: Option<usize>,
    pub n: usize,
    pub median: f64,
    pub q1: f64,
    pub q3: f64,
    pub iqr: f64,
    pub min: f64,
    pub max: f64,
}

impl LevelSummary {
    pub fn of(level_index: Option<usize>, values: &[f64]) -> Result<Self> {
        let q1 = percentile(values, 0.25)?;
        let q3 = percentile(values, 0.75)?;
        Ok(Self {
            level_index,
            n: values.len(),
            median: percentile(values, 0.5)?,
            q1,
            q3,
            iqr: q3 - q1,
            min: values.iter().copied().fold(f64::INFINITY, f64::min),
            max: values.iter().copied().fold(f64::NEG_INFINITY, f64::max),
        })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SetTrend {
    pub set: DegradationKind,
    /// Reference first, then the levels present in ascending order.
    pub levels: Vec<LevelSummary>,
    /// Share of stimuli whose scores never drop from one level to the next
    /// (stimuli missing a level are left out).
    pub monotonic_fraction: Option<f64>,
    /// Cross-stimulus spread (IQR) at the reference and at the last level.
    pub spread_reference: Option<f64>,
    pub spread_max_level: Option<f64>,
    /// Spread at the last level is smaller than at the reference.
    pub converges: Option<bool>,
    /// Some levels or the reference are missing.
    pub partial: bool,
}

impl SetTrend {
    pub fn level(&self, index: usize) -> Option<&LevelSummary> {
        self.levels.iter().find(|l| l.level_index == Some(index))
    }

    pub fn reference(&self) -> Option<&LevelSummary> {
        self.levels.iter().find(|l| l.level_index.is_none())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct TrendReport {
    pub sets: Vec<SetTrend>,
}

impl TrendReport {
    pub fn set(&self, kind: DegradationKind) -> Option<&SetTrend> {
        self.sets.iter().find(|s| s.set == kind)
    }

    /// Plot-ready CSV: `set,level,median,q1,q3,min,max`.
    pub fn write_csv<W: Write>(&self, out: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(out);
        w.write_record(["set", "level", "median", "q1", "q3", "min", "max"])?;
        for s in &self.sets {
            for l in &s.levels {
                let level = l.level_index.map_or("reference".to_string(), |i| i.to_string());
                w.write_record([
                    s.set.to_string(),
                    level,
                    l.median.to_string(),
                    l.q1.to_string(),
                    l.q3.to_string(),
                    l.min.to_string(),
                    l.max.to_string(),
                ])?;
            }
        }
        w.flush()?;
        Ok(())
    }
}

/// Per-set, per-level score statistics. Reference points are shared by
/// every set.
pub fn trend_report(points: &[TrendPoint]) -> Result<TrendReport> {
    let reference: BTreeMap<&str, f64> = points
        .iter()
        .filter(|p| p.set == DegradationKind::Reference || p.level_index.is_none())
        .map(|p| (p.stimulus.as_str(), p.score))
        .collect();
    let mut sets = Vec::new();
    for kind in DegradationKind::SETS {
        let n_levels = kind.levels().len();
        // stimulus -> level -> score
        let mut grid: BTreeMap<&str, BTreeMap<usize, f64>> = BTreeMap::new();
        for p in points.iter().filter(|p| p.set == kind) {
            if let Some(l) = p.level_index {
                grid.entry(p.stimulus.as_str()).or_default().insert(l, p.score);
            }
        }
        if grid.is_empty() {
            continue;
        }
        let mut levels = Vec::new();
        let ref_values: Vec<f64> = reference.values().copied().collect();
        if !ref_values.is_empty() {
            levels.push(LevelSummary::of(None, &ref_values)?);
        }
        let mut partial = ref_values.is_empty();
        for l in 0..n_levels {
            let values: Vec<f64> = grid.values().filter_map(|m| m.get(&l).copied()).collect();
            if values.len() < grid.len() {
                partial = true;
            }
            if !values.is_empty() {
                levels.push(LevelSummary::of(Some(l), &values)?);
            }
        }
        let complete: Vec<Vec<f64>> = grid
            .values()
            .filter(|m| m.len() == n_levels)
            .map(|m| m.values().copied().collect())
            .collect();
        let monotonic_fraction = (!complete.is_empty()).then(|| {
            complete
                .iter()
                .filter(|s| s.windows(2).all(|w| w[1] >= w[0]))
                .count() as f64
                / complete.len() as f64
        });
        let spread_reference = levels.iter().find(|l| l.level_index.is_none()).map(|l| l.iqr);
        let spread_max_level = levels
            .iter()
            .find(|l| l.level_index == Some(n_levels - 1))
            .map(|l| l.iqr);
        let converges = match (spread_reference, spread_max_level) {
            (Some(r), Some(m)) => Some(m < r),
            _ => None,
        };
        if partial {
            log::warn!("{kind}: some levels are missing; report is partial");
        }
        sets.push(SetTrend {
            set: kind,
            levels,
            monotonic_fraction,
            spread_reference,
            spread_max_level,
            converges,
            partial,
        });
    }
    if sets.is_empty() {
        return Err(Error::InsufficientData { needed: 1, found: 0 });
    }
    Ok(TrendReport { sets })
}
