//! Engine latency benchmark over seed sizes.

use std::fmt::Write as _;
use std::time::Instant;

use anyhow::{bail, Context, Result};
use rand::seq::IndexedRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use tablefill_core::columns::suggest_columns;
use tablefill_core::rows::suggest_rows;
use tablefill_core::{normalize_label, IndexBundle, ScoringParams, SeedTable};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, clap::ValueEnum)]
#[serde(rename_all = "lowercase")]
pub enum Mode {
    Rows,
    Columns,
}

impl Mode {
    /// How many entities (rows) or labels (columns) the seed offers.
    pub fn available(self, seed: &SeedTable) -> usize {
        match self {
            Mode::Rows => seed.entities().len(),
            Mode::Columns => seed.labels().len(),
        }
    }

    pub fn truncate(self, seed: &SeedTable, size: usize) -> SeedTable {
        match self {
            Mode::Rows => seed.with_entity_prefix(size),
            Mode::Columns => seed.with_label_prefix(size),
        }
    }
}

#[derive(Debug, Clone)]
pub struct BenchConfig {
    pub mode: Mode,
    pub sizes: Vec<usize>,
    pub repeats: usize,
    /// Suggestions requested per call.
    pub limit: usize,
    pub params: ScoringParams,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub struct SizeStats {
    pub size: usize,
    pub mean_micros: f64,
    pub p50: f64,
    pub p95: f64,
    pub min: f64,
    pub max: f64,
    pub repeats: usize,
    pub samples: usize,
    pub skipped: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub struct LinearFit {
    pub slope: f64,
    pub intercept: f64,
    pub r2: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub struct CorpusInfo {
    pub tables: usize,
    pub entities: usize,
    pub fingerprint: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub struct BenchReport {
    pub mode: Mode,
    pub input_sizes: Vec<usize>,
    pub seeds: usize,
    pub per_size: Vec<SizeStats>,
    pub fit: Option<LinearFit>,
    pub corpus: CorpusInfo,
}

/// Nearest-rank percentile of sorted samples.
pub fn percentile(sorted: &[f64], p: f64) -> f64 {
    assert!(!sorted.is_empty());
    let rank = (p / 100.0 * sorted.len() as f64).ceil() as usize;
    sorted[rank.clamp(1, sorted.len()) - 1]
}

/// Least-squares line through `(x, y)`; `None` with fewer than two points.
pub fn linear_fit(points: &[(f64, f64)]) -> Option<LinearFit> {
    if points.len() < 2 {
        return None;
    }
    let n = points.len() as f64;
    let mx = points.iter().map(|p| p.0).sum::<f64>() / n;
    let my = points.iter().map(|p| p.1).sum::<f64>() / n;
    let sxx: f64 = points.iter().map(|p| (p.0 - mx).powi(2)).sum();
    let sxy: f64 = points.iter().map(|p| (p.0 - mx) * (p.1 - my)).sum();
    let syy: f64 = points.iter().map(|p| (p.1 - my).powi(2)).sum();
    if sxx == 0.0 {
        return None;
    }
    let slope = sxy / sxx;
    let intercept = my - slope * mx;
    let r2 = if syy == 0.0 { 1.0 } else { sxy * sxy / (sxx * syy) };
    Some(LinearFit {
        slope,
        intercept,
        r2,
    })
}

/// Seeds drawn from corpus tables: a table's caption, core entities and
/// distinct labels. Only tables offering at least `min_size` of what `mode`
/// varies are eligible.
pub fn sample_seeds(
    bundle: &IndexBundle,
    count: usize,
    rng_seed: u64,
    mode: Mode,
    min_size: usize,
) -> Result<Vec<SeedTable>> {
    sample_seeds_where(bundle, count, rng_seed, |s| mode.available(s) >= min_size)
}

/// Like [`sample_seeds`] with an arbitrary eligibility test. Tables without
/// core entities never qualify.
pub fn sample_seeds_where(
    bundle: &IndexBundle,
    count: usize,
    rng_seed: u64,
    eligible: impl Fn(&SeedTable) -> bool,
) -> Result<Vec<SeedTable>> {
    let mut pool = Vec::new();
    for t in bundle.tables.tables() {
        let seed = seed_from_table(t)?;
        if !seed.entities().is_empty() && eligible(&seed) {
            pool.push(seed);
        }
    }
    if pool.len() < count {
        bail!(
            "only {} corpus tables qualify as seeds, {count} requested",
            pool.len()
        );
    }
    let mut rng = ChaCha8Rng::seed_from_u64(rng_seed);
    Ok(pool.choose_multiple(&mut rng, count).cloned().collect())
}

fn seed_from_table(t: &tablefill_core::CorpusTable) -> Result<SeedTable> {
    let mut labels: Vec<String> = Vec::new();
    let mut seen = std::collections::HashSet::new();
    for l in &t.labels {
        let n = normalize_label(l);
        if !n.is_empty() && seen.insert(n) {
            labels.push(l.clone());
        }
    }
    SeedTable::new(t.caption.clone(), t.core_entities.clone(), labels)
        .with_context(|| format!("table {} does not form a valid seed", t.id))
}

/// Reads one JSON seed per line; blank lines are ignored.
pub fn read_seeds(text: &str) -> Result<Vec<SeedTable>> {
    text.lines()
        .enumerate()
        .filter(|(_, l)| !l.trim().is_empty())
        .map(|(i, l)| serde_json::from_str(l).with_context(|| format!("seed on line {}", i + 1)))
        .collect()
}

pub fn write_seeds(seeds: &[SeedTable]) -> Result<String> {
    let mut out = String::new();
    for s in seeds {
        out.push_str(&serde_json::to_string(s)?);
        out.push('\n');
    }
    Ok(out)
}

/// Runs every seed, truncated to each size, `repeats` times, timing the
/// engine call alone. One untimed warm-up pass precedes each size.
pub fn run(
    bundle: &IndexBundle,
    seeds: &[SeedTable],
    cfg: &BenchConfig,
    corpus: CorpusInfo,
) -> Result<BenchReport> {
    if cfg.repeats == 0 {
        bail!("repeats must be at least 1");
    }
    if cfg.sizes.is_empty() || cfg.sizes.contains(&0) {
        bail!("sizes must be a non-empty list of positive integers");
    }
    if seeds.is_empty() {
        bail!("no seeds to benchmark");
    }
    let call = |seed: &SeedTable| match cfg.mode {
        Mode::Rows => suggest_rows(seed, bundle, &cfg.params, cfg.limit),
        Mode::Columns => suggest_columns(seed, bundle, &cfg.params, cfg.limit),
    };

    let mut per_size = Vec::with_capacity(cfg.sizes.len());
    for &size in &cfg.sizes {
        let usable: Vec<SeedTable> = seeds
            .iter()
            .filter(|s| cfg.mode.available(s) >= size)
            .map(|s| cfg.mode.truncate(s, size))
            .collect();
        let skipped = seeds.len() - usable.len();
        for s in &usable {
            call(s).with_context(|| format!("seed of size {size}"))?;
        }
        let mut samples = Vec::with_capacity(usable.len() * cfg.repeats);
        for _ in 0..cfg.repeats {
            for s in &usable {
                let start = Instant::now();
                let out = call(s);
                let micros = start.elapsed().as_secs_f64() * 1e6;
                std::hint::black_box(out)?;
                samples.push(micros);
            }
        }
        per_size.push(summarize(size, cfg.repeats, skipped, samples));
    }

    let points: Vec<(f64, f64)> = per_size
        .iter()
        .filter(|s| s.samples > 0)
        .map(|s| (s.size as f64, s.mean_micros))
        .collect();
    Ok(BenchReport {
        mode: cfg.mode,
        input_sizes: cfg.sizes.clone(),
        seeds: seeds.len(),
        fit: linear_fit(&points),
        per_size,
        corpus,
    })
}

fn summarize(size: usize, repeats: usize, skipped: usize, mut samples: Vec<f64>) -> SizeStats {
    samples.sort_by(f64::total_cmp);
    let n = samples.len();
    let (mean, p50, p95, min, max) = if n == 0 {
        (0.0, 0.0, 0.0, 0.0, 0.0)
    } else {
        (
            samples.iter().sum::<f64>() / n as f64,
            percentile(&samples, 50.0),
            percentile(&samples, 95.0),
            samples[0],
            samples[n - 1],
        )
    };
    SizeStats {
        size,
        mean_micros: mean,
        p50,
        p95,
        min,
        max,
        repeats,
        samples: n,
        skipped,
    }
}

pub fn render_table(report: &BenchReport) -> String {
    let mut out = String::new();
    let mode = match report.mode {
        Mode::Rows => "rows",
        Mode::Columns => "columns",
    };
    let _ = writeln!(
        out,
        "mode {mode}, {} seeds, corpus {} tables / {} entities",
        report.seeds, report.corpus.tables, report.corpus.entities
    );
    let _ = writeln!(
        out,
        "{:>5} {:>12} {:>12} {:>12} {:>8} {:>8}",
        "size", "mean_us", "p50_us", "p95_us", "samples", "skipped"
    );
    for s in &report.per_size {
        let _ = writeln!(
            out,
            "{:>5} {:>12.1} {:>12.1} {:>12.1} {:>8} {:>8}",
            s.size, s.mean_micros, s.p50, s.p95, s.samples, s.skipped
        );
    }
    if let Some(fit) = &report.fit {
        let _ = writeln!(
            out,
            "linear fit: {:.2} us/item + {:.1} us, r2 {:.3}",
            fit.slope, fit.intercept, fit.r2
        );
    }
    out
}
