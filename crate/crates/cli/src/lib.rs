//! `tablefill` command line: build an index, serve it, benchmark it, or
//! generate a synthetic corpus.

pub mod bench;

use std::fs;
use std::path::{Path, PathBuf};

use anyhow::{bail, Context, Result};
use clap::{Args, Parser, Subcommand};
use tablefill_core::index::{file_digest, BuiltFrom, MANIFEST};
use tablefill_core::ingest::{load_corpus, load_kb, CorpusStats};
use tablefill_core::synth::{generate, SynthConfig};
use tablefill_core::{IndexBundle, ScoringParams};

use crate::bench::{BenchConfig, CorpusInfo, Mode};

#[derive(Debug, Parser)]
#[command(name = "tablefill", version, about = "Row and column suggestions for tables")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Ingest a table corpus and knowledge base and persist the index.
    Build(BuildArgs),
    /// Serve the HTTP API over a persisted index.
    Serve(ServeArgs),
    /// Time suggestion calls over growing seed sizes.
    Bench(BenchArgs),
    /// Draw seed tables from an indexed corpus into a seeds file.
    Seeds(SeedsArgs),
    /// Write a synthetic knowledge base and table corpus.
    Generate(GenerateArgs),
}

#[derive(Debug, Args)]
pub struct BuildArgs {
    #[arg(long)]
    pub corpus: PathBuf,
    #[arg(long)]
    pub kb: PathBuf,
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Debug, Args)]
pub struct ServeArgs {
    #[arg(long)]
    pub index: PathBuf,
    #[arg(long, default_value_t = 8080)]
    pub port: u16,
    #[arg(long, default_value = "127.0.0.1")]
    pub host: String,
    /// JSON file with scoring parameters.
    #[arg(long)]
    pub params: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct BenchArgs {
    #[arg(long)]
    pub index: PathBuf,
    #[arg(long, value_enum)]
    pub mode: Mode,
    #[arg(long, value_delimiter = ',', default_value = "1,2,3,4,5")]
    pub sizes: Vec<usize>,
    #[arg(long, default_value_t = 10)]
    pub repeats: usize,
    /// JSONL file, one seed table per line.
    #[arg(long, required_unless_present = "sample", conflicts_with = "sample")]
    pub seeds: Option<PathBuf>,
    /// Draw this many seeds from the corpus instead of reading a file.
    #[arg(long)]
    pub sample: Option<usize>,
    #[arg(long, default_value_t = 0)]
    pub rng_seed: u64,
    /// Suggestions requested per call.
    #[arg(long, default_value_t = 10)]
    pub limit: usize,
    #[arg(long)]
    pub params: Option<PathBuf>,
    #[arg(long)]
    pub json: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct SeedsArgs {
    #[arg(long)]
    pub index: PathBuf,
    #[arg(long, default_value_t = 10)]
    pub count: usize,
    #[arg(long, default_value_t = 0)]
    pub rng_seed: u64,
    /// Minimum entities and labels a source table must have.
    #[arg(long, default_value_t = 5)]
    pub min_size: usize,
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Debug, Args)]
pub struct GenerateArgs {
    #[arg(long, default_value_t = 1000)]
    pub tables: usize,
    #[arg(long, default_value_t = 500)]
    pub entities: usize,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    /// Small oracle-sized corpus (10 tables, 20 entities) instead.
    #[arg(long)]
    pub fixture: bool,
    #[arg(long)]
    pub out: PathBuf,
}

pub fn run(cli: Cli) -> Result<()> {
    match cli.command {
        Command::Build(a) => build(&a).map(|stats| {
            println!("{}", serde_json::to_string_pretty(&stats).unwrap());
        }),
        Command::Serve(a) => serve(&a),
        Command::Bench(a) => run_bench(&a),
        Command::Seeds(a) => seeds(&a),
        Command::Generate(a) => generate_corpus(&a),
    }
}

fn require_file(path: &Path, what: &str) -> Result<()> {
    if !path.is_file() {
        bail!("{what} file not found: {}", path.display());
    }
    Ok(())
}

pub fn build(a: &BuildArgs) -> Result<CorpusStats> {
    require_file(&a.corpus, "corpus")?;
    require_file(&a.kb, "knowledge base")?;
    let kb = load_kb(&a.kb)?;
    let corpus = load_corpus(&a.corpus, &kb.ids())?;
    let stats = CorpusStats::new(&kb, &corpus);
    for e in kb.line_errors.iter().take(20) {
        eprintln!("warning: {}:{}: {}", a.kb.display(), e.line, e.message);
    }
    for e in corpus.line_errors.iter().take(20) {
        eprintln!("warning: {}:{}: {}", a.corpus.display(), e.line, e.message);
    }
    let mut bundle = IndexBundle::build(corpus.tables, kb.entities);
    bundle.built_from = BuiltFrom {
        corpus: file_digest(&a.corpus)?,
        kb: file_digest(&a.kb)?,
    };
    bundle
        .persist(&a.out)
        .with_context(|| format!("cannot write index to {}", a.out.display()))?;
    Ok(stats)
}

fn load_params(path: Option<&Path>) -> Result<ScoringParams> {
    let Some(path) = path else {
        return Ok(ScoringParams::default());
    };
    let text = fs::read_to_string(path)
        .with_context(|| format!("cannot read params file {}", path.display()))?;
    let params: ScoringParams = serde_json::from_str(&text)
        .with_context(|| format!("invalid params file {}", path.display()))?;
    Ok(params.validate()?)
}

fn load_index(dir: &Path) -> Result<IndexBundle> {
    IndexBundle::load(dir).with_context(|| format!("cannot load index {}", dir.display()))
}

pub fn serve(a: &ServeArgs) -> Result<()> {
    let params = load_params(a.params.as_deref())?;
    let bundle = load_index(&a.index)?;
    let runtime = tokio::runtime::Runtime::new()?;
    runtime.block_on(async {
        let listener = tokio::net::TcpListener::bind((a.host.as_str(), a.port))
            .await
            .with_context(|| format!("cannot bind port {} on {}", a.port, a.host))?;
        eprintln!(
            "serving {} tables / {} entities on http://{}",
            bundle.tables.len(),
            bundle.entities.len(),
            listener.local_addr()?
        );
        let state = tablefill_service::AppState::new(bundle, params);
        tablefill_service::serve(listener, state, tablefill_service::shutdown_signal()).await?;
        eprintln!("shut down");
        Ok(())
    })
}

pub fn corpus_info(dir: &Path, bundle: &IndexBundle) -> Result<CorpusInfo> {
    Ok(CorpusInfo {
        tables: bundle.tables.len(),
        entities: bundle.entities.len(),
        fingerprint: file_digest(&dir.join(MANIFEST))?,
    })
}

pub fn run_bench(a: &BenchArgs) -> Result<()> {
    let params = load_params(a.params.as_deref())?;
    let bundle = load_index(&a.index)?;
    let seeds = match (&a.seeds, a.sample) {
        (Some(path), _) => {
            let text = fs::read_to_string(path)
                .with_context(|| format!("cannot read seeds file {}", path.display()))?;
            bench::read_seeds(&text)?
        }
        (None, Some(n)) => {
            let max = a.sizes.iter().copied().max().unwrap_or(1);
            bench::sample_seeds(&bundle, n, a.rng_seed, a.mode, max)?
        }
        (None, None) => bail!("either --seeds or --sample is required"),
    };
    let cfg = BenchConfig {
        mode: a.mode,
        sizes: a.sizes.clone(),
        repeats: a.repeats,
        limit: a.limit,
        params,
    };
    let report = bench::run(&bundle, &seeds, &cfg, corpus_info(&a.index, &bundle)?)?;
    print!("{}", bench::render_table(&report));
    if let Some(out) = &a.json {
        fs::write(out, serde_json::to_string_pretty(&report)? + "\n")
            .with_context(|| format!("cannot write report {}", out.display()))?;
    }
    Ok(())
}

pub fn seeds(a: &SeedsArgs) -> Result<()> {
    let bundle = load_index(&a.index)?;
    let picked = bench::sample_seeds_where(&bundle, a.count, a.rng_seed, |s| {
        s.entities().len() >= a.min_size && s.labels().len() >= a.min_size
    })?;
    fs::write(&a.out, bench::write_seeds(&picked)?)
        .with_context(|| format!("cannot write seeds file {}", a.out.display()))?;
    Ok(())
}

pub fn generate_corpus(a: &GenerateArgs) -> Result<()> {
    let cfg = if a.fixture {
        SynthConfig::fixture(a.seed)
    } else {
        SynthConfig::scaled(a.tables, a.entities, a.seed)
    };
    let corpus = generate(&cfg);
    fs::create_dir_all(&a.out)
        .with_context(|| format!("cannot create {}", a.out.display()))?;
    let kb = a.out.join("kb.jsonl");
    let tables = a.out.join("tables.jsonl");
    corpus.write_kb(std::io::BufWriter::new(fs::File::create(&kb)?))?;
    corpus.write_tables(std::io::BufWriter::new(fs::File::create(&tables)?))?;
    eprintln!(
        "wrote {} entities to {} and {} tables to {}",
        corpus.kb.len(),
        kb.display(),
        corpus.tables.len(),
        tables.display()
    );
    Ok(())
}
