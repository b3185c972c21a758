//! Command-line surface. Vector files are always loaded with normalization
//! so that every command sees the same rows the graph was built from.

use std::fs::File;
use std::io::{self, BufWriter, Write};
use std::path::{Path, PathBuf};
use std::time::Instant;

use anyhow::Context;
use certicos_core::knng::verify_knng;
use certicos_core::seeder::DEFAULT_BITS;
use certicos_core::{Index, LshSeeder, Query, SearchConfig, UnitVectorSet};
use clap::{Args, Parser, Subcommand};

use crate::engine::{self, with_workers};
use crate::{bench, builder, format, synth};

#[derive(Debug, Parser)]
#[command(name = "certicos", version, about = "Certified cosine nearest-neighbor search")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Build a C2IX index over a C2VD vector file.
    Build(BuildArgs),
    /// Answer queries from a C2VD file, writing JSONL.
    Query(QueryArgs),
    /// Exhaustive ground truth for queries, writing JSONL.
    Oracle(OracleArgs),
    /// Recall / QPS / certification sweep over budgets, writing CSV.
    Bench(BenchArgs),
    /// Check an index file against its vectors.
    Verify(VerifyArgs),
    /// Generate a synthetic C2VD dataset.
    Synth(SynthArgs),
}

#[derive(Debug, Args)]
pub struct Workers {
    /// Worker threads; 0 uses one per core.
    #[arg(long, default_value_t = 0)]
    pub workers: usize,
}

#[derive(Debug, Args)]
pub struct BuildArgs {
    #[arg(long)]
    pub vectors: PathBuf,
    /// Graph degree.
    #[arg(long = "K")]
    pub graph_k: usize,
    /// LSH sign bits.
    #[arg(long, default_value_t = DEFAULT_BITS)]
    pub bits: usize,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    #[arg(long)]
    pub out: PathBuf,
    #[command(flatten)]
    pub workers: Workers,
}

#[derive(Debug, Args)]
pub struct SearchArgs {
    /// Neighbors per query.
    #[arg(long, default_value_t = 1)]
    pub k: usize,
    /// Maximum neighbor expansions per query.
    #[arg(long, default_value_t = 1000)]
    pub budget: usize,
    /// Answer uncertified queries with a linear scan.
    #[arg(long)]
    pub exact: bool,
    /// Run the projection and LP stages every this many completed neighborhoods.
    #[arg(long, default_value_t = 1)]
    pub cascade_every: u32,
}

#[derive(Debug, Args)]
pub struct QueryArgs {
    #[arg(long)]
    pub index: PathBuf,
    #[arg(long)]
    pub vectors: PathBuf,
    #[arg(long)]
    pub queries: PathBuf,
    #[command(flatten)]
    pub search: SearchArgs,
    /// JSONL output; stdout when omitted.
    #[arg(long)]
    pub out: Option<PathBuf>,
    #[command(flatten)]
    pub workers: Workers,
}

#[derive(Debug, Args)]
pub struct OracleArgs {
    #[arg(long)]
    pub vectors: PathBuf,
    #[arg(long)]
    pub queries: PathBuf,
    #[arg(long, default_value_t = 1)]
    pub k: usize,
    #[arg(long)]
    pub out: Option<PathBuf>,
    #[command(flatten)]
    pub workers: Workers,
}

#[derive(Debug, Args)]
pub struct BenchArgs {
    #[arg(long)]
    pub index: PathBuf,
    #[arg(long)]
    pub vectors: PathBuf,
    /// Held-out query file. Without it, queries are perturbed dataset rows.
    #[arg(long, conflicts_with = "perturb")]
    pub queries: Option<PathBuf>,
    /// Number of perturbed queries to draw.
    #[arg(long, default_value_t = 1000)]
    pub perturb: usize,
    /// Smallest perturbation variance.
    #[arg(long, default_value_t = 0.0)]
    pub epsilon_min: f64,
    /// Largest perturbation variance.
    #[arg(long, default_value_t = 0.01)]
    pub epsilon_max: f64,
    #[arg(long, default_value_t = 10)]
    pub k: usize,
    /// Comma-separated budgets.
    #[arg(long, value_delimiter = ',', default_values_t = [100, 1000, 10000])]
    pub budget: Vec<usize>,
    #[arg(long, default_value_t = 1)]
    pub cascade_every: u32,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    /// Per-configuration CSV; stdout when omitted.
    #[arg(long)]
    pub out: Option<PathBuf>,
    /// Per-query CSV.
    #[arg(long)]
    pub per_query: Option<PathBuf>,
    #[command(flatten)]
    pub workers: Workers,
}

#[derive(Debug, Args)]
pub struct VerifyArgs {
    #[arg(long)]
    pub index: PathBuf,
    #[arg(long)]
    pub vectors: PathBuf,
}

#[derive(Debug, Args)]
pub struct SynthArgs {
    #[arg(long)]
    pub n: usize,
    #[arg(long)]
    pub d: usize,
    /// Cluster count; 0 draws rows uniformly from the sphere.
    #[arg(long, default_value_t = 0)]
    pub clusters: usize,
    /// Noise around cluster centers.
    #[arg(long, default_value_t = 0.1)]
    pub spread: f64,
    /// Confine cluster noise to a random subspace of this dimension; 0 means
    /// full-rank noise.
    #[arg(long, default_value_t = 0)]
    pub rank: usize,
    /// Isotropic noise added on top of low-rank cluster noise.
    #[arg(long, default_value_t = 0.0)]
    pub floor: f64,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    #[arg(long)]
    pub out: PathBuf,
    /// Move this many random rows into a separate query file.
    #[arg(long, default_value_t = 0, requires = "queries_out")]
    pub holdout: usize,
    #[arg(long)]
    pub queries_out: Option<PathBuf>,
}

/// Why a command failed. Usage failures exit with status 2.
#[derive(Debug)]
pub enum Failure {
    Usage(String),
    Runtime(anyhow::Error),
}

impl Failure {
    pub fn exit_code(&self) -> u8 {
        match self {
            Failure::Usage(_) => 2,
            Failure::Runtime(_) => 1,
        }
    }
}

impl std::fmt::Display for Failure {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            Failure::Usage(m) => write!(f, "usage error: {m}"),
            Failure::Runtime(e) => write!(f, "error: {e:#}"),
        }
    }
}

impl<E: Into<anyhow::Error>> From<E> for Failure {
    fn from(e: E) -> Self {
        Failure::Runtime(e.into())
    }
}

type Outcome = Result<(), Failure>;

fn usage(msg: impl Into<String>) -> Failure {
    Failure::Usage(msg.into())
}

fn load_set(path: &Path) -> anyhow::Result<UnitVectorSet> {
    format::load_vectors(path, true).with_context(|| format!("loading vectors from {}", path.display()))
}

fn load_index(index: &Path, vectors: &Path) -> Result<Index, Failure> {
    let set = load_set(vectors)?;
    let (graph, seeder) =
        format::load_index(index).with_context(|| format!("loading index from {}", index.display()))?;
    if graph.len() != set.len() || seeder.dim() != set.dim() {
        return Err(usage(format!(
            "index is for n={} d={}, vectors have n={} d={}",
            graph.len(),
            seeder.dim(),
            set.len(),
            set.dim()
        )));
    }
    Ok(Index::new(set, graph, seeder)?)
}

/// Loads raw query rows, checking their dimension against `d`.
fn load_query_rows(path: &Path, d: usize) -> Result<Vec<f32>, Failure> {
    let raw = format::read_raw_vectors(path).with_context(|| format!("loading queries from {}", path.display()))?;
    if raw.d != d {
        return Err(usage(format!("query dimension {} does not match dataset dimension {d}", raw.d)));
    }
    Ok(raw.data)
}

fn make_queries(rows: &[f32], set: &UnitVectorSet, k: usize, budget: usize) -> Result<Vec<Query>, Failure> {
    if k == 0 || k > set.len() {
        return Err(usage(format!("--k must be in 1..={}", set.len())));
    }
    rows.chunks_exact(set.dim())
        .enumerate()
        .map(|(i, r)| {
            Query::new(r.to_vec(), k, budget, set).with_context(|| format!("query {i}")).map_err(Failure::from)
        })
        .collect()
}

fn output(path: Option<&Path>) -> io::Result<Box<dyn Write>> {
    Ok(match path {
        Some(p) => Box::new(BufWriter::new(File::create(p)?)),
        None => Box::new(BufWriter::new(io::stdout().lock())),
    })
}

fn search_config(s: &SearchArgs) -> SearchConfig {
    SearchConfig {
        cascade_every: s.cascade_every.max(1),
        exact: s.exact,
        ..Default::default()
    }
}

pub fn build(a: &BuildArgs) -> Outcome {
    let set = load_set(&a.vectors)?;
    if a.graph_k == 0 || a.graph_k >= set.len() {
        return Err(usage(format!("--K must be in 1..{} for n = {}", set.len(), set.len())));
    }
    if a.bits == 0 || a.bits > certicos_core::seeder::MAX_BITS {
        return Err(usage(format!("--bits must be in 1..={}", certicos_core::seeder::MAX_BITS)));
    }
    let start = Instant::now();
    let graph = with_workers(a.workers.workers, || builder::build_graph(&set, a.graph_k))?;
    let seeder = LshSeeder::build(&set, a.bits, a.seed)?;
    let elapsed = start.elapsed();
    format::save_index(&a.out, &graph, &seeder).with_context(|| format!("writing {}", a.out.display()))?;
    println!(
        "n={} d={} K={} build_ms={:.1}",
        set.len(),
        set.dim(),
        a.graph_k,
        elapsed.as_secs_f64() * 1e3
    );
    Ok(())
}

pub fn query(a: &QueryArgs) -> Outcome {
    let index = load_index(&a.index, &a.vectors)?;
    let rows = load_query_rows(&a.queries, index.vectors.dim())?;
    let queries = make_queries(&rows, &index.vectors, a.search.k, a.search.budget)?;
    let cfg = search_config(&a.search);
    let answers = with_workers(a.workers.workers, || engine::answer_all(&index, &queries, &cfg));
    let records: Vec<_> = answers.iter().enumerate().map(|(i, ans)| ans.record(i)).collect();
    engine::write_jsonl(output(a.out.as_deref())?, &records)?;
    let certified = answers.iter().filter(|a| a.result.proof.is_some_and(|p| p != certicos_core::Proof::LinearScan)).count();
    log::info!("{} queries, {certified} certified by the search", answers.len());
    Ok(())
}

pub fn oracle(a: &OracleArgs) -> Outcome {
    let set = load_set(&a.vectors)?;
    let rows = load_query_rows(&a.queries, set.dim())?;
    let queries = make_queries(&rows, &set, a.k, 0)?;
    let records = with_workers(a.workers.workers, || engine::oracle_all(&set, &queries));
    engine::write_jsonl(output(a.out.as_deref())?, &records)?;
    Ok(())
}

pub fn bench(a: &BenchArgs) -> Outcome {
    let index = load_index(&a.index, &a.vectors)?;
    let set = &index.vectors;
    if a.k == 0 || a.k > set.len() {
        return Err(usage(format!("--k must be in 1..={}", set.len())));
    }
    if !(a.epsilon_min >= 0.0 && a.epsilon_max >= a.epsilon_min) {
        return Err(usage("need 0 <= --epsilon-min <= --epsilon-max"));
    }
    let workload = match &a.queries {
        Some(path) => {
            let rows = load_query_rows(path, set.dim())?;
            make_queries(&rows, set, a.k, 0)?
                .into_iter()
                .map(|q| synth::GeneratedQuery {
                    vector: q.vector,
                    source: None,
                    epsilon: None,
                })
                .collect()
        }
        None => synth::perturbed_queries(&mut synth::rng_for(a.seed), set, a.perturb, a.epsilon_min, a.epsilon_max),
    };
    let cfg = SearchConfig {
        cascade_every: a.cascade_every.max(1),
        ..Default::default()
    };
    let report = with_workers(a.workers.workers, || bench::run(&index, &workload, a.k, &a.budget, &cfg));
    bench::write_csv(output(a.out.as_deref())?, &report.configs)?;
    if let Some(p) = &a.per_query {
        bench::write_csv(output(Some(p))?, &report.queries)?;
    }
    Ok(())
}

pub fn verify(a: &VerifyArgs) -> Outcome {
    let index = load_index(&a.index, &a.vectors)?;
    let violations = verify_knng(&index.vectors, &index.graph);
    for v in violations.iter().take(20) {
        eprintln!("{v:?}");
    }
    println!(
        "n={} d={} K={} violations={}",
        index.vectors.len(),
        index.vectors.dim(),
        index.graph.degree(),
        violations.len()
    );
    if violations.is_empty() {
        Ok(())
    } else {
        Err(Failure::Runtime(anyhow::anyhow!("{} neighborhood violations", violations.len())))
    }
}

pub fn synth(a: &SynthArgs) -> Outcome {
    if a.d < 2 || a.n == 0 || a.holdout >= a.n {
        return Err(usage("need --d >= 2, --n >= 1 and --holdout < --n"));
    }
    let mut rng = synth::rng_for(a.seed);
    let data = match (a.clusters, a.rank) {
        (0, _) => synth::uniform(&mut rng, a.n, a.d),
        (c, 0) => synth::clustered(&mut rng, a.n, a.d, c, a.spread),
        (c, r) => synth::clustered_low_rank(&mut rng, a.n, a.d, c, r, a.spread, a.floor),
    };
    let (base, held) = synth::split_holdout(&mut rng, &data, a.d, a.holdout);
    format::save_vectors(&a.out, a.d, &base)?;
    if let Some(q) = &a.queries_out {
        format::save_vectors(q, a.d, &held)?;
    }
    Ok(())
}

pub fn run(cli: &Cli) -> Outcome {
    match &cli.command {
        Command::Build(a) => build(a),
        Command::Query(a) => query(a),
        Command::Oracle(a) => oracle(a),
        Command::Bench(a) => bench(a),
        Command::Verify(a) => verify(a),
        Command::Synth(a) => synth(a),
    }
}
