//! Runs query batches over a shared index, one search per worker task.

use std::io::{self, Write};
use std::time::Instant;

use certicos_core::certifier::Verdict;
use certicos_core::vector::brute_force_topk;
use certicos_core::{lookup, lookup_audited, AuditRecord, Index, Query, QueryResult, SearchConfig};
use log::{log_enabled, Level};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

/// Log target for per-attempt certificate records.
pub const AUDIT_TARGET: &str = "certicos::audit";

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Neighbor {
    pub id: u32,
    pub sim: f64,
}

fn neighbors_of(pairs: &[(u32, f64)]) -> Vec<Neighbor> {
    pairs.iter().map(|&(id, sim)| Neighbor { id, sim }).collect()
}

/// One line of `query` output.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct QueryRecord {
    pub id: usize,
    pub neighbors: Vec<Neighbor>,
    pub certified: bool,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub mechanism: Option<String>,
    pub expansions: usize,
    pub micros: u64,
}

/// One line of `oracle` output.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OracleRecord {
    pub id: usize,
    pub neighbors: Vec<Neighbor>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Answer {
    pub result: QueryResult,
    pub micros: u64,
}

impl Answer {
    pub fn record(&self, id: usize) -> QueryRecord {
        QueryRecord {
            id,
            neighbors: neighbors_of(&self.result.neighbors),
            certified: self.result.certified,
            mechanism: self.result.proof.map(|p| p.as_str().to_owned()),
            expansions: self.result.expansions,
            micros: self.micros,
        }
    }
}

#[derive(Serialize)]
struct AuditLine {
    query: usize,
    vertex: u32,
    constraints: usize,
    threshold: f64,
    verdict: &'static str,
    mechanism: Option<&'static str>,
    stage: &'static str,
    sweeps: u32,
    verify_sweeps: u32,
    pivots: u32,
}

fn audit_line(query: usize, rec: &AuditRecord<'_>) -> String {
    let out = rec.outcome;
    let line = AuditLine {
        query,
        vertex: rec.vertex,
        constraints: rec.constraints,
        threshold: rec.threshold,
        verdict: match out.verdict {
            Verdict::Certified => "certified",
            Verdict::Counterexample(_) => "counterexample",
            Verdict::Inconclusive => "inconclusive",
        },
        mechanism: out.mechanism.map(|m| m.as_str()),
        stage: out.stats.stage.as_str(),
        sweeps: out.stats.projection_sweeps,
        verify_sweeps: out.stats.verify_sweeps,
        pivots: out.stats.lp_pivots,
    };
    serde_json::to_string(&line).expect("audit line serializes")
}

/// Answers one query, emitting audit records when the audit target is
/// enabled at debug level.
pub fn answer(index: &Index, id: usize, query: &Query, cfg: &SearchConfig) -> Answer {
    let start = Instant::now();
    let result = if log_enabled!(target: AUDIT_TARGET, Level::Debug) {
        lookup_audited(index, query, cfg, &mut |rec| {
            log::debug!(target: AUDIT_TARGET, "{}", audit_line(id, rec));
        })
    } else {
        lookup(index, query, cfg)
    };
    let micros = start.elapsed().as_micros() as u64;
    log::trace!(
        "query {id}: certified={} expansions={} attempts={} retargets={} constraints={}",
        result.certified,
        result.expansions,
        result.attempts,
        result.retargets,
        result.constraints
    );
    Answer { result, micros }
}

/// Answers every query in parallel on the current rayon pool. Output order
/// follows input order.
pub fn answer_all(index: &Index, queries: &[Query], cfg: &SearchConfig) -> Vec<Answer> {
    queries
        .par_iter()
        .enumerate()
        .map(|(i, q)| answer(index, i, q, cfg))
        .collect()
}

/// Exhaustive top-`k` for every query.
pub fn oracle_all(index_vectors: &certicos_core::UnitVectorSet, queries: &[Query]) -> Vec<OracleRecord> {
    queries
        .par_iter()
        .enumerate()
        .map(|(id, q)| OracleRecord {
            id,
            neighbors: neighbors_of(&brute_force_topk(index_vectors, &q.vector, q.k)),
        })
        .collect()
}

/// Runs `f` on a pool of `workers` threads, or on the global pool when
/// `workers` is zero.
pub fn with_workers<T: Send>(workers: usize, f: impl FnOnce() -> T + Send) -> T {
    if workers == 0 {
        return f();
    }
    rayon::ThreadPoolBuilder::new()
        .num_threads(workers)
        .build()
        .expect("thread pool")
        .install(f)
}

pub fn write_jsonl<T: Serialize>(mut out: impl Write, records: &[T]) -> io::Result<()> {
    for r in records {
        serde_json::to_writer(&mut out, r)?;
        out.write_all(b"\n")?;
    }
    out.flush()
}

/// Installs the logger. `CERTICOS_LOG` takes `env_logger` filter syntax, e.g.
/// `certicos::audit=debug`. Audit records are written as bare JSON lines.
pub fn init_logging() {
    let env = env_logger::Env::new().filter_or("CERTICOS_LOG", "warn");
    let _ = env_logger::Builder::from_env(env)
        .format(|buf, rec| {
            if rec.target() == AUDIT_TARGET {
                writeln!(buf, "{}", rec.args())
            } else {
                writeln!(buf, "[{} {}] {}", rec.level(), rec.target(), rec.args())
            }
        })
        .try_init();
}
