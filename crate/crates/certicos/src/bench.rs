//! Recall, throughput and certification-rate sweeps.

use std::collections::HashSet;
use std::io::Write;
use std::time::Instant;

use certicos_core::{Index, Query, SearchConfig};
use serde::Serialize;

use crate::engine::{answer_all, oracle_all, OracleRecord};
use crate::synth::GeneratedQuery;

/// Summary of one `(K, budget)` configuration.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ConfigRow {
    #[serde(rename = "K")]
    pub graph_k: usize,
    pub budget: usize,
    pub k: usize,
    pub queries: usize,
    pub recall: f64,
    pub qps: f64,
    pub certified_fraction: f64,
    pub mean_expansions: f64,
    pub mean_query_dots: f64,
}

/// One query under one configuration.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct QueryRow {
    #[serde(rename = "K")]
    pub graph_k: usize,
    pub budget: usize,
    pub query: usize,
    pub source: Option<u32>,
    pub epsilon: Option<f64>,
    /// `1 - q . v*` for the true nearest neighbor `v*`.
    pub distance: f64,
    pub certified: bool,
    pub recall: f64,
    pub expansions: usize,
    pub mechanism: Option<&'static str>,
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct BenchReport {
    pub configs: Vec<ConfigRow>,
    pub queries: Vec<QueryRow>,
}

/// `|returned ∩ truth| / k`.
pub fn recall_at(returned: impl IntoIterator<Item = u32>, truth: &[u32], k: usize) -> f64 {
    let truth: HashSet<u32> = truth.iter().copied().collect();
    returned.into_iter().filter(|id| truth.contains(id)).count() as f64 / k as f64
}

/// Runs every budget over the same queries. Queries are answered in
/// parallel on the current rayon pool.
pub fn run(index: &Index, workload: &[GeneratedQuery], k: usize, budgets: &[usize], cfg: &SearchConfig) -> BenchReport {
    let set = &index.vectors;
    let base: Vec<Query> = workload
        .iter()
        .map(|g| Query::new(g.vector.clone(), k, 0, set).expect("workload queries match the index"))
        .collect();
    let truth: Vec<OracleRecord> = oracle_all(set, &base);
    let truth_ids: Vec<Vec<u32>> = truth.iter().map(|t| t.neighbors.iter().map(|n| n.id).collect()).collect();

    let mut report = BenchReport::default();
    for &budget in budgets {
        let queries: Vec<Query> = base.iter().map(|q| Query { budget, ..q.clone() }).collect();
        let start = Instant::now();
        let answers = answer_all(index, &queries, cfg);
        let secs = start.elapsed().as_secs_f64();

        let nq = answers.len().max(1) as f64;
        let mut row = ConfigRow {
            graph_k: index.graph.degree(),
            budget,
            k,
            queries: answers.len(),
            recall: 0.0,
            qps: answers.len() as f64 / secs.max(1e-9),
            certified_fraction: 0.0,
            mean_expansions: 0.0,
            mean_query_dots: 0.0,
        };
        for (i, a) in answers.iter().enumerate() {
            let r = &a.result;
            let recall = recall_at(r.neighbors.iter().map(|n| n.0), &truth_ids[i], k);
            row.recall += recall / nq;
            row.certified_fraction += r.certified as u8 as f64 / nq;
            row.mean_expansions += r.expansions as f64 / nq;
            row.mean_query_dots += r.query_dots as f64 / nq;
            report.queries.push(QueryRow {
                graph_k: index.graph.degree(),
                budget,
                query: i,
                source: workload[i].source,
                epsilon: workload[i].epsilon,
                distance: 1.0 - truth[i].neighbors[0].sim,
                certified: r.certified,
                recall,
                expansions: r.expansions,
                mechanism: r.proof.map(|p| p.as_str()),
            });
        }
        log::info!(
            "budget {budget}: recall {:.4} qps {:.1} certified {:.3}",
            row.recall,
            row.qps,
            row.certified_fraction
        );
        report.configs.push(row);
    }
    report
}

pub fn write_csv<T: Serialize>(out: impl Write, rows: &[T]) -> csv::Result<()> {
    let mut w = csv::Writer::from_writer(out);
    for r in rows {
        w.serialize(r)?;
    }
    w.flush()?;
    Ok(())
}

/// Certified fraction over a group of query rows.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Bucket {
    pub lo: f64,
    pub hi: f64,
    pub count: usize,
    pub certified_fraction: f64,
}

fn summarize(rows: &[&QueryRow], lo: f64, hi: f64) -> Bucket {
    let certified = rows.iter().filter(|r| r.certified).count();
    Bucket {
        lo,
        hi,
        count: rows.len(),
        certified_fraction: if rows.is_empty() { 0.0 } else { certified as f64 / rows.len() as f64 },
    }
}

/// Splits rows into `parts` equal-count groups by ascending distance.
pub fn by_quantile(rows: &[QueryRow], parts: usize) -> Vec<Bucket> {
    let mut sorted: Vec<&QueryRow> = rows.iter().collect();
    sorted.sort_by(|a, b| a.distance.total_cmp(&b.distance).then(a.query.cmp(&b.query)));
    let n = sorted.len();
    (0..parts)
        .filter_map(|p| {
            let (s, e) = (p * n / parts, (p + 1) * n / parts);
            (s < e).then(|| summarize(&sorted[s..e], sorted[s].distance, sorted[e - 1].distance))
        })
        .collect()
}

/// Groups rows into fixed-width distance buckets starting at zero. Empty
/// buckets are skipped.
pub fn by_width(rows: &[QueryRow], width: f64) -> Vec<Bucket> {
    let mut groups: std::collections::BTreeMap<i64, Vec<&QueryRow>> = Default::default();
    for r in rows {
        groups.entry((r.distance.max(0.0) / width).floor() as i64).or_default().push(r);
    }
    groups
        .into_iter()
        .map(|(b, rs)| summarize(&rs, b as f64 * width, (b + 1) as f64 * width))
        .collect()
}
