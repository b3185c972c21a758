use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use certicos::engine::{OracleRecord, QueryRecord};
use certicos::{format, synth};
use tempfile::TempDir;

fn certicos(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_certicos")).args(args).output().expect("binary runs")
}

fn ok(args: &[&str]) -> Output {
    let out = certicos(args);
    assert!(
        out.status.success(),
        "{args:?} failed: {}",
        String::from_utf8_lossy(&out.stderr)
    );
    out
}

struct Fixture {
    dir: TempDir,
}

impl Fixture {
    /// A random dataset, its index, and a query file of perturbed rows.
    fn new(n: usize, d: usize, k: usize, queries: usize) -> Self {
        let dir = tempfile::tempdir().unwrap();
        let mut rng = synth::rng_for(5);
        let data = synth::uniform(&mut rng, n, d);
        format::save_vectors(&dir.path().join("v.c2vd"), d, &data).unwrap();
        let set = format::load_vectors(&dir.path().join("v.c2vd"), true).unwrap();
        let q: Vec<f32> = synth::perturbed_queries(&mut rng, &set, queries, 0.0, 0.01)
            .into_iter()
            .flat_map(|g| g.vector)
            .collect();
        format::save_vectors(&dir.path().join("q.c2vd"), d, &q).unwrap();
        let f = Fixture { dir };
        ok(&["build", "--vectors", &f.s("v.c2vd"), "--K", &k.to_string(), "--bits", "6", "--out", &f.s("i.c2ix")]);
        f
    }

    fn p(&self, name: &str) -> PathBuf {
        self.dir.path().join(name)
    }

    fn s(&self, name: &str) -> String {
        self.p(name).to_string_lossy().into_owned()
    }
}

fn jsonl<T: serde::de::DeserializeOwned>(path: &Path) -> Vec<T> {
    std::fs::read_to_string(path)
        .unwrap()
        .lines()
        .map(|l| serde_json::from_str(l).unwrap())
        .collect()
}

#[test]
fn tiny_build_verifies() {
    let dir = tempfile::tempdir().unwrap();
    let v = dir.path().join("v.c2vd");
    format::save_vectors(&v, 2, &[1.0, 0.0, 0.0, 1.0, -1.0, 0.0, 0.6, 0.8]).unwrap();
    let i = dir.path().join("i.c2ix");
    let out = ok(&["build", "--vectors", v.to_str().unwrap(), "--K", "2", "--out", i.to_str().unwrap()]);
    let text = String::from_utf8(out.stdout).unwrap();
    assert!(text.starts_with("n=4 d=2 K=2 build_ms="), "{text}");
    let out = ok(&["verify", "--index", i.to_str().unwrap(), "--vectors", v.to_str().unwrap()]);
    assert!(String::from_utf8(out.stdout).unwrap().contains("violations=0"));
}

#[test]
fn degree_too_large_is_usage_error() {
    let dir = tempfile::tempdir().unwrap();
    let v = dir.path().join("v.c2vd");
    format::save_vectors(&v, 2, &[1.0, 0.0, 0.0, 1.0, -1.0, 0.0]).unwrap();
    let i = dir.path().join("i.c2ix");
    let out = certicos(&["build", "--vectors", v.to_str().unwrap(), "--K", "3", "--out", i.to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(2));
    assert!(!i.exists());
}

#[test]
fn missing_file_is_runtime_error() {
    let out = certicos(&["build", "--vectors", "/nonexistent.c2vd", "--K", "3", "--out", "/tmp/x.c2ix"]);
    assert_eq!(out.status.code(), Some(1));
    assert!(!out.stderr.is_empty());
}

#[test]
fn rebuild_is_byte_identical() {
    let f = Fixture::new(300, 6, 8, 5);
    ok(&["build", "--vectors", &f.s("v.c2vd"), "--K", "8", "--bits", "6", "--workers", "3", "--out", &f.s("j.c2ix")]);
    assert_eq!(std::fs::read(f.p("i.c2ix")).unwrap(), std::fs::read(f.p("j.c2ix")).unwrap());
}

#[test]
fn tampered_index_fails_verify() {
    let f = Fixture::new(100, 4, 5, 1);
    let mut bytes = std::fs::read(f.p("i.c2ix")).unwrap();
    bytes[40] ^= 0xff;
    std::fs::write(f.p("i.c2ix"), bytes).unwrap();
    let out = certicos(&["verify", "--index", &f.s("i.c2ix"), "--vectors", &f.s("v.c2vd")]);
    assert_eq!(out.status.code(), Some(1));
    assert!(String::from_utf8_lossy(&out.stderr).contains("checksum"));
}

#[test]
fn self_queries_return_the_row() {
    let f = Fixture::new(400, 4, 10, 0);
    let set = format::load_vectors(&f.p("v.c2vd"), true).unwrap();
    format::save_vectors(&f.p("self.c2vd"), 4, &set.as_slice()[..10 * 4]).unwrap();
    ok(&[
        "query", "--index", &f.s("i.c2ix"), "--vectors", &f.s("v.c2vd"), "--queries", &f.s("self.c2vd"),
        "--k", "1", "--budget", "400", "--out", &f.s("r.jsonl"),
    ]);
    let recs: Vec<QueryRecord> = jsonl(&f.p("r.jsonl"));
    assert_eq!(recs.len(), 10);
    for (i, r) in recs.iter().enumerate() {
        assert_eq!(r.id, i);
        assert_eq!(r.neighbors[0].id, i as u32);
        assert!((r.neighbors[0].sim - 1.0).abs() < 1e-6);
    }
}

fn query_and_oracle(f: &Fixture, k: &str, budget: &str, exact: bool) -> (Vec<QueryRecord>, Vec<OracleRecord>) {
    let mut args = vec![
        "query", "--index", &f.s("i.c2ix"), "--vectors", &f.s("v.c2vd"), "--queries", &f.s("q.c2vd"),
        "--k", k, "--budget", budget, "--out", &f.s("r.jsonl"),
    ]
    .into_iter()
    .map(String::from)
    .collect::<Vec<_>>();
    if exact {
        args.push("--exact".into());
    }
    ok(&args.iter().map(String::as_str).collect::<Vec<_>>());
    ok(&[
        "oracle", "--vectors", &f.s("v.c2vd"), "--queries", &f.s("q.c2vd"), "--k", k, "--out", &f.s("o.jsonl"),
    ]);
    (jsonl(&f.p("r.jsonl")), jsonl(&f.p("o.jsonl")))
}

#[test]
fn zero_budget_exact_is_linear_scan() {
    let f = Fixture::new(300, 5, 8, 30);
    let (recs, truth) = query_and_oracle(&f, "3", "0", true);
    assert_eq!(recs.len(), 30);
    for (r, t) in recs.iter().zip(&truth) {
        assert_eq!(r.neighbors, t.neighbors);
        assert!(r.certified);
        assert_eq!(r.mechanism.as_deref(), Some("linear-scan"));
        assert_eq!(r.expansions, 0);
    }
}

#[test]
fn certified_records_match_oracle() {
    let f = Fixture::new(800, 6, 12, 100);
    let (recs, truth) = query_and_oracle(&f, "5", "300", false);
    let mut certified = 0;
    for (r, t) in recs.iter().zip(&truth) {
        assert_eq!(r.id, t.id);
        if r.certified {
            certified += 1;
            assert_eq!(r.neighbors, t.neighbors);
            assert_ne!(r.mechanism.as_deref(), Some("linear-scan"));
        } else {
            assert_eq!(r.mechanism, None);
        }
    }
    assert!(certified > 0);
}

#[test]
fn oracle_is_deterministic() {
    let f = Fixture::new(200, 3, 4, 20);
    let run = |name: &str| {
        ok(&["oracle", "--vectors", &f.s("v.c2vd"), "--queries", &f.s("q.c2vd"), "--k", "4", "--out", &f.s(name)]);
        std::fs::read(f.p(name)).unwrap()
    };
    assert_eq!(run("a.jsonl"), run("b.jsonl"));
}

#[test]
fn dimension_mismatch_is_usage_error() {
    let f = Fixture::new(50, 4, 3, 0);
    format::save_vectors(&f.p("bad.c2vd"), 3, &[1.0, 0.0, 0.0]).unwrap();
    let out = certicos(&[
        "query", "--index", &f.s("i.c2ix"), "--vectors", &f.s("v.c2vd"), "--queries", &f.s("bad.c2vd"),
    ]);
    assert_eq!(out.status.code(), Some(2));
    let out = certicos(&["oracle", "--vectors", &f.s("v.c2vd"), "--queries", &f.s("bad.c2vd")]);
    assert_eq!(out.status.code(), Some(2));
}

#[test]
fn audit_log_emits_json_lines() {
    let f = Fixture::new(200, 4, 6, 3);
    let out = Command::new(env!("CARGO_BIN_EXE_certicos"))
        .env("CERTICOS_LOG", "certicos::audit=debug")
        .args([
            "query", "--index", &f.s("i.c2ix"), "--vectors", &f.s("v.c2vd"), "--queries", &f.s("q.c2vd"),
            "--out", &f.s("r.jsonl"),
        ])
        .output()
        .unwrap();
    assert!(out.status.success());
    let lines: Vec<serde_json::Value> = String::from_utf8(out.stderr)
        .unwrap()
        .lines()
        .map(|l| serde_json::from_str(l).expect("audit line is JSON"))
        .collect();
    assert!(!lines.is_empty());
    assert!(lines.iter().all(|v| v["verdict"].is_string() && v["constraints"].is_u64()));

    let quiet = certicos(&[
        "query", "--index", &f.s("i.c2ix"), "--vectors", &f.s("v.c2vd"), "--queries", &f.s("q.c2vd"),
        "--out", &f.s("r.jsonl"),
    ]);
    assert!(quiet.stderr.is_empty());
}

#[test]
fn bench_reports_configs_and_queries() {
    let f = Fixture::new(1500, 4, 10, 0);
    ok(&[
        "bench", "--index", &f.s("i.c2ix"), "--vectors", &f.s("v.c2vd"), "--perturb", "60", "--epsilon-min", "0",
        "--epsilon-max", "0", "--k", "1", "--budget", "10,100,1000", "--seed", "4", "--out", &f.s("b.csv"),
        "--per-query", &f.s("pq.csv"),
    ]);
    let mut configs = csv::Reader::from_path(f.p("b.csv")).unwrap();
    let header: Vec<String> = configs.headers().unwrap().iter().map(String::from).collect();
    assert_eq!(
        header,
        ["K", "budget", "k", "queries", "recall", "qps", "certified_fraction", "mean_expansions", "mean_query_dots"]
    );
    let rows: Vec<csv::StringRecord> = configs.records().map(Result::unwrap).collect();
    assert_eq!(rows.len(), 3);
    let recall: Vec<f64> = rows.iter().map(|r| r[4].parse().unwrap()).collect();
    assert!(recall.windows(2).all(|w| w[0] <= w[1]), "{recall:?}");
    // zero variance: every query is a dataset row
    assert!((recall[2] - 1.0).abs() < 1e-12, "{recall:?}");

    let mut per = csv::Reader::from_path(f.p("pq.csv")).unwrap();
    let per: Vec<csv::StringRecord> = per.records().map(Result::unwrap).collect();
    assert_eq!(per.len(), 180);
    for r in &per {
        let recall: f64 = r[7].parse().unwrap();
        assert!((0.0..=1.0).contains(&recall));
        if &r[6] == "true" {
            assert_eq!(recall, 1.0);
        }
        assert_eq!(&r[4], "0.0");
    }
    // recomputing the config recall from per-query rows
    let mean: f64 = per.iter().filter(|r| &r[1] == "1000").map(|r| r[7].parse::<f64>().unwrap()).sum::<f64>() / 60.0;
    assert!((mean - recall[2]).abs() < 1e-12);
}

#[test]
fn bench_is_reproducible_apart_from_timing() {
    let f = Fixture::new(500, 4, 8, 0);
    let run = |name: &str| {
        ok(&[
            "bench", "--index", &f.s("i.c2ix"), "--vectors", &f.s("v.c2vd"), "--perturb", "30", "--k", "3",
            "--budget", "50,500", "--seed", "9", "--out", &f.s(name),
        ]);
        let mut rd = csv::Reader::from_path(f.p(name)).unwrap();
        rd.records()
            .map(|r| {
                let r = r.unwrap();
                // drop the qps column
                r.iter().enumerate().filter(|(i, _)| *i != 5).map(|(_, v)| v.to_owned()).collect::<Vec<_>>()
            })
            .collect::<Vec<_>>()
    };
    assert_eq!(run("a.csv"), run("b.csv"));
}

#[test]
fn synth_writes_queries() {
    let dir = tempfile::tempdir().unwrap();
    let v = dir.path().join("v.c2vd");
    let q = dir.path().join("q.c2vd");
    ok(&[
        "synth", "--n", "120", "--d", "5", "--clusters", "4", "--seed", "2", "--holdout", "20", "--out",
        v.to_str().unwrap(), "--queries-out", q.to_str().unwrap(),
    ]);
    assert_eq!(format::load_vectors(&v, false).unwrap().len(), 100);
    assert_eq!(format::load_vectors(&q, false).unwrap().len(), 20);
}
