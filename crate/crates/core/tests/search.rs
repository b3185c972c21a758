use std::collections::BTreeMap;

use certicos_core::certifier::{CertOutcome, CertStats};
use certicos_core::knng::build_knng;
use certicos_core::search::Step;
use certicos_core::{
    lookup, lookup_audited, Index, LshSeeder, Mechanism, Proof, Query, SearchConfig, SearchState, UnitVectorSet,
    Verdict,
};
use certicos_oracles as oracle;
use proptest::prelude::*;
use rand::rngs::SmallRng;
use rand::{Rng, SeedableRng};

fn deg(a: f64) -> Vec<f32> {
    let r = a.to_radians();
    vec![r.cos() as f32, r.sin() as f32]
}

/// Six points on the circle at 0, 25, 45, 70, -30 and 100 degrees with
/// K = 2. The seeder sends every query to vertex 0.
///
/// N0 = {1, 4}, N1 = {2, 0}, N2 = {1, 3}, N3 = {2, 5}, N4 = {0, 1}, N5 = {3, 2}.
fn fixture() -> Index {
    let data = [0.0, 25.0, 45.0, 70.0, -30.0, 100.0].iter().flat_map(|&a| deg(a)).collect();
    let set = UnitVectorSet::from_rows(2, data, true).unwrap();
    let graph = build_knng(&set, 2).unwrap();
    let table = BTreeMap::from([(0u32, (0..6).collect::<Vec<u32>>())]);
    let seeder = LshSeeder::from_parts(2, 1, 0, vec![0.0, 1.0], table, 6).unwrap();
    Index::new(set, graph, seeder).unwrap()
}

fn query(index: &Index, v: Vec<f32>, k: usize, budget: usize) -> Query {
    Query::new(v, k, budget, &index.vectors).unwrap()
}

#[test]
fn fixture_graph_is_as_documented() {
    let index = fixture();
    let want: [[u32; 2]; 6] = [[1, 4], [2, 0], [1, 3], [2, 5], [0, 1], [3, 2]];
    for (i, w) in want.iter().enumerate() {
        assert_eq!(index.graph.neighbors(i as u32), w);
    }
}

#[test]
fn expansion_order_matches_hand_simulation() {
    let index = fixture();
    let q = query(&index, deg(80.0), 1, 100);
    let mut s = SearchState::new(&index, &q, SearchConfig::default());
    let mut trace = Vec::new();
    loop {
        let step = s.expand_step();
        trace.push(step);
        if step == Step::QueueEmpty {
            break;
        }
    }
    use Step::*;
    assert_eq!(
        trace,
        [
            Expanded { id: 1 },
            ExpandedAndRetired { expanded: 2, retired: 1 },
            ExpandedAndRetired { expanded: 3, retired: 2 },
            ExpandedAndRetired { expanded: 5, retired: 3 },
            Retired { id: 5 },
            ExpandedAndRetired { expanded: 4, retired: 0 },
            Retired { id: 4 },
            QueueEmpty,
        ]
    );
    assert_eq!(s.expansions(), 5);
}

#[test]
fn fixture_certifies_when_vertex_three_completes() {
    // With the query at 80 degrees the best is vertex 3 at 10 degrees; its
    // cap reaches 30 degrees and 10 + 10 < 30.
    let index = fixture();
    let q = query(&index, deg(80.0), 1, 100);
    let cfg = SearchConfig {
        cascade_every: 1000,
        ..Default::default()
    };
    let mut retired = Vec::new();
    let r = lookup_audited(&index, &q, &cfg, &mut |rec| retired.push((rec.vertex, rec.outcome.is_certified())));
    assert_eq!(retired, [(1, false), (2, false), (3, true)]);
    assert!(r.certified);
    assert_eq!(r.proof, Some(Proof::Certificate(Mechanism::SinglePoint)));
    assert_eq!(r.neighbors[0].0, 3);
    assert_eq!(r.expansions, 4);
}

fn outcome(verdict: Verdict) -> CertOutcome {
    CertOutcome {
        verdict,
        mechanism: None,
        stats: CertStats::default(),
    }
}

#[test]
fn retarget_rekeys_the_queue() {
    let index = fixture();
    let q = query(&index, deg(80.0), 1, 100);
    let mut s = SearchState::new(&index, &q, SearchConfig::default());
    s.expand_step();
    s.expand_step();
    // live queue is {0, 2}; towards q vertex 2 (45) leads vertex 0 (0)
    assert_eq!(s.peek(), Some(2));

    s.retarget(&outcome(Verdict::Inconclusive));
    assert_eq!(s.peek(), Some(2));

    let q64: Vec<f64> = q.vector.iter().map(|&x| x as f64).collect();
    s.retarget(&outcome(Verdict::Counterexample(q64)));
    assert_eq!(s.peek(), Some(2));

    let towards = deg(-20.0).iter().map(|&x| x as f64).collect();
    s.retarget(&outcome(Verdict::Counterexample(towards)));
    assert_eq!(s.peek(), Some(0));
    // vertex 0 now expands next, towards -30
    assert_eq!(s.expand_step(), Step::ExpandedAndRetired { expanded: 4, retired: 0 });
}

#[test]
fn single_vertex_queue_retires_and_empties() {
    let data = [0.0, 10.0].iter().flat_map(|&a| deg(a)).collect();
    let set = UnitVectorSet::from_rows(2, data, true).unwrap();
    let graph = build_knng(&set, 1).unwrap();
    let seeder = LshSeeder::build(&set, 1, 0).unwrap();
    let index = Index::new(set, graph, seeder).unwrap();
    let q = query(&index, deg(0.0), 2, 10);
    let mut s = SearchState::new(&index, &q, SearchConfig::default());
    let first = s.expand_step();
    assert!(matches!(first, Step::ExpandedAndRetired { .. }));
    assert!(matches!(s.expand_step(), Step::Retired { .. }));
    assert_eq!(s.expand_step(), Step::QueueEmpty);
    assert_eq!(s.store().len(), 0, "expand_step alone adds no constraints");
}

fn random_index(rng: &mut SmallRng, n: usize, d: usize, k: usize) -> Index {
    let set = oracle::random_set(rng, n, d);
    let graph = build_knng(&set, k).unwrap();
    let seeder = LshSeeder::build(&set, 8, rng.random()).unwrap();
    Index::new(set, graph, seeder).unwrap()
}

#[test]
fn certified_results_equal_brute_force() {
    let mut rng = SmallRng::seed_from_u64(21);
    let mut certified = 0;
    for _ in 0..6 {
        let d = [3, 8, 16][rng.random_range(0..3)];
        let index = random_index(&mut rng, 400, d, 12);
        for _ in 0..40 {
            let k = [1, 3, 5][rng.random_range(0..3)];
            let v = if rng.random_bool(0.5) {
                let i = rng.random_range(0..400);
                let eps = rng.random_range(0.0..0.01);
                oracle::perturb(&mut rng, index.vectors.row(i), eps)
            } else {
                oracle::random_unit(&mut rng, d)
            };
            let q = query(&index, v, k, 400);
            let r = lookup(&index, &q, &SearchConfig::default());
            if r.certified {
                certified += 1;
                let got: Vec<u32> = r.neighbors.iter().map(|n| n.0).collect();
                assert_eq!(got, oracle::top_ids(&index.vectors, &q.vector, k));
            }
        }
    }
    assert!(certified > 0);
}

#[test]
fn budget_extends_the_trajectory() {
    let mut rng = SmallRng::seed_from_u64(22);
    let index = random_index(&mut rng, 1000, 8, 10);
    for _ in 0..30 {
        let v = oracle::random_unit(&mut rng, 8);
        let mut last = f64::NEG_INFINITY;
        for budget in [0, 5, 20, 100, 500] {
            let q = query(&index, v.clone(), 5, budget);
            let r = lookup(&index, &q, &SearchConfig::default());
            let kth = r.neighbors.last().unwrap().1;
            let kth = if r.neighbors.len() < 5 { f64::NEG_INFINITY } else { kth };
            assert!(kth >= last);
            last = kth;
            assert!(r.expansions <= budget);
            assert!(r.query_dots <= budget + 1);
        }
    }
}

#[test]
fn lookup_is_deterministic() {
    let mut rng = SmallRng::seed_from_u64(23);
    let index = random_index(&mut rng, 500, 16, 10);
    for _ in 0..20 {
        let q = query(&index, oracle::random_unit(&mut rng, 16), 3, 300);
        let a = lookup(&index, &q, &SearchConfig::default());
        let b = lookup(&index, &q, &SearchConfig::default());
        assert_eq!(a, b);
    }
}

#[test]
fn audit_thresholds_never_decrease() {
    let mut rng = SmallRng::seed_from_u64(24);
    let index = random_index(&mut rng, 500, 8, 10);
    for _ in 0..20 {
        let q = query(&index, oracle::random_unit(&mut rng, 8), 3, 500);
        let mut thresholds = Vec::new();
        let mut after_cert = false;
        let r = lookup_audited(&index, &q, &SearchConfig::default(), &mut |rec| {
            assert!(!after_cert, "no attempt after a certificate");
            after_cert = rec.outcome.is_certified();
            thresholds.push(rec.threshold);
        });
        assert!(thresholds.windows(2).all(|w| w[0] <= w[1]));
        if r.certified {
            assert_eq!(*thresholds.last().unwrap(), r.neighbors.last().unwrap().1);
        }
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(48))]

    #[test]
    fn certified_implies_exact(seed in any::<u64>(), n in 20usize..300, d in 2usize..10, k in 1usize..6) {
        let mut rng = SmallRng::seed_from_u64(seed);
        let big_k = (n - 1).min(rng.random_range(2..16));
        let index = random_index(&mut rng, n, d, big_k);
        for _ in 0..10 {
            let v = oracle::random_unit(&mut rng, d);
            let q = query(&index, v, k.min(n), n);
            let r = lookup(&index, &q, &SearchConfig::default());
            let mut seen = std::collections::HashSet::new();
            prop_assert!(r.neighbors.iter().all(|x| seen.insert(x.0)));
            if r.certified {
                let got: Vec<u32> = r.neighbors.iter().map(|x| x.0).collect();
                prop_assert_eq!(got, oracle::top_ids(&index.vectors, &q.vector, q.k));
            }
        }
    }
}
