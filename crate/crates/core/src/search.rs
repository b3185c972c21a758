//! Best-first traversal of the K-NN graph, interleaved with certification.
//!
//! The search keeps a priority queue of evaluated vertices whose neighbor
//! lists are not yet exhausted, ordered by similarity to a target point `x`
//! (initially the query). Each step takes the best queued vertex and
//! evaluates its most similar unevaluated neighbor. When a vertex has no
//! unevaluated neighbors left it leaves the queue, its cap becomes a
//! constraint, and a certificate is attempted. A counterexample from the
//! certifier becomes the new target and the queue is re-keyed around it.

use alloc::collections::BinaryHeap;
use alloc::vec;
use alloc::vec::Vec;
use core::cmp::Ordering;

use crate::certifier::{
    construct_certificate_with, CertConfig, CertOutcome, ConstraintStore, Hints, Mechanism, Verdict,
};
use crate::error::{Error, Result};
use crate::knng::KnnGraph;
use crate::seeder::LshSeeder;
use crate::vector::{brute_force_topk, dot, dot_mixed, rank_order, Query, UnitVectorSet};

/// The dataset together with its graph and seeder.
#[derive(Debug, Clone, PartialEq)]
pub struct Index {
    pub vectors: UnitVectorSet,
    pub graph: KnnGraph,
    pub seeder: LshSeeder,
}

impl Index {
    pub fn new(vectors: UnitVectorSet, graph: KnnGraph, seeder: LshSeeder) -> Result<Self> {
        if graph.len() != vectors.len() {
            return Err(Error::Inconsistent("graph and vector counts differ"));
        }
        if seeder.dim() != vectors.dim() {
            return Err(Error::Inconsistent("seeder and vector dimensions differ"));
        }
        Ok(Self {
            vectors,
            graph,
            seeder,
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SearchConfig {
    pub cert: CertConfig,
    /// Run the projection and LP stages on every `cascade_every`-th completed
    /// neighborhood; the single-point test runs on all of them.
    pub cascade_every: u32,
    /// Stop adding constraints past this many. `None` keeps all of them.
    pub max_constraints: Option<usize>,
    /// Answer uncertified queries by a linear scan.
    pub exact: bool,
}

impl Default for SearchConfig {
    fn default() -> Self {
        Self {
            cert: CertConfig::default(),
            cascade_every: 1,
            max_constraints: None,
            exact: false,
        }
    }
}

/// How a result was shown to be exact.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Proof {
    Certificate(Mechanism),
    LinearScan,
}

impl Proof {
    pub fn as_str(self) -> &'static str {
        match self {
            Proof::Certificate(m) => m.as_str(),
            Proof::LinearScan => "linear-scan",
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct QueryResult {
    /// `(id, similarity)`, best first. Shorter than `k` only when fewer
    /// vertices were evaluated.
    pub neighbors: Vec<(u32, f64)>,
    pub certified: bool,
    pub proof: Option<Proof>,
    /// Neighbor expansions performed.
    pub expansions: usize,
    /// Dot products taken against the query.
    pub query_dots: usize,
    pub attempts: usize,
    pub retargets: usize,
    pub constraints: usize,
}

/// One certificate attempt, as reported to an audit sink.
#[derive(Debug, Clone, PartialEq)]
pub struct AuditRecord<'a> {
    pub vertex: u32,
    pub constraints: usize,
    pub threshold: f64,
    pub outcome: &'a CertOutcome,
}

#[derive(Debug, Clone, Copy, PartialEq)]
struct Queued {
    key: f64,
    id: u32,
}

impl Eq for Queued {}

impl Ord for Queued {
    fn cmp(&self, other: &Self) -> Ordering {
        // max-heap on key, lower id first on ties
        self.key
            .total_cmp(&other.key)
            .then_with(|| other.id.cmp(&self.id))
    }
}

impl PartialOrd for Queued {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
struct Found {
    sim: f64,
    id: u32,
}

impl Eq for Found {}

impl Ord for Found {
    // the worst result compares greatest, so it sits on top of the heap
    fn cmp(&self, other: &Self) -> Ordering {
        rank_order((self.sim, self.id), (other.sim, other.id))
    }
}

impl PartialOrd for Found {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

struct BitSet(Vec<u64>);

impl BitSet {
    fn new(n: usize) -> Self {
        Self(vec![0; n.div_ceil(64)])
    }

    #[inline]
    fn contains(&self, i: u32) -> bool {
        self.0[i as usize / 64] & (1 << (i % 64)) != 0
    }

    /// Returns whether `i` was newly inserted.
    #[inline]
    fn insert(&mut self, i: u32) -> bool {
        let (w, b) = (i as usize / 64, 1u64 << (i % 64));
        let fresh = self.0[w] & b == 0;
        self.0[w] |= b;
        fresh
    }
}

/// What [`SearchState::expand_step`] did.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Step {
    /// Evaluated neighbor `id`.
    Expanded { id: u32 },
    /// Vertex `id` ran out of neighbors and left the queue.
    Retired { id: u32 },
    /// Evaluated a neighbor, which exhausted the chosen vertex.
    ExpandedAndRetired { expanded: u32, retired: u32 },
    /// The next expansion would exceed the budget.
    OutOfBudget,
    QueueEmpty,
}

/// Per-query search state.
pub struct SearchState<'a> {
    index: &'a Index,
    cfg: SearchConfig,
    q: &'a [f32],
    k: usize,
    budget: usize,
    evaluated: BitSet,
    retired: BitSet,
    cursor: alloc::collections::BTreeMap<u32, usize>,
    queue: BinaryHeap<Queued>,
    best: BinaryHeap<Found>,
    target: Option<Vec<f64>>,
    store: ConstraintStore,
    hints: Hints,
    expansions: usize,
    query_dots: usize,
    completed: u32,
    attempts: usize,
    retargets: usize,
    proof: Option<Proof>,
}

impl core::fmt::Debug for SearchState<'_> {
    fn fmt(&self, f: &mut core::fmt::Formatter<'_>) -> core::fmt::Result {
        f.debug_struct("SearchState")
            .field("k", &self.k)
            .field("budget", &self.budget)
            .field("queued", &self.queue.len())
            .field("expansions", &self.expansions)
            .field("constraints", &self.store.len())
            .field("proof", &self.proof)
            .finish()
    }
}

impl<'a> SearchState<'a> {
    /// Seeds the search: the seed vertex is evaluated and queued.
    pub fn new(index: &'a Index, query: &'a Query, cfg: SearchConfig) -> Self {
        let n = index.vectors.len();
        let mut state = Self {
            index,
            cfg,
            q: &query.vector,
            k: query.k,
            budget: query.budget,
            evaluated: BitSet::new(n),
            retired: BitSet::new(n),
            cursor: Default::default(),
            queue: BinaryHeap::new(),
            best: BinaryHeap::new(),
            target: None,
            store: ConstraintStore::new(&query.vector, index.vectors.max_norm_error()),
            hints: Hints::default(),
            expansions: 0,
            query_dots: 0,
            completed: 0,
            attempts: 0,
            retargets: 0,
            proof: None,
        };
        let seed = index.seeder.seed(&query.vector);
        state.evaluate(seed);
        state
    }

    fn evaluate(&mut self, id: u32) {
        self.evaluated.insert(id);
        let sim = dot(self.q, self.index.vectors.row(id));
        self.query_dots += 1;
        let found = Found { sim, id };
        if self.best.len() < self.k {
            self.best.push(found);
        } else if let Some(worst) = self.best.peek() {
            if found < *worst {
                self.best.pop();
                self.best.push(found);
            }
        }
        let key = match &self.target {
            None => sim,
            Some(x) => dot_mixed(x, self.index.vectors.row(id)),
        };
        self.queue.push(Queued { key, id });
        self.cursor.insert(id, 0);
    }

    /// The k-th best similarity found so far, or -1 while fewer than `k`
    /// vertices have been evaluated.
    pub fn topk_certified_threshold(&self) -> f64 {
        if self.best.len() < self.k {
            return -1.0;
        }
        self.best.peek().map_or(-1.0, |w| w.sim)
    }

    pub fn is_certified(&self) -> bool {
        self.proof.is_some()
    }

    pub fn expansions(&self) -> usize {
        self.expansions
    }

    pub fn store(&self) -> &ConstraintStore {
        &self.store
    }

    /// The vertex the next step will work on.
    pub fn peek(&mut self) -> Option<u32> {
        while let Some(top) = self.queue.peek() {
            if self.retired.contains(top.id) {
                self.queue.pop();
            } else {
                return Some(top.id);
            }
        }
        None
    }

    /// Advances `j`'s cursor past evaluated neighbors and returns the next
    /// unevaluated one.
    fn next_neighbor(&mut self, j: u32) -> Option<u32> {
        let neighbors = self.index.graph.neighbors(j);
        let c = self.cursor.get_mut(&j).expect("queued vertex has a cursor");
        while *c < neighbors.len() && self.evaluated.contains(neighbors[*c]) {
            *c += 1;
        }
        neighbors.get(*c).copied()
    }

    /// One iteration of the traversal. Certificate attempts happen in
    /// [`SearchState::run`]; this only moves the frontier.
    pub fn expand_step(&mut self) -> Step {
        let Some(j) = self.peek() else {
            return Step::QueueEmpty;
        };
        let expanded = match self.next_neighbor(j) {
            Some(n) => {
                if self.expansions >= self.budget {
                    return Step::OutOfBudget;
                }
                self.expansions += 1;
                self.evaluate(n);
                Some(n)
            }
            None => None,
        };
        if self.next_neighbor(j).is_some() {
            return Step::Expanded {
                id: expanded.expect("an unexhausted vertex was expanded"),
            };
        }
        self.retired.insert(j);
        self.cursor.remove(&j);
        match expanded {
            Some(e) => Step::ExpandedAndRetired {
                expanded: e,
                retired: j,
            },
            None => Step::Retired { id: j },
        }
    }

    fn on_retired(&mut self, j: u32, audit: &mut dyn FnMut(&AuditRecord<'_>)) {
        self.completed += 1;
        if self.cfg.max_constraints.is_some_and(|cap| self.store.len() >= cap) {
            return;
        }
        let row = self.index.vectors.row(j);
        self.store.push(j, row, self.index.graph.radius(j));
        let threshold = self.topk_certified_threshold();
        if self.best.len() < self.k {
            return;
        }
        self.store.set_threshold(threshold);
        debug_assert_eq!(self.store.threshold(), threshold);
        let cascade = self.completed % self.cfg.cascade_every.max(1) == 0;
        let latest = self.store.len() - 1;
        let outcome = construct_certificate_with(&self.store, latest, &self.cfg.cert, cascade, &mut self.hints);
        self.attempts += 1;
        audit(&AuditRecord {
            vertex: j,
            constraints: self.store.len(),
            threshold,
            outcome: &outcome,
        });
        if outcome.is_certified() {
            self.proof = outcome.mechanism.map(Proof::Certificate);
        } else {
            self.retarget(&outcome);
        }
    }

    /// Moves the target to a counterexample point and re-keys the queue.
    /// Other outcomes leave the state unchanged.
    pub fn retarget(&mut self, outcome: &CertOutcome) {
        let Verdict::Counterexample(x) = &outcome.verdict else {
            return;
        };
        if self.target.as_ref() == Some(x) {
            return;
        }
        self.retargets += 1;
        let vectors = &self.index.vectors;
        let retired = &self.retired;
        let live: Vec<Queued> = core::mem::take(&mut self.queue)
            .into_vec()
            .into_iter()
            .filter(|e| !retired.contains(e.id))
            .map(|e| Queued {
                key: dot_mixed(x, vectors.row(e.id)),
                id: e.id,
            })
            .collect();
        self.queue = BinaryHeap::from(live);
        self.target = Some(x.clone());
    }

    /// Runs until certified, out of budget, or out of queued vertices.
    pub fn run(&mut self, audit: &mut dyn FnMut(&AuditRecord<'_>)) {
        while !self.is_certified() {
            match self.expand_step() {
                Step::Expanded { .. } => {}
                Step::Retired { id } | Step::ExpandedAndRetired { retired: id, .. } => {
                    self.on_retired(id, audit)
                }
                Step::OutOfBudget | Step::QueueEmpty => break,
            }
        }
    }

    pub fn finish(mut self) -> QueryResult {
        if self.proof.is_none() && self.cfg.exact {
            let exact = brute_force_topk(&self.index.vectors, self.q, self.k);
            self.query_dots += self.index.vectors.len();
            self.proof = Some(Proof::LinearScan);
            return self.result(exact);
        }
        let mut found: Vec<(u32, f64)> = self.best.iter().map(|f| (f.id, f.sim)).collect();
        found.sort_unstable_by(|a, b| rank_order((a.1, a.0), (b.1, b.0)));
        self.result(found)
    }

    fn result(&self, neighbors: Vec<(u32, f64)>) -> QueryResult {
        QueryResult {
            neighbors,
            certified: self.proof.is_some(),
            proof: self.proof,
            expansions: self.expansions,
            query_dots: self.query_dots,
            attempts: self.attempts,
            retargets: self.retargets,
            constraints: self.store.len(),
        }
    }
}

/// Answers `query` over `index`.
pub fn lookup(index: &Index, query: &Query, cfg: &SearchConfig) -> QueryResult {
    lookup_audited(index, query, cfg, &mut |_| {})
}

/// [`lookup`] reporting every certificate attempt to `audit`.
pub fn lookup_audited(
    index: &Index,
    query: &Query,
    cfg: &SearchConfig,
    audit: &mut dyn FnMut(&AuditRecord<'_>),
) -> QueryResult {
    let mut state = SearchState::new(index, query, *cfg);
    state.run(audit);
    state.finish()
}
