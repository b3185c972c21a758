//! Tracking the unchecked region and proving it empty.
//!
//! After a search has looked at every neighbor of a vertex `v_j`, the cap
//! `{x : v_j . x > b_j}` holds nothing unseen, so the part of the sphere still
//! unchecked is
//!
//! ```text
//! S = {|x| = 1} ∩ {q . x >= t} ∩ {v_j . x <= b_j for every completed j}
//! ```
//!
//! where `t` is the similarity of the current k-th best result. `S` empty means
//! no unseen vector can beat the results. [`construct_certificate`] tries, in
//! order: containment of the query cap in a single vertex cap, alternating
//! projection over the convex relaxation, and the linear relaxation. When
//! none proves emptiness it tries to return a point of `S` so the search can
//! steer towards it.
//!
//! All geometry is in `f64` on unit normals. Dataset rows are only unit to
//! within [`UnitVectorSet::max_norm_error`](crate::UnitVectorSet::max_norm_error),
//! so the region is widened by a multiple of that error: every dataset row
//! that could still beat the results maps to a point of the widened region.

pub mod dual;
pub mod projection;
pub mod simplex;
pub mod sphere;

use alloc::vec::Vec;

use crate::vector::{dot64, norm64};

pub use dual::Multipliers;
pub use projection::{solve_project, solve_project_warm, ProjectOutcome};
pub use simplex::{solve_simplex, LpOutcome};
pub use sphere::combine_to_sphere;

/// `{x : normal . x <= bound}`: the part of space not covered by the checked
/// cap of vertex `source_id`.
#[derive(Debug, Clone, PartialEq)]
pub struct HalfspaceConstraint {
    pub normal: Vec<f64>,
    pub bound: f64,
    pub source_id: u32,
    /// Cosine between the query and `normal`.
    pub query_sim: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ConstraintStore {
    q: Vec<f64>,
    q_norm: f64,
    widen: f64,
    threshold: f64,
    constraints: Vec<HalfspaceConstraint>,
}

impl ConstraintStore {
    /// A store for query `q` over rows whose norms deviate from 1 by at most
    /// `norm_slack`.
    pub fn new(q: &[f32], norm_slack: f64) -> Self {
        Self::with_widening(q, 3.0 * norm_slack + 1e-12)
    }

    /// A store that takes every vector as exactly unit, without widening.
    pub fn exact(q: &[f32]) -> Self {
        Self::with_widening(q, 0.0)
    }

    fn with_widening(q: &[f32], widen: f64) -> Self {
        let raw: Vec<f64> = q.iter().map(|&x| x as f64).collect();
        let q_norm = norm64(&raw);
        Self {
            q: raw.iter().map(|x| x / q_norm).collect(),
            q_norm,
            widen,
            threshold: -1.0,
            constraints: Vec::new(),
        }
    }

    pub fn dim(&self) -> usize {
        self.q.len()
    }

    pub fn len(&self) -> usize {
        self.constraints.len()
    }

    pub fn is_empty(&self) -> bool {
        self.constraints.is_empty()
    }

    /// The unit query direction.
    pub fn query(&self) -> &[f64] {
        &self.q
    }

    pub fn constraints(&self) -> &[HalfspaceConstraint] {
        &self.constraints
    }

    /// The raw k-th best similarity the region is defined by.
    pub fn threshold(&self) -> f64 {
        self.threshold
    }

    /// Raises the threshold to `similarity`; lower values are ignored, so the
    /// threshold never decreases.
    pub fn set_threshold(&mut self, similarity: f64) {
        if similarity > self.threshold {
            self.threshold = similarity;
        }
    }

    /// The widened bound `t` in `q . x >= t` used by the solvers.
    pub fn query_bound(&self) -> f64 {
        self.threshold / self.q_norm - self.widen
    }

    pub fn contains_source(&self, id: u32) -> bool {
        self.constraints.iter().any(|c| c.source_id == id)
    }

    /// Adds the constraint left by completing vertex `source_id`, whose row is
    /// `row` and radius `radius`. Returns `false` for a repeated source.
    pub fn push(&mut self, source_id: u32, row: &[f32], radius: f32) -> bool {
        if self.contains_source(source_id) {
            return false;
        }
        let raw: Vec<f64> = row.iter().map(|&x| x as f64).collect();
        let len = norm64(&raw);
        let normal: Vec<f64> = raw.iter().map(|x| x / len).collect();
        let query_sim = dot64(&normal, &self.q);
        self.constraints.push(HalfspaceConstraint {
            normal,
            bound: radius as f64 + self.widen,
            source_id,
            query_sim,
        });
        true
    }

    /// Whether `x` lies in the unchecked region, each condition within `tol`.
    pub fn contains_point(&self, x: &[f64], tol: f64) -> bool {
        self.contains_point_from(x, tol, 0)
    }

    /// [`ConstraintStore::contains_point`] checking only the constraints from
    /// index `from` on, for a point already known to satisfy the earlier ones.
    pub fn contains_point_from(&self, x: &[f64], tol: f64, from: usize) -> bool {
        (norm64(x) - 1.0).abs() <= tol
            && dot64(&self.q, x) >= self.query_bound() - tol
            && self.constraints[from.min(self.len())..]
                .iter()
                .all(|c| dot64(&c.normal, x) <= c.bound + tol)
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CertConfig {
    /// Decay base of the oscillation test in alternating projection.
    pub alpha: f64,
    pub max_sweeps: u32,
    /// Projection stops once every set is violated by at most this much.
    pub feasibility_tol: f64,
    /// Tolerance of the membership check on counterexamples.
    pub membership_tol: f64,
    /// Safety margin, in radians, of the single-point test.
    pub angle_margin: f64,
    pub max_pivots: u32,
    /// Require a verified multiplier certificate before reporting emptiness
    /// found by projection or the LP.
    pub strict: bool,
    /// Sweep cap of the dual ascent that confirms a projection verdict.
    pub verify_sweeps: u32,
}

impl Default for CertConfig {
    fn default() -> Self {
        Self {
            alpha: 0.95,
            max_sweeps: 500,
            feasibility_tol: 1e-7,
            membership_tol: 1e-6,
            angle_margin: 1e-9,
            max_pivots: 5000,
            strict: true,
            verify_sweeps: 2000,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Mechanism {
    SinglePoint,
    ProjectionEmpty,
    LpEmpty,
    LpInfeasible,
}

impl Mechanism {
    pub fn as_str(self) -> &'static str {
        match self {
            Mechanism::SinglePoint => "single-point",
            Mechanism::ProjectionEmpty => "projection-empty",
            Mechanism::LpEmpty => "lp-empty",
            Mechanism::LpInfeasible => "lp-infeasible",
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum Verdict {
    Certified,
    /// A unit vector inside the unchecked region.
    Counterexample(Vec<f64>),
    Inconclusive,
}

/// Furthest step of the cascade that ran.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum Stage {
    #[default]
    SinglePoint,
    /// An earlier counterexample was still inside the region.
    Witness,
    Projection,
    Simplex,
    Combine,
}

impl Stage {
    pub fn as_str(self) -> &'static str {
        match self {
            Stage::SinglePoint => "single-point",
            Stage::Witness => "witness",
            Stage::Projection => "projection",
            Stage::Simplex => "simplex",
            Stage::Combine => "combine",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub struct CertStats {
    pub stage: Stage,
    pub projection_sweeps: u32,
    pub verify_sweeps: u32,
    pub lp_pivots: u32,
}

#[derive(Debug, Clone, PartialEq)]
pub struct CertOutcome {
    pub verdict: Verdict,
    /// Set when the verdict is [`Verdict::Certified`].
    pub mechanism: Option<Mechanism>,
    pub stats: CertStats,
}

impl CertOutcome {
    fn certified(mechanism: Mechanism, stats: CertStats) -> Self {
        Self {
            verdict: Verdict::Certified,
            mechanism: Some(mechanism),
            stats,
        }
    }

    fn inconclusive(stats: CertStats) -> Self {
        Self {
            verdict: Verdict::Inconclusive,
            mechanism: None,
            stats,
        }
    }

    pub fn is_certified(&self) -> bool {
        self.verdict == Verdict::Certified
    }
}

/// Whether the query cap `{x : q . x >= v_hat_sim}` lies strictly inside the
/// cap `{x : v_j . x >= b_j}`: the angular radius of the first plus the angle
/// between the centers must fit in the angular radius of the second.
pub fn single_point_certificate(v_hat_sim: f64, v_j_sim: f64, b_j: f64, margin: f64) -> bool {
    let acos = |c: f64| libm::acos(c.clamp(-1.0, 1.0));
    acos(v_hat_sim) + acos(v_j_sim) < acos(b_j) - margin
}

/// Tries to prove the unchecked region of `store` empty, or to find a point
/// in it. `latest` indexes the constraint just added, which feeds the
/// single-point test. With `cascade` false only that test runs.
pub fn construct_certificate(
    store: &ConstraintStore,
    latest: usize,
    cfg: &CertConfig,
    cascade: bool,
) -> CertOutcome {
    construct_certificate_with(store, latest, cfg, cascade, &mut Hints::default())
}

/// State carried between certificate attempts on one growing store. The
/// region only shrinks, so earlier points need checking only against the
/// constraints added since. A `Hints` must not be shared between stores.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct Hints {
    /// Last counterexample returned, and the store length it was checked at.
    pub witness: Option<(Vec<f64>, usize)>,
    /// Last point found in the convex relaxation; projection restarts here.
    pub relaxed: Option<Vec<f64>>,
    /// Multipliers of the last dual ascent, query first.
    pub dual: Vec<f64>,
    /// Last LP optimum and the store length it was solved at.
    pub lp: Option<(LpOutcome, usize)>,
}

/// The LP outcome for `store`, reusing the cached optimum while it satisfies
/// every constraint added since: a feasible point that was optimal over a
/// larger set stays optimal.
fn lp_with_cache(store: &ConstraintStore, max_pivots: u32, cache: &mut Option<(LpOutcome, usize)>) -> (LpOutcome, u32) {
    if let Some((LpOutcome::Optimal { x, value, duals }, len)) = cache.as_ref() {
        let still = store.constraints()[*len..].iter().all(|c| dot64(&c.normal, x) <= c.bound);
        if still {
            let mut duals = duals.clone();
            duals.constraints.resize(store.len(), 0.0);
            return (
                LpOutcome::Optimal {
                    x: x.clone(),
                    value: *value,
                    duals,
                },
                0,
            );
        }
    }
    let report = solve_simplex(store, max_pivots);
    *cache = match &report.outcome {
        LpOutcome::Optimal { .. } => Some((report.outcome.clone(), store.len())),
        _ => None,
    };
    (report.outcome, report.pivots)
}

/// [`construct_certificate`] reusing and updating `hints`. When the last
/// counterexample still lies in the region no certificate can exist, and it
/// is returned again without running the solvers.
pub fn construct_certificate_with(
    store: &ConstraintStore,
    latest: usize,
    cfg: &CertConfig,
    cascade: bool,
    hints: &mut Hints,
) -> CertOutcome {
    let mut stats = CertStats::default();
    let t = store.query_bound();
    let c = &store.constraints()[latest];
    if single_point_certificate(t, c.query_sim, c.bound, cfg.angle_margin) {
        return CertOutcome::certified(Mechanism::SinglePoint, stats);
    }
    if !cascade {
        return CertOutcome::inconclusive(stats);
    }

    if let Some((w, checked)) = &mut hints.witness {
        if store.contains_point_from(w, cfg.membership_tol, *checked) {
            *checked = store.len();
            stats.stage = Stage::Witness;
            return CertOutcome {
                verdict: Verdict::Counterexample(w.clone()),
                mechanism: None,
                stats,
            };
        }
        hints.witness = None;
    }

    stats.stage = Stage::Projection;
    let start = hints.relaxed.as_deref().unwrap_or(store.query());
    let report = solve_project_warm(start, store, cfg, &mut hints.dual);
    stats.projection_sweeps = report.sweeps;
    stats.verify_sweeps = report.verify_sweeps;
    let x_proj = match report.outcome {
        ProjectOutcome::Empty { multipliers } => {
            if !cfg.strict || dual::verify(store, &multipliers) {
                return CertOutcome::certified(Mechanism::ProjectionEmpty, stats);
            }
            None
        }
        ProjectOutcome::Feasible { x } => {
            hints.relaxed = Some(x.clone());
            let len = norm64(&x);
            if len > 1e-12 {
                let on_sphere: Vec<f64> = x.iter().map(|v| v / len).collect();
                if store.contains_point(&on_sphere, cfg.membership_tol) {
                    hints.witness = Some((on_sphere.clone(), store.len()));
                    return CertOutcome {
                        verdict: Verdict::Counterexample(on_sphere),
                        mechanism: None,
                        stats,
                    };
                }
            }
            Some(x)
        }
        // keep going: the LP can still certify on its own
        ProjectOutcome::Stalled { .. } => None,
    };

    stats.stage = Stage::Simplex;
    let (lp, pivots) = lp_with_cache(store, cfg.max_pivots, &mut hints.lp);
    stats.lp_pivots = pivots;
    let x_lp = match lp {
        LpOutcome::Infeasible { farkas } => {
            if !cfg.strict || dual::verify(store, &farkas) {
                return CertOutcome::certified(Mechanism::LpInfeasible, stats);
            }
            return CertOutcome::inconclusive(stats);
        }
        LpOutcome::Optimal { x, value, duals } => {
            if value < t - simplex::PIVOT_TOL && (!cfg.strict || dual::verify(store, &duals)) {
                return CertOutcome::certified(Mechanism::LpEmpty, stats);
            }
            x
        }
        LpOutcome::Stalled => return CertOutcome::inconclusive(stats),
    };
    if norm64(&x_lp) < 1.0 {
        return CertOutcome::inconclusive(stats);
    }
    let Some(x_proj) = x_proj else {
        return CertOutcome::inconclusive(stats);
    };

    stats.stage = Stage::Combine;
    match combine_to_sphere(&x_proj, &x_lp) {
        Ok(x) if store.contains_point(&x, cfg.membership_tol) => {
            hints.witness = Some((x.clone(), store.len()));
            CertOutcome {
                verdict: Verdict::Counterexample(x),
                mechanism: None,
                stats,
            }
        }
        _ => CertOutcome::inconclusive(stats),
    }
}
