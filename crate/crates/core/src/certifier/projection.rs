//! Alternating projection over the convex relaxation of the unchecked region:
//! the stored halfspaces, the query halfspace, and the unit ball.
//!
//! A feasible problem converges to a point of the intersection. An empty one
//! keeps oscillating; a sweep that keeps moving more than `alpha^t` triggers
//! an emptiness claim, which is then confirmed with a multiplier certificate
//! found by dual coordinate ascent before it is reported.

use alloc::vec::Vec;

use crate::vector::{dot64, norm64};

use super::dual::{self, Multipliers};
use super::{CertConfig, ConstraintStore};

/// Projection onto `{x : normal . x <= bound}` for a unit `normal`.
/// Returns the distance moved.
#[inline]
pub fn proj_constraint(x: &mut [f64], normal: &[f64], bound: f64) -> f64 {
    let excess = dot64(normal, x) - bound;
    if excess > 0.0 {
        for (xi, ni) in x.iter_mut().zip(normal) {
            *xi -= excess * ni;
        }
        excess
    } else {
        0.0
    }
}

/// Projection onto `{x : q . x >= threshold}` for a unit `q`.
/// Returns the distance moved.
#[inline]
pub fn proj_query_halfspace(x: &mut [f64], q: &[f64], threshold: f64) -> f64 {
    let deficit = threshold - dot64(q, x);
    if deficit > 0.0 {
        for (xi, qi) in x.iter_mut().zip(q) {
            *xi += deficit * qi;
        }
        deficit
    } else {
        0.0
    }
}

/// Projection onto the closed unit ball. Returns the distance moved.
#[inline]
pub fn proj_unit_ball(x: &mut [f64]) -> f64 {
    let len = norm64(x);
    if len > 1.0 {
        for xi in x.iter_mut() {
            *xi /= len;
        }
        len - 1.0
    } else {
        0.0
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum ProjectOutcome {
    /// The convex relaxation is empty, with the certificate that proves it.
    Empty { multipliers: Multipliers },
    /// A point of the convex relaxation.
    Feasible { x: Vec<f64> },
    /// Neither verdict within the sweep cap.
    Stalled { x: Vec<f64> },
}

#[derive(Debug, Clone, PartialEq)]
pub struct ProjectReport {
    pub outcome: ProjectOutcome,
    pub sweeps: u32,
    pub verify_sweeps: u32,
}

/// Largest violation of any constraint of the convex relaxation at `x`.
pub fn max_violation(store: &ConstraintStore, x: &[f64]) -> f64 {
    let mut worst = (norm64(x) - 1.0).max(store.query_bound() - dot64(store.query(), x));
    for c in store.constraints() {
        worst = worst.max(dot64(&c.normal, x) - c.bound);
    }
    worst.max(0.0)
}

/// Alternating projection from `x0`, sweeping stored constraints in
/// insertion order, then the query halfspace, then the unit ball.
pub fn solve_project(x0: &[f64], store: &ConstraintStore, cfg: &CertConfig) -> ProjectReport {
    solve_project_warm(x0, store, cfg, &mut Vec::new())
}

/// [`solve_project`] whose confirming dual ascent starts from, and leaves
/// behind, the multipliers in `dual` (query first, then one per constraint).
pub fn solve_project_warm(
    x0: &[f64],
    store: &ConstraintStore,
    cfg: &CertConfig,
    dual: &mut Vec<f64>,
) -> ProjectReport {
    let mut x = x0.to_vec();
    let q = store.query();
    let bound = store.query_bound();
    let mut streak = 0u32;
    let mut may_claim_empty = true;
    let mut verify_sweeps = 0;
    let mut decay = 1.0f64;
    for t in 1..=cfg.max_sweeps {
        decay *= cfg.alpha;
        let mut moved = 0.0;
        for c in store.constraints() {
            moved += proj_constraint(&mut x, &c.normal, c.bound);
        }
        moved += proj_query_halfspace(&mut x, q, bound);
        moved += proj_unit_ball(&mut x);

        // a point within tolerance of every set is as good as the limit
        if moved <= cfg.feasibility_tol && max_violation(store, &x) <= cfg.feasibility_tol {
            return ProjectReport {
                outcome: ProjectOutcome::Feasible { x },
                sweeps: t,
                verify_sweeps,
            };
        }
        if may_claim_empty && moved > decay {
            streak += 1;
            if streak >= 2 {
                if !cfg.strict {
                    return ProjectReport {
                        outcome: ProjectOutcome::Empty {
                            multipliers: Multipliers::default(),
                        },
                        sweeps: t,
                        verify_sweeps,
                    };
                }
                let (found, used) = min_norm_point_warm(store, cfg.verify_sweeps, cfg.feasibility_tol, dual);
                verify_sweeps += used;
                match found {
                    MinNorm::Certificate(multipliers) => {
                        return ProjectReport {
                            outcome: ProjectOutcome::Empty { multipliers },
                            sweeps: t,
                            verify_sweeps,
                        }
                    }
                    MinNorm::Inside(p) => {
                        return ProjectReport {
                            outcome: ProjectOutcome::Feasible { x: p },
                            sweeps: t,
                            verify_sweeps,
                        }
                    }
                    MinNorm::Unresolved => may_claim_empty = false,
                }
            }
        } else {
            streak = 0;
        }
    }
    ProjectReport {
        outcome: ProjectOutcome::Stalled { x },
        sweeps: cfg.max_sweeps,
        verify_sweeps,
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum MinNorm {
    /// The polyhedron misses the unit ball; the multipliers prove it.
    Certificate(Multipliers),
    /// A point of the polyhedron inside the unit ball.
    Inside(Vec<f64>),
    Unresolved,
}

/// Dual coordinate ascent (Hildreth's method) for the point of smallest norm
/// in the polyhedron `{q . x >= t} ∩ {n_i . x <= b_i}`.
///
/// The primal iterate is `x = -sum l_i a_i`. If the polyhedron meets the
/// unit ball the iterate approaches a point inside it; otherwise the dual
/// value grows past the certificate threshold. Returns the verdict and the
/// number of sweeps used.
pub fn min_norm_point(store: &ConstraintStore, max_sweeps: u32, tol: f64) -> (MinNorm, u32) {
    min_norm_point_warm(store, max_sweeps, tol, &mut Vec::new())
}

/// [`min_norm_point`] starting from the multipliers in `dual` (query first,
/// then one per constraint; missing entries start at zero) and storing the
/// final ones back. Any nonnegative start is valid for dual ascent.
pub fn min_norm_point_warm(
    store: &ConstraintStore,
    max_sweeps: u32,
    tol: f64,
    dual: &mut Vec<f64>,
) -> (MinNorm, u32) {
    let q = store.query();
    let t = store.query_bound();
    let m = store.len();
    dual.resize(m + 1, 0.0);
    let mut mu = dual[0].max(0.0);
    let mut lambda: Vec<f64> = dual[1..].iter().map(|l| l.max(0.0)).collect();
    let mut x: Vec<f64> = q.iter().map(|qi| mu * qi).collect();
    for (c, l) in store.constraints().iter().zip(&lambda) {
        if *l != 0.0 {
            for (xi, ni) in x.iter_mut().zip(&c.normal) {
                *xi -= l * ni;
            }
        }
    }
    let (found, used) = hildreth(store, max_sweeps, tol, t, &mut mu, &mut lambda, &mut x);
    dual[0] = mu;
    dual[1..].copy_from_slice(&lambda);
    (found, used)
}

fn hildreth(
    store: &ConstraintStore,
    max_sweeps: u32,
    tol: f64,
    t: f64,
    mu: &mut f64,
    lambda: &mut [f64],
    x: &mut [f64],
) -> (MinNorm, u32) {
    let q = store.query();
    for sweep in 1..=max_sweeps {
        // query row: -q . x <= -t
        let step = (*mu + (t - dot64(q, x))).max(0.0) - *mu;
        if step != 0.0 {
            *mu += step;
            for (xi, qi) in x.iter_mut().zip(q) {
                *xi += step * qi;
            }
        }
        for (c, l) in store.constraints().iter().zip(lambda.iter_mut()) {
            let step = (*l + (dot64(&c.normal, x) - c.bound)).max(0.0) - *l;
            if step != 0.0 {
                *l += step;
                for (xi, ni) in x.iter_mut().zip(&c.normal) {
                    *xi -= step * ni;
                }
            }
        }
        let mass = *mu + lambda.iter().sum::<f64>();
        let gap = *mu * t - lambda.iter().zip(store.constraints()).map(|(l, c)| l * c.bound).sum::<f64>();
        if gap > norm64(x) + dual::DUAL_MARGIN * mass {
            let multipliers = Multipliers {
                query: *mu,
                cap: 0.0,
                constraints: lambda.to_vec(),
            };
            if dual::verify(store, &multipliers) {
                return (MinNorm::Certificate(multipliers), sweep);
            }
        }
        if norm64(x) <= 1.0 && max_violation(store, x) <= tol {
            return (MinNorm::Inside(x.to_vec()), sweep);
        }
    }
    (MinNorm::Unresolved, max_sweeps)
}
