//! Dense two-phase simplex for the linear relaxation
//!
//! ```text
//! maximize q . x  subject to  q . x <= 1,  n_i . x <= b_i  for every stored constraint
//! ```
//!
//! with `x` free. The problem has `d` unknowns and one row per completed
//! neighborhood, often hundreds, so the tableau is built for its dual
//!
//! ```text
//! minimize b . y  subject to  sum y_i a_i = q,  y >= 0
//! ```
//!
//! which has only `d` rows. `y = (1, 0, ...)` is always feasible, so the primal
//! is infeasible exactly when the dual is unbounded, and the unbounded ray is
//! the Farkas certificate. At the optimum, `y` is the multiplier certificate
//! and the primal point is read off the reduced costs of the artificial
//! columns. Pricing is Dantzig's rule, switching to Bland's rule after a run
//! of degenerate pivots so the method cannot cycle.

use alloc::vec;
use alloc::vec::Vec;

use super::dual::Multipliers;
use super::ConstraintStore;

pub const PIVOT_TOL: f64 = 1e-9;
/// Scale of the right-hand side perturbation against degenerate stalling.
const PERTURBATION: f64 = 1e-7;
const DEGENERATE_STREAK: u32 = 8;

#[derive(Debug, Clone, PartialEq)]
pub enum LpOutcome {
    Optimal {
        x: Vec<f64>,
        value: f64,
        /// Dual values for the cap row and each constraint row, which form a
        /// multiplier certificate together with weight one on the query row.
        duals: Multipliers,
    },
    /// No point satisfies the linear rows; `farkas` proves it.
    Infeasible { farkas: Multipliers },
    /// Pivot cap reached or numerical breakdown.
    Stalled,
}

#[derive(Debug, Clone, PartialEq)]
pub struct LpReport {
    pub outcome: LpOutcome,
    pub pivots: u32,
}

struct Tableau {
    rows: usize,
    cols: usize,
    /// `rows + 1` rows of `cols + 1` entries; the last row is the objective
    /// (reduced costs, `z_j - c_j`), the last column the right-hand side.
    cells: Vec<f64>,
    basis: Vec<usize>,
    pivots: u32,
    max_pivots: u32,
}

impl Tableau {
    #[inline]
    fn at(&self, r: usize, c: usize) -> f64 {
        self.cells[r * (self.cols + 1) + c]
    }

    #[inline]
    fn row(&self, r: usize) -> &[f64] {
        let w = self.cols + 1;
        &self.cells[r * w..(r + 1) * w]
    }

    fn pivot(&mut self, pr: usize, pc: usize) {
        let w = self.cols + 1;
        let p = self.at(pr, pc);
        for v in &mut self.cells[pr * w..(pr + 1) * w] {
            *v /= p;
        }
        let (before, rest) = self.cells.split_at_mut(pr * w);
        let (prow, after) = rest.split_at_mut(w);
        for other in before.chunks_exact_mut(w).chain(after.chunks_exact_mut(w)) {
            let f = other[pc];
            if f != 0.0 {
                for (o, p) in other.iter_mut().zip(prow.iter()) {
                    *o -= f * p;
                }
                other[pc] = 0.0;
            }
        }
        self.basis[pr] = pc;
        self.pivots += 1;
    }

    /// One iteration over the entering columns `0..allowed`: Dantzig's rule,
    /// or Bland's after a run of degenerate pivots.
    fn step(&mut self, allowed: usize, degenerate: &mut u32) -> Step {
        if self.pivots >= self.max_pivots {
            return Step::Stalled;
        }
        let obj = self.row(self.rows);
        let bland = *degenerate >= DEGENERATE_STREAK;
        let mut enter = None;
        let mut best = -PIVOT_TOL;
        for (c, &r) in obj[..allowed].iter().enumerate() {
            if r < best {
                enter = Some(c);
                if bland {
                    break;
                }
                best = r;
            }
        }
        let Some(pc) = enter else { return Step::Optimal };
        let mut leave: Option<(usize, f64)> = None;
        for r in 0..self.rows {
            let a = self.at(r, pc);
            if a > PIVOT_TOL {
                let ratio = self.at(r, self.cols) / a;
                let better = match leave {
                    None => true,
                    Some((lr, lratio)) => {
                        ratio < lratio - 1e-12 || (ratio <= lratio + 1e-12 && self.basis[r] < self.basis[lr])
                    }
                };
                if better {
                    leave = Some((r, ratio));
                }
            }
        }
        let Some((pr, ratio)) = leave else { return Step::Unbounded(pc) };
        if ratio.abs() <= 1e-12 {
            *degenerate += 1;
        } else {
            *degenerate = 0;
        }
        self.pivot(pr, pc);
        Step::Pivoted
    }
}

enum Step {
    Pivoted,
    Optimal,
    Unbounded(usize),
    Stalled,
}

/// Solves the linear relaxation of `store` through its dual.
pub fn solve_simplex(store: &ConstraintStore, max_pivots: u32) -> LpReport {
    let d = store.dim();
    let q = store.query();
    let m = store.len() + 1;
    // column 0 is the cap q . x <= 1, then the stored constraints
    let column = |i: usize| -> (&[f64], f64) {
        if i == 0 {
            (q, 1.0)
        } else {
            let c = &store.constraints()[i - 1];
            (&c.normal, c.bound)
        }
    };
    // rows: one equation per coordinate, negated where q_k < 0 so the
    // right-hand side is nonnegative; columns: y (m) | artificial (d)
    let sign: Vec<f64> = q.iter().map(|&v| if v < 0.0 { -1.0 } else { 1.0 }).collect();
    let art0 = m;
    let cols = m + d;
    let w = cols + 1;
    let mut t = Tableau {
        rows: d,
        cols,
        cells: vec![0.0; (d + 1) * w],
        basis: (art0..art0 + d).collect(),
        pivots: 0,
        max_pivots,
    };
    for i in 0..m {
        let (a, _) = column(i);
        for k in 0..d {
            t.cells[k * w + i] = sign[k] * a[k];
        }
    }
    for k in 0..d {
        t.cells[k * w + art0 + k] = 1.0;
        t.cells[k * w + cols] = sign[k] * q[k];
    }

    // Crash start at the always-feasible y = (1, 0, ...): the cap column
    // enters on the row of largest |q_k|, which zeroes every other
    // right-hand side, so the remaining artificials can be pivoted out
    // without a phase one. A row with no usable pivot is a redundant
    // equation and its artificial stays basic at zero.
    let lead = (0..d)
        .max_by(|&a, &b| q[a].abs().total_cmp(&q[b].abs()))
        .expect("dimension is at least 2");
    t.pivot(lead, 0);
    for r in 0..d {
        t.cells[r * w + cols] = if r == lead { t.at(r, cols) } else { 0.0 };
    }
    for r in 0..d {
        if t.basis[r] < art0 {
            continue;
        }
        let best = (0..art0)
            .map(|c| (c, t.at(r, c).abs()))
            .max_by(|a, b| a.1.total_cmp(&b.1))
            .filter(|&(_, v)| v > PIVOT_TOL);
        if let Some((pc, _)) = best {
            t.pivot(r, pc);
        }
    }

    // The crash start leaves all but one basic variable at zero, where
    // the simplex can spend thousands of pivots without moving. Raising
    // each basic value by a small distinct amount breaks the ties; the
    // final basis is then re-solved against the true right-hand side.
    for r in 0..d {
        if t.basis[r] < art0 {
            let spread = 1.0 + (r as f64 * 0.618_033_988_75).fract();
            t.cells[r * w + cols] += PERTURBATION * spread;
        }
    }

    // phase two: maximize -b . y, i.e. minimize b . y
    for c in 0..w {
        t.cells[d * w + c] = 0.0;
    }
    for i in 0..m {
        t.cells[d * w + i] = column(i).1;
    }
    for r in 0..d {
        let cost = t.cells[d * w + t.basis[r]];
        if cost != 0.0 {
            for c in 0..w {
                let v = t.cells[r * w + c];
                t.cells[d * w + c] -= cost * v;
            }
        }
    }
    let mut degenerate = 0;
    loop {
        match t.step(art0, &mut degenerate) {
            Step::Pivoted => {}
            Step::Optimal => break,
            Step::Stalled => return stalled(t.pivots),
            Step::Unbounded(enter) => {
                // ray: y_enter grows by one, basic variables fall by the
                // column entries; it keeps A^T y fixed and lowers b . y
                let mut ray = vec![0.0; m];
                ray[enter] = 1.0;
                for r in 0..d {
                    let b = t.basis[r];
                    if b < m {
                        ray[b] -= t.at(r, enter);
                    }
                }
                let farkas = Multipliers {
                    query: 0.0,
                    cap: ray[0].max(0.0),
                    constraints: ray[1..].iter().map(|v| v.max(0.0)).collect(),
                };
                return LpReport {
                    outcome: LpOutcome::Infeasible { farkas },
                    pivots: t.pivots,
                };
            }
        }
    }
    // basic values for the unperturbed right-hand side: the artificial
    // columns hold the basis inverse
    let mut y = vec![0.0; m];
    for r in 0..d {
        if t.basis[r] < m {
            y[t.basis[r]] = (0..d).map(|k| t.at(r, art0 + k) * sign[k] * q[k]).sum();
        }
    }
    let value: f64 = (0..m).map(|i| y[i] * column(i).1).sum();
    y.iter_mut().for_each(|v| *v = v.max(0.0));
    // the simplex multipliers of the dual are minus the primal point; they
    // sit in the reduced costs of the artificial columns
    let x: Vec<f64> = (0..d).map(|k| -sign[k] * t.at(d, art0 + k)).collect();
    let duals = Multipliers {
        query: 1.0,
        cap: y[0],
        constraints: y[1..].to_vec(),
    };
    LpReport {
        outcome: LpOutcome::Optimal { x, value, duals },
        pivots: t.pivots,
    }
}

fn stalled(pivots: u32) -> LpReport {
    LpReport {
        outcome: LpOutcome::Stalled,
        pivots,
    }
}
