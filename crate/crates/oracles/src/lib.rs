//! Reference computations used to check the engine, written independently of
//! it: plain sequential sums, full sorts, enumeration, and bisection. Also
//! generators for random instances with known answers.

use certicos_core::{ConstraintStore, UnitVectorSet};
use rand::Rng;
use rand_distr::{Distribution, StandardNormal};

/// Sequential f64 dot product.
pub fn dot(a: &[f32], b: &[f32]) -> f64 {
    let mut s = 0.0;
    for (x, y) in a.iter().zip(b) {
        s += *x as f64 * *y as f64;
    }
    s
}

pub fn dot64(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

pub fn norm64(a: &[f64]) -> f64 {
    dot64(a, a).sqrt()
}

/// All ids ranked by similarity to `q`, best first, ties by ascending id.
pub fn ranking(set: &UnitVectorSet, q: &[f32]) -> Vec<(u32, f64)> {
    let mut all: Vec<(u32, f64)> = (0..set.len() as u32).map(|i| (i, dot(q, set.row(i)))).collect();
    all.sort_by(|a, b| b.1.partial_cmp(&a.1).unwrap().then(a.0.cmp(&b.0)));
    all
}

/// Ids of the exact top `k` for `q`.
pub fn top_ids(set: &UnitVectorSet, q: &[f32], k: usize) -> Vec<u32> {
    ranking(set, q).into_iter().take(k).map(|(i, _)| i).collect()
}

/// Exact `K` nearest neighbors of every row, by full sort of all pairs.
pub fn all_pairs_topk(set: &UnitVectorSet, k: usize) -> Vec<Vec<u32>> {
    (0..set.len() as u32)
        .map(|i| {
            ranking(set, set.row(i))
                .into_iter()
                .filter(|&(j, _)| j != i)
                .take(k)
                .map(|(j, _)| j)
                .collect()
        })
        .collect()
}

/// Solves the square system `m y = rhs` by Gaussian elimination with partial
/// pivoting. `None` when singular.
pub fn solve_square(mut m: Vec<Vec<f64>>, mut rhs: Vec<f64>) -> Option<Vec<f64>> {
    let n = rhs.len();
    for col in 0..n {
        let piv = (col..n).max_by(|&a, &b| m[a][col].abs().partial_cmp(&m[b][col].abs()).unwrap())?;
        if m[piv][col].abs() < 1e-10 {
            return None;
        }
        m.swap(col, piv);
        rhs.swap(col, piv);
        for r in col + 1..n {
            let f = m[r][col] / m[col][col];
            for c in col..n {
                m[r][c] -= f * m[col][c];
            }
            rhs[r] -= f * rhs[col];
        }
    }
    let mut y = vec![0.0; n];
    for r in (0..n).rev() {
        let s: f64 = (r + 1..n).map(|c| m[r][c] * y[c]).sum();
        y[r] = (rhs[r] - s) / m[r][r];
    }
    Some(y)
}

fn rank(rows: &[Vec<f64>]) -> usize {
    let mut m: Vec<Vec<f64>> = rows.to_vec();
    let cols = m.first().map_or(0, Vec::len);
    let mut r = 0;
    for c in 0..cols {
        let Some(p) = (r..m.len()).filter(|&i| m[i][c].abs() > 1e-9).max_by(|&a, &b| {
            m[a][c].abs().partial_cmp(&m[b][c].abs()).unwrap()
        }) else {
            continue;
        };
        m.swap(r, p);
        for i in 0..m.len() {
            if i != r {
                let f = m[i][c] / m[r][c];
                for j in c..cols {
                    m[i][j] -= f * m[r][j];
                }
            }
        }
        r += 1;
    }
    r
}

fn subsets(n: usize, size: usize, f: &mut dyn FnMut(&[usize])) {
    fn go(start: usize, n: usize, size: usize, cur: &mut Vec<usize>, f: &mut dyn FnMut(&[usize])) {
        if cur.len() == size {
            f(cur);
            return;
        }
        for i in start..n {
            cur.push(i);
            go(i + 1, n, size, cur, f);
            cur.pop();
        }
    }
    go(0, n, size, &mut Vec::new(), f);
}

/// Maximum of `c . x` over `{x : a_i . x <= b_i}` by enumerating minimal
/// faces: every subset of `rank(A)` independent rows made active, solved in
/// their row space. Requires `c` to lie in the row space of `A`, which makes
/// the objective constant on each minimal face. `None` when infeasible.
pub fn lp_by_enumeration(a: &[Vec<f64>], b: &[f64], c: &[f64], tol: f64) -> Option<f64> {
    let r = rank(a);
    let mut best: Option<f64> = None;
    subsets(a.len(), r, &mut |s| {
        let gram: Vec<Vec<f64>> = s.iter().map(|&i| s.iter().map(|&j| dot64(&a[i], &a[j])).collect()).collect();
        let rhs: Vec<f64> = s.iter().map(|&i| b[i]).collect();
        let Some(y) = solve_square(gram, rhs) else { return };
        let mut x = vec![0.0; c.len()];
        for (&i, yi) in s.iter().zip(&y) {
            for (xk, ak) in x.iter_mut().zip(&a[i]) {
                *xk += yi * ak;
            }
        }
        if a.iter().zip(b).all(|(ai, bi)| dot64(ai, &x) <= bi + tol) {
            let v = dot64(c, &x);
            best = Some(best.map_or(v, |o: f64| o.max(v)));
        }
    });
    best
}

/// The rows of the LP the engine solves for `store`: the cap `q . x <= 1`
/// followed by every constraint.
pub fn lp_rows(store: &ConstraintStore) -> (Vec<Vec<f64>>, Vec<f64>) {
    let mut a = vec![store.query().to_vec()];
    let mut b = vec![1.0];
    for c in store.constraints() {
        a.push(c.normal.clone());
        b.push(c.bound);
    }
    (a, b)
}

/// Point where the segment from `inside` towards `outside` meets the unit
/// sphere, by bisection on the segment parameter.
pub fn sphere_crossing(inside: &[f64], outside: &[f64]) -> Vec<f64> {
    let at = |t: f64| -> Vec<f64> { inside.iter().zip(outside).map(|(p, l)| p + t * (l - p)).collect() };
    let (mut lo, mut hi) = (0.0f64, 1.0f64);
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        if norm64(&at(mid)) < 1.0 {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    at(0.5 * (lo + hi))
}

/// The same point from the quadratic `|p + t (l - p)|^2 = 1`, larger root.
pub fn sphere_root(inside: &[f64], outside: &[f64]) -> Vec<f64> {
    let u: Vec<f64> = outside.iter().zip(inside).map(|(l, p)| l - p).collect();
    let a = dot64(&u, &u);
    let b = 2.0 * dot64(inside, &u);
    let c = dot64(inside, inside) - 1.0;
    let t = (-b + (b * b - 4.0 * a * c).max(0.0).sqrt()) / (2.0 * a);
    inside.iter().zip(&u).map(|(p, ui)| p + t * ui).collect()
}

pub fn random_unit<R: Rng>(rng: &mut R, d: usize) -> Vec<f32> {
    loop {
        let v: Vec<f64> = (0..d).map(|_| StandardNormal.sample(rng)).collect();
        let n = norm64(&v);
        if n > 1e-6 {
            return v.iter().map(|x| (x / n) as f32).collect();
        }
    }
}

pub fn to64(v: &[f32]) -> Vec<f64> {
    v.iter().map(|&x| x as f64).collect()
}

pub fn random_set<R: Rng>(rng: &mut R, n: usize, d: usize) -> UnitVectorSet {
    let data = (0..n).flat_map(|_| random_unit(rng, d)).collect();
    UnitVectorSet::from_rows(d, data, true).expect("random rows are valid")
}

/// Rows drawn around `centers` random centers, with per-coordinate noise of
/// standard deviation `spread`.
pub fn clustered_set<R: Rng>(rng: &mut R, n: usize, d: usize, centers: usize, spread: f64) -> UnitVectorSet {
    let cs: Vec<Vec<f32>> = (0..centers).map(|_| random_unit(rng, d)).collect();
    let mut data = Vec::with_capacity(n * d);
    for _ in 0..n {
        let c = &cs[rng.random_range(0..centers)];
        data.extend(c.iter().map(|&x| {
            let e: f64 = StandardNormal.sample(rng);
            (x as f64 + spread * e) as f32
        }));
    }
    UnitVectorSet::from_rows(d, data, true).expect("clustered rows are valid")
}

/// `v + N(0, eps I)`, normalized.
pub fn perturb<R: Rng>(rng: &mut R, v: &[f32], eps: f64) -> Vec<f32> {
    let sd = eps.sqrt();
    let raw: Vec<f64> = v
        .iter()
        .map(|&x| {
            let e: f64 = StandardNormal.sample(rng);
            x as f64 + sd * e
        })
        .collect();
    let n = norm64(&raw);
    raw.iter().map(|x| (x / n) as f32).collect()
}

/// A store whose unchecked region contains a known sphere point `z`, with
/// slack on every constraint.
pub fn feasible_store<R: Rng>(rng: &mut R, d: usize, constraints: usize) -> (ConstraintStore, Vec<f64>) {
    let q = random_unit(rng, d);
    let z = loop {
        let z = random_unit(rng, d);
        if dot(&q, &z) > -0.5 {
            break to64(&z);
        }
    };
    let mut store = ConstraintStore::exact(&q);
    store.set_threshold(dot64(&to64(&q), &z) - rng.random_range(0.001..0.2));
    let mut id = 0;
    while store.len() < constraints {
        let n = random_unit(rng, d);
        let bound = dot64(&to64(&n), &z) + rng.random_range(0.001..0.5);
        if bound < 1.0 {
            store.push(id, &n, bound as f32);
        }
        id += 1;
    }
    (store, z)
}

/// A store whose region is empty: two caps at angle `phi` on either side of
/// `q` with bound below `t cos(phi)` squeeze the query cap out, plus random
/// extra constraints.
pub fn empty_store<R: Rng>(rng: &mut R, d: usize, extra: usize) -> ConstraintStore {
    let q = to64(&random_unit(rng, d));
    let mut u = to64(&random_unit(rng, d));
    let along = dot64(&u, &q);
    u.iter_mut().zip(&q).for_each(|(ui, qi)| *ui -= along * qi);
    let un = norm64(&u);
    u.iter_mut().for_each(|ui| *ui /= un);
    let phi = rng.random_range(0.0..1.0f64);
    let t = rng.random_range(0.2..0.99f64);
    let bound = (t * phi.cos() - rng.random_range(0.01..0.2)) as f32;
    let qf: Vec<f32> = q.iter().map(|&x| x as f32).collect();
    let mut store = ConstraintStore::exact(&qf);
    store.set_threshold(t);
    let mut id = 0;
    for _ in 0..extra / 2 {
        store.push(id, &random_unit(rng, d), rng.random_range(-0.5..1.0));
        id += 1;
    }
    for s in [1.0, -1.0] {
        let n: Vec<f32> = q.iter().zip(&u).map(|(qi, ui)| (phi.cos() * qi + s * phi.sin() * ui) as f32).collect();
        store.push(id, &n, bound);
        id += 1;
    }
    for _ in extra / 2..extra {
        store.push(id, &random_unit(rng, d), rng.random_range(-0.5..1.0));
        id += 1;
    }
    store
}

/// A random LP store feasible by construction, optionally made infeasible by
/// adding `n . x <= b` and `-n . x <= -b - gap`.
pub fn lp_store<R: Rng>(rng: &mut R, d: usize, constraints: usize, infeasible: bool) -> ConstraintStore {
    let q = random_unit(rng, d);
    let z: Vec<f64> = to64(&random_unit(rng, d)).iter().map(|x| x * rng.random_range(0.0..0.9)).collect();
    let mut store = ConstraintStore::exact(&q);
    let mut id = 0;
    let plain = if infeasible { constraints.saturating_sub(2) } else { constraints };
    while store.len() < plain {
        let n = random_unit(rng, d);
        let bound = dot64(&to64(&n), &z) + rng.random_range(0.01..0.5);
        store.push(id, &n, bound.min(1.0) as f32);
        id += 1;
    }
    if infeasible {
        let n = random_unit(rng, d);
        let neg: Vec<f32> = n.iter().map(|x| -x).collect();
        let b: f32 = rng.random_range(-0.8..0.8);
        let gap: f32 = rng.random_range(0.01..0.2);
        store.push(id, &n, b);
        store.push(id + 1, &neg, -b - gap);
    }
    store
}
