//! Synthetic datasets and query workloads, all driven by one seed.

use certicos_core::vector::normalize;
use certicos_core::UnitVectorSet;
use rand::seq::index::sample;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};

pub fn rng_for(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

fn gaussian<R: Rng>(rng: &mut R) -> f64 {
    StandardNormal.sample(rng)
}

/// Unit vector drawn uniformly from the sphere.
pub fn random_unit<R: Rng>(rng: &mut R, d: usize) -> Vec<f32> {
    loop {
        let mut v: Vec<f32> = (0..d).map(|_| gaussian(rng) as f32).collect();
        if normalize(&mut v) {
            return v;
        }
    }
}

/// `n` unit rows, uniform on the sphere.
pub fn uniform<R: Rng>(rng: &mut R, n: usize, d: usize) -> Vec<f32> {
    (0..n).flat_map(|_| random_unit(rng, d)).collect()
}

/// `n` unit rows scattered around `clusters` random centers. Each row is a
/// center plus Gaussian noise of standard deviation `spread` per coordinate,
/// then normalized.
pub fn clustered<R: Rng>(rng: &mut R, n: usize, d: usize, clusters: usize, spread: f64) -> Vec<f32> {
    let centers: Vec<Vec<f32>> = (0..clusters.max(1)).map(|_| random_unit(rng, d)).collect();
    let mut data = Vec::with_capacity(n * d);
    for _ in 0..n {
        let c = &centers[rng.random_range(0..centers.len())];
        loop {
            let mut row: Vec<f32> = c.iter().map(|&x| (x as f64 + spread * gaussian(rng)) as f32).collect();
            if normalize(&mut row) {
                data.extend_from_slice(&row);
                break;
            }
        }
    }
    data
}

/// Like [`clustered`], but each cluster varies only inside its own random
/// `rank`-dimensional subspace, plus isotropic noise of standard deviation
/// `floor`. Real embeddings look more like this than like full-rank noise.
pub fn clustered_low_rank<R: Rng>(
    rng: &mut R,
    n: usize,
    d: usize,
    clusters: usize,
    rank: usize,
    spread: f64,
    floor: f64,
) -> Vec<f32> {
    let clusters = clusters.max(1);
    let centers: Vec<Vec<f32>> = (0..clusters).map(|_| random_unit(rng, d)).collect();
    let bases: Vec<Vec<Vec<f32>>> = (0..clusters).map(|_| (0..rank).map(|_| random_unit(rng, d)).collect()).collect();
    let mut data = Vec::with_capacity(n * d);
    let mut row = vec![0.0f64; d];
    for _ in 0..n {
        let c = rng.random_range(0..clusters);
        loop {
            row.iter_mut().zip(&centers[c]).for_each(|(r, &x)| *r = x as f64);
            for axis in &bases[c] {
                let z = spread * gaussian(rng);
                row.iter_mut().zip(axis).for_each(|(r, &a)| *r += z * a as f64);
            }
            row.iter_mut().for_each(|r| *r += floor * gaussian(rng));
            let mut out: Vec<f32> = row.iter().map(|&x| x as f32).collect();
            if normalize(&mut out) {
                data.extend_from_slice(&out);
                break;
            }
        }
    }
    data
}

/// `v + N(0, eps I)`, normalized. `eps` is a variance.
pub fn perturb<R: Rng>(rng: &mut R, v: &[f32], eps: f64) -> Vec<f32> {
    let sd = eps.sqrt();
    loop {
        let mut q: Vec<f32> = v.iter().map(|&x| (x as f64 + sd * gaussian(rng)) as f32).collect();
        if normalize(&mut q) {
            return q;
        }
    }
}

/// A generated query and where it came from.
#[derive(Debug, Clone, PartialEq)]
pub struct GeneratedQuery {
    pub vector: Vec<f32>,
    /// Dataset row the query was perturbed from.
    pub source: Option<u32>,
    pub epsilon: Option<f64>,
}

/// `count` queries, each a random dataset row perturbed with a variance
/// drawn uniformly from `eps_min..=eps_max`.
pub fn perturbed_queries<R: Rng>(
    rng: &mut R,
    set: &UnitVectorSet,
    count: usize,
    eps_min: f64,
    eps_max: f64,
) -> Vec<GeneratedQuery> {
    (0..count)
        .map(|_| {
            let i = rng.random_range(0..set.len() as u32);
            let eps = if eps_max > eps_min {
                rng.random_range(eps_min..=eps_max)
            } else {
                eps_min
            };
            GeneratedQuery {
                vector: perturb(rng, set.row(i), eps),
                source: Some(i),
                epsilon: Some(eps),
            }
        })
        .collect()
}

/// Wraps plain query vectors, such as held-out rows.
pub fn holdout_queries(rows: &[f32], d: usize) -> Vec<GeneratedQuery> {
    rows.chunks_exact(d)
        .map(|r| GeneratedQuery {
            vector: r.to_vec(),
            source: None,
            epsilon: None,
        })
        .collect()
}

/// Splits `count` random rows off `data`: returns `(kept, held_out)`, both
/// row-major, with the original relative order preserved.
pub fn split_holdout<R: Rng>(rng: &mut R, data: &[f32], d: usize, count: usize) -> (Vec<f32>, Vec<f32>) {
    let n = data.len() / d;
    let mut held = vec![false; n];
    for i in sample(rng, n, count.min(n)) {
        held[i] = true;
    }
    let (mut kept, mut out) = (Vec::new(), Vec::new());
    for (row, &h) in data.chunks_exact(d).zip(&held) {
        if h { &mut out } else { &mut kept }.extend_from_slice(row);
    }
    (kept, out)
}
