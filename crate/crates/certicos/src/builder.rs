//! Parallel exact K-NN graph construction.
//!
//! Similarities are screened a block of rows at a time with an f32 matrix
//! product. Rounding can move an f32 dot product by at most `margin` from the
//! f64 value, so every vertex whose f64 similarity reaches the true K-th one
//! has an f32 score within `2 * margin` of the f32 K-th score. Those
//! candidates are rescored in f64 and ranked exactly as the core builder
//! does, which makes the output identical to `build_knng`.

use certicos_core::knng::{check_degree, select_top};
use certicos_core::vector::dot;
use certicos_core::{KnnGraph, Result, UnitVectorSet};
use rayon::prelude::*;

const BLOCK_ROWS: usize = 64;

/// Bound on `|f32 dot - f64 dot|` for two rows of `set`.
pub fn screening_margin(set: &UnitVectorSet) -> f32 {
    let d = set.dim() as f64;
    let scale = (1.0 + set.max_norm_error()).powi(2);
    // summation error of d products in f32, in either order, plus slack for
    // the f64 reference itself
    ((d + 2.0) * f32::EPSILON as f64 * scale + 1e-12) as f32
}

/// `out[r * n + j] = rows[r] . set[j]` in f32 for the rows `start..end`.
fn similarity_block(set: &UnitVectorSet, start: usize, end: usize, out: &mut [f32]) {
    let (n, d) = (set.len(), set.dim());
    let data = set.as_slice();
    let m = end - start;
    debug_assert_eq!(out.len(), m * n);
    // SAFETY: `a` is m x d row-major inside `data`, `b` views all of `data`
    // as a d x n column-major matrix, and `out` holds exactly m x n values.
    unsafe {
        matrixmultiply::sgemm(
            m,
            d,
            n,
            1.0,
            data[start * d..].as_ptr(),
            d as isize,
            1,
            data.as_ptr(),
            1,
            d as isize,
            0.0,
            out.as_mut_ptr(),
            n as isize,
            1,
        );
    }
}

/// The `k`-th largest score, skipping position `skip`. `top` is scratch
/// space kept sorted descending.
fn kth_score(scores: &[f32], skip: usize, k: usize, top: &mut Vec<f32>) -> f32 {
    top.clear();
    for (j, &s) in scores.iter().enumerate() {
        if j == skip || (top.len() == k && s <= top[k - 1]) {
            continue;
        }
        let at = top.partition_point(|&t| t >= s);
        if top.len() == k {
            top.pop();
        }
        top.insert(at, s);
    }
    top[k - 1]
}

fn refine_row(set: &UnitVectorSet, i: u32, k: usize, scores: &[f32], margin: f32, scratch: &mut Vec<f32>) -> (Vec<u32>, f32) {
    let cutoff = kth_score(scores, i as usize, k, scratch) - 2.0 * margin;
    let row = set.row(i);
    let mut candidates: Vec<(f64, u32)> = scores
        .iter()
        .enumerate()
        .filter(|&(j, &s)| j as u32 != i && s >= cutoff)
        .map(|(j, _)| (dot(row, set.row(j as u32)), j as u32))
        .collect();
    select_top(&mut candidates, k)
}

/// Exact graph of degree `k` over `set`, using the current rayon pool.
pub fn build_graph(set: &UnitVectorSet, k: usize) -> Result<KnnGraph> {
    let n = set.len();
    check_degree(n, k)?;
    let margin = screening_margin(set);
    let starts: Vec<usize> = (0..n).step_by(BLOCK_ROWS).collect();
    let blocks: Vec<Vec<(Vec<u32>, f32)>> = starts
        .par_iter()
        .map(|&start| {
            let end = (start + BLOCK_ROWS).min(n);
            let mut sims = vec![0.0f32; (end - start) * n];
            similarity_block(set, start, end, &mut sims);
            let mut scratch = Vec::with_capacity(k + 1);
            (start..end)
                .zip(sims.chunks_exact(n))
                .map(|(i, scores)| refine_row(set, i as u32, k, scores, margin, &mut scratch))
                .collect()
        })
        .collect();
    KnnGraph::from_rows(n, k, blocks.into_iter().flatten())
}

#[cfg(test)]
mod tests {
    use super::*;
    use certicos_core::knng::build_knng;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn similarity_block_matches_dot() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let data = (0..70 * 5).map(|_| rng.random_range(-1.0f32..1.0)).collect();
        let set = UnitVectorSet::from_rows(5, data, true).unwrap();
        let mut out = vec![0.0; 3 * 70];
        similarity_block(&set, 10, 13, &mut out);
        let margin = screening_margin(&set);
        for r in 0..3 {
            for j in 0..70 {
                let want = dot(set.row(10 + r as u32), set.row(j as u32));
                assert!((out[r * 70 + j] as f64 - want).abs() <= margin as f64);
            }
        }
    }

    #[test]
    fn equals_core_builder_with_duplicates() {
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        let mut data: Vec<f32> = (0..150 * 4).map(|_| rng.random_range(-1.0f32..1.0)).collect();
        // exact duplicates force ties at the radius
        let copy = data[..4 * 20].to_vec();
        data[4 * 100..4 * 120].copy_from_slice(&copy);
        let set = UnitVectorSet::from_rows(4, data, true).unwrap();
        for k in [1, 5, 21, 149] {
            assert_eq!(build_graph(&set, k).unwrap(), build_knng(&set, k).unwrap());
        }
    }

    #[test]
    fn rejects_bad_degree() {
        let set = UnitVectorSet::from_rows(2, vec![1.0, 0.0, 0.0, 1.0], false).unwrap();
        assert!(build_graph(&set, 2).is_err());
        assert!(build_graph(&set, 0).is_err());
    }
}
