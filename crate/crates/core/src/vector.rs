//! The dataset of unit vectors, queries, and the exhaustive oracle.

use alloc::vec::Vec;
use core::cmp::Ordering;

use crate::error::{Error, Result};

/// Rows closer than this to unit norm are left untouched by normalization,
/// which makes normalizing an already-normalized row a bit-exact no-op.
const UNIT_SNAP: f64 = 1e-6;

/// Rows accepted without normalization must be this close to unit norm.
pub const UNIT_TOLERANCE: f64 = 1e-4;

/// Dot product of two `f32` slices accumulated in `f64`.
///
/// Every similarity in the crate goes through this function so that the
/// search and the oracle agree bit-for-bit.
#[inline]
pub fn dot(a: &[f32], b: &[f32]) -> f64 {
    debug_assert_eq!(a.len(), b.len());
    let mut acc = [0f64; 4];
    let chunks = a.len() / 4;
    for c in 0..chunks {
        let i = c * 4;
        acc[0] += a[i] as f64 * b[i] as f64;
        acc[1] += a[i + 1] as f64 * b[i + 1] as f64;
        acc[2] += a[i + 2] as f64 * b[i + 2] as f64;
        acc[3] += a[i + 3] as f64 * b[i + 3] as f64;
    }
    for i in chunks * 4..a.len() {
        acc[0] += a[i] as f64 * b[i] as f64;
    }
    (acc[0] + acc[1]) + (acc[2] + acc[3])
}

/// Dot product of an `f64` vector with an `f32` row.
#[inline]
pub fn dot_mixed(a: &[f64], b: &[f32]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * *y as f64).sum()
}

#[inline]
pub fn dot64(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

#[inline]
pub fn norm64(a: &[f64]) -> f64 {
    libm::sqrt(dot64(a, a))
}

/// Cosine similarity of two unit vectors, clamped to `[-1, 1]`.
pub fn cosine(a: &[f32], b: &[f32]) -> f64 {
    dot(a, b).clamp(-1.0, 1.0)
}

/// Euclidean norm of an `f32` row, computed in `f64`.
pub fn norm(a: &[f32]) -> f64 {
    libm::sqrt(dot(a, a))
}

/// Scales `row` to unit norm in place. Returns `false` for a zero or
/// non-finite row, which is left unchanged.
pub fn normalize(row: &mut [f32]) -> bool {
    let n = norm(row);
    if !n.is_finite() || n == 0.0 {
        return false;
    }
    if (n - 1.0).abs() > UNIT_SNAP {
        for x in row.iter_mut() {
            *x = (*x as f64 / n) as f32;
        }
    }
    true
}

/// Orders `(similarity, id)` pairs best first: descending similarity, then
/// ascending id.
#[inline]
pub fn rank_order(a: (f64, u32), b: (f64, u32)) -> Ordering {
    b.0.total_cmp(&a.0).then(a.1.cmp(&b.1))
}

/// The dataset: `n` rows of dimension `d`, each of unit norm.
#[derive(Debug, Clone, PartialEq)]
pub struct UnitVectorSet {
    n: usize,
    d: usize,
    data: Vec<f32>,
    max_norm_error: f64,
}

impl UnitVectorSet {
    /// Builds a set from row-major data.
    ///
    /// With `normalize` every row is scaled to unit norm; otherwise rows must
    /// already be within [`UNIT_TOLERANCE`] of unit norm.
    pub fn from_rows(d: usize, mut data: Vec<f32>, normalize_rows: bool) -> Result<Self> {
        if d < 2 {
            return Err(Error::Dimension(d));
        }
        if data.is_empty() {
            return Err(Error::Empty);
        }
        if data.len() % d != 0 {
            return Err(Error::Shape {
                n: data.len() / d,
                d,
                len: data.len(),
            });
        }
        let n = data.len() / d;
        let mut max_norm_error = 0f64;
        for (row, chunk) in data.chunks_exact_mut(d).enumerate() {
            if chunk.iter().any(|x| !x.is_finite()) {
                return Err(Error::NonFinite { row });
            }
            if chunk.iter().all(|&x| x == 0.0) {
                return Err(Error::ZeroRow { row });
            }
            if normalize_rows {
                normalize(chunk);
            }
            let len = norm(chunk);
            if (len - 1.0).abs() > UNIT_TOLERANCE {
                return Err(Error::NotUnit { row, norm: len });
            }
            max_norm_error = max_norm_error.max((len - 1.0).abs());
        }
        Ok(Self {
            n,
            d,
            data,
            max_norm_error,
        })
    }

    pub fn len(&self) -> usize {
        self.n
    }

    pub fn is_empty(&self) -> bool {
        self.n == 0
    }

    pub fn dim(&self) -> usize {
        self.d
    }

    #[inline]
    pub fn row(&self, id: u32) -> &[f32] {
        let start = id as usize * self.d;
        &self.data[start..start + self.d]
    }

    pub fn rows(&self) -> impl ExactSizeIterator<Item = &[f32]> {
        self.data.chunks_exact(self.d)
    }

    pub fn as_slice(&self) -> &[f32] {
        &self.data
    }

    /// Largest deviation of any row's norm from 1.
    ///
    /// The certifier widens its unchecked region by a multiple of this so
    /// that rows which are not exactly unit still cannot escape it.
    pub fn max_norm_error(&self) -> f64 {
        self.max_norm_error
    }

    pub fn into_inner(self) -> Vec<f32> {
        self.data
    }
}

/// A search request: a unit query vector, the number of neighbors wanted
/// and the expansion budget.
#[derive(Debug, Clone, PartialEq)]
pub struct Query {
    pub vector: Vec<f32>,
    pub k: usize,
    pub budget: usize,
}

impl Query {
    /// Normalizes `vector` and validates `k` against a dataset of size `n`.
    pub fn new(mut vector: Vec<f32>, k: usize, budget: usize, set: &UnitVectorSet) -> Result<Self> {
        if vector.len() != set.dim() {
            return Err(Error::QueryDimension {
                expected: set.dim(),
                got: vector.len(),
            });
        }
        if k == 0 || k > set.len() {
            return Err(Error::KOutOfRange { k, n: set.len() });
        }
        if vector.iter().any(|x| !x.is_finite()) {
            return Err(Error::NonFinite { row: 0 });
        }
        if !normalize(&mut vector) {
            return Err(Error::ZeroRow { row: 0 });
        }
        Ok(Self { vector, k, budget })
    }
}

/// Exhaustive top-k by cosine similarity: ids with their similarity to `q`,
/// best first, ties broken by ascending id.
pub fn brute_force_topk(set: &UnitVectorSet, q: &[f32], k: usize) -> Vec<(u32, f64)> {
    let mut all: Vec<(f64, u32)> = set
        .rows()
        .enumerate()
        .map(|(i, row)| (dot(q, row), i as u32))
        .collect();
    let k = k.min(all.len());
    if k == 0 {
        return Vec::new();
    }
    if k < all.len() {
        all.select_nth_unstable_by(k - 1, |a, b| rank_order(*a, *b));
        all.truncate(k);
    }
    all.sort_unstable_by(|a, b| rank_order(*a, *b));
    all.into_iter().map(|(s, i)| (i, s)).collect()
}
