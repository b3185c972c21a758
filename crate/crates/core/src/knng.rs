//! Exact K-nearest-neighbor graph.
//!
//! Every vertex stores its `K` most similar other vertices, best first, and a
//! radius `b_i`: the similarity of the farthest stored neighbor. Any vertex
//! whose similarity to `i` is strictly above `b_i` is guaranteed to be in the
//! list, so once all of `i`'s neighbors have been looked at, the cap
//! `{x : v_i . x > b_i}` holds no unseen vertex.

use alloc::vec;
use alloc::vec::Vec;

use crate::error::{Error, Result};
use crate::vector::{dot, rank_order, UnitVectorSet};

#[derive(Debug, Clone, PartialEq)]
pub struct KnnGraph {
    n: usize,
    k: usize,
    adjacency: Vec<u32>,
    radii: Vec<f32>,
}

/// Smallest `f32` that is not below `x`.
pub fn f32_at_least(x: f64) -> f32 {
    let y = x as f32;
    if (y as f64) < x {
        y.next_up()
    } else {
        y
    }
}

/// Top-`k` neighbors of row `i`, best first, plus the radius for that list.
///
/// The radius is the `k`-th similarity rounded up to `f32`; rounding up only
/// shrinks the covered cap.
pub fn neighbors_of(set: &UnitVectorSet, i: u32, k: usize) -> (Vec<u32>, f32) {
    let q = set.row(i);
    let mut sims: Vec<(f64, u32)> = set
        .rows()
        .enumerate()
        .filter(|(j, _)| *j as u32 != i)
        .map(|(j, row)| (dot(q, row), j as u32))
        .collect();
    select_top(&mut sims, k)
}

/// Sorts the best `k` of `candidates` to the front and returns them with
/// their radius. `candidates` must not contain the vertex itself.
pub fn select_top(candidates: &mut Vec<(f64, u32)>, k: usize) -> (Vec<u32>, f32) {
    debug_assert!(k >= 1 && k <= candidates.len());
    if k < candidates.len() {
        candidates.select_nth_unstable_by(k - 1, |a, b| rank_order(*a, *b));
        candidates.truncate(k);
    }
    candidates.sort_unstable_by(|a, b| rank_order(*a, *b));
    let radius = f32_at_least(candidates[k - 1].0);
    (candidates.iter().map(|c| c.1).collect(), radius)
}

/// Checks `1 <= k <= n - 1`.
pub fn check_degree(n: usize, k: usize) -> Result<()> {
    if k == 0 || k + 1 > n {
        return Err(Error::DegreeOutOfRange {
            k,
            max: n.saturating_sub(1),
        });
    }
    Ok(())
}

/// Brute-force exact construction, `O(n^2 d)`.
pub fn build_knng(set: &UnitVectorSet, k: usize) -> Result<KnnGraph> {
    check_degree(set.len(), k)?;
    let rows = (0..set.len() as u32).map(|i| neighbors_of(set, i, k));
    KnnGraph::from_rows(set.len(), k, rows)
}

/// A vertex whose stored neighbor list does not cover its radius.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Violation {
    /// `other` is strictly more similar to `vertex` than its radius but is
    /// not in the neighbor list.
    Missing {
        vertex: u32,
        other: u32,
        similarity: f64,
        radius: f32,
    },
    SelfLoop { vertex: u32 },
    Duplicate { vertex: u32, other: u32 },
    OutOfRange { vertex: u32, other: u32 },
}

/// Exhaustively checks the neighborhood property of every vertex. An empty
/// result means every radius is sound for certification.
pub fn verify_knng(set: &UnitVectorSet, graph: &KnnGraph) -> Vec<Violation> {
    let n = set.len();
    let mut out = Vec::new();
    // stamp[j] == i + 1 marks j as a neighbor of i
    let mut stamp = vec![0u32; n];
    for i in 0..graph.len() as u32 {
        let mark = i + 1;
        for &j in graph.neighbors(i) {
            if j as usize >= n {
                out.push(Violation::OutOfRange { vertex: i, other: j });
                continue;
            }
            if j == i {
                out.push(Violation::SelfLoop { vertex: i });
            } else if stamp[j as usize] == mark {
                out.push(Violation::Duplicate { vertex: i, other: j });
            }
            stamp[j as usize] = mark;
        }
        let radius = graph.radius(i);
        let row = set.row(i);
        for (j, other) in set.rows().enumerate() {
            if j as u32 == i || stamp[j] == mark {
                continue;
            }
            let similarity = dot(row, other);
            if similarity > radius as f64 {
                out.push(Violation::Missing {
                    vertex: i,
                    other: j as u32,
                    similarity,
                    radius,
                });
            }
        }
    }
    out
}

impl KnnGraph {
    /// Assembles a graph from per-vertex `(neighbors, radius)` rows.
    pub fn from_rows<I>(n: usize, k: usize, rows: I) -> Result<Self>
    where
        I: IntoIterator<Item = (Vec<u32>, f32)>,
    {
        let mut adjacency = Vec::with_capacity(n * k);
        let mut radii = Vec::with_capacity(n);
        for (list, radius) in rows {
            if list.len() != k {
                return Err(Error::Inconsistent("neighbor list length differs from K"));
            }
            adjacency.extend_from_slice(&list);
            radii.push(radius);
        }
        Self::from_parts(n, k, adjacency, radii)
    }

    /// Wraps raw arrays, checking only their shapes and id ranges.
    pub fn from_parts(n: usize, k: usize, adjacency: Vec<u32>, radii: Vec<f32>) -> Result<Self> {
        check_degree(n, k)?;
        if adjacency.len() != n * k || radii.len() != n {
            return Err(Error::Inconsistent("adjacency or radii length"));
        }
        if adjacency.iter().any(|&j| j as usize >= n) {
            return Err(Error::Inconsistent("neighbor id out of range"));
        }
        Ok(Self {
            n,
            k,
            adjacency,
            radii,
        })
    }

    pub fn len(&self) -> usize {
        self.n
    }

    pub fn is_empty(&self) -> bool {
        self.n == 0
    }

    /// Neighbors per vertex.
    pub fn degree(&self) -> usize {
        self.k
    }

    #[inline]
    pub fn neighbors(&self, i: u32) -> &[u32] {
        let start = i as usize * self.k;
        &self.adjacency[start..start + self.k]
    }

    #[inline]
    pub fn radius(&self, i: u32) -> f32 {
        self.radii[i as usize]
    }

    pub fn adjacency(&self) -> &[u32] {
        &self.adjacency
    }

    pub fn radii(&self) -> &[f32] {
        &self.radii
    }

    pub fn radii_mut(&mut self) -> &mut [f32] {
        &mut self.radii
    }

    pub fn adjacency_mut(&mut self) -> &mut [u32] {
        &mut self.adjacency
    }
}
