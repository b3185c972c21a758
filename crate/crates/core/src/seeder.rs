//! Random-hyperplane LSH used to choose where a search starts.
//!
//! Each of the `m` hyperplanes contributes one sign bit. Vertices sharing a
//! code land in the same bucket; the seed for a query is the lowest id in the
//! query's bucket, or in the nearest non-empty bucket by Hamming distance.

use alloc::collections::BTreeMap;
use alloc::vec::Vec;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};

use crate::error::{Error, Result};
use crate::vector::{dot, UnitVectorSet};

pub const MAX_BITS: usize = 24;
pub const DEFAULT_BITS: usize = 12;

#[derive(Debug, Clone, PartialEq)]
pub struct LshSeeder {
    d: usize,
    m: usize,
    rng_seed: u64,
    planes: Vec<f32>,
    table: BTreeMap<u32, Vec<u32>>,
}

/// Draws `m` unit hyperplane normals in dimension `d` from `rng_seed`.
pub fn draw_planes(d: usize, m: usize, rng_seed: u64) -> Vec<f32> {
    let mut rng = ChaCha8Rng::seed_from_u64(rng_seed);
    let mut planes = Vec::with_capacity(m * d);
    let mut row = Vec::with_capacity(d);
    for _ in 0..m {
        loop {
            row.clear();
            row.extend((0..d).map(|_| Distribution::<f64>::sample(&StandardNormal, &mut rng)));
            let len = libm::sqrt(row.iter().map(|x: &f64| x * x).sum::<f64>());
            if len > 0.0 {
                planes.extend(row.iter().map(|x| (x / len) as f32));
                break;
            }
        }
    }
    planes
}

fn code_of(planes: &[f32], d: usize, v: &[f32]) -> u32 {
    planes
        .chunks_exact(d)
        .enumerate()
        .fold(0u32, |code, (t, plane)| {
            if dot(plane, v) >= 0.0 {
                code | (1 << t)
            } else {
                code
            }
        })
}

impl LshSeeder {
    pub fn build(set: &UnitVectorSet, m: usize, rng_seed: u64) -> Result<Self> {
        if m == 0 || m > MAX_BITS {
            return Err(Error::BitsOutOfRange(m));
        }
        let d = set.dim();
        let planes = draw_planes(d, m, rng_seed);
        let mut table: BTreeMap<u32, Vec<u32>> = BTreeMap::new();
        for (i, row) in set.rows().enumerate() {
            table.entry(code_of(&planes, d, row)).or_default().push(i as u32);
        }
        Ok(Self {
            d,
            m,
            rng_seed,
            planes,
            table,
        })
    }

    /// Reassembles a seeder read from disk, checking that the buckets
    /// partition `0..n` and that codes fit in `m` bits.
    pub fn from_parts(
        d: usize,
        m: usize,
        rng_seed: u64,
        planes: Vec<f32>,
        table: BTreeMap<u32, Vec<u32>>,
        n: usize,
    ) -> Result<Self> {
        if m == 0 || m > MAX_BITS {
            return Err(Error::BitsOutOfRange(m));
        }
        if planes.len() != m * d {
            return Err(Error::Inconsistent("plane matrix size"));
        }
        let mut seen = alloc::vec![false; n];
        for (&code, ids) in &table {
            if code >> m != 0 {
                return Err(Error::Inconsistent("bucket code wider than m bits"));
            }
            if ids.is_empty() {
                return Err(Error::Inconsistent("empty bucket"));
            }
            for &id in ids {
                match seen.get_mut(id as usize) {
                    Some(s) if !*s => *s = true,
                    _ => return Err(Error::Inconsistent("buckets do not partition ids")),
                }
            }
        }
        if seen.iter().any(|s| !s) {
            return Err(Error::Inconsistent("buckets do not partition ids"));
        }
        Ok(Self {
            d,
            m,
            rng_seed,
            planes,
            table,
        })
    }

    pub fn bits(&self) -> usize {
        self.m
    }

    pub fn rng_seed(&self) -> u64 {
        self.rng_seed
    }

    pub fn dim(&self) -> usize {
        self.d
    }

    pub fn planes(&self) -> &[f32] {
        &self.planes
    }

    /// Non-empty buckets in ascending code order; ids ascend within a bucket.
    pub fn buckets(&self) -> impl Iterator<Item = (u32, &[u32])> {
        self.table.iter().map(|(c, ids)| (*c, ids.as_slice()))
    }

    pub fn code(&self, v: &[f32]) -> u32 {
        code_of(&self.planes, self.d, v)
    }

    /// Starting vertex for a search towards `x`.
    pub fn seed(&self, x: &[f32]) -> u32 {
        let code = self.code(x);
        if let Some(ids) = self.table.get(&code) {
            return ids[0];
        }
        // nearest bucket by Hamming distance, lowest code on ties
        let (_, ids) = self
            .table
            .iter()
            .min_by_key(|(c, _)| ((*c ^ code).count_ones(), **c))
            .expect("seeder over a non-empty set has a bucket");
        ids[0]
    }
}
