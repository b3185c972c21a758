//! Multiplier certificates for emptiness of the unchecked region.
//!
//! Write the linear part of the region as rows `a_i . x <= c_i`: the query
//! halfspace as `-q . x <= -t`, the cap `q . x <= 1`, and one row per stored
//! constraint. For nonnegative multipliers `l_i`, every `x` in the region
//! satisfies `w . x <= -r` with `w = sum l_i a_i` and `r = -sum l_i c_i`.
//! Every `x` with `|x| <= 1` satisfies `w . x >= -|w|`, so `r > |w|` proves
//! that no point of the unit ball (and so of the sphere) is in the region.

use crate::vector::norm64;

use super::ConstraintStore;

/// Absolute slack, relative to the multiplier mass, demanded of a certificate.
pub const DUAL_MARGIN: f64 = 1e-9;

/// Multipliers for the rows of a [`ConstraintStore`].
#[derive(Debug, Clone, PartialEq, Default)]
pub struct Multipliers {
    /// Weight on the query halfspace `q . x >= t`.
    pub query: f64,
    /// Weight on the cap `q . x <= 1`.
    pub cap: f64,
    /// One weight per stored constraint, in store order.
    pub constraints: alloc::vec::Vec<f64>,
}

/// Recomputes the certificate from scratch and reports whether it proves the
/// region empty. Negative or non-finite multipliers are rejected.
pub fn verify(store: &ConstraintStore, m: &Multipliers) -> bool {
    if m.constraints.len() != store.len() {
        return false;
    }
    let all = core::iter::once(m.query)
        .chain(core::iter::once(m.cap))
        .chain(m.constraints.iter().copied());
    let mut mass = 0.0;
    for l in all {
        if !(l >= 0.0) || !l.is_finite() {
            return false;
        }
        mass += l;
    }
    if mass == 0.0 {
        return false;
    }
    let q = store.query();
    let mut w: alloc::vec::Vec<f64> = q.iter().map(|x| (m.cap - m.query) * x).collect();
    let mut rhs = m.query * store.query_bound() - m.cap;
    for (c, &l) in store.constraints().iter().zip(&m.constraints) {
        if l == 0.0 {
            continue;
        }
        for (wi, ni) in w.iter_mut().zip(&c.normal) {
            *wi += l * ni;
        }
        rhs -= l * c.bound;
    }
    rhs > norm64(&w) + DUAL_MARGIN * mass
}
