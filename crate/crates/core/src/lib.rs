//! Cosine nearest-neighbor search over an exact K-nearest-neighbor graph,
//! with certificates proving that a returned top-k set is exactly correct.
//!
//! The crate is `no_std` and only needs `alloc`. File formats, parallel
//! index construction and the command line live in the `certicos` crate.
//!
//! Layout:
//!
//! - [`vector`]: the unit-norm dataset, queries, cosine and the brute-force oracle.
//! - [`knng`]: exact K-NN graph construction and verification.
//! - [`seeder`]: random-hyperplane LSH used to pick the first vertex of a search.
//! - [`certifier`]: the constraint store and the certificate mechanisms.
//! - [`search`]: best-first graph traversal interleaved with certification.

#![no_std]
#![warn(missing_debug_implementations)]

extern crate alloc;

pub mod certifier;
pub mod error;
pub mod knng;
pub mod search;
pub mod seeder;
pub mod vector;

pub use certifier::{CertOutcome, ConstraintStore, HalfspaceConstraint, Mechanism, Verdict};
pub use error::{Error, Result};
pub use knng::{KnnGraph, Violation};
pub use search::{lookup, lookup_audited, AuditRecord, Index, Proof, QueryResult, SearchConfig, SearchState, Step};
pub use seeder::LshSeeder;
pub use vector::{Query, UnitVectorSet};
