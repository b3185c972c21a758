//! The std side of certicos: C2VD/C2IX files, a parallel exact graph
//! builder, query batches with an audit log, benchmark sweeps and the
//! command line. The search itself lives in `certicos-core`.

pub mod bench;
pub mod builder;
pub mod cli;
pub mod engine;
pub mod format;
pub mod synth;

pub use certicos_core as core;
