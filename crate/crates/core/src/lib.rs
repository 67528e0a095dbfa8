//! Mutability-aware factual knowledge probing.
//!
//! The crate covers the whole measurement pipeline except the model itself:
//! building cloze benchmarks from a knowledge graph ([`ingest`]), scoring
//! generations ([`eval`]), MDL probing of representations ([`probe`]) and the
//! in-context update harness ([`update`]). Models are reached through the
//! small HTTP protocol in [`adapter`] or through pre-generated files.

pub mod adapter;
pub mod cloze;
pub mod dataset;
pub mod eval;
pub mod hexvec;
pub mod ingest;
pub mod jsonl;
pub mod manifest;
pub mod net;
pub mod probe;
pub mod report;
pub mod seed;
pub mod types;
pub mod update;

pub use dataset::{Dataset, QueryRecord, Record};
pub use types::*;
