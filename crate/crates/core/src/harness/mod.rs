//! Corpus ingestion, analysis orchestration, and report emission.
//!
//! Pages are processed with deterministic, order-independent aggregation;
//! identical inputs, config, and seed produce byte-identical outputs. All
//! mutation is confined to the run's output directory, guarded by a run
//! lock.

pub mod config;
pub mod correction;
pub mod corpus;
pub mod lock;
pub mod rq1;
pub mod rq2;
pub mod rq3;
pub mod stimuli;

pub use config::{load_config, run_report, RunConfig};
pub use corpus::{ingest_corpus, Corpus, Layout, PageRecord, PredictionLine};
pub use lock::RunLock;
