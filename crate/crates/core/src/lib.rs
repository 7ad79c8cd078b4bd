//! # ocrprobe
//!
//! Grounding analysis toolkit for OCR transcriptions of polytonic Greek
//! critical editions. The library operates on text transcriptions and
//! exported logit logs rather than on live models, so every analysis is
//! replayable and deterministic.
//!
//! ## Modules
//!
//! - [`textnorm`] — Unicode normalization pipeline (canonical form, markup
//!   stripping, hyphenation rejoin, elision unification, bracket isolation,
//!   digit-letter splitting, diacritic/case/space handling).
//! - [`align`] — edit-distance alignment at word and character granularity.
//! - [`taxonomy`] — classification of every non-match alignment operation
//!   into eight mutually exclusive error categories.
//! - [`metrics`] — CER/WER under normalization profiles plus aggregation.
//! - [`perturb`] — seeded counterfactual text perturbations on the word and
//!   character axes; the perturbed output is the new ground truth.
//! - [`grounding`] — token-level image-gain attribution from logged
//!   conditional and image-free log-probabilities.
//! - [`interventions`] — script-mask construction, length abstention, and
//!   the VCD/M3ID contrastive logit transforms.
//! - [`stats`] — paired one-sided Wilcoxon signed-rank tests, star coding,
//!   and intervention delta tables.
//! - [`harness`] — corpus ingestion, analysis orchestration, and report
//!   emission backing the CLI.

pub mod align;
pub mod error;
pub mod grounding;
pub mod harness;
pub mod interventions;
pub mod metrics;
pub mod perturb;
pub mod stats;
pub mod taxonomy;
pub mod textnorm;

pub use error::{Error, Result};
