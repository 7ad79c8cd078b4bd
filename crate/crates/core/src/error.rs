//! Crate-wide error type.

use thiserror::Error;

#[derive(Debug, Error)]
pub enum Error {
    #[error("reference is empty after normalization; error rate undefined")]
    EmptyReference,

    #[error("ground-truth word count must be positive")]
    ZeroGtWords,

    #[error("cannot summarize an empty sequence of rates")]
    EmptySummary,

    #[error("match operations are not classifiable")]
    MatchNotClassifiable,

    #[error("operation not found in the supplied context")]
    OpNotInContext,

    #[error("invalid UTF-8 at byte offset {offset}{}", path.as_deref().map(|p| format!(" in {p}")).unwrap_or_default())]
    Encoding { offset: usize, path: Option<String> },

    #[error("token spans do not tile the prediction: {0}")]
    SpanTiling(String),

    #[error("logit vector has {logits} entries but mask has {mask}")]
    MaskLength { logits: usize, mask: usize },

    #[error("every vocabulary entry is masked; no token can be emitted")]
    AllMasked,

    #[error("reference length must be positive")]
    ZeroReferenceLength,

    #[error("all paired differences are zero; the signed-rank test is undefined")]
    AllDiffsZero,

    #[error("page sets differ: {0}")]
    PageKeyMismatch(String),

    #[error("duplicate page id {0}")]
    DuplicatePage(String),

    #[error("duplicate prediction for page {page}, system {system}")]
    DuplicatePrediction { page: String, system: String },

    #[error("ground-truth text for page {0} is empty")]
    EmptyGroundTruth(String),

    #[error("invalid JSON on line {line}{}: {message}", path.as_deref().map(|p| format!(" of {p}")).unwrap_or_default())]
    JsonLine {
        line: usize,
        path: Option<String>,
        message: String,
    },

    #[error("intervention {intervention}: baseline and treated page sets differ: {detail}")]
    UnmatchedBaseline {
        intervention: String,
        detail: String,
    },

    #[error("missing required input: {0}")]
    MissingInput(String),

    #[error("output directory is locked by another run: {0}")]
    OutputLocked(String),

    #[error("invalid configuration: {0}")]
    Config(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

pub type Result<T> = std::result::Result<T, Error>;
