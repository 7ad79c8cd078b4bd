//! Character and word error rates under normalization profiles, plus
//! page-level aggregation.

use serde::{Deserialize, Serialize};

use crate::align::{char_edit_distance, edit_distance};
use crate::error::{Error, Result};
use crate::textnorm::{normalize_page, tokenize_words, NormProfile};

/// Mean/median of per-page rates.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MetricSummary {
    pub mean: f64,
    pub median: f64,
    pub n_pages: usize,
}

/// Character error rate: edit distance between the normalized strings
/// divided by the normalized reference length.
///
/// Errors if the reference is empty after normalization (rate undefined).
pub fn cer(reference: &str, hypothesis: &str, profile: &NormProfile) -> Result<f64> {
    let r = normalize_page(reference, profile);
    if r.is_empty() {
        return Err(Error::EmptyReference);
    }
    let h = normalize_page(hypothesis, profile);
    let dist = char_edit_distance(&r, &h);
    Ok(dist as f64 / r.chars().count() as f64)
}

/// Word error rate: edit distance over whitespace tokens of the normalized
/// strings divided by the reference token count.
pub fn wer(reference: &str, hypothesis: &str, profile: &NormProfile) -> Result<f64> {
    let r = normalize_page(reference, profile);
    let r_tokens = tokenize_words(&r);
    if r_tokens.is_empty() {
        return Err(Error::EmptyReference);
    }
    let h = normalize_page(hypothesis, profile);
    let h_tokens = tokenize_words(&h);
    let dist = edit_distance(&r_tokens, &h_tokens);
    Ok(dist as f64 / r_tokens.len() as f64)
}

/// Median of a non-empty slice: the middle element for odd lengths, the
/// midpoint of the two middle elements for even lengths.
pub fn median(values: &[f64]) -> Option<f64> {
    if values.is_empty() {
        return None;
    }
    let mut sorted = values.to_vec();
    sorted.sort_by(|a, b| a.partial_cmp(b).expect("rates must not be NaN"));
    let n = sorted.len();
    Some(if n % 2 == 1 {
        sorted[n / 2]
    } else {
        (sorted[n / 2 - 1] + sorted[n / 2]) / 2.0
    })
}

/// Arithmetic mean and median of per-page rates.
pub fn summarize(per_page: &[f64]) -> Result<MetricSummary> {
    if per_page.is_empty() {
        return Err(Error::EmptySummary);
    }
    let mean = per_page.iter().sum::<f64>() / per_page.len() as f64;
    Ok(MetricSummary {
        mean,
        median: median(per_page).expect("non-empty"),
        n_pages: per_page.len(),
    })
}
