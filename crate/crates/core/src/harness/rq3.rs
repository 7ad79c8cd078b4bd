//! Intervention delta tables: each intervention is scored against its own
//! matched baseline, plus abstention-aware reporting for length abstention.

use std::collections::BTreeMap;
use std::fs;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::harness::corpus::Corpus;
use crate::interventions::{length_abstain, Abstention};
use crate::metrics::{cer, median};
use crate::stats::{delta_table, DeltaSummary, Direction};
use crate::textnorm::NormProfile;

/// One (system, intervention) cell: treated predictions plus the matched
/// baseline from the same engine, both keyed by page id.
#[derive(Debug, Clone)]
pub struct Rq3Cell {
    pub system_id: String,
    pub intervention: String,
    pub baseline: BTreeMap<String, String>,
    pub treated: BTreeMap<String, String>,
}

/// Delta summary of one cell.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Rq3Row {
    pub system_id: String,
    pub intervention: String,
    pub n_pages: usize,
    pub baseline_median_cer: f64,
    pub treated_median_cer: f64,
    pub delta: DeltaSummary,
}

/// Score every cell. The baseline and treated page sets of a cell must
/// match exactly and every page must have ground truth; the helping
/// direction for the one-sided test is `TreatedLess` (intervention reduces
/// CER). When `out_dir` is given, writes `rq3_deltas.csv`.
pub fn run_rq3(
    corpus: &Corpus,
    cells: &[Rq3Cell],
    profile: &NormProfile,
    out_dir: Option<&Path>,
) -> Result<Vec<Rq3Row>> {
    let mut rows = Vec::new();
    for cell in cells {
        let missing_treated: Vec<&String> = cell
            .baseline
            .keys()
            .filter(|k| !cell.treated.contains_key(*k))
            .collect();
        let missing_baseline: Vec<&String> = cell
            .treated
            .keys()
            .filter(|k| !cell.baseline.contains_key(*k))
            .collect();
        if !missing_treated.is_empty() || !missing_baseline.is_empty() {
            return Err(Error::UnmatchedBaseline {
                intervention: cell.intervention.clone(),
                detail: format!(
                    "missing from treated: {missing_treated:?}; missing from baseline: {missing_baseline:?}"
                ),
            });
        }

        let mut base_rates = BTreeMap::new();
        let mut treat_rates = BTreeMap::new();
        for (page_id, base_text) in &cell.baseline {
            let page = corpus.page(page_id).ok_or_else(|| Error::UnmatchedBaseline {
                intervention: cell.intervention.clone(),
                detail: format!("page {page_id} has no ground truth"),
            })?;
            base_rates.insert(page_id.clone(), cer(&page.gt_text, base_text, profile)?);
            treat_rates.insert(
                page_id.clone(),
                cer(&page.gt_text, &cell.treated[page_id], profile)?,
            );
        }

        let delta = delta_table(&base_rates, &treat_rates, Direction::TreatedLess)?;
        let base_median = median(&base_rates.values().copied().collect::<Vec<f64>>()).unwrap_or(0.0);
        let treat_median =
            median(&treat_rates.values().copied().collect::<Vec<f64>>()).unwrap_or(0.0);
        rows.push(Rq3Row {
            system_id: cell.system_id.clone(),
            intervention: cell.intervention.clone(),
            n_pages: cell.baseline.len(),
            baseline_median_cer: base_median,
            treated_median_cer: treat_median,
            delta,
        });
    }

    if let Some(dir) = out_dir {
        fs::create_dir_all(dir)?;
        let mut w = csv::Writer::from_path(dir.join("rq3_deltas.csv"))?;
        w.write_record([
            "system_id",
            "intervention",
            "n_pages",
            "baseline_median_cer",
            "treated_median_cer",
            "delta_median",
            "delta_mean",
            "n_help",
            "n_tie",
            "n_hurt",
            "p_value",
            "stars",
        ])?;
        for r in &rows {
            w.write_record([
                r.system_id.as_str(),
                r.intervention.as_str(),
                &r.n_pages.to_string(),
                &r.baseline_median_cer.to_string(),
                &r.treated_median_cer.to_string(),
                &r.delta.delta_median.to_string(),
                &r.delta.delta_mean.to_string(),
                &r.delta.n_help.to_string(),
                &r.delta.n_tie.to_string(),
                &r.delta.n_hurt.to_string(),
                &r.delta.p_value.to_string(),
                &r.delta.stars,
            ])?;
        }
        w.flush()?;
    }

    Ok(rows)
}

/// Abstention-aware report for the length intervention.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AbstainReport {
    pub system_id: String,
    pub threshold: f64,
    pub n_pages: usize,
    pub n_abstained: usize,
    pub abstention_rate: f64,
    /// Median CER over the kept pages.
    pub kept_median_cer: f64,
    /// Median CER of the same predictions over all pages, for reference.
    pub overall_median_cer: f64,
}

/// Length ratios (prediction chars / reference chars) per page, in page-id
/// order.
pub fn length_ratios(
    corpus: &Corpus,
    predictions: &BTreeMap<String, String>,
) -> Result<Vec<f64>> {
    let mut ratios = Vec::new();
    for (page_id, text) in predictions {
        let page = corpus
            .page(page_id)
            .ok_or_else(|| Error::MissingInput(format!("ground truth for page {page_id}")))?;
        let ref_len = page.gt_text.chars().count();
        if ref_len == 0 {
            return Err(Error::ZeroReferenceLength);
        }
        ratios.push(text.chars().count() as f64 / ref_len as f64);
    }
    Ok(ratios)
}

/// Apply length abstention page by page and report kept-set medians and the
/// abstention rate.
pub fn run_length_abstain(
    corpus: &Corpus,
    system_id: &str,
    predictions: &BTreeMap<String, String>,
    threshold: f64,
    profile: &NormProfile,
) -> Result<AbstainReport> {
    let mut kept = Vec::new();
    let mut all = Vec::new();
    let mut n_abstained = 0;
    for (page_id, text) in predictions {
        let page = corpus
            .page(page_id)
            .ok_or_else(|| Error::MissingInput(format!("ground truth for page {page_id}")))?;
        let rate = cer(&page.gt_text, text, profile)?;
        all.push(rate);
        let decision = length_abstain(
            text.chars().count(),
            page.gt_text.chars().count(),
            threshold,
        )?;
        match decision {
            Abstention::Keep => kept.push(rate),
            Abstention::Abstain => n_abstained += 1,
        }
    }
    let n_pages = predictions.len();
    Ok(AbstainReport {
        system_id: system_id.to_string(),
        threshold,
        n_pages,
        n_abstained,
        abstention_rate: if n_pages == 0 { 0.0 } else { n_abstained as f64 / n_pages as f64 },
        kept_median_cer: median(&kept).unwrap_or(f64::NAN),
        overall_median_cer: median(&all).unwrap_or(f64::NAN),
    })
}
