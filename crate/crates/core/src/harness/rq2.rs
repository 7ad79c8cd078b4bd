//! Perturbation-condition scoring: CER per condition and system against the
//! perturbed ground truth, with paired clean-vs-condition significance.

use std::collections::BTreeMap;
use std::fs;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::harness::corpus::{Corpus, Layout};
use crate::metrics::{cer, summarize};
use crate::stats::{delta_table, DeltaSummary, Direction};
use crate::textnorm::NormProfile;

/// Name of the unperturbed control condition.
pub const CLEAN_CONDITION: &str = "original";

/// Scores of one system under one condition, with the paired delta against
/// the clean condition (absent for the clean condition itself).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ConditionSystemScore {
    pub condition: String,
    pub system_id: String,
    pub n_pages: usize,
    pub mean_cer: f64,
    pub median_cer: f64,
    pub delta_vs_clean: Option<DeltaSummary>,
}

#[derive(Debug, Clone)]
pub struct Rq2Output {
    pub scores: Vec<ConditionSystemScore>,
}

/// Score every `(condition, system)` cell. Each condition carries its own
/// corpus whose ground truth is the perturbed text. Two-column pages are
/// excluded; paired deltas use the pages shared between the clean and the
/// treated condition. When `out_dir` is given, writes `rq2_scores.csv` and
/// the plottable `rq2_series.csv`.
pub fn run_rq2(
    conditions: &BTreeMap<String, Corpus>,
    profile: &NormProfile,
    out_dir: Option<&Path>,
) -> Result<Rq2Output> {
    let clean = conditions
        .get(CLEAN_CONDITION)
        .ok_or_else(|| Error::MissingInput(format!("condition {CLEAN_CONDITION}")))?;

    let clean_rates = condition_rates(clean, profile)?;

    let mut scores = Vec::new();
    for (condition, corpus) in conditions {
        let rates = if condition == CLEAN_CONDITION {
            clean_rates.clone()
        } else {
            condition_rates(corpus, profile)?
        };
        for (system, pages) in &rates {
            let values: Vec<f64> = pages.values().copied().collect();
            let summary = summarize(&values)?;
            let delta_vs_clean = if condition == CLEAN_CONDITION {
                None
            } else {
                clean_rates.get(system).and_then(|clean_pages| {
                    let shared: Vec<&String> =
                        pages.keys().filter(|k| clean_pages.contains_key(*k)).collect();
                    if shared.is_empty() {
                        return None;
                    }
                    let base: BTreeMap<String, f64> = shared
                        .iter()
                        .map(|k| ((*k).clone(), clean_pages[*k]))
                        .collect();
                    let treat: BTreeMap<String, f64> =
                        shared.iter().map(|k| ((*k).clone(), pages[*k])).collect();
                    delta_table(&base, &treat, Direction::TreatedGreater).ok()
                })
            };
            scores.push(ConditionSystemScore {
                condition: condition.clone(),
                system_id: system.clone(),
                n_pages: pages.len(),
                mean_cer: summary.mean,
                median_cer: summary.median,
                delta_vs_clean,
            });
        }
    }

    let output = Rq2Output { scores };

    if let Some(dir) = out_dir {
        fs::create_dir_all(dir)?;
        let mut w = csv::Writer::from_path(dir.join("rq2_scores.csv"))?;
        w.write_record([
            "condition",
            "system_id",
            "n_pages",
            "mean_cer",
            "median_cer",
            "delta_median",
            "delta_mean",
            "p_value",
            "stars",
        ])?;
        for s in &output.scores {
            let (dm, da, p, stars) = match &s.delta_vs_clean {
                Some(d) => (
                    d.delta_median.to_string(),
                    d.delta_mean.to_string(),
                    d.p_value.to_string(),
                    d.stars.clone(),
                ),
                None => (String::new(), String::new(), String::new(), String::new()),
            };
            w.write_record([
                s.condition.as_str(),
                s.system_id.as_str(),
                &s.n_pages.to_string(),
                &s.mean_cer.to_string(),
                &s.median_cer.to_string(),
                &dm,
                &da,
                &p,
                &stars,
            ])?;
        }
        w.flush()?;

        // Figure series: proportional swap/shuffle points are connected,
        // the rest are isolated points.
        let mut w = csv::Writer::from_path(dir.join("rq2_series.csv"))?;
        w.write_record(["axis", "series", "p", "system_id", "condition", "mean_cer", "median_cer"])?;
        for s in &output.scores {
            let (axis, rest) = match s.condition.split_once('_') {
                Some((a, r)) if a == "test1" || a == "test2" => (a, r),
                _ => ("shared", s.condition.as_str()),
            };
            let (series, p) = if let Some(p) = rest.strip_prefix("swap_p") {
                ("swap", p)
            } else if let Some(p) = rest.strip_prefix("shuffle_p") {
                ("shuffle", p)
            } else {
                ("point", "")
            };
            w.write_record([
                axis,
                series,
                p,
                s.system_id.as_str(),
                s.condition.as_str(),
                &s.mean_cer.to_string(),
                &s.median_cer.to_string(),
            ])?;
        }
        w.flush()?;
    }

    Ok(output)
}

/// Per-system per-page CER for one condition, excluding two-column pages.
fn condition_rates(
    corpus: &Corpus,
    profile: &NormProfile,
) -> Result<BTreeMap<String, BTreeMap<String, f64>>> {
    let mut rates: BTreeMap<String, BTreeMap<String, f64>> = BTreeMap::new();
    for system in corpus.systems() {
        let mut pages = BTreeMap::new();
        for page in corpus.pages_with(&system) {
            if page.layout == Layout::TwoColumn {
                continue;
            }
            let rate = cer(&page.gt_text, &page.predictions[&system], profile)?;
            pages.insert(page.page_id.clone(), rate);
        }
        if !pages.is_empty() {
            rates.insert(system, pages);
        }
    }
    Ok(rates)
}
