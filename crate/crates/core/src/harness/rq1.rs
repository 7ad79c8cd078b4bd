//! Aggregate error metrics and the word-level error taxonomy over a corpus.

use std::fs;
use std::path::Path;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::Result;
use crate::harness::corpus::Corpus;
use crate::metrics::{cer, summarize, wer, MetricSummary};
use crate::taxonomy::{
    category_shares, write_error_csv, CategoryShare, Classifier, ErrorRecord,
};
use crate::textnorm::{normalize_page, tokenize_words, NormProfile};

/// CER/WER summary of one system under one profile.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SystemProfileMetrics {
    pub system_id: String,
    pub profile: String,
    pub cer: MetricSummary,
    pub wer: MetricSummary,
}

/// Per-page rates of one system under one profile.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PageRates {
    pub page_id: String,
    pub system_id: String,
    pub profile: String,
    pub cer: f64,
    pub wer: f64,
}

/// Category composition of one system's errors.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SystemCategoryShares {
    pub system_id: String,
    pub gt_words: usize,
    pub shares: Vec<CategoryShare>,
}

/// Everything the aggregate analysis produces.
#[derive(Debug, Clone)]
pub struct Rq1Output {
    pub metrics: Vec<SystemProfileMetrics>,
    pub per_page: Vec<PageRates>,
    pub records: Vec<ErrorRecord>,
    pub shares: Vec<SystemCategoryShares>,
}

/// Score every system under the raw and no-diac profiles, classify every
/// mismatch, and aggregate category shares. When `out_dir` is given, writes
/// `rq1_metrics.json`, `rq1_per_page.csv`, `rq1_errors.csv`, and
/// `rq1_category_shares.csv` there.
pub fn run_rq1(
    corpus: &Corpus,
    classifier: &Classifier,
    out_dir: Option<&Path>,
) -> Result<Rq1Output> {
    let profiles = [("raw", NormProfile::raw()), ("no-diac", NormProfile::no_diac())];
    let taxonomy_profile = NormProfile::raw();

    // Page-level work in parallel, aggregation in deterministic order.
    let mut per_page: Vec<PageRates> = Vec::new();
    let mut records: Vec<ErrorRecord> = Vec::new();
    let systems: Vec<String> = corpus.systems().into_iter().collect();

    let page_results: Result<Vec<(Vec<PageRates>, Vec<ErrorRecord>)>> = systems
        .par_iter()
        .map(|system| {
            let mut rates = Vec::new();
            let mut errs = Vec::new();
            for page in corpus.pages_with(system) {
                let hyp = &page.predictions[system];
                for (name, profile) in &profiles {
                    rates.push(PageRates {
                        page_id: page.page_id.clone(),
                        system_id: system.clone(),
                        profile: name.to_string(),
                        cer: cer(&page.gt_text, hyp, profile)?,
                        wer: wer(&page.gt_text, hyp, profile)?,
                    });
                }
                let gt_norm = normalize_page(&page.gt_text, &taxonomy_profile);
                let hyp_norm = normalize_page(hyp, &taxonomy_profile);
                let ops = crate::align::align_words(
                    &tokenize_words(&gt_norm),
                    &tokenize_words(&hyp_norm),
                );
                errs.extend(classifier.classify_page(&ops, &page.page_id, system));
            }
            Ok((rates, errs))
        })
        .collect();
    for (rates, errs) in page_results? {
        per_page.extend(rates);
        records.extend(errs);
    }
    per_page.sort_by(|a, b| {
        (&a.system_id, &a.page_id, &a.profile).cmp(&(&b.system_id, &b.page_id, &b.profile))
    });
    records.sort_by(|a, b| {
        (&a.system_id, &a.page_id, a.op.ref_index, a.op.hyp_index).cmp(&(
            &b.system_id,
            &b.page_id,
            b.op.ref_index,
            b.op.hyp_index,
        ))
    });

    let mut metrics = Vec::new();
    for system in &systems {
        for (name, _) in &profiles {
            let rates: Vec<&PageRates> = per_page
                .iter()
                .filter(|r| &r.system_id == system && r.profile == *name)
                .collect();
            let cers: Vec<f64> = rates.iter().map(|r| r.cer).collect();
            let wers: Vec<f64> = rates.iter().map(|r| r.wer).collect();
            metrics.push(SystemProfileMetrics {
                system_id: system.clone(),
                profile: name.to_string(),
                cer: summarize(&cers)?,
                wer: summarize(&wers)?,
            });
        }
    }

    let mut shares = Vec::new();
    for system in &systems {
        let gt_words: usize = corpus
            .pages_with(system)
            .map(|p| {
                let norm = normalize_page(&p.gt_text, &taxonomy_profile);
                tokenize_words(&norm).len()
            })
            .sum();
        let sys_records: Vec<ErrorRecord> = records
            .iter()
            .filter(|r| &r.system_id == system)
            .cloned()
            .collect();
        shares.push(SystemCategoryShares {
            system_id: system.clone(),
            gt_words,
            shares: category_shares(&sys_records, gt_words)?,
        });
    }

    let output = Rq1Output { metrics, per_page, records, shares };

    if let Some(dir) = out_dir {
        fs::create_dir_all(dir)?;
        let file = fs::File::create(dir.join("rq1_metrics.json"))?;
        serde_json::to_writer_pretty(file, &output.metrics)?;

        let mut w = csv::Writer::from_path(dir.join("rq1_per_page.csv"))?;
        w.write_record(["page_id", "system_id", "profile", "cer", "wer"])?;
        for r in &output.per_page {
            w.write_record([
                r.page_id.as_str(),
                r.system_id.as_str(),
                r.profile.as_str(),
                &r.cer.to_string(),
                &r.wer.to_string(),
            ])?;
        }
        w.flush()?;

        let file = fs::File::create(dir.join("rq1_errors.csv"))?;
        write_error_csv(&output.records, file)?;

        let mut w = csv::Writer::from_path(dir.join("rq1_category_shares.csv"))?;
        w.write_record(["system_id", "gt_words", "category", "count", "share", "rate_per_1000"])?;
        for s in &output.shares {
            for c in &s.shares {
                w.write_record([
                    s.system_id.as_str(),
                    &s.gt_words.to_string(),
                    c.kind.as_str(),
                    &c.count.to_string(),
                    &c.share.to_string(),
                    &c.rate_per_1000.to_string(),
                ])?;
            }
        }
        w.flush()?;
    }

    Ok(output)
}
