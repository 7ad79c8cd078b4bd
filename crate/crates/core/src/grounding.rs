//! Token-level image-gain attribution from exported token logs.
//!
//! The input is a line-delimited JSON log, one record per emitted token:
//! `{page_id, token_index, token_text, char_start, char_end, logp_cond,
//! logp_free, top1_prob, entropy}`. Spans are char offsets into the
//! prediction (Unicode scalar values, end exclusive) and must tile it
//! without overlap, so the prediction text is reconstructible from the log
//! alone. This decouples the analysis from any inference stack.
//!
//! Each prediction character is labeled against the ground truth by the
//! block matcher in [`crate::align`]; a token inherits its characters'
//! dominant label (ties break toward the more severe label). Within-Greek
//! substitutions are subtyped as perceptual, cross-script, or lexical, and
//! summaries report the median gain per class over within-Greek records
//! only.

use std::collections::BTreeMap;
use std::io::BufRead;

use serde::{Deserialize, Serialize};

use crate::align::{char_opcodes, BlockOp};
use crate::error::{Error, Result};
use crate::metrics::median;
use crate::taxonomy::{is_greek_letter, is_latin_letter};
use crate::textnorm::bare_letter_form;

/// One line of the token-log file.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TokenLogRecord {
    pub page_id: String,
    pub token_index: usize,
    pub token_text: String,
    pub char_start: usize,
    pub char_end: usize,
    pub logp_cond: f64,
    pub logp_free: f64,
    pub top1_prob: f64,
    pub entropy: f64,
}

/// Label a token inherits from its characters.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TokenLabel {
    Correct,
    Substitution,
    Overgeneration,
}

/// Substitution subtype against the Greek ground truth it replaces.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SubstitutionSubtype {
    Perceptual,
    CrossScript,
    Lexical,
}

/// One emitted token with its gain, label, and subtype.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TokenGainRecord {
    pub token_index: usize,
    pub token_text: String,
    pub logp_cond: f64,
    pub logp_free: f64,
    pub gain: f64,
    pub top1_prob: f64,
    pub entropy: f64,
    pub label: TokenLabel,
    pub subtype: Option<SubstitutionSubtype>,
    pub within_greek: bool,
    /// False when a logged value is non-finite or outside its range
    /// (log-probabilities must be <= 0, top-1 probability in [0,1],
    /// entropy >= 0); such records are flagged and excluded from summaries
    /// rather than failing the page.
    pub valid: bool,
}

/// Token class used in gain summaries.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum GainClass {
    Correct,
    Perceptual,
    CrossScript,
    Lexical,
}

impl GainClass {
    pub fn as_str(&self) -> &'static str {
        match self {
            GainClass::Correct => "correct",
            GainClass::Perceptual => "perceptual",
            GainClass::CrossScript => "cross_script",
            GainClass::Lexical => "lexical",
        }
    }
}

/// Median gain and count for one class.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ClassSummary {
    pub median_gain: f64,
    pub count: usize,
}

/// Per-class medians over within-Greek records. Empty classes are absent,
/// not zero.
#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct GainSummary {
    pub classes: BTreeMap<GainClass, ClassSummary>,
}

/// The log-probability the image adds to an emitted token; positive means
/// image-supported.
pub fn compute_gain(logp_cond: f64, logp_free: f64) -> f64 {
    logp_cond - logp_free
}

/// Label every token by the dominant label of its characters. `spans` are
/// half-open char ranges that must tile `pred` without overlap. Ties break
/// toward the more severe label (Overgeneration > Substitution > Correct).
pub fn label_tokens(gt: &str, pred: &str, spans: &[(usize, usize)]) -> Result<Vec<TokenLabel>> {
    let pred_len = pred.chars().count();
    validate_spans(spans, pred_len)?;
    let char_labels = crate::align::align_chars(gt, pred);
    Ok(spans
        .iter()
        .map(|&(start, end)| dominant_label(&char_labels[start..end]))
        .collect())
}

fn validate_spans(spans: &[(usize, usize)], pred_len: usize) -> Result<()> {
    let mut cursor = 0;
    for &(start, end) in spans {
        if start != cursor || end < start {
            return Err(Error::SpanTiling(format!(
                "span {start}..{end} does not continue at {cursor}"
            )));
        }
        cursor = end;
    }
    if cursor != pred_len {
        return Err(Error::SpanTiling(format!(
            "spans cover {cursor} of {pred_len} characters"
        )));
    }
    Ok(())
}

fn dominant_label(labels: &[crate::align::CharLabel]) -> TokenLabel {
    let mut correct = 0usize;
    let mut substitution = 0usize;
    let mut overgeneration = 0usize;
    for l in labels {
        match l.label {
            crate::align::CharLabelKind::Correct => correct += 1,
            crate::align::CharLabelKind::Substitution => substitution += 1,
            crate::align::CharLabelKind::Overgeneration => overgeneration += 1,
        }
    }
    // Majority with ties broken by severity.
    if overgeneration >= substitution && overgeneration >= correct && overgeneration > 0 {
        TokenLabel::Overgeneration
    } else if substitution >= correct && substitution > 0 {
        TokenLabel::Substitution
    } else {
        TokenLabel::Correct
    }
}

/// Subtype a within-Greek substitution: Perceptual when only diacritics,
/// case, or final sigma differ; CrossScript when Latin letters replace
/// Greek; Lexical otherwise.
pub fn subtype_substitution(gt_span: &str, pred_span: &str) -> SubstitutionSubtype {
    if bare_letter_form(gt_span) == bare_letter_form(pred_span) {
        SubstitutionSubtype::Perceptual
    } else if pred_span.chars().any(is_latin_letter) {
        SubstitutionSubtype::CrossScript
    } else {
        SubstitutionSubtype::Lexical
    }
}

/// Analyze one page: reconstruct the prediction from the log, label and
/// subtype every token, and attach gains.
///
/// The ground-truth span of a token is taken from the block alignment:
/// equal blocks map offsets exactly, replace blocks contribute their whole
/// reference side. Tokens whose ground-truth span has no Greek letter are
/// outside the within-Greek restriction.
pub fn analyze_page(gt: &str, log: &[TokenLogRecord]) -> Result<Vec<TokenGainRecord>> {
    let mut records: Vec<&TokenLogRecord> = log.iter().collect();
    records.sort_by_key(|r| r.token_index);

    let mut pred = String::new();
    let mut spans = Vec::with_capacity(records.len());
    let mut cursor = 0;
    for r in &records {
        let token_chars = r.token_text.chars().count();
        if r.char_start != cursor || r.char_end != cursor + token_chars {
            return Err(Error::SpanTiling(format!(
                "token {} claims {}..{} but the running offset is {} (+{} chars)",
                r.token_index, r.char_start, r.char_end, cursor, token_chars
            )));
        }
        pred.push_str(&r.token_text);
        spans.push((r.char_start, r.char_end));
        cursor = r.char_end;
    }

    let labels = label_tokens(gt, &pred, &spans)?;
    let opcodes = char_opcodes(gt, &pred);
    let gt_chars: Vec<char> = gt.chars().collect();

    Ok(records
        .iter()
        .zip(labels)
        .map(|(r, label)| {
            let gt_span = gt_span_for(&opcodes, &gt_chars, r.char_start, r.char_end);
            let within_greek = gt_span.chars().any(is_greek_letter);
            let subtype = if label == TokenLabel::Substitution && within_greek {
                Some(subtype_substitution(&gt_span, &r.token_text))
            } else {
                None
            };
            let valid = r.logp_cond.is_finite()
                && r.logp_free.is_finite()
                && r.logp_cond <= 0.0
                && r.logp_free <= 0.0
                && (0.0..=1.0).contains(&r.top1_prob)
                && r.entropy.is_finite()
                && r.entropy >= 0.0;
            TokenGainRecord {
                token_index: r.token_index,
                token_text: r.token_text.clone(),
                logp_cond: r.logp_cond,
                logp_free: r.logp_free,
                gain: compute_gain(r.logp_cond, r.logp_free),
                top1_prob: r.top1_prob,
                entropy: r.entropy,
                label,
                subtype,
                within_greek,
                valid,
            }
        })
        .collect())
}

/// Reference characters aligned to the hypothesis range `[start, end)`.
fn gt_span_for(
    opcodes: &[crate::align::Opcode],
    gt_chars: &[char],
    start: usize,
    end: usize,
) -> String {
    let mut out = String::new();
    for code in opcodes {
        if code.hyp_end <= start || code.hyp_start >= end {
            continue;
        }
        match code.op {
            BlockOp::Equal => {
                let lo = start.max(code.hyp_start);
                let hi = end.min(code.hyp_end);
                let ref_lo = code.ref_start + (lo - code.hyp_start);
                let ref_hi = code.ref_start + (hi - code.hyp_start);
                out.extend(&gt_chars[ref_lo..ref_hi]);
            }
            BlockOp::Replace => {
                out.extend(&gt_chars[code.ref_start..code.ref_end]);
            }
            BlockOp::Insert | BlockOp::Delete => {}
        }
    }
    out
}

/// Class of a record for summarization, if any.
pub fn gain_class(record: &TokenGainRecord) -> Option<GainClass> {
    if !record.within_greek || !record.valid {
        return None;
    }
    match record.label {
        TokenLabel::Correct => Some(GainClass::Correct),
        TokenLabel::Substitution => record.subtype.map(|s| match s {
            SubstitutionSubtype::Perceptual => GainClass::Perceptual,
            SubstitutionSubtype::CrossScript => GainClass::CrossScript,
            SubstitutionSubtype::Lexical => GainClass::Lexical,
        }),
        TokenLabel::Overgeneration => None,
    }
}

/// Median gain per class over within-Greek records. Classes with no records
/// are absent from the result.
pub fn gain_summary(records: &[TokenGainRecord]) -> GainSummary {
    let mut by_class: BTreeMap<GainClass, Vec<f64>> = BTreeMap::new();
    for r in records {
        if let Some(class) = gain_class(r) {
            by_class.entry(class).or_default().push(r.gain);
        }
    }
    GainSummary {
        classes: by_class
            .into_iter()
            .map(|(class, gains)| {
                let m = median(&gains).expect("class has at least one record");
                (class, ClassSummary { median_gain: m, count: gains.len() })
            })
            .collect(),
    }
}

/// Per-class calibration medians of the image-conditioned distribution.
/// Top-1 probability and entropy are carried through the pipeline and
/// summarized here; they drive no classification.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CalibrationSummary {
    pub median_top1_prob: f64,
    pub median_entropy: f64,
    pub count: usize,
}

/// Median top-1 probability and entropy per class over within-Greek
/// records.
pub fn calibration_summary(
    records: &[TokenGainRecord],
) -> BTreeMap<GainClass, CalibrationSummary> {
    let mut by_class: BTreeMap<GainClass, (Vec<f64>, Vec<f64>)> = BTreeMap::new();
    for r in records {
        if let Some(class) = gain_class(r) {
            let (top1, entropy) = by_class.entry(class).or_default();
            top1.push(r.top1_prob);
            entropy.push(r.entropy);
        }
    }
    by_class
        .into_iter()
        .map(|(class, (top1, entropy))| {
            let summary = CalibrationSummary {
                median_top1_prob: median(&top1).expect("non-empty class"),
                median_entropy: median(&entropy).expect("non-empty class"),
                count: top1.len(),
            };
            (class, summary)
        })
        .collect()
}

/// Read a line-delimited JSON token log, reporting the line number on
/// malformed input.
pub fn read_token_log<R: BufRead>(reader: R) -> Result<Vec<TokenLogRecord>> {
    let mut records = Vec::new();
    for (i, line) in reader.lines().enumerate() {
        let line = line?;
        if line.trim().is_empty() {
            continue;
        }
        let record: TokenLogRecord =
            serde_json::from_str(&line).map_err(|e| Error::JsonLine {
                line: i + 1,
                path: None,
                message: e.to_string(),
            })?;
        records.push(record);
    }
    Ok(records)
}
