//! Algorithmic cores of the decode-time interventions: script-mask
//! construction, length abstention, and the VCD/M3ID contrastive logit
//! transforms. Everything here is a pure transform over exported vectors so
//! interventions are replayable and testable; a decoding loop using them is
//! a thin consumer.

use std::collections::HashSet;
use std::io::{BufRead, Read, Write};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// One vocabulary entry: the decoded surface string of a token id. Special
/// tokens (EOS, role markers) are always allowed by the script mask so
/// generation can terminate.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct VocabEntry {
    pub token_id: usize,
    pub decoded: String,
    #[serde(default)]
    pub is_special: bool,
}

/// Contrastive decoding parameters. `alpha` is the contrast strength,
/// `beta` the VCD plausibility cutoff, `gamma` the M3ID ramp rate.
/// `noise_step` is metadata only: the noised-image stream is produced
/// externally, and the step used to produce it is recorded here for
/// provenance without driving any computation.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ContrastiveParams {
    pub alpha: f64,
    pub beta: f64,
    pub gamma: f64,
    #[serde(default)]
    pub repetition_penalty: Option<f64>,
    #[serde(default)]
    pub no_repeat_ngram: Option<usize>,
    #[serde(default)]
    pub noise_step: Option<(u32, u32)>,
}

impl ContrastiveParams {
    /// Reference VCD setting: alpha 1.0, plausibility beta 0.1, noised
    /// stream produced at step 500 of 1000.
    pub fn vcd_default() -> Self {
        ContrastiveParams {
            alpha: 1.0,
            beta: 0.1,
            gamma: 0.0,
            repetition_penalty: None,
            no_repeat_ngram: None,
            noise_step: Some((500, 1000)),
        }
    }

    /// Reference M3ID setting: ceiling alpha 0.5, ramp gamma 0.02, with a
    /// no-repeat-3-gram constraint and a mild 1.15 repetition penalty.
    pub fn m3id_default() -> Self {
        ContrastiveParams {
            alpha: 0.5,
            beta: 1.0,
            gamma: 0.02,
            repetition_penalty: Some(1.15),
            no_repeat_ngram: Some(3),
            noise_step: None,
        }
    }
}

/// Characters admitted by the script mask besides the Greek ranges and
/// whitespace: period, comma, ano teleia, Greek question mark, apostrophes,
/// brackets, dashes. Config-visible.
pub const DEFAULT_MASK_PUNCTUATION: [char; 15] = [
    '.', ',', '\u{0387}', '\u{037E}', '\'', '\u{2019}', '\u{02BC}', '\u{1FBD}', '(', ')', '[',
    ']', '-', '\u{2013}', '\u{2014}',
];

/// Whether a character falls in the Greek (U+0370–03FF) or Greek Extended
/// (U+1F00–1FFF) Unicode ranges.
pub fn in_greek_ranges(c: char) -> bool {
    ('\u{0370}'..='\u{03FF}').contains(&c) || ('\u{1F00}'..='\u{1FFF}').contains(&c)
}

/// Build the script-restriction mask over a vocabulary. Entry `i` of the
/// result corresponds to `vocab[i]`.
///
/// A token is allowed iff it is special, or every character of its decoded
/// string is in the Greek ranges, the configured punctuation set, or
/// whitespace. Digits are excluded outright. The mask operates on decoded
/// token strings, so byte-level BPE pieces that realize Greek characters
/// are admitted by their decoded form.
pub fn build_script_mask(vocab: &[VocabEntry], punctuation: &[char]) -> Vec<bool> {
    let punct: HashSet<char> = punctuation.iter().copied().collect();
    vocab
        .iter()
        .map(|entry| {
            entry.is_special
                || entry.decoded.chars().all(|c| {
                    !c.is_numeric()
                        && (in_greek_ranges(c) || c.is_whitespace() || punct.contains(&c))
                })
        })
        .collect()
}

/// Set masked entries to negative infinity, leaving allowed entries
/// unchanged. Errors when the lengths differ or when nothing is allowed.
pub fn apply_mask(logits: &[f64], mask: &[bool]) -> Result<Vec<f64>> {
    if logits.len() != mask.len() {
        return Err(Error::MaskLength { logits: logits.len(), mask: mask.len() });
    }
    if !mask.iter().any(|&m| m) {
        return Err(Error::AllMasked);
    }
    Ok(logits
        .iter()
        .zip(mask)
        .map(|(&l, &m)| if m { l } else { f64::NEG_INFINITY })
        .collect())
}

/// Keep/abstain decision for a page.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Abstention {
    Keep,
    Abstain,
}

/// Abstain when the prediction-to-reference length ratio exceeds the
/// threshold.
pub fn length_abstain(pred_len: usize, ref_len: usize, threshold: f64) -> Result<Abstention> {
    if ref_len == 0 {
        return Err(Error::ZeroReferenceLength);
    }
    if pred_len as f64 / ref_len as f64 > threshold {
        Ok(Abstention::Abstain)
    } else {
        Ok(Abstention::Keep)
    }
}

/// Sweep the abstention threshold so that the abstention rate over the
/// given length ratios is as close as possible to `target_rate`. Candidate
/// thresholds are the observed ratios; ties prefer the larger threshold
/// (fewer abstentions).
pub fn calibrate_abstention_threshold(ratios: &[f64], target_rate: f64) -> f64 {
    let mut candidates: Vec<f64> = ratios.to_vec();
    candidates.sort_by(|a, b| a.partial_cmp(b).expect("ratios are finite"));
    candidates.dedup();
    let n = ratios.len().max(1) as f64;
    let mut best = f64::INFINITY;
    let mut best_gap = f64::INFINITY;
    for &t in &candidates {
        let rate = ratios.iter().filter(|&&r| r > t).count() as f64 / n;
        let gap = (rate - target_rate).abs();
        if gap < best_gap || (gap == best_gap && t > best) {
            best_gap = gap;
            best = t;
        }
    }
    if best.is_infinite() {
        1.5
    } else {
        best
    }
}

/// Visual contrastive combination of clean-image and noised-image logits.
///
/// The adaptive plausibility constraint keeps only tokens whose clean
/// probability is at least `beta` times the clean maximum (equivalently
/// `l >= max_l + ln beta`, so no softmax is required); within the candidate
/// set the score is `(1+alpha)*l_clean - alpha*l_noisy`, everything else is
/// masked out. The candidate set always contains the clean argmax.
pub fn vcd_combine(l_clean: &[f64], l_noisy: &[f64], alpha: f64, beta: f64) -> Vec<f64> {
    assert_eq!(l_clean.len(), l_noisy.len(), "logit vectors must have equal length");
    assert!(beta > 0.0 && beta <= 1.0, "beta must be in (0,1]");
    let max = l_clean.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let cutoff = max + beta.ln();
    l_clean
        .iter()
        .zip(l_noisy)
        .map(|(&c, &n)| {
            if c >= cutoff {
                (1.0 + alpha) * c - alpha * n
            } else {
                f64::NEG_INFINITY
            }
        })
        .collect()
}

/// M3ID contrast weight at step `t`: `min(alpha, e^(gamma*t) - 1)`. Zero at
/// t = 0, nondecreasing, capped at `alpha`.
pub fn m3id_weight(t: usize, alpha: f64, gamma: f64) -> f64 {
    (gamma * t as f64).exp_m1().min(alpha)
}

/// Image-free contrastive combination: `(1+w_t)*l_image - w_t*l_text` with
/// the ramped weight from [`m3id_weight`]. The optional no-repeat-n-gram
/// and repetition-penalty adjustments are separate post-filters
/// ([`apply_no_repeat_ngram`], [`apply_repetition_penalty`]) applied after
/// the contrast.
pub fn m3id_combine(
    l_image: &[f64],
    l_text: &[f64],
    t: usize,
    params: &ContrastiveParams,
) -> Vec<f64> {
    assert_eq!(l_image.len(), l_text.len(), "logit vectors must have equal length");
    let w = m3id_weight(t, params.alpha, params.gamma);
    l_image
        .iter()
        .zip(l_text)
        .map(|(&img, &txt)| (1.0 + w) * img - w * txt)
        .collect()
}

/// Mask every token that would complete an n-gram already present in the
/// emitted history.
pub fn apply_no_repeat_ngram(scores: &mut [f64], history: &[usize], n: usize) {
    if n == 0 || history.len() + 1 < n {
        return;
    }
    let prefix = &history[history.len() - (n - 1)..];
    for window in history.windows(n) {
        if &window[..n - 1] == prefix {
            let banned = window[n - 1];
            if banned < scores.len() {
                scores[banned] = f64::NEG_INFINITY;
            }
        }
    }
}

/// Standard repetition penalty: scores of tokens already emitted are divided
/// by the penalty when positive and multiplied when negative.
pub fn apply_repetition_penalty(scores: &mut [f64], history: &[usize], penalty: f64) {
    let seen: HashSet<usize> = history.iter().copied().collect();
    for id in seen {
        if let Some(s) = scores.get_mut(id) {
            if *s > 0.0 {
                *s /= penalty;
            } else {
                *s *= penalty;
            }
        }
    }
}

/// Read a line-delimited JSON vocabulary file
/// (`{"token_id":..,"decoded":..,"is_special":..}` per line).
pub fn read_vocab<R: BufRead>(reader: R) -> Result<Vec<VocabEntry>> {
    let mut entries = Vec::new();
    for (i, line) in reader.lines().enumerate() {
        let line = line?;
        if line.trim().is_empty() {
            continue;
        }
        let entry: VocabEntry = serde_json::from_str(&line).map_err(|e| Error::JsonLine {
            line: i + 1,
            path: None,
            message: e.to_string(),
        })?;
        entries.push(entry);
    }
    Ok(entries)
}

/// One step of a logit replay: the primary stream (clean image / image
/// conditioned) and the contrast stream (noised image / image free).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ReplayStep {
    pub step: usize,
    pub primary: Vec<f64>,
    pub contrast: Vec<f64>,
}

/// Contrastive method selector for replay.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ContrastMethod {
    Vcd,
    M3id,
}

/// Result of replaying one step: the argmax after the transform and its
/// score.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ReplayChoice {
    pub step: usize,
    pub token_id: usize,
    pub score: f64,
}

/// Replay exported per-step logit pairs through a contrastive transform,
/// with an optional script mask and the configured post-filters. Greedy
/// choices feed the history used by the no-repeat and repetition filters.
pub fn contrast_replay(
    steps: &[ReplayStep],
    method: ContrastMethod,
    params: &ContrastiveParams,
    mask: Option<&[bool]>,
) -> Result<Vec<ReplayChoice>> {
    let mut history: Vec<usize> = Vec::new();
    let mut choices = Vec::new();
    for step in steps {
        let mut scores = match method {
            ContrastMethod::Vcd => {
                vcd_combine(&step.primary, &step.contrast, params.alpha, params.beta)
            }
            ContrastMethod::M3id => m3id_combine(&step.primary, &step.contrast, step.step, params),
        };
        if let Some(mask) = mask {
            scores = apply_mask(&scores, mask)?;
        }
        if let Some(n) = params.no_repeat_ngram {
            apply_no_repeat_ngram(&mut scores, &history, n);
        }
        if let Some(penalty) = params.repetition_penalty {
            apply_repetition_penalty(&mut scores, &history, penalty);
        }
        let (token_id, score) = argmax(&scores).ok_or(Error::AllMasked)?;
        history.push(token_id);
        choices.push(ReplayChoice { step: step.step, token_id, score });
    }
    Ok(choices)
}

/// Read a line-delimited JSON replay file (one [`ReplayStep`] per line).
pub fn read_replay<R: BufRead>(reader: R) -> Result<Vec<ReplayStep>> {
    let mut steps = Vec::new();
    for (i, line) in reader.lines().enumerate() {
        let line = line?;
        if line.trim().is_empty() {
            continue;
        }
        let step: ReplayStep = serde_json::from_str(&line).map_err(|e| Error::JsonLine {
            line: i + 1,
            path: None,
            message: e.to_string(),
        })?;
        steps.push(step);
    }
    Ok(steps)
}

fn argmax(scores: &[f64]) -> Option<(usize, f64)> {
    let mut best: Option<(usize, f64)> = None;
    for (i, &s) in scores.iter().enumerate() {
        if s == f64::NEG_INFINITY {
            continue;
        }
        match best {
            Some((_, b)) if s <= b => {}
            _ => best = Some((i, s)),
        }
    }
    best
}

/// Write the mask as a little-endian u64 length followed by LSB-first
/// packed bits.
pub fn write_mask_bits<W: Write>(mask: &[bool], mut writer: W) -> Result<()> {
    writer.write_all(&(mask.len() as u64).to_le_bytes())?;
    let mut byte = 0u8;
    for (i, &allowed) in mask.iter().enumerate() {
        if allowed {
            byte |= 1 << (i % 8);
        }
        if i % 8 == 7 {
            writer.write_all(&[byte])?;
            byte = 0;
        }
    }
    if !mask.len().is_multiple_of(8) {
        writer.write_all(&[byte])?;
    }
    Ok(())
}

/// Read a mask written by [`write_mask_bits`].
pub fn read_mask_bits<R: Read>(mut reader: R) -> Result<Vec<bool>> {
    let mut len_buf = [0u8; 8];
    reader.read_exact(&mut len_buf)?;
    let len = u64::from_le_bytes(len_buf) as usize;
    let mut bytes = vec![0u8; len.div_ceil(8)];
    reader.read_exact(&mut bytes)?;
    Ok((0..len).map(|i| bytes[i / 8] >> (i % 8) & 1 == 1).collect())
}

/// Allowed/masked counts for the human-readable mask summary.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct MaskSummary {
    pub total: usize,
    pub allowed: usize,
    pub masked: usize,
}

impl MaskSummary {
    pub fn of(mask: &[bool]) -> Self {
        let allowed = mask.iter().filter(|&&m| m).count();
        MaskSummary { total: mask.len(), allowed, masked: mask.len() - allowed }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn entry(id: usize, decoded: &str) -> VocabEntry {
        VocabEntry { token_id: id, decoded: decoded.to_string(), is_special: false }
    }

    #[test]
    fn script_mask_examples() {
        let vocab = vec![
            entry(0, "καί"),
            entry(1, "abc"),
            entry(2, "κ3"),
            entry(3, " ὑπό"),
            entry(4, "141"),
            entry(5, "."),
            VocabEntry { token_id: 6, decoded: "<eos>".into(), is_special: true },
        ];
        let mask = build_script_mask(&vocab, &DEFAULT_MASK_PUNCTUATION);
        assert_eq!(mask, vec![true, false, false, true, false, true, true]);
    }

    #[test]
    fn empty_decoded_string_is_vacuously_allowed() {
        let mask = build_script_mask(&[entry(0, "")], &DEFAULT_MASK_PUNCTUATION);
        assert_eq!(mask, vec![true]);
    }

    #[test]
    fn mask_is_positional_under_permutation() {
        let vocab = vec![entry(0, "καί"), entry(1, "abc"), entry(2, "νῦν")];
        let mask = build_script_mask(&vocab, &DEFAULT_MASK_PUNCTUATION);
        let permuted: Vec<VocabEntry> =
            vec![vocab[2].clone(), vocab[0].clone(), vocab[1].clone()];
        let mask_p = build_script_mask(&permuted, &DEFAULT_MASK_PUNCTUATION);
        assert_eq!(mask_p, vec![mask[2], mask[0], mask[1]]);
    }

    #[test]
    fn apply_mask_behaviour() {
        let logits = vec![0.3, 1.2, -0.5];
        assert_eq!(apply_mask(&logits, &[true, true, true]).unwrap(), logits);

        let out = apply_mask(&logits, &[false, false, true]).unwrap();
        assert_eq!(out[2], -0.5);
        assert!(out[0].is_infinite() && out[1].is_infinite());

        assert!(matches!(
            apply_mask(&logits, &[false, false, false]),
            Err(Error::AllMasked)
        ));
        assert!(matches!(
            apply_mask(&logits, &[true, true]),
            Err(Error::MaskLength { .. })
        ));
    }

    #[test]
    fn apply_mask_preserves_order_of_allowed() {
        let logits = vec![0.9, 0.1, 0.5, 0.7];
        let mask = vec![true, false, true, true];
        let out = apply_mask(&logits, &mask).unwrap();
        assert!(out[0] > out[3] && out[3] > out[2]);
    }

    #[test]
    fn length_abstention_rule() {
        assert_eq!(length_abstain(100, 100, 1.5).unwrap(), Abstention::Keep);
        assert_eq!(length_abstain(200, 100, 1.5).unwrap(), Abstention::Abstain);
        assert_eq!(length_abstain(150, 100, 1.5).unwrap(), Abstention::Keep);
        assert!(matches!(length_abstain(10, 0, 1.5), Err(Error::ZeroReferenceLength)));
    }

    #[test]
    fn abstention_is_monotone_in_pred_len() {
        let mut prev = Abstention::Keep;
        for pred in 0..400 {
            let now = length_abstain(pred, 100, 1.5).unwrap();
            if prev == Abstention::Abstain {
                assert_eq!(now, Abstention::Abstain);
            }
            prev = now;
        }
    }

    #[test]
    fn calibration_hits_target_rate() {
        // 12 of 100 pages above the chosen threshold.
        let ratios: Vec<f64> = (1..=100).map(|i| 1.0 + i as f64 / 100.0).collect();
        let t = calibrate_abstention_threshold(&ratios, 0.12);
        let rate = ratios.iter().filter(|&&r| r > t).count() as f64 / 100.0;
        assert!((rate - 0.12).abs() < 0.011, "rate {rate} at threshold {t}");
    }

    #[test]
    fn vcd_alpha_zero_keeps_clean_argmax() {
        let clean = vec![0.1, 2.0, -1.0, 0.5];
        let noisy = vec![5.0, -3.0, 2.0, 0.0];
        let out = vcd_combine(&clean, &noisy, 0.0, 0.1);
        let best = out
            .iter()
            .enumerate()
            .max_by(|a, b| a.1.partial_cmp(b.1).unwrap())
            .unwrap()
            .0;
        assert_eq!(best, 1);
    }

    #[test]
    fn vcd_alpha_one_doubles_clean_minus_noisy() {
        let clean = vec![1.0, 0.9];
        let noisy = vec![0.2, 0.8];
        let out = vcd_combine(&clean, &noisy, 1.0, 0.5);
        assert!((out[0] - (2.0 * 1.0 - 0.2)).abs() < 1e-12);
        assert!((out[1] - (2.0 * 0.9 - 0.8)).abs() < 1e-12);
    }

    #[test]
    fn vcd_beta_one_keeps_only_the_argmax() {
        let clean = vec![0.3, 1.7, 0.2];
        let noisy = vec![9.0, 9.0, 9.0];
        let out = vcd_combine(&clean, &noisy, 1.0, 1.0);
        assert!(out[0].is_infinite() && out[2].is_infinite());
        assert!(out[1].is_finite());
    }

    #[test]
    fn vcd_identical_streams_reduce_to_clean() {
        let clean = vec![0.3, 1.7, 0.2, 1.1];
        let out = vcd_combine(&clean, &clean, 1.0, 0.1);
        for (o, c) in out.iter().zip(&clean) {
            if o.is_finite() {
                assert!((o - c).abs() < 1e-12);
            }
        }
        let best = out
            .iter()
            .enumerate()
            .max_by(|a, b| a.1.partial_cmp(b.1).unwrap())
            .unwrap()
            .0;
        assert_eq!(best, 1);
    }

    #[test]
    fn m3id_weight_schedule() {
        assert_eq!(m3id_weight(0, 0.5, 0.02), 0.0);
        let w10 = m3id_weight(10, 0.5, 0.02);
        assert!((w10 - (0.2f64.exp() - 1.0)).abs() < 1e-12);
        assert!((w10 - 0.2214).abs() < 1e-4);
        assert_eq!(m3id_weight(100_000, 0.5, 0.02), 0.5);
        // Nondecreasing and bounded.
        let mut prev = 0.0;
        for t in 0..200 {
            let w = m3id_weight(t, 0.5, 0.02);
            assert!(w >= prev && w <= 0.5);
            prev = w;
        }
    }

    #[test]
    fn m3id_combine_behaviour() {
        let params = ContrastiveParams::m3id_default();
        let image = vec![1.0, 2.0, 3.0];
        let text = vec![0.5, 2.5, 1.0];
        // t = 0: weight zero, output equals the image stream.
        assert_eq!(m3id_combine(&image, &text, 0, &params), image);
        // Identical streams: contrast cancels for all t.
        for t in [0, 5, 50, 500] {
            assert_eq!(m3id_combine(&image, &image, t, &params), image);
        }
        // At the ceiling: 1.5*image - 0.5*text.
        let out = m3id_combine(&image, &text, 1_000_000, &params);
        for i in 0..3 {
            assert!((out[i] - (1.5 * image[i] - 0.5 * text[i])).abs() < 1e-12);
        }
    }

    #[test]
    fn no_repeat_ngram_bans_completion() {
        // History contains trigram (1,2,3); after ...,1,2 emitting 3 again
        // would complete it.
        let history = vec![1, 2, 3, 4, 1, 2];
        let mut scores = vec![0.0; 6];
        apply_no_repeat_ngram(&mut scores, &history, 3);
        assert!(scores[3].is_infinite());
        assert!(scores[4].is_finite());
    }

    #[test]
    fn repetition_penalty_divides_positive_scores() {
        let mut scores = vec![2.0, -2.0, 1.0];
        apply_repetition_penalty(&mut scores, &[0, 1], 1.15);
        assert!((scores[0] - 2.0 / 1.15).abs() < 1e-12);
        assert!((scores[1] - -2.3).abs() < 1e-12);
        assert_eq!(scores[2], 1.0);
    }

    #[test]
    fn mask_bits_roundtrip() {
        let mask: Vec<bool> = (0..37).map(|i| i % 3 == 0).collect();
        let mut buf = Vec::new();
        write_mask_bits(&mask, &mut buf).unwrap();
        assert_eq!(read_mask_bits(buf.as_slice()).unwrap(), mask);
        let summary = MaskSummary::of(&mask);
        assert_eq!(summary.total, 37);
        assert_eq!(summary.allowed, 13);
        assert_eq!(summary.masked, 24);
    }

    #[test]
    fn replay_applies_contrast_and_filters() {
        let params = ContrastiveParams {
            alpha: 0.0,
            beta: 1.0,
            gamma: 0.0,
            repetition_penalty: None,
            no_repeat_ngram: Some(2),
            noise_step: None,
        };
        // Same logits each step: without the no-repeat filter the argmax
        // would always be 1; the bigram (1,1) is banned at step 2.
        let steps: Vec<ReplayStep> = (0..3)
            .map(|step| ReplayStep {
                step,
                primary: vec![0.5, 1.0, 0.9],
                contrast: vec![0.0, 0.0, 0.0],
            })
            .collect();
        let choices = contrast_replay(&steps, ContrastMethod::M3id, &params, None).unwrap();
        let ids: Vec<usize> = choices.iter().map(|c| c.token_id).collect();
        assert_eq!(ids, vec![1, 1, 2]);
    }

    #[test]
    fn vocab_jsonl_roundtrip() {
        let jsonl = "{\"token_id\":0,\"decoded\":\"καί\",\"is_special\":false}\n\
                     {\"token_id\":1,\"decoded\":\"<eos>\",\"is_special\":true}\n";
        let vocab = read_vocab(jsonl.as_bytes()).unwrap();
        assert_eq!(vocab.len(), 2);
        assert!(vocab[1].is_special);

        let bad = "{\"token_id\":0}\n";
        match read_vocab(bad.as_bytes()) {
            Err(Error::JsonLine { line, .. }) => assert_eq!(line, 1),
            other => panic!("expected json error, got {other:?}"),
        }
    }
}
