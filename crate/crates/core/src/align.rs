//! Edit-distance alignment at word and character granularity.
//!
//! [`align_words`] produces a minimum-cost edit script between token
//! sequences via a Levenshtein backtrace; every downstream analysis
//! (taxonomy, metrics, grounding) consumes its output. [`align_chars`]
//! labels hypothesis characters against the reference with a
//! longest-common-contiguous-block matcher, which yields block-based labels
//! rather than edit-script labels.

use serde::{Deserialize, Serialize};

/// Kind of a single alignment step.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum OpKind {
    Match,
    Substitute,
    Delete,
    Insert,
}

/// One step of a word-level alignment.
///
/// Match/Substitute carry both tokens, Delete only the reference token,
/// Insert only the hypothesis token. Indices are positions in the
/// respective token sequences and are strictly increasing along each side.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct AlignOp {
    pub kind: OpKind,
    pub ref_token: Option<String>,
    pub hyp_token: Option<String>,
    pub ref_index: Option<usize>,
    pub hyp_index: Option<usize>,
}

/// Label attached to one hypothesis character by [`align_chars`].
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum CharLabelKind {
    Correct,
    Substitution,
    Overgeneration,
}

/// Per-character label; `position` indexes the hypothesis string in Unicode
/// scalar values. Labels cover every hypothesis character exactly once;
/// unmatched reference characters (omissions) produce no label.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct CharLabel {
    pub position: usize,
    pub label: CharLabelKind,
}

/// Unit-cost Levenshtein distance between two slices.
pub fn edit_distance<T: PartialEq>(a: &[T], b: &[T]) -> usize {
    if a.is_empty() {
        return b.len();
    }
    if b.is_empty() {
        return a.len();
    }
    let mut prev: Vec<usize> = (0..=b.len()).collect();
    let mut curr = vec![0usize; b.len() + 1];
    for (i, x) in a.iter().enumerate() {
        curr[0] = i + 1;
        for (j, y) in b.iter().enumerate() {
            let sub = prev[j] + usize::from(x != y);
            curr[j + 1] = sub.min(prev[j + 1] + 1).min(curr[j] + 1);
        }
        std::mem::swap(&mut prev, &mut curr);
    }
    prev[b.len()]
}

/// Character-level Levenshtein distance between two strings.
pub fn char_edit_distance(a: &str, b: &str) -> usize {
    let ac: Vec<char> = a.chars().collect();
    let bc: Vec<char> = b.chars().collect();
    edit_distance(&ac, &bc)
}

/// Align two token sequences with a minimum unit-cost edit script.
///
/// Tie-breaking during the backtrace prefers Match > Substitute > Delete >
/// Insert so that classification downstream is deterministic.
pub fn align_words<R: AsRef<str>, H: AsRef<str>>(reference: &[R], hypothesis: &[H]) -> Vec<AlignOp> {
    let m = reference.len();
    let n = hypothesis.len();
    // Full DP matrix: pages are a few hundred words, so O(m*n) is cheap.
    let mut dp = vec![vec![0usize; n + 1]; m + 1];
    for (i, row) in dp.iter_mut().enumerate() {
        row[0] = i;
    }
    for (j, cell) in dp[0].iter_mut().enumerate() {
        *cell = j;
    }
    for i in 1..=m {
        for j in 1..=n {
            let eq = reference[i - 1].as_ref() == hypothesis[j - 1].as_ref();
            let diag = dp[i - 1][j - 1] + usize::from(!eq);
            dp[i][j] = diag.min(dp[i - 1][j] + 1).min(dp[i][j - 1] + 1);
        }
    }

    let mut ops = Vec::with_capacity(m.max(n));
    let (mut i, mut j) = (m, n);
    while i > 0 || j > 0 {
        if i > 0 && j > 0 {
            let eq = reference[i - 1].as_ref() == hypothesis[j - 1].as_ref();
            if eq && dp[i][j] == dp[i - 1][j - 1] {
                ops.push(op(OpKind::Match, Some((i - 1, reference[i - 1].as_ref())), Some((j - 1, hypothesis[j - 1].as_ref()))));
                i -= 1;
                j -= 1;
                continue;
            }
            if !eq && dp[i][j] == dp[i - 1][j - 1] + 1 {
                ops.push(op(OpKind::Substitute, Some((i - 1, reference[i - 1].as_ref())), Some((j - 1, hypothesis[j - 1].as_ref()))));
                i -= 1;
                j -= 1;
                continue;
            }
        }
        if i > 0 && dp[i][j] == dp[i - 1][j] + 1 {
            ops.push(op(OpKind::Delete, Some((i - 1, reference[i - 1].as_ref())), None));
            i -= 1;
            continue;
        }
        ops.push(op(OpKind::Insert, None, Some((j - 1, hypothesis[j - 1].as_ref()))));
        j -= 1;
    }
    ops.reverse();
    ops
}

fn op(kind: OpKind, r: Option<(usize, &str)>, h: Option<(usize, &str)>) -> AlignOp {
    AlignOp {
        kind,
        ref_token: r.map(|(_, t)| t.to_string()),
        hyp_token: h.map(|(_, t)| t.to_string()),
        ref_index: r.map(|(i, _)| i),
        hyp_index: h.map(|(i, _)| i),
    }
}

/// Region kind in a block-based character alignment.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum BlockOp {
    Equal,
    Replace,
    Delete,
    Insert,
}

/// One region of a block-based character alignment. Ranges are half-open
/// char-index ranges into the reference and hypothesis respectively.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct Opcode {
    pub op: BlockOp,
    pub ref_start: usize,
    pub ref_end: usize,
    pub hyp_start: usize,
    pub hyp_end: usize,
}

/// Decompose two strings into equal/replace/delete/insert regions by
/// recursively extracting the longest common contiguous block (ties go to
/// the earliest block in the reference, then in the hypothesis).
pub fn char_opcodes(reference: &str, hypothesis: &str) -> Vec<Opcode> {
    let a: Vec<char> = reference.chars().collect();
    let b: Vec<char> = hypothesis.chars().collect();
    let blocks = matching_blocks(&a, &b);
    let mut codes = Vec::new();
    let (mut i, mut j) = (0usize, 0usize);
    for (bi, bj, size) in blocks {
        let op = match (i < bi, j < bj) {
            (true, true) => Some(BlockOp::Replace),
            (true, false) => Some(BlockOp::Delete),
            (false, true) => Some(BlockOp::Insert),
            (false, false) => None,
        };
        if let Some(op) = op {
            codes.push(Opcode { op, ref_start: i, ref_end: bi, hyp_start: j, hyp_end: bj });
        }
        if size > 0 {
            codes.push(Opcode {
                op: BlockOp::Equal,
                ref_start: bi,
                ref_end: bi + size,
                hyp_start: bj,
                hyp_end: bj + size,
            });
        }
        i = bi + size;
        j = bj + size;
    }
    codes
}

/// Matching blocks as (ref_start, hyp_start, size), ending with the
/// zero-size sentinel block at the sequence ends.
fn matching_blocks(a: &[char], b: &[char]) -> Vec<(usize, usize, usize)> {
    let mut queue = vec![(0usize, a.len(), 0usize, b.len())];
    let mut blocks = Vec::new();
    while let Some((alo, ahi, blo, bhi)) = queue.pop() {
        let (i, j, k) = longest_match(a, b, alo, ahi, blo, bhi);
        if k > 0 {
            blocks.push((i, j, k));
            if alo < i && blo < j {
                queue.push((alo, i, blo, j));
            }
            if i + k < ahi && j + k < bhi {
                queue.push((i + k, ahi, j + k, bhi));
            }
        }
    }
    blocks.sort_unstable();
    // Merge adjacent blocks so downstream regions are maximal.
    let mut merged: Vec<(usize, usize, usize)> = Vec::with_capacity(blocks.len() + 1);
    for (i, j, k) in blocks {
        match merged.last_mut() {
            Some(last) if last.0 + last.2 == i && last.1 + last.2 == j => last.2 += k,
            _ => merged.push((i, j, k)),
        }
    }
    merged.push((a.len(), b.len(), 0));
    merged
}

fn longest_match(
    a: &[char],
    b: &[char],
    alo: usize,
    ahi: usize,
    blo: usize,
    bhi: usize,
) -> (usize, usize, usize) {
    use std::collections::HashMap;
    let mut b2j: HashMap<char, Vec<usize>> = HashMap::new();
    for (j, &c) in b.iter().enumerate().take(bhi).skip(blo) {
        b2j.entry(c).or_default().push(j);
    }
    let (mut besti, mut bestj, mut bestsize) = (alo, blo, 0usize);
    let mut j2len: HashMap<usize, usize> = HashMap::new();
    for (i, &c) in a.iter().enumerate().take(ahi).skip(alo) {
        let mut new_j2len: HashMap<usize, usize> = HashMap::new();
        if let Some(js) = b2j.get(&c) {
            for &j in js {
                let k = if j > blo { j2len.get(&(j - 1)).copied().unwrap_or(0) } else { 0 } + 1;
                new_j2len.insert(j, k);
                if k > bestsize {
                    besti = i + 1 - k;
                    bestj = j + 1 - k;
                    bestsize = k;
                }
            }
        }
        j2len = new_j2len;
    }
    (besti, bestj, bestsize)
}

/// Label every hypothesis character against the reference: characters in
/// maximal common blocks are Correct, characters paired against differing
/// reference characters are Substitutions, and hypothesis characters with no
/// reference counterpart are Overgeneration.
pub fn align_chars(reference: &str, hypothesis: &str) -> Vec<CharLabel> {
    let mut labels = Vec::with_capacity(hypothesis.chars().count());
    for code in char_opcodes(reference, hypothesis) {
        let label = match code.op {
            BlockOp::Equal => CharLabelKind::Correct,
            BlockOp::Replace => CharLabelKind::Substitution,
            BlockOp::Insert => CharLabelKind::Overgeneration,
            BlockOp::Delete => continue,
        };
        for position in code.hyp_start..code.hyp_end {
            labels.push(CharLabel { position, label });
        }
    }
    labels
}
