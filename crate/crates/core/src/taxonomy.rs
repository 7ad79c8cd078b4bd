//! Classification of non-match alignment operations into eight mutually
//! exclusive error categories, with the fine real-word/non-word/segmentation
//! split for word substitutions and the decoding-collapse rule for
//! overgeneration.
//!
//! The decision order is fixed, which is what makes the categories
//! exclusive:
//!
//! 1. collapse rule — the op sits inside a run of ≥5 identical hypothesis
//!    tokens → Overgeneration/Collapse;
//! 2. furniture override — inserted or deleted numerals, Latin-script
//!    words, or all-caps Greek → PageFurniture regardless of operation;
//! 3. remaining Delete → Omission, remaining Insert → Overgeneration;
//! 4. substitutions, in order: punctuation-confined difference →
//!    Punctuation; identical bare-letter forms → AccentDiacritic;
//!    Greek↔Latin replacement → CrossScript; ≤2 edits on the bare-letter
//!    forms → CharConfusion; otherwise WordSubstitution, fine-labeled
//!    Segmentation (adjacent split/merge), RealWord (bare form in lexicon),
//!    or NonWord.

use std::collections::HashSet;
use std::io::{Read, Write};

use serde::{Deserialize, Serialize};

use crate::align::{edit_distance, AlignOp, OpKind};
use crate::error::{Error, Result};
use crate::textnorm::bare_letter_form;

/// Headline error category.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum CategoryKind {
    AccentDiacritic,
    CharConfusion,
    CrossScript,
    WordSubstitution,
    Overgeneration,
    Omission,
    PageFurniture,
    Punctuation,
}

impl CategoryKind {
    /// All categories in reporting order.
    pub const ALL: [CategoryKind; 8] = [
        CategoryKind::AccentDiacritic,
        CategoryKind::CharConfusion,
        CategoryKind::CrossScript,
        CategoryKind::WordSubstitution,
        CategoryKind::Overgeneration,
        CategoryKind::Omission,
        CategoryKind::PageFurniture,
        CategoryKind::Punctuation,
    ];

    pub fn as_str(&self) -> &'static str {
        match self {
            CategoryKind::AccentDiacritic => "accent_diacritic",
            CategoryKind::CharConfusion => "char_confusion",
            CategoryKind::CrossScript => "cross_script",
            CategoryKind::WordSubstitution => "word_substitution",
            CategoryKind::Overgeneration => "overgeneration",
            CategoryKind::Omission => "omission",
            CategoryKind::PageFurniture => "page_furniture",
            CategoryKind::Punctuation => "punctuation",
        }
    }
}

/// Fine label, present only for WordSubstitution (RealWord, NonWord,
/// Segmentation) and Overgeneration (Collapse).
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum FineLabel {
    RealWord,
    NonWord,
    Segmentation,
    Collapse,
}

impl FineLabel {
    pub fn as_str(&self) -> &'static str {
        match self {
            FineLabel::RealWord => "real_word",
            FineLabel::NonWord => "non_word",
            FineLabel::Segmentation => "segmentation",
            FineLabel::Collapse => "collapse",
        }
    }
}

/// A headline category plus optional fine label.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct Category {
    pub kind: CategoryKind,
    pub fine: Option<FineLabel>,
}

impl Category {
    fn plain(kind: CategoryKind) -> Self {
        Category { kind, fine: None }
    }
}

/// A classified mismatch.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ErrorRecord {
    pub op: AlignOp,
    pub category: Category,
    pub page_id: String,
    pub system_id: String,
}

/// Set of bare-letter word forms for the real-word/non-word split.
///
/// Every stored form equals `bare_letter_form` of itself; inserting surface
/// forms normalizes them first, so duplicates collapse.
#[derive(Debug, Clone, Default)]
pub struct Lexicon {
    forms: HashSet<String>,
}

impl Lexicon {
    pub fn new() -> Self {
        Lexicon::default()
    }

    /// Load a lexicon from UTF-8 text, one surface form per line. Non-UTF-8
    /// input is a hard error carrying the byte offset.
    pub fn from_reader<R: Read>(mut reader: R) -> Result<Self> {
        let mut bytes = Vec::new();
        reader.read_to_end(&mut bytes)?;
        let text = String::from_utf8(bytes).map_err(|e| Error::Encoding {
            offset: e.utf8_error().valid_up_to(),
            path: None,
        })?;
        Ok(Self::from_lines(text.lines()))
    }

    pub fn from_lines<I, S>(lines: I) -> Self
    where
        I: IntoIterator<Item = S>,
        S: AsRef<str>,
    {
        let mut lex = Lexicon::new();
        for line in lines {
            let form = line.as_ref().trim();
            if !form.is_empty() {
                lex.forms.insert(bare_letter_form(form));
            }
        }
        lex
    }

    /// Membership test on an already-bare form.
    pub fn contains_bare(&self, bare: &str) -> bool {
        self.forms.contains(bare)
    }

    /// Membership test on a surface form (normalized before lookup).
    pub fn contains(&self, surface: &str) -> bool {
        self.forms.contains(&bare_letter_form(surface))
    }

    pub fn len(&self) -> usize {
        self.forms.len()
    }

    pub fn is_empty(&self) -> bool {
        self.forms.is_empty()
    }
}

/// Marks whose presence or absence alone makes a substitution a Punctuation
/// error. Config-visible; [`Classifier`] accepts a custom set.
pub const DEFAULT_PUNCTUATION_MARKS: [char; 32] = [
    '.', ',', ';', ':', '!', '?', '\u{00B7}', '\u{0387}', '\u{037E}', '"', '\'', '\u{2019}',
    '\u{2018}', '\u{02BC}', '\u{1FBD}', '\u{1FBF}', '«', '»', '‹', '›', '\u{201C}', '\u{201D}',
    '\u{201E}', '(', ')', '[', ']', '\u{2014}', '\u{2013}', '-', '*', '\u{00A7}',
];

/// Minimum length of a run of identical hypothesis tokens that is routed to
/// Overgeneration as decoding collapse.
pub const COLLAPSE_RUN_LEN: usize = 5;

/// Rule-based classifier; holds the lexicon and the punctuation mark set.
#[derive(Debug, Clone)]
pub struct Classifier {
    lexicon: Lexicon,
    punctuation: HashSet<char>,
}

impl Classifier {
    pub fn new(lexicon: Lexicon) -> Self {
        Classifier {
            lexicon,
            punctuation: DEFAULT_PUNCTUATION_MARKS.into_iter().collect(),
        }
    }

    pub fn with_punctuation(lexicon: Lexicon, marks: impl IntoIterator<Item = char>) -> Self {
        Classifier {
            lexicon,
            punctuation: marks.into_iter().collect(),
        }
    }

    pub fn lexicon(&self) -> &Lexicon {
        &self.lexicon
    }

    /// Classify one non-match op given the page's full op sequence. The op
    /// is located in `context` by its kind and indices.
    pub fn classify_op(&self, op: &AlignOp, context: &[AlignOp]) -> Result<Category> {
        if op.kind == OpKind::Match {
            return Err(Error::MatchNotClassifiable);
        }
        let index = context
            .iter()
            .position(|o| {
                o.kind == op.kind && o.ref_index == op.ref_index && o.hyp_index == op.hyp_index
            })
            .ok_or(Error::OpNotInContext)?;
        Ok(self.classify_at(context, index, &collapse_flags(context)))
    }

    /// Classify every non-match op of a page; Match ops produce nothing.
    pub fn classify_page(
        &self,
        ops: &[AlignOp],
        page_id: &str,
        system_id: &str,
    ) -> Vec<ErrorRecord> {
        let collapse = collapse_flags(ops);
        ops.iter()
            .enumerate()
            .filter(|(_, op)| op.kind != OpKind::Match)
            .map(|(i, op)| ErrorRecord {
                op: op.clone(),
                category: self.classify_at(ops, i, &collapse),
                page_id: page_id.to_string(),
                system_id: system_id.to_string(),
            })
            .collect()
    }

    fn classify_at(&self, ops: &[AlignOp], index: usize, collapse: &[bool]) -> Category {
        let op = &ops[index];
        debug_assert_ne!(op.kind, OpKind::Match);

        // (1) decoding collapse: a repeated-token loop is overgeneration no
        // matter what the repeated token is.
        if collapse[index] {
            return Category {
                kind: CategoryKind::Overgeneration,
                fine: Some(FineLabel::Collapse),
            };
        }

        // (2) furniture override for insertions and deletions.
        if matches!(op.kind, OpKind::Insert | OpKind::Delete) {
            let token = match op.kind {
                OpKind::Insert => op.hyp_token.as_deref(),
                _ => op.ref_token.as_deref(),
            };
            if token.is_some_and(is_page_furniture_token) {
                return Category::plain(CategoryKind::PageFurniture);
            }
        }

        // (3) plain deletions and insertions.
        match op.kind {
            OpKind::Delete => return Category::plain(CategoryKind::Omission),
            OpKind::Insert => return Category::plain(CategoryKind::Overgeneration),
            _ => {}
        }

        // (4) substitutions.
        let r = op.ref_token.as_deref().unwrap_or_default();
        let h = op.hyp_token.as_deref().unwrap_or_default();

        if self.strip_punct(r) == self.strip_punct(h) {
            return Category::plain(CategoryKind::Punctuation);
        }

        let bare_r = bare_letter_form(r);
        let bare_h = bare_letter_form(h);
        if bare_r == bare_h {
            return Category::plain(CategoryKind::AccentDiacritic);
        }

        if is_cross_script(r, h) {
            return Category::plain(CategoryKind::CrossScript);
        }

        let rc: Vec<char> = bare_r.chars().collect();
        let hc: Vec<char> = bare_h.chars().collect();
        if edit_distance(&rc, &hc) <= 2 {
            return Category::plain(CategoryKind::CharConfusion);
        }

        let fine = if is_segmentation(ops, index) {
            FineLabel::Segmentation
        } else if self.lexicon.contains_bare(&bare_h) {
            FineLabel::RealWord
        } else {
            FineLabel::NonWord
        };
        Category {
            kind: CategoryKind::WordSubstitution,
            fine: Some(fine),
        }
    }

    fn strip_punct(&self, token: &str) -> String {
        token
            .chars()
            .filter(|c| !self.punctuation.contains(c))
            .collect()
    }
}

/// For each op, whether it lies inside a run of ≥`COLLAPSE_RUN_LEN`
/// identical hypothesis tokens. Runs are computed over the hypothesis token
/// stream (ops carrying a hypothesis token, in order).
fn collapse_flags(ops: &[AlignOp]) -> Vec<bool> {
    let mut flags = vec![false; ops.len()];
    let hyp_ops: Vec<usize> = ops
        .iter()
        .enumerate()
        .filter(|(_, o)| o.hyp_token.is_some())
        .map(|(i, _)| i)
        .collect();
    let mut start = 0;
    while start < hyp_ops.len() {
        let token = ops[hyp_ops[start]].hyp_token.as_deref();
        let mut end = start + 1;
        while end < hyp_ops.len() && ops[hyp_ops[end]].hyp_token.as_deref() == token {
            end += 1;
        }
        if end - start >= COLLAPSE_RUN_LEN {
            for &i in &hyp_ops[start..end] {
                flags[i] = true;
            }
        }
        start = end;
    }
    flags
}

/// Greek letter: alphabetic and inside the Greek/Coptic or Greek Extended
/// blocks.
pub fn is_greek_letter(c: char) -> bool {
    c.is_alphabetic() && (('\u{0370}'..='\u{03FF}').contains(&c) || ('\u{1F00}'..='\u{1FFF}').contains(&c))
}

/// Latin letter: ASCII letters plus Latin-1/Extended letter ranges.
pub fn is_latin_letter(c: char) -> bool {
    c.is_ascii_alphabetic() || (c.is_alphabetic() && ('\u{00C0}'..='\u{024F}').contains(&c))
}

fn has_greek(token: &str) -> bool {
    token.chars().any(is_greek_letter)
}

fn has_latin(token: &str) -> bool {
    token.chars().any(is_latin_letter)
}

/// A Greek word rendered with Latin letters, or vice versa.
pub fn is_cross_script(reference: &str, hypothesis: &str) -> bool {
    (has_greek(reference) && !has_latin(reference) && has_latin(hypothesis))
        || (has_latin(reference) && !has_greek(reference) && has_greek(hypothesis))
}

/// Pure numeral: at least one alphanumeric character and every alphanumeric
/// character is a digit (attached punctuation is ignored).
fn is_pure_numeral(token: &str) -> bool {
    let mut any = false;
    for c in token.chars() {
        if c.is_alphabetic() {
            return false;
        }
        if c.is_numeric() {
            any = true;
        }
    }
    any
}

/// Latin-script word: has Latin letters and no Greek ones.
fn is_latin_word(token: &str) -> bool {
    has_latin(token) && !has_greek(token)
}

/// All-caps Greek (running heads and the like): at least two letters, all
/// Greek, all uppercase.
fn is_all_caps_greek(token: &str) -> bool {
    let letters: Vec<char> = token.chars().filter(|c| c.is_alphabetic()).collect();
    letters.len() >= 2 && letters.iter().all(|&c| is_greek_letter(c) && c.is_uppercase())
}

fn is_page_furniture_token(token: &str) -> bool {
    is_pure_numeral(token) || is_latin_word(token) || is_all_caps_greek(token)
}

/// Split/merge detection: a Substitute whose concatenation with an adjacent
/// Insert (hypothesis side) reproduces the reference token, or with an
/// adjacent Delete (reference side) reproduces the hypothesis token.
fn is_segmentation(ops: &[AlignOp], index: usize) -> bool {
    let s = &ops[index];
    let (Some(r), Some(h)) = (s.ref_token.as_deref(), s.hyp_token.as_deref()) else {
        return false;
    };
    let neighbor_after = ops.get(index + 1);
    let neighbor_before = index.checked_sub(1).and_then(|i| ops.get(i));
    // Split: one reference word predicted as two tokens.
    if let Some(n) = neighbor_after {
        if n.kind == OpKind::Insert {
            if let Some(nh) = n.hyp_token.as_deref() {
                if format!("{h}{nh}") == r {
                    return true;
                }
            }
        }
    }
    if let Some(n) = neighbor_before {
        if n.kind == OpKind::Insert {
            if let Some(nh) = n.hyp_token.as_deref() {
                if format!("{nh}{h}") == r {
                    return true;
                }
            }
        }
    }
    // Merge: two reference words predicted as one token.
    if let Some(n) = neighbor_after {
        if n.kind == OpKind::Delete {
            if let Some(nr) = n.ref_token.as_deref() {
                if format!("{r}{nr}") == h {
                    return true;
                }
            }
        }
    }
    if let Some(n) = neighbor_before {
        if n.kind == OpKind::Delete {
            if let Some(nr) = n.ref_token.as_deref() {
                if format!("{nr}{r}") == h {
                    return true;
                }
            }
        }
    }
    false
}

/// Count, share of all errors, and rate per 1,000 ground-truth words for one
/// category.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CategoryShare {
    pub kind: CategoryKind,
    pub count: usize,
    pub share: f64,
    pub rate_per_1000: f64,
}

/// Per-category shares and rates. Shares sum to 1 when any records exist;
/// every category is present in the output, zero counts included.
pub fn category_shares(records: &[ErrorRecord], gt_word_count: usize) -> Result<Vec<CategoryShare>> {
    if gt_word_count == 0 {
        return Err(Error::ZeroGtWords);
    }
    let total = records.len();
    Ok(CategoryKind::ALL
        .iter()
        .map(|&kind| {
            let count = records.iter().filter(|r| r.category.kind == kind).count();
            CategoryShare {
                kind,
                count,
                share: if total == 0 { 0.0 } else { count as f64 / total as f64 },
                rate_per_1000: 1000.0 * count as f64 / gt_word_count as f64,
            }
        })
        .collect())
}

/// Write per-error records as CSV with columns page_id, system_id, kind,
/// ref_token, hyp_token, category, fine.
pub fn write_error_csv<W: Write>(records: &[ErrorRecord], writer: W) -> Result<()> {
    let mut w = csv::Writer::from_writer(writer);
    w.write_record(["page_id", "system_id", "kind", "ref_token", "hyp_token", "category", "fine"])?;
    for r in records {
        let kind = match r.op.kind {
            OpKind::Match => "match",
            OpKind::Substitute => "substitute",
            OpKind::Delete => "delete",
            OpKind::Insert => "insert",
        };
        w.write_record([
            r.page_id.as_str(),
            r.system_id.as_str(),
            kind,
            r.op.ref_token.as_deref().unwrap_or(""),
            r.op.hyp_token.as_deref().unwrap_or(""),
            r.category.kind.as_str(),
            r.category.fine.map(|f| f.as_str()).unwrap_or(""),
        ])?;
    }
    w.flush()?;
    Ok(())
}
