//! Counterfactual text perturbation on two axes sharing one variant
//! taxonomy: test1 (word axis) disrupts word order while leaving every word
//! intact; test2 (character axis) disrupts characters within words while
//! leaving word boundaries intact. The perturbed output text *is* the new
//! ground truth.
//!
//! Determinism contract: equal `(text, spec)` always produce byte-identical
//! output. The generator is ChaCha8 (a counter-based stream cipher RNG) and
//! per-condition seeds are derived with SHA-256, so stimuli are reproducible
//! across runs and platforms. Whitespace is carried through verbatim: words
//! move between slots but the separators never change.
//!
//! Unit handling: one paragraph per input line; words are whitespace
//! tokens; characters are grapheme-like clusters (a base character plus its
//! combining marks move together). For character-axis variants, leading and
//! trailing punctuation of a word stays in place; word-internal marks
//! participate as characters of that word.

use std::collections::BTreeMap;

use rand::seq::SliceRandom;
use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};
use unicode_normalization::char::is_combining_mark;

/// Perturbation axis.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Axis {
    Word,
    Char,
}

/// Perturbation variant. The proportion `p` applies to Swap and Shuffle
/// only.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "name", content = "p", rename_all = "snake_case")]
pub enum Variant {
    Original,
    Swap(f64),
    Shuffle(f64),
    Local,
    Reverse,
    Random,
}

/// Fully determines one perturbation of one text.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PerturbSpec {
    pub axis: Axis,
    pub variant: Variant,
    pub seed: u64,
}

/// Characters that end a sentence when they close a word.
const SENTENCE_ENDERS: [char; 6] = ['.', '\u{00B7}', '\u{0387}', ';', '\u{037E}', '!'];

/// Condition names per axis, in reporting order (proportional swap/shuffle
/// series first, then the stronger disruptions).
pub const AXIS_CONDITIONS: [&str; 9] = [
    "swap_p5",
    "swap_p10",
    "swap_p25",
    "shuffle_p5",
    "shuffle_p10",
    "shuffle_p25",
    "local",
    "reverse",
    "random",
];

/// All condition names of the full suite: the shared `original` plus nine
/// per axis (`test1_*` word axis, `test2_*` character axis).
pub fn suite_conditions() -> Vec<String> {
    let mut names = vec!["original".to_string()];
    for axis in ["test1", "test2"] {
        for c in AXIS_CONDITIONS {
            names.push(format!("{axis}_{c}"));
        }
    }
    names
}

/// Parse a condition name into its spec, deriving the condition's own seed
/// from the master seed.
pub fn condition_spec(name: &str, master_seed: u64) -> Option<PerturbSpec> {
    let seed = condition_seed(master_seed, name);
    if name == "original" {
        return Some(PerturbSpec { axis: Axis::Word, variant: Variant::Original, seed });
    }
    let (axis, rest) = match name.split_once('_')? {
        ("test1", rest) => (Axis::Word, rest),
        ("test2", rest) => (Axis::Char, rest),
        _ => return None,
    };
    let variant = match rest {
        "swap_p5" => Variant::Swap(0.05),
        "swap_p10" => Variant::Swap(0.10),
        "swap_p25" => Variant::Swap(0.25),
        "shuffle_p5" => Variant::Shuffle(0.05),
        "shuffle_p10" => Variant::Shuffle(0.10),
        "shuffle_p25" => Variant::Shuffle(0.25),
        "local" => Variant::Local,
        "reverse" => Variant::Reverse,
        "random" => Variant::Random,
        _ => return None,
    };
    Some(PerturbSpec { axis, variant, seed })
}

/// Derive an independent 64-bit seed for one condition from the master seed.
pub fn condition_seed(master_seed: u64, condition: &str) -> u64 {
    let mut hasher = Sha256::new();
    hasher.update(master_seed.to_le_bytes());
    hasher.update(condition.as_bytes());
    let digest = hasher.finalize();
    u64::from_le_bytes(digest[..8].try_into().expect("digest is 32 bytes"))
}

/// Apply one perturbation. Deterministic for `(text, spec)`; texts shorter
/// than a variant's unit window are returned unchanged where the variant
/// cannot apply.
pub fn perturb(text: &str, spec: &PerturbSpec) -> String {
    if matches!(spec.variant, Variant::Original) {
        return text.to_string();
    }
    let mut doc = Doc::parse(text);
    let mut rng = ChaCha8Rng::seed_from_u64(spec.seed);
    match spec.axis {
        Axis::Word => doc.apply_word_axis(spec.variant, &mut rng),
        Axis::Char => doc.apply_char_axis(spec.variant, &mut rng),
    }
    doc.assemble()
}

/// Generate every named condition for one text. The map contains the shared
/// `original` entry plus nine conditions per axis, each independently
/// seeded from `(master_seed, condition_name)`.
pub fn perturbation_suite(text: &str, master_seed: u64) -> BTreeMap<String, String> {
    suite_conditions()
        .into_iter()
        .map(|name| {
            let spec = condition_spec(&name, master_seed).expect("known condition");
            let out = perturb(text, &spec);
            (name, out)
        })
        .collect()
}

enum Piece<'a> {
    Ws(&'a str),
    Word(usize),
}

/// A text decomposed into verbatim whitespace separators and word slots,
/// with words grouped by paragraph (input line).
struct Doc<'a> {
    pieces: Vec<Piece<'a>>,
    words: Vec<String>,
    paragraphs: Vec<Vec<usize>>,
}

impl<'a> Doc<'a> {
    fn parse(text: &'a str) -> Self {
        let mut pieces = Vec::new();
        let mut words = Vec::new();
        let mut paragraphs: Vec<Vec<usize>> = vec![Vec::new()];
        let mut offset = 0;
        while offset < text.len() {
            let rest = &text[offset..];
            let is_ws = rest.chars().next().expect("non-empty").is_whitespace();
            let end = rest
                .char_indices()
                .find(|(_, c)| c.is_whitespace() != is_ws)
                .map(|(i, _)| i)
                .unwrap_or(rest.len());
            let run = &text[offset..offset + end];
            if is_ws {
                for _ in run.matches('\n') {
                    paragraphs.push(Vec::new());
                }
                pieces.push(Piece::Ws(run));
            } else {
                let idx = words.len();
                words.push(run.to_string());
                paragraphs.last_mut().expect("non-empty").push(idx);
                pieces.push(Piece::Word(idx));
            }
            offset += end;
        }
        Doc { pieces, words, paragraphs }
    }

    fn assemble(&self) -> String {
        let mut out = String::new();
        for piece in &self.pieces {
            match piece {
                Piece::Ws(s) => out.push_str(s),
                Piece::Word(i) => out.push_str(&self.words[*i]),
            }
        }
        out
    }

    fn apply_word_axis(&mut self, variant: Variant, rng: &mut ChaCha8Rng) {
        for para in &self.paragraphs {
            if para.is_empty() {
                continue;
            }
            let mut slot_words: Vec<String> =
                para.iter().map(|&i| self.words[i].clone()).collect();
            match variant {
                Variant::Original => {}
                Variant::Swap(p) => swap_pass(&mut slot_words, p, rng),
                Variant::Shuffle(p) => relocate(&mut slot_words, p, rng),
                Variant::Local => local_windows(&mut slot_words, rng),
                Variant::Reverse => slot_words.reverse(),
                Variant::Random => {
                    for (start, end) in sentence_spans(&slot_words) {
                        slot_words[start..end].shuffle(rng);
                    }
                }
            }
            for (&slot, word) in para.iter().zip(slot_words) {
                self.words[slot] = word;
            }
        }
    }

    fn apply_char_axis(&mut self, variant: Variant, rng: &mut ChaCha8Rng) {
        match variant {
            Variant::Original => {}
            Variant::Swap(p) => {
                for i in 0..self.words.len() {
                    self.rewrite_core(i, |core, rng| swap_pass(core, p, rng), rng);
                }
            }
            Variant::Shuffle(p) => {
                // Fully scramble the characters of ceil(p*N) randomly chosen
                // words per paragraph.
                for para in self.paragraphs.clone() {
                    let n = para.len();
                    if n == 0 {
                        continue;
                    }
                    let k = ((p * n as f64).ceil() as usize).min(n);
                    if k == 0 {
                        continue;
                    }
                    let mut chosen = rand::seq::index::sample(rng, n, k).into_vec();
                    chosen.sort_unstable();
                    for pos in chosen {
                        self.rewrite_core(para[pos], |core, rng| core.shuffle(rng), rng);
                    }
                }
            }
            Variant::Local => {
                for i in 0..self.words.len() {
                    self.rewrite_core(i, |core, rng| local_windows(core, rng), rng);
                }
            }
            Variant::Reverse => {
                for i in 0..self.words.len() {
                    self.rewrite_core(i, |core, _| core.reverse(), rng);
                }
            }
            Variant::Random => {
                // Per sentence: pool the letters of all words, permute the
                // pool, redistribute sequentially keeping per-word lengths.
                for para in self.paragraphs.clone() {
                    let slot_words: Vec<String> =
                        para.iter().map(|&i| self.words[i].clone()).collect();
                    for (start, end) in sentence_spans(&slot_words) {
                        let split: Vec<(String, Vec<String>, String)> = slot_words[start..end]
                            .iter()
                            .map(|w| split_affixes(w))
                            .collect();
                        let mut pool: Vec<String> =
                            split.iter().flat_map(|(_, core, _)| core.clone()).collect();
                        pool.shuffle(rng);
                        let mut cursor = 0;
                        for (offset, (lead, core, trail)) in split.iter().enumerate() {
                            let take = core.len();
                            let refill = pool[cursor..cursor + take].concat();
                            cursor += take;
                            self.words[para[start + offset]] = format!("{lead}{refill}{trail}");
                        }
                    }
                }
            }
        }
    }

    fn rewrite_core<F>(&mut self, word_idx: usize, f: F, rng: &mut ChaCha8Rng)
    where
        F: FnOnce(&mut Vec<String>, &mut ChaCha8Rng),
    {
        let (lead, mut core, trail) = split_affixes(&self.words[word_idx]);
        if core.len() < 2 {
            return;
        }
        f(&mut core, rng);
        self.words[word_idx] = format!("{lead}{}{trail}", core.concat());
    }
}

/// Single left-to-right pass: at each position draw Bernoulli(p); on success
/// swap with the next unit and skip it.
fn swap_pass<T>(units: &mut [T], p: f64, rng: &mut ChaCha8Rng) {
    let mut i = 0;
    while i + 1 < units.len() {
        if rng.gen_bool(p) {
            units.swap(i, i + 1);
            i += 2;
        } else {
            i += 1;
        }
    }
}

/// Remove ceil(p*N) randomly chosen units and reinsert each at a uniformly
/// random position.
fn relocate(units: &mut Vec<String>, p: f64, rng: &mut ChaCha8Rng) {
    let n = units.len();
    if n == 0 {
        return;
    }
    let k = ((p * n as f64).ceil() as usize).min(n);
    if k == 0 {
        return;
    }
    let mut chosen = rand::seq::index::sample(rng, n, k).into_vec();
    chosen.sort_unstable();
    let removed: Vec<String> = chosen.iter().map(|&i| units[i].clone()).collect();
    for &i in chosen.iter().rev() {
        units.remove(i);
    }
    for unit in removed {
        let pos = rng.gen_range(0..=units.len());
        units.insert(pos, unit);
    }
}

/// Shuffle within consecutive windows of three units; a trailing window of
/// fewer units is shuffled among itself.
fn local_windows<T>(units: &mut [T], rng: &mut ChaCha8Rng) {
    for window in units.chunks_mut(3) {
        window.shuffle(rng);
    }
}

/// Half-open spans of words forming sentences; a word whose final character
/// is a sentence ender closes the current sentence.
fn sentence_spans(words: &[String]) -> Vec<(usize, usize)> {
    let mut spans = Vec::new();
    let mut start = 0;
    for (i, w) in words.iter().enumerate() {
        if w.chars().last().is_some_and(|c| SENTENCE_ENDERS.contains(&c)) {
            spans.push((start, i + 1));
            start = i + 1;
        }
    }
    if start < words.len() {
        spans.push((start, words.len()));
    }
    spans
}

/// Split a word into grapheme-like clusters: a base character plus any
/// following combining marks.
pub fn grapheme_clusters(word: &str) -> Vec<String> {
    let mut out: Vec<String> = Vec::new();
    for c in word.chars() {
        if is_combining_mark(c) && !out.is_empty() {
            out.last_mut().expect("non-empty").push(c);
        } else {
            out.push(c.to_string());
        }
    }
    out
}

/// Split a word into (leading punctuation, core clusters, trailing
/// punctuation). Edge punctuation stays in place under character-axis
/// variants; clusters whose base is alphanumeric form the perturbable core.
fn split_affixes(word: &str) -> (String, Vec<String>, String) {
    let clusters = grapheme_clusters(word);
    let is_core =
        |cluster: &String| cluster.chars().next().is_some_and(|c| c.is_alphanumeric());
    let lead_len = clusters.iter().take_while(|c| !is_core(c)).count();
    if lead_len == clusters.len() {
        return (word.to_string(), Vec::new(), String::new());
    }
    let trail_len = clusters.iter().rev().take_while(|c| !is_core(c)).count();
    let lead = clusters[..lead_len].concat();
    let trail = clusters[clusters.len() - trail_len..].concat();
    let core = clusters[lead_len..clusters.len() - trail_len].to_vec();
    (lead, core, trail)
}
