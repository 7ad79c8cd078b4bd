//! Shared helpers for integration tests: a small polytonic Greek
//! vocabulary, deterministic synthetic documents, and the two reference
//! predictors used by the behavioral probe.

#![allow(dead_code)]

use std::collections::HashSet;

use rand::seq::SliceRandom;
use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use ocrprobe::textnorm::bare_letter_form;

/// Real polytonic Greek prose words.
pub const GREEK_VOCAB: [&str; 48] = [
    "καί", "δέ", "γάρ", "μέν", "οὖν", "ἀλλά", "ὁ", "τῶν", "τοῖς", "αὐτός",
    "αὐτοῦ", "ἐστι", "εἶναι", "ἦν", "λόγος", "θεός", "ἄνθρωπος", "πόλις",
    "πόλεμος", "εἰρήνη", "μισθός", "ἐκούσιος", "ζητεῖτε", "ἐπειδή", "Παῦλος",
    "ὑβριστής", "καταφανεῖς", "εἴκοσιν", "ἐκείνων", "ὅπως", "προσβολήν",
    "ὅρκου", "φησί", "κόλασις", "ἠνεῳγμένον", "ἀπῆλθεν", "λέγει", "γράφει",
    "νόμος", "δῆμος", "ἔργον", "χρόνος", "σῶμα", "ψυχή", "ἀρχή", "τέλος",
    "φύσις", "δύναμις",
];

/// Deterministic synthetic documents: each has two paragraphs of two to
/// four sentences with six to twelve words each, one paragraph per line.
pub fn synth_documents(n_docs: usize, seed: u64) -> Vec<(String, String)> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    (0..n_docs)
        .map(|i| {
            let mut paragraphs = Vec::new();
            for _ in 0..2 {
                let n_sentences = rng.gen_range(2..=4);
                let mut sentence_texts = Vec::new();
                for _ in 0..n_sentences {
                    let n_words = rng.gen_range(6..=12);
                    let mut words: Vec<&str> = (0..n_words)
                        .map(|_| *GREEK_VOCAB.choose(&mut rng).expect("non-empty vocab"))
                        .collect();
                    let last = words.len() - 1;
                    let terminated = format!("{}.", words[last]);
                    let mut sentence: Vec<String> =
                        words.drain(..last).map(str::to_string).collect();
                    sentence.push(terminated);
                    sentence_texts.push(sentence.join(" "));
                }
                paragraphs.push(sentence_texts.join(" "));
            }
            (format!("doc{i:02}"), paragraphs.join("\n"))
        })
        .collect()
}

/// Bare-letter forms of every word in a document, for the repair
/// predictor's in-vocabulary test.
pub fn document_bare_forms(text: &str) -> HashSet<String> {
    text.split_whitespace().map(bare_letter_form).collect()
}

/// A faithful reader: transcribes exactly what is on the (perturbed) page.
pub fn copy_predict(perturbed: &str) -> String {
    perturbed.to_string()
}

/// A prior-driven repairer: keeps every slot whose word is still a real
/// word of the document, and rewrites any non-word slot back to the
/// original document's word at that position.
pub fn repair_predict(original: &str, perturbed: &str) -> String {
    let vocab = document_bare_forms(original);
    let original_words: Vec<&str> = original.split_whitespace().collect();
    let repaired: Vec<String> = perturbed
        .split_whitespace()
        .enumerate()
        .map(|(i, word)| {
            if vocab.contains(&bare_letter_form(word)) {
                word.to_string()
            } else {
                original_words.get(i).copied().unwrap_or(word).to_string()
            }
        })
        .collect();
    repaired.join(" ")
}
