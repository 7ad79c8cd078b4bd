//! Deterministic Unicode normalization applied to reference and hypothesis
//! text before any alignment or scoring.
//!
//! [`normalize_page`] runs the enabled stages of a [`NormProfile`] in a fixed
//! order: canonical form → markup strip → hyphenation rejoin → elision
//! unification → bracket/dash isolation → digit-letter split → diacritic
//! strip → case fold / final-sigma → space strip. The order is fixed so that
//! markup can never interfere with hyphen rejoining and letter-level stages
//! see fully reassembled words.
//!
//! All functions are pure; the whole module is safe for unrestricted
//! parallel use.

use serde::{Deserialize, Serialize};
use unicode_normalization::char::is_combining_mark;
use unicode_normalization::UnicodeNormalization;

/// Unicode canonical form applied as the first stage.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "UPPERCASE")]
pub enum CanonicalForm {
    Nfc,
    Nfkc,
}

/// Toggles for the normalization stages, in pipeline order.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(default)]
pub struct NormProfile {
    pub canonical_form: CanonicalForm,
    pub strip_markup: bool,
    pub rejoin_hyphenation: bool,
    pub unify_elision: bool,
    pub isolate_brackets: bool,
    pub split_digit_letter: bool,
    pub strip_diacritics: bool,
    pub strip_spaces: bool,
    pub fold_case: bool,
    pub final_sigma_to_sigma: bool,
}

impl Default for NormProfile {
    fn default() -> Self {
        NormProfile {
            canonical_form: CanonicalForm::Nfc,
            strip_markup: false,
            rejoin_hyphenation: false,
            unify_elision: false,
            isolate_brackets: false,
            split_digit_letter: false,
            strip_diacritics: false,
            strip_spaces: false,
            fold_case: false,
            final_sigma_to_sigma: false,
        }
    }
}

impl NormProfile {
    /// Canonical text cleanup without any letter-level reduction: NFC plus
    /// markup stripping, hyphen rejoin, elision unification, bracket/dash
    /// isolation, and digit-letter splitting. This is the profile both
    /// scoring and taxonomy default to.
    pub fn raw() -> Self {
        NormProfile {
            canonical_form: CanonicalForm::Nfc,
            strip_markup: true,
            rejoin_hyphenation: true,
            unify_elision: true,
            isolate_brackets: true,
            split_digit_letter: true,
            ..NormProfile::default()
        }
    }

    /// [`NormProfile::raw`] plus diacritic stripping (diacritic-insensitive
    /// scoring).
    pub fn no_diac() -> Self {
        NormProfile {
            strip_diacritics: true,
            ..NormProfile::raw()
        }
    }

    /// Profile for perturbation scoring: NFKC canonical form with both
    /// diacritics and spaces stripped, isolating letter-level fidelity from
    /// spacing and accent noise.
    pub fn rq2() -> Self {
        NormProfile {
            canonical_form: CanonicalForm::Nfkc,
            strip_diacritics: true,
            strip_spaces: true,
            ..NormProfile::raw()
        }
    }

    /// Look up a named preset: `raw`, `no-diac`, or `rq2`.
    pub fn preset(name: &str) -> Option<Self> {
        match name {
            "raw" => Some(NormProfile::raw()),
            "no-diac" | "no_diac" => Some(NormProfile::no_diac()),
            "rq2" => Some(NormProfile::rq2()),
            _ => None,
        }
    }
}

/// A non-fatal problem found during normalization. Malformed markup is left
/// verbatim and reported here rather than failing the page.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct NormWarning {
    /// Byte offset into the text as seen by the markup stage (i.e. after
    /// canonical normalization).
    pub offset: usize,
    pub message: String,
}

/// Characters treated as elision/apostrophe variants and unified to U+2019.
pub const ELISION_MARKS: [char; 4] = ['\u{2019}', '\u{02BC}', '\u{0027}', '\u{1FBD}'];

/// Characters isolated as separate tokens by the bracket/dash stage.
pub const ISOLATED_MARKS: [char; 6] = ['[', ']', '(', ')', '\u{2014}', '\u{2013}'];

/// Hyphen characters eligible for line-break rejoining.
const HYPHENS: [char; 2] = ['\u{002D}', '\u{2010}'];

/// Run every enabled stage of `profile` over `text`.
///
/// Applying the same profile twice yields the same string as applying it
/// once. Use [`normalize_page_logged`] to also collect warnings.
pub fn normalize_page(text: &str, profile: &NormProfile) -> String {
    normalize_page_logged(text, profile).0
}

/// As [`normalize_page`], also returning warnings for malformed markup.
pub fn normalize_page_logged(text: &str, profile: &NormProfile) -> (String, Vec<NormWarning>) {
    let mut warnings = Vec::new();
    let mut s: String = match profile.canonical_form {
        CanonicalForm::Nfc => text.nfc().collect(),
        CanonicalForm::Nfkc => text.nfkc().collect(),
    };
    if profile.strip_markup {
        s = strip_markup(&s, &mut warnings);
    }
    if profile.rejoin_hyphenation {
        s = rejoin_hyphenation(&s);
    }
    if profile.unify_elision {
        s = s
            .chars()
            .map(|c| if ELISION_MARKS.contains(&c) { '\u{2019}' } else { c })
            .collect();
    }
    if profile.isolate_brackets {
        s = isolate_marks(&s);
    }
    if profile.split_digit_letter {
        s = split_digit_letter(&s);
    }
    if profile.strip_diacritics {
        s = strip_diacritics(&s);
    }
    if profile.fold_case {
        s = s.to_lowercase();
    }
    if profile.final_sigma_to_sigma {
        s = s.chars().map(|c| if c == 'ς' { 'σ' } else { c }).collect();
    }
    if profile.strip_spaces {
        s.retain(|c| !c.is_whitespace());
    }
    (s, warnings)
}

/// Remove annotation markup. Tag delimiters and tag names are dropped while
/// element content is kept (`<ref>7</ref>` → `7`), except for `<note>`
/// elements whose content is removed entirely since it is not visible on the
/// page. A `<` that does not open a well-formed tag is kept verbatim; an
/// unclosed tag is kept verbatim and reported as a warning.
fn strip_markup(text: &str, warnings: &mut Vec<NormWarning>) -> String {
    let mut out = String::with_capacity(text.len());
    let mut pos = 0;
    while let Some(rel) = text[pos..].find('<') {
        let lt = pos + rel;
        out.push_str(&text[pos..lt]);
        let after = &text[lt + 1..];
        let tag_like = after
            .chars()
            .next()
            .is_some_and(|c| c.is_ascii_alphabetic() || c == '/');
        if !tag_like {
            out.push('<');
            pos = lt + 1;
            continue;
        }
        let Some(gt_rel) = after.find('>') else {
            warnings.push(NormWarning {
                offset: lt,
                message: "unclosed tag left verbatim".to_string(),
            });
            out.push('<');
            pos = lt + 1;
            continue;
        };
        let body = &after[..gt_rel];
        let name: String = body
            .trim_start_matches('/')
            .chars()
            .take_while(|c| c.is_ascii_alphanumeric())
            .collect();
        let tag_end = lt + 1 + gt_rel + 1;
        let opens_note =
            !body.starts_with('/') && !body.ends_with('/') && name.eq_ignore_ascii_case("note");
        if opens_note {
            match text[tag_end..].find("</note>") {
                Some(close_rel) => {
                    pos = tag_end + close_rel + "</note>".len();
                }
                None => {
                    warnings.push(NormWarning {
                        offset: lt,
                        message: "unclosed <note> left verbatim".to_string(),
                    });
                    out.push_str(&text[lt..tag_end]);
                    pos = tag_end;
                }
            }
        } else {
            pos = tag_end;
        }
    }
    out.push_str(&text[pos..]);
    out
}

/// Rejoin line-break and stem hyphenation: a hyphen (U+002D or U+2010)
/// immediately before a line break is removed together with the break when
/// the next line starts with a letter.
fn rejoin_hyphenation(text: &str) -> String {
    let chars: Vec<char> = text.chars().collect();
    let mut out = String::with_capacity(text.len());
    let mut i = 0;
    while i < chars.len() {
        if HYPHENS.contains(&chars[i]) {
            let mut j = i + 1;
            if j < chars.len() && chars[j] == '\r' {
                j += 1;
            }
            if j < chars.len() && chars[j] == '\n' && chars.get(j + 1).is_some_and(|c| c.is_alphabetic()) {
                i = j + 1;
                continue;
            }
        }
        out.push(chars[i]);
        i += 1;
    }
    out
}

/// Surround each isolated mark with spaces unless it already borders
/// whitespace or the text boundary.
fn isolate_marks(text: &str) -> String {
    let chars: Vec<char> = text.chars().collect();
    let mut out = String::with_capacity(text.len());
    for (i, &c) in chars.iter().enumerate() {
        if ISOLATED_MARKS.contains(&c) {
            if !out.is_empty() && !out.ends_with(char::is_whitespace) {
                out.push(' ');
            }
            out.push(c);
            if chars.get(i + 1).is_some_and(|n| !n.is_whitespace()) {
                out.push(' ');
            }
        } else {
            out.push(c);
        }
    }
    out
}

/// Insert a space at every boundary between a digit and a letter, in both
/// directions.
fn split_digit_letter(text: &str) -> String {
    let mut out = String::with_capacity(text.len());
    let mut prev: Option<char> = None;
    for c in text.chars() {
        if let Some(p) = prev {
            let boundary =
                (p.is_numeric() && c.is_alphabetic()) || (p.is_alphabetic() && c.is_numeric());
            if boundary {
                out.push(' ');
            }
        }
        out.push(c);
        prev = Some(c);
    }
    out
}

/// Remove all combining marks: canonical decomposition, drop marks,
/// recompose. Base letters, digits, punctuation, and whitespace are
/// unchanged.
pub fn strip_diacritics(text: &str) -> String {
    text.nfd().filter(|c| !is_combining_mark(*c)).nfc().collect()
}

/// Reduce a single token to its bare letter form: diacritics stripped, case
/// folded to lowercase, final sigma mapped to σ. This is the form used for
/// lexicon lookup and for the ≤2-edit character-confusion test.
pub fn bare_letter_form(word: &str) -> String {
    strip_diacritics(word)
        .to_lowercase()
        .chars()
        .map(|c| if c == 'ς' { 'σ' } else { c })
        .collect()
}

/// Split normalized text on Unicode whitespace. Never yields empty tokens.
pub fn tokenize_words(text: &str) -> Vec<&str> {
    text.split_whitespace().collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn hyphenation_rejoin_across_line_break() {
        let p = NormProfile {
            rejoin_hyphenation: true,
            ..NormProfile::default()
        };
        assert_eq!(normalize_page("πόλε-\nμος", &p), "πόλεμος");
        assert_eq!(normalize_page("πόλε-\r\nμος", &p), "πόλεμος");
        // Not followed by a letter: hyphen and break are kept.
        assert_eq!(normalize_page("πόλε-\n 1", &p), "πόλε-\n 1");
        // Hyphen not at a line break is kept.
        assert_eq!(normalize_page("πόλε-μος", &p), "πόλε-μος");
    }

    #[test]
    fn markup_content_is_kept_tags_dropped() {
        let p = NormProfile {
            strip_markup: true,
            ..NormProfile::default()
        };
        assert_eq!(normalize_page("<ref>7</ref>", &p), "7");
        assert_eq!(normalize_page("α <pb/> β", &p), "α  β");
        // <note> content is invisible on the page and removed entirely.
        assert_eq!(normalize_page("α<note>editorial</note>β", &p), "αβ");
    }

    #[test]
    fn malformed_markup_warns_and_stays_verbatim() {
        let p = NormProfile {
            strip_markup: true,
            ..NormProfile::default()
        };
        let (out, warnings) = normalize_page_logged("α <ref β", &p);
        assert_eq!(out, "α <ref β");
        assert_eq!(warnings.len(), 1);
        let (out, warnings) = normalize_page_logged("α <note> β", &p);
        assert_eq!(out, "α <note> β");
        assert_eq!(warnings.len(), 1);
        // A bare '<' that is not tag-like is not even a warning.
        let (out, warnings) = normalize_page_logged("1 < 2", &p);
        assert_eq!(out, "1 < 2");
        assert!(warnings.is_empty());
    }

    #[test]
    fn empty_input_stays_empty() {
        assert_eq!(normalize_page("", &NormProfile::rq2()), "");
    }

    #[test]
    fn strip_diacritics_examples() {
        assert_eq!(strip_diacritics("ἐπειδὴ"), "επειδη");
        assert_eq!(strip_diacritics("abc"), "abc");
        assert_eq!(strip_diacritics("ᾧ"), "ω");
    }

    // Hand-built character table for the polytonic alphabet used in the
    // test pages; acts as an independent oracle for strip_diacritics.
    #[test]
    fn strip_diacritics_matches_hand_table() {
        let table = [
            ('ά', 'α'), ('ὰ', 'α'), ('ᾶ', 'α'), ('ἀ', 'α'), ('ἁ', 'α'),
            ('ἄ', 'α'), ('ἂ', 'α'), ('ᾳ', 'α'), ('ᾷ', 'α'), ('Ἆ', 'Α'),
            ('έ', 'ε'), ('ὲ', 'ε'), ('ἐ', 'ε'), ('ἑ', 'ε'), ('ἕ', 'ε'),
            ('ή', 'η'), ('ὴ', 'η'), ('ῆ', 'η'), ('ἠ', 'η'), ('ᾐ', 'η'),
            ('ί', 'ι'), ('ὶ', 'ι'), ('ῖ', 'ι'), ('ἰ', 'ι'), ('ϊ', 'ι'),
            ('ΐ', 'ι'), ('ό', 'ο'), ('ὸ', 'ο'), ('ὁ', 'ο'), ('ὅ', 'ο'),
            ('ύ', 'υ'), ('ὺ', 'υ'), ('ῦ', 'υ'), ('ὑ', 'υ'), ('ϋ', 'υ'),
            ('ώ', 'ω'), ('ὼ', 'ω'), ('ῶ', 'ω'), ('ᾧ', 'ω'), ('ῷ', 'ω'),
            ('Ἀ', 'Α'), ('Ἐ', 'Ε'), ('Ὀ', 'Ο'), ('Ὑ', 'Υ'), ('Ὦ', 'Ω'),
        ];
        for (marked, bare) in table {
            assert_eq!(
                strip_diacritics(&marked.to_string()),
                bare.to_string(),
                "{marked} should strip to {bare}"
            );
        }
    }

    #[test]
    fn strip_diacritics_preserves_base_letters() {
        let text = "Ἆρ’ οὐχ ὑβριστής ἐστι; καὶ 141 <ref>";
        let bases = |s: &str| -> Vec<char> {
            s.nfd().filter(|c| !is_combining_mark(*c)).collect()
        };
        assert_eq!(bases(text), bases(&strip_diacritics(text)));
    }

    #[test]
    fn bare_letter_form_examples() {
        assert_eq!(bare_letter_form("Παῦλος"), "παυλοσ");
        assert_eq!(bare_letter_form("και"), "και");
        assert_eq!(bare_letter_form("Ἆρ"), "αρ");
        assert_eq!(bare_letter_form("ΕΠΙΣΤΟΛΑΙ"), "επιστολαι");
    }

    #[test]
    fn bare_letter_form_is_idempotent_and_bare() {
        for w in ["Παῦλος", "καί", "Ἆρ’", "ᾧτινι", "ΛΌΓΟΣ"] {
            let bare = bare_letter_form(w);
            assert_eq!(bare_letter_form(&bare), bare);
            for c in bare.chars() {
                assert!(!is_combining_mark(c));
                assert!(!c.is_uppercase());
                assert_ne!(c, 'ς');
            }
        }
    }

    #[test]
    fn tokenize_examples() {
        assert_eq!(tokenize_words("α β  γ"), vec!["α", "β", "γ"]);
        assert!(tokenize_words("").is_empty());
        assert_eq!(tokenize_words("καί ,"), vec!["καί", ","]);
    }

    #[test]
    fn bracket_isolation_creates_tokens() {
        let p = NormProfile::raw();
        assert_eq!(normalize_page("[ΑΙΣΧΙΝΟΥ]", &p), "[ ΑΙΣΧΙΝΟΥ ]");
        assert_eq!(normalize_page("α—β", &p), "α — β");
        // Already isolated input is untouched.
        assert_eq!(normalize_page("[ α ]", &p), "[ α ]");
    }

    #[test]
    fn digit_letter_split_both_directions() {
        let p = NormProfile {
            split_digit_letter: true,
            ..NormProfile::default()
        };
        assert_eq!(normalize_page("141a", &p), "141 a");
        assert_eq!(normalize_page("p141", &p), "p 141");
        assert_eq!(normalize_page("α1β", &p), "α 1 β");
    }

    #[test]
    fn elision_marks_unified() {
        let p = NormProfile {
            unify_elision: true,
            ..NormProfile::default()
        };
        for raw in ["Ἆρ'", "Ἆρ\u{02BC}", "Ἆρ\u{1FBD}", "Ἆρ\u{2019}"] {
            assert_eq!(normalize_page(raw, &p), "Ἆρ\u{2019}");
        }
    }

    #[test]
    fn rq2_profile_strips_spaces_and_diacritics() {
        let p = NormProfile::rq2();
        assert_eq!(normalize_page("καὶ νῦν", &p), "καινυν");
    }

    #[test]
    fn profiles_are_idempotent() {
        let texts = [
            "πόλε-\nμος καὶ <ref>7</ref> εἰρήνη",
            "Ἆρ' οὐχ [ΑΙΣΧΙΝΟΥ] 141a σελ.",
            "<note>del</note> ὁ δὲ Παῦλος—φησί",
            "",
            "α << β <unclosed",
        ];
        let profiles = [
            NormProfile::default(),
            NormProfile::raw(),
            NormProfile::no_diac(),
            NormProfile::rq2(),
        ];
        for t in texts {
            for p in &profiles {
                let once = normalize_page(t, p);
                assert_eq!(normalize_page(&once, p), once, "profile {p:?} on {t:?}");
            }
        }
    }

    #[test]
    fn presets_resolve_by_name() {
        assert_eq!(NormProfile::preset("raw"), Some(NormProfile::raw()));
        assert_eq!(NormProfile::preset("no-diac"), Some(NormProfile::no_diac()));
        assert_eq!(NormProfile::preset("rq2"), Some(NormProfile::rq2()));
        assert_eq!(NormProfile::preset("bogus"), None);
    }
}
