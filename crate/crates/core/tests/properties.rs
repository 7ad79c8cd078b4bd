//! Property tests for the alignment, normalization, metric, and
//! perturbation invariants.

mod common;

use proptest::prelude::*;

use ocrprobe::align::{align_words, char_edit_distance, edit_distance, OpKind};
use ocrprobe::metrics::{cer, wer};
use ocrprobe::perturb::{perturb, Axis, PerturbSpec, Variant};
use ocrprobe::textnorm::{
    bare_letter_form, normalize_page, strip_diacritics, tokenize_words, NormProfile,
};

// Independent quadratic DP oracle (distance only, no backtrace).
fn dp_oracle<T: PartialEq>(a: &[T], b: &[T]) -> usize {
    let mut dp = vec![vec![0usize; b.len() + 1]; a.len() + 1];
    for (i, row) in dp.iter_mut().enumerate() {
        row[0] = i;
    }
    for (j, cell) in dp[0].iter_mut().enumerate() {
        *cell = j;
    }
    for i in 1..=a.len() {
        for j in 1..=b.len() {
            let cost = usize::from(a[i - 1] != b[j - 1]);
            dp[i][j] = (dp[i - 1][j - 1] + cost)
                .min(dp[i - 1][j] + 1)
                .min(dp[i][j - 1] + 1);
        }
    }
    dp[a.len()][b.len()]
}

fn op_cost(ops: &[ocrprobe::align::AlignOp]) -> usize {
    ops.iter().filter(|o| o.kind != OpKind::Match).count()
}

fn token_seq() -> impl Strategy<Value = Vec<String>> {
    prop::collection::vec(
        prop::sample::select(vec!["α", "β", "γ", "δ", "ε", "καί", "ὁ"]),
        0..=12,
    )
    .prop_map(|v| v.into_iter().map(String::from).collect())
}

fn greek_text() -> impl Strategy<Value = String> {
    prop::collection::vec(
        prop::sample::select(vec![
            'α', 'β', 'γ', 'ὶ', 'ῦ', 'ἐ', 'ς', 'κ', ' ', ' ', '1', 'a', '·',
        ]),
        0..40,
    )
    .prop_map(|v| v.into_iter().collect())
}

proptest! {
    #[test]
    fn word_alignment_cost_matches_dp_oracle(r in token_seq(), h in token_seq()) {
        let ops = align_words(&r, &h);
        prop_assert_eq!(op_cost(&ops), dp_oracle(&r, &h));
    }

    #[test]
    fn alignment_partitions_both_sides(r in token_seq(), h in token_seq()) {
        let ops = align_words(&r, &h);
        let dels = ops.iter().filter(|o| o.kind == OpKind::Delete).count();
        let ins = ops.iter().filter(|o| o.kind == OpKind::Insert).count();
        let diag = ops.len() - dels - ins;
        prop_assert_eq!(dels + diag, r.len());
        prop_assert_eq!(ins + diag, h.len());
        // Non-match count is bounded below by the length gap and above by
        // the longer side.
        let non_match = op_cost(&ops);
        prop_assert!(non_match >= r.len().abs_diff(h.len()));
        prop_assert!(non_match <= r.len().max(h.len()));
    }

    #[test]
    fn alignment_cost_is_swap_symmetric(r in token_seq(), h in token_seq()) {
        // Cost is symmetric under swapping the sides; a minimal script for
        // one direction maps to the other with Delete and Insert exchanged,
        // so the delete/insert surplus flips sign exactly. (Individual op
        // multisets may differ when several minimal scripts tie.)
        let forward = align_words(&r, &h);
        let backward = align_words(&h, &r);
        prop_assert_eq!(op_cost(&forward), op_cost(&backward));
        let surplus = |ops: &[ocrprobe::align::AlignOp]| {
            let del = ops.iter().filter(|o| o.kind == OpKind::Delete).count() as i64;
            let ins = ops.iter().filter(|o| o.kind == OpKind::Insert).count() as i64;
            del - ins
        };
        prop_assert_eq!(surplus(&forward), -surplus(&backward));
    }

    #[test]
    fn self_alignment_is_all_match(r in token_seq()) {
        prop_assert!(align_words(&r, &r).iter().all(|o| o.kind == OpKind::Match));
    }

    #[test]
    fn normalization_is_idempotent(t in greek_text()) {
        for profile in [NormProfile::raw(), NormProfile::no_diac(), NormProfile::rq2()] {
            let once = normalize_page(&t, &profile);
            prop_assert_eq!(normalize_page(&once, &profile), once);
        }
    }

    #[test]
    fn diacritic_stripping_preserves_base_count(t in greek_text()) {
        use unicode_normalization::char::is_combining_mark;
        use unicode_normalization::UnicodeNormalization;
        let bases = |s: &str| s.nfd().filter(|c| !is_combining_mark(*c)).count();
        prop_assert_eq!(bases(&t), bases(&strip_diacritics(&t)));
    }

    #[test]
    fn tokens_have_no_whitespace(t in greek_text()) {
        for token in tokenize_words(&t) {
            prop_assert!(!token.is_empty());
            prop_assert!(!token.chars().any(char::is_whitespace));
        }
    }

    #[test]
    fn bare_form_is_idempotent(t in greek_text()) {
        for token in tokenize_words(&t) {
            let bare = bare_letter_form(token);
            prop_assert_eq!(bare_letter_form(&bare), bare);
        }
    }

    #[test]
    fn cer_matches_oracle_on_normalized_pairs(r in greek_text(), h in greek_text()) {
        let profile = NormProfile::default();
        let rn = normalize_page(&r, &profile);
        let hn = normalize_page(&h, &profile);
        prop_assume!(!rn.is_empty());
        let rc: Vec<char> = rn.chars().collect();
        let hc: Vec<char> = hn.chars().collect();
        let expected = dp_oracle(&rc, &hc) as f64 / rc.len() as f64;
        prop_assert_eq!(cer(&r, &h, &profile).unwrap(), expected);
    }

    #[test]
    fn error_rates_are_bounded_and_zero_iff_equal(r in greek_text(), h in greek_text()) {
        let profile = NormProfile::default();
        let rn = normalize_page(&r, &profile);
        let hn = normalize_page(&h, &profile);
        prop_assume!(!rn.is_empty());
        let c = cer(&r, &h, &profile).unwrap();
        let bound = 1f64.max(hn.chars().count() as f64 / rn.chars().count() as f64);
        prop_assert!(c <= bound, "cer {} exceeds bound {}", c, bound);
        prop_assert_eq!(c == 0.0, rn == hn);

        let rt = tokenize_words(&rn);
        prop_assume!(!rt.is_empty());
        let w = wer(&r, &h, &profile).unwrap();
        let ht = tokenize_words(&hn);
        let bound = 1f64.max(ht.len() as f64 / rt.len() as f64);
        prop_assert!(w <= bound, "wer {} exceeds bound {}", w, bound);
        prop_assert_eq!(w == 0.0, rt == ht);
    }

    #[test]
    fn single_char_in_word_corruptions_keep_wer_at_least_cer(
        seed in 0u64..500,
        k in 1usize..4,
    ) {
        // Corrupt one character inside k distinct words of a synthetic page.
        use rand::seq::SliceRandom;
        use rand::SeedableRng;
        let docs = common::synth_documents(1, seed);
        let text = docs[0].1.clone();
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(seed ^ 0x5eed);
        let mut words: Vec<String> =
            text.split_whitespace().map(String::from).collect();
        let mut indices: Vec<usize> = (0..words.len()).collect();
        indices.shuffle(&mut rng);
        for &i in indices.iter().take(k) {
            let mut chars: Vec<char> = words[i].chars().collect();
            if chars.is_empty() {
                continue;
            }
            chars[0] = 'ϡ';
            words[i] = chars.into_iter().collect();
        }
        let corrupted = words.join(" ");
        let profile = NormProfile::raw();
        let w = wer(&text, &corrupted, &profile).unwrap();
        let c = cer(&text, &corrupted, &profile).unwrap();
        prop_assert!(w >= c, "wer {} < cer {}", w, c);
    }

    #[test]
    fn word_axis_multiset_and_char_axis_lengths(seed in 0u64..200) {
        let docs = common::synth_documents(1, seed);
        let text = &docs[0].1;
        fn sorted_words(s: &str) -> Vec<String> {
            let mut v: Vec<String> = s.split_whitespace().map(String::from).collect();
            v.sort_unstable();
            v
        }
        for variant in [
            Variant::Swap(0.25),
            Variant::Shuffle(0.10),
            Variant::Local,
            Variant::Reverse,
            Variant::Random,
        ] {
            let out = perturb(text, &PerturbSpec { axis: Axis::Word, variant, seed });
            prop_assert_eq!(sorted_words(&out), sorted_words(text), "{:?}", variant);

            let out = perturb(text, &PerturbSpec { axis: Axis::Char, variant, seed });
            let before: Vec<usize> =
                text.split_whitespace().map(|w| w.chars().count()).collect();
            let after: Vec<usize> =
                out.split_whitespace().map(|w| w.chars().count()).collect();
            prop_assert_eq!(before, after, "{:?}", variant);
        }
    }
}

#[test]
fn alignment_cost_equals_oracle_on_200_random_token_pairs() {
    use rand::Rng;
    use rand::SeedableRng;
    let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(7);
    let alphabet = ["α", "β", "γ", "δ", "καί", "ὁ", "νῦν"];
    for _ in 0..200 {
        let len_r = rng.gen_range(0..15);
        let len_h = rng.gen_range(0..15);
        let r: Vec<&str> = (0..len_r).map(|_| alphabet[rng.gen_range(0..alphabet.len())]).collect();
        let h: Vec<&str> = (0..len_h).map(|_| alphabet[rng.gen_range(0..alphabet.len())]).collect();
        let ops = align_words(&r, &h);
        assert_eq!(op_cost(&ops), dp_oracle(&r, &h));
    }
}

#[test]
fn char_edit_distance_agrees_with_generic() {
    let pairs = [("καί", "χαί"), ("", "αβ"), ("ἐπειδὴ", "ἐπειδή")];
    for (a, b) in pairs {
        let ac: Vec<char> = a.chars().collect();
        let bc: Vec<char> = b.chars().collect();
        assert_eq!(char_edit_distance(a, b), edit_distance(&ac, &bc));
    }
}
