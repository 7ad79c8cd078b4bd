//! Paired one-sided Wilcoxon signed-rank testing, star coding, and
//! intervention delta tables.
//!
//! Zero differences are dropped before ranking and ties receive midranks.
//! The null distribution is enumerated exactly for up to 12 nonzero
//! differences; above that a normal approximation with tie correction and
//! continuity correction is used.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::metrics::median;

/// One page's paired rates. The difference is always `treated - baseline`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PairedSample {
    pub page_id: String,
    pub baseline: f64,
    pub treated: f64,
}

impl PairedSample {
    pub fn new(page_id: impl Into<String>, baseline: f64, treated: f64) -> Self {
        PairedSample { page_id: page_id.into(), baseline, treated }
    }

    pub fn diff(&self) -> f64 {
        self.treated - self.baseline
    }
}

/// Direction of the one-sided alternative.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Direction {
    TreatedGreater,
    TreatedLess,
}

/// Largest number of nonzero differences for which the exact null
/// distribution is enumerated.
pub const EXACT_LIMIT: usize = 12;

/// One-sided p-value of the paired Wilcoxon signed-rank test.
///
/// Errors if every difference is zero (the test is undefined).
pub fn wilcoxon_one_sided(samples: &[PairedSample], direction: Direction) -> Result<f64> {
    let diffs: Vec<f64> = samples.iter().map(|s| s.diff()).filter(|d| *d != 0.0).collect();
    if diffs.is_empty() {
        return Err(Error::AllDiffsZero);
    }
    let ranks = midranks(&diffs);
    let w_plus: f64 = diffs
        .iter()
        .zip(&ranks)
        .filter(|(d, _)| **d > 0.0)
        .map(|(_, r)| *r)
        .sum();
    let n = diffs.len();
    let p = if n <= EXACT_LIMIT {
        exact_p(&ranks, w_plus, direction)
    } else {
        approx_p(&ranks, w_plus, direction)
    };
    Ok(p.clamp(0.0, 1.0))
}

/// Midranks of the absolute differences (average rank within tie groups).
fn midranks(diffs: &[f64]) -> Vec<f64> {
    let mut order: Vec<usize> = (0..diffs.len()).collect();
    order.sort_by(|&a, &b| {
        diffs[a]
            .abs()
            .partial_cmp(&diffs[b].abs())
            .expect("differences must not be NaN")
    });
    let mut ranks = vec![0.0; diffs.len()];
    let mut i = 0;
    while i < order.len() {
        let mut j = i;
        while j < order.len() && diffs[order[j]].abs() == diffs[order[i]].abs() {
            j += 1;
        }
        // positions i..j (0-based) share the average of ranks i+1..=j.
        let avg = (i + 1 + j) as f64 / 2.0;
        for &idx in &order[i..j] {
            ranks[idx] = avg;
        }
        i = j;
    }
    ranks
}

/// Exact one-sided p by enumerating all 2^n sign assignments of the
/// observed ranks. The observed statistic is included in the tail
/// (P(W >= obs) or P(W <= obs)).
fn exact_p(ranks: &[f64], w_obs: f64, direction: Direction) -> f64 {
    let n = ranks.len();
    let total = 1u64 << n;
    let mut count = 0u64;
    // Rank sums are multiples of 0.5, so exact comparison with a tiny
    // epsilon guard is safe.
    let eps = 1e-9;
    for mask in 0..total {
        let w: f64 = (0..n).filter(|i| mask >> i & 1 == 1).map(|i| ranks[i]).sum();
        let in_tail = match direction {
            Direction::TreatedGreater => w >= w_obs - eps,
            Direction::TreatedLess => w <= w_obs + eps,
        };
        if in_tail {
            count += 1;
        }
    }
    count as f64 / total as f64
}

/// Normal approximation with tie correction and continuity correction.
fn approx_p(ranks: &[f64], w_obs: f64, direction: Direction) -> f64 {
    let n = ranks.len() as f64;
    let mean = n * (n + 1.0) / 4.0;
    let mut var = n * (n + 1.0) * (2.0 * n + 1.0) / 24.0;
    // Tie correction: subtract sum(t^3 - t)/48 over tie groups.
    let mut sorted = ranks.to_vec();
    sorted.sort_by(|a, b| a.partial_cmp(b).expect("ranks are finite"));
    let mut i = 0;
    while i < sorted.len() {
        let mut j = i;
        while j < sorted.len() && sorted[j] == sorted[i] {
            j += 1;
        }
        let t = (j - i) as f64;
        var -= (t * t * t - t) / 48.0;
        i = j;
    }
    let sd = var.sqrt();
    match direction {
        Direction::TreatedGreater => 1.0 - normal_cdf((w_obs - 0.5 - mean) / sd),
        Direction::TreatedLess => normal_cdf((w_obs + 0.5 - mean) / sd),
    }
}

/// Standard normal CDF.
fn normal_cdf(z: f64) -> f64 {
    0.5 * libm::erfc(-z / std::f64::consts::SQRT_2)
}

/// Significance stars: `***` p<.001, `**` p<.01, `*` p<.05, `ns` otherwise.
/// Boundaries are half-open exactly as printed (p == .05 is `ns`).
pub fn star_code(p: f64) -> &'static str {
    if p < 0.001 {
        "***"
    } else if p < 0.01 {
        "**"
    } else if p < 0.05 {
        "*"
    } else {
        "ns"
    }
}

/// Summary of one treated-vs-baseline comparison.
///
/// `delta_median` is the difference of medians (median of treated minus
/// median of baseline), not the median of per-page deltas. Help/tie/hurt
/// count pages whose rate decreased, stayed unchanged, or increased.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DeltaSummary {
    pub delta_median: f64,
    pub delta_mean: f64,
    pub n_help: usize,
    pub n_tie: usize,
    pub n_hurt: usize,
    pub p_value: f64,
    pub stars: String,
}

/// Build a delta summary from per-page rates keyed by page id.
///
/// Page key sets must match exactly; a mismatch errors listing the missing
/// pages. When every page ties, the test is undefined and the p-value is
/// reported as 1.0 (`ns`).
pub fn delta_table(
    baseline: &BTreeMap<String, f64>,
    treated: &BTreeMap<String, f64>,
    direction: Direction,
) -> Result<DeltaSummary> {
    let missing_in_treated: Vec<&String> =
        baseline.keys().filter(|k| !treated.contains_key(*k)).collect();
    let missing_in_baseline: Vec<&String> =
        treated.keys().filter(|k| !baseline.contains_key(*k)).collect();
    if !missing_in_treated.is_empty() || !missing_in_baseline.is_empty() {
        let mut parts = Vec::new();
        if !missing_in_treated.is_empty() {
            parts.push(format!("missing from treated: {missing_in_treated:?}"));
        }
        if !missing_in_baseline.is_empty() {
            parts.push(format!("missing from baseline: {missing_in_baseline:?}"));
        }
        return Err(Error::PageKeyMismatch(parts.join("; ")));
    }

    let samples: Vec<PairedSample> = baseline
        .iter()
        .map(|(page, &b)| PairedSample::new(page.clone(), b, treated[page]))
        .collect();

    let base_rates: Vec<f64> = samples.iter().map(|s| s.baseline).collect();
    let treat_rates: Vec<f64> = samples.iter().map(|s| s.treated).collect();
    let delta_median = median(&treat_rates).unwrap_or(0.0) - median(&base_rates).unwrap_or(0.0);
    let delta_mean = if samples.is_empty() {
        0.0
    } else {
        samples.iter().map(|s| s.diff()).sum::<f64>() / samples.len() as f64
    };

    let n_help = samples.iter().filter(|s| s.treated < s.baseline).count();
    let n_hurt = samples.iter().filter(|s| s.treated > s.baseline).count();
    let n_tie = samples.len() - n_help - n_hurt;

    let p_value = if samples.iter().all(|s| s.diff() == 0.0) {
        1.0
    } else {
        wilcoxon_one_sided(&samples, direction)?
    };

    Ok(DeltaSummary {
        delta_median,
        delta_mean,
        n_help,
        n_tie,
        n_hurt,
        p_value,
        stars: star_code(p_value).to_string(),
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn pairs(diffs: &[f64]) -> Vec<PairedSample> {
        diffs
            .iter()
            .enumerate()
            .map(|(i, &d)| PairedSample::new(format!("p{i}"), 0.0, d))
            .collect()
    }

    #[test]
    fn five_positive_diffs_exact() {
        let samples = pairs(&[0.1, 0.2, 0.3, 0.4, 0.5]);
        let p = wilcoxon_one_sided(&samples, Direction::TreatedGreater).unwrap();
        assert_eq!(p, 1.0 / 32.0);
    }

    #[test]
    fn single_positive_diff() {
        let samples = pairs(&[0.4]);
        let p = wilcoxon_one_sided(&samples, Direction::TreatedGreater).unwrap();
        assert_eq!(p, 0.5);
    }

    #[test]
    fn symmetric_diffs_are_direction_symmetric() {
        // (+d, -d) tie in magnitude: midranks [1.5, 1.5], W+ = 1.5, and the
        // inclusive tail over {0, 1.5, 1.5, 3} is 3/4 in both directions.
        let samples = pairs(&[0.25, -0.25]);
        let g = wilcoxon_one_sided(&samples, Direction::TreatedGreater).unwrap();
        let l = wilcoxon_one_sided(&samples, Direction::TreatedLess).unwrap();
        assert_eq!(g, l);
        assert_eq!(g, 0.75);
    }

    #[test]
    fn all_zero_diffs_is_an_error() {
        let samples = pairs(&[0.0, 0.0]);
        assert!(matches!(
            wilcoxon_one_sided(&samples, Direction::TreatedGreater),
            Err(Error::AllDiffsZero)
        ));
    }

    #[test]
    fn zeros_are_dropped_before_ranking() {
        let with_zeros = pairs(&[0.0, 0.1, 0.2, 0.0, 0.3, 0.4, 0.5]);
        let without = pairs(&[0.1, 0.2, 0.3, 0.4, 0.5]);
        assert_eq!(
            wilcoxon_one_sided(&with_zeros, Direction::TreatedGreater).unwrap(),
            wilcoxon_one_sided(&without, Direction::TreatedGreater).unwrap()
        );
    }

    #[test]
    fn tied_magnitudes_get_midranks() {
        // |d| = [1,1,2] -> ranks [1.5, 1.5, 3]; W+ = 3 (the negative pair
        // takes one of the tied ranks).
        let samples = pairs(&[1.0, -1.0, 2.0]);
        let p = wilcoxon_one_sided(&samples, Direction::TreatedGreater).unwrap();
        // Enumeration: W in {0,1.5,1.5,3,3,4.5,4.5,6}; P(W >= 4.5) = 3/8...
        // observed W+ = 1.5 + 3 = 4.5.
        assert_eq!(p, 3.0 / 8.0);
    }

    #[test]
    fn exact_tails_overlap_at_observed_statistic() {
        let samples = pairs(&[0.3, -0.1, 0.2, 0.5, -0.4, 0.6, 0.05]);
        let g = wilcoxon_one_sided(&samples, Direction::TreatedGreater).unwrap();
        let l = wilcoxon_one_sided(&samples, Direction::TreatedLess).unwrap();
        assert!(g + l >= 1.0);
        assert!((0.0..=1.0).contains(&g));
        assert!((0.0..=1.0).contains(&l));
    }

    #[test]
    fn approx_agrees_with_exact_near_the_boundary() {
        use rand::Rng;
        use rand::SeedableRng;
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(1234);
        for n in 10..=12 {
            for _ in 0..40 {
                let diffs: Vec<f64> = (0..n)
                    .map(|_| {
                        let d: f64 = rng.gen_range(-1.0..1.0);
                        if d == 0.0 {
                            0.5
                        } else {
                            d
                        }
                    })
                    .collect();
                let samples = pairs(&diffs);
                for dir in [Direction::TreatedGreater, Direction::TreatedLess] {
                    let ranks = midranks(&diffs);
                    let w: f64 = diffs
                        .iter()
                        .zip(&ranks)
                        .filter(|(d, _)| **d > 0.0)
                        .map(|(_, r)| *r)
                        .sum();
                    let exact = exact_p(&ranks, w, dir);
                    let approx = approx_p(&ranks, w, dir);
                    assert!(
                        (exact - approx).abs() < 0.01,
                        "n={n} dir={dir:?} exact={exact} approx={approx}"
                    );
                    let _ = wilcoxon_one_sided(&samples, dir).unwrap();
                }
            }
        }
    }

    #[test]
    fn star_thresholds_are_half_open() {
        assert_eq!(star_code(0.0005), "***");
        assert_eq!(star_code(0.005), "**");
        assert_eq!(star_code(0.03), "*");
        assert_eq!(star_code(0.05), "ns");
        assert_eq!(star_code(0.5), "ns");
        assert_eq!(star_code(0.001), "**");
        assert_eq!(star_code(0.01), "*");
    }

    fn rate_map(entries: &[(&str, f64)]) -> BTreeMap<String, f64> {
        entries.iter().map(|(k, v)| (k.to_string(), *v)).collect()
    }

    #[test]
    fn delta_table_identity_is_all_ties() {
        let base = rate_map(&[("a", 0.1), ("b", 0.2)]);
        let summary = delta_table(&base, &base, Direction::TreatedLess).unwrap();
        assert_eq!(summary.delta_median, 0.0);
        assert_eq!(summary.delta_mean, 0.0);
        assert_eq!(summary.n_tie, 2);
        assert_eq!(summary.p_value, 1.0);
        assert_eq!(summary.stars, "ns");
    }

    #[test]
    fn delta_table_median_of_medians() {
        let base = rate_map(&[("a", 0.1), ("b", 0.3)]);
        let treated = rate_map(&[("a", 0.2), ("b", 0.4)]);
        let summary = delta_table(&base, &treated, Direction::TreatedGreater).unwrap();
        assert!((summary.delta_median - 0.1).abs() < 1e-12);
        assert_eq!(summary.n_hurt, 2);
    }

    #[test]
    fn delta_table_help_tie_hurt_shape() {
        // 90 pages: 68 improve by 0.01, 11 worsen, 11 tie.
        let mut base = BTreeMap::new();
        let mut treated = BTreeMap::new();
        for i in 0..90 {
            let page = format!("p{i:02}");
            let b = 0.2 + (i % 7) as f64 * 0.01;
            let t = if i < 68 {
                b - 0.01
            } else if i < 79 {
                b + 0.01
            } else {
                b
            };
            base.insert(page.clone(), b);
            treated.insert(page, t);
        }
        let summary = delta_table(&base, &treated, Direction::TreatedLess).unwrap();
        assert_eq!(summary.n_help, 68);
        assert_eq!(summary.n_tie, 11);
        assert_eq!(summary.n_hurt, 11);
        assert!(summary.p_value < 0.001);
        assert_eq!(summary.stars, "***");
    }

    #[test]
    fn delta_table_rejects_key_mismatch() {
        let base = rate_map(&[("a", 0.1), ("b", 0.2)]);
        let treated = rate_map(&[("a", 0.1), ("c", 0.2)]);
        match delta_table(&base, &treated, Direction::TreatedLess) {
            Err(Error::PageKeyMismatch(msg)) => {
                assert!(msg.contains('b') && msg.contains('c'), "{msg}");
            }
            other => panic!("expected key mismatch, got {other:?}"),
        }
    }

    #[test]
    fn delta_table_is_order_invariant() {
        let base = rate_map(&[("a", 0.1), ("b", 0.3), ("c", 0.25)]);
        let treated = rate_map(&[("c", 0.2), ("a", 0.15), ("b", 0.3)]);
        let s1 = delta_table(&base, &treated, Direction::TreatedLess).unwrap();
        // BTreeMap already canonicalizes order; rebuild in another order to
        // make the intent explicit.
        let base2: BTreeMap<String, f64> = base.clone().into_iter().rev().collect();
        let s2 = delta_table(&base2, &treated, Direction::TreatedLess).unwrap();
        assert_eq!(s1, s2);
    }
}
