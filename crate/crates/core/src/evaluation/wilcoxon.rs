// SPDX-License-Identifier: MIT OR Apache-2.0

//! Paired comparison of methods over a shared set of attributes: win counts
//! and the two-sided Wilcoxon signed-rank test.
//!
//! Up to [`EXACT_MAX_N`] nonzero differences the p-value is computed from the
//! exact sign-flip distribution of the (mid)rank sum; above that the normal
//! approximation with tie and continuity corrections is used.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};
use statrs::function::erf::erfc;

use crate::error::{Error, Result};

pub const EXACT_MAX_N: usize = 50;
pub const MIN_SHARED_ATTRIBUTES: usize = 6;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum TestMethod {
    Exact,
    Normal,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct WilcoxonResult {
    /// Nonzero differences entering the test.
    pub n: usize,
    pub w_plus: f64,
    pub w_minus: f64,
    /// `min(w_plus, w_minus)`.
    pub statistic: f64,
    pub p_value: f64,
    pub method: TestMethod,
}

/// Midranks (1-based) of `values`, with the tie-group sizes.
fn midranks(values: &[f64]) -> (Vec<f64>, Vec<usize>) {
    let mut order: Vec<usize> = (0..values.len()).collect();
    order.sort_by(|&a, &b| values[a].total_cmp(&values[b]));
    let mut ranks = vec![0.0; values.len()];
    let mut ties = Vec::new();
    let mut i = 0;
    while i < order.len() {
        let mut j = i + 1;
        while j < order.len() && values[order[j]] == values[order[i]] {
            j += 1;
        }
        let r = (i + j + 1) as f64 / 2.0;
        for &o in &order[i..j] {
            ranks[o] = r;
        }
        ties.push(j - i);
        i = j;
    }
    (ranks, ties)
}

/// Two-sided signed-rank test on paired differences `a - b`.
pub fn signed_rank_test(differences: &[f64]) -> Result<WilcoxonResult> {
    if differences.iter().any(|d| !d.is_finite()) {
        return Err(Error::Data("differences contain non-finite values".into()));
    }
    let nonzero: Vec<f64> = differences.iter().copied().filter(|&d| d != 0.0).collect();
    let n = nonzero.len();
    if n == 0 {
        return Err(Error::Config(
            "all paired differences are zero; no signed ranks".into(),
        ));
    }
    let abs: Vec<f64> = nonzero.iter().map(|d| d.abs()).collect();
    let (ranks, ties) = midranks(&abs);
    let w_plus: f64 = ranks
        .iter()
        .zip(&nonzero)
        .filter(|(_, &d)| d > 0.0)
        .map(|(r, _)| r)
        .sum();
    let total = (n * (n + 1)) as f64 / 2.0;
    let w_minus = total - w_plus;

    let (p_value, method) = if n <= EXACT_MAX_N {
        (exact_p(&ranks, w_plus), TestMethod::Exact)
    } else {
        (normal_p(n, &ties, w_plus), TestMethod::Normal)
    };
    Ok(WilcoxonResult {
        n,
        w_plus,
        w_minus,
        statistic: w_plus.min(w_minus),
        p_value,
        method,
    })
}

/// `P(|T - E| >= |t - E|)` where `T` sums the ranks under independent random
/// signs. Midranks are multiples of 1/2, so the distribution is tabulated
/// over doubled ranks.
fn exact_p(ranks: &[f64], w_plus: f64) -> f64 {
    let doubled: Vec<usize> = ranks.iter().map(|r| (2.0 * r).round() as usize).collect();
    let max: usize = doubled.iter().sum();
    let mut counts = vec![0u64; max + 1];
    counts[0] = 1;
    let mut reach = 0;
    for &r in &doubled {
        for s in (0..=reach).rev() {
            if counts[s] != 0 {
                counts[s + r] += counts[s];
            }
        }
        reach += r;
    }
    let t = (2.0 * w_plus).round() as i64;
    let centre2 = max as i64; // twice the mean of the doubled sum
    let dev = (2 * t - centre2).abs();
    let extreme: u64 = counts
        .iter()
        .enumerate()
        .filter(|&(s, _)| (2 * s as i64 - centre2).abs() >= dev)
        .map(|(_, &c)| c)
        .sum();
    extreme as f64 / 2f64.powi(ranks.len() as i32)
}

fn normal_p(n: usize, ties: &[usize], w_plus: f64) -> f64 {
    let nf = n as f64;
    let mean = nf * (nf + 1.0) / 4.0;
    let tie_term: f64 = ties.iter().map(|&t| (t * t * t - t) as f64).sum::<f64>() / 48.0;
    let var = nf * (nf + 1.0) * (2.0 * nf + 1.0) / 24.0 - tie_term;
    let z = ((w_plus - mean).abs() - 0.5).max(0.0) / var.sqrt();
    erfc(z / std::f64::consts::SQRT_2).min(1.0)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PairComparison {
    pub a: String,
    pub b: String,
    pub shared_attributes: usize,
    pub test: WilcoxonResult,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct WinAnalysis {
    pub methods: Vec<String>,
    /// `wins[a][b]`: attributes on which method `a` has strictly lower loss.
    pub wins: Vec<Vec<usize>>,
    pub tests: Vec<PairComparison>,
}

/// Win matrix and per-pair signed-rank tests from `method → attribute → loss`.
pub fn win_matrix_and_wilcoxon(
    losses: &BTreeMap<String, BTreeMap<String, f64>>,
) -> Result<WinAnalysis> {
    let methods: Vec<String> = losses.keys().cloned().collect();
    if methods.len() < 2 {
        return Err(Error::Config("need at least two methods to compare".into()));
    }
    let m = methods.len();
    let mut wins = vec![vec![0usize; m]; m];
    let mut tests = Vec::new();
    for i in 0..m {
        for j in (i + 1)..m {
            let la = &losses[&methods[i]];
            let lb = &losses[&methods[j]];
            let diffs: Vec<f64> = la
                .iter()
                .filter_map(|(attr, &x)| lb.get(attr).map(|&y| x - y))
                .collect();
            if diffs.len() < MIN_SHARED_ATTRIBUTES {
                return Err(Error::Config(format!(
                    "methods '{}' and '{}' share {} attributes; at least {MIN_SHARED_ATTRIBUTES} required",
                    methods[i],
                    methods[j],
                    diffs.len()
                )));
            }
            wins[i][j] = diffs.iter().filter(|&&d| d < 0.0).count();
            wins[j][i] = diffs.iter().filter(|&&d| d > 0.0).count();
            tests.push(PairComparison {
                a: methods[i].clone(),
                b: methods[j].clone(),
                shared_attributes: diffs.len(),
                test: signed_rank_test(&diffs)?,
            });
        }
    }
    Ok(WinAnalysis {
        methods,
        wins,
        tests,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::linalg::seeded_rng;
    use proptest::prelude::*;
    use rand::Rng;

    /// Enumerate all 2^n sign assignments of the absolute differences and
    /// rank each assignment independently.
    fn enumeration_p(diffs: &[f64]) -> f64 {
        let nz: Vec<f64> = diffs
            .iter()
            .copied()
            .filter(|&d| d != 0.0)
            .map(f64::abs)
            .collect();
        let n = nz.len();
        let rank_of = |i: usize| {
            let less = nz.iter().filter(|&&v| v < nz[i]).count() as f64;
            let equal = nz.iter().filter(|&&v| v == nz[i]).count() as f64;
            less + (equal + 1.0) / 2.0
        };
        let ranks: Vec<f64> = (0..n).map(rank_of).collect();
        let observed: f64 = diffs
            .iter()
            .filter(|&&d| d != 0.0)
            .zip(&ranks)
            .filter(|(&d, _)| d > 0.0)
            .map(|(_, r)| r)
            .sum();
        let centre = (n * (n + 1)) as f64 / 4.0;
        let mut hits = 0u64;
        for mask in 0u64..(1 << n) {
            let t: f64 = (0..n)
                .filter(|&i| mask >> i & 1 == 1)
                .map(|i| ranks[i])
                .sum();
            if (t - centre).abs() >= (observed - centre).abs() - 1e-9 {
                hits += 1;
            }
        }
        hits as f64 / (1u64 << n) as f64
    }

    #[test]
    fn exact_matches_enumeration_with_and_without_ties() {
        let mut rng = seeded_rng(4);
        for n in 1..=12 {
            for _ in 0..10 {
                let diffs: Vec<f64> = (0..n)
                    .map(|_| (rng.random_range(-4i32..=4) as f64) * 0.25)
                    .collect();
                if diffs.iter().all(|&d| d == 0.0) {
                    continue;
                }
                let r = signed_rank_test(&diffs).unwrap();
                assert_eq!(r.method, TestMethod::Exact);
                assert!((r.p_value - enumeration_p(&diffs)).abs() < 1e-9);
            }
        }
    }

    #[test]
    fn known_small_case() {
        // Ranks 1..6 all positive: only one of 64 sign patterns is as extreme
        // on each side.
        let r = signed_rank_test(&[1.0, 2.0, 3.0, 4.0, 5.0, 6.0]).unwrap();
        assert_eq!(r.w_plus, 21.0);
        assert_eq!(r.statistic, 0.0);
        assert!((r.p_value - 2.0 / 64.0).abs() < 1e-15);
    }

    #[test]
    fn normal_approximation_for_large_samples() {
        let mut rng = seeded_rng(9);
        let diffs: Vec<f64> = (0..200).map(|_| rng.random_range(-1.0..1.2)).collect();
        let r = signed_rank_test(&diffs).unwrap();
        assert_eq!(r.method, TestMethod::Normal);
        assert!(r.p_value > 0.0 && r.p_value <= 1.0);
        assert!((r.w_plus + r.w_minus - 200.0 * 201.0 / 2.0).abs() < 1e-9);
    }

    #[test]
    fn normal_and_exact_agree_near_the_switch() {
        let mut rng = seeded_rng(10);
        let diffs: Vec<f64> = (0..50).map(|_| rng.random_range(-1.0..1.3)).collect();
        let exact = signed_rank_test(&diffs).unwrap();
        let abs: Vec<f64> = diffs.iter().map(|d| d.abs()).collect();
        let (_, ties) = midranks(&abs);
        let approx = normal_p(50, &ties, exact.w_plus);
        assert!((exact.p_value - approx).abs() < 0.01);
    }

    fn table(rows: &[(&str, &[f64])]) -> BTreeMap<String, BTreeMap<String, f64>> {
        rows.iter()
            .map(|(m, vals)| {
                (
                    m.to_string(),
                    vals.iter()
                        .enumerate()
                        .map(|(i, &v)| (format!("attr{i}"), v))
                        .collect(),
                )
            })
            .collect()
    }

    #[test]
    fn dominant_method_wins_everywhere() {
        let t = table(&[
            ("a", &[0.1, 0.2, 0.1, 0.3, 0.2, 0.1, 0.05, 0.2]),
            ("b", &[0.5, 0.6, 0.4, 0.7, 0.9, 0.3, 0.25, 0.8]),
        ]);
        let w = win_matrix_and_wilcoxon(&t).unwrap();
        assert_eq!(w.wins, vec![vec![0, 8], vec![0, 0]]);
        assert!((w.tests[0].test.p_value - 2.0 / 256.0).abs() < 1e-15);
    }

    #[test]
    fn identical_losses_and_too_few_attributes_are_config_errors() {
        let same = table(&[("a", &[0.1; 7]), ("b", &[0.1; 7])]);
        assert!(matches!(
            win_matrix_and_wilcoxon(&same),
            Err(Error::Config(_))
        ));
        let few = table(&[("a", &[0.1; 5]), ("b", &[0.2; 5])]);
        assert!(matches!(
            win_matrix_and_wilcoxon(&few),
            Err(Error::Config(_))
        ));
    }

    proptest! {
        #[test]
        fn p_value_is_a_probability_and_symmetric(diffs in proptest::collection::vec(-3i32..=3, 1..16)) {
            let d: Vec<f64> = diffs.iter().map(|&v| v as f64).collect();
            prop_assume!(d.iter().any(|&v| v != 0.0));
            let neg: Vec<f64> = d.iter().map(|v| -v).collect();
            let a = signed_rank_test(&d).unwrap();
            let b = signed_rank_test(&neg).unwrap();
            prop_assert!(a.p_value > 0.0 && a.p_value <= 1.0);
            prop_assert_eq!(a.p_value, b.p_value);
            prop_assert_eq!(a.statistic, b.statistic);
        }
    }
}
