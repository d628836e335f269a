// SPDX-License-Identifier: MIT OR Apache-2.0

//! Quantitative evaluation of concept dictionaries: probe loss, maximum
//! pairwise Pearson correlation, spectral diversity and paired method
//! comparisons.

pub mod diversity;
pub mod mppc;
pub mod probe;
pub mod wilcoxon;

pub use diversity::{effective_rank, max_pairwise_cosine};
pub use mppc::{mppc, mppc_significance, MppcResult, Significance};
pub use probe::{
    logistic_probe_1d, probe_loss, probe_loss_with, ClassProbe, ProbeConfig, ProbeFit, ProbeResult,
};
pub use wilcoxon::{
    signed_rank_test, win_matrix_and_wilcoxon, PairComparison, TestMethod, WilcoxonResult,
    WinAnalysis,
};

/// Median with the mean-of-middle-two convention for even counts.
pub fn median(values: &[f64]) -> Option<f64> {
    if values.is_empty() {
        return None;
    }
    let mut v = values.to_vec();
    v.sort_by(f64::total_cmp);
    let m = v.len() / 2;
    Some(if v.len() % 2 == 1 {
        v[m]
    } else {
        0.5 * (v[m - 1] + v[m])
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn median_conventions() {
        assert_eq!(median(&[]), None);
        assert_eq!(median(&[3.0]), Some(3.0));
        assert_eq!(median(&[4.0, 1.0]), Some(2.5));
        assert_eq!(median(&[5.0, 1.0, 3.0]), Some(3.0));
    }
}
