// SPDX-License-Identifier: MIT OR Apache-2.0

//! Diversity and redundancy of a set of directions.

use nalgebra::DMatrix;
use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::linalg::{dot_f32, norm_f32};
use crate::tensor_io::ActivationMatrix;

/// Exponential of the Shannon entropy of the normalized singular values.
pub fn effective_rank(directions: &ActivationMatrix) -> Result<f64> {
    let (k, d) = (directions.n_samples(), directions.dim());
    let m = DMatrix::from_row_iterator(k, d, directions.as_slice().iter().map(|&v| v as f64));
    let sv = m.singular_values();
    let max = sv.iter().fold(0.0f64, |a, &b| a.max(b));
    if max == 0.0 {
        return Err(Error::DegenerateMatrix(
            "all singular values are zero".into(),
        ));
    }
    // Singular values at the rounding level of the largest one are zero.
    let cutoff = max * k.max(d) as f64 * f64::EPSILON;
    let kept: Vec<f64> = sv.iter().copied().filter(|&s| s > cutoff).collect();
    let total: f64 = kept.iter().sum();
    let entropy: f64 = kept
        .iter()
        .map(|&s| {
            let p = s / total;
            -p * p.ln()
        })
        .sum();
    Ok(entropy.exp())
}

/// Largest `|cos|` between two distinct rows.
pub fn max_pairwise_cosine(directions: &ActivationMatrix) -> Result<f64> {
    let k = directions.n_samples();
    if k < 2 {
        return Err(Error::Config(format!(
            "max pairwise cosine needs at least 2 directions, got {k}"
        )));
    }
    let norms: Vec<f64> = directions.rows().map(norm_f32).collect();
    if let Some(i) = norms.iter().position(|&n| n == 0.0) {
        return Err(Error::DegenerateDirection(format!(
            "direction {i} is all zeros"
        )));
    }
    let best = (0..k)
        .into_par_iter()
        .map(|i| {
            let ri = directions.row(i);
            ((i + 1)..k)
                .map(|j| (dot_f32(ri, directions.row(j)) / (norms[i] * norms[j])).abs())
                .fold(0.0f64, f64::max)
        })
        .reduce(|| 0.0, f64::max);
    Ok(best.min(1.0))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::linalg::seeded_rng;
    use proptest::prelude::*;
    use rand::Rng;

    fn random(k: usize, d: usize, seed: u64) -> ActivationMatrix {
        let mut rng = seeded_rng(seed);
        ActivationMatrix::new(
            k,
            d,
            (0..k * d).map(|_| rng.random_range(-1.0f32..1.0)).collect(),
        )
        .unwrap()
    }

    /// Eigenvalues of a symmetric matrix by cyclic Jacobi rotations.
    fn jacobi_eigenvalues(mut a: Vec<Vec<f64>>) -> Vec<f64> {
        let n = a.len();
        for _ in 0..100 {
            let off: f64 = (0..n)
                .flat_map(|i| (0..n).filter(move |&j| j != i).map(move |j| (i, j)))
                .map(|(i, j)| a[i][j] * a[i][j])
                .sum();
            if off < 1e-26 {
                break;
            }
            for p in 0..n {
                for q in (p + 1)..n {
                    if a[p][q].abs() < 1e-300 {
                        continue;
                    }
                    let theta = (a[q][q] - a[p][p]) / (2.0 * a[p][q]);
                    let t = theta.signum() / (theta.abs() + (theta * theta + 1.0).sqrt());
                    let t = if theta == 0.0 { 1.0 } else { t };
                    let c = 1.0 / (t * t + 1.0).sqrt();
                    let s = t * c;
                    for r in 0..n {
                        let (arp, arq) = (a[r][p], a[r][q]);
                        a[r][p] = c * arp - s * arq;
                        a[r][q] = s * arp + c * arq;
                    }
                    for r in 0..n {
                        let (apr, aqr) = (a[p][r], a[q][r]);
                        a[p][r] = c * apr - s * aqr;
                        a[q][r] = s * apr + c * aqr;
                    }
                }
            }
        }
        (0..n).map(|i| a[i][i]).collect()
    }

    #[test]
    fn random_matrix_matches_gram_eigen_oracle() {
        let m = random(20, 8, 1);
        let mut g = vec![vec![0.0; 8]; 8];
        for r in m.rows() {
            for i in 0..8 {
                for j in 0..8 {
                    g[i][j] += r[i] as f64 * r[j] as f64;
                }
            }
        }
        let sv: Vec<f64> = jacobi_eigenvalues(g)
            .into_iter()
            .map(|e| e.max(0.0).sqrt())
            .collect();
        let total: f64 = sv.iter().sum();
        let h: f64 = sv.iter().map(|s| -(s / total) * (s / total).ln()).sum();
        assert!((effective_rank(&m).unwrap() - h.exp()).abs() < 1e-8);
    }

    #[test]
    fn orthonormal_rows_have_full_effective_rank() {
        let mut data = vec![0.0f32; 5 * 7];
        for i in 0..5 {
            data[i * 7 + i] = 1.0;
        }
        let m = ActivationMatrix::new(5, 7, data).unwrap();
        assert!((effective_rank(&m).unwrap() - 5.0).abs() < 1e-6);
        assert_eq!(max_pairwise_cosine(&m).unwrap(), 0.0);
    }

    #[test]
    fn rank_one_matrix_has_effective_rank_one() {
        let rows: Vec<Vec<f32>> = (1..6)
            .map(|s| vec![s as f32, -2.0 * s as f32, 0.5 * s as f32])
            .collect();
        let m = ActivationMatrix::from_rows(&rows).unwrap();
        assert_eq!(effective_rank(&m).unwrap(), 1.0);
        assert!((max_pairwise_cosine(&m).unwrap() - 1.0).abs() < 1e-12);
    }

    #[test]
    fn zero_matrix_and_zero_rows_are_rejected() {
        let z = ActivationMatrix::new(2, 2, vec![0.0; 4]).unwrap();
        assert!(matches!(
            effective_rank(&z),
            Err(Error::DegenerateMatrix(_))
        ));
        assert!(matches!(
            max_pairwise_cosine(&z),
            Err(Error::DegenerateDirection(_))
        ));
        let one = ActivationMatrix::new(1, 2, vec![1.0, 0.0]).unwrap();
        assert!(matches!(max_pairwise_cosine(&one), Err(Error::Config(_))));
    }

    #[test]
    fn duplicated_row_gives_cosine_one() {
        let m =
            ActivationMatrix::from_rows(&[vec![0.3, 0.4], vec![1.0, 0.0], vec![0.3, 0.4]]).unwrap();
        assert!((max_pairwise_cosine(&m).unwrap() - 1.0).abs() < 1e-12);
    }

    proptest! {
        #[test]
        fn cosine_matches_double_loop(seed in 0u64..200, k in 2usize..12, d in 1usize..9) {
            let m = random(k, d, seed);
            prop_assume!(m.rows().all(|r| r.iter().any(|&v| v != 0.0)));
            let mut best = 0.0f64;
            for i in 0..k {
                for j in 0..k {
                    if i != j {
                        best = best.max(crate::linalg::cosine_f32(m.row(i), m.row(j)).unwrap().abs());
                    }
                }
            }
            prop_assert!((max_pairwise_cosine(&m).unwrap() - best.min(1.0)).abs() < 1e-12);
        }

        #[test]
        fn effective_rank_is_bounded(seed in 0u64..200, k in 1usize..10, d in 1usize..10) {
            let m = random(k, d, seed);
            let r = effective_rank(&m).unwrap();
            prop_assert!(r >= 1.0 - 1e-12 && r <= k.min(d) as f64 + 1e-9);
        }
    }
}
