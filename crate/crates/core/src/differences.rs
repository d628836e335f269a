// SPDX-License-Identifier: MIT OR Apache-2.0

//! Pairwise activation differences and their skewness weights.
//!
//! Each sample is paired with exactly one other sample through a
//! fixed-point-free permutation, so every point appears once on each side of
//! a subtraction and the difference set has the same size as the dataset.
//! A difference `d` is scored by the skewness of the dataset projected onto
//! it; rows with negative skewness are flipped so that opposite directions
//! fall into the same cluster, and each row gets weight `1 / max(skew, eps)`.

use rand::seq::SliceRandom;
use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::linalg::{dot_mixed, seeded_rng};
use crate::tensor_io::ActivationMatrix;

pub const DEFAULT_SKEW_EPSILON: f64 = 1e-3;

/// Sample `i` is paired with sample `target[i]`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct PairPermutation {
    target: Vec<usize>,
}

impl PairPermutation {
    /// Validates that `target` is a permutation without fixed points.
    pub fn new(target: Vec<usize>) -> Result<Self> {
        let n = target.len();
        if n < 2 {
            return Err(Error::TooFewSamples { needed: 2, got: n });
        }
        let mut seen = vec![false; n];
        for (i, &t) in target.iter().enumerate() {
            if t >= n || seen[t] {
                return Err(Error::Config(format!("target is not a permutation at {i}")));
            }
            if t == i {
                return Err(Error::Config(format!("index {i} is paired with itself")));
            }
            seen[t] = true;
        }
        Ok(Self { target })
    }

    pub fn n(&self) -> usize {
        self.target.len()
    }

    pub fn target(&self) -> &[usize] {
        &self.target
    }
}

/// Random fixed-point-free pairing of `0..n`.
///
/// A uniformly shuffled permutation has its fixed points repaired by
/// swapping with the next index (cyclically). Each swap leaves both touched
/// positions free of fixed points, so one forward pass suffices.
pub fn sample_pairs(n: usize, seed: u64) -> Result<PairPermutation> {
    if n < 2 {
        return Err(Error::TooFewSamples { needed: 2, got: n });
    }
    let mut rng = seeded_rng(seed);
    let mut target: Vec<usize> = (0..n).collect();
    target.shuffle(&mut rng);
    for i in 0..n {
        if target[i] == i {
            target.swap(i, (i + 1) % n);
        }
    }
    debug_assert!(target.iter().enumerate().all(|(i, &t)| i != t));
    Ok(PairPermutation { target })
}

/// Row `i` of the result is `acts[i] - acts[target[i]]`.
pub fn compute_differences(
    acts: &ActivationMatrix,
    perm: &PairPermutation,
) -> Result<ActivationMatrix> {
    if perm.n() != acts.n_samples() {
        return Err(Error::Shape(format!(
            "permutation over {} samples but matrix has {}",
            perm.n(),
            acts.n_samples()
        )));
    }
    let mut data = Vec::with_capacity(acts.n_samples() * acts.dim());
    for (i, &j) in perm.target().iter().enumerate() {
        data.extend(acts.row(i).iter().zip(acts.row(j)).map(|(a, b)| a - b));
    }
    ActivationMatrix::new(acts.n_samples(), acts.dim(), data)
}

/// Normalized third central moment of a set of values, with population
/// standard deviation. Returns 0 when the values have no spread.
pub fn skewness(values: &[f64]) -> f64 {
    let n = values.len() as f64;
    let mean = values.iter().sum::<f64>() / n;
    let mut m2 = 0.0;
    let mut m3 = 0.0;
    let mut scale = 0.0f64;
    for &v in values {
        let d = v - mean;
        let d2 = d * d;
        m2 += d2;
        m3 += d2 * d;
        scale = scale.max(v.abs());
    }
    m2 /= n;
    m3 /= n;
    let sigma = m2.sqrt();
    // Spread at the rounding level of the values is treated as none.
    if sigma == 0.0 || sigma <= 1e-12 * scale {
        return 0.0;
    }
    m3 / (sigma * sigma * sigma)
}

fn check_reference(dim: usize, acts: &ActivationMatrix) -> Result<()> {
    if acts.n_samples() < 3 {
        return Err(Error::TooFewSamples {
            needed: 3,
            got: acts.n_samples(),
        });
    }
    if dim != acts.dim() {
        return Err(Error::Shape(format!(
            "direction has {dim} entries but activations have dimension {}",
            acts.dim()
        )));
    }
    Ok(())
}

fn skewness_into(direction: &[f32], acts: &ActivationMatrix, buf: &mut Vec<f64>) -> f64 {
    let dir: Vec<f64> = direction.iter().map(|&v| v as f64).collect();
    buf.clear();
    buf.extend(acts.rows().map(|x| dot_mixed(&dir, x)));
    skewness(buf)
}

/// Skewness of `{direction · x_j}` over all rows `x_j` of `acts`.
pub fn projection_skewness(direction: &[f32], acts: &ActivationMatrix) -> Result<f64> {
    check_reference(direction.len(), acts)?;
    let mut buf = Vec::with_capacity(acts.n_samples());
    Ok(skewness_into(direction, acts, &mut buf))
}

/// Sign-canonicalized differences with per-row skewness and weights.
#[derive(Debug, Clone, PartialEq)]
pub struct DifferenceSet {
    pub rows: ActivationMatrix,
    pub skewness: Vec<f64>,
    pub weights: Vec<f64>,
}

impl DifferenceSet {
    pub fn len(&self) -> usize {
        self.rows.n_samples()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }
}

/// Flip rows whose projection skewness over `reference` is negative and
/// weight each row by `1 / max(skewness, epsilon)`.
pub fn canonicalize_and_weight(
    rows: ActivationMatrix,
    reference: &ActivationMatrix,
    epsilon: f64,
) -> Result<DifferenceSet> {
    if !(epsilon > 0.0 && epsilon.is_finite()) {
        return Err(Error::Config(format!(
            "skew epsilon must be positive, got {epsilon}"
        )));
    }
    check_reference(rows.dim(), reference)?;

    let raw: Vec<f64> = rows
        .as_slice()
        .par_chunks_exact(rows.dim())
        .map_init(
            || Vec::with_capacity(reference.n_samples()),
            |buf, row| skewness_into(row, reference, buf),
        )
        .collect();

    let (n, dim) = (rows.n_samples(), rows.dim());
    let mut data = rows.into_vec();
    let mut skew = Vec::with_capacity(n);
    for (i, s) in raw.into_iter().enumerate() {
        if s < 0.0 {
            for v in &mut data[i * dim..(i + 1) * dim] {
                *v = -*v;
            }
            skew.push(-s);
        } else {
            skew.push(s);
        }
    }
    let weights = skew.iter().map(|&s| 1.0 / s.max(epsilon)).collect();
    Ok(DifferenceSet {
        rows: ActivationMatrix::new(n, dim, data)?,
        skewness: skew,
        weights,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;
    use rand::Rng;

    fn random_matrix(n: usize, d: usize, seed: u64) -> ActivationMatrix {
        let mut rng = seeded_rng(seed);
        let data = (0..n * d).map(|_| rng.random_range(-1.0f32..1.0)).collect();
        ActivationMatrix::new(n, d, data).unwrap()
    }

    /// Skewness written straight from its definition, one pass per moment.
    fn skewness_oracle(p: &[f64]) -> f64 {
        let n = p.len() as f64;
        let mean = p.iter().sum::<f64>() / n;
        let var = p.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / n;
        let third = p.iter().map(|v| (v - mean).powi(3)).sum::<f64>();
        third / (n * var.sqrt().powi(3))
    }

    #[test]
    fn two_points_have_a_single_pairing() {
        for seed in 0..20 {
            assert_eq!(sample_pairs(2, seed).unwrap().target(), &[1, 0]);
        }
        assert!(matches!(
            sample_pairs(1, 0),
            Err(Error::TooFewSamples { .. })
        ));
        assert!(matches!(
            sample_pairs(0, 0),
            Err(Error::TooFewSamples { .. })
        ));
    }

    #[test]
    fn large_pairing_has_no_fixed_points() {
        let perm = sample_pairs(1000, 7).unwrap();
        let fixed = perm
            .target()
            .iter()
            .enumerate()
            .filter(|(i, &t)| *i == t)
            .count();
        assert_eq!(fixed, 0);
        let mut sorted = perm.target().to_vec();
        sorted.sort_unstable();
        assert_eq!(sorted, (0..1000).collect::<Vec<_>>());
        assert_eq!(perm, sample_pairs(1000, 7).unwrap());
        assert_ne!(perm, sample_pairs(1000, 8).unwrap());
    }

    #[test]
    fn differences_of_two_rows() {
        let acts = ActivationMatrix::from_rows(&[vec![1.0, 0.0], vec![0.0, 1.0]]).unwrap();
        let perm = PairPermutation::new(vec![1, 0]).unwrap();
        let d = compute_differences(&acts, &perm).unwrap();
        assert_eq!(d.as_slice(), &[1.0, -1.0, -1.0, 1.0]);
    }

    #[test]
    fn identical_rows_give_zero_difference() {
        let acts = ActivationMatrix::from_rows(&[vec![2.0, 3.0], vec![2.0, 3.0]]).unwrap();
        let d = compute_differences(&acts, &sample_pairs(2, 0).unwrap()).unwrap();
        assert!(d.as_slice().iter().all(|&v| v == 0.0));
    }

    #[test]
    fn differences_match_loop_oracle() {
        let acts = random_matrix(10, 4, 1);
        let perm = sample_pairs(10, 3).unwrap();
        let d = compute_differences(&acts, &perm).unwrap();
        for i in 0..10 {
            for c in 0..4 {
                let expected = acts.row(i)[c] - acts.row(perm.target()[i])[c];
                assert_eq!(d.row(i)[c], expected);
            }
        }
        let short = sample_pairs(9, 0).unwrap();
        assert!(matches!(
            compute_differences(&acts, &short),
            Err(Error::Shape(_))
        ));
    }

    fn column(values: &[f32]) -> ActivationMatrix {
        ActivationMatrix::new(values.len(), 1, values.to_vec()).unwrap()
    }

    #[test]
    fn skewness_reference_values() {
        let sym = projection_skewness(&[1.0], &column(&[-1.0, 0.0, 1.0])).unwrap();
        assert_eq!(sym, 0.0);
        let s = projection_skewness(&[1.0], &column(&[0.0, 0.0, 1.0])).unwrap();
        assert!((s - std::f64::consts::FRAC_1_SQRT_2).abs() < 1e-12, "{s}");
        assert_eq!(
            projection_skewness(&[1.0], &column(&[0.3; 5])).unwrap(),
            0.0
        );
        assert!(matches!(
            projection_skewness(&[1.0], &column(&[0.0, 1.0])),
            Err(Error::TooFewSamples { .. })
        ));
        assert!(matches!(
            projection_skewness(&[1.0, 0.0], &column(&[0.0, 1.0, 2.0])),
            Err(Error::Shape(_))
        ));
    }

    #[test]
    fn negative_skew_row_is_flipped() {
        // Projections on +e0 are {0, 0, -1}: skewness -1/sqrt(2).
        let reference = ActivationMatrix::from_rows(&[vec![0.0], vec![0.0], vec![-1.0]]).unwrap();
        let rows = ActivationMatrix::from_rows(&[vec![2.0], vec![-3.0]]).unwrap();
        let set = canonicalize_and_weight(rows, &reference, 1e-3).unwrap();
        assert_eq!(set.rows.as_slice(), &[-2.0, -3.0]);
        let s = std::f64::consts::FRAC_1_SQRT_2;
        assert!((set.skewness[0] - s).abs() < 1e-12);
        assert!((set.skewness[1] - s).abs() < 1e-12);
        assert!((set.weights[0] - 1.0 / s).abs() < 1e-12);
    }

    #[test]
    fn weight_is_inverse_of_flipped_skewness() {
        let reference = column(&[0.0, 0.0, 0.0, 1.0, 1.0, 4.0]);
        let s = projection_skewness(&[-1.0], &reference).unwrap();
        assert!(s < 0.0);
        let set = canonicalize_and_weight(column(&[-1.0]), &reference, 1e-3).unwrap();
        assert_eq!(set.rows.as_slice(), &[1.0]);
        assert!((set.skewness[0] + s).abs() < 1e-12);
        assert!((set.weights[0] - 1.0 / -s).abs() < 1e-12);
    }

    #[test]
    fn symmetric_row_gets_capped_weight() {
        let reference = column(&[-1.0, 0.0, 1.0]);
        let set = canonicalize_and_weight(column(&[1.0]), &reference, 1e-3).unwrap();
        assert_eq!(set.skewness[0], 0.0);
        assert_eq!(set.weights[0], 1000.0);
        let zero = canonicalize_and_weight(column(&[0.0]), &reference, 1e-3).unwrap();
        assert_eq!(zero.weights[0], 1000.0);
        assert!(matches!(
            canonicalize_and_weight(column(&[1.0]), &reference, 0.0),
            Err(Error::Config(_))
        ));
    }

    #[test]
    fn canonicalized_set_matches_loop_oracle() {
        let mut rng = seeded_rng(11);
        let data: Vec<f32> = (0..40 * 5)
            .map(|_| {
                let u: f32 = rng.random();
                u.powi(3) - 0.2
            })
            .collect();
        let acts = ActivationMatrix::new(40, 5, data).unwrap();
        let rows = random_matrix(8, 5, 12);
        let set = canonicalize_and_weight(rows.clone(), &acts, 1e-3).unwrap();
        for i in 0..8 {
            let p: Vec<f64> = acts
                .rows()
                .map(|x| {
                    x.iter()
                        .zip(rows.row(i))
                        .map(|(&a, &b)| a as f64 * b as f64)
                        .sum()
                })
                .collect();
            let s = skewness_oracle(&p);
            assert!((set.skewness[i] - s.abs()).abs() <= 1e-9 * s.abs().max(1.0));
            assert!(set.skewness[i] >= 0.0);
            assert_eq!(set.weights[i], 1.0 / set.skewness[i].max(1e-3));
            let sign = if s < 0.0 { -1.0 } else { 1.0 };
            for c in 0..5 {
                assert_eq!(set.rows.row(i)[c], sign * rows.row(i)[c]);
            }
        }
    }

    proptest! {
        #[test]
        fn pairing_is_always_a_derangement(n in 2usize..300, seed in any::<u64>()) {
            let perm = sample_pairs(n, seed).unwrap();
            prop_assert!(PairPermutation::new(perm.target().to_vec()).is_ok());
        }

        #[test]
        fn skewness_is_odd_and_scale_free(seed in 0u64..500, lambda in 0.01f32..100.0) {
            let acts = random_matrix(30, 3, seed);
            let mut rng = seeded_rng(seed ^ 0xabcd);
            let d: Vec<f32> = (0..3).map(|_| rng.random_range(-1.0f32..1.0)).collect();
            let s = projection_skewness(&d, &acts).unwrap();
            let neg: Vec<f32> = d.iter().map(|v| -v).collect();
            let scaled: Vec<f32> = d.iter().map(|v| v * lambda).collect();
            let sn = projection_skewness(&neg, &acts).unwrap();
            let ss = projection_skewness(&scaled, &acts).unwrap();
            prop_assert!((s + sn).abs() <= 1e-6 * s.abs().max(1e-12));
            // Scaling in f32 perturbs the direction by an ulp, so allow an absolute floor.
            prop_assert!((s - ss).abs() <= 1e-5 * s.abs().max(1.0));
        }

        #[test]
        fn weights_are_bounded(seed in 0u64..200, eps in 1e-4f64..1.0) {
            let acts = random_matrix(20, 3, seed);
            let rows = random_matrix(6, 3, seed + 1);
            let set = canonicalize_and_weight(rows, &acts, eps).unwrap();
            for (&s, &w) in set.skewness.iter().zip(&set.weights) {
                prop_assert!(s >= 0.0);
                prop_assert!(w > 0.0 && w <= 1.0 / eps);
            }
        }
    }
}
