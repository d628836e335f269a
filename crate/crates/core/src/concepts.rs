// SPDX-License-Identifier: MIT OR Apache-2.0

//! End-to-end concept extraction and concept scoring.
//!
//! The pipeline pairs every sample with another, takes the activation
//! differences, orients and weights them by projection skewness, clusters
//! them with weighted k-means and emits the (unit-normalized) centroids as
//! concept directions.

use rand::seq::index;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::differences::{
    canonicalize_and_weight, compute_differences, sample_pairs, DEFAULT_SKEW_EPSILON,
};
use crate::error::{Error, Result};
use crate::linalg::{dot_f32, seeded_rng};
use crate::tensor_io::{ActivationMatrix, ConceptDictionary, ConceptMeta};
use crate::wkmeans::{self, ClusteringConfig, ClusteringResult, InitMethod};

pub const DEFAULT_K: usize = 6144;
pub const METHOD_DELEUZIAN: &str = "deleuzian";

/// What the clustering runs on.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "lowercase")]
pub enum InputSpace {
    /// Pairwise activation differences.
    #[default]
    Differences,
    /// The activations themselves.
    Activations,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExtractionConfig {
    pub k: usize,
    pub skew_epsilon: f64,
    pub seed: u64,
    pub normalize: bool,
    /// Orient rows by skewness sign and weight them by inverse skewness.
    /// When off, rows are clustered as-is with unit weights.
    pub weighting: bool,
    pub input: InputSpace,
    /// Compute skewness over a random subset of this many samples instead
    /// of the whole dataset.
    pub skew_sample: Option<usize>,
    pub max_iters: usize,
    pub tol: f64,
    pub init: InitMethod,
}

impl Default for ExtractionConfig {
    fn default() -> Self {
        let clustering = ClusteringConfig::default();
        Self {
            k: DEFAULT_K,
            skew_epsilon: DEFAULT_SKEW_EPSILON,
            seed: 0,
            normalize: true,
            weighting: true,
            input: InputSpace::Differences,
            skew_sample: None,
            max_iters: clustering.max_iters,
            tol: clustering.tol,
            init: clustering.init,
        }
    }
}

impl ExtractionConfig {
    pub fn with_k(k: usize) -> Self {
        Self {
            k,
            ..Self::default()
        }
    }

    /// Clustering parameters; the clustering seed is derived from `seed` so
    /// it draws from a different stream than pair sampling.
    pub fn clustering(&self) -> ClusteringConfig {
        ClusteringConfig {
            k: self.k,
            max_iters: self.max_iters,
            tol: self.tol,
            seed: self.seed ^ 0x9e37_79b9_7f4a_7c15,
            init: self.init,
        }
    }

    /// Method tag recorded in dictionary metadata.
    pub fn method_tag(&self) -> &'static str {
        match (self.input, self.weighting) {
            (InputSpace::Differences, true) => METHOD_DELEUZIAN,
            (InputSpace::Differences, false) => "kmeans-diff",
            (InputSpace::Activations, true) => "kmeans-acts-weighted",
            (InputSpace::Activations, false) => "kmeans-acts",
        }
    }
}

/// An extracted dictionary together with clustering diagnostics.
#[derive(Debug, Clone)]
pub struct Extraction {
    pub dictionary: ConceptDictionary,
    pub clustering: ClusteringResult,
    /// Inverse-skewness weights used for clustering (all ones when
    /// weighting is off).
    pub weights: Vec<f64>,
}

/// Rough peak working-set size of [`extract`] in bytes.
pub fn memory_estimate_bytes(n: usize, dim: usize, k: usize) -> usize {
    // activations + difference rows + weights/skewness/assignment + centroids
    n * dim * 4 * 2 + n * (8 * 3) + k * dim * 8 * 2
}

pub fn extract(acts: &ActivationMatrix, cfg: &ExtractionConfig) -> Result<ConceptDictionary> {
    extract_detailed(acts, cfg).map(|e| e.dictionary)
}

pub fn extract_detailed(acts: &ActivationMatrix, cfg: &ExtractionConfig) -> Result<Extraction> {
    let n = acts.n_samples();
    if n < 3 {
        return Err(Error::TooFewSamples { needed: 3, got: n });
    }
    if cfg.k == 0 {
        return Err(Error::Config("k must be at least 1".into()));
    }

    let rows = match cfg.input {
        InputSpace::Differences => compute_differences(acts, &sample_pairs(n, cfg.seed)?)?,
        InputSpace::Activations => acts.clone(),
    };

    let (points, weights) = if cfg.weighting {
        let subset;
        let reference = match cfg.skew_sample {
            Some(m) if m < n => {
                if m < 3 {
                    return Err(Error::Config(format!(
                        "skew_sample must be at least 3, got {m}"
                    )));
                }
                let mut rng = seeded_rng(cfg.seed.wrapping_add(0x5bd1_e995));
                let mut idx = index::sample(&mut rng, n, m).into_vec();
                idx.sort_unstable();
                subset = acts.select_rows(&idx)?;
                &subset
            }
            _ => acts,
        };
        let set = canonicalize_and_weight(rows, reference, cfg.skew_epsilon)?;
        (set.rows, set.weights)
    } else {
        let n_rows = rows.n_samples();
        (rows, vec![1.0; n_rows])
    };

    let clustering = wkmeans::fit(&points, &weights, &cfg.clustering())?;

    let dim = acts.dim();
    let mut directions = Vec::with_capacity(cfg.k * dim);
    for c in 0..cfg.k {
        let row = clustering.centroids.row(c);
        let norm = crate::linalg::norm_f64(row);
        if norm == 0.0 || row.iter().all(|&v| v as f32 == 0.0) {
            return Err(Error::DegenerateConcept { cluster: c });
        }
        let scale = if cfg.normalize { 1.0 / norm } else { 1.0 };
        directions.extend(row.iter().map(|&v| (v * scale) as f32));
    }

    let meta = ConceptMeta {
        method: cfg.method_tag().to_string(),
        seed: Some(cfg.seed),
        k: cfg.k,
        dim,
        skew_epsilon: cfg.weighting.then_some(cfg.skew_epsilon),
        normalized: cfg.normalize,
        source_sha256: acts.fingerprint(),
        notes: vec![],
    };
    let dictionary = ConceptDictionary::new(ActivationMatrix::new(cfg.k, dim, directions)?, meta)?;
    Ok(Extraction {
        dictionary,
        clustering,
        weights,
    })
}

/// `N × k` matrix of per-sample concept activations.
#[derive(Debug, Clone, PartialEq)]
pub struct ConceptScores(ActivationMatrix);

impl ConceptScores {
    pub fn new(matrix: ActivationMatrix) -> Self {
        Self(matrix)
    }

    pub fn n_samples(&self) -> usize {
        self.0.n_samples()
    }

    pub fn k(&self) -> usize {
        self.0.dim()
    }

    pub fn get(&self, sample: usize, concept: usize) -> f32 {
        self.0.row(sample)[concept]
    }

    pub fn column(&self, concept: usize) -> Vec<f64> {
        self.0.rows().map(|r| r[concept] as f64).collect()
    }

    pub fn as_matrix(&self) -> &ActivationMatrix {
        &self.0
    }

    pub fn into_matrix(self) -> ActivationMatrix {
        self.0
    }
}

/// Raw dot products `s[j][c] = x_j · c_c`.
pub fn score(acts: &ActivationMatrix, dict: &ConceptDictionary) -> Result<ConceptScores> {
    if acts.dim() != dict.dim() {
        return Err(Error::Shape(format!(
            "activations have dimension {} but dictionary has {}",
            acts.dim(),
            dict.dim()
        )));
    }
    let k = dict.k();
    let data: Vec<f32> = acts
        .as_slice()
        .par_chunks_exact(acts.dim())
        .flat_map_iter(|x| (0..k).map(move |c| dot_f32(x, dict.direction(c)) as f32))
        .collect();
    Ok(ConceptScores(ActivationMatrix::new(
        acts.n_samples(),
        k,
        data,
    )?))
}

/// Indices of the `m` highest-scoring samples for `concept`, descending,
/// lower index first on ties.
pub fn top_activating(scores: &ConceptScores, concept: usize, m: usize) -> Result<Vec<usize>> {
    if concept >= scores.k() {
        return Err(Error::Index {
            what: "concepts",
            index: concept,
            len: scores.k(),
        });
    }
    if m > scores.n_samples() {
        return Err(Error::Config(format!(
            "requested {m} samples but only {} exist",
            scores.n_samples()
        )));
    }
    let col = scores.column(concept);
    let mut idx: Vec<usize> = (0..col.len()).collect();
    idx.sort_by(|&a, &b| col[b].total_cmp(&col[a]));
    idx.truncate(m);
    Ok(idx)
}
