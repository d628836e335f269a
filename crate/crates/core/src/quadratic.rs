// SPDX-License-Identifier: MIT OR Apache-2.0

//! Quadratic discriminant concepts.
//!
//! Each sampled pair `(x_i, x_j)` yields `δ(x) = -½ xᵀ A x + bᵀ x` with
//! `A = Σ_i⁻¹ - Σ_j⁻¹` and `b = Σ_i⁻¹ μ_i - Σ_j⁻¹ μ_j`, where the covariances are
//! Ledoit-Wolf estimates over the nearest neighbours of each anchor. The
//! discriminants are clustered under the functional distance
//! `½‖ΔA‖²_F + ‖Δb‖²`, whose Fréchet mean is the weighted average of the
//! parameters.
//!
//! Because that distance is Euclidean in the embedding `φ(δ) = (A/√2, b)`,
//! clustering runs the ordinary Lloyd iteration on `φ`; centroids are mapped
//! back and recomputed in `f64` with [`frechet_centroid`].

use std::fs;
use std::path::Path;

use nalgebra::{Cholesky, DMatrix, DVector};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::concepts::ConceptScores;
use crate::differences::sample_pairs;
use crate::error::{Error, Result};
use crate::tensor_io::{self, ActivationMatrix};
use crate::wkmeans::{self, ClusteringConfig, InitMethod};

pub const METHOD_QUADRATIC: &str = "quadratic-deleuzian";
pub const DEFAULT_NEIGHBORS: usize = 50;
pub const DEFAULT_RELATIVE_RIDGE: f64 = 1e-6;
pub const MAX_DIM_WITHOUT_OVERRIDE: usize = 256;
pub const META_FILE: &str = "quadratic.meta.json";

/// Indices of the `m` nearest samples to `query` (Euclidean), excluding the
/// query itself; ascending distance, ties by index.
pub fn knn(acts: &ActivationMatrix, query: usize, m: usize) -> Result<Vec<usize>> {
    let n = acts.n_samples();
    if query >= n {
        return Err(Error::Index {
            what: "samples",
            index: query,
            len: n,
        });
    }
    if m >= n {
        return Err(Error::Config(format!(
            "cannot take {m} neighbours from {n} samples"
        )));
    }
    let q = acts.row(query);
    let mut dist: Vec<(f64, usize)> = (0..n)
        .filter(|&j| j != query)
        .map(|j| (crate::linalg::sq_dist_f32(q, acts.row(j)), j))
        .collect();
    let cmp = |a: &(f64, usize), b: &(f64, usize)| a.0.total_cmp(&b.0).then(a.1.cmp(&b.1));
    if m < dist.len() {
        dist.select_nth_unstable_by(m, cmp);
        dist.truncate(m);
    }
    dist.sort_unstable_by(cmp);
    Ok(dist.into_iter().map(|(_, j)| j).collect())
}

#[derive(Debug, Clone, PartialEq)]
pub struct ShrunkCovariance {
    pub sigma: DMatrix<f64>,
    pub alpha: f64,
    pub mean: Vec<f64>,
    pub n: usize,
}

/// Ledoit-Wolf shrinkage of the sample covariance toward `tr(S)/d · I`.
pub fn ledoit_wolf<'a>(rows: impl IntoIterator<Item = &'a [f32]>) -> Result<ShrunkCovariance> {
    let rows: Vec<&[f32]> = rows.into_iter().collect();
    let n = rows.len();
    if n < 2 {
        return Err(Error::TooFewSamples { needed: 2, got: n });
    }
    let d = rows[0].len();
    let mut mean = vec![0.0; d];
    for r in &rows {
        for (m, &v) in mean.iter_mut().zip(r.iter()) {
            *m += v as f64;
        }
    }
    mean.iter_mut().for_each(|m| *m /= n as f64);
    let x = DMatrix::from_fn(n, d, |t, c| rows[t][c] as f64 - mean[c]);
    let s = x.tr_mul(&x) / n as f64;
    let mu = s.trace() / d as f64;
    let target = DMatrix::<f64>::identity(d, d) * mu;
    let delta = (&s - &target).norm_squared();
    let s_norm2 = s.norm_squared();
    let fourth: f64 = (0..n).map(|t| x.row(t).norm_squared().powi(2)).sum();
    let beta = ((fourth / n as f64 - s_norm2) / n as f64).max(0.0);
    let alpha = if delta > 0.0 {
        (beta.min(delta) / delta).clamp(0.0, 1.0)
    } else {
        0.0
    };
    let sigma = &s * (1.0 - alpha) + target * alpha;
    Ok(ShrunkCovariance {
        sigma,
        alpha,
        mean,
        n,
    })
}

#[derive(Debug, Clone, PartialEq)]
pub struct QuadraticDiscriminant {
    pub dim: usize,
    /// Symmetric `dim × dim`.
    pub a: DMatrix<f64>,
    pub b: DVector<f64>,
}

impl QuadraticDiscriminant {
    pub fn new(a: DMatrix<f64>, b: DVector<f64>) -> Result<Self> {
        let dim = b.len();
        if a.nrows() != dim || a.ncols() != dim {
            return Err(Error::Shape(format!(
                "A is {}×{} but b has length {dim}",
                a.nrows(),
                a.ncols()
            )));
        }
        if a.iter().chain(b.iter()).any(|v| !v.is_finite()) {
            return Err(Error::Data("discriminant has non-finite entries".into()));
        }
        let a = (&a + a.transpose()) * 0.5;
        Ok(Self { dim, a, b })
    }

    /// `δ(x) = -½ xᵀ A x + bᵀ x`.
    pub fn evaluate(&self, x: &[f32]) -> f64 {
        let x = DVector::from_iterator(self.dim, x.iter().map(|&v| v as f64));
        -0.5 * x.dot(&(&self.a * &x)) + self.b.dot(&x)
    }

    fn embed(&self) -> Vec<f32> {
        let s = std::f64::consts::FRAC_1_SQRT_2;
        // Row-major A followed by b.
        let mut out = Vec::with_capacity(self.dim * self.dim + self.dim);
        for r in 0..self.dim {
            for c in 0..self.dim {
                out.push((self.a[(r, c)] * s) as f32);
            }
        }
        out.extend(self.b.iter().map(|&v| v as f32));
        out
    }
}

/// `½‖A₁ - A₂‖²_F + ‖b₁ - b₂‖²`.
pub fn functional_distance(d1: &QuadraticDiscriminant, d2: &QuadraticDiscriminant) -> Result<f64> {
    if d1.dim != d2.dim {
        return Err(Error::Shape(format!(
            "discriminant dimensions differ: {} vs {}",
            d1.dim, d2.dim
        )));
    }
    Ok(0.5 * (&d1.a - &d2.a).norm_squared() + (&d1.b - &d2.b).norm_squared())
}

/// Minimizer of `Σ w_i D²(·, δ_i)`: the normalized weighted mean of `(A, b)`.
pub fn frechet_centroid(
    members: &[&QuadraticDiscriminant],
    weights: &[f64],
) -> Result<QuadraticDiscriminant> {
    let first = members.first().ok_or(Error::EmptyCluster)?;
    if weights.len() != members.len() {
        return Err(Error::Shape(format!(
            "{} weights for {} discriminants",
            weights.len(),
            members.len()
        )));
    }
    if weights.iter().any(|&w| !(w > 0.0 && w.is_finite())) {
        return Err(Error::Config("centroid weights must be positive".into()));
    }
    let total: f64 = weights.iter().sum();
    let dim = first.dim;
    let mut a = DMatrix::zeros(dim, dim);
    let mut b = DVector::zeros(dim);
    for (m, &w) in members.iter().zip(weights) {
        if m.dim != dim {
            return Err(Error::Shape("discriminant dimensions differ".into()));
        }
        a += &m.a * (w / total);
        b += &m.b * (w / total);
    }
    QuadraticDiscriminant::new(a, b)
}

/// Where each side's quadratic is centred in `b`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default, clap::ValueEnum)]
#[serde(rename_all = "kebab-case")]
pub enum Center {
    /// The anchor sample itself, so isotropic neighbourhoods reproduce
    /// `b ∝ x_i - x_j`.
    #[default]
    Anchor,
    /// The mean of the anchor's neighbourhood.
    NeighborhoodMean,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct DiscriminantConfig {
    /// Neighbourhood size including the anchor.
    pub n_neighbors: usize,
    /// Ridge added before inversion, as a fraction of `tr(Σ)/D`.
    pub ridge: f64,
    pub center: Center,
}

impl Default for DiscriminantConfig {
    fn default() -> Self {
        Self {
            n_neighbors: DEFAULT_NEIGHBORS,
            ridge: DEFAULT_RELATIVE_RIDGE,
            center: Center::Anchor,
        }
    }
}

fn regularized_inverse(sigma: &DMatrix<f64>, ridge: f64) -> Result<DMatrix<f64>> {
    let d = sigma.nrows();
    let tr = sigma.trace();
    if !(tr > 0.0) {
        return Err(Error::SingularCovariance(
            "covariance has zero trace".into(),
        ));
    }
    let reg = sigma + DMatrix::identity(d, d) * (ridge * tr / d as f64);
    let chol = Cholesky::new(reg)
        .ok_or_else(|| Error::SingularCovariance("Cholesky factorization failed".into()))?;
    let inv = chol.inverse();
    if inv.iter().any(|v| !v.is_finite()) {
        return Err(Error::SingularCovariance("inverse is not finite".into()));
    }
    Ok(inv)
}

/// `A = Σ_i⁻¹ - Σ_j⁻¹`, `b = Σ_i⁻¹ μ_i - Σ_j⁻¹ μ_j` with ridge-regularized
/// inverses.
pub fn discriminant_from_moments(
    sigma_i: &DMatrix<f64>,
    mu_i: &[f64],
    sigma_j: &DMatrix<f64>,
    mu_j: &[f64],
    ridge: f64,
) -> Result<QuadraticDiscriminant> {
    let inv_i = regularized_inverse(sigma_i, ridge)?;
    let inv_j = regularized_inverse(sigma_j, ridge)?;
    let mi = DVector::from_column_slice(mu_i);
    let mj = DVector::from_column_slice(mu_j);
    let b = &inv_i * mi - &inv_j * mj;
    QuadraticDiscriminant::new(inv_i - inv_j, b)
}

fn neighborhood(acts: &ActivationMatrix, anchor: usize, n_neighbors: usize) -> Result<Vec<usize>> {
    let mut idx = vec![anchor];
    idx.extend(knn(acts, anchor, n_neighbors - 1)?);
    Ok(idx)
}

fn local_moments(
    acts: &ActivationMatrix,
    anchor: usize,
    cfg: &DiscriminantConfig,
) -> Result<(DMatrix<f64>, Vec<f64>)> {
    let idx = neighborhood(acts, anchor, cfg.n_neighbors)?;
    let cov = ledoit_wolf(idx.iter().map(|&t| acts.row(t)))?;
    let mu = match cfg.center {
        Center::Anchor => acts.row(anchor).iter().map(|&v| v as f64).collect(),
        Center::NeighborhoodMean => cov.mean,
    };
    Ok((cov.sigma, mu))
}

fn check_discriminant_config(n: usize, cfg: &DiscriminantConfig) -> Result<()> {
    if cfg.n_neighbors < 2 || cfg.n_neighbors > n {
        return Err(Error::Config(format!(
            "n_neighbors must be in [2, {n}], got {}",
            cfg.n_neighbors
        )));
    }
    if !(cfg.ridge >= 0.0 && cfg.ridge.is_finite()) {
        return Err(Error::Config(format!(
            "ridge must be >= 0, got {}",
            cfg.ridge
        )));
    }
    Ok(())
}

/// Discriminant for the pair `(i, j)` from their local neighbourhoods.
pub fn build_discriminant(
    acts: &ActivationMatrix,
    i: usize,
    j: usize,
    cfg: &DiscriminantConfig,
) -> Result<QuadraticDiscriminant> {
    check_discriminant_config(acts.n_samples(), cfg)?;
    let (si, mi) = local_moments(acts, i, cfg)?;
    let (sj, mj) = local_moments(acts, j, cfg)?;
    discriminant_from_moments(&si, &mi, &sj, &mj, cfg.ridge)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct QuadraticConfig {
    pub k: usize,
    pub seed: u64,
    pub discriminant: DiscriminantConfig,
    pub max_iters: usize,
    pub tol: f64,
    /// Permit `dim > 256`, where each discriminant stores `dim²` values.
    pub allow_large: bool,
}

impl Default for QuadraticConfig {
    fn default() -> Self {
        let c = ClusteringConfig::default();
        Self {
            k: 16,
            seed: 0,
            discriminant: DiscriminantConfig::default(),
            max_iters: c.max_iters,
            tol: c.tol,
            allow_large: false,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct QuadraticExtraction {
    pub concepts: Vec<QuadraticDiscriminant>,
    /// Cluster of each retained pair.
    pub assignment: Vec<usize>,
    /// Sample pair `(i, j)` behind each retained discriminant.
    pub pairs: Vec<(usize, usize)>,
    pub skipped_pairs: usize,
    /// `Σ D²(δ, centroid)` after initialization and every iteration.
    pub objective_history: Vec<f64>,
    pub iters_run: usize,
    pub converged: bool,
}

/// Sample pairs, build their discriminants and cluster them into `k`
/// quadratic concepts.
pub fn quadratic_extract(
    acts: &ActivationMatrix,
    cfg: &QuadraticConfig,
) -> Result<QuadraticExtraction> {
    let (n, dim) = (acts.n_samples(), acts.dim());
    if dim > MAX_DIM_WITHOUT_OVERRIDE && !cfg.allow_large {
        return Err(Error::Config(format!(
            "quadratic extraction at dim {dim} needs {} values per discriminant; \
             pass allow_large to proceed",
            dim * dim
        )));
    }
    if n < 3 {
        return Err(Error::TooFewSamples { needed: 3, got: n });
    }
    check_discriminant_config(n, &cfg.discriminant)?;
    let perm = sample_pairs(n, cfg.seed)?;

    let moments: Vec<Result<(DMatrix<f64>, Vec<f64>)>> = (0..n)
        .into_par_iter()
        .map(|t| local_moments(acts, t, &cfg.discriminant))
        .collect();
    let built: Vec<Option<QuadraticDiscriminant>> = (0..n)
        .into_par_iter()
        .map(|i| {
            let j = perm.target()[i];
            match (&moments[i], &moments[j]) {
                (Ok((si, mi)), Ok((sj, mj))) => {
                    discriminant_from_moments(si, mi, sj, mj, cfg.discriminant.ridge).ok()
                }
                _ => None,
            }
        })
        .collect();
    let mut discriminants = Vec::new();
    let mut pairs = Vec::new();
    for (i, d) in built.into_iter().enumerate() {
        if let Some(d) = d {
            discriminants.push(d);
            pairs.push((i, perm.target()[i]));
        }
    }
    let skipped_pairs = n - discriminants.len();
    if skipped_pairs > 0 {
        log::warn!("quadratic: {skipped_pairs} pairs skipped (singular covariance)");
    }
    if discriminants.len() < cfg.k {
        return Err(Error::Config(format!(
            "only {} usable discriminants for k = {}",
            discriminants.len(),
            cfg.k
        )));
    }

    let width = dim * dim + dim;
    let embedded: Vec<f32> = discriminants
        .par_iter()
        .flat_map_iter(|d| d.embed())
        .collect();
    let points = ActivationMatrix::new(discriminants.len(), width, embedded)?;
    let weights = vec![1.0; discriminants.len()];
    let clustering = wkmeans::fit(
        &points,
        &weights,
        &ClusteringConfig {
            k: cfg.k,
            max_iters: cfg.max_iters,
            tol: cfg.tol,
            seed: cfg.seed ^ 0x9e37_79b9_7f4a_7c15,
            init: InitMethod::KMeansPlusPlus,
        },
    )?;

    let mut concepts = Vec::with_capacity(cfg.k);
    for c in 0..cfg.k {
        let members: Vec<&QuadraticDiscriminant> = clustering
            .assignment
            .iter()
            .zip(&discriminants)
            .filter(|(&a, _)| a == c)
            .map(|(_, d)| d)
            .collect();
        concepts.push(frechet_centroid(&members, &vec![1.0; members.len()])?);
    }
    Ok(QuadraticExtraction {
        concepts,
        assignment: clustering.assignment,
        pairs,
        skipped_pairs,
        objective_history: clustering.inertia_history,
        iters_run: clustering.iters_run,
        converged: clustering.converged,
    })
}

/// Concept scores `δ_c(x_j)`.
pub fn quadratic_scores(
    acts: &ActivationMatrix,
    concepts: &[QuadraticDiscriminant],
) -> Result<ConceptScores> {
    if let Some(c) = concepts.iter().find(|c| c.dim != acts.dim()) {
        return Err(Error::Shape(format!(
            "discriminant dimension {} does not match activations {}",
            c.dim,
            acts.dim()
        )));
    }
    let k = concepts.len();
    let data: Vec<f32> = (0..acts.n_samples())
        .into_par_iter()
        .flat_map_iter(|i| {
            let x = acts.row(i);
            concepts.iter().map(move |c| c.evaluate(x) as f32)
        })
        .collect();
    Ok(ConceptScores::new(ActivationMatrix::new(
        acts.n_samples(),
        k,
        data,
    )?))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct QuadraticMeta {
    pub method: String,
    pub k: usize,
    pub dim: usize,
    pub seed: u64,
    pub n_neighbors: usize,
    pub ridge: f64,
    pub center: Center,
    pub skipped_pairs: usize,
    pub source_sha256: String,
}

/// Write `quad_A.npy` (`k × dim²`), `quad_b.npy` (`k × dim`) and metadata.
pub fn write_quadratic(
    concepts: &[QuadraticDiscriminant],
    meta: &QuadraticMeta,
    dir: impl AsRef<Path>,
) -> Result<()> {
    let dir = dir.as_ref();
    fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    let d = meta.dim;
    let mut a = Vec::with_capacity(concepts.len() * d * d);
    let mut b = Vec::with_capacity(concepts.len() * d);
    for c in concepts {
        for r in 0..d {
            for col in 0..d {
                a.push(c.a[(r, col)] as f32);
            }
        }
        b.extend(c.b.iter().map(|&v| v as f32));
    }
    tensor_io::npy::write(&dir.join("quad_A.npy"), concepts.len(), d * d, &a)?;
    tensor_io::npy::write(&dir.join("quad_b.npy"), concepts.len(), d, &b)?;
    let path = dir.join(META_FILE);
    fs::write(&path, serde_json::to_vec_pretty(meta)?).map_err(|e| Error::io(&path, e))
}

pub fn read_quadratic(
    dir: impl AsRef<Path>,
) -> Result<(Vec<QuadraticDiscriminant>, QuadraticMeta)> {
    let dir = dir.as_ref();
    let path = dir.join(META_FILE);
    if !path.exists() {
        return Err(Error::MissingPath(path));
    }
    let bytes = fs::read(&path).map_err(|e| Error::io(&path, e))?;
    let meta: QuadraticMeta =
        serde_json::from_slice(&bytes).map_err(|e| Error::Schema(e.to_string()))?;
    let a = tensor_io::npy::read(&dir.join("quad_A.npy"))?;
    let b = tensor_io::npy::read(&dir.join("quad_b.npy"))?;
    let d = meta.dim;
    if (a.rows, a.cols) != (meta.k, d * d) || (b.rows, b.cols) != (meta.k, d) {
        return Err(Error::Schema(
            "quadratic arrays do not match metadata".into(),
        ));
    }
    let concepts = (0..meta.k)
        .map(|c| {
            let am = DMatrix::from_row_slice(d, d, &a.data[c * d * d..(c + 1) * d * d])
                .map(|v| v as f64);
            let bv =
                DVector::from_iterator(d, b.data[c * d..(c + 1) * d].iter().map(|&v| v as f64));
            QuadraticDiscriminant::new(am, bv)
        })
        .collect::<Result<Vec<_>>>()?;
    Ok((concepts, meta))
}
