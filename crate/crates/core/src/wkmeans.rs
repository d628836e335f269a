// SPDX-License-Identifier: MIT OR Apache-2.0

//! Lloyd k-means where every point carries a positive weight.
//!
//! The weighted distance of point `i` to centroid `c` is `w_i ||C_c - x_i||`.
//! Because `w_i` scales all of a point's candidate distances equally, the
//! assignment step is the ordinary nearest-centroid rule; the weights enter
//! through the centroid update, which takes weighted means, and through the
//! reported inertia `sum_i w_i ||C_a(i) - x_i||^2`.

use rand::Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg::{seeded_rng, sq_dist_mixed};
use crate::tensor_io::ActivationMatrix;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "kebab-case")]
pub enum InitMethod {
    #[default]
    #[serde(rename = "kmeans++")]
    KMeansPlusPlus,
    RandomRows,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ClusteringConfig {
    pub k: usize,
    pub max_iters: usize,
    /// Stop once the relative inertia decrease falls below this.
    pub tol: f64,
    pub seed: u64,
    pub init: InitMethod,
}

impl Default for ClusteringConfig {
    fn default() -> Self {
        Self {
            k: 8,
            max_iters: 100,
            tol: 1e-4,
            seed: 0,
            init: InitMethod::KMeansPlusPlus,
        }
    }
}

impl ClusteringConfig {
    pub fn validate(&self, n_points: usize) -> Result<()> {
        if self.k == 0 {
            return Err(Error::Config("k must be at least 1".into()));
        }
        if self.k > n_points {
            return Err(Error::Config(format!(
                "k = {} exceeds the number of points ({n_points})",
                self.k
            )));
        }
        if self.max_iters == 0 {
            return Err(Error::Config("max_iters must be at least 1".into()));
        }
        if !(self.tol >= 0.0 && self.tol.is_finite()) {
            return Err(Error::Config(format!(
                "tol must be non-negative, got {}",
                self.tol
            )));
        }
        Ok(())
    }
}

/// `k × dim` centroid matrix kept in `f64`.
#[derive(Debug, Clone, PartialEq)]
pub struct Centroids {
    k: usize,
    dim: usize,
    data: Vec<f64>,
}

impl Centroids {
    pub fn new(k: usize, dim: usize, data: Vec<f64>) -> Result<Self> {
        if data.len() != k * dim {
            return Err(Error::Shape(format!(
                "{} values cannot fill a {k}×{dim} centroid matrix",
                data.len()
            )));
        }
        Ok(Self { k, dim, data })
    }

    pub fn k(&self) -> usize {
        self.k
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn row(&self, c: usize) -> &[f64] {
        &self.data[c * self.dim..(c + 1) * self.dim]
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.data
    }

    pub fn to_f32(&self) -> Vec<f32> {
        self.data.iter().map(|&v| v as f32).collect()
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ClusteringResult {
    pub centroids: Centroids,
    pub assignment: Vec<usize>,
    pub inertia: f64,
    pub iters_run: usize,
    /// Inertia after initialization and after every Lloyd iteration.
    pub inertia_history: Vec<f64>,
    pub converged: bool,
}

fn check_inputs(points: &ActivationMatrix, weights: &[f64]) -> Result<()> {
    if weights.len() != points.n_samples() {
        return Err(Error::Shape(format!(
            "{} weights for {} points",
            weights.len(),
            points.n_samples()
        )));
    }
    if let Some(i) = weights.iter().position(|&w| !(w > 0.0 && w.is_finite())) {
        return Err(Error::Config(format!(
            "weight {i} is {} (weights must be positive)",
            weights[i]
        )));
    }
    Ok(())
}

/// Draw an index with probability proportional to `mass`; `None` if all
/// masses are zero.
fn sample_proportional<R: Rng>(mass: &[f64], rng: &mut R) -> Option<usize> {
    let total: f64 = mass.iter().sum();
    if !(total > 0.0) {
        return None;
    }
    let target = rng.random::<f64>() * total;
    let mut acc = 0.0;
    let mut last_positive = None;
    for (i, &m) in mass.iter().enumerate() {
        if m > 0.0 {
            acc += m;
            last_positive = Some(i);
            if target < acc {
                return Some(i);
            }
        }
    }
    last_positive
}

/// Initial centroids: weighted k-means++ (selection mass `w_i * D(x_i)^2`)
/// or `k` distinct uniformly drawn rows.
pub fn init_centroids(
    points: &ActivationMatrix,
    weights: &[f64],
    cfg: &ClusteringConfig,
) -> Result<Centroids> {
    check_inputs(points, weights)?;
    cfg.validate(points.n_samples())?;
    let (n, dim, k) = (points.n_samples(), points.dim(), cfg.k);
    let mut rng = seeded_rng(cfg.seed);

    let chosen: Vec<usize> = match cfg.init {
        InitMethod::RandomRows => rand::seq::index::sample(&mut rng, n, k).into_vec(),
        InitMethod::KMeansPlusPlus => {
            let mut chosen = Vec::with_capacity(k);
            let mut taken = vec![false; n];
            let first = sample_proportional(weights, &mut rng).unwrap_or(0);
            chosen.push(first);
            taken[first] = true;
            let mut nearest: Vec<f64> = points
                .as_slice()
                .par_chunks_exact(dim)
                .map(|x| crate::linalg::sq_dist_f32(x, points.row(first)))
                .collect();
            while chosen.len() < k {
                let mass: Vec<f64> = nearest.iter().zip(weights).map(|(&d, &w)| w * d).collect();
                let next = sample_proportional(&mass, &mut rng)
                    .filter(|&i| !taken[i])
                    .or_else(|| taken.iter().position(|&t| !t))
                    .expect("k <= n guarantees an untaken point");
                chosen.push(next);
                taken[next] = true;
                let c = points.row(next);
                nearest
                    .par_iter_mut()
                    .zip(points.as_slice().par_chunks_exact(dim))
                    .for_each(|(d, x)| *d = d.min(crate::linalg::sq_dist_f32(x, c)));
            }
            chosen
        }
    };

    let data = chosen
        .iter()
        .flat_map(|&i| points.row(i).iter().map(|&v| v as f64))
        .collect();
    Centroids::new(k, dim, data)
}

/// Nearest centroid per point with its squared distance; ties go to the
/// lowest cluster index.
fn nearest(points: &ActivationMatrix, centroids: &Centroids) -> (Vec<usize>, Vec<f64>) {
    points
        .as_slice()
        .par_chunks_exact(points.dim())
        .map(|x| {
            let mut best = (0usize, f64::INFINITY);
            for c in 0..centroids.k() {
                let d = sq_dist_mixed(centroids.row(c), x);
                if d < best.1 {
                    best = (c, d);
                }
            }
            best
        })
        .unzip()
}

/// `a(i) = argmin_c w_i ||C_c - x_i||`, lowest index on ties.
///
/// The positive per-point factor `w_i` does not change the argmin, so it is
/// not multiplied in; this keeps the result independent of the weights even
/// under floating-point rounding.
pub fn assign(
    points: &ActivationMatrix,
    centroids: &Centroids,
    weights: &[f64],
) -> Result<Vec<usize>> {
    check_inputs(points, weights)?;
    if centroids.dim() != points.dim() {
        return Err(Error::Shape(format!(
            "centroids have dimension {} but points have {}",
            centroids.dim(),
            points.dim()
        )));
    }
    Ok(nearest(points, centroids).0)
}

/// Weighted means of each cluster. An empty cluster is re-seeded at the
/// point with the largest weighted squared distance to its own centroid
/// (lowest index on ties, each point used at most once).
pub fn update_centroids(
    points: &ActivationMatrix,
    weights: &[f64],
    assignment: &[usize],
    k: usize,
) -> Result<Centroids> {
    check_inputs(points, weights)?;
    if assignment.len() != points.n_samples() {
        return Err(Error::Shape(format!(
            "{} assignments for {} points",
            assignment.len(),
            points.n_samples()
        )));
    }
    if let Some(&bad) = assignment.iter().find(|&&a| a >= k) {
        return Err(Error::Index {
            what: "clusters",
            index: bad,
            len: k,
        });
    }
    let dim = points.dim();
    let mut sums = vec![0.0f64; k * dim];
    let mut mass = vec![0.0f64; k];
    for ((x, &a), &w) in points.rows().zip(assignment).zip(weights) {
        mass[a] += w;
        for (s, &v) in sums[a * dim..(a + 1) * dim].iter_mut().zip(x) {
            *s += w * v as f64;
        }
    }
    for c in 0..k {
        if mass[c] > 0.0 {
            for s in &mut sums[c * dim..(c + 1) * dim] {
                *s /= mass[c];
            }
        }
    }

    let empty: Vec<usize> = (0..k).filter(|&c| mass[c] == 0.0).collect();
    if !empty.is_empty() {
        let spread: Vec<f64> = points
            .rows()
            .zip(assignment)
            .zip(weights)
            .map(|((x, &a), &w)| w * sq_dist_mixed(&sums[a * dim..(a + 1) * dim], x))
            .collect();
        let mut used = vec![false; points.n_samples()];
        for c in empty {
            let mut best: Option<(usize, f64)> = None;
            for (i, &s) in spread.iter().enumerate() {
                if !used[i] && best.is_none_or(|(_, b)| s > b) {
                    best = Some((i, s));
                }
            }
            if let Some((i, _)) = best {
                used[i] = true;
                for (s, &v) in sums[c * dim..(c + 1) * dim].iter_mut().zip(points.row(i)) {
                    *s = v as f64;
                }
            }
        }
    }
    Centroids::new(k, dim, sums)
}

fn weighted_inertia(weights: &[f64], sq_dists: &[f64]) -> f64 {
    weights.iter().zip(sq_dists).map(|(w, d)| w * d).sum()
}

/// Squared distance of every point to its assigned centroid.
fn assigned_sq_dists(
    points: &ActivationMatrix,
    centroids: &Centroids,
    assignment: &[usize],
) -> Vec<f64> {
    points
        .as_slice()
        .par_chunks_exact(points.dim())
        .zip(assignment.par_iter())
        .map(|(x, &a)| sq_dist_mixed(centroids.row(a), x))
        .collect()
}

/// Run weighted Lloyd iterations from [`init_centroids`].
///
/// The returned centroids are always the weighted means of the returned
/// assignment.
pub fn fit(
    points: &ActivationMatrix,
    weights: &[f64],
    cfg: &ClusteringConfig,
) -> Result<ClusteringResult> {
    let centroids = init_centroids(points, weights, cfg)?;
    fit_from(points, weights, cfg, centroids)
}

/// Weighted Lloyd iterations from caller-supplied initial centroids.
pub fn fit_from(
    points: &ActivationMatrix,
    weights: &[f64],
    cfg: &ClusteringConfig,
    mut centroids: Centroids,
) -> Result<ClusteringResult> {
    check_inputs(points, weights)?;
    cfg.validate(points.n_samples())?;
    if centroids.k() != cfg.k || centroids.dim() != points.dim() {
        return Err(Error::Shape("initial centroids do not match config".into()));
    }
    let (mut assignment, sq) = nearest(points, &centroids);
    let mut history = vec![weighted_inertia(weights, &sq)];
    let mut iters_run = 0;
    let mut converged = false;
    let mut stale = true;

    for it in 1..=cfg.max_iters {
        centroids = update_centroids(points, weights, &assignment, cfg.k)?;
        let (next, sq) = nearest(points, &centroids);
        let inertia = weighted_inertia(weights, &sq);
        let prev = *history.last().expect("history starts non-empty");
        iters_run = it;
        let changed = next != assignment;
        assignment = next;
        history.push(inertia);
        stale = changed;
        if !changed || inertia == 0.0 || prev - inertia <= cfg.tol * prev {
            converged = true;
            break;
        }
    }

    if stale {
        centroids = update_centroids(points, weights, &assignment, cfg.k)?;
    }
    let inertia = weighted_inertia(weights, &assigned_sq_dists(points, &centroids, &assignment));
    if stale {
        history.push(inertia);
    }
    Ok(ClusteringResult {
        centroids,
        assignment,
        inertia,
        iters_run,
        inertia_history: history,
        converged,
    })
}
