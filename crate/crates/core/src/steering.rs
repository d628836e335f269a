// SPDX-License-Identifier: MIT OR Apache-2.0

//! Additive steering `x̃ = x + α c` and nearest-neighbour retrieval.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg::{dot_mixed, norm_f32, sq_dist_f32};
use crate::tensor_io::{ActivationMatrix, ConceptDictionary};

/// Steering magnitude: a raw scalar, or `"zero"` to remove the component of
/// each row along the concept.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum Alpha {
    Value(f64),
    Zero(ZeroTag),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ZeroTag {
    Zero,
}

impl Alpha {
    pub const ZERO_OUT: Alpha = Alpha::Zero(ZeroTag::Zero);
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SteerRequest {
    pub concept_id: usize,
    pub alpha: Alpha,
    /// Rows to steer; every row when absent.
    #[serde(default)]
    pub row_indices: Option<Vec<usize>>,
}

/// `x + α c`, accumulated in `f64` and rounded once.
pub fn steer(x: &[f32], c: &[f32], alpha: f64) -> Result<Vec<f32>> {
    if x.len() != c.len() {
        return Err(Error::Shape(format!(
            "activation has dim {} but concept has dim {}",
            x.len(),
            c.len()
        )));
    }
    if !alpha.is_finite() {
        return Err(Error::Config(format!("alpha must be finite, got {alpha}")));
    }
    let mut out = x.to_vec();
    steer_in_place(&mut out, c, alpha);
    Ok(out)
}

fn steer_in_place(x: &mut [f32], c: &[f32], alpha: f64) {
    if alpha == 0.0 {
        return;
    }
    for (xi, &ci) in x.iter_mut().zip(c) {
        *xi = (*xi as f64 + alpha * ci as f64) as f32;
    }
}

/// Magnitude that removes the projection of `x` onto `c`: `-(x·c)/(c·c)`,
/// which is `-score(x, c)` for a unit concept.
pub fn zero_out_alpha(x: &[f32], c: &[f32]) -> Result<f64> {
    let cc = norm_f32(c).powi(2);
    if !(cc > 0.0) {
        return Err(Error::DegenerateDirection(
            "cannot zero out along a zero concept".into(),
        ));
    }
    let xc: f64 = x.iter().zip(c).map(|(&a, &b)| a as f64 * b as f64).sum();
    Ok(-xc / cc)
}

fn validate_requests(n: usize, dict: &ConceptDictionary, requests: &[SteerRequest]) -> Result<()> {
    for r in requests {
        if r.concept_id >= dict.k() {
            return Err(Error::Index {
                what: "concepts",
                index: r.concept_id,
                len: dict.k(),
            });
        }
        if let Alpha::Value(a) = r.alpha {
            if !a.is_finite() {
                return Err(Error::Config(format!("alpha must be finite, got {a}")));
            }
        }
        if let Some(rows) = &r.row_indices {
            if let Some(&bad) = rows.iter().find(|&&i| i >= n) {
                return Err(Error::Index {
                    what: "samples",
                    index: bad,
                    len: n,
                });
            }
        }
    }
    Ok(())
}

/// Apply every request to its rows, in request order. A zero-out request
/// acts on the row as already modified by earlier requests.
pub fn steer_batch(
    acts: &ActivationMatrix,
    dict: &ConceptDictionary,
    requests: &[SteerRequest],
) -> Result<ActivationMatrix> {
    if acts.dim() != dict.dim() {
        return Err(Error::Shape(format!(
            "activations have dim {} but the dictionary has dim {}",
            acts.dim(),
            dict.dim()
        )));
    }
    let n = acts.n_samples();
    validate_requests(n, dict, requests)?;
    // Per row, the requests that touch it.
    let mut per_row: Vec<Vec<usize>> = vec![Vec::new(); n];
    for (ri, r) in requests.iter().enumerate() {
        match &r.row_indices {
            Some(rows) => rows.iter().for_each(|&i| per_row[i].push(ri)),
            None => per_row.iter_mut().for_each(|v| v.push(ri)),
        }
    }
    let mut out = acts.as_slice().to_vec();
    out.par_chunks_mut(acts.dim())
        .zip(per_row.par_iter())
        .try_for_each(|(row, reqs)| -> Result<()> {
            for &ri in reqs {
                let r = &requests[ri];
                let c = dict.direction(r.concept_id);
                let alpha = match r.alpha {
                    Alpha::Value(a) => a,
                    Alpha::Zero(_) => zero_out_alpha(row, c)?,
                };
                steer_in_place(row, c, alpha);
            }
            Ok(())
        })?;
    ActivationMatrix::new(n, acts.dim(), out)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default, clap::ValueEnum)]
#[serde(rename_all = "lowercase")]
pub enum Metric {
    #[default]
    Euclidean,
    Cosine,
}

/// The `m` rows closest to `query`: ascending Euclidean distance or
/// descending cosine similarity, ties by index. Zero rows have cosine 0.
pub fn nearest_neighbors(
    query: &[f32],
    acts: &ActivationMatrix,
    m: usize,
    metric: Metric,
) -> Result<Vec<usize>> {
    let n = acts.n_samples();
    if m > n {
        return Err(Error::Config(format!(
            "m = {m} exceeds the number of samples ({n})"
        )));
    }
    if query.len() != acts.dim() {
        return Err(Error::Shape(format!(
            "query has dim {} but activations have dim {}",
            query.len(),
            acts.dim()
        )));
    }
    let key: Vec<f64> = match metric {
        Metric::Euclidean => (0..n)
            .into_par_iter()
            .map(|i| sq_dist_f32(query, acts.row(i)))
            .collect(),
        Metric::Cosine => {
            let qn = norm_f32(query);
            if qn == 0.0 {
                return Err(Error::Config(
                    "cosine neighbours need a nonzero query".into(),
                ));
            }
            let q: Vec<f64> = query.iter().map(|&v| v as f64 / qn).collect();
            (0..n)
                .into_par_iter()
                .map(|i| {
                    let r = acts.row(i);
                    let rn = norm_f32(r);
                    if rn == 0.0 {
                        0.0
                    } else {
                        -dot_mixed(&q, r) / rn
                    }
                })
                .collect()
        }
    };
    let mut idx: Vec<usize> = (0..n).collect();
    idx.sort_by(|&a, &b| key[a].total_cmp(&key[b]).then(a.cmp(&b)));
    idx.truncate(m);
    Ok(idx)
}
