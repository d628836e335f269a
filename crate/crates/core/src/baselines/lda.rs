// SPDX-License-Identifier: MIT OR Apache-2.0

//! Fisher discriminant directions with a diagonal covariance model.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg::norm_f64;
use crate::tensor_io::{ActivationMatrix, ConceptDictionary, ConceptMeta, LabelTable};

pub const METHOD_LDA: &str = "lda";
/// Default ridge as a fraction of the mean pooled variance.
pub const DEFAULT_RELATIVE_RIDGE: f64 = 1e-4;

/// Per-dimension mean and unbiased (n - 1) variance.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ClassMoments {
    pub count: usize,
    pub mean: Vec<f64>,
    pub variance: Vec<f64>,
}

impl ClassMoments {
    pub fn from_rows<'a>(rows: impl Iterator<Item = &'a [f32]>, dim: usize) -> Result<Self> {
        let rows: Vec<&[f32]> = rows.collect();
        let count = rows.len();
        let mut sum = vec![0.0f64; dim];
        for r in &rows {
            for (s, &v) in sum.iter_mut().zip(r.iter()) {
                *s += v as f64;
            }
        }
        if count < 2 {
            return Err(Error::TooFewSamples {
                needed: 2,
                got: count,
            });
        }
        let mean: Vec<f64> = sum.iter().map(|s| s / count as f64).collect();
        let mut ss = vec![0.0f64; dim];
        for r in &rows {
            for ((s, &v), m) in ss.iter_mut().zip(r.iter()).zip(&mean) {
                let d = v as f64 - m;
                *s += d * d;
            }
        }
        let variance = ss.iter().map(|s| s / (count - 1) as f64).collect();
        Ok(Self {
            count,
            mean,
            variance,
        })
    }
}

/// Discriminant direction between two classes from their moments.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LdaModel {
    pub a: ClassMoments,
    pub b: ClassMoments,
    pub ridge: f64,
    /// Unit-norm `(diag(var_a + var_b) + ridge I)^-1 (mu_a - mu_b)`.
    pub direction: Vec<f64>,
}

impl LdaModel {
    pub fn fit(a: ClassMoments, b: ClassMoments, ridge: Option<f64>) -> Result<Self> {
        let dim = a.mean.len();
        if b.mean.len() != dim {
            return Err(Error::Shape(format!(
                "class dimensions differ: {dim} vs {}",
                b.mean.len()
            )));
        }
        let pooled: Vec<f64> = a
            .variance
            .iter()
            .zip(&b.variance)
            .map(|(x, y)| x + y)
            .collect();
        let ridge = match ridge {
            Some(r) if r > 0.0 && r.is_finite() => r,
            Some(r) => return Err(Error::Config(format!("ridge must be positive, got {r}"))),
            None => default_ridge(&pooled),
        };
        let raw: Vec<f64> = (0..dim)
            .map(|d| (a.mean[d] - b.mean[d]) / (pooled[d] + ridge))
            .collect();
        let norm = norm_f64(&raw);
        if norm == 0.0 || !norm.is_finite() {
            return Err(Error::DegenerateDirection(
                "class means coincide; no discriminant direction".into(),
            ));
        }
        Ok(Self {
            a,
            b,
            ridge,
            direction: raw.iter().map(|v| v / norm).collect(),
        })
    }
}

fn default_ridge(pooled: &[f64]) -> f64 {
    // Half the pooled sum is the mean of the two class variances.
    let mean = pooled.iter().sum::<f64>() / (2.0 * pooled.len() as f64);
    let r = DEFAULT_RELATIVE_RIDGE * mean;
    if r > 0.0 {
        r
    } else {
        1e-12
    }
}

/// Unit Fisher direction separating class A from class B.
pub fn lda_pair_direction(
    class_a: &ActivationMatrix,
    class_b: &ActivationMatrix,
    ridge: Option<f64>,
) -> Result<Vec<f32>> {
    if class_a.dim() != class_b.dim() {
        return Err(Error::Shape(format!(
            "class dimensions differ: {} vs {}",
            class_a.dim(),
            class_b.dim()
        )));
    }
    let a = ClassMoments::from_rows(class_a.rows(), class_a.dim())?;
    let b = ClassMoments::from_rows(class_b.rows(), class_b.dim())?;
    let model = LdaModel::fit(a, b, ridge)?;
    Ok(model.direction.iter().map(|&v| v as f32).collect())
}

/// One-vs-rest Fisher direction for every class of `attribute`.
///
/// Classes that cannot be separated (fewer than two members on either side,
/// or coinciding means) are skipped and listed in the metadata notes.
pub fn lda_dictionary(
    acts: &ActivationMatrix,
    labels: &LabelTable,
    attribute: &str,
    ridge: Option<f64>,
) -> Result<ConceptDictionary> {
    labels.check_samples(acts.n_samples())?;
    let attr = labels.attribute(attribute)?;
    let dim = acts.dim();
    let mut directions = Vec::new();
    let mut notes = vec![format!("attribute={attribute}")];
    let mut kept = 0;
    for class in 0..attr.n_classes {
        let name = attr.class_names.get(class).cloned().unwrap_or_default();
        let inside = acts
            .rows()
            .zip(&attr.values)
            .filter(|(_, &v)| v as usize == class);
        let outside = acts
            .rows()
            .zip(&attr.values)
            .filter(|(_, &v)| v as usize != class);
        let fitted = ClassMoments::from_rows(inside.map(|(r, _)| r), dim)
            .and_then(|a| Ok((a, ClassMoments::from_rows(outside.map(|(r, _)| r), dim)?)))
            .and_then(|(a, b)| LdaModel::fit(a, b, ridge));
        match fitted {
            Ok(model) => {
                directions.extend(model.direction.iter().map(|&v| v as f32));
                notes.push(format!("direction {kept} = class {class} ({name})"));
                kept += 1;
            }
            Err(e) => {
                log::warn!("lda: skipping class {class} ({name}) of '{attribute}': {e}");
                notes.push(format!("class {class} ({name}) skipped: {e}"));
            }
        }
    }
    if kept == 0 {
        return Err(Error::DegenerateLabels(format!(
            "no class of '{attribute}' yields a discriminant direction"
        )));
    }
    let meta = ConceptMeta {
        method: METHOD_LDA.into(),
        seed: None,
        k: kept,
        dim,
        skew_epsilon: None,
        normalized: true,
        source_sha256: acts.fingerprint(),
        notes,
    };
    ConceptDictionary::new(ActivationMatrix::new(kept, dim, directions)?, meta)
}
