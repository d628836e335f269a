// SPDX-License-Identifier: MIT OR Apache-2.0

//! One-dimensional logistic probes.
//!
//! Each probe predicts a binary label from a single concept score. The
//! feature is standardized before fitting so the L2 penalty and the Newton
//! stopping rule do not depend on the score scale; the reported weight and
//! bias are mapped back to the raw feature.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::concepts::ConceptScores;
use crate::error::{Error, Result};
use crate::tensor_io::LabelTable;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ProbeConfig {
    /// L2 penalty on the (standardized) weight.
    pub l2: f64,
    pub tol: f64,
    pub max_iters: usize,
}

impl Default for ProbeConfig {
    fn default() -> Self {
        Self {
            l2: 1e-6,
            tol: 1e-8,
            max_iters: 100,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ProbeFit {
    /// Mean cross-entropy of the fitted probe (penalty excluded).
    pub loss: f64,
    pub weight: f64,
    pub bias: f64,
    pub iterations: usize,
}

#[inline]
fn softplus(t: f64) -> f64 {
    t.max(0.0) + (-t.abs()).exp().ln_1p()
}

#[inline]
fn sigmoid(t: f64) -> f64 {
    if t >= 0.0 {
        1.0 / (1.0 + (-t).exp())
    } else {
        let e = t.exp();
        e / (1.0 + e)
    }
}

/// Mean cross-entropy of `sigmoid(w z + b)` against `y`.
fn mean_ce(z: &[f64], y: &[bool], w: f64, b: f64) -> f64 {
    let s: f64 = z
        .iter()
        .zip(y)
        .map(|(&zi, &yi)| {
            let t = w * zi + b;
            softplus(t) - if yi { t } else { 0.0 }
        })
        .sum();
    s / z.len() as f64
}

/// Fit `p = sigmoid(w f + b)` by damped Newton iterations.
pub fn logistic_probe_1d(feature: &[f64], labels: &[bool], cfg: &ProbeConfig) -> Result<ProbeFit> {
    let n = feature.len();
    if labels.len() != n {
        return Err(Error::Shape(format!(
            "feature has {n} entries but labels have {}",
            labels.len()
        )));
    }
    if n < 4 {
        return Err(Error::TooFewSamples { needed: 4, got: n });
    }
    if feature.iter().any(|v| !v.is_finite()) {
        return Err(Error::Data(
            "probe feature contains non-finite values".into(),
        ));
    }
    let positives = labels.iter().filter(|&&y| y).count();
    if positives == 0 || positives == n {
        return Err(Error::DegenerateLabels(
            "probe labels contain a single class".into(),
        ));
    }

    let nf = n as f64;
    let mean = feature.iter().sum::<f64>() / nf;
    let var = feature
        .iter()
        .map(|&v| (v - mean) * (v - mean))
        .sum::<f64>()
        / nf;
    let sd = var.sqrt();
    let scale = feature.iter().fold(0.0f64, |m, v| m.max(v.abs()));
    let base = positives as f64 / nf;
    let base_bias = (base / (1.0 - base)).ln();

    if sd == 0.0 || sd <= 1e-12 * scale {
        let z = vec![0.0; n];
        return Ok(ProbeFit {
            loss: mean_ce(&z, labels, 0.0, base_bias),
            weight: 0.0,
            bias: base_bias,
            iterations: 0,
        });
    }
    let z: Vec<f64> = feature.iter().map(|&v| (v - mean) / sd).collect();

    let objective = |w: f64, b: f64| mean_ce(&z, labels, w, b) + 0.5 * cfg.l2 * w * w;
    let (mut w, mut b) = (0.0, base_bias);
    let mut f = objective(w, b);
    let mut iterations = 0;
    for _ in 0..cfg.max_iters {
        iterations += 1;
        let (mut gw, mut gb, mut hww, mut hwb, mut hbb) = (0.0, 0.0, 0.0, 0.0, 0.0);
        for (&zi, &yi) in z.iter().zip(labels) {
            let p = sigmoid(w * zi + b);
            let r = p - if yi { 1.0 } else { 0.0 };
            let h = p * (1.0 - p);
            gw += r * zi;
            gb += r;
            hww += h * zi * zi;
            hwb += h * zi;
            hbb += h;
        }
        gw = gw / nf + cfg.l2 * w;
        gb /= nf;
        hww = hww / nf + cfg.l2;
        hwb /= nf;
        hbb = hbb / nf + 1e-12;
        if gw.abs().max(gb.abs()) < cfg.tol {
            break;
        }
        let det = hww * hbb - hwb * hwb;
        let (mut dw, mut db) = if det > 0.0 {
            (-(hbb * gw - hwb * gb) / det, -(hww * gb - hwb * gw) / det)
        } else {
            (-gw, -gb)
        };
        let slope = dw * gw + db * gb;
        if slope >= 0.0 {
            dw = -gw;
            db = -gb;
        }
        let slope = dw * gw + db * gb;
        let mut step = 1.0;
        let mut improvement = None;
        for _ in 0..60 {
            let (nw, nb) = (w + step * dw, b + step * db);
            let candidate = objective(nw, nb);
            if candidate <= f + 1e-4 * step * slope {
                improvement = Some(f - candidate);
                w = nw;
                b = nb;
                f = candidate;
                break;
            }
            step *= 0.5;
        }
        match improvement {
            Some(d) if d > 1e-15 * (1.0 + f.abs()) => {}
            _ => break,
        }
    }

    Ok(ProbeFit {
        loss: mean_ce(&z, labels, w, b),
        weight: w / sd,
        bias: b - w * mean / sd,
        iterations,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ClassProbe {
    pub class: usize,
    pub class_name: String,
    /// Lowest probe loss over all concepts for this class versus the rest.
    pub loss: f64,
    pub best_concept: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ProbeResult {
    pub attribute: String,
    pub classes: Vec<ClassProbe>,
    pub median_loss: f64,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub notes: Vec<String>,
}

/// Best one-vs-rest probe loss per class of `attribute`, then the median
/// over classes.
pub fn probe_loss(
    scores: &ConceptScores,
    labels: &LabelTable,
    attribute: &str,
) -> Result<ProbeResult> {
    probe_loss_with(scores, labels, attribute, &ProbeConfig::default())
}

pub fn probe_loss_with(
    scores: &ConceptScores,
    labels: &LabelTable,
    attribute: &str,
    cfg: &ProbeConfig,
) -> Result<ProbeResult> {
    labels.check_samples(scores.n_samples())?;
    let attr = labels.attribute(attribute)?;
    if scores.k() == 0 {
        return Err(Error::Config("score matrix has no concepts".into()));
    }
    let columns: Vec<Vec<f64>> = (0..scores.k()).map(|c| scores.column(c)).collect();

    let mut classes = Vec::new();
    let mut notes = Vec::new();
    for class in 0..attr.n_classes {
        let y = attr.indicator(class);
        let count = y.iter().filter(|&&v| v).count();
        if count == 0 || count == y.len() {
            notes.push(format!(
                "class {class} ({}) skipped: {} members of {}",
                attr.class_names.get(class).map_or("", String::as_str),
                count,
                y.len()
            ));
            continue;
        }
        let fits = columns
            .par_iter()
            .map(|col| logistic_probe_1d(col, &y, cfg).map(|f| f.loss))
            .collect::<Result<Vec<f64>>>()?;
        let (best_concept, loss) =
            fits.iter()
                .copied()
                .enumerate()
                .fold(
                    (0, f64::INFINITY),
                    |acc, (c, l)| if l < acc.1 { (c, l) } else { acc },
                );
        classes.push(ClassProbe {
            class,
            class_name: attr.class_names.get(class).cloned().unwrap_or_default(),
            loss,
            best_concept,
        });
    }
    let losses: Vec<f64> = classes.iter().map(|c| c.loss).collect();
    let median_loss = super::median(&losses).ok_or_else(|| {
        Error::DegenerateLabels(format!("attribute '{attribute}' has no probeable class"))
    })?;
    Ok(ProbeResult {
        attribute: attribute.to_string(),
        classes,
        median_loss,
        notes,
    })
}
