// SPDX-License-Identifier: MIT OR Apache-2.0

//! Maximum pairwise Pearson correlation between two concept score sets and
//! its Fisher-z significance bound.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use statrs::function::erf::erfc;

use crate::error::{Error, Result};
use crate::linalg::dot_f64;
use crate::tensor_io::ActivationMatrix;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MppcResult {
    /// `rho[i]` is the largest correlation of concept `i` of A with any
    /// concept of B.
    pub rho: Vec<f64>,
    /// Index in B attaining `rho[i]`.
    pub argmax: Vec<usize>,
    pub mppc: f64,
    pub direction: String,
}

/// Centered columns with their sums of squares. A constant column is
/// flagged with `None`.
fn centered_columns(m: &ActivationMatrix) -> Vec<Option<(Vec<f64>, f64)>> {
    (0..m.dim())
        .into_par_iter()
        .map(|c| {
            let col: Vec<f64> = m.rows().map(|r| r[c] as f64).collect();
            let first = col[0];
            if col.iter().all(|&v| v == first) {
                return None;
            }
            let mean = col.iter().sum::<f64>() / col.len() as f64;
            let centered: Vec<f64> = col.iter().map(|&v| v - mean).collect();
            let ss = dot_f64(&centered, &centered);
            (ss > 0.0).then_some((centered, ss))
        })
        .collect()
}

#[inline]
fn pearson(a: &Option<(Vec<f64>, f64)>, b: &Option<(Vec<f64>, f64)>) -> f64 {
    match (a, b) {
        (Some((ca, sa)), Some((cb, sb))) => (dot_f64(ca, cb) / (sa * sb).sqrt()).clamp(-1.0, 1.0),
        _ => 0.0,
    }
}

/// Pearson correlation matrix between the columns of `a` and `b`
/// (`k_a × k_b`, row-major). Pairs involving a constant column are 0.
pub fn pearson_matrix(a: &ActivationMatrix, b: &ActivationMatrix) -> Result<Vec<f64>> {
    check_rows(a, b)?;
    let ca = centered_columns(a);
    let cb = centered_columns(b);
    Ok(ca
        .par_iter()
        .flat_map_iter(|x| cb.iter().map(move |y| pearson(x, y)))
        .collect())
}

fn check_rows(a: &ActivationMatrix, b: &ActivationMatrix) -> Result<()> {
    if a.n_samples() != b.n_samples() {
        return Err(Error::Shape(format!(
            "score sets have {} and {} samples",
            a.n_samples(),
            b.n_samples()
        )));
    }
    if a.n_samples() < 3 {
        return Err(Error::TooFewSamples {
            needed: 3,
            got: a.n_samples(),
        });
    }
    Ok(())
}

/// MPPC from score set A (`N × k_a`) to score set B (`N × k_b`).
pub fn mppc(scores_a: &ActivationMatrix, scores_b: &ActivationMatrix) -> Result<MppcResult> {
    check_rows(scores_a, scores_b)?;
    let ca = centered_columns(scores_a);
    let cb = centered_columns(scores_b);
    let best: Vec<(usize, f64)> = ca
        .par_iter()
        .map(|x| {
            cb.iter().map(|y| pearson(x, y)).enumerate().fold(
                (0, f64::NEG_INFINITY),
                |acc, (j, r)| if r > acc.1 { (j, r) } else { acc },
            )
        })
        .collect();
    let rho: Vec<f64> = best.iter().map(|b| b.1).collect();
    let mppc = rho.iter().sum::<f64>() / rho.len() as f64;
    Ok(MppcResult {
        argmax: best.iter().map(|b| b.0).collect(),
        rho,
        mppc,
        direction: "A->B".into(),
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Significance {
    /// May underflow to 0; `log10_p` stays finite.
    pub p: f64,
    pub log10_p: f64,
}

/// Natural log of the standard normal upper tail `1 - Φ(z)`.
pub fn ln_normal_upper_tail(z: f64) -> f64 {
    if z < 20.0 {
        (0.5 * erfc(z / std::f64::consts::SQRT_2)).ln()
    } else {
        // Asymptotic expansion of Mills' ratio; exact to double precision here.
        let z2 = z * z;
        let inv = 1.0 / z2;
        let series = 1.0 - inv + 3.0 * inv * inv - 15.0 * inv.powi(3) + 105.0 * inv.powi(4);
        -0.5 * z2 - z.ln() - 0.5 * (2.0 * std::f64::consts::PI).ln() + series.ln()
    }
}

/// Probability that the largest of `k` independent null correlations over
/// `n` samples exceeds `x`, via the Fisher z-transform:
/// `1 - Φ(artanh(x) √(n-3))^k`.
pub fn mppc_significance(x: f64, n: usize, k: usize) -> Result<Significance> {
    if n <= 3 {
        return Err(Error::Config(format!("significance needs n > 3, got {n}")));
    }
    if k == 0 {
        return Err(Error::Config("significance needs k >= 1".into()));
    }
    if !(x.abs() < 1.0) {
        return Err(Error::Config(format!(
            "threshold must satisfy |x| < 1, got {x}"
        )));
    }
    let z = x.atanh() * ((n - 3) as f64).sqrt();
    let ln_q = ln_normal_upper_tail(z);
    let q = ln_q.exp();
    let kf = k as f64;
    let ln_p = if q > 1e-200 {
        // 1 - (1 - q)^k
        let p = -(kf * (-q).ln_1p()).exp_m1();
        p.ln()
    } else {
        // (1 - q)^k = 1 - k q + O((k q)^2) and k q is negligible here.
        kf.ln() + ln_q
    };
    Ok(Significance {
        p: ln_p.exp(),
        log10_p: ln_p / std::f64::consts::LN_10,
    })
}
