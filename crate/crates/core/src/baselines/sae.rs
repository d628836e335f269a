// SPDX-License-Identifier: MIT OR Apache-2.0

//! TopK sparse autoencoder trained with Adam on mean squared reconstruction
//! error.
//!
//! Forward pass: `pre = (x - b_dec) W_enc + b_enc`, `z = TopK(pre)` keeping the
//! `k_active` largest entries (ties to the lower index, no rectification),
//! `x_hat = z W_dec + b_dec`. Decoder rows are projected back to unit norm
//! after every optimizer step. Parameters are held in `f64`; checkpoints
//! store them as `float32`.

use std::fs;
use std::path::Path;

use rand::seq::SliceRandom;
use rand::Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::concepts::ConceptScores;
use crate::error::{Error, Result};
use crate::linalg::{norm_f64, seeded_rng};
use crate::tensor_io::{self, ActivationMatrix, ConceptDictionary, ConceptMeta};

pub const METHOD_TOPK_SAE: &str = "topk-sae";
pub const DEFAULT_K_ACTIVE: usize = 32;
pub const DEFAULT_LR: f64 = 1e-5;
pub const META_FILE: &str = "sae.meta.json";

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SaeConfig {
    pub k: usize,
    pub k_active: usize,
    pub lr: f64,
    pub epochs: usize,
    pub batch_size: usize,
    pub seed: u64,
    pub beta1: f64,
    pub beta2: f64,
    pub adam_eps: f64,
}

impl Default for SaeConfig {
    fn default() -> Self {
        Self {
            k: crate::concepts::DEFAULT_K,
            k_active: DEFAULT_K_ACTIVE,
            lr: DEFAULT_LR,
            epochs: 10,
            batch_size: 256,
            seed: 0,
            beta1: 0.9,
            beta2: 0.999,
            adam_eps: 1e-8,
        }
    }
}

impl SaeConfig {
    pub fn validate(&self, dim: usize) -> Result<()> {
        if self.k == 0 || dim == 0 {
            return Err(Error::Config("SAE needs k >= 1 and dim >= 1".into()));
        }
        if self.k_active == 0 || self.k_active > self.k {
            return Err(Error::Config(format!(
                "k_active must be in [1, k={}], got {}",
                self.k, self.k_active
            )));
        }
        if self.batch_size == 0 {
            return Err(Error::Config("batch_size must be at least 1".into()));
        }
        if !(self.lr >= 0.0 && self.lr.is_finite()) {
            return Err(Error::Config(format!(
                "lr must be finite and >= 0, got {}",
                self.lr
            )));
        }
        Ok(())
    }
}

/// Model parameters; also used for gradients and Adam moments.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SaeParams {
    pub dim: usize,
    pub k: usize,
    /// `dim × k`, row-major.
    pub w_enc: Vec<f64>,
    pub b_enc: Vec<f64>,
    /// `k × dim`, row-major.
    pub w_dec: Vec<f64>,
    pub b_dec: Vec<f64>,
}

impl SaeParams {
    pub fn zeros(dim: usize, k: usize) -> Self {
        Self {
            dim,
            k,
            w_enc: vec![0.0; dim * k],
            b_enc: vec![0.0; k],
            w_dec: vec![0.0; k * dim],
            b_dec: vec![0.0; dim],
        }
    }

    fn slices_mut(&mut self) -> [&mut Vec<f64>; 4] {
        [
            &mut self.w_enc,
            &mut self.b_enc,
            &mut self.w_dec,
            &mut self.b_dec,
        ]
    }

    fn slices(&self) -> [&Vec<f64>; 4] {
        [&self.w_enc, &self.b_enc, &self.w_dec, &self.b_dec]
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TopKSae {
    pub params: SaeParams,
    pub k_active: usize,
    pub adam_m: SaeParams,
    pub adam_v: SaeParams,
    pub step: u64,
    /// Mean batch loss per completed epoch.
    pub loss_history: Vec<f64>,
}

impl TopKSae {
    /// Random unit decoder rows, tied encoder, decoder bias at the data mean.
    pub fn init(acts: &ActivationMatrix, cfg: &SaeConfig) -> Result<Self> {
        let dim = acts.dim();
        cfg.validate(dim)?;
        let k = cfg.k;
        let mut rng = seeded_rng(cfg.seed);
        let mut p = SaeParams::zeros(dim, k);
        for c in 0..k {
            let row = &mut p.w_dec[c * dim..(c + 1) * dim];
            loop {
                for v in row.iter_mut() {
                    *v = rng.sample::<f64, _>(StandardNormal);
                }
                let n = norm_f64(row);
                if n > 0.0 {
                    row.iter_mut().for_each(|v| *v /= n);
                    break;
                }
            }
        }
        for c in 0..k {
            for d in 0..dim {
                p.w_enc[d * k + c] = p.w_dec[c * dim + d];
            }
        }
        let n = acts.n_samples() as f64;
        for r in acts.rows() {
            for (b, &v) in p.b_dec.iter_mut().zip(r) {
                *b += v as f64;
            }
        }
        p.b_dec.iter_mut().for_each(|b| *b /= n);
        Ok(Self {
            params: p,
            k_active: cfg.k_active,
            adam_m: SaeParams::zeros(dim, k),
            adam_v: SaeParams::zeros(dim, k),
            step: 0,
            loss_history: Vec::new(),
        })
    }

    pub fn dim(&self) -> usize {
        self.params.dim
    }

    pub fn k(&self) -> usize {
        self.params.k
    }

    fn pre_activations(&self, x: &[f32], out: &mut [f64]) {
        let (dim, k) = (self.params.dim, self.params.k);
        out.copy_from_slice(&self.params.b_enc);
        for d in 0..dim {
            let centered = x[d] as f64 - self.params.b_dec[d];
            if centered == 0.0 {
                continue;
            }
            let w = &self.params.w_enc[d * k..(d + 1) * k];
            for (o, &wv) in out.iter_mut().zip(w) {
                *o += centered * wv;
            }
        }
    }

    /// Sparse code of `x` as `(index, value)` pairs in ascending index order.
    pub fn encode(&self, x: &[f32]) -> Vec<(usize, f64)> {
        let mut pre = vec![0.0; self.params.k];
        self.pre_activations(x, &mut pre);
        top_k(&pre, self.k_active)
    }

    fn decode_into(&self, code: &[(usize, f64)], out: &mut [f64]) {
        let dim = self.params.dim;
        out.copy_from_slice(&self.params.b_dec);
        for &(c, z) in code {
            let row = &self.params.w_dec[c * dim..(c + 1) * dim];
            for (o, &w) in out.iter_mut().zip(row) {
                *o += z * w;
            }
        }
    }

    /// Mean squared reconstruction error over all elements of `rows`.
    pub fn loss(&self, acts: &ActivationMatrix, rows: &[usize]) -> f64 {
        let dim = self.params.dim;
        let mut recon = vec![0.0; dim];
        let mut total = 0.0;
        for &i in rows {
            let x = acts.row(i);
            self.decode_into(&self.encode(x), &mut recon);
            total += recon
                .iter()
                .zip(x)
                .map(|(r, &v)| (r - v as f64).powi(2))
                .sum::<f64>();
        }
        total / (rows.len() * dim) as f64
    }

    /// Loss and analytic gradient over a batch.
    pub fn loss_and_grad(&self, acts: &ActivationMatrix, rows: &[usize]) -> (f64, SaeParams) {
        let (dim, k) = (self.params.dim, self.params.k);
        let mut g = SaeParams::zeros(dim, k);
        let scale = 2.0 / (rows.len() * dim) as f64;
        let mut pre = vec![0.0; k];
        let mut recon = vec![0.0; dim];
        let mut resid = vec![0.0; dim];
        let mut total = 0.0;
        for &i in rows {
            let x = acts.row(i);
            self.pre_activations(x, &mut pre);
            let code = top_k(&pre, self.k_active);
            self.decode_into(&code, &mut recon);
            for d in 0..dim {
                let r = recon[d] - x[d] as f64;
                total += r * r;
                resid[d] = scale * r;
                g.b_dec[d] += resid[d];
            }
            for &(c, z) in &code {
                let wrow = &self.params.w_dec[c * dim..(c + 1) * dim];
                let grow = &mut g.w_dec[c * dim..(c + 1) * dim];
                let mut dpre = 0.0;
                for d in 0..dim {
                    grow[d] += z * resid[d];
                    dpre += wrow[d] * resid[d];
                }
                g.b_enc[c] += dpre;
                for d in 0..dim {
                    let centered = x[d] as f64 - self.params.b_dec[d];
                    g.w_enc[d * k + c] += centered * dpre;
                    g.b_dec[d] -= self.params.w_enc[d * k + c] * dpre;
                }
            }
        }
        (total / (rows.len() * dim) as f64, g)
    }

    fn adam_step(&mut self, grad: &SaeParams, cfg: &SaeConfig) {
        self.step += 1;
        let t = self.step as i32;
        let bc1 = 1.0 - cfg.beta1.powi(t);
        let bc2 = 1.0 - cfg.beta2.powi(t);
        let params = self.params.slices_mut();
        let ms = self.adam_m.slices_mut();
        let vs = self.adam_v.slices_mut();
        for (((p, m), v), g) in params.into_iter().zip(ms).zip(vs).zip(grad.slices()) {
            for j in 0..p.len() {
                m[j] = cfg.beta1 * m[j] + (1.0 - cfg.beta1) * g[j];
                v[j] = cfg.beta2 * v[j] + (1.0 - cfg.beta2) * g[j] * g[j];
                let mhat = m[j] / bc1;
                let vhat = v[j] / bc2;
                p[j] -= cfg.lr * mhat / (vhat.sqrt() + cfg.adam_eps);
            }
        }
        self.normalize_decoder();
    }

    fn normalize_decoder(&mut self) {
        let dim = self.params.dim;
        for row in self.params.w_dec.chunks_exact_mut(dim) {
            let n = norm_f64(row);
            if n > 0.0 {
                row.iter_mut().for_each(|v| *v /= n);
            }
        }
    }

    /// Codes for every sample as a dense `N × k` score matrix.
    pub fn scores(&self, acts: &ActivationMatrix) -> Result<ConceptScores> {
        if acts.dim() != self.dim() {
            return Err(Error::Shape(format!(
                "activations have dimension {} but SAE expects {}",
                acts.dim(),
                self.dim()
            )));
        }
        use rayon::prelude::*;
        let k = self.k();
        let rows: Vec<Vec<f32>> = (0..acts.n_samples())
            .into_par_iter()
            .map(|i| {
                let mut dense = vec![0.0f32; k];
                for (c, z) in self.encode(acts.row(i)) {
                    dense[c] = z as f32;
                }
                dense
            })
            .collect();
        Ok(ConceptScores::new(ActivationMatrix::new(
            acts.n_samples(),
            k,
            rows.concat(),
        )?))
    }
}

/// Keep the `k_active` largest entries, ties broken toward the lower index.
/// Returned in ascending index order.
pub fn top_k(values: &[f64], k_active: usize) -> Vec<(usize, f64)> {
    let mut idx: Vec<usize> = (0..values.len()).collect();
    let keep = k_active.min(values.len());
    if keep < values.len() {
        let cmp = |a: &usize, b: &usize| values[*b].total_cmp(&values[*a]).then(a.cmp(b));
        idx.select_nth_unstable_by(keep, cmp);
        idx.truncate(keep);
    }
    idx.sort_unstable();
    idx.into_iter().map(|i| (i, values[i])).collect()
}

/// Apply TopK to a dense pre-activation vector.
pub fn top_k_dense(values: &[f64], k_active: usize) -> Vec<f64> {
    let mut out = vec![0.0; values.len()];
    for (i, v) in top_k(values, k_active) {
        out[i] = v;
    }
    out
}

/// Codes and reconstructions for a batch.
pub fn sae_forward(
    model: &TopKSae,
    x: &ActivationMatrix,
) -> Result<(ActivationMatrix, ActivationMatrix)> {
    let codes = model.scores(x)?.into_matrix();
    let dim = model.dim();
    let mut recon = Vec::with_capacity(x.n_samples() * dim);
    let mut buf = vec![0.0; dim];
    for i in 0..x.n_samples() {
        model.decode_into(&model.encode(x.row(i)), &mut buf);
        recon.extend(buf.iter().map(|&v| v as f32));
    }
    Ok((codes, ActivationMatrix::new(x.n_samples(), dim, recon)?))
}

/// Train a fresh SAE on `acts`.
pub fn sae_train(acts: &ActivationMatrix, cfg: &SaeConfig) -> Result<TopKSae> {
    let mut model = TopKSae::init(acts, cfg)?;
    sae_continue(&mut model, acts, cfg)?;
    Ok(model)
}

/// Run `cfg.epochs` further epochs on an existing model.
pub fn sae_continue(model: &mut TopKSae, acts: &ActivationMatrix, cfg: &SaeConfig) -> Result<()> {
    cfg.validate(acts.dim())?;
    if acts.dim() != model.dim() || cfg.k != model.k() || cfg.k_active != model.k_active {
        return Err(Error::Config(
            "SAE configuration does not match the model".into(),
        ));
    }
    let mut rng = seeded_rng(cfg.seed.wrapping_add(1));
    let mut order: Vec<usize> = (0..acts.n_samples()).collect();
    for epoch in 0..cfg.epochs {
        order.shuffle(&mut rng);
        let mut sum = 0.0;
        let mut batches = 0;
        for batch in order.chunks(cfg.batch_size) {
            let (loss, grad) = model.loss_and_grad(acts, batch);
            if !loss.is_finite() {
                return Err(Error::TrainingDiverged { epoch });
            }
            model.adam_step(&grad, cfg);
            sum += loss;
            batches += 1;
        }
        let mean = sum / batches as f64;
        log::debug!("sae epoch {epoch}: loss {mean:.6e}");
        model.loss_history.push(mean);
    }
    if model
        .params
        .slices()
        .iter()
        .any(|s| s.iter().any(|v| !v.is_finite()))
    {
        return Err(Error::TrainingDiverged {
            epoch: cfg.epochs.saturating_sub(1),
        });
    }
    Ok(())
}

/// Decoder rows as a unit-norm concept dictionary.
pub fn sae_dictionary(model: &TopKSae, source_sha256: &str) -> Result<ConceptDictionary> {
    let dim = model.dim();
    let mut data = Vec::with_capacity(model.k() * dim);
    for row in model.params.w_dec.chunks_exact(dim) {
        let n = norm_f64(row);
        if n == 0.0 {
            return Err(Error::DegenerateDirection(
                "SAE decoder row is all zeros".into(),
            ));
        }
        data.extend(row.iter().map(|&v| (v / n) as f32));
    }
    let meta = ConceptMeta {
        method: METHOD_TOPK_SAE.into(),
        seed: None,
        k: model.k(),
        dim,
        skew_epsilon: None,
        normalized: true,
        source_sha256: source_sha256.to_string(),
        notes: vec![format!("k_active={}", model.k_active)],
    };
    ConceptDictionary::new(ActivationMatrix::new(model.k(), dim, data)?, meta)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct SaeMeta {
    dim: usize,
    k: usize,
    k_active: usize,
    step: u64,
    loss_history: Vec<f64>,
    config: SaeConfig,
}

fn to_f32(v: &[f64]) -> Vec<f32> {
    v.iter().map(|&x| x as f32).collect()
}

/// Write the four parameter arrays and metadata to `dir`.
pub fn save_sae(model: &TopKSae, cfg: &SaeConfig, dir: impl AsRef<Path>) -> Result<()> {
    let dir = dir.as_ref();
    fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    let (d, k) = (model.dim(), model.k());
    let p = &model.params;
    tensor_io::npy::write(&dir.join("w_enc.npy"), d, k, &to_f32(&p.w_enc))?;
    tensor_io::npy::write(&dir.join("b_enc.npy"), 1, k, &to_f32(&p.b_enc))?;
    tensor_io::npy::write(&dir.join("w_dec.npy"), k, d, &to_f32(&p.w_dec))?;
    tensor_io::npy::write(&dir.join("b_dec.npy"), 1, d, &to_f32(&p.b_dec))?;
    let meta = SaeMeta {
        dim: d,
        k,
        k_active: model.k_active,
        step: model.step,
        loss_history: model.loss_history.clone(),
        config: cfg.clone(),
    };
    let path = dir.join(META_FILE);
    fs::write(&path, serde_json::to_vec_pretty(&meta)?).map_err(|e| Error::io(&path, e))
}

/// Load a checkpoint written by [`save_sae`]. Optimizer moments are not
/// persisted and restart at zero.
pub fn load_sae(dir: impl AsRef<Path>) -> Result<(TopKSae, SaeConfig)> {
    let dir = dir.as_ref();
    let meta_path = dir.join(META_FILE);
    if !meta_path.exists() {
        return Err(Error::MissingPath(meta_path));
    }
    let bytes = fs::read(&meta_path).map_err(|e| Error::io(&meta_path, e))?;
    let meta: SaeMeta = serde_json::from_slice(&bytes).map_err(|e| Error::Schema(e.to_string()))?;
    let (d, k) = (meta.dim, meta.k);
    let load = |name: &str, rows: usize, cols: usize| -> Result<Vec<f64>> {
        let arr = tensor_io::npy::read(&dir.join(name))?;
        if (arr.rows, arr.cols) != (rows, cols) {
            return Err(Error::Schema(format!(
                "{name} has shape ({}, {}), expected ({rows}, {cols})",
                arr.rows, arr.cols
            )));
        }
        Ok(arr.data.iter().map(|&v| v as f64).collect())
    };
    let params = SaeParams {
        dim: d,
        k,
        w_enc: load("w_enc.npy", d, k)?,
        b_enc: load("b_enc.npy", 1, k)?,
        w_dec: load("w_dec.npy", k, d)?,
        b_dec: load("b_dec.npy", 1, d)?,
    };
    if meta.k_active == 0 || meta.k_active > k {
        return Err(Error::Schema(format!(
            "k_active {} out of range",
            meta.k_active
        )));
    }
    let model = TopKSae {
        params,
        k_active: meta.k_active,
        adam_m: SaeParams::zeros(d, k),
        adam_v: SaeParams::zeros(d, k),
        step: meta.step,
        loss_history: meta.loss_history,
    };
    Ok((model, meta.config))
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;
    use rand::Rng;

    fn random(n: usize, d: usize, seed: u64) -> ActivationMatrix {
        let mut rng = seeded_rng(seed);
        ActivationMatrix::new(
            n,
            d,
            (0..n * d).map(|_| rng.random_range(-1.0f32..1.0)).collect(),
        )
        .unwrap()
    }

    fn small_cfg(k: usize, k_active: usize) -> SaeConfig {
        SaeConfig {
            k,
            k_active,
            epochs: 0,
            ..SaeConfig::default()
        }
    }

    #[test]
    fn top_k_examples() {
        assert_eq!(
            top_k_dense(&[0.5, -2.0, 1.0, 0.1], 2),
            vec![0.5, 0.0, 1.0, 0.0]
        );
        assert_eq!(top_k_dense(&[0.5, -2.0, 1.0], 3), vec![0.5, -2.0, 1.0]);
        assert_eq!(top_k(&[1.0, 1.0, 1.0], 2), vec![(0, 1.0), (1, 1.0)]);
    }

    #[test]
    fn gradients_match_central_differences() {
        let acts = random(5, 4, 1);
        let mut model = TopKSae::init(&acts, &small_cfg(6, 2)).unwrap();
        // Move off the symmetric tied initialization.
        let mut rng = seeded_rng(2);
        for s in model.params.slices_mut() {
            s.iter_mut().for_each(|v| *v += rng.random_range(-0.3..0.3));
        }
        let rows: Vec<usize> = (0..5).collect();
        let (_, grad) = model.loss_and_grad(&acts, &rows);
        let h = 1e-6;
        for which in 0..4 {
            let len = model.params.slices()[which].len();
            for j in 0..len {
                let mut plus = model.clone();
                plus.params.slices_mut()[which][j] += h;
                let mut minus = model.clone();
                minus.params.slices_mut()[which][j] -= h;
                let fd = (plus.loss(&acts, &rows) - minus.loss(&acts, &rows)) / (2.0 * h);
                let an = grad.slices()[which][j];
                let err = (fd - an).abs() / an.abs().max(fd.abs()).max(1e-6);
                assert!(err <= 1e-3, "param {which}[{j}]: analytic {an} vs fd {fd}");
            }
        }
    }

    #[test]
    fn codes_have_exactly_k_active_nonzeros() {
        let acts = random(40, 6, 3);
        let model = TopKSae::init(&acts, &small_cfg(10, 3)).unwrap();
        let (codes, recon) = sae_forward(&model, &acts).unwrap();
        for r in codes.rows() {
            assert_eq!(r.iter().filter(|&&v| v != 0.0).count(), 3);
        }
        assert_eq!((recon.n_samples(), recon.dim()), (40, 6));
    }

    #[test]
    fn zero_epochs_returns_initial_model() {
        let acts = random(20, 4, 4);
        let cfg = small_cfg(8, 2);
        let trained = sae_train(&acts, &cfg).unwrap();
        assert_eq!(trained, TopKSae::init(&acts, &cfg).unwrap());
        assert!(trained.loss_history.is_empty());
    }

    #[test]
    fn zero_learning_rate_leaves_weights_unchanged() {
        let acts = random(30, 4, 5);
        let cfg = SaeConfig {
            lr: 0.0,
            epochs: 3,
            batch_size: 8,
            ..small_cfg(8, 2)
        };
        let init = TopKSae::init(&acts, &cfg).unwrap();
        let trained = sae_train(&acts, &cfg).unwrap();
        assert_eq!(trained.loss_history.len(), 3);
        for (a, b) in init.params.slices().iter().zip(trained.params.slices()) {
            for (x, y) in a.iter().zip(b.iter()) {
                assert!((x - y).abs() <= 1e-15, "{x} vs {y}");
            }
        }
    }

    #[test]
    fn decoder_rows_stay_unit_norm_and_loss_drops() {
        // Samples are sparse combinations of four directions.
        let mut rng = seeded_rng(6);
        let dim = 8;
        let atoms: Vec<Vec<f32>> = (0..4)
            .map(|_| {
                let v: Vec<f32> = (0..dim).map(|_| rng.random_range(-1.0..1.0)).collect();
                let n = crate::linalg::norm_f32(&v) as f32;
                v.iter().map(|x| x / n).collect()
            })
            .collect();
        let rows: Vec<Vec<f32>> = (0..800)
            .map(|_| {
                let a = &atoms[rng.random_range(0..4)];
                let m = rng.random_range(0.5f32..2.0);
                a.iter()
                    .map(|v| m * v + rng.random_range(-0.01..0.01))
                    .collect()
            })
            .collect();
        let acts = ActivationMatrix::from_rows(&rows).unwrap();
        let cfg = SaeConfig {
            k: 8,
            k_active: 1,
            lr: 1e-2,
            epochs: 60,
            batch_size: 64,
            seed: 3,
            ..SaeConfig::default()
        };
        let model = sae_train(&acts, &cfg).unwrap();
        for row in model.params.w_dec.chunks_exact(dim) {
            assert!((norm_f64(row) - 1.0).abs() < 1e-5);
        }
        let all: Vec<usize> = (0..800).collect();
        let total_var: f64 = {
            let mean: Vec<f64> = (0..dim)
                .map(|d| rows.iter().map(|r| r[d] as f64).sum::<f64>() / 800.0)
                .collect();
            rows.iter()
                .flat_map(|r| r.iter().zip(&mean).map(|(&v, m)| (v as f64 - m).powi(2)))
                .sum::<f64>()
                / (800 * dim) as f64
        };
        let mse = model.loss(&acts, &all);
        assert!(mse < 0.1 * total_var, "mse {mse} vs variance {total_var}");
        assert!(model.loss_history.first() > model.loss_history.last());
    }

    #[test]
    fn dictionary_and_scores_follow_the_model() {
        let acts = random(25, 5, 7);
        let model = TopKSae::init(&acts, &small_cfg(6, 2)).unwrap();
        let dict = sae_dictionary(&model, &acts.fingerprint()).unwrap();
        assert_eq!(dict.meta().method, "topk-sae");
        for c in 0..6 {
            let row = &model.params.w_dec[c * 5..(c + 1) * 5];
            for (a, &b) in dict.direction(c).iter().zip(row) {
                assert!((*a as f64 - b).abs() < 1e-7);
            }
        }
        let scores = model.scores(&acts).unwrap();
        for i in 0..25 {
            let code = model.encode(acts.row(i));
            for c in 0..6 {
                let expected = code.iter().find(|e| e.0 == c).map_or(0.0, |e| e.1 as f32);
                assert_eq!(scores.get(i, c), expected);
            }
        }
    }

    #[test]
    fn checkpoint_round_trip() {
        let acts = random(30, 4, 8);
        let cfg = SaeConfig {
            lr: 1e-3,
            epochs: 2,
            batch_size: 10,
            ..small_cfg(5, 2)
        };
        let model = sae_train(&acts, &cfg).unwrap();
        let dir = tempfile::tempdir().unwrap();
        save_sae(&model, &cfg, dir.path()).unwrap();
        let (loaded, loaded_cfg) = load_sae(dir.path()).unwrap();
        assert_eq!(loaded_cfg, cfg);
        assert_eq!(loaded.loss_history, model.loss_history);
        for (a, b) in loaded.params.slices().iter().zip(model.params.slices()) {
            for (x, y) in a.iter().zip(b.iter()) {
                assert_eq!(*x, *y as f32 as f64);
            }
        }
        assert!(matches!(
            load_sae(dir.path().join("nope")),
            Err(Error::MissingPath(_))
        ));
    }

    #[test]
    fn invalid_configs_are_rejected() {
        let acts = random(10, 3, 9);
        assert!(TopKSae::init(&acts, &small_cfg(4, 5)).is_err());
        assert!(TopKSae::init(&acts, &small_cfg(4, 0)).is_err());
    }

    proptest! {
        #[test]
        fn top_k_keeps_largest_by_value_then_index(vals in proptest::collection::vec(-3i32..3, 1..20), k in 1usize..25) {
            let v: Vec<f64> = vals.iter().map(|&x| x as f64).collect();
            let kept = top_k(&v, k);
            prop_assert_eq!(kept.len(), k.min(v.len()));
            let mut order: Vec<usize> = (0..v.len()).collect();
            order.sort_by(|&a, &b| v[b].total_cmp(&v[a]).then(a.cmp(&b)));
            let mut expected: Vec<usize> = order[..k.min(v.len())].to_vec();
            expected.sort_unstable();
            prop_assert_eq!(kept.iter().map(|e| e.0).collect::<Vec<_>>(), expected);
        }
    }
}
