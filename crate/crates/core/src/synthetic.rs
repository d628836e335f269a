// SPDX-License-Identifier: MIT OR Apache-2.0

//! Synthetic activations with planted concept directions.
//!
//! Each sample switches every concept on independently with its group's
//! `activation_prob`, adds `magnitude · direction` for the active ones and
//! finishes with isotropic Gaussian noise.

use rand::Rng;
use rand_distr::{Distribution, LogNormal, Normal, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg::seeded_rng;
use crate::tensor_io::{ActivationMatrix, Attribute, LabelTable};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case", deny_unknown_fields)]
pub enum Magnitude {
    Uniform {
        low: f64,
        high: f64,
    },
    /// Heavy-tailed; `mu` and `sigma` parametrize the underlying normal.
    LogNormal {
        mu: f64,
        sigma: f64,
    },
}

impl Magnitude {
    fn validate(&self) -> Result<()> {
        let ok = match *self {
            Magnitude::Uniform { low, high } => low > 0.0 && high >= low && high.is_finite(),
            Magnitude::LogNormal { mu, sigma } => {
                mu.is_finite() && sigma > 0.0 && sigma.is_finite()
            }
        };
        if ok {
            Ok(())
        } else {
            Err(Error::Config(format!(
                "invalid magnitude distribution {self:?}"
            )))
        }
    }

    fn sample(&self, rng: &mut impl Rng) -> f64 {
        match *self {
            Magnitude::Uniform { low, high } if low == high => low,
            Magnitude::Uniform { low, high } => rng.random_range(low..high),
            Magnitude::LogNormal { mu, sigma } => {
                LogNormal::new(mu, sigma).expect("validated").sample(rng)
            }
        }
    }
}

/// A set of concepts sharing an activation rate and magnitude law.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ConceptGroup {
    pub count: usize,
    pub activation_prob: f64,
    pub magnitude: Magnitude,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct PlantedConfig {
    pub n_samples: usize,
    pub dim: usize,
    /// Concepts are numbered group by group.
    pub groups: Vec<ConceptGroup>,
    pub noise_sigma: f64,
    pub seed: u64,
}

impl Default for PlantedConfig {
    fn default() -> Self {
        Self::planted(0)
    }
}

impl PlantedConfig {
    /// D = 64, N = 10000, 8 sparse concepts with uniform magnitudes over
    /// noise 0.1.
    pub fn planted(seed: u64) -> Self {
        Self {
            n_samples: 10_000,
            dim: 64,
            groups: vec![ConceptGroup {
                count: 8,
                activation_prob: PLANTED_ACTIVATION_PROB,
                magnitude: Magnitude::Uniform {
                    low: 0.5,
                    high: 2.0,
                },
            }],
            noise_sigma: 0.1,
            seed,
        }
    }

    /// A few rare concepts with large log-normal magnitudes (concepts
    /// `0..4`) on top of many frequent moderate ones.
    pub fn skewed(seed: u64) -> Self {
        Self {
            n_samples: 10_000,
            dim: 64,
            groups: vec![
                ConceptGroup {
                    count: 4,
                    activation_prob: 0.02,
                    magnitude: Magnitude::LogNormal {
                        mu: 2.5,
                        sigma: 0.75,
                    },
                },
                ConceptGroup {
                    count: 28,
                    activation_prob: 0.3,
                    magnitude: Magnitude::Uniform {
                        low: 0.5,
                        high: 1.5,
                    },
                },
            ],
            noise_sigma: 0.1,
            seed,
        }
    }

    pub fn n_concepts(&self) -> usize {
        self.groups.iter().map(|g| g.count).sum()
    }

    fn validate(&self) -> Result<()> {
        if self.n_samples == 0 || self.dim == 0 || self.n_concepts() == 0 {
            return Err(Error::Config(
                "n_samples, dim and the concept count must be positive".into(),
            ));
        }
        for g in &self.groups {
            if !(0.0..=1.0).contains(&g.activation_prob) {
                return Err(Error::Config(format!(
                    "activation_prob must be in [0, 1], got {}",
                    g.activation_prob
                )));
            }
            g.magnitude.validate()?;
        }
        if !(self.noise_sigma >= 0.0 && self.noise_sigma.is_finite()) {
            return Err(Error::Config(format!(
                "noise_sigma must be >= 0, got {}",
                self.noise_sigma
            )));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct PlantedDataset {
    pub acts: ActivationMatrix,
    /// Unit planted directions, `n_concepts × dim`.
    pub directions: ActivationMatrix,
    /// Magnitude of every concept in every sample, 0 when inactive
    /// (`n_samples × n_concepts`).
    pub magnitudes: ActivationMatrix,
}

impl PlantedDataset {
    pub fn is_active(&self, sample: usize, concept: usize) -> bool {
        self.magnitudes.row(sample)[concept] > 0.0
    }

    /// One binary attribute `concept_<c>` (classes `absent`, `present`) per
    /// listed concept.
    pub fn labels(&self, concepts: &[usize]) -> Result<LabelTable> {
        let n = self.acts.n_samples();
        let attributes = concepts
            .iter()
            .map(|&c| {
                if c >= self.directions.n_samples() {
                    return Err(Error::Index {
                        what: "concepts",
                        index: c,
                        len: self.directions.n_samples(),
                    });
                }
                Ok(Attribute {
                    name: format!("concept_{c}"),
                    values: (0..n).map(|i| self.is_active(i, c) as u32).collect(),
                    n_classes: 2,
                    class_names: vec!["absent".into(), "present".into()],
                })
            })
            .collect::<Result<Vec<_>>>()?;
        LabelTable::new(n, attributes)
    }
}

pub const PLANTED_ACTIVATION_PROB: f64 = 0.2;

pub fn random_unit_directions(k: usize, dim: usize, rng: &mut impl Rng) -> Vec<f32> {
    let mut out = Vec::with_capacity(k * dim);
    for _ in 0..k {
        let v: Vec<f64> = (0..dim).map(|_| rng.sample(StandardNormal)).collect();
        let norm = v.iter().map(|x| x * x).sum::<f64>().sqrt();
        out.extend(v.iter().map(|x| (x / norm) as f32));
    }
    out
}

pub fn generate(cfg: &PlantedConfig) -> Result<PlantedDataset> {
    cfg.validate()?;
    let (n, d, k) = (cfg.n_samples, cfg.dim, cfg.n_concepts());
    let laws: Vec<&ConceptGroup> = cfg
        .groups
        .iter()
        .flat_map(|g| std::iter::repeat_n(g, g.count))
        .collect();
    let mut rng = seeded_rng(cfg.seed);
    let directions = random_unit_directions(k, d, &mut rng);
    let noise = Normal::new(0.0, cfg.noise_sigma).map_err(|e| Error::Config(e.to_string()))?;
    let mut acts = Vec::with_capacity(n * d);
    let mut magnitudes = Vec::with_capacity(n * k);
    let mut row = vec![0.0f64; d];
    for _ in 0..n {
        row.iter_mut().for_each(|v| *v = 0.0);
        for (c, law) in laws.iter().enumerate() {
            let m = if rng.random_bool(law.activation_prob) {
                law.magnitude.sample(&mut rng)
            } else {
                0.0
            };
            magnitudes.push(m as f32);
            if m > 0.0 {
                for (v, &u) in row.iter_mut().zip(&directions[c * d..(c + 1) * d]) {
                    *v += m * u as f64;
                }
            }
        }
        acts.extend(row.iter().map(|&v| (v + noise.sample(&mut rng)) as f32));
    }
    Ok(PlantedDataset {
        acts: ActivationMatrix::new(n, d, acts)?,
        directions: ActivationMatrix::new(k, d, directions)?,
        magnitudes: ActivationMatrix::new(n, k, magnitudes)?,
    })
}
