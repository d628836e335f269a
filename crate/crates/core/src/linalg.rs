// SPDX-License-Identifier: MIT OR Apache-2.0

//! Small dense kernels shared across modules. All reductions accumulate in
//! `f64` with a fixed summation order so results are reproducible bitwise.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

/// Deterministic, platform-independent RNG for a seed.
pub fn seeded_rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

/// Dot product of two `f32` slices accumulated in `f64`.
#[inline]
pub fn dot_f32(a: &[f32], b: &[f32]) -> f64 {
    debug_assert_eq!(a.len(), b.len());
    let mut acc = [0.0f64; 4];
    let chunks = a.len() / 4;
    for i in 0..chunks {
        let j = 4 * i;
        acc[0] += a[j] as f64 * b[j] as f64;
        acc[1] += a[j + 1] as f64 * b[j + 1] as f64;
        acc[2] += a[j + 2] as f64 * b[j + 2] as f64;
        acc[3] += a[j + 3] as f64 * b[j + 3] as f64;
    }
    let mut tail = 0.0;
    for j in 4 * chunks..a.len() {
        tail += a[j] as f64 * b[j] as f64;
    }
    (acc[0] + acc[1]) + (acc[2] + acc[3]) + tail
}

#[inline]
pub fn dot_f64(a: &[f64], b: &[f64]) -> f64 {
    debug_assert_eq!(a.len(), b.len());
    let mut acc = [0.0f64; 4];
    let chunks = a.len() / 4;
    for i in 0..chunks {
        let j = 4 * i;
        acc[0] += a[j] * b[j];
        acc[1] += a[j + 1] * b[j + 1];
        acc[2] += a[j + 2] * b[j + 2];
        acc[3] += a[j + 3] * b[j + 3];
    }
    let mut tail = 0.0;
    for j in 4 * chunks..a.len() {
        tail += a[j] * b[j];
    }
    (acc[0] + acc[1]) + (acc[2] + acc[3]) + tail
}

/// Dot product between an `f64` vector and an `f32` row.
#[inline]
pub fn dot_mixed(a: &[f64], b: &[f32]) -> f64 {
    debug_assert_eq!(a.len(), b.len());
    let mut acc = [0.0f64; 4];
    let chunks = a.len() / 4;
    for i in 0..chunks {
        let j = 4 * i;
        acc[0] += a[j] * b[j] as f64;
        acc[1] += a[j + 1] * b[j + 1] as f64;
        acc[2] += a[j + 2] * b[j + 2] as f64;
        acc[3] += a[j + 3] * b[j + 3] as f64;
    }
    let mut tail = 0.0;
    for j in 4 * chunks..a.len() {
        tail += a[j] * b[j] as f64;
    }
    (acc[0] + acc[1]) + (acc[2] + acc[3]) + tail
}

/// Squared Euclidean distance between an `f64` centroid and an `f32` point.
#[inline]
pub fn sq_dist_mixed(c: &[f64], x: &[f32]) -> f64 {
    debug_assert_eq!(c.len(), x.len());
    let mut acc = [0.0f64; 4];
    let chunks = c.len() / 4;
    for i in 0..chunks {
        let j = 4 * i;
        let d0 = c[j] - x[j] as f64;
        let d1 = c[j + 1] - x[j + 1] as f64;
        let d2 = c[j + 2] - x[j + 2] as f64;
        let d3 = c[j + 3] - x[j + 3] as f64;
        acc[0] += d0 * d0;
        acc[1] += d1 * d1;
        acc[2] += d2 * d2;
        acc[3] += d3 * d3;
    }
    let mut tail = 0.0;
    for j in 4 * chunks..c.len() {
        let d = c[j] - x[j] as f64;
        tail += d * d;
    }
    (acc[0] + acc[1]) + (acc[2] + acc[3]) + tail
}

#[inline]
pub fn sq_dist_f32(a: &[f32], b: &[f32]) -> f64 {
    a.iter()
        .zip(b)
        .map(|(&x, &y)| {
            let d = x as f64 - y as f64;
            d * d
        })
        .sum()
}

pub fn norm_f32(a: &[f32]) -> f64 {
    dot_f32(a, a).sqrt()
}

pub fn norm_f64(a: &[f64]) -> f64 {
    dot_f64(a, a).sqrt()
}

/// Cosine similarity; `None` when either vector is zero.
pub fn cosine_f32(a: &[f32], b: &[f32]) -> Option<f64> {
    let na = norm_f32(a);
    let nb = norm_f32(b);
    if na == 0.0 || nb == 0.0 {
        return None;
    }
    Some(dot_f32(a, b) / (na * nb))
}
