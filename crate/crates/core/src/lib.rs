// SPDX-License-Identifier: MIT OR Apache-2.0

//! Concept extraction from neural-network activations by clustering
//! skewness-weighted pairwise activation differences.

#![allow(clippy::needless_range_loop, clippy::neg_cmp_op_on_partial_ord)]

pub mod baselines;
pub mod cli;
pub mod concepts;
pub mod differences;
pub mod error;
pub mod evaluation;
pub mod linalg;
pub mod quadratic;
pub mod steering;
pub mod synthetic;
pub mod tensor_io;
pub mod wkmeans;

pub use error::{Error, Result};
