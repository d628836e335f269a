// SPDX-License-Identifier: MIT OR Apache-2.0

//! Comparison methods: supervised Fisher discriminants and a TopK sparse
//! autoencoder.

pub mod lda;
pub mod sae;

pub use lda::{lda_dictionary, lda_pair_direction, LdaModel};
pub use sae::{load_sae, sae_dictionary, sae_forward, sae_train, save_sae, SaeConfig, TopKSae};
