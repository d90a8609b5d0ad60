// SPDX-License-Identifier: MIT OR Apache-2.0

//! Decoding-time bias mitigation for language models.
//!
//! A target model's next-token logits are steered by the difference between
//! an *expert* (trained on anti-stereotypical text) and an *anti-expert*
//! (trained on stereotypical text):
//!
//! ```text
//! p~(x_t | x_<t) = softmax(z_t + alpha * (z_t_plus - z_t_minus))
//! ```
//!
//! The crate contains the combiner ([`ensemble`]), local backends and a
//! remote-model client ([`lm`], [`remote`]), a nucleus-sampling decoder
//! ([`decoder`]), dataset construction ([`datasets`]) and the bias and
//! language-modelling metrics used to evaluate it ([`metrics`]).

pub mod cli;
pub mod datasets;
pub mod decoder;
pub mod ensemble;
pub mod error;
pub mod lm;
pub mod metrics;
pub mod remote;
pub mod vocab;

pub use error::{Error, ErrorKind, Result};
