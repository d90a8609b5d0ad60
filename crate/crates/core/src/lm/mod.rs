// SPDX-License-Identifier: MIT OR Apache-2.0

//! Next-token distribution providers.
//!
//! A provider maps a context to a [`LogitVector`] over a fixed vocabulary.
//! Logits (not probabilities) are the canonical interface because the
//! ensemble operates pre-softmax.

mod ngram;
mod table;

pub use ngram::NGramModel;
pub use table::{TableProvider, UniformProvider};

use std::sync::Arc;

use crate::error::{Error, Result};
use crate::vocab::{Fingerprint, TokenId};

/// Floor applied to probabilities before taking logarithms.
pub const PROB_FLOOR: f64 = 1e-12;

/// Tolerance on the total mass of a [`ProbVector`].
pub const PROB_SUM_TOL: f64 = 1e-9;

/// Unnormalized natural-log scores over the vocabulary. Every entry is finite.
#[derive(Debug, Clone, PartialEq)]
pub struct LogitVector(Vec<f64>);

impl LogitVector {
    pub fn new(values: Vec<f64>) -> Result<Self> {
        if let Some(index) = values.iter().position(|v| !v.is_finite()) {
            return Err(Error::NonFinite { index });
        }
        Ok(LogitVector(values))
    }

    pub fn zeros(len: usize) -> Self {
        LogitVector(vec![0.0; len])
    }

    /// Logits of a probability vector, with zero mass floored at [`PROB_FLOOR`].
    pub fn from_probs(p: &ProbVector) -> Self {
        LogitVector(p.0.iter().map(|&x| x.max(PROB_FLOOR).ln()).collect())
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.0
    }

    pub fn into_inner(self) -> Vec<f64> {
        self.0
    }

    pub fn softmax(&self) -> ProbVector {
        softmax(&self.0)
    }
}

/// A probability distribution over the vocabulary.
#[derive(Debug, Clone, PartialEq)]
pub struct ProbVector(Vec<f64>);

impl ProbVector {
    /// Validates entries in `[0, 1]` summing to one within [`PROB_SUM_TOL`].
    pub fn new(values: Vec<f64>) -> Result<Self> {
        if values.is_empty() {
            return Err(Error::InvalidDistribution("empty".into()));
        }
        if let Some(i) = values
            .iter()
            .position(|&v| !v.is_finite() || !(0.0..=1.0).contains(&v))
        {
            return Err(Error::InvalidDistribution(format!(
                "entry {i} = {} outside [0, 1]",
                values[i]
            )));
        }
        let total: f64 = values.iter().sum();
        if (total - 1.0).abs() > PROB_SUM_TOL {
            return Err(Error::InvalidDistribution(format!("sums to {total}")));
        }
        Ok(ProbVector(values))
    }

    pub fn uniform(len: usize) -> Self {
        ProbVector(vec![1.0 / len as f64; len])
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.0
    }

    pub fn into_inner(self) -> Vec<f64> {
        self.0
    }

    pub(crate) fn from_raw(values: Vec<f64>) -> Self {
        ProbVector(values)
    }
}

/// Max-subtracted softmax.
pub fn softmax(logits: &[f64]) -> ProbVector {
    let max = logits.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let exps: Vec<f64> = logits.iter().map(|&z| (z - max).exp()).collect();
    let total: f64 = exps.iter().sum();
    ProbVector(exps.into_iter().map(|e| e / total).collect())
}

/// `ln Σ exp(z_i)`, stabilized.
pub fn log_sum_exp(logits: &[f64]) -> f64 {
    let max = logits.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    max + logits.iter().map(|&z| (z - max).exp()).sum::<f64>().ln()
}

/// Log-probabilities `z_i - ln Σ exp(z)`.
pub fn log_softmax(logits: &[f64]) -> Vec<f64> {
    let lse = log_sum_exp(logits);
    logits.iter().map(|&z| z - lse).collect()
}

/// A deterministic next-token scorer.
///
/// Implementations must return identical logits for identical contexts.
pub trait DistributionProvider: Send + Sync {
    /// Human-readable identity used in error messages.
    fn name(&self) -> String;
    fn vocab_size(&self) -> usize;
    fn fingerprint(&self) -> Fingerprint;
    fn next_logits(&self, context: &[TokenId]) -> Result<LogitVector>;

    fn next_probs(&self, context: &[TokenId]) -> Result<ProbVector> {
        Ok(self.next_logits(context)?.softmax())
    }
}

pub type SharedProvider = Arc<dyn DistributionProvider>;

impl<P: DistributionProvider + ?Sized> DistributionProvider for Arc<P> {
    fn name(&self) -> String {
        (**self).name()
    }
    fn vocab_size(&self) -> usize {
        (**self).vocab_size()
    }
    fn fingerprint(&self) -> Fingerprint {
        (**self).fingerprint()
    }
    fn next_logits(&self, context: &[TokenId]) -> Result<LogitVector> {
        (**self).next_logits(context)
    }
}

/// Succeeds iff both providers share the same vocabulary fingerprint and size.
pub fn assert_compatible(
    a: &(impl DistributionProvider + ?Sized),
    b: &(impl DistributionProvider + ?Sized),
) -> Result<()> {
    if a.fingerprint() == b.fingerprint() && a.vocab_size() == b.vocab_size() {
        Ok(())
    } else {
        Err(Error::Incompatible {
            left_name: a.name(),
            left: a.fingerprint(),
            left_size: a.vocab_size(),
            right_name: b.name(),
            right: b.fingerprint(),
            right_size: b.vocab_size(),
        })
    }
}

pub(crate) fn check_context(context: &[TokenId], size: usize) -> Result<()> {
    match context.iter().find(|&&id| id as usize >= size) {
        Some(&id) => Err(Error::TokenOutOfRange { id, size }),
        None => Ok(()),
    }
}
