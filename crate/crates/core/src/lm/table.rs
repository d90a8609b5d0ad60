// SPDX-License-Identifier: MIT OR Apache-2.0

use std::collections::HashMap;

use super::{check_context, DistributionProvider, LogitVector, ProbVector};
use crate::error::{Error, Result};
use crate::vocab::{Fingerprint, TokenId};

/// Fixed lookup table of next-token distributions keyed by exact context.
#[derive(Debug, Clone)]
pub struct TableProvider {
    fingerprint: Fingerprint,
    rows: HashMap<Vec<TokenId>, LogitVector>,
    fallback: LogitVector,
    name: String,
}

impl TableProvider {
    pub fn new(
        fingerprint: Fingerprint,
        rows: impl IntoIterator<Item = (Vec<TokenId>, ProbVector)>,
        fallback: ProbVector,
    ) -> Result<Self> {
        let size = fallback.len();
        let mut table = HashMap::new();
        for (ctx, row) in rows {
            if row.len() != size {
                return Err(Error::LengthMismatch {
                    expected: size,
                    actual: row.len(),
                });
            }
            table.insert(ctx, LogitVector::from_probs(&row));
        }
        Ok(TableProvider {
            fingerprint,
            rows: table,
            fallback: LogitVector::from_probs(&fallback),
            name: "table".into(),
        })
    }

    pub fn with_name(mut self, name: impl Into<String>) -> Self {
        self.name = name.into();
        self
    }
}

impl DistributionProvider for TableProvider {
    fn name(&self) -> String {
        self.name.clone()
    }

    fn vocab_size(&self) -> usize {
        self.fallback.len()
    }

    fn fingerprint(&self) -> Fingerprint {
        self.fingerprint
    }

    fn next_logits(&self, context: &[TokenId]) -> Result<LogitVector> {
        check_context(context, self.vocab_size())?;
        Ok(self.rows.get(context).unwrap_or(&self.fallback).clone())
    }
}

/// All-zero logits: the uniform distribution for every context.
#[derive(Debug, Clone)]
pub struct UniformProvider {
    size: usize,
    fingerprint: Fingerprint,
}

impl UniformProvider {
    pub fn new(size: usize, fingerprint: Fingerprint) -> Self {
        UniformProvider { size, fingerprint }
    }

    pub fn for_vocab(vocab: &crate::vocab::Vocabulary) -> Self {
        Self::new(vocab.len(), vocab.fingerprint())
    }
}

impl DistributionProvider for UniformProvider {
    fn name(&self) -> String {
        "uniform".into()
    }

    fn vocab_size(&self) -> usize {
        self.size
    }

    fn fingerprint(&self) -> Fingerprint {
        self.fingerprint
    }

    fn next_logits(&self, context: &[TokenId]) -> Result<LogitVector> {
        check_context(context, self.size)?;
        Ok(LogitVector::zeros(self.size))
    }
}
