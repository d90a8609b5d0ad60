// SPDX-License-Identifier: MIT OR Apache-2.0

//! Add-k smoothed n-gram model with backoff over context length.
//!
//! Training pads each sequence with `order - 1` leading `<eos>` and one
//! trailing `<eos>`. For a query, the context is padded the same way and
//! the longest suffix (length `order-1` down to 1) with a nonzero total is
//! used; if none was observed the distribution is uniform. An order-1
//! model only has the empty context.

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::path::Path;

use super::{check_context, DistributionProvider, LogitVector};
use crate::error::{Error, Result};
use crate::vocab::{Fingerprint, TokenId, Vocabulary, EOS_ID};

const HEADER: &str = "steered-decode-ngram v1";

#[derive(Debug, Clone, Default, PartialEq)]
struct ContextCounts {
    total: u64,
    next: BTreeMap<TokenId, u64>,
}

/// Trained, immutable n-gram model.
#[derive(Debug, Clone, PartialEq)]
pub struct NGramModel {
    order: usize,
    k: f64,
    vocab_size: usize,
    fingerprint: Fingerprint,
    contexts: BTreeMap<Vec<TokenId>, ContextCounts>,
    name: String,
}

impl NGramModel {
    pub fn train(corpus: &[Vec<TokenId>], order: usize, k: f64, vocab: &Vocabulary) -> Result<Self> {
        Self::train_raw(corpus, order, k, vocab.len(), vocab.fingerprint())
    }

    /// Trains against a vocabulary known only by size and fingerprint.
    pub fn train_raw(
        corpus: &[Vec<TokenId>],
        order: usize,
        k: f64,
        vocab_size: usize,
        fingerprint: Fingerprint,
    ) -> Result<Self> {
        if order == 0 {
            return Err(Error::InvalidArgument("n-gram order must be >= 1".into()));
        }
        if !(k > 0.0 && k.is_finite()) {
            return Err(Error::InvalidArgument(format!("smoothing k must be > 0, got {k}")));
        }
        if corpus.is_empty() {
            return Err(Error::InvalidArgument("empty training corpus".into()));
        }
        let mut contexts: BTreeMap<Vec<TokenId>, ContextCounts> = BTreeMap::new();
        for seq in corpus {
            check_context(seq, vocab_size)?;
            let mut padded = vec![EOS_ID; order - 1];
            padded.extend_from_slice(seq);
            padded.push(EOS_ID);
            for target in (order - 1)..padded.len() {
                let token = padded[target];
                for len in context_lengths(order) {
                    let ctx = padded[target - len..target].to_vec();
                    let entry = contexts.entry(ctx).or_default();
                    entry.total += 1;
                    *entry.next.entry(token).or_insert(0) += 1;
                }
            }
        }
        Ok(NGramModel {
            order,
            k,
            vocab_size,
            fingerprint,
            contexts,
            name: format!("ngram(order={order})"),
        })
    }

    pub fn with_name(mut self, name: impl Into<String>) -> Self {
        self.name = name.into();
        self
    }

    pub fn order(&self) -> usize {
        self.order
    }

    pub fn k(&self) -> f64 {
        self.k
    }

    pub fn count(&self, context: &[TokenId], token: TokenId) -> u64 {
        self.contexts
            .get(context)
            .and_then(|c| c.next.get(&token))
            .copied()
            .unwrap_or(0)
    }

    pub fn context_total(&self, context: &[TokenId]) -> u64 {
        self.contexts.get(context).map_or(0, |c| c.total)
    }

    /// Number of (context, token) entries.
    pub fn num_entries(&self) -> usize {
        self.contexts.values().map(|c| c.next.len()).sum()
    }

    /// Like [`DistributionProvider::next_logits`] but also checks that the
    /// context was produced with this model's vocabulary.
    pub fn logits_checked(&self, producer: Fingerprint, context: &[TokenId]) -> Result<LogitVector> {
        if producer != self.fingerprint {
            return Err(Error::InvalidArgument(format!(
                "context vocabulary {producer} does not match model vocabulary {}",
                self.fingerprint
            )));
        }
        self.next_logits(context)
    }

    /// The context actually used for scoring after padding and backoff, or
    /// `None` when the model falls back to uniform.
    pub fn backoff_context(&self, context: &[TokenId]) -> Option<Vec<TokenId>> {
        let mut padded = vec![EOS_ID; self.order - 1];
        padded.extend_from_slice(context);
        context_lengths(self.order)
            .rev()
            .map(|len| padded[padded.len() - len..].to_vec())
            .find(|ctx| self.context_total(ctx) > 0)
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<()> {
        let path = path.as_ref();
        std::fs::write(path, self.to_text()).map_err(|e| Error::io(path, e))
    }

    pub fn to_text(&self) -> String {
        let mut out = String::new();
        let _ = writeln!(out, "{HEADER}");
        let _ = writeln!(out, "order\t{}", self.order);
        let _ = writeln!(out, "k\t{}", self.k);
        let _ = writeln!(out, "vocab_size\t{}", self.vocab_size);
        let _ = writeln!(out, "fingerprint\t{}", self.fingerprint);
        let _ = writeln!(out, "entries\t{}", self.num_entries());
        for (ctx, counts) in &self.contexts {
            let ctx_field = ctx
                .iter()
                .map(|id| id.to_string())
                .collect::<Vec<_>>()
                .join(" ");
            for (token, count) in &counts.next {
                let _ = writeln!(out, "{ctx_field}\t{token}\t{count}");
            }
        }
        out
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        let name = path
            .file_stem()
            .map_or_else(|| "ngram".to_string(), |s| s.to_string_lossy().into_owned());
        Self::parse(&text, path).map(|m| m.with_name(name))
    }

    fn parse(text: &str, path: &Path) -> Result<Self> {
        let mut lines = text.lines().enumerate().map(|(i, l)| (i + 1, l));
        let bad = |line: usize, msg: String| Error::data(path, line, msg);
        match lines.next() {
            Some((_, HEADER)) => {}
            _ => return Err(bad(1, format!("expected header {HEADER:?}"))),
        }
        let mut field = |name: &str| -> Result<(usize, String)> {
            match lines.next() {
                Some((n, l)) => match l.split_once('\t') {
                    Some((key, value)) if key == name => Ok((n, value.to_string())),
                    _ => Err(bad(n, format!("expected field {name:?}"))),
                },
                None => Err(bad(0, format!("missing field {name:?}"))),
            }
        };
        let parse_num = |(n, v): (usize, String)| -> Result<u64> {
            v.parse().map_err(|_| bad(n, format!("bad integer {v:?}")))
        };
        let order = parse_num(field("order")?)? as usize;
        let (kn, kv) = field("k")?;
        let k: f64 = kv.parse().map_err(|_| bad(kn, format!("bad number {kv:?}")))?;
        let vocab_size = parse_num(field("vocab_size")?)? as usize;
        let (fn_, fv) = field("fingerprint")?;
        let fingerprint =
            Fingerprint::from_hex(&fv).ok_or_else(|| bad(fn_, format!("bad fingerprint {fv:?}")))?;
        let (en, ev) = field("entries")?;
        let entries: usize = ev.parse().map_err(|_| bad(en, format!("bad integer {ev:?}")))?;
        if order == 0 || !(k > 0.0 && k.is_finite()) || vocab_size == 0 {
            return Err(bad(2, "order, k and vocab_size must be positive".into()));
        }
        let mut contexts: BTreeMap<Vec<TokenId>, ContextCounts> = BTreeMap::new();
        let mut seen = 0usize;
        for (n, line) in lines {
            let mut parts = line.split('\t');
            let (Some(ctx), Some(tok), Some(cnt), None) =
                (parts.next(), parts.next(), parts.next(), parts.next())
            else {
                return Err(bad(n, "expected 3 tab-separated fields".into()));
            };
            let ctx: Vec<TokenId> = ctx
                .split_whitespace()
                .map(|x| x.parse().map_err(|_| bad(n, format!("bad token id {x:?}"))))
                .collect::<Result<_>>()?;
            let tok: TokenId = tok.parse().map_err(|_| bad(n, format!("bad token id {tok:?}")))?;
            let cnt: u64 = cnt.parse().map_err(|_| bad(n, format!("bad count {cnt:?}")))?;
            if !context_lengths(order).any(|l| l == ctx.len()) {
                return Err(bad(n, format!("context length {} invalid for order {order}", ctx.len())));
            }
            if ctx.iter().chain(std::iter::once(&tok)).any(|&id| id as usize >= vocab_size) {
                return Err(bad(n, "token id out of range".into()));
            }
            let entry = contexts.entry(ctx).or_default();
            if entry.next.insert(tok, cnt).is_some() {
                return Err(bad(n, "duplicate entry".into()));
            }
            entry.total += cnt;
            seen += 1;
        }
        if seen != entries {
            return Err(bad(6, format!("header declares {entries} entries, found {seen}")));
        }
        Ok(NGramModel {
            order,
            k,
            vocab_size,
            fingerprint,
            contexts,
            name: format!("ngram(order={order})"),
        })
    }
}

/// Context lengths for which counts are kept.
fn context_lengths(order: usize) -> std::ops::RangeInclusive<usize> {
    if order == 1 {
        0..=0
    } else {
        1..=order - 1
    }
}

impl DistributionProvider for NGramModel {
    fn name(&self) -> String {
        self.name.clone()
    }

    fn vocab_size(&self) -> usize {
        self.vocab_size
    }

    fn fingerprint(&self) -> Fingerprint {
        self.fingerprint
    }

    fn next_logits(&self, context: &[TokenId]) -> Result<LogitVector> {
        check_context(context, self.vocab_size)?;
        let v = self.vocab_size as f64;
        let Some(ctx) = self.backoff_context(context) else {
            return Ok(LogitVector::new(vec![-(v.ln()); self.vocab_size]).expect("finite"));
        };
        let counts = &self.contexts[&ctx];
        let denom = counts.total as f64 + self.k * v;
        let mut logits = vec![(self.k / denom).ln(); self.vocab_size];
        for (&tok, &c) in &counts.next {
            logits[tok as usize] = ((c as f64 + self.k) / denom).ln();
        }
        LogitVector::new(logits)
    }
}
