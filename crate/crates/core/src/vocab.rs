// SPDX-License-Identifier: MIT OR Apache-2.0

//! Shared token inventory and the word-level reference tokenizer.
//!
//! Every provider taking part in an ensemble must agree on the token id
//! space. Agreement is checked through a [`Fingerprint`]: FNV-1a 64 over the
//! concatenation of `token\n` for all tokens in id order. The same scheme is
//! trivially reimplemented by out-of-process model servers.

use std::collections::HashMap;
use std::fmt;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub type TokenId = u32;

/// Owned token id sequence (a context `x_1..x_t` or a generated continuation).
pub type TokenSeq = Vec<TokenId>;

pub const UNK: &str = "<unk>";
pub const EOS: &str = "<eos>";
pub const UNK_ID: TokenId = 0;
pub const EOS_ID: TokenId = 1;

const FNV_OFFSET: u64 = 0xcbf2_9ce4_8422_2325;
const FNV_PRIME: u64 = 0x0000_0100_0000_01b3;

/// 64-bit vocabulary fingerprint, rendered as 16 lowercase hex chars.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct Fingerprint(pub u64);

impl Fingerprint {
    pub fn of_tokens<S: AsRef<str>>(tokens: &[S]) -> Self {
        let mut h = Fnv1a::new();
        for t in tokens {
            h.write(t.as_ref().as_bytes());
            h.write(b"\n");
        }
        Fingerprint(h.finish())
    }

    pub fn to_hex(self) -> String {
        format!("{:016x}", self.0)
    }

    pub fn from_hex(s: &str) -> Option<Self> {
        if s.len() != 16 {
            return None;
        }
        u64::from_str_radix(s, 16).ok().map(Fingerprint)
    }
}

impl fmt::Display for Fingerprint {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{:016x}", self.0)
    }
}

impl Serialize for Fingerprint {
    fn serialize<S: serde::Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        s.serialize_str(&self.to_hex())
    }
}

impl<'de> Deserialize<'de> for Fingerprint {
    fn deserialize<D: serde::Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        let s = String::deserialize(d)?;
        Fingerprint::from_hex(&s)
            .ok_or_else(|| serde::de::Error::custom(format!("bad fingerprint {s:?}")))
    }
}

/// Streaming FNV-1a 64.
#[derive(Debug, Clone, Copy)]
pub struct Fnv1a(u64);

impl Fnv1a {
    pub fn new() -> Self {
        Fnv1a(FNV_OFFSET)
    }

    pub fn write(&mut self, bytes: &[u8]) {
        for &b in bytes {
            self.0 ^= u64::from(b);
            self.0 = self.0.wrapping_mul(FNV_PRIME);
        }
    }

    pub fn finish(&self) -> u64 {
        self.0
    }
}

impl Default for Fnv1a {
    fn default() -> Self {
        Self::new()
    }
}

/// Text <-> token id conversion for a provider family.
///
/// Local backends use [`Vocabulary`]; remote backends delegate to the
/// server's tokenizer.
pub trait TextCodec: Send + Sync {
    fn encode(&self, text: &str) -> Result<TokenSeq>;
    fn decode(&self, ids: &[TokenId]) -> Result<String>;
    fn eos_id(&self) -> TokenId;
    /// Id of a single whole token, if the codec knows it.
    fn token_id(&self, token: &str) -> Result<Option<TokenId>>;
}

/// Immutable token inventory with contiguous ids.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Vocabulary {
    tokens: Vec<String>,
    id_of: HashMap<String, TokenId>,
    fingerprint: Fingerprint,
}

/// Splits text into normalized word-level tokens: lowercase, whitespace
/// delimited, each punctuation character standalone. The reserved markers
/// `<unk>` and `<eos>` survive as single tokens.
pub fn normalize_tokens(text: &str) -> Vec<String> {
    let mut out = Vec::new();
    for chunk in text.split_whitespace() {
        let lower = chunk.to_lowercase();
        if lower == UNK || lower == EOS {
            out.push(lower);
            continue;
        }
        let mut word = String::new();
        for c in lower.chars() {
            if c.is_alphanumeric() {
                word.push(c);
            } else {
                if !word.is_empty() {
                    out.push(std::mem::take(&mut word));
                }
                out.push(c.to_string());
            }
        }
        if !word.is_empty() {
            out.push(word);
        }
    }
    out
}

impl Vocabulary {
    /// Builds a vocabulary from raw text documents.
    ///
    /// Tokens occurring at least `min_count` times are kept, ordered by
    /// descending count then lexicographically, after the two reserved tokens.
    pub fn build<S: AsRef<str>>(corpora: &[S], min_count: usize) -> Result<Self> {
        if corpora.is_empty() {
            return Err(Error::InvalidArgument("no corpora given".into()));
        }
        let mut counts: HashMap<String, usize> = HashMap::new();
        for doc in corpora {
            for tok in normalize_tokens(doc.as_ref()) {
                if tok == UNK || tok == EOS {
                    continue;
                }
                *counts.entry(tok).or_insert(0) += 1;
            }
        }
        let mut kept: Vec<(String, usize)> =
            counts.into_iter().filter(|(_, c)| *c >= min_count).collect();
        if kept.is_empty() {
            return Err(Error::EmptyVocabulary { min_count });
        }
        kept.sort_by(|a, b| b.1.cmp(&a.1).then_with(|| a.0.cmp(&b.0)));
        let tokens = [UNK.to_string(), EOS.to_string()]
            .into_iter()
            .chain(kept.into_iter().map(|(t, _)| t))
            .collect();
        Self::from_tokens(tokens)
    }

    /// Wraps an explicit token list. The first two entries must be the
    /// reserved tokens and all entries must be distinct.
    pub fn from_tokens(tokens: Vec<String>) -> Result<Self> {
        if tokens.len() < 2 || tokens[0] != UNK || tokens[1] != EOS {
            return Err(Error::InvalidArgument(format!(
                "vocabulary must start with {UNK} and {EOS}"
            )));
        }
        let mut id_of = HashMap::with_capacity(tokens.len());
        for (i, t) in tokens.iter().enumerate() {
            if t.is_empty() || t.chars().any(char::is_whitespace) {
                return Err(Error::InvalidArgument(format!(
                    "token {i} is empty or contains whitespace"
                )));
            }
            if id_of.insert(t.clone(), i as TokenId).is_some() {
                return Err(Error::InvalidArgument(format!("duplicate token {t:?}")));
            }
        }
        let fingerprint = Fingerprint::of_tokens(&tokens);
        Ok(Vocabulary {
            tokens,
            id_of,
            fingerprint,
        })
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        let tokens: Vec<String> = text.lines().map(str::to_owned).collect();
        for (i, t) in tokens.iter().enumerate() {
            if t.is_empty() {
                return Err(Error::data(path, i + 1, "empty token line"));
            }
        }
        Self::from_tokens(tokens).map_err(|e| Error::data(path, 1, e.to_string()))
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<()> {
        let path = path.as_ref();
        let mut out = String::new();
        for t in &self.tokens {
            out.push_str(t);
            out.push('\n');
        }
        std::fs::write(path, out).map_err(|e| Error::io(path, e))
    }

    pub fn len(&self) -> usize {
        self.tokens.len()
    }

    pub fn is_empty(&self) -> bool {
        self.tokens.is_empty()
    }

    pub fn tokens(&self) -> &[String] {
        &self.tokens
    }

    pub fn fingerprint(&self) -> Fingerprint {
        self.fingerprint
    }

    pub fn id(&self, token: &str) -> Option<TokenId> {
        self.id_of.get(token).copied()
    }

    pub fn token(&self, id: TokenId) -> Option<&str> {
        self.tokens.get(id as usize).map(String::as_str)
    }

    /// Out-of-vocabulary tokens map to `<unk>`.
    pub fn tokenize(&self, text: &str) -> TokenSeq {
        normalize_tokens(text)
            .iter()
            .map(|t| self.id(t).unwrap_or(UNK_ID))
            .collect()
    }

    pub fn detokenize(&self, ids: &[TokenId]) -> Result<String> {
        let mut parts = Vec::with_capacity(ids.len());
        for &id in ids {
            parts.push(self.token(id).ok_or(Error::TokenOutOfRange {
                id,
                size: self.len(),
            })?);
        }
        Ok(parts.join(" "))
    }

    pub fn check_ids(&self, ids: &[TokenId]) -> Result<()> {
        match ids.iter().find(|&&id| id as usize >= self.len()) {
            Some(&id) => Err(Error::TokenOutOfRange {
                id,
                size: self.len(),
            }),
            None => Ok(()),
        }
    }
}

impl TextCodec for Vocabulary {
    fn encode(&self, text: &str) -> Result<TokenSeq> {
        Ok(self.tokenize(text))
    }

    fn decode(&self, ids: &[TokenId]) -> Result<String> {
        self.detokenize(ids)
    }

    fn eos_id(&self) -> TokenId {
        EOS_ID
    }

    fn token_id(&self, token: &str) -> Result<Option<TokenId>> {
        let norm = normalize_tokens(token);
        Ok(match norm.as_slice() {
            [single] => self.id(single),
            _ => None,
        })
    }
}
