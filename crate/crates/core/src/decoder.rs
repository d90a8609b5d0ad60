// SPDX-License-Identifier: MIT OR Apache-2.0

//! Autoregressive generation with temperature and nucleus (top-p) sampling.
//!
//! Randomness comes from one SplitMix64 stream per generation whose state is
//! initialised to the stream seed. A uniform draw is `(next_u64 >> 11) * 2^-53`.
//! Token ranking for nucleus truncation and greedy decoding sorts by
//! descending probability with ties broken by ascending token id.

use std::io::{BufRead, BufReader, Write};
use std::path::Path;

use rand::{RngCore, SeedableRng};
use rand_xoshiro::SplitMix64;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::lm::{softmax, DistributionProvider, LogitVector};
use crate::vocab::{Fnv1a, TextCodec, TokenId, TokenSeq};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct SamplerConfig {
    pub top_p: f64,
    pub temperature: f64,
    pub max_new_tokens: usize,
    pub seed: u64,
    pub greedy: bool,
}

impl Default for SamplerConfig {
    fn default() -> Self {
        SamplerConfig {
            top_p: 0.9,
            temperature: 1.0,
            max_new_tokens: 15,
            seed: 0,
            greedy: false,
        }
    }
}

impl SamplerConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.top_p > 0.0 && self.top_p <= 1.0) {
            return Err(Error::InvalidArgument(format!("top_p must be in (0, 1], got {}", self.top_p)));
        }
        if !(self.temperature > 0.0 && self.temperature.is_finite()) {
            return Err(Error::InvalidArgument(format!(
                "temperature must be > 0, got {}",
                self.temperature
            )));
        }
        if self.max_new_tokens == 0 {
            return Err(Error::InvalidArgument("max_new_tokens must be >= 1".into()));
        }
        Ok(())
    }
}

/// Per-stream random source.
#[derive(Debug, Clone)]
pub struct StreamRng(SplitMix64);

impl StreamRng {
    pub fn new(seed: u64) -> Self {
        StreamRng(SplitMix64::from_seed(seed.to_le_bytes()))
    }

    pub fn next_u64(&mut self) -> u64 {
        self.0.next_u64()
    }

    /// Uniform in `[0, 1)` with 53 bits of precision.
    pub fn uniform(&mut self) -> f64 {
        (self.0.next_u64() >> 11) as f64 * (1.0 / (1u64 << 53) as f64)
    }
}

/// Token ids ordered by descending probability, ascending id on ties.
pub fn ranked_ids(probs: &[f64]) -> Vec<usize> {
    let mut order: Vec<usize> = (0..probs.len()).collect();
    order.sort_by(|&a, &b| probs[b].total_cmp(&probs[a]).then(a.cmp(&b)));
    order
}

/// Smallest prefix of [`ranked_ids`] whose cumulative mass reaches `top_p`.
pub fn nucleus(probs: &[f64], top_p: f64) -> Vec<usize> {
    let mut kept = Vec::new();
    let mut mass = 0.0;
    for i in ranked_ids(probs) {
        if mass >= top_p {
            break;
        }
        mass += probs[i];
        kept.push(i);
    }
    kept
}

fn argmax(values: &[f64]) -> usize {
    let mut best = 0;
    for (i, &v) in values.iter().enumerate().skip(1) {
        if v > values[best] {
            best = i;
        }
    }
    best
}

fn draw(probs: &[f64], top_p: f64, rng: &mut StreamRng) -> TokenId {
    let kept = nucleus(probs, top_p);
    let total: f64 = kept.iter().map(|&i| probs[i]).sum();
    let target = rng.uniform() * total;
    let mut cum = 0.0;
    let mut last_positive = kept[0];
    for &i in &kept {
        if probs[i] > 0.0 {
            last_positive = i;
        }
        cum += probs[i];
        if cum > target {
            return i as TokenId;
        }
    }
    last_positive as TokenId
}

/// Samples from a probability vector. Temperature `t` reweights the
/// distribution to `p^(1/t)` (the same as dividing logits by `t`).
pub fn sample_next(dist: &[f64], config: &SamplerConfig, rng: &mut StreamRng) -> Result<TokenId> {
    let total: f64 = dist.iter().sum();
    if dist.is_empty() || dist.iter().any(|p| !p.is_finite() || *p < 0.0) || total.is_nan() || total <= 0.0 {
        return Err(Error::InvalidDistribution("degenerate distribution".into()));
    }
    if config.greedy {
        return Ok(argmax(dist) as TokenId);
    }
    let probs: Vec<f64> = if config.temperature == 1.0 {
        dist.iter().map(|p| p / total).collect()
    } else {
        let max = dist.iter().copied().fold(0.0, f64::max);
        let w: Vec<f64> = dist.iter().map(|p| (p / max).powf(1.0 / config.temperature)).collect();
        let s: f64 = w.iter().sum();
        w.into_iter().map(|x| x / s).collect()
    };
    Ok(draw(&probs, config.top_p, rng))
}

/// Samples from logits: softmax(logits / temperature) then nucleus.
pub fn sample_logits(logits: &LogitVector, config: &SamplerConfig, rng: &mut StreamRng) -> Result<TokenId> {
    if logits.is_empty() {
        return Err(Error::InvalidDistribution("empty logits".into()));
    }
    if config.greedy {
        return Ok(argmax(logits.as_slice()) as TokenId);
    }
    let scaled: Vec<f64> = logits.as_slice().iter().map(|z| z / config.temperature).collect();
    let probs = softmax(&scaled);
    Ok(draw(probs.as_slice(), config.top_p, rng))
}

/// One generated continuation.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Generation {
    pub prompt: String,
    pub group: Option<String>,
    pub continuation: String,
    /// Ids of the continuation only (no prompt, no `<eos>`).
    pub ids: TokenSeq,
    pub seed: u64,
}

/// Generates up to `max_new_tokens`, stopping early at `<eos>`.
pub fn generate(
    provider: &dyn DistributionProvider,
    codec: &dyn TextCodec,
    prompt: &str,
    config: &SamplerConfig,
) -> Result<Generation> {
    config.validate()?;
    let prompt_ids = codec.encode(prompt)?;
    let ids = generate_ids(provider, codec.eos_id(), &prompt_ids, config, config.seed)?;
    Ok(Generation {
        prompt: prompt.to_string(),
        group: None,
        continuation: codec.decode(&ids)?,
        ids,
        seed: config.seed,
    })
}

/// Core loop over token ids; returns the continuation ids.
pub fn generate_ids(
    provider: &dyn DistributionProvider,
    eos: TokenId,
    prompt: &[TokenId],
    config: &SamplerConfig,
    seed: u64,
) -> Result<TokenSeq> {
    let mut rng = StreamRng::new(seed);
    let mut context = prompt.to_vec();
    let mut out = Vec::new();
    for step in 0..config.max_new_tokens {
        let at_step = |e: Error| Error::AtStep { step, source: Box::new(e) };
        let logits = provider.next_logits(&context).map_err(at_step)?;
        let next = sample_logits(&logits, config, &mut rng).map_err(at_step)?;
        if next == eos {
            break;
        }
        context.push(next);
        out.push(next);
    }
    Ok(out)
}

/// Seed of one batch item. Depends on the prompt text and repeat index, not
/// on the prompt's position, so reordering a batch reorders its outputs.
pub fn stream_seed(base_seed: u64, prompt: &str, repeat: usize) -> u64 {
    let mut h = Fnv1a::new();
    h.write(prompt.as_bytes());
    h.write(&[0xff]);
    h.write(&(repeat as u64).to_le_bytes());
    base_seed ^ mix64(h.finish())
}

// SplitMix64 output finalizer.
fn mix64(mut z: u64) -> u64 {
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}

#[derive(Debug)]
pub struct BatchFailure {
    pub prompt_index: usize,
    pub repeat: usize,
    pub error: Error,
}

#[derive(Debug, Default)]
pub struct BatchOutput {
    pub generations: Vec<Generation>,
    pub failures: Vec<BatchFailure>,
}

/// `n_per_prompt` generations for each `(prompt, group)`; items run in
/// parallel and come back ordered by (prompt index, repeat).
pub fn generate_batch(
    provider: &dyn DistributionProvider,
    codec: &dyn TextCodec,
    prompts: &[(String, Option<String>)],
    n_per_prompt: usize,
    config: &SamplerConfig,
) -> Result<BatchOutput> {
    config.validate()?;
    if n_per_prompt == 0 {
        return Err(Error::InvalidArgument("n_per_prompt must be >= 1".into()));
    }
    let jobs: Vec<(usize, usize)> = (0..prompts.len())
        .flat_map(|p| (0..n_per_prompt).map(move |r| (p, r)))
        .collect();
    let results: Vec<Result<Generation>> = jobs
        .par_iter()
        .map(|&(p, r)| {
            let (text, group) = &prompts[p];
            let seed = stream_seed(config.seed, text, r);
            let prompt_ids = codec.encode(text)?;
            let ids = generate_ids(provider, codec.eos_id(), &prompt_ids, config, seed)?;
            Ok(Generation {
                prompt: text.clone(),
                group: group.clone(),
                continuation: codec.decode(&ids)?,
                ids,
                seed,
            })
        })
        .collect();
    let mut out = BatchOutput::default();
    for ((p, r), res) in jobs.into_iter().zip(results) {
        match res {
            Ok(g) => out.generations.push(g),
            Err(e) => out.failures.push(BatchFailure {
                prompt_index: p,
                repeat: r,
                error: e,
            }),
        }
    }
    Ok(out)
}

pub fn write_generations(path: impl AsRef<Path>, generations: &[Generation]) -> Result<()> {
    let path = path.as_ref();
    let mut buf = Vec::new();
    for g in generations {
        serde_json::to_writer(&mut buf, g).expect("serializable");
        buf.push(b'\n');
    }
    std::fs::File::create(path)
        .and_then(|mut f| f.write_all(&buf))
        .map_err(|e| Error::io(path, e))
}

pub fn read_generations(path: impl AsRef<Path>) -> Result<Vec<Generation>> {
    let path = path.as_ref();
    let file = std::fs::File::open(path).map_err(|e| Error::io(path, e))?;
    let mut out = Vec::new();
    for (i, line) in BufReader::new(file).lines().enumerate() {
        let line = line.map_err(|e| Error::io(path, e))?;
        if line.trim().is_empty() {
            continue;
        }
        out.push(serde_json::from_str(&line).map_err(|e| Error::data(path, i + 1, e.to_string()))?);
    }
    Ok(out)
}
