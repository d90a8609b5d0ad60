// SPDX-License-Identifier: MIT OR Apache-2.0

//! C ABI over the steered-decode engine.
//!
//! Conventions:
//! - every fallible call returns an [`SdStatus`]; on failure a message is
//!   available from [`sd_last_error_message`] on the same thread;
//! - handles are opaque, created by `*_load`/`*_new` and released by the
//!   matching `*_free` (null is accepted and ignored);
//! - strings handed out by the library are released with [`sd_string_free`];
//! - panics never cross the boundary; they surface as `SD_STATUS_PANIC`.

#![allow(clippy::missing_safety_doc)]

use std::cell::RefCell;
use std::ffi::{c_char, CStr, CString};
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::ptr;
use std::sync::Arc;
use std::time::Duration;

use steered_decode::decoder::{self, SamplerConfig};
use steered_decode::ensemble::{self, DebiasedProvider, EnsembleConfig, Mode, SignalSpec};
use steered_decode::lm::{LogitVector, NGramModel, ProbVector, SharedProvider, UniformProvider};
use steered_decode::metrics;
use steered_decode::remote::RemoteEndpoint;
use steered_decode::vocab::{Fingerprint, TextCodec, TokenId, Vocabulary};
use steered_decode::{Error, ErrorKind};

/// Result codes. Values 1 to 3 match the command-line exit codes.
#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SdStatus {
    Ok = 0,
    InvalidArgument = 1,
    Data = 2,
    Transport = 3,
    NullPointer = 4,
    BufferTooSmall = 5,
    Panic = 6,
}

/// Which parts of the debiasing signal are applied.
#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SdMode {
    None = 0,
    Full = 1,
    ExpertOnly = 2,
    AntiOnly = 3,
}

impl From<SdMode> for Mode {
    fn from(m: SdMode) -> Mode {
        match m {
            SdMode::None => Mode::None,
            SdMode::Full => Mode::Full,
            SdMode::ExpertOnly => Mode::ExpertOnly,
            SdMode::AntiOnly => Mode::AntiOnly,
        }
    }
}

/// Sampling settings; obtain defaults from [`sd_sampler_default`].
#[repr(C)]
#[derive(Debug, Clone, Copy)]
pub struct SdSamplerConfig {
    pub top_p: f64,
    pub temperature: f64,
    pub max_new_tokens: usize,
    pub seed: u64,
    pub greedy: bool,
}

impl From<SdSamplerConfig> for SamplerConfig {
    fn from(c: SdSamplerConfig) -> SamplerConfig {
        SamplerConfig {
            top_p: c.top_p,
            temperature: c.temperature,
            max_new_tokens: c.max_new_tokens,
            seed: c.seed,
            greedy: c.greedy,
        }
    }
}

/// Opaque vocabulary handle.
pub struct SdVocab(Arc<Vocabulary>);

/// Opaque next-token distribution provider (n-gram, uniform, remote or
/// debiased ensemble).
pub struct SdProvider(SharedProvider);

thread_local! {
    static LAST_ERROR: RefCell<Option<CString>> = const { RefCell::new(None) };
}

fn set_error(msg: String) {
    let c = CString::new(msg.replace('\0', " ")).expect("no interior nul");
    LAST_ERROR.with(|e| *e.borrow_mut() = Some(c));
}

fn fail(status: SdStatus, msg: impl Into<String>) -> SdStatus {
    set_error(msg.into());
    status
}

fn from_error(e: Error) -> SdStatus {
    let status = match e.kind() {
        ErrorKind::Usage => SdStatus::InvalidArgument,
        ErrorKind::Data => SdStatus::Data,
        ErrorKind::Transport => SdStatus::Transport,
    };
    fail(status, e.to_string())
}

/// Runs `f`, converting errors and panics into status codes.
fn guard(f: impl FnOnce() -> Result<(), SdStatus>) -> SdStatus {
    LAST_ERROR.with(|e| *e.borrow_mut() = None);
    match catch_unwind(AssertUnwindSafe(f)) {
        Ok(Ok(())) => SdStatus::Ok,
        Ok(Err(s)) => s,
        Err(_) => fail(SdStatus::Panic, "internal panic"),
    }
}

trait OrStatus<T> {
    fn or_status(self) -> Result<T, SdStatus>;
}

impl<T> OrStatus<T> for steered_decode::Result<T> {
    fn or_status(self) -> Result<T, SdStatus> {
        self.map_err(from_error)
    }
}

unsafe fn str_arg<'a>(p: *const c_char, name: &str) -> Result<&'a str, SdStatus> {
    if p.is_null() {
        return Err(fail(SdStatus::NullPointer, format!("{name} is null")));
    }
    CStr::from_ptr(p)
        .to_str()
        .map_err(|_| fail(SdStatus::InvalidArgument, format!("{name} is not valid UTF-8")))
}

unsafe fn ref_arg<'a, T>(p: *const T, name: &str) -> Result<&'a T, SdStatus> {
    p.as_ref().ok_or_else(|| fail(SdStatus::NullPointer, format!("{name} is null")))
}

unsafe fn slice_arg<'a, T>(p: *const T, len: usize, name: &str) -> Result<&'a [T], SdStatus> {
    if len == 0 {
        return Ok(&[]);
    }
    if p.is_null() {
        return Err(fail(SdStatus::NullPointer, format!("{name} is null")));
    }
    Ok(std::slice::from_raw_parts(p, len))
}

unsafe fn out_arg<'a, T>(p: *mut T, name: &str) -> Result<&'a mut T, SdStatus> {
    p.as_mut().ok_or_else(|| fail(SdStatus::NullPointer, format!("{name} is null")))
}

fn provider_out(out: &mut *mut SdProvider, p: SharedProvider) {
    *out = Box::into_raw(Box::new(SdProvider(p)));
}

/// Message for the last failed call on this thread, or null. The pointer is
/// valid until the next library call on the same thread.
#[no_mangle]
pub extern "C" fn sd_last_error_message() -> *const c_char {
    LAST_ERROR.with(|e| e.borrow().as_ref().map_or(ptr::null(), |c| c.as_ptr()))
}

/// Default sampler settings: top_p 0.9, temperature 1, 15 new tokens, seed 0.
#[no_mangle]
pub extern "C" fn sd_sampler_default() -> SdSamplerConfig {
    let d = SamplerConfig::default();
    SdSamplerConfig {
        top_p: d.top_p,
        temperature: d.temperature,
        max_new_tokens: d.max_new_tokens,
        seed: d.seed,
        greedy: d.greedy,
    }
}

/// Loads a vocabulary file (one token per line).
#[no_mangle]
pub unsafe extern "C" fn sd_vocab_load(path: *const c_char, out: *mut *mut SdVocab) -> SdStatus {
    guard(|| {
        let out = out_arg(out, "out")?;
        let path = str_arg(path, "path")?;
        let v = Vocabulary::load(path).or_status()?;
        *out = Box::into_raw(Box::new(SdVocab(Arc::new(v))));
        Ok(())
    })
}

#[no_mangle]
pub unsafe extern "C" fn sd_vocab_free(vocab: *mut SdVocab) {
    if !vocab.is_null() {
        drop(Box::from_raw(vocab));
    }
}

/// Number of tokens, or 0 for a null handle.
#[no_mangle]
pub unsafe extern "C" fn sd_vocab_size(vocab: *const SdVocab) -> usize {
    vocab.as_ref().map_or(0, |v| v.0.len())
}

#[no_mangle]
pub unsafe extern "C" fn sd_vocab_fingerprint(vocab: *const SdVocab, out: *mut u64) -> SdStatus {
    guard(|| {
        *out_arg(out, "out")? = ref_arg(vocab, "vocab")?.0.fingerprint().0;
        Ok(())
    })
}

/// Tokenizes `text` into `ids`. `out_len` always receives the full length;
/// if it exceeds `capacity` nothing is written and `SD_STATUS_BUFFER_TOO_SMALL`
/// is returned.
#[no_mangle]
pub unsafe extern "C" fn sd_vocab_tokenize(
    vocab: *const SdVocab,
    text: *const c_char,
    ids: *mut u32,
    capacity: usize,
    out_len: *mut usize,
) -> SdStatus {
    guard(|| {
        let vocab = ref_arg(vocab, "vocab")?;
        let out_len = out_arg(out_len, "out_len")?;
        let tokens = vocab.0.tokenize(str_arg(text, "text")?);
        *out_len = tokens.len();
        if tokens.len() > capacity {
            return Err(fail(
                SdStatus::BufferTooSmall,
                format!("need {} ids, capacity {capacity}", tokens.len()),
            ));
        }
        if !tokens.is_empty() {
            if ids.is_null() {
                return Err(fail(SdStatus::NullPointer, "ids is null"));
            }
            std::slice::from_raw_parts_mut(ids, tokens.len()).copy_from_slice(&tokens);
        }
        Ok(())
    })
}

/// Loads an n-gram model file.
#[no_mangle]
pub unsafe extern "C" fn sd_ngram_load(path: *const c_char, out: *mut *mut SdProvider) -> SdStatus {
    guard(|| {
        let out = out_arg(out, "out")?;
        let m = NGramModel::load(str_arg(path, "path")?).or_status()?;
        provider_out(out, Arc::new(m));
        Ok(())
    })
}

/// Uniform provider over a vocabulary.
#[no_mangle]
pub unsafe extern "C" fn sd_uniform_new(vocab: *const SdVocab, out: *mut *mut SdProvider) -> SdStatus {
    guard(|| {
        let out = out_arg(out, "out")?;
        let v = ref_arg(vocab, "vocab")?;
        provider_out(out, Arc::new(UniformProvider::for_vocab(&v.0)));
        Ok(())
    })
}

/// Connects to a logit server and performs the vocabulary handshake.
#[no_mangle]
pub unsafe extern "C" fn sd_remote_connect(
    url: *const c_char,
    timeout_ms: u64,
    out: *mut *mut SdProvider,
) -> SdStatus {
    guard(|| {
        let out = out_arg(out, "out")?;
        let ep = RemoteEndpoint::handshake(str_arg(url, "url")?, Duration::from_millis(timeout_ms)).or_status()?;
        provider_out(out, Arc::new(ep));
        Ok(())
    })
}

/// Wraps `base` with one expert/anti-expert pair. Either side may be null.
/// Inputs are shared, not consumed; free them independently.
#[no_mangle]
pub unsafe extern "C" fn sd_debiased_new(
    base: *const SdProvider,
    expert: *const SdProvider,
    anti_expert: *const SdProvider,
    alpha: f64,
    mode: SdMode,
    out: *mut *mut SdProvider,
) -> SdStatus {
    guard(|| {
        let out = out_arg(out, "out")?;
        let base = ref_arg(base, "base")?.0.clone();
        let spec = SignalSpec {
            expert: expert.as_ref().map(|p| p.0.clone()),
            anti_expert: anti_expert.as_ref().map(|p| p.0.clone()),
            weight: 1.0,
        };
        let signals = if spec.expert.is_none() && spec.anti_expert.is_none() {
            Vec::new()
        } else {
            vec![spec]
        };
        let cfg = EnsembleConfig { alpha, mode: mode.into() };
        let p = DebiasedProvider::new(base, signals, cfg).or_status()?;
        provider_out(out, Arc::new(p));
        Ok(())
    })
}

#[no_mangle]
pub unsafe extern "C" fn sd_provider_free(provider: *mut SdProvider) {
    if !provider.is_null() {
        drop(Box::from_raw(provider));
    }
}

/// Vocabulary size, or 0 for a null handle.
#[no_mangle]
pub unsafe extern "C" fn sd_provider_vocab_size(provider: *const SdProvider) -> usize {
    provider.as_ref().map_or(0, |p| p.0.vocab_size())
}

/// Next-token probabilities for `context`. `len` must equal the provider's
/// vocabulary size.
#[no_mangle]
pub unsafe extern "C" fn sd_next_probs(
    provider: *const SdProvider,
    context: *const u32,
    context_len: usize,
    probs: *mut f64,
    len: usize,
) -> SdStatus {
    guard(|| {
        let p = ref_arg(provider, "provider")?;
        let ctx: &[TokenId] = slice_arg(context, context_len, "context")?;
        if len != p.0.vocab_size() {
            return Err(fail(
                SdStatus::InvalidArgument,
                format!("output length {len} differs from vocabulary size {}", p.0.vocab_size()),
            ));
        }
        if probs.is_null() {
            return Err(fail(SdStatus::NullPointer, "probs is null"));
        }
        let dist = p.0.next_probs(ctx).or_status()?;
        std::slice::from_raw_parts_mut(probs, len).copy_from_slice(dist.as_slice());
        Ok(())
    })
}

/// `softmax(z + alpha * (z_plus - z_minus))` over arrays of length `len`.
#[no_mangle]
pub unsafe extern "C" fn sd_combine_logits(
    z: *const f64,
    z_plus: *const f64,
    z_minus: *const f64,
    len: usize,
    alpha: f64,
    out: *mut f64,
) -> SdStatus {
    guard(|| {
        let vec = |p, name| -> Result<LogitVector, SdStatus> {
            LogitVector::new(slice_arg(p, len, name)?.to_vec()).or_status()
        };
        let (z, zp, zm) = (vec(z, "z")?, vec(z_plus, "z_plus")?, vec(z_minus, "z_minus")?);
        let dist = ensemble::combine_logits(&z, &zp, &zm, alpha).or_status()?;
        if len > 0 && out.is_null() {
            return Err(fail(SdStatus::NullPointer, "out is null"));
        }
        if len > 0 {
            std::slice::from_raw_parts_mut(out, len).copy_from_slice(dist.as_slice());
        }
        Ok(())
    })
}

/// Hellinger distance between two distributions of length `len`.
#[no_mangle]
pub unsafe extern "C" fn sd_hellinger(p: *const f64, q: *const f64, len: usize, out: *mut f64) -> SdStatus {
    guard(|| {
        let out = out_arg(out, "out")?;
        let p = ProbVector::new(slice_arg(p, len, "p")?.to_vec()).or_status()?;
        let q = ProbVector::new(slice_arg(q, len, "q")?.to_vec()).or_status()?;
        *out = metrics::hellinger(&p, &q).or_status()?;
        Ok(())
    })
}

/// Samples a continuation of `prompt`. On success `*out_text` holds a
/// NUL-terminated string to be released with [`sd_string_free`].
#[no_mangle]
pub unsafe extern "C" fn sd_generate(
    provider: *const SdProvider,
    vocab: *const SdVocab,
    prompt: *const c_char,
    config: *const SdSamplerConfig,
    out_text: *mut *mut c_char,
) -> SdStatus {
    guard(|| {
        let out = out_arg(out_text, "out_text")?;
        let p = ref_arg(provider, "provider")?;
        let v = ref_arg(vocab, "vocab")?;
        let cfg: SamplerConfig = (*ref_arg(config, "config")?).into();
        if v.0.fingerprint() != p.0.fingerprint() {
            return Err(from_error(Error::Incompatible {
                left_name: "vocab".into(),
                left: v.0.fingerprint(),
                left_size: v.0.len(),
                right_name: p.0.name(),
                right: p.0.fingerprint(),
                right_size: p.0.vocab_size(),
            }));
        }
        let codec: &dyn TextCodec = v.0.as_ref();
        let g = decoder::generate(p.0.as_ref(), codec, str_arg(prompt, "prompt")?, &cfg).or_status()?;
        let c = CString::new(g.continuation).map_err(|_| fail(SdStatus::Data, "continuation contains NUL"))?;
        *out = c.into_raw();
        Ok(())
    })
}

#[no_mangle]
pub unsafe extern "C" fn sd_string_free(s: *mut c_char) {
    if !s.is_null() {
        drop(CString::from_raw(s));
    }
}

/// Parses a 16-hex-digit fingerprint. Exposed for bindings that need to
/// compare vocabularies without loading them.
#[no_mangle]
pub unsafe extern "C" fn sd_fingerprint_parse(hex: *const c_char, out: *mut u64) -> SdStatus {
    guard(|| {
        let out = out_arg(out, "out")?;
        let s = str_arg(hex, "hex")?;
        *out = Fingerprint::from_hex(s)
            .ok_or_else(|| fail(SdStatus::InvalidArgument, format!("bad fingerprint {s:?}")))?
            .0;
        Ok(())
    })
}
