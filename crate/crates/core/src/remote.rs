// SPDX-License-Identifier: MIT OR Apache-2.0

//! HTTP+JSON client for out-of-process logit servers.
//!
//! Wire protocol:
//!
//! - `GET  /v1/vocab`    -> `{"size": n, "fingerprint": "<16 hex>", "eos_id": id}`
//! - `POST /v1/tokenize` `{"text": s}` -> `{"ids": [..]}`
//! - `POST /v1/logits`   `{"id": req, "ids": [..]}` -> `{"id": req, "logits": [.. n values]}`
//! - errors: HTTP 400 with `{"error": message}`
//!
//! An endpoint only exists after a successful handshake, so no logit request
//! can precede it. Logit requests are pure reads and are retried on
//! transport failure.

use std::sync::atomic::{AtomicU64, Ordering};
use std::time::Duration;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::lm::{DistributionProvider, LogitVector};
use crate::vocab::{Fingerprint, TextCodec, TokenId, TokenSeq};

/// Extra attempts after the first transport failure.
pub const MAX_RETRIES: usize = 2;

#[derive(Debug, Deserialize)]
struct VocabReply {
    size: usize,
    fingerprint: String,
    eos_id: TokenId,
}

#[derive(Serialize)]
struct TokenizeRequest<'a> {
    text: &'a str,
}

#[derive(Deserialize)]
struct TokenizeReply {
    ids: Vec<TokenId>,
}

#[derive(Serialize)]
struct LogitsRequest<'a> {
    id: u64,
    ids: &'a [TokenId],
}

#[derive(Deserialize)]
struct LogitsReply {
    id: u64,
    logits: Vec<f64>,
}

#[derive(Deserialize)]
struct ErrorReply {
    error: String,
}

/// A handshaken remote model. Shareable across threads; concurrent
/// requests are correlated by request id.
#[derive(Debug)]
pub struct RemoteEndpoint {
    base_url: String,
    timeout: Duration,
    vocab_size: usize,
    fingerprint: Fingerprint,
    eos_id: TokenId,
    agent: ureq::Agent,
    next_id: AtomicU64,
}

impl RemoteEndpoint {
    /// Fetches vocabulary size, fingerprint and `<eos>` id from the server.
    pub fn handshake(base_url: &str, timeout: Duration) -> Result<Self> {
        let base_url = base_url.trim_end_matches('/').to_string();
        let agent = ureq::AgentBuilder::new().timeout(timeout).build();
        let url = format!("{base_url}/v1/vocab");
        let body = read_body(agent.get(&url).call(), &url)?;
        let reply: VocabReply = serde_json::from_str(&body)
            .map_err(|e| Error::Protocol(format!("{url}: malformed vocab reply: {e}")))?;
        let fingerprint = Fingerprint::from_hex(&reply.fingerprint).ok_or_else(|| {
            Error::Protocol(format!("{url}: bad fingerprint {:?}", reply.fingerprint))
        })?;
        if reply.size == 0 {
            return Err(Error::Protocol(format!("{url}: vocabulary size must be > 0")));
        }
        if reply.eos_id as usize >= reply.size {
            return Err(Error::Protocol(format!("{url}: eos_id outside vocabulary")));
        }
        Ok(RemoteEndpoint {
            base_url,
            timeout,
            vocab_size: reply.size,
            fingerprint,
            eos_id: reply.eos_id,
            agent,
            next_id: AtomicU64::new(1),
        })
    }

    pub fn base_url(&self) -> &str {
        &self.base_url
    }

    pub fn timeout(&self) -> Duration {
        self.timeout
    }

    pub fn tokenize(&self, text: &str) -> Result<TokenSeq> {
        let url = format!("{}/v1/tokenize", self.base_url);
        let body = self.post_with_retry(&url, &TokenizeRequest { text })?;
        let reply: TokenizeReply = serde_json::from_str(&body)
            .map_err(|e| Error::Protocol(format!("{url}: malformed tokenize reply: {e}")))?;
        crate::lm::check_context(&reply.ids, self.vocab_size)
            .map_err(|e| Error::Protocol(format!("{url}: {e}")))?;
        Ok(reply.ids)
    }

    /// One logit request with an explicit request id.
    pub fn logits_with_id(&self, id: u64, context: &[TokenId]) -> Result<LogitVector> {
        let url = format!("{}/v1/logits", self.base_url);
        let body = self.post_with_retry(&url, &LogitsRequest { id, ids: context })?;
        let reply: LogitsReply = serde_json::from_str(&body)
            .map_err(|e| Error::Protocol(format!("{url}: malformed logits reply: {e}")))?;
        if reply.id != id {
            return Err(Error::Protocol(format!(
                "{url}: reply for request {} answered request {id}",
                reply.id
            )));
        }
        if reply.logits.len() != self.vocab_size {
            return Err(Error::Protocol(format!(
                "{url}: expected {} logits, got {}",
                self.vocab_size,
                reply.logits.len()
            )));
        }
        LogitVector::new(reply.logits).map_err(|e| Error::Protocol(format!("{url}: {e}")))
    }

    fn post_with_retry<T: Serialize>(&self, url: &str, payload: &T) -> Result<String> {
        let mut attempt = 0;
        loop {
            let result = read_body(self.agent.post(url).send_json(payload), url);
            match result {
                Err(Error::Transport(_)) if attempt < MAX_RETRIES => attempt += 1,
                other => return other,
            }
        }
    }
}

fn read_body(result: std::result::Result<ureq::Response, ureq::Error>, url: &str) -> Result<String> {
    match result {
        Ok(resp) => resp
            .into_string()
            .map_err(|e| Error::Transport(format!("{url}: reading body: {e}"))),
        Err(ureq::Error::Status(code, resp)) => {
            let text = resp.into_string().unwrap_or_default();
            let message = serde_json::from_str::<ErrorReply>(&text)
                .map(|r| r.error)
                .unwrap_or(text);
            Err(Error::Protocol(format!("{url}: HTTP {code}: {message}")))
        }
        Err(ureq::Error::Transport(t)) => Err(Error::Transport(format!("{url}: {t}"))),
    }
}

impl DistributionProvider for RemoteEndpoint {
    fn name(&self) -> String {
        self.base_url.clone()
    }

    fn vocab_size(&self) -> usize {
        self.vocab_size
    }

    fn fingerprint(&self) -> Fingerprint {
        self.fingerprint
    }

    fn next_logits(&self, context: &[TokenId]) -> Result<LogitVector> {
        let id = self.next_id.fetch_add(1, Ordering::Relaxed);
        self.logits_with_id(id, context)
    }
}

impl TextCodec for RemoteEndpoint {
    fn encode(&self, text: &str) -> Result<TokenSeq> {
        self.tokenize(text)
    }

    /// The protocol has no detokenize call; ids are rendered as `<id:N>`.
    fn decode(&self, ids: &[TokenId]) -> Result<String> {
        Ok(ids
            .iter()
            .map(|id| format!("<id:{id}>"))
            .collect::<Vec<_>>()
            .join(" "))
    }

    fn eos_id(&self) -> TokenId {
        self.eos_id
    }

    fn token_id(&self, token: &str) -> Result<Option<TokenId>> {
        let ids = self.tokenize(token)?;
        Ok(match ids.as_slice() {
            [single] => Some(*single),
            _ => None,
        })
    }
}
