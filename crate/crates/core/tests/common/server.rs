// SPDX-License-Identifier: MIT OR Apache-2.0
//! Minimal loopback HTTP server for protocol tests. One request per
//! connection, each connection on its own thread.

use std::io::{BufRead, BufReader, Read, Write};
use std::net::{TcpListener, TcpStream};
use std::sync::Arc;
use std::thread;

use steered_decode::lm::DistributionProvider;
use steered_decode::vocab::{TokenId, Vocabulary};

pub struct Request {
    pub method: String,
    pub path: String,
    pub body: String,
}

pub enum Reply {
    Json(u16, String),
    /// Close the connection without answering.
    Hangup,
}

pub type Handler = Arc<dyn Fn(&Request) -> Reply + Send + Sync>;

pub struct TestServer {
    pub url: String,
}

fn read_request(stream: &mut TcpStream) -> Option<Request> {
    let mut reader = BufReader::new(stream.try_clone().ok()?);
    let mut line = String::new();
    reader.read_line(&mut line).ok()?;
    let mut parts = line.split_whitespace();
    let method = parts.next()?.to_string();
    let path = parts.next()?.to_string();
    let mut length = 0;
    loop {
        let mut h = String::new();
        reader.read_line(&mut h).ok()?;
        let h = h.trim_end();
        if h.is_empty() {
            break;
        }
        if let Some((k, v)) = h.split_once(':') {
            if k.eq_ignore_ascii_case("content-length") {
                length = v.trim().parse().ok()?;
            }
        }
    }
    let mut body = vec![0; length];
    reader.read_exact(&mut body).ok()?;
    Some(Request { method, path, body: String::from_utf8(body).ok()? })
}

impl TestServer {
    pub fn start(handler: Handler) -> TestServer {
        let listener = TcpListener::bind("127.0.0.1:0").expect("bind loopback");
        let url = format!("http://{}", listener.local_addr().expect("addr"));
        thread::spawn(move || {
            for stream in listener.incoming() {
                let Ok(mut stream) = stream else { continue };
                let handler = handler.clone();
                thread::spawn(move || {
                    let Some(req) = read_request(&mut stream) else { return };
                    if let Reply::Json(status, body) = handler(&req) {
                        let reason = if status == 200 { "OK" } else { "Error" };
                        let _ = write!(
                            stream,
                            "HTTP/1.1 {status} {reason}\r\nContent-Type: application/json\r\nContent-Length: {}\r\nConnection: close\r\n\r\n{body}",
                            body.len()
                        );
                    }
                });
            }
        });
        TestServer { url }
    }
}

/// Serves a local model the way a logit server would, with logits printed to
/// nine significant digits.
pub fn model_handler(vocab: Arc<Vocabulary>, model: Arc<dyn DistributionProvider>) -> Handler {
    Arc::new(move |req: &Request| {
        let body: serde_json::Value = serde_json::from_str(&req.body).unwrap_or_default();
        match (req.method.as_str(), req.path.as_str()) {
            ("GET", "/v1/vocab") => Reply::Json(
                200,
                serde_json::json!({
                    "size": vocab.len(),
                    "fingerprint": vocab.fingerprint().to_hex(),
                    "eos_id": 1
                })
                .to_string(),
            ),
            ("POST", "/v1/tokenize") => {
                let ids = vocab.tokenize(body["text"].as_str().unwrap_or_default());
                Reply::Json(200, serde_json::json!({ "ids": ids }).to_string())
            }
            ("POST", "/v1/logits") => {
                let ids: Vec<TokenId> = serde_json::from_value(body["ids"].clone()).unwrap_or_default();
                match model.next_logits(&ids) {
                    Ok(z) => {
                        let values: Vec<String> = z.as_slice().iter().map(|v| format!("{v:.8e}")).collect();
                        Reply::Json(200, format!("{{\"id\":{},\"logits\":[{}]}}", body["id"], values.join(",")))
                    }
                    Err(e) => Reply::Json(400, serde_json::json!({ "error": e.to_string() }).to_string()),
                }
            }
            _ => Reply::Json(404, serde_json::json!({ "error": "not found" }).to_string()),
        }
    })
}
