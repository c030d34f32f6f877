//! Client for an out-of-process encoder service.
//!
//! Each call opens a TCP connection, writes one JSON request terminated by
//! a newline and reads one JSON response line:
//!
//! ```text
//! -> {"kind": "text", "inputs": ["hello there"]}
//! <- {"embeddings": [[0.1, -0.3, ...]], "dim": 384}
//! ```
//!
//! Multimodal requests for images add `"modality": "image"` and pass image
//! references as inputs. A server may answer `{"error": "..."}` instead.
//! Failed calls are retried once after a jittered delay.

use std::io::{BufRead, BufReader, Write};
use std::net::{TcpStream, ToSocketAddrs};
use std::time::Duration;

use rand::Rng;
use serde::{Deserialize, Serialize};

use super::{EncoderDescriptor, EncoderError, EncoderKind, MultimodalEncoder, TextEncoder};
use crate::vector::Embedding;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "lowercase")]
pub enum Modality {
    #[default]
    Text,
    Image,
}

impl Modality {
    fn is_text(&self) -> bool {
        *self == Modality::Text
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EncodeRequest {
    pub kind: EncoderKind,
    pub inputs: Vec<String>,
    #[serde(default, skip_serializing_if = "Modality::is_text")]
    pub modality: Modality,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EncodeResponse {
    pub embeddings: Vec<Vec<f32>>,
    pub dim: usize,
}

#[derive(Deserialize)]
#[serde(untagged)]
enum Reply {
    Ok(EncodeResponse),
    Err { error: String },
}

#[derive(Debug, Clone)]
pub struct RemoteEncoder {
    endpoint: String,
    descriptor: EncoderDescriptor,
    timeout: Duration,
    retry_delay: Duration,
}

impl RemoteEncoder {
    pub fn new(endpoint: impl Into<String>, kind: EncoderKind, dim: usize) -> Self {
        let endpoint = endpoint.into();
        Self {
            descriptor: EncoderDescriptor {
                kind,
                dim,
                identifier: format!("remote:{endpoint}"),
            },
            endpoint,
            timeout: Duration::from_secs(10),
            retry_delay: Duration::from_millis(100),
        }
    }

    pub fn with_timeout(mut self, timeout: Duration) -> Self {
        self.timeout = timeout;
        self
    }

    /// Base delay before the single retry; the actual delay is drawn
    /// uniformly from `[base/2, 3*base/2]`.
    pub fn with_retry_delay(mut self, delay: Duration) -> Self {
        self.retry_delay = delay;
        self
    }

    fn call(&self, inputs: &[&str], modality: Modality) -> Result<Vec<Embedding>, EncoderError> {
        if inputs.is_empty() {
            return Err(EncoderError::EmptyBatch);
        }
        let req = EncodeRequest {
            kind: self.descriptor.kind,
            inputs: inputs.iter().map(|s| s.to_string()).collect(),
            modality,
        };
        let mut last = String::new();
        for attempt in 1..=2u32 {
            match self.round_trip(&req) {
                Ok(resp) => return self.check(resp, inputs.len()),
                Err(Transport::Fatal(e)) => return Err(e),
                Err(Transport::Retryable(reason)) => {
                    last = reason;
                    if attempt == 1 {
                        let base = self.retry_delay.as_millis() as u64;
                        let jitter = rand::rng().random_range(base / 2..=base + base / 2);
                        std::thread::sleep(Duration::from_millis(jitter));
                    }
                }
            }
        }
        Err(EncoderError::Unavailable {
            endpoint: self.endpoint.clone(),
            attempts: 2,
            reason: last,
        })
    }

    fn round_trip(&self, req: &EncodeRequest) -> Result<EncodeResponse, Transport> {
        let retry = |e: std::io::Error| Transport::Retryable(e.to_string());
        let addr = self
            .endpoint
            .to_socket_addrs()
            .map_err(retry)?
            .next()
            .ok_or_else(|| Transport::Retryable(format!("cannot resolve {}", self.endpoint)))?;
        let mut stream = TcpStream::connect_timeout(&addr, self.timeout).map_err(retry)?;
        stream.set_read_timeout(Some(self.timeout)).map_err(retry)?;
        stream.set_write_timeout(Some(self.timeout)).map_err(retry)?;
        let mut body = serde_json::to_vec(req).expect("request serialization cannot fail");
        body.push(b'\n');
        stream.write_all(&body).map_err(retry)?;
        stream.flush().map_err(retry)?;

        let mut line = String::new();
        BufReader::new(stream).read_line(&mut line).map_err(retry)?;
        if line.trim().is_empty() {
            return Err(Transport::Retryable("connection closed without a response".into()));
        }
        match serde_json::from_str::<Reply>(&line) {
            Ok(Reply::Ok(r)) => Ok(r),
            Ok(Reply::Err { error }) => Err(Transport::Fatal(EncoderError::Protocol(error))),
            Err(e) => Err(Transport::Fatal(EncoderError::Protocol(format!("malformed response: {e}")))),
        }
    }

    fn check(&self, resp: EncodeResponse, expected: usize) -> Result<Vec<Embedding>, EncoderError> {
        if resp.dim != self.descriptor.dim {
            return Err(EncoderError::Protocol(format!(
                "server dim {} differs from configured dim {}",
                resp.dim, self.descriptor.dim
            )));
        }
        if resp.embeddings.len() != expected {
            return Err(EncoderError::Protocol(format!(
                "expected {expected} embeddings, got {}",
                resp.embeddings.len()
            )));
        }
        resp.embeddings
            .into_iter()
            .map(|v| {
                if v.len() != resp.dim {
                    return Err(EncoderError::Protocol(format!(
                        "embedding of length {} in a dim-{} response",
                        v.len(),
                        resp.dim
                    )));
                }
                Ok(Embedding::new(v)?)
            })
            .collect()
    }
}

enum Transport {
    Retryable(String),
    Fatal(EncoderError),
}

impl TextEncoder for RemoteEncoder {
    fn descriptor(&self) -> &EncoderDescriptor {
        &self.descriptor
    }

    fn encode_text(&self, texts: &[&str]) -> Result<Vec<Embedding>, EncoderError> {
        self.call(texts, Modality::Text)
    }
}

impl MultimodalEncoder for RemoteEncoder {
    fn descriptor(&self) -> &EncoderDescriptor {
        &self.descriptor
    }

    fn encode_query(&self, text: &str) -> Result<Embedding, EncoderError> {
        Ok(self.call(&[text], Modality::Text)?.remove(0))
    }

    fn encode_image(&self, image_ref: &str) -> Result<Embedding, EncoderError> {
        Ok(self.call(&[image_ref], Modality::Image)?.remove(0))
    }
}

/// Serves one request on `stream` using `handler`. Intended for adapters
/// that wrap a model behind this protocol.
pub fn serve_connection<F>(stream: TcpStream, handler: F) -> std::io::Result<()>
where
    F: FnOnce(EncodeRequest) -> Result<EncodeResponse, String>,
{
    let mut reader = BufReader::new(stream.try_clone()?);
    let mut line = String::new();
    reader.read_line(&mut line)?;
    let reply = match serde_json::from_str::<EncodeRequest>(&line) {
        Ok(req) => match handler(req) {
            Ok(resp) => serde_json::to_value(resp).expect("response serialization cannot fail"),
            Err(error) => serde_json::json!({ "error": error }),
        },
        Err(e) => serde_json::json!({ "error": format!("bad request: {e}") }),
    };
    let mut out = serde_json::to_vec(&reply).expect("json serialization cannot fail");
    out.push(b'\n');
    let mut stream = stream;
    stream.write_all(&out)?;
    stream.flush()
}
