//! Content-embedding providers.
//!
//! The default is a seeded feature-hashing embedder; a remote provider can be
//! selected with `service:<url>`.

use std::time::Duration;

use serde::Deserialize;

use crate::error::{Error, Result};

pub const DEFAULT_DIM: usize = 64;

pub trait EmbeddingProvider: Send + Sync {
    fn name(&self) -> &str;
    fn dim(&self) -> usize;
    /// Deterministic for a fixed provider; always returns `dim()` values.
    fn embed(&self, text: &str) -> Result<Vec<f64>>;
}

/// Signed feature hashing over whitespace tokens and individual CJK
/// codepoints, L2-normalized. The empty string maps to the zero vector.
#[derive(Debug, Clone)]
pub struct HashEmbedder {
    name: String,
    dim: usize,
    seed: u64,
}

impl HashEmbedder {
    pub fn new(dim: usize) -> Self {
        Self::with_seed(dim, 0x5eed)
    }

    pub fn with_seed(dim: usize, seed: u64) -> Self {
        assert!(dim > 0, "embedding dim must be positive");
        HashEmbedder {
            name: format!("hash{dim}"),
            dim,
            seed,
        }
    }
}

impl Default for HashEmbedder {
    fn default() -> Self {
        Self::new(DEFAULT_DIM)
    }
}

pub(crate) fn is_cjk(c: char) -> bool {
    matches!(c as u32,
        0x3040..=0x30FF | 0x3400..=0x4DBF | 0x4E00..=0x9FFF | 0xAC00..=0xD7AF
        | 0xF900..=0xFAFF | 0x20000..=0x2A6DF)
}

/// Lowercased alphanumeric runs plus one token per CJK codepoint.
pub fn tokenize(text: &str) -> Vec<String> {
    let mut tokens = Vec::new();
    let mut cur = String::new();
    for c in text.chars() {
        if is_cjk(c) {
            if !cur.is_empty() {
                tokens.push(std::mem::take(&mut cur));
            }
            tokens.push(c.to_string());
        } else if c.is_alphanumeric() {
            cur.extend(c.to_lowercase());
        } else if !cur.is_empty() {
            tokens.push(std::mem::take(&mut cur));
        }
    }
    if !cur.is_empty() {
        tokens.push(cur);
    }
    tokens
}

pub(crate) fn fnv1a(seed: u64, bytes: &[u8]) -> u64 {
    let mut h = 0xcbf2_9ce4_8422_2325u64 ^ seed;
    for b in bytes {
        h ^= u64::from(*b);
        h = h.wrapping_mul(0x0000_0100_0000_01b3);
    }
    h
}

impl EmbeddingProvider for HashEmbedder {
    fn name(&self) -> &str {
        &self.name
    }

    fn dim(&self) -> usize {
        self.dim
    }

    fn embed(&self, text: &str) -> Result<Vec<f64>> {
        let mut v = vec![0.0; self.dim];
        for tok in tokenize(text) {
            let h = fnv1a(self.seed, tok.as_bytes());
            let bucket = (h % self.dim as u64) as usize;
            v[bucket] += if h >> 63 == 0 { 1.0 } else { -1.0 };
        }
        let norm = v.iter().map(|x| x * x).sum::<f64>().sqrt();
        if norm > 0.0 {
            v.iter_mut().for_each(|x| *x /= norm);
        }
        Ok(v)
    }
}

/// Remote provider: POSTs `{"text": ...}` and expects `{"vector": [...]}`.
pub struct ServiceEmbedder {
    name: String,
    url: String,
    dim: usize,
    agent: ureq::Agent,
}

#[derive(Deserialize)]
struct VectorResponse {
    vector: Vec<f64>,
}

impl ServiceEmbedder {
    pub fn new(url: impl Into<String>, dim: usize) -> Self {
        let url = url.into();
        ServiceEmbedder {
            name: format!("service:{url}"),
            url,
            dim,
            agent: ureq::AgentBuilder::new()
                .timeout(Duration::from_secs(60))
                .build(),
        }
    }
}

impl EmbeddingProvider for ServiceEmbedder {
    fn name(&self) -> &str {
        &self.name
    }

    fn dim(&self) -> usize {
        self.dim
    }

    fn embed(&self, text: &str) -> Result<Vec<f64>> {
        let resp: VectorResponse = self
            .agent
            .post(&self.url)
            .send_json(serde_json::json!({ "text": text }))
            .map_err(|e| Error::Service(e.to_string()))?
            .into_json()
            .map_err(|e| Error::Service(format!("bad embedding response: {e}")))?;
        if resp.vector.len() != self.dim {
            return Err(Error::Dimension {
                expected: self.dim,
                got: resp.vector.len(),
            });
        }
        Ok(resp.vector)
    }
}

/// `hash<N>` (e.g. `hash64`) or `service:<url>`.
pub fn provider_from_spec(spec: &str, dim: usize) -> Result<Box<dyn EmbeddingProvider>> {
    if let Some(url) = spec.strip_prefix("service:") {
        return Ok(Box::new(ServiceEmbedder::new(url, dim)));
    }
    if let Some(n) = spec.strip_prefix("hash") {
        let d = if n.is_empty() {
            dim
        } else {
            n.parse::<usize>()
                .map_err(|_| Error::Config(format!("bad provider `{spec}`")))?
        };
        if d == 0 {
            return Err(Error::Config("embedding dim must be positive".into()));
        }
        return Ok(Box::new(HashEmbedder::new(d)));
    }
    Err(Error::Config(format!("unknown embedding provider `{spec}`")))
}
