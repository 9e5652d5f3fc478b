//! Model-service client shared by the ToC, insertion and narration stages.
//!
//! Every request has a content-addressed cache key. An in-memory cache
//! short-circuits repeats in every mode; `replay` serves responses from a
//! fixture directory (`<store>/<cache_key>.json`) and `record` writes them.

use std::collections::HashMap;
use std::fmt;
use std::io::Write as _;
use std::path::{Path, PathBuf};
use std::str::FromStr;
use std::sync::atomic::{AtomicUsize, Ordering};
use std::sync::Mutex;
use std::time::Duration;

use base64::Engine as _;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::error::{Error, Result};

pub const DEFAULT_TIMEOUT_SECS: u64 = 60;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Mode {
    Live,
    Replay,
    Record,
}

impl FromStr for Mode {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "live" => Ok(Mode::Live),
            "replay" => Ok(Mode::Replay),
            "record" => Ok(Mode::Record),
            _ => Err(Error::Config(format!("unknown model mode `{s}` (live|replay|record)"))),
        }
    }
}

impl fmt::Display for Mode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Mode::Live => "live",
            Mode::Replay => "replay",
            Mode::Record => "record",
        })
    }
}

/// Image reference forwarded with a prompt. When the file is readable its
/// bytes are hashed and sent; otherwise only the reference string is hashed.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Attachment {
    pub reference: String,
    pub data: Option<Vec<u8>>,
}

impl Attachment {
    pub fn reference(reference: impl Into<String>) -> Self {
        Attachment {
            reference: reference.into(),
            data: None,
        }
    }

    /// Resolves `reference` against `base` and loads the bytes if present.
    pub fn load(reference: &str, base: Option<&Path>) -> Self {
        let path = match base {
            Some(b) => b.join(reference),
            None => PathBuf::from(reference),
        };
        Attachment {
            reference: reference.to_string(),
            data: std::fs::read(path).ok(),
        }
    }

    pub fn content_hash(&self) -> String {
        let mut h = Sha256::new();
        match &self.data {
            Some(bytes) => {
                h.update(b"bytes:");
                h.update(bytes);
            }
            None => {
                h.update(b"ref:");
                h.update(self.reference.as_bytes());
            }
        }
        hex::encode(h.finalize())
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ModelRequest {
    pub template_id: String,
    pub prompt: String,
    pub attachments: Vec<Attachment>,
    pub cache_key: String,
}

impl ModelRequest {
    pub fn new(template_id: impl Into<String>, prompt: impl Into<String>, attachments: Vec<Attachment>) -> Self {
        let template_id = template_id.into();
        let prompt = prompt.into();
        let cache_key = cache_key(&template_id, &prompt, &attachments);
        ModelRequest {
            template_id,
            prompt,
            attachments,
            cache_key,
        }
    }
}

/// sha256 over length-prefixed template id, prompt and attachment hashes.
pub fn cache_key(template_id: &str, prompt: &str, attachments: &[Attachment]) -> String {
    let mut h = Sha256::new();
    for part in [template_id.as_bytes(), prompt.as_bytes()] {
        h.update((part.len() as u64).to_le_bytes());
        h.update(part);
    }
    h.update((attachments.len() as u64).to_le_bytes());
    for a in attachments {
        h.update(a.content_hash().as_bytes());
    }
    hex::encode(h.finalize())
}

/// Wire request: `{template_id, prompt, images_b64[]}`.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct WireRequest {
    pub template_id: String,
    pub prompt: String,
    pub images_b64: Vec<String>,
}

impl From<&ModelRequest> for WireRequest {
    fn from(r: &ModelRequest) -> Self {
        WireRequest {
            template_id: r.template_id.clone(),
            prompt: r.prompt.clone(),
            images_b64: r
                .attachments
                .iter()
                .filter_map(|a| a.data.as_ref())
                .map(|d| base64::engine::general_purpose::STANDARD.encode(d))
                .collect(),
        }
    }
}

pub trait Transport: Send + Sync {
    fn send(&self, req: &WireRequest) -> Result<String>;
}

/// JSON over HTTP POST; expects `{"text": str}` back.
pub struct HttpTransport {
    endpoint: String,
    api_key: Option<String>,
    agent: ureq::Agent,
}

impl HttpTransport {
    pub fn new(endpoint: impl Into<String>, api_key: Option<String>, timeout: Duration) -> Self {
        HttpTransport {
            endpoint: endpoint.into(),
            api_key,
            agent: ureq::AgentBuilder::new().timeout(timeout).build(),
        }
    }
}

#[derive(Deserialize)]
struct TextResponse {
    text: String,
}

impl Transport for HttpTransport {
    fn send(&self, req: &WireRequest) -> Result<String> {
        let mut call = self.agent.post(&self.endpoint);
        if let Some(key) = &self.api_key {
            call = call.set("Authorization", &format!("Bearer {key}"));
        }
        let resp: TextResponse = call
            .send_json(req)
            .map_err(|e| Error::Service(e.to_string()))?
            .into_json()
            .map_err(|e| Error::Service(format!("bad model response: {e}")))?;
        Ok(resp.text)
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Fixture {
    pub cache_key: String,
    pub template_id: String,
    pub prompt: String,
    pub response: String,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ClientConfig {
    pub mode: Mode,
    pub endpoint: Option<String>,
    pub api_key: Option<String>,
    pub fixture_store: Option<PathBuf>,
    pub timeout_secs: u64,
}

impl Default for ClientConfig {
    fn default() -> Self {
        ClientConfig {
            mode: Mode::Live,
            endpoint: None,
            api_key: None,
            fixture_store: None,
            timeout_secs: DEFAULT_TIMEOUT_SECS,
        }
    }
}

impl ClientConfig {
    /// Overrides fields from `MODEL_ENDPOINT`, `MODEL_API_KEY`, `MODEL_MODE`.
    pub fn apply_env(mut self) -> Result<Self> {
        if let Ok(v) = std::env::var("MODEL_ENDPOINT") {
            self.endpoint = Some(v).filter(|s| !s.is_empty());
        }
        if let Ok(v) = std::env::var("MODEL_API_KEY") {
            self.api_key = Some(v).filter(|s| !s.is_empty());
        }
        if let Ok(v) = std::env::var("MODEL_MODE") {
            self.mode = v.parse()?;
        }
        Ok(self)
    }
}

pub struct ModelClient {
    mode: Mode,
    transport: Option<Box<dyn Transport>>,
    store: Option<PathBuf>,
    cache: Mutex<HashMap<String, String>>,
    network_calls: AtomicUsize,
}

impl ModelClient {
    pub fn new(mode: Mode, transport: Option<Box<dyn Transport>>, store: Option<PathBuf>) -> Self {
        ModelClient {
            mode,
            transport,
            store,
            cache: Mutex::new(HashMap::new()),
            network_calls: AtomicUsize::new(0),
        }
    }

    pub fn from_config(cfg: &ClientConfig) -> Result<Self> {
        if cfg.mode == Mode::Replay && cfg.fixture_store.is_none() {
            return Err(Error::Config("replay mode needs a fixture store".into()));
        }
        if cfg.mode == Mode::Record && cfg.fixture_store.is_none() {
            return Err(Error::Config("record mode needs a fixture store".into()));
        }
        let transport = cfg.endpoint.as_ref().map(|e| {
            Box::new(HttpTransport::new(
                e.clone(),
                cfg.api_key.clone(),
                Duration::from_secs(cfg.timeout_secs),
            )) as Box<dyn Transport>
        });
        Ok(Self::new(cfg.mode, transport, cfg.fixture_store.clone()))
    }

    /// Replay client over a fixture directory.
    pub fn replay(store: impl Into<PathBuf>) -> Self {
        Self::new(Mode::Replay, None, Some(store.into()))
    }

    /// Live client with no endpoint: every uncached call fails, which sends
    /// each stage to its deterministic fallback.
    pub fn offline() -> Self {
        Self::new(Mode::Live, None, None)
    }

    pub fn mode(&self) -> Mode {
        self.mode
    }

    /// Number of transport round trips attempted so far (retries included).
    pub fn network_calls(&self) -> usize {
        self.network_calls.load(Ordering::SeqCst)
    }

    pub fn fixture_path(&self, key: &str) -> Option<PathBuf> {
        self.store.as_ref().map(|s| s.join(format!("{key}.json")))
    }

    pub fn call(&self, req: &ModelRequest) -> Result<String> {
        if let Some(hit) = self.cache.lock().expect("cache lock").get(&req.cache_key) {
            return Ok(hit.clone());
        }
        let text = match self.mode {
            Mode::Replay => self.read_fixture(&req.cache_key)?,
            Mode::Live | Mode::Record => {
                let text = self.send_with_retry(req)?;
                if self.mode == Mode::Record {
                    self.write_fixture(req, &text)?;
                }
                text
            }
        };
        self.cache
            .lock()
            .expect("cache lock")
            .insert(req.cache_key.clone(), text.clone());
        Ok(text)
    }

    fn send_with_retry(&self, req: &ModelRequest) -> Result<String> {
        let transport = self
            .transport
            .as_ref()
            .ok_or_else(|| Error::Service("no model endpoint configured".into()))?;
        let wire = WireRequest::from(req);
        let mut last = None;
        for attempt in 0..2 {
            self.network_calls.fetch_add(1, Ordering::SeqCst);
            match transport.send(&wire) {
                Ok(text) => return Ok(text),
                Err(e) => {
                    log::warn!("model call {} attempt {} failed: {e}", req.template_id, attempt + 1);
                    last = Some(e);
                }
            }
        }
        Err(last.expect("two attempts"))
    }

    fn read_fixture(&self, key: &str) -> Result<String> {
        let path = self.fixture_path(key).ok_or_else(|| Error::FixtureMissing {
            cache_key: key.to_string(),
        })?;
        let raw = match std::fs::read(&path) {
            Ok(raw) => raw,
            Err(e) if e.kind() == std::io::ErrorKind::NotFound => {
                return Err(Error::FixtureMissing {
                    cache_key: key.to_string(),
                })
            }
            Err(e) => return Err(Error::io(&path, e)),
        };
        let fx: Fixture = serde_json::from_slice(&raw)?;
        if fx.cache_key != key {
            return Err(Error::Validation(format!(
                "fixture {} carries key {}",
                path.display(),
                fx.cache_key
            )));
        }
        Ok(fx.response)
    }

    fn write_fixture(&self, req: &ModelRequest, text: &str) -> Result<()> {
        let path = self.fixture_path(&req.cache_key).expect("record mode has a store");
        let fx = Fixture {
            cache_key: req.cache_key.clone(),
            template_id: req.template_id.clone(),
            prompt: req.prompt.clone(),
            response: text.to_string(),
        };
        let mut bytes = serde_json::to_vec_pretty(&fx)?;
        bytes.push(b'\n');
        write_atomic(&path, &bytes)
    }
}

/// Writes through a temp file in the target directory, then renames.
pub fn write_atomic(path: &Path, bytes: &[u8]) -> Result<()> {
    let dir = path.parent().filter(|p| !p.as_os_str().is_empty()).unwrap_or(Path::new("."));
    std::fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    let mut tmp = tempfile::NamedTempFile::new_in(dir).map_err(|e| Error::io(dir, e))?;
    tmp.write_all(bytes).map_err(|e| Error::io(path, e))?;
    tmp.persist(path).map_err(|e| Error::io(path, e.error))?;
    Ok(())
}
