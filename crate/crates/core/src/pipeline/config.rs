use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::align::AlignConfig;
use crate::error::{Error, Result};
use crate::llm::{ClientConfig, Mode, DEFAULT_TIMEOUT_SECS};
use crate::toc::TocMode;

/// Prefix of the environment variables that override config keys.
pub const ENV_PREFIX: &str = "ESGDOC_";

/// Flat pipeline configuration. Every key can come from a TOML file and be
/// overridden by `ESGDOC_<KEY>` (upper case); model access also honours
/// `MODEL_ENDPOINT`, `MODEL_API_KEY` and `MODEL_MODE`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct PipelineConfig {
    /// Succession threshold, in [0, 1).
    pub tau: f64,
    /// Levenshtein similarity needed for a fuzzy heading match, in (0, 1].
    pub fuzzy_threshold: f64,
    /// Label decision threshold, in (0, 1).
    pub theta: f64,
    /// Weight of the hierarchy penalty in the training objective, >= 0.
    pub lambda: f64,
    /// Narration context radius in blocks, <= 50.
    pub radius: usize,
    /// Content embedding width, 1..=4096.
    pub embedding_dim: usize,
    /// `hash` or `service:<url>`.
    pub embedder: String,
    /// `geometric` or `service:<url>`.
    pub scorer: String,
    /// `lexicon`, `classifier` or `service:<url>`.
    pub label_provider: String,
    /// `rap` or `fallback`.
    pub toc_mode: String,
    /// Run the model-guided insertion stage of alignment.
    pub cip: bool,
    /// Model access mode: live, replay or record.
    pub mode: Mode,
    pub endpoint: Option<String>,
    pub api_key: Option<String>,
    /// Fixture directory for replay and record.
    pub fixtures: Option<PathBuf>,
    pub timeout_secs: u64,
    /// File replacing the default narration instruction.
    pub instruction: Option<PathBuf>,
    pub input: Option<PathBuf>,
    pub output: Option<PathBuf>,
    /// Worker threads for the report pool; 0 uses all cores.
    pub jobs: usize,
}

impl Default for PipelineConfig {
    fn default() -> Self {
        PipelineConfig {
            tau: crate::reading_order::DEFAULT_TAU,
            fuzzy_threshold: crate::align::DEFAULT_FUZZY_THRESHOLD,
            theta: crate::labeling::DEFAULT_THETA,
            lambda: crate::labeling::DEFAULT_LAMBDA,
            radius: crate::narration::DEFAULT_RADIUS,
            embedding_dim: crate::embedding::DEFAULT_DIM,
            embedder: "hash".into(),
            scorer: "geometric".into(),
            label_provider: "lexicon".into(),
            toc_mode: "rap".into(),
            cip: true,
            mode: Mode::Live,
            endpoint: None,
            api_key: None,
            fixtures: None,
            timeout_secs: DEFAULT_TIMEOUT_SECS,
            instruction: None,
            input: None,
            output: None,
            jobs: 0,
        }
    }
}

const KEYS: [&str; 20] = [
    "tau",
    "fuzzy_threshold",
    "theta",
    "lambda",
    "radius",
    "embedding_dim",
    "embedder",
    "scorer",
    "label_provider",
    "toc_mode",
    "cip",
    "mode",
    "endpoint",
    "api_key",
    "fixtures",
    "timeout_secs",
    "instruction",
    "input",
    "output",
    "jobs",
];

/// Reads an override as a TOML scalar, falling back to a plain string.
fn env_value(raw: &str) -> toml::Value {
    toml::from_str::<toml::Table>(&format!("v = {raw}"))
        .ok()
        .and_then(|mut t| t.remove("v"))
        .unwrap_or_else(|| toml::Value::String(raw.to_string()))
}

impl PipelineConfig {
    /// Parses a TOML document and applies `env` overrides (`(name, value)` pairs).
    pub fn from_toml_with_env(text: &str, env: impl IntoIterator<Item = (String, String)>) -> Result<Self> {
        let mut table: toml::Table = toml::from_str(text).map_err(|e| Error::Config(e.to_string()))?;
        for (name, value) in env {
            let Some(key) = name.strip_prefix(ENV_PREFIX) else { continue };
            let key = key.to_ascii_lowercase();
            if KEYS.contains(&key.as_str()) {
                let v = match key.as_str() {
                    // free text keys are never reinterpreted
                    "embedder" | "scorer" | "label_provider" | "toc_mode" | "mode" | "endpoint" | "api_key"
                    | "fixtures" | "instruction" | "input" | "output" => toml::Value::String(value),
                    _ => env_value(&value),
                };
                table.insert(key, v);
            }
        }
        let cfg: PipelineConfig = table.try_into().map_err(|e: toml::de::Error| Error::Config(e.to_string()))?;
        cfg.validate()?;
        Ok(cfg)
    }

    /// Loads `path` (or the defaults when `None`) with process-environment overrides.
    pub fn load(path: Option<&Path>) -> Result<Self> {
        let text = match path {
            Some(p) => std::fs::read_to_string(p).map_err(|e| Error::io(p, e))?,
            None => String::new(),
        };
        Self::from_toml_with_env(&text, std::env::vars())
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |m: String| Err(Error::Config(m));
        if !(0.0..1.0).contains(&self.tau) {
            return bad(format!("tau must be in [0, 1), got {}", self.tau));
        }
        if !(self.theta > 0.0 && self.theta < 1.0) {
            return bad(format!("theta must be in (0, 1), got {}", self.theta));
        }
        if !(self.lambda >= 0.0 && self.lambda.is_finite()) {
            return bad(format!("lambda must be >= 0, got {}", self.lambda));
        }
        if self.radius > 50 {
            return bad(format!("radius must be <= 50, got {}", self.radius));
        }
        if !(1..=4096).contains(&self.embedding_dim) {
            return bad(format!("embedding_dim must be in 1..=4096, got {}", self.embedding_dim));
        }
        self.align_config().validate()?;
        self.toc_mode()?;
        if self.mode != Mode::Live && self.fixtures.is_none() {
            return bad(format!("mode {} needs `fixtures`", self.mode));
        }
        Ok(())
    }

    pub fn align_config(&self) -> AlignConfig {
        AlignConfig {
            fuzzy_threshold: self.fuzzy_threshold,
            cip: self.cip,
            ..AlignConfig::default()
        }
    }

    pub fn toc_mode(&self) -> Result<TocMode> {
        self.toc_mode.parse()
    }

    /// Model client settings, with `MODEL_*` variables taking precedence.
    pub fn client_config(&self) -> Result<ClientConfig> {
        ClientConfig {
            mode: self.mode,
            endpoint: self.endpoint.clone(),
            api_key: self.api_key.clone(),
            fixture_store: self.fixtures.clone(),
            timeout_secs: self.timeout_secs,
        }
        .apply_env()
    }

    /// The narration instruction: the override file when set, else the built-in text.
    pub fn instruction_text(&self) -> Result<String> {
        match &self.instruction {
            Some(p) => std::fs::read_to_string(p).map_err(|e| Error::io(p, e)),
            None => Ok(crate::narration::DEFAULT_INSTRUCTION.to_string()),
        }
    }
}
