//! Pipeline configuration (one JSON document) and its fingerprint.

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::budget::AllocationConfig;
use crate::chunker::ChunkConfig;
use crate::error::{Error, Result};
use crate::scoring::{FeatureWeights, ScalingConstants};
use crate::span::SpanConfig;

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ScoringConfig {
    pub weights: FeatureWeights<f64>,
    pub tau: ScalingConstants<f64>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct AttentionConfig {
    /// Observation window rows.
    pub window: usize,
    pub pool_window: usize,
    pub head_dim: usize,
    pub heads: usize,
}

impl Default for AttentionConfig {
    fn default() -> Self {
        Self {
            window: 128,
            pool_window: 5,
            head_dim: 16,
            heads: 2,
        }
    }
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum BackendKind {
    #[default]
    Mock,
    Http,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct HttpConfig {
    pub url: String,
    pub timeout_ms: u64,
    pub retries: usize,
}

impl Default for HttpConfig {
    fn default() -> Self {
        Self {
            url: "http://127.0.0.1:8080".into(),
            timeout_ms: 30_000,
            retries: 2,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SelectionConfig {
    pub top_k: usize,
    pub layers: usize,
}

impl Default for SelectionConfig {
    fn default() -> Self {
        Self { top_k: 6, layers: 4 }
    }
}

/// Where `pipeline` finds its inputs when run from a config file.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct InputConfig {
    pub corpus: PathBuf,
    pub query: String,
    #[serde(default)]
    pub prefix: String,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct PipelineConfig {
    pub chunking: ChunkConfig,
    pub scoring: ScoringConfig,
    pub allocation: AllocationConfig<f64>,
    pub span: SpanConfig<f64>,
    pub attention: AttentionConfig,
    pub backend: BackendKind,
    pub http: HttpConfig,
    pub selection: SelectionConfig,
    pub seed: u64,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub input: Option<InputConfig>,
}

impl PipelineConfig {
    pub fn from_json(text: &str) -> Result<Self> {
        let cfg: Self = serde_json::from_str(text).map_err(|e| Error::Config(e.to_string()))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path.display().to_string(), e))?;
        Self::from_json(&text)
    }

    pub fn validate(&self) -> Result<()> {
        self.chunking.validate()?;
        self.scoring.weights.validate()?;
        self.scoring.tau.validate()?;
        self.allocation.validate()?;
        self.span.validate()?;
        let a = &self.attention;
        if a.window == 0 || a.head_dim == 0 || a.heads == 0 {
            return Err(Error::Config("attention window, head_dim and heads must be positive".into()));
        }
        if a.pool_window.is_multiple_of(2) {
            return Err(Error::Config(format!("pool_window must be odd, got {}", a.pool_window)));
        }
        if self.selection.top_k == 0 || self.selection.layers == 0 {
            return Err(Error::Config("top_k and layers must be positive".into()));
        }
        if self.backend == BackendKind::Http && self.http.url.is_empty() {
            return Err(Error::Config("http backend needs a url".into()));
        }
        Ok(())
    }

    /// The attention-only reference: no span protection, uniform budgets.
    pub fn baseline(&self) -> Self {
        let mut cfg = self.clone();
        cfg.span.enabled = false;
        cfg.allocation = cfg.allocation.uniform();
        cfg
    }

    /// Hex SHA-256 of the canonical JSON form.
    pub fn fingerprint(&self) -> String {
        let text = crate::canonical::to_canonical_string(self).expect("config is serializable");
        hex::encode(Sha256::digest(text.as_bytes()))
    }
}
