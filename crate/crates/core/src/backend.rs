//! Model-side collaborators: the attention source and the HTTP chunk scorer.
//!
//! The mock attention backend draws Gaussian Q/K blocks from a ChaCha stream
//! seeded per (chunk, layer, head). The HTTP variants speak a small JSON
//! protocol so a real model server can stand in for either.

use std::time::Duration;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::attention::{AttentionWindow, Matrix};
use crate::error::{Error, Result};
use crate::lexer::Token;
use crate::scoring::ChunkScorer;

/// Source of the per-layer attention blocks of a chunk (one per head).
pub trait AttentionBackend: Sync {
    fn heads(&self, chunk_id: usize, layer: usize, chunk_len: usize) -> Result<Vec<AttentionWindow<f64>>>;
}

#[derive(Debug, Clone, Copy)]
pub struct MockAttention {
    pub seed: u64,
    /// Observation window rows `W`.
    pub window: usize,
    pub head_dim: usize,
    pub heads: usize,
}

impl MockAttention {
    /// Stream seed for one head. The rotations keep (chunk, layer, head)
    /// triples from cancelling each other as a plain XOR would.
    pub fn derive_seed(seed: u64, chunk_id: usize, layer: usize, head: usize) -> u64 {
        seed ^ (chunk_id as u64).rotate_left(32) ^ (layer as u64).rotate_left(16) ^ head as u64
    }

    fn gaussian(rng: &mut ChaCha8Rng, rows: usize, cols: usize) -> Matrix<f64> {
        Matrix {
            rows,
            cols,
            data: (0..rows * cols).map(|_| StandardNormal.sample(rng)).collect(),
        }
    }
}

impl AttentionBackend for MockAttention {
    fn heads(&self, chunk_id: usize, layer: usize, chunk_len: usize) -> Result<Vec<AttentionWindow<f64>>> {
        if self.window == 0 || self.head_dim == 0 || self.heads == 0 || chunk_len == 0 {
            return Err(Error::Attention {
                chunk_id,
                layer,
                message: "mock attention needs positive window, head_dim, heads and chunk length".into(),
            });
        }
        Ok((0..self.heads)
            .map(|h| {
                let mut rng = ChaCha8Rng::seed_from_u64(Self::derive_seed(self.seed, chunk_id, layer, h));
                AttentionWindow {
                    q: Self::gaussian(&mut rng, self.window, self.head_dim),
                    k: Self::gaussian(&mut rng, chunk_len, self.head_dim),
                    layer,
                }
            })
            .collect())
    }
}

#[derive(Debug, Clone)]
struct Http {
    base: String,
    agent: ureq::Agent,
    retries: usize,
}

impl Http {
    fn new(base: &str, timeout_ms: u64, retries: usize) -> Self {
        Self {
            base: base.trim_end_matches('/').to_owned(),
            agent: ureq::AgentBuilder::new().timeout(Duration::from_millis(timeout_ms)).build(),
            retries,
        }
    }

    fn post<Req: Serialize, Resp: for<'de> Deserialize<'de>>(&self, path: &str, body: &Req) -> std::result::Result<Resp, String> {
        let url = format!("{}{path}", self.base);
        let mut last = String::new();
        for _ in 0..=self.retries {
            match self.agent.post(&url).send_json(body) {
                Ok(resp) => return resp.into_json::<Resp>().map_err(|e| format!("bad response body: {e}")),
                // a 4xx will not get better on retry
                Err(ureq::Error::Status(code, _)) if (400..500).contains(&code) => {
                    return Err(format!("{url} answered {code}"));
                }
                Err(e) => last = e.to_string(),
            }
        }
        Err(last)
    }
}

/// Chunk scorer backed by `POST /score_ppl`.
#[derive(Debug, Clone)]
pub struct HttpScorer(Http);

impl HttpScorer {
    pub fn new(base_url: &str, timeout_ms: u64, retries: usize) -> Self {
        Self(Http::new(base_url, timeout_ms, retries))
    }
}

#[derive(Serialize)]
struct ScoreRequest<'a> {
    prefix: Vec<&'a str>,
    chunk: Vec<&'a str>,
    query: Vec<&'a str>,
}

#[derive(Deserialize)]
struct ScoreResponse {
    nll_mean: f64,
}

fn texts(tokens: &[Token]) -> Vec<&str> {
    tokens.iter().map(|t| t.text.as_str()).collect()
}

impl ChunkScorer for HttpScorer {
    fn score(&self, chunk_id: usize, prefix: &[Token], chunk: &[Token], query: &[Token]) -> Result<f64> {
        let req = ScoreRequest {
            prefix: texts(prefix),
            chunk: texts(chunk),
            query: texts(query),
        };
        self.0
            .post::<_, ScoreResponse>("/score_ppl", &req)
            .map(|r| r.nll_mean)
            .map_err(|message| Error::Scoring { chunk_id, message })
    }
}

/// Attention backend behind `POST /attention`. The server returns one head.
#[derive(Debug, Clone)]
pub struct HttpAttention(Http);

impl HttpAttention {
    pub fn new(base_url: &str, timeout_ms: u64, retries: usize) -> Self {
        Self(Http::new(base_url, timeout_ms, retries))
    }
}

#[derive(Serialize)]
struct AttentionRequest {
    chunk_id: usize,
    layer: usize,
}

#[derive(Deserialize)]
struct AttentionResponse {
    q: Vec<Vec<f64>>,
    k: Vec<Vec<f64>>,
}

impl AttentionBackend for HttpAttention {
    fn heads(&self, chunk_id: usize, layer: usize, chunk_len: usize) -> Result<Vec<AttentionWindow<f64>>> {
        let fail = |message: String| Error::Attention {
            chunk_id,
            layer,
            message,
        };
        let resp: AttentionResponse = self.0.post("/attention", &AttentionRequest { chunk_id, layer }).map_err(fail)?;
        let q = Matrix::from_rows(&resp.q).map_err(|e| fail(e.to_string()))?;
        let k = Matrix::from_rows(&resp.k).map_err(|e| fail(e.to_string()))?;
        if k.rows != chunk_len {
            return Err(fail(format!("expected {chunk_len} key rows, got {}", k.rows)));
        }
        Ok(vec![AttentionWindow { q, k, layer }])
    }
}
