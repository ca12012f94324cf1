//! The compression plan: what each layer keeps of each selected chunk, and
//! where it sits in the assembled sequence.

use std::ops::Range;

use serde::{Deserialize, Serialize};

use crate::cpg::Cpg;
use crate::error::Result;
use crate::scoring::StructuralFeatures;
use crate::span::{Indicators, Stage};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SpanRecord {
    pub anchor_node: usize,
    pub anchors: Vec<usize>,
    #[serde(with = "crate::range_serde")]
    pub token_range: Range<usize>,
    pub indicators: Indicators,
    pub query_matched: bool,
    pub score: f64,
    pub stage: Stage,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct LayerPlan {
    pub layer: usize,
    /// Chunk-local indices, ascending.
    pub kept: Vec<usize>,
    /// Position index of each kept token.
    pub positions: Vec<usize>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ChunkPlan {
    pub chunk_id: usize,
    pub file: String,
    #[serde(with = "crate::range_serde")]
    pub token_range: Range<usize>,
    pub line_range: (usize, usize),
    /// Pre-compression length.
    pub original_length: usize,
    pub ppl_score: f64,
    pub features: StructuralFeatures,
    pub structural_score: f64,
    pub normalized_score: f64,
    pub multiplier: f64,
    pub budget: usize,
    pub span_budget: usize,
    pub spans: Vec<SpanRecord>,
    pub protected: Vec<usize>,
    pub layers: Vec<LayerPlan>,
    pub cpg: Cpg,
}

impl ChunkPlan {
    /// Position of chunk-local token `i`.
    pub fn position(&self, prefix_len: usize, i: usize) -> usize {
        prefix_len + i
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CompressionPlan {
    pub config_fingerprint: String,
    pub prefix_len: usize,
    pub query_len: usize,
    pub query_start_position: usize,
    pub chunks: Vec<ChunkPlan>,
}

/// Positions of the `[prefix; chunk; query]` input a chunk is scored with.
pub fn assign_scoring_positions(prefix_len: usize, chunk_len: usize) -> Range<usize> {
    prefix_len..prefix_len + chunk_len
}

/// `max(chunk lengths) + prefix_len`, with `max` of nothing taken as 0.
pub fn query_position(prefix_len: usize, chunk_lengths: &[usize]) -> usize {
    chunk_lengths.iter().copied().max().unwrap_or(0) + prefix_len
}

impl CompressionPlan {
    pub fn to_json(&self) -> Result<String> {
        crate::canonical::to_canonical_pretty(self)
    }

    pub fn from_json(text: &str) -> Result<Self> {
        Ok(serde_json::from_str(text)?)
    }

    /// Every broken plan invariant, as a readable message. Empty when the
    /// plan is consistent.
    pub fn violations(&self) -> Vec<String> {
        let mut out = Vec::new();
        let lengths: Vec<usize> = self.chunks.iter().map(|c| c.original_length).collect();
        if self.query_start_position != query_position(self.prefix_len, &lengths) {
            out.push(format!(
                "query_start_position {} does not match prefix {} + longest chunk",
                self.query_start_position, self.prefix_len
            ));
        }
        for c in &self.chunks {
            let id = c.chunk_id;
            if c.budget > c.original_length {
                out.push(format!("chunk {id}: budget {} exceeds length {}", c.budget, c.original_length));
            }
            if c.protected.len() > c.budget {
                out.push(format!("chunk {id}: {} protected tokens exceed budget {}", c.protected.len(), c.budget));
            }
            if !c.protected.windows(2).all(|w| w[0] < w[1]) {
                out.push(format!("chunk {id}: protected set is not strictly ascending"));
            }
            for l in &c.layers {
                let tag = format!("chunk {id} layer {}", l.layer);
                if l.kept.len() != c.budget.min(c.original_length) {
                    out.push(format!("{tag}: kept {} tokens, budget is {}", l.kept.len(), c.budget));
                }
                if !l.kept.windows(2).all(|w| w[0] < w[1]) {
                    out.push(format!("{tag}: kept set is not strictly ascending"));
                }
                if l.kept.last().is_some_and(|&i| i >= c.original_length) {
                    out.push(format!("{tag}: kept index out of range"));
                }
                if let Some(p) = c.protected.iter().find(|p| l.kept.binary_search(p).is_err()) {
                    out.push(format!("{tag}: protected token {p} was not kept"));
                }
                let expected: Vec<usize> = l.kept.iter().map(|&i| c.position(self.prefix_len, i)).collect();
                if l.positions != expected {
                    out.push(format!("{tag}: positions do not map to kept indices"));
                }
                if l.positions.iter().any(|&p| p >= self.query_start_position) {
                    out.push(format!("{tag}: a retained position reaches the query position"));
                }
            }
        }
        out
    }
}
