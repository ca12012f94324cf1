//! Chunk-level structural features, the structural score, query-conditioned
//! chunk scoring and top-k selection.

use std::collections::{BTreeMap, BTreeSet};

use serde::{Deserialize, Serialize};

use crate::cpg::{Cpg, EdgeKind, NodeKind};
use crate::error::{Error, Result};
use crate::lexer::{Token, TokenKind};
use crate::scalar::Scalar;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum FeatureKey {
    Call,
    Control,
    Return,
    Assign,
    Cfg,
    Pdg,
}

impl FeatureKey {
    pub const ALL: [FeatureKey; 6] = [
        FeatureKey::Call,
        FeatureKey::Control,
        FeatureKey::Return,
        FeatureKey::Assign,
        FeatureKey::Cfg,
        FeatureKey::Pdg,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            FeatureKey::Call => "call",
            FeatureKey::Control => "control",
            FeatureKey::Return => "return",
            FeatureKey::Assign => "assign",
            FeatureKey::Cfg => "cfg",
            FeatureKey::Pdg => "pdg",
        }
    }
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct StructuralFeatures {
    pub n_call: usize,
    pub n_control: usize,
    pub n_return: usize,
    pub n_assign: usize,
    pub e_cfg: usize,
    pub e_pdg: usize,
}

impl StructuralFeatures {
    pub fn get(&self, key: FeatureKey) -> usize {
        match key {
            FeatureKey::Call => self.n_call,
            FeatureKey::Control => self.n_control,
            FeatureKey::Return => self.n_return,
            FeatureKey::Assign => self.n_assign,
            FeatureKey::Cfg => self.e_cfg,
            FeatureKey::Pdg => self.e_pdg,
        }
    }

    pub fn get_mut(&mut self, key: FeatureKey) -> &mut usize {
        match key {
            FeatureKey::Call => &mut self.n_call,
            FeatureKey::Control => &mut self.n_control,
            FeatureKey::Return => &mut self.n_return,
            FeatureKey::Assign => &mut self.n_assign,
            FeatureKey::Cfg => &mut self.e_cfg,
            FeatureKey::Pdg => &mut self.e_pdg,
        }
    }
}

/// Count node and edge kinds of a chunk's graph.
pub fn extract_features(cpg: &Cpg) -> StructuralFeatures {
    StructuralFeatures {
        n_call: cpg.count_nodes(NodeKind::Call),
        n_control: cpg.count_nodes(NodeKind::Control),
        n_return: cpg.count_nodes(NodeKind::Return),
        n_assign: cpg.count_nodes(NodeKind::Assign),
        e_cfg: cpg.count_edges(EdgeKind::Cfg),
        e_pdg: cpg.count_edges(EdgeKind::Pdg),
    }
}

/// Per-feature weights `w_k`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(transparent, bound = "")]
pub struct FeatureWeights<T: Scalar>(pub BTreeMap<FeatureKey, T>);

/// Per-feature saturation constants `tau_k`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(transparent, bound = "")]
pub struct ScalingConstants<T: Scalar>(pub BTreeMap<FeatureKey, T>);

impl<T: Scalar> Default for FeatureWeights<T> {
    fn default() -> Self {
        Self(
            [
                (FeatureKey::Call, 0.20),
                (FeatureKey::Control, 0.18),
                (FeatureKey::Return, 0.14),
                (FeatureKey::Assign, 0.14),
                (FeatureKey::Cfg, 0.10),
                (FeatureKey::Pdg, 0.10),
            ]
            .into_iter()
            .map(|(k, v)| (k, T::lit(v)))
            .collect(),
        )
    }
}

impl<T: Scalar> Default for ScalingConstants<T> {
    fn default() -> Self {
        Self(
            FeatureKey::ALL
                .into_iter()
                .map(|k| {
                    let tau = if matches!(k, FeatureKey::Cfg | FeatureKey::Pdg) { 16.0 } else { 8.0 };
                    (k, T::lit(tau))
                })
                .collect(),
        )
    }
}

fn lookup<T: Scalar>(map: &BTreeMap<FeatureKey, T>, key: FeatureKey, what: &str) -> Result<T> {
    map.get(&key)
        .copied()
        .ok_or_else(|| Error::Config(format!("{what} has no entry for feature {:?}", key.as_str())))
}

impl<T: Scalar> FeatureWeights<T> {
    pub fn get(&self, key: FeatureKey) -> Result<T> {
        lookup(&self.0, key, "feature weights")
    }

    pub fn validate(&self) -> Result<()> {
        let mut any_positive = false;
        for key in FeatureKey::ALL {
            let w = self.get(key)?;
            if !w.is_finite() || w < T::zero() {
                return Err(Error::Config(format!("weight for {} must be finite and >= 0", key.as_str())));
            }
            any_positive |= w > T::zero();
        }
        if !any_positive {
            return Err(Error::Config("at least one feature weight must be positive".into()));
        }
        Ok(())
    }

    pub fn total(&self) -> T {
        self.0.values().fold(T::zero(), |a, &b| a + b)
    }
}

impl<T: Scalar> ScalingConstants<T> {
    pub fn get(&self, key: FeatureKey) -> Result<T> {
        lookup(&self.0, key, "scaling constants")
    }

    pub fn validate(&self) -> Result<()> {
        for key in FeatureKey::ALL {
            let tau = self.get(key)?;
            if !(tau.is_finite() && tau > T::zero()) {
                return Err(Error::Config(format!("tau for {} must be positive", key.as_str())));
            }
        }
        Ok(())
    }
}

/// Logarithmic saturation: `min(1, ln(1+x) / ln(1+tau))`.
pub fn normalize<T: Scalar>(x: T, tau: T) -> Result<T> {
    // written so that NaN fails both checks
    if tau.partial_cmp(&T::zero()) != Some(std::cmp::Ordering::Greater) || !tau.is_finite() {
        return Err(Error::Parameter(format!("tau must be positive, got {tau}")));
    }
    if x.partial_cmp(&T::zero()).is_none_or(|o| o == std::cmp::Ordering::Less) {
        return Err(Error::Parameter(format!("feature value must be >= 0, got {x}")));
    }
    Ok((x.ln_1p() / tau.ln_1p()).min(T::one()))
}

/// `sigma = sum_k w_k * normalize(f_k, tau_k)`.
pub fn structural_score<T: Scalar>(
    f: &StructuralFeatures,
    w: &FeatureWeights<T>,
    tau: &ScalingConstants<T>,
) -> Result<T> {
    let mut sigma = T::zero();
    for key in FeatureKey::ALL {
        let x = T::from_usize_lossy(f.get(key));
        sigma = sigma + w.get(key)? * normalize(x, tau.get(key)?)?;
    }
    Ok(sigma)
}

/// Source of the query-conditioned chunk score (mean negative log-likelihood
/// of the query, lower is more relevant).
pub trait ChunkScorer: Sync {
    fn score(&self, chunk_id: usize, prefix: &[Token], chunk: &[Token], query: &[Token]) -> Result<f64>;
}

/// Identifier texts of a token sequence.
pub fn symbols(tokens: &[Token]) -> BTreeSet<&str> {
    tokens
        .iter()
        .filter(|t| t.kind == TokenKind::Identifier)
        .map(|t| t.text.as_str())
        .collect()
}

/// Deterministic stand-in scorer: the fraction of query identifiers missing
/// from the chunk.
#[derive(Debug, Clone, Copy, Default)]
pub struct MockScorer;

impl ChunkScorer for MockScorer {
    fn score(&self, _chunk_id: usize, _prefix: &[Token], chunk: &[Token], query: &[Token]) -> Result<f64> {
        let q = symbols(query);
        let c = symbols(chunk);
        let shared = q.intersection(&c).count();
        Ok(1.0 - shared as f64 / q.len().max(1) as f64)
    }
}

pub fn score_chunk(
    scorer: &dyn ChunkScorer,
    chunk_id: usize,
    prefix: &[Token],
    chunk: &[Token],
    query: &[Token],
) -> Result<f64> {
    if query.is_empty() {
        return Err(Error::Parameter("query must contain at least one token".into()));
    }
    let value = scorer.score(chunk_id, prefix, chunk, query)?;
    if !value.is_finite() {
        return Err(Error::Scoring {
            chunk_id,
            message: format!("scorer returned non-finite value {value}"),
        });
    }
    Ok(value)
}

/// The `k` lowest-scoring chunk ids (ties to the smaller id), returned in
/// ascending id order.
pub fn select_topk<T: Scalar>(scores: &[(usize, T)], k: usize) -> Result<Vec<usize>> {
    if k == 0 {
        return Err(Error::Parameter("k must be positive".into()));
    }
    if scores.iter().any(|(_, s)| !s.is_finite()) {
        return Err(Error::Numeric("chunk scores"));
    }
    let mut ranked: Vec<(usize, T)> = scores.to_vec();
    ranked.sort_by(|a, b| a.1.partial_cmp(&b.1).expect("finite").then(a.0.cmp(&b.0)));
    let mut ids: Vec<usize> = ranked.into_iter().take(k).map(|(id, _)| id).collect();
    ids.sort_unstable();
    ids.dedup();
    Ok(ids)
}
