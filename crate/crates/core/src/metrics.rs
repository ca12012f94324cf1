//! Retention and ranking metrics, set overlap and edit distance.

use std::collections::{BTreeMap, BTreeSet};

use serde::{Deserialize, Serialize};

use crate::cpg::{Cpg, NodeKind};
use crate::error::{Error, Result};
use crate::plan::CompressionPlan;
use crate::scalar::Scalar;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LayerRetention {
    pub layer: usize,
    pub structure_score: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RetentionReport {
    /// Mean over (layer, chunk) pairs of retained / total critical tokens;
    /// `None` when no chunk has a critical token.
    pub structure_score: Option<f64>,
    /// Only categories present in the plan appear.
    pub per_category_retention: BTreeMap<NodeKind, f64>,
    pub per_layer: Vec<LayerRetention>,
}

/// Tokens covered by some node (of `kind`, when given).
pub fn critical_tokens(cpg: &Cpg, kind: Option<NodeKind>) -> BTreeSet<usize> {
    cpg.nodes
        .iter()
        .filter(|n| kind.is_none_or(|k| n.kind == k))
        .flat_map(|n| n.token_range.clone())
        .collect()
}

fn fraction(critical: &BTreeSet<usize>, kept: &[usize]) -> Option<f64> {
    if critical.is_empty() {
        return None;
    }
    let hit = kept.iter().filter(|i| critical.contains(i)).count();
    Some(hit as f64 / critical.len() as f64)
}

fn mean(xs: impl IntoIterator<Item = f64>) -> Option<f64> {
    let (sum, n) = xs.into_iter().fold((0.0, 0usize), |(s, n), x| (s + x, n + 1));
    (n > 0).then(|| sum / n as f64)
}

/// Retention of `kind` (all kinds when `None`) using `cpgs[chunk_id]` as the
/// source of critical tokens.
fn retention_with(plan: &CompressionPlan, cpgs: &BTreeMap<usize, &Cpg>, kind: Option<NodeKind>, layer: Option<usize>) -> Result<Option<f64>> {
    let mut values = Vec::new();
    for c in &plan.chunks {
        let cpg = cpgs.get(&c.chunk_id).ok_or_else(|| {
            Error::Parameter(format!("no CPG supplied for chunk {}", c.chunk_id))
        })?;
        let critical = critical_tokens(cpg, kind);
        for l in c.layers.iter().filter(|l| layer.is_none_or(|x| x == l.layer)) {
            values.extend(fraction(&critical, &l.kept));
        }
    }
    Ok(mean(values))
}

/// Structure score of `plan` against externally supplied graphs.
pub fn structure_score(plan: &CompressionPlan, cpgs: &[Cpg]) -> Result<RetentionReport> {
    let map: BTreeMap<usize, &Cpg> = cpgs.iter().map(|g| (g.chunk_id, g)).collect();
    report_with(plan, &map)
}

/// Structure score using the graphs embedded in the plan.
pub fn retention_report(plan: &CompressionPlan) -> RetentionReport {
    let map: BTreeMap<usize, &Cpg> = plan.chunks.iter().map(|c| (c.chunk_id, &c.cpg)).collect();
    report_with(plan, &map).expect("embedded graphs cover every chunk")
}

fn report_with(plan: &CompressionPlan, cpgs: &BTreeMap<usize, &Cpg>) -> Result<RetentionReport> {
    let mut per_category_retention = BTreeMap::new();
    for kind in NodeKind::ALL {
        if let Some(v) = retention_with(plan, cpgs, Some(kind), None)? {
            per_category_retention.insert(kind, v);
        }
    }
    let layers: BTreeSet<usize> = plan.chunks.iter().flat_map(|c| c.layers.iter().map(|l| l.layer)).collect();
    let per_layer = layers
        .into_iter()
        .map(|layer| {
            Ok(LayerRetention {
                layer,
                structure_score: retention_with(plan, cpgs, None, Some(layer))?,
            })
        })
        .collect::<Result<_>>()?;
    Ok(RetentionReport {
        structure_score: retention_with(plan, cpgs, None, None)?,
        per_category_retention,
        per_layer,
    })
}

/// Retention restricted to one node kind; `None` when the kind is absent.
pub fn category_retention(plan: &CompressionPlan, cpgs: &[Cpg], category: NodeKind) -> Result<Option<f64>> {
    let map: BTreeMap<usize, &Cpg> = cpgs.iter().map(|g| (g.chunk_id, g)).collect();
    retention_with(plan, &map, Some(category), None)
}

fn top_ids<T: Scalar>(scores: &[T], n: usize) -> BTreeSet<usize> {
    let mut idx: Vec<usize> = (0..scores.len()).collect();
    idx.sort_by(|&a, &b| {
        scores[b]
            .partial_cmp(&scores[a])
            .unwrap_or(std::cmp::Ordering::Equal)
            .then(a.cmp(&b))
    });
    idx.into_iter().take(n).collect()
}

/// Jaccard overlap of the top `ceil(fraction * n)` items of two aligned
/// score lists (higher is more important in both).
pub fn topk_overlap_jaccard<T: Scalar>(a: &[T], b: &[T], fraction: T) -> Result<T> {
    if a.is_empty() || a.len() != b.len() {
        return Err(Error::Parameter("score lists must be non-empty and aligned".into()));
    }
    if !(fraction > T::zero() && fraction <= T::one()) {
        return Err(Error::Parameter(format!("fraction must be in (0, 1], got {fraction}")));
    }
    if a.iter().chain(b).any(|x| !x.is_finite()) {
        return Err(Error::Numeric("ranking scores"));
    }
    let n = (fraction * T::from_usize_lossy(a.len()))
        .ceil()
        .to_usize()
        .unwrap_or(a.len())
        .clamp(1, a.len());
    let (sa, sb) = (top_ids(a, n), top_ids(b, n));
    let inter = sa.intersection(&sb).count();
    let union = sa.union(&sb).count();
    Ok(T::from_usize_lossy(inter) / T::from_usize_lossy(union))
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SetMetrics {
    pub precision: f64,
    pub recall: f64,
    pub f1: f64,
    pub jaccard: f64,
    /// False when the gold set is empty (recall reported as 0).
    pub recall_defined: bool,
}

/// Precision, recall, F1 and Jaccard. An empty prediction has precision 0;
/// two empty sets have Jaccard 1.
pub fn set_metrics<E: Ord>(predicted: &BTreeSet<E>, gold: &BTreeSet<E>) -> SetMetrics {
    let inter = predicted.intersection(gold).count() as f64;
    let union = predicted.union(gold).count() as f64;
    let precision = if predicted.is_empty() { 0.0 } else { inter / predicted.len() as f64 };
    let recall = if gold.is_empty() { 0.0 } else { inter / gold.len() as f64 };
    let f1 = if precision + recall > 0.0 {
        2.0 * precision * recall / (precision + recall)
    } else {
        0.0
    };
    SetMetrics {
        precision,
        recall,
        f1,
        jaccard: if union == 0.0 { 1.0 } else { inter / union },
        recall_defined: !gold.is_empty(),
    }
}

/// Unit the edit distance counts in.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum EditUnit {
    #[default]
    Char,
    /// Lexical tokens, line breaks and comments excluded.
    Token,
}

/// Levenshtein distance between two sequences.
pub fn levenshtein<E: PartialEq>(a: &[E], b: &[E]) -> usize {
    let mut prev: Vec<usize> = (0..=b.len()).collect();
    let mut cur = vec![0; b.len() + 1];
    for (i, x) in a.iter().enumerate() {
        cur[0] = i + 1;
        for (j, y) in b.iter().enumerate() {
            let sub = prev[j] + usize::from(x != y);
            cur[j + 1] = sub.min(prev[j + 1] + 1).min(cur[j] + 1);
        }
        std::mem::swap(&mut prev, &mut cur);
    }
    prev[b.len()]
}

/// Levenshtein distance over `max(|a|, |b|)`; 0 for two empty inputs.
pub fn normalized_edit_distance(a: &str, b: &str, unit: EditUnit) -> f64 {
    let (d, n) = match unit {
        EditUnit::Char => {
            let (a, b): (Vec<char>, Vec<char>) = (a.chars().collect(), b.chars().collect());
            (levenshtein(&a, &b), a.len().max(b.len()))
        }
        EditUnit::Token => {
            let texts = |s: &str| -> Vec<String> {
                crate::pipeline::text_tokens(s).into_iter().map(|t| t.text).collect()
            };
            let (a, b) = (texts(a), texts(b));
            (levenshtein(&a, &b), a.len().max(b.len()))
        }
    };
    if n == 0 {
        0.0
    } else {
        d as f64 / n as f64
    }
}
