//! Structural spans: construction around CPG anchors, scoring, query
//! protection, budgeted selection and token-level protection.

use std::collections::BTreeSet;
use std::ops::Range;

use serde::{Deserialize, Serialize};

use crate::cpg::{Cpg, NodeKind};
use crate::error::{Error, Result};
use crate::lexer::Token;
use crate::scalar::Scalar;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields, bound = "")]
pub struct SpanWeights<T: Scalar> {
    pub call: T,
    pub control: T,
    #[serde(rename = "return")]
    pub ret: T,
    pub assign: T,
    pub signature: T,
    pub query: T,
    pub defuse: T,
    pub attention: T,
}

impl<T: Scalar> Default for SpanWeights<T> {
    fn default() -> Self {
        Self {
            call: T::lit(0.20),
            control: T::lit(0.18),
            ret: T::lit(0.14),
            assign: T::lit(0.14),
            signature: T::zero(),
            query: T::lit(0.18),
            defuse: T::lit(0.10),
            attention: T::lit(0.06),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields, bound = "")]
pub struct SpanConfig<T: Scalar> {
    /// When false no spans are protected and attention fills every budget.
    pub enabled: bool,
    pub rho_span: T,
    pub b_min: usize,
    pub min_span_tokens: usize,
    pub merge_gap_lines: usize,
    pub weights: SpanWeights<T>,
}

impl<T: Scalar> Default for SpanConfig<T> {
    fn default() -> Self {
        Self {
            enabled: true,
            rho_span: T::lit(0.5),
            b_min: 16,
            min_span_tokens: 16,
            merge_gap_lines: 1,
            weights: SpanWeights::default(),
        }
    }
}

impl<T: Scalar> SpanConfig<T> {
    pub fn validate(&self) -> Result<()> {
        if !(self.rho_span > T::zero() && self.rho_span <= T::one()) {
            return Err(Error::Config(format!("rho_span must be in (0, 1], got {}", self.rho_span)));
        }
        if self.b_min == 0 || self.min_span_tokens == 0 {
            return Err(Error::Config("b_min and min_span_tokens must be positive".into()));
        }
        let w = &self.weights;
        for (name, v) in [
            ("call", w.call),
            ("control", w.control),
            ("return", w.ret),
            ("assign", w.assign),
            ("signature", w.signature),
            ("query", w.query),
            ("defuse", w.defuse),
            ("attention", w.attention),
        ] {
            if !(v.is_finite() && v >= T::zero()) {
                return Err(Error::Config(format!("span weight {name} must be finite and >= 0")));
            }
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct Indicators {
    pub is_call: bool,
    pub is_control: bool,
    pub is_return: bool,
    pub is_assign: bool,
    pub is_signature: bool,
}

impl Indicators {
    pub fn of(kind: NodeKind) -> Self {
        let mut i = Self::default();
        match kind {
            NodeKind::Call => i.is_call = true,
            NodeKind::Control => i.is_control = true,
            NodeKind::Return => i.is_return = true,
            NodeKind::Assign => i.is_assign = true,
            NodeKind::Signature => i.is_signature = true,
        }
        i
    }

    fn bits(self) -> u8 {
        [self.is_call, self.is_control, self.is_return, self.is_assign, self.is_signature]
            .iter()
            .enumerate()
            .fold(0, |acc, (k, &b)| acc | (u8::from(b) << k))
    }

    pub fn shares_any(self, other: Self) -> bool {
        self.bits() & other.bits() != 0
    }

    pub fn union(self, o: Self) -> Self {
        Self {
            is_call: self.is_call || o.is_call,
            is_control: self.is_control || o.is_control,
            is_return: self.is_return || o.is_return,
            is_assign: self.is_assign || o.is_assign,
            is_signature: self.is_signature || o.is_signature,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(bound = "")]
pub struct StructuralSpan<T: Scalar> {
    /// Anchor node ids, ascending; the first is the span's anchor.
    pub anchors: Vec<usize>,
    #[serde(with = "crate::range_serde")]
    pub token_range: Range<usize>,
    /// Inclusive line interval covered by the anchors.
    pub lines: (usize, usize),
    pub indicators: Indicators,
    pub symbols: BTreeSet<String>,
    /// Whether some anchor is an endpoint of a def-use edge.
    pub in_pdg: bool,
    pub attention_feature: T,
}

impl<T: Scalar> StructuralSpan<T> {
    pub fn anchor_node(&self) -> usize {
        self.anchors[0]
    }

    pub fn width(&self) -> usize {
        self.token_range.len()
    }
}

/// Grow `range` to `min_width` tokens, half on each side (the extra token
/// goes right), shifting whatever does not fit at one boundary to the other.
pub fn widen(range: Range<usize>, min_width: usize, len: usize) -> Range<usize> {
    let width = range.len();
    if width >= min_width {
        return range;
    }
    let extra = min_width - width;
    let left = extra / 2;
    let right = extra - left;
    let room_left = range.start;
    let room_right = len.saturating_sub(range.end);
    let short_left = left - left.min(room_left);
    let short_right = right - right.min(room_right);
    let take_left = (left + short_right).min(room_left);
    let take_right = (right + short_left).min(room_right);
    range.start - take_left..range.end + take_right
}

fn line_gap(a: (usize, usize), b: (usize, usize)) -> usize {
    if a.1 < b.0 {
        b.0 - a.1
    } else {
        a.0.saturating_sub(b.1)
    }
}

/// One span per node, widened to `min_span_tokens`, then merged until no two
/// spans within `merge_gap_lines` share an indicator.
pub fn build_spans<T: Scalar>(tokens: &[Token], cpg: &Cpg, cfg: &SpanConfig<T>) -> Vec<StructuralSpan<T>> {
    let pdg = cpg.pdg_participants();
    let mut spans: Vec<StructuralSpan<T>> = cpg
        .nodes
        .iter()
        .filter(|n| !n.token_range.is_empty() && n.token_range.end <= tokens.len())
        .map(|n| {
            let last = tokens[n.token_range.end - 1].line;
            StructuralSpan {
                anchors: vec![n.id],
                token_range: widen(n.token_range.clone(), cfg.min_span_tokens, tokens.len()),
                lines: (n.line.min(last), last.max(n.line)),
                indicators: Indicators::of(n.kind),
                symbols: n.symbols.clone(),
                in_pdg: pdg.contains(&n.id),
                attention_feature: T::zero(),
            }
        })
        .collect();
    loop {
        let mut merged = false;
        let mut i = 0;
        while i < spans.len() {
            let mut j = i + 1;
            while j < spans.len() {
                let (a, b) = (&spans[i], &spans[j]);
                if line_gap(a.lines, b.lines) <= cfg.merge_gap_lines && a.indicators.shares_any(b.indicators) {
                    let b = spans.remove(j);
                    let a = &mut spans[i];
                    a.anchors.extend(b.anchors);
                    a.anchors.sort_unstable();
                    a.token_range = a.token_range.start.min(b.token_range.start)..a.token_range.end.max(b.token_range.end);
                    a.lines = (a.lines.0.min(b.lines.0), a.lines.1.max(b.lines.1));
                    a.indicators = a.indicators.union(b.indicators);
                    a.symbols.extend(b.symbols);
                    a.in_pdg |= b.in_pdg;
                    a.attention_feature = a.attention_feature.max(b.attention_feature);
                    merged = true;
                } else {
                    j += 1;
                }
            }
            i += 1;
        }
        if !merged {
            break;
        }
    }
    spans.sort_by_key(|s| (s.token_range.start, s.token_range.end, s.anchors[0]));
    spans
}

/// `1` iff the span mentions a query symbol.
pub fn query_protection<T: Scalar>(z: &StructuralSpan<T>, query: &BTreeSet<String>) -> bool {
    z.symbols.iter().any(|s| query.contains(s))
}

/// Indicator weights plus def-use, attention and (when query-matched) query
/// alignment terms.
pub fn score_span<T: Scalar>(z: &StructuralSpan<T>, query_matched: bool, cfg: &SpanConfig<T>) -> T {
    let w = &cfg.weights;
    let i = z.indicators;
    let term = |on: bool, weight: T| if on { weight } else { T::zero() };
    term(i.is_call, w.call)
        + term(i.is_control, w.control)
        + term(i.is_return, w.ret)
        + term(i.is_assign, w.assign)
        + term(i.is_signature, w.signature)
        + term(z.in_pdg, w.defuse)
        + term(query_matched, w.query)
        + w.attention * z.attention_feature
}

/// `min(B, max(b_min, floor(rho * B)))`.
pub fn span_budget<T: Scalar>(b: usize, cfg: &SpanConfig<T>) -> usize {
    let share = (T::from_usize_lossy(b) * cfg.rho_span).snapped_floor().to_usize().unwrap_or(0);
    b.min(cfg.b_min.max(share))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Stage {
    /// Query-matched spans.
    Query,
    /// Function signatures.
    Signature,
    /// Ranked by score.
    Ranked,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct Selected {
    /// Index into the candidate list.
    pub index: usize,
    pub stage: Stage,
}

struct Coverage {
    covered: Vec<bool>,
    used: usize,
    budget: usize,
}

impl Coverage {
    fn uncounted(&self, r: &Range<usize>) -> usize {
        r.clone().filter(|&i| !self.covered.get(i).copied().unwrap_or(false)).count()
    }

    fn take(&mut self, r: &Range<usize>) {
        if self.covered.len() < r.end {
            self.covered.resize(r.end, false);
        }
        for i in r.clone() {
            if !self.covered[i] {
                self.covered[i] = true;
                self.used += 1;
            }
        }
    }

    fn remaining(&self) -> usize {
        self.budget - self.used
    }
}

/// Two-stage greedy selection under `b_span` tokens, overlaps counted once.
///
/// Protected spans go first: query-matched ones that fit `b_span` on their
/// own, then signatures. Within each group the span with the fewest uncounted
/// tokens is taken next (ties to the earlier start) until the cheapest one no
/// longer fits, so whenever the fitting query spans fit together they are all
/// selected. The rest follow by descending score, ties to the earlier start,
/// each added only if its uncounted width still fits.
pub fn select_spans<T: Scalar>(
    spans: &[StructuralSpan<T>],
    scores: &[T],
    protections: &[bool],
    b_span: usize,
) -> Vec<Selected> {
    assert_eq!(spans.len(), scores.len(), "spans and scores must align");
    assert_eq!(spans.len(), protections.len(), "spans and protections must align");
    let mut cov = Coverage {
        covered: Vec::new(),
        used: 0,
        budget: b_span,
    };
    let mut out = Vec::new();
    let mut taken = vec![false; spans.len()];
    if b_span == 0 {
        return out;
    }
    let groups = [
        (
            Stage::Query,
            (0..spans.len())
                .filter(|&i| protections[i] && spans[i].width() <= b_span)
                .collect::<Vec<_>>(),
        ),
        (
            Stage::Signature,
            (0..spans.len())
                .filter(|&i| !protections[i] && spans[i].indicators.is_signature)
                .collect(),
        ),
    ];
    for (stage, mut pool) in groups {
        while !pool.is_empty() {
            let (pos, &best) = pool
                .iter()
                .enumerate()
                .min_by_key(|(_, &i)| (cov.uncounted(&spans[i].token_range), spans[i].token_range.start, i))
                .expect("non-empty");
            if cov.uncounted(&spans[best].token_range) > cov.remaining() {
                break;
            }
            pool.swap_remove(pos);
            cov.take(&spans[best].token_range);
            taken[best] = true;
            out.push(Selected { index: best, stage });
        }
    }
    let mut rest: Vec<usize> = (0..spans.len()).filter(|&i| !taken[i]).collect();
    rest.sort_by(|&a, &b| {
        scores[b]
            .partial_cmp(&scores[a])
            .unwrap_or(std::cmp::Ordering::Equal)
            .then(spans[a].token_range.start.cmp(&spans[b].token_range.start))
            .then(a.cmp(&b))
    });
    for i in rest {
        if cov.uncounted(&spans[i].token_range) <= cov.remaining() {
            cov.take(&spans[i].token_range);
            out.push(Selected {
                index: i,
                stage: Stage::Ranked,
            });
        }
    }
    out
}

/// Union of the selected ranges cut or padded to `b` tokens: the first `b`
/// protected indices, or all of them plus their nearest neighbors (ties to
/// the smaller index). Empty when nothing is selected.
pub fn protect_tokens(ranges: &[Range<usize>], b: usize, chunk_len: usize) -> Vec<usize> {
    let p: BTreeSet<usize> = ranges.iter().flat_map(|r| r.clone()).filter(|&i| i < chunk_len).collect();
    if p.is_empty() {
        return Vec::new();
    }
    if p.len() >= b {
        return p.into_iter().take(b).collect();
    }
    let marks: Vec<usize> = p.iter().copied().collect();
    let mut others: Vec<(usize, usize)> = (0..chunk_len)
        .filter(|i| !p.contains(i))
        .map(|i| {
            let k = marks.partition_point(|&m| m < i);
            let right = marks.get(k).map(|&m| m - i);
            let left = k.checked_sub(1).map(|k| i - marks[k]);
            let d = right.into_iter().chain(left).min().expect("p non-empty");
            (d, i)
        })
        .collect();
    others.sort_unstable();
    let mut out: Vec<usize> = marks;
    out.extend(others.into_iter().take(b - p.len()).map(|(_, i)| i));
    out.sort_unstable();
    out
}
