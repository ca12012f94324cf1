//! Structure-aware partitioning of a tokenized file into chunks.
//!
//! Top-level definitions (functions, classes, and their decorators) form
//! units; consecutive module-level statements between them form another.
//! Units longer than the target are split at statement starts, and short
//! fragments are merged into a neighbor.

use std::ops::Range;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::layout::logical_lines;
use crate::lexer::{Token, TokenKind};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ChunkConfig {
    pub max_chunk_tokens: usize,
    pub target_chunk_tokens: usize,
    pub min_chunk_tokens: usize,
}

impl Default for ChunkConfig {
    fn default() -> Self {
        Self {
            max_chunk_tokens: 4096,
            target_chunk_tokens: 512,
            min_chunk_tokens: 128,
        }
    }
}

impl ChunkConfig {
    pub fn validate(&self) -> Result<()> {
        if self.min_chunk_tokens == 0
            || self.min_chunk_tokens > self.target_chunk_tokens
            || self.target_chunk_tokens > self.max_chunk_tokens
        {
            return Err(Error::Config(format!(
                "chunking requires 0 < min ({}) <= target ({}) <= max ({})",
                self.min_chunk_tokens, self.target_chunk_tokens, self.max_chunk_tokens
            )));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Chunk {
    pub id: usize,
    pub file: String,
    /// Half-open range over the file's token indices.
    pub token_range: Range<usize>,
    /// Inclusive 1-based line interval.
    pub line_range: (usize, usize),
    pub length: usize,
}

impl Chunk {
    pub fn tokens<'t>(&self, file_tokens: &'t [Token]) -> &'t [Token] {
        &file_tokens[self.token_range.clone()]
    }
}

/// Partition one file's tokens. Chunk ids are local (0-based) to the file.
pub fn partition_chunks(path: &str, tokens: &[Token], cfg: &ChunkConfig) -> Result<Vec<Chunk>> {
    cfg.validate()?;
    if tokens.is_empty() {
        return Ok(Vec::new());
    }
    let lines = logical_lines(tokens);
    let mut pieces = Vec::new();
    for unit in units(tokens, &lines) {
        let starts: Vec<usize> = lines
            .iter()
            .map(|l| l.first)
            .filter(|&s| s > unit.start && s < unit.end)
            .collect();
        split_unit(unit, &starts, cfg, &mut pieces);
    }
    merge_short(&mut pieces, cfg);
    Ok(pieces
        .into_iter()
        .enumerate()
        .map(|(id, range)| Chunk {
            id,
            file: path.to_owned(),
            line_range: line_span(&tokens[range.clone()]),
            length: range.len(),
            token_range: range,
        })
        .collect())
}

fn line_span(tokens: &[Token]) -> (usize, usize) {
    let first = tokens.first().map_or(1, |t| t.line);
    let last = tokens.last().map_or(first, |t| {
        // a line break token belongs to the line it terminates
        t.line + t.text.matches('\n').count() - usize::from(t.kind == TokenKind::Newline)
    });
    (first, last.max(first))
}

/// Top-level units as contiguous token ranges covering the whole slice.
fn units(tokens: &[Token], lines: &[crate::layout::LogicalLine]) -> Vec<Range<usize>> {
    let mut bounds = vec![0];
    let mut prev: Option<LineClass> = None;
    for line in lines.iter().filter(|l| l.depth == 0) {
        let class = classify(tokens, line.first);
        let boundary = match (prev, class) {
            (None, _) => false,
            (Some(LineClass::Decorator), _) => false,
            (Some(_), LineClass::Decorator | LineClass::Definition) => true,
            (Some(LineClass::Definition), LineClass::Other) => true,
            (Some(LineClass::Other), LineClass::Other) => false,
        };
        // a definition's body lines are deeper, so `prev` is the header
        // line; module code after it starts a new unit
        if boundary && line.first > 0 {
            bounds.push(line.first);
        }
        prev = Some(class);
    }
    bounds.dedup();
    bounds.push(tokens.len());
    bounds
        .windows(2)
        .filter(|w| w[0] < w[1])
        .map(|w| w[0]..w[1])
        .collect()
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum LineClass {
    Decorator,
    Definition,
    Other,
}

fn classify(tokens: &[Token], first: usize) -> LineClass {
    let t = &tokens[first];
    if t.is_op("@") {
        LineClass::Decorator
    } else if t.is_keyword("def")
        || t.is_keyword("class")
        || (t.is_keyword("async") && tokens.get(first + 1).is_some_and(|n| n.is_keyword("def")))
    {
        LineClass::Definition
    } else {
        LineClass::Other
    }
}

/// Split greedily: each piece ends at the last statement start not past the
/// target; if none exists, at the first statement start within the maximum;
/// failing that, a hard cut at the target.
fn split_unit(unit: Range<usize>, starts: &[usize], cfg: &ChunkConfig, out: &mut Vec<Range<usize>>) {
    let mut begin = unit.start;
    while unit.end - begin > cfg.target_chunk_tokens {
        let target = begin + cfg.target_chunk_tokens;
        let limit = begin + cfg.max_chunk_tokens;
        let cut = starts
            .iter()
            .copied()
            .rfind(|&s| s > begin && s <= target)
            .or_else(|| starts.iter().copied().find(|&s| s > target && s <= limit))
            .unwrap_or(target);
        if cut >= unit.end {
            break;
        }
        out.push(begin..cut);
        begin = cut;
    }
    out.push(begin..unit.end);
}

/// Merge fragments shorter than the minimum forward, or backward for the
/// last one, as long as the result stays within the maximum.
fn merge_short(pieces: &mut Vec<Range<usize>>, cfg: &ChunkConfig) {
    let mut i = 0;
    while i < pieces.len() {
        if pieces[i].len() >= cfg.min_chunk_tokens || pieces.len() == 1 {
            i += 1;
            continue;
        }
        if i + 1 < pieces.len() && pieces[i + 1].end - pieces[i].start <= cfg.max_chunk_tokens {
            let next = pieces.remove(i + 1);
            pieces[i].end = next.end;
        } else if i > 0 && pieces[i].end - pieces[i - 1].start <= cfg.max_chunk_tokens {
            let cur = pieces.remove(i);
            pieces[i - 1].end = cur.end;
        } else {
            i += 1;
        }
    }
}
