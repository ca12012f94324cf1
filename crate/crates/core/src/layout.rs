//! Indentation layer: turns a flat token slice into a logical-line stream
//! with explicit indent/dedent markers.
//!
//! Comments are dropped, line breaks inside brackets are ignored, and a
//! logical line's indentation is the column of its first significant token.
//! The first logical line fixes the base level, so a slice that starts in
//! the middle of an indented block lays out as if it were top level. Lines
//! indented below the base are clamped to it.

use crate::lexer::{Token, TokenKind};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Item {
    /// Index into the laid-out slice.
    Tok(usize),
    Newline,
    Indent,
    Dedent,
}

pub fn layout(tokens: &[Token]) -> Vec<Item> {
    let mut items = Vec::with_capacity(tokens.len() + 8);
    let mut stack: Vec<usize> = Vec::new();
    let mut depth = 0usize;
    let mut line_has_content = false;

    for (i, tok) in tokens.iter().enumerate() {
        match tok.kind {
            TokenKind::Comment => continue,
            TokenKind::Newline => {
                if depth == 0 && line_has_content {
                    items.push(Item::Newline);
                    line_has_content = false;
                }
                continue;
            }
            _ => {}
        }
        if !line_has_content {
            let col = tok.column;
            match stack.last().copied() {
                None => stack.push(col),
                Some(top) if col > top => {
                    stack.push(col);
                    items.push(Item::Indent);
                }
                Some(_) => {
                    while stack.len() > 1 && stack.last().is_some_and(|&top| top > col) {
                        stack.pop();
                        items.push(Item::Dedent);
                    }
                }
            }
            line_has_content = true;
        }
        if tok.kind == TokenKind::Punctuation {
            match tok.text.as_str() {
                "(" | "[" | "{" => depth += 1,
                ")" | "]" | "}" => depth = depth.saturating_sub(1),
                _ => {}
            }
        }
        items.push(Item::Tok(i));
    }
    if line_has_content {
        items.push(Item::Newline);
    }
    for _ in 1..stack.len() {
        items.push(Item::Dedent);
    }
    items
}

/// First significant token of a logical line and its block depth
/// (0 = base level).
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct LogicalLine {
    pub first: usize,
    pub depth: usize,
}

pub fn logical_lines(tokens: &[Token]) -> Vec<LogicalLine> {
    let mut lines = Vec::new();
    let mut depth = 0usize;
    let mut at_start = true;
    for item in layout(tokens) {
        match item {
            Item::Indent => depth += 1,
            Item::Dedent => depth = depth.saturating_sub(1),
            Item::Newline => at_start = true,
            Item::Tok(i) => {
                if at_start {
                    lines.push(LogicalLine { first: i, depth });
                    at_start = false;
                }
            }
        }
    }
    lines
}
