//! Statement-level syntax tree for the subset language.
//!
//! Expressions are not parsed into trees. An [`Expr`] is a token range plus
//! what the analyses need from it: the base names it reads and the call
//! expressions it contains. All indices are relative to the token slice the
//! tree was parsed from.

use std::ops::Range;

use serde::Serialize;

use crate::lexer::{Token, TokenKind};

#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize)]
pub struct Ast {
    pub body: Vec<Stmt>,
    pub diagnostics: Vec<Diagnostic>,
}

impl Ast {
    /// Pre-order walk over every statement, including nested bodies.
    pub fn walk(&self) -> Vec<&Stmt> {
        fn go<'a>(stmts: &'a [Stmt], out: &mut Vec<&'a Stmt>) {
            for s in stmts {
                out.push(s);
                for body in s.kind.bodies() {
                    go(body, out);
                }
            }
        }
        let mut out = Vec::new();
        go(&self.body, &mut out);
        out
    }

    pub fn functions(&self) -> usize {
        self.walk()
            .iter()
            .filter(|s| matches!(s.kind, StmtKind::FunctionDef { .. }))
            .count()
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct Diagnostic {
    pub line: usize,
    pub range: Range<usize>,
    pub message: String,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct NameRef {
    pub name: String,
    pub token: usize,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct Call {
    pub range: Range<usize>,
    pub callee: String,
}

#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize)]
pub struct Expr {
    pub range: Range<usize>,
    /// Base names read by the expression (attribute fields and keyword
    /// argument names excluded).
    pub names: Vec<NameRef>,
    pub calls: Vec<Call>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct Stmt {
    /// The statement's own tokens; for compound statements, the header.
    pub range: Range<usize>,
    pub line: usize,
    pub kind: StmtKind,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct Branch {
    pub header: Range<usize>,
    pub line: usize,
    pub cond: Expr,
    pub body: Vec<Stmt>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub enum StmtKind {
    FunctionDef {
        name: String,
        params: Vec<NameRef>,
        /// Parameter list contents (defaults may contain calls).
        header: Expr,
        body: Vec<Stmt>,
    },
    ClassDef {
        name: String,
        bases: Expr,
        body: Vec<Stmt>,
    },
    /// `if` / `elif` chain. The first branch header is the statement range.
    If {
        branches: Vec<Branch>,
        orelse: Vec<Stmt>,
    },
    While {
        cond: Expr,
        body: Vec<Stmt>,
        orelse: Vec<Stmt>,
    },
    For {
        target: Expr,
        defs: Vec<NameRef>,
        iter: Expr,
        body: Vec<Stmt>,
        orelse: Vec<Stmt>,
    },
    Return {
        value: Option<Expr>,
    },
    Assign {
        targets: Vec<Expr>,
        defs: Vec<NameRef>,
        value: Expr,
        augmented: bool,
    },
    Expr(Expr),
    Pass,
    Break,
    Continue,
    /// Compound statement outside the subset (`try`, `with`, ...); the body
    /// is still parsed.
    Block {
        header: Expr,
        body: Vec<Stmt>,
    },
    /// Simple statement outside the subset or one that failed to parse.
    Opaque(Expr),
}

impl StmtKind {
    pub fn bodies(&self) -> Vec<&[Stmt]> {
        match self {
            StmtKind::FunctionDef { body, .. } | StmtKind::ClassDef { body, .. } | StmtKind::Block { body, .. } => {
                vec![body]
            }
            StmtKind::If { branches, orelse } => {
                let mut v: Vec<&[Stmt]> = branches.iter().map(|b| b.body.as_slice()).collect();
                v.push(orelse);
                v
            }
            StmtKind::While { body, orelse, .. } | StmtKind::For { body, orelse, .. } => vec![body, orelse],
            _ => Vec::new(),
        }
    }

    /// Every expression directly owned by the statement (not nested bodies).
    pub fn exprs(&self) -> Vec<&Expr> {
        match self {
            StmtKind::FunctionDef { header, .. } => vec![header],
            StmtKind::ClassDef { bases, .. } => vec![bases],
            StmtKind::If { branches, .. } => branches.iter().map(|b| &b.cond).collect(),
            StmtKind::While { cond, .. } => vec![cond],
            StmtKind::For { target, iter, .. } => vec![target, iter],
            StmtKind::Return { value } => value.iter().collect(),
            StmtKind::Assign { targets, value, .. } => targets.iter().chain(std::iter::once(value)).collect(),
            StmtKind::Expr(e) | StmtKind::Opaque(e) => vec![e],
            StmtKind::Block { header, .. } => vec![header],
            StmtKind::Pass | StmtKind::Break | StmtKind::Continue => Vec::new(),
        }
    }
}

fn is_open(t: &Token) -> bool {
    t.kind == TokenKind::Punctuation && matches!(t.text.as_str(), "(" | "[" | "{")
}

fn is_close(t: &Token) -> bool {
    t.kind == TokenKind::Punctuation && matches!(t.text.as_str(), ")" | "]" | "}")
}

/// Token that can end a primary expression a call or subscript attaches to.
fn ends_atom(t: &Token) -> bool {
    t.kind == TokenKind::Identifier || t.is_punct(")") || t.is_punct("]")
}

/// Index of the bracket matching the opener at `open`, searching `..end`.
pub fn matching_close(tokens: &[Token], open: usize, end: usize) -> Option<usize> {
    let mut depth = 0usize;
    for (i, t) in tokens.iter().enumerate().take(end).skip(open) {
        if is_open(t) {
            depth += 1;
        } else if is_close(t) {
            depth -= 1;
            if depth == 0 {
                return Some(i);
            }
        }
    }
    None
}

fn matching_open(tokens: &[Token], lo: usize, close: usize) -> Option<usize> {
    let mut depth = 0usize;
    for i in (lo..=close).rev() {
        let t = &tokens[i];
        if is_close(t) {
            depth += 1;
        } else if is_open(t) {
            depth -= 1;
            if depth == 0 {
                return Some(i);
            }
        }
    }
    None
}

/// Start of the primary chain (`a.b(c)[d].e`) ending at token `j`.
fn chain_start(tokens: &[Token], lo: usize, mut j: usize) -> usize {
    loop {
        let t = &tokens[j];
        if t.kind == TokenKind::Identifier {
            if j >= lo + 2 && tokens[j - 1].is_punct(".") {
                j -= 2;
                continue;
            }
            return j;
        }
        if t.is_punct(")") || t.is_punct("]") {
            match matching_open(tokens, lo, j) {
                Some(o) if o > lo && ends_atom(&tokens[o - 1]) => j = o - 1,
                Some(o) => return o,
                None => return j,
            }
            continue;
        }
        return j;
    }
}

/// Scan `range` of `tokens` for names read and call expressions.
pub fn scan_expr(tokens: &[Token], range: Range<usize>) -> Expr {
    let mut names = Vec::new();
    let mut calls = Vec::new();
    // whether each open bracket is a call's argument list
    let mut stack: Vec<bool> = Vec::new();
    for i in range.clone() {
        let t = &tokens[i];
        let prev = (i > range.start).then(|| &tokens[i - 1]);
        match t.kind {
            TokenKind::Identifier => {
                let attribute = prev.is_some_and(|p| p.is_punct("."));
                let next = tokens.get(i + 1).filter(|_| i + 1 < range.end);
                let keyword_arg = stack.last() == Some(&true) && next.is_some_and(|n| n.is_op("="));
                if !attribute && !keyword_arg {
                    names.push(NameRef {
                        name: t.text.clone(),
                        token: i,
                    });
                }
            }
            TokenKind::Punctuation if is_open(t) => {
                let call = t.text == "(" && prev.is_some_and(ends_atom);
                if call {
                    let start = chain_start(tokens, range.start, i - 1);
                    let end = matching_close(tokens, i, range.end).map_or(range.end, |c| c + 1);
                    let callee = tokens[start..i].iter().map(|t| t.text.as_str()).collect();
                    calls.push(Call {
                        range: start..end,
                        callee,
                    });
                }
                stack.push(call);
            }
            TokenKind::Punctuation if is_close(t) => {
                stack.pop();
            }
            _ => {}
        }
    }
    Expr { range, names, calls }
}

/// Names an assignment (or `for`) target binds: plain names that are only
/// enclosed in grouping brackets and not followed by `.`, `[` or `(`.
/// Everything else in the target is a read.
pub fn target_defs(tokens: &[Token], target: &Expr) -> Vec<NameRef> {
    let range = target.range.clone();
    let mut access_depth = 0usize;
    let mut stack: Vec<bool> = Vec::new();
    let mut defs = Vec::new();
    for i in range.clone() {
        let t = &tokens[i];
        if is_open(t) {
            let access = i > range.start && ends_atom(&tokens[i - 1]);
            if access {
                access_depth += 1;
            }
            stack.push(access);
        } else if is_close(t) {
            if stack.pop() == Some(true) {
                access_depth -= 1;
            }
        } else if t.kind == TokenKind::Identifier && access_depth == 0 {
            let attribute = i > range.start && tokens[i - 1].is_punct(".");
            let next = tokens.get(i + 1).filter(|_| i + 1 < range.end);
            let extended = next.is_some_and(|n| n.is_punct(".") || n.is_punct("[") || n.is_punct("("));
            if !attribute && !extended {
                defs.push(NameRef {
                    name: t.text.clone(),
                    token: i,
                });
            }
        }
    }
    defs
}
