//! Recursive-descent statement parser over the layout stream.
//!
//! Parsing never fails. Anything outside the subset becomes an
//! [`StmtKind::Opaque`] statement (or a [`StmtKind::Block`] for unknown
//! compound headers) and is reported in [`Ast::diagnostics`].

use std::ops::Range;

use crate::ast::{scan_expr, target_defs, Ast, Branch, Diagnostic, Expr, NameRef, Stmt, StmtKind};
use crate::layout::{layout, Item};
use crate::lexer::{Token, TokenKind};

const AUGMENTED: &[&str] = &[
    "+=", "-=", "*=", "/=", "//=", "%=", "**=", ">>=", "<<=", "&=", "|=", "^=", "@=",
];

/// Parse a chunk's tokens. Indices in the result are relative to `tokens`.
pub fn parse_subset(tokens: &[Token]) -> Ast {
    let mut p = Parser {
        tokens,
        items: layout(tokens),
        pos: 0,
        diagnostics: Vec::new(),
    };
    let body = p.statements(false);
    Ast {
        body,
        diagnostics: p.diagnostics,
    }
}

struct Parser<'t> {
    tokens: &'t [Token],
    items: Vec<Item>,
    pos: usize,
    diagnostics: Vec<Diagnostic>,
}

impl<'t> Parser<'t> {
    fn peek(&self) -> Option<Item> {
        self.items.get(self.pos).copied()
    }

    fn diag(&mut self, range: Range<usize>, message: impl Into<String>) {
        let line = self.tokens.get(range.start).map_or(0, |t| t.line);
        self.diagnostics.push(Diagnostic {
            line,
            range,
            message: message.into(),
        });
    }

    /// Statements until the matching dedent (inside a block) or the end.
    fn statements(&mut self, in_block: bool) -> Vec<Stmt> {
        let mut out = Vec::new();
        while let Some(item) = self.peek() {
            match item {
                Item::Dedent => {
                    self.pos += 1;
                    if in_block {
                        break;
                    }
                }
                Item::Newline => self.pos += 1,
                Item::Indent => {
                    self.pos += 1;
                    let at = self.peek_token().unwrap_or(0);
                    self.diag(at..at + 1, "unexpected indent");
                    out.extend(self.statements(true));
                }
                Item::Tok(_) => self.statement(&mut out),
            }
        }
        out
    }

    fn peek_token(&self) -> Option<usize> {
        self.items[self.pos..].iter().find_map(|it| match it {
            Item::Tok(i) => Some(*i),
            _ => None,
        })
    }

    /// Consume one logical line, returning its token indices.
    fn line(&mut self) -> Vec<usize> {
        let mut toks = Vec::new();
        while let Some(item) = self.peek() {
            self.pos += 1;
            match item {
                Item::Tok(i) => toks.push(i),
                Item::Newline => break,
                Item::Indent | Item::Dedent => unreachable!("layout emits markers only at line starts"),
            }
        }
        toks
    }

    fn first_word(&self) -> Option<&'t str> {
        match self.peek() {
            Some(Item::Tok(i)) if self.tokens[i].kind == TokenKind::Keyword => Some(self.tokens[i].text.as_str()),
            _ => None,
        }
    }

    fn statement(&mut self, out: &mut Vec<Stmt>) {
        let line = self.line();
        let first = &self.tokens[line[0]];
        let compound = first.kind == TokenKind::Keyword
            && matches!(
                first.text.as_str(),
                "def" | "class" | "if" | "elif" | "else" | "while" | "for" | "try" | "except" | "finally" | "with" | "async"
            );
        if compound {
            if let Some(colon) = self.header_colon(&line) {
                out.push(self.compound(&line, colon));
                return;
            }
        }
        self.simple_line(&line, out);
    }

    /// Position in `line` of the colon closing a compound header.
    fn header_colon(&self, line: &[usize]) -> Option<usize> {
        let mut depth = 0usize;
        let mut lambdas = 0usize;
        for (k, &i) in line.iter().enumerate() {
            let t = &self.tokens[i];
            match t.text.as_str() {
                "(" | "[" | "{" if t.kind == TokenKind::Punctuation => depth += 1,
                ")" | "]" | "}" if t.kind == TokenKind::Punctuation => depth = depth.saturating_sub(1),
                "lambda" if t.kind == TokenKind::Keyword && depth == 0 => lambdas += 1,
                ":" if t.kind == TokenKind::Punctuation && depth == 0 => {
                    if lambdas > 0 {
                        lambdas -= 1;
                    } else {
                        return Some(k);
                    }
                }
                _ => {}
            }
        }
        None
    }

    /// Body after a header colon: an indented block, or inline statements.
    fn suite(&mut self, line: &[usize], colon: usize) -> Vec<Stmt> {
        let mut body = Vec::new();
        if colon + 1 < line.len() {
            self.simple_line(&line[colon + 1..], &mut body);
            return body;
        }
        if self.peek() == Some(Item::Indent) {
            self.pos += 1;
            return self.statements(true);
        }
        let at = line[colon];
        self.diag(at..at + 1, "expected an indented block");
        body
    }

    fn range(&self, part: &[usize]) -> Range<usize> {
        match (part.first(), part.last()) {
            (Some(&a), Some(&b)) => a..b + 1,
            _ => 0..0,
        }
    }

    fn expr(&self, part: &[usize]) -> Expr {
        let range = self.range(part);
        if range.is_empty() {
            let at = part.first().copied().unwrap_or(0);
            return Expr {
                range: at..at,
                ..Expr::default()
            };
        }
        scan_expr(self.tokens, range)
    }

    fn compound(&mut self, line: &[usize], colon: usize) -> Stmt {
        let header = &line[..=colon];
        let range = self.range(header);
        let start = line[0];
        let lineno = self.tokens[start].line;
        let mut word = self.tokens[start].text.as_str();
        let mut head = 1;
        if word == "async" {
            if let Some(w @ ("def" | "for" | "with")) = line.get(1).map(|&i| self.tokens[i].text.as_str()) {
                word = w;
                head = 2;
            }
        }
        let stmt = |kind| Stmt {
            range: range.clone(),
            line: lineno,
            kind,
        };
        match word {
            "def" => {
                let (name, params, header_expr) = self.def_header(&line[head..colon]);
                let body = self.suite(line, colon);
                stmt(StmtKind::FunctionDef {
                    name,
                    params,
                    header: header_expr,
                    body,
                })
            }
            "class" => {
                let inner = &line[head..colon];
                let name = inner.first().map(|&i| self.tokens[i].text.clone()).unwrap_or_default();
                let bases = if inner.len() > 2 && self.tokens[inner[1]].is_punct("(") {
                    self.expr(&inner[2..inner.len() - 1])
                } else {
                    self.expr(&[])
                };
                let body = self.suite(line, colon);
                stmt(StmtKind::ClassDef { name, bases, body })
            }
            "if" | "elif" => {
                if word == "elif" {
                    self.diag(range.clone(), "elif without preceding if");
                }
                let mut branches = vec![Branch {
                    header: range.clone(),
                    line: lineno,
                    cond: self.expr(&line[1..colon]),
                    body: self.suite(line, colon),
                }];
                let mut orelse = Vec::new();
                loop {
                    match self.first_word() {
                        Some("elif") => {
                            let next = self.line();
                            let Some(c) = self.header_colon(&next) else {
                                self.simple_line(&next, &mut orelse);
                                break;
                            };
                            let header = self.range(&next[..=c]);
                            branches.push(Branch {
                                line: self.tokens[next[0]].line,
                                header,
                                cond: self.expr(&next[1..c]),
                                body: self.suite(&next, c),
                            });
                        }
                        Some("else") => {
                            orelse = self.else_suite();
                            break;
                        }
                        _ => break,
                    }
                }
                stmt(StmtKind::If { branches, orelse })
            }
            "while" => {
                let cond = self.expr(&line[1..colon]);
                let body = self.suite(line, colon);
                let orelse = self.optional_else();
                stmt(StmtKind::While { cond, body, orelse })
            }
            "for" => {
                let inner = &line[head..colon];
                let split = inner.iter().position(|&i| self.tokens[i].is_keyword("in"));
                let (target_part, iter_part) = match split {
                    Some(k) => (&inner[..k], &inner[k + 1..]),
                    None => {
                        self.diag(range.clone(), "for without in");
                        (&inner[..0], inner)
                    }
                };
                let target = self.expr(target_part);
                let defs = target_defs(self.tokens, &target);
                let iter = self.expr(iter_part);
                let body = self.suite(line, colon);
                let orelse = self.optional_else();
                stmt(StmtKind::For {
                    target,
                    defs,
                    iter,
                    body,
                    orelse,
                })
            }
            other => {
                self.diag(range.clone(), format!("unsupported compound statement `{other}`"));
                let header_expr = self.expr(&line[head..colon]);
                let body = self.suite(line, colon);
                stmt(StmtKind::Block {
                    header: header_expr,
                    body,
                })
            }
        }
    }

    fn optional_else(&mut self) -> Vec<Stmt> {
        if self.first_word() == Some("else") {
            self.else_suite()
        } else {
            Vec::new()
        }
    }

    fn else_suite(&mut self) -> Vec<Stmt> {
        let next = self.line();
        match self.header_colon(&next) {
            Some(c) => self.suite(&next, c),
            None => {
                let mut out = Vec::new();
                self.simple_line(&next, &mut out);
                out
            }
        }
    }

    /// `name ( params ) [-> annotation]` between `def` and the colon.
    fn def_header(&mut self, part: &[usize]) -> (String, Vec<NameRef>, Expr) {
        let name = part.first().map(|&i| self.tokens[i].text.clone()).unwrap_or_default();
        let open = part.iter().position(|&i| self.tokens[i].is_punct("("));
        let Some(open) = open else {
            if let Some(&first) = part.first() {
                self.diag(first..first + 1, "function header without parameter list");
            }
            return (name, Vec::new(), self.expr(&[]));
        };
        let mut depth = 0usize;
        let mut close = part.len();
        for (k, &i) in part.iter().enumerate().skip(open) {
            let t = &self.tokens[i];
            if t.is_punct("(") || t.is_punct("[") || t.is_punct("{") {
                depth += 1;
            } else if t.is_punct(")") || t.is_punct("]") || t.is_punct("}") {
                depth -= 1;
                if depth == 0 {
                    close = k;
                    break;
                }
            }
        }
        let inner = &part[open + 1..close.min(part.len())];
        let mut params = Vec::new();
        let mut expect_name = true;
        let mut depth = 0usize;
        for &i in inner {
            let t = &self.tokens[i];
            if t.is_punct("(") || t.is_punct("[") || t.is_punct("{") {
                depth += 1;
            } else if t.is_punct(")") || t.is_punct("]") || t.is_punct("}") {
                depth = depth.saturating_sub(1);
            } else if depth == 0 && t.is_punct(",") {
                expect_name = true;
            } else if depth == 0 && (t.is_op("*") || t.is_op("**") || t.is_op("/")) {
                // star markers keep the next name a parameter
            } else if expect_name && t.kind == TokenKind::Identifier {
                params.push(NameRef {
                    name: t.text.clone(),
                    token: i,
                });
                expect_name = false;
            } else {
                expect_name = false;
            }
        }
        (name, params, self.expr(inner))
    }

    /// Split a logical line on top-level `;` and parse each simple statement.
    fn simple_line(&mut self, line: &[usize], out: &mut Vec<Stmt>) {
        let mut depth = 0usize;
        let mut start = 0;
        for k in 0..=line.len() {
            let split = k == line.len() || {
                let t = &self.tokens[line[k]];
                if t.is_punct("(") || t.is_punct("[") || t.is_punct("{") {
                    depth += 1;
                } else if t.is_punct(")") || t.is_punct("]") || t.is_punct("}") {
                    depth = depth.saturating_sub(1);
                }
                depth == 0 && t.is_punct(";")
            };
            if split {
                if k > start {
                    out.push(self.simple(&line[start..k]));
                }
                start = k + 1;
            }
        }
    }

    fn simple(&mut self, part: &[usize]) -> Stmt {
        let range = self.range(part);
        let first = &self.tokens[part[0]];
        let line = first.line;
        let stmt = |kind| Stmt {
            range: range.clone(),
            line,
            kind,
        };
        if first.kind == TokenKind::Keyword {
            match first.text.as_str() {
                "return" => {
                    let value = (part.len() > 1).then(|| self.expr(&part[1..]));
                    return stmt(StmtKind::Return { value });
                }
                "pass" if part.len() == 1 => return stmt(StmtKind::Pass),
                "break" if part.len() == 1 => return stmt(StmtKind::Break),
                "continue" if part.len() == 1 => return stmt(StmtKind::Continue),
                "None" | "True" | "False" | "not" | "lambda" | "await" => {}
                other => {
                    self.diag(range.clone(), format!("unsupported statement `{other}`"));
                    return stmt(StmtKind::Opaque(self.expr(part)));
                }
            }
        }
        if let Some(kind) = self.assignment(part) {
            return stmt(kind);
        }
        let e = self.expr(part);
        stmt(StmtKind::Expr(e))
    }

    fn assignment(&mut self, part: &[usize]) -> Option<StmtKind> {
        let mut depth = 0usize;
        let mut eqs = Vec::new();
        let mut aug = None;
        let mut lambda = false;
        for (k, &i) in part.iter().enumerate() {
            let t = &self.tokens[i];
            if t.is_punct("(") || t.is_punct("[") || t.is_punct("{") {
                depth += 1;
            } else if t.is_punct(")") || t.is_punct("]") || t.is_punct("}") {
                depth = depth.saturating_sub(1);
            } else if depth == 0 && t.is_keyword("lambda") {
                lambda = true;
            } else if depth == 0 && !lambda && t.kind == TokenKind::Operator {
                if t.text == "=" {
                    eqs.push(k);
                } else if AUGMENTED.contains(&t.text.as_str()) && eqs.is_empty() {
                    aug = Some(k);
                    break;
                }
            }
        }
        if let Some(k) = aug {
            let target = self.expr(&part[..k]);
            let defs = target_defs(self.tokens, &target);
            let value = self.expr(&part[k + 1..]);
            return Some(StmtKind::Assign {
                targets: vec![target],
                defs,
                value,
                augmented: true,
            });
        }
        let last = *eqs.last()?;
        let mut targets = Vec::new();
        let mut defs = Vec::new();
        let mut begin = 0;
        for &k in &eqs {
            let mut seg = &part[begin..k];
            // annotated target: `name: type = value`
            if begin == 0 {
                if let Some(c) = seg.iter().position(|&i| self.tokens[i].is_punct(":")) {
                    seg = &seg[..c];
                }
            }
            let target = self.expr(seg);
            defs.extend(target_defs(self.tokens, &target));
            targets.push(target);
            begin = k + 1;
        }
        let value = self.expr(&part[last + 1..]);
        Some(StmtKind::Assign {
            targets,
            defs,
            value,
            augmented: false,
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::lexer::tokenize_str;

    fn parse(src: &str) -> Ast {
        parse_subset(&tokenize_str(src))
    }

    fn kinds(stmts: &[Stmt]) -> Vec<&'static str> {
        stmts
            .iter()
            .map(|s| match s.kind {
                StmtKind::FunctionDef { .. } => "def",
                StmtKind::ClassDef { .. } => "class",
                StmtKind::If { .. } => "if",
                StmtKind::While { .. } => "while",
                StmtKind::For { .. } => "for",
                StmtKind::Return { .. } => "return",
                StmtKind::Assign { .. } => "assign",
                StmtKind::Expr(_) => "expr",
                StmtKind::Pass => "pass",
                StmtKind::Break => "break",
                StmtKind::Continue => "continue",
                StmtKind::Block { .. } => "block",
                StmtKind::Opaque(_) => "opaque",
            })
            .collect()
    }

    #[test]
    fn function_with_return() {
        let ast = parse("def f():\n  return 1");
        assert_eq!(kinds(&ast.body), ["def"]);
        let StmtKind::FunctionDef { name, body, .. } = &ast.body[0].kind else {
            panic!()
        };
        assert_eq!(name, "f");
        assert_eq!(kinds(body), ["return"]);
        assert!(ast.diagnostics.is_empty());
    }

    #[test]
    fn two_assignments() {
        let ast = parse("x = 1\ny = x");
        assert_eq!(kinds(&ast.body), ["assign", "assign"]);
    }

    #[test]
    fn empty_source() {
        assert_eq!(parse(""), Ast::default());
    }

    #[test]
    fn if_elif_else_chain() {
        let ast = parse("if a:\n    x = 1\nelif b:\n    pass\nelse:\n    return x\ny = 2\n");
        assert_eq!(kinds(&ast.body), ["if", "assign"]);
        let StmtKind::If { branches, orelse } = &ast.body[0].kind else {
            panic!()
        };
        assert_eq!(branches.len(), 2);
        assert_eq!(kinds(orelse), ["return"]);
        assert_eq!(branches[1].line, 3);
    }

    #[test]
    fn params_and_defaults() {
        let ast = parse("def f(self, a, *args, b: int = g(1), **kw) -> T:\n    pass\n");
        let StmtKind::FunctionDef { params, header, .. } = &ast.body[0].kind else {
            panic!()
        };
        let names: Vec<&str> = params.iter().map(|p| p.name.as_str()).collect();
        assert_eq!(names, ["self", "a", "args", "b", "kw"]);
        assert_eq!(header.calls.len(), 1);
    }

    #[test]
    fn assignment_forms() {
        let ast = parse("a = b = c\nx.y[i] += 1\nn: int = 0\nf(k=1)\n");
        assert_eq!(kinds(&ast.body), ["assign", "assign", "assign", "expr"]);
        let defs = |s: &Stmt| match &s.kind {
            StmtKind::Assign { defs, .. } => defs.iter().map(|d| d.name.clone()).collect::<Vec<_>>(),
            _ => panic!(),
        };
        assert_eq!(defs(&ast.body[0]), ["a", "b"]);
        assert!(defs(&ast.body[1]).is_empty());
        assert_eq!(defs(&ast.body[2]), ["n"]);
    }

    #[test]
    fn inline_suite_and_semicolons() {
        let ast = parse("if a: x = 1; return x\n");
        let StmtKind::If { branches, .. } = &ast.body[0].kind else {
            panic!()
        };
        assert_eq!(kinds(&branches[0].body), ["assign", "return"]);
    }

    #[test]
    fn unsupported_statements_degrade() {
        let ast = parse("import os\ntry:\n    f()\nexcept E:\n    pass\n");
        assert_eq!(kinds(&ast.body), ["opaque", "block", "block"]);
        assert_eq!(ast.diagnostics.len(), 3);
    }

    #[test]
    fn loops_with_targets() {
        let ast = parse("for i, (a, b) in enumerate(xs):\n    continue\nwhile n > 0:\n    break\n");
        assert_eq!(kinds(&ast.body), ["for", "while"]);
        let StmtKind::For { defs, iter, .. } = &ast.body[0].kind else {
            panic!()
        };
        let d: Vec<&str> = defs.iter().map(|d| d.name.as_str()).collect();
        assert_eq!(d, ["i", "a", "b"]);
        assert_eq!(iter.calls[0].callee, "enumerate");
    }

    #[test]
    fn split_chunk_starting_mid_block() {
        let ast = parse("        y = 2\n        return y\n    z = 3\n");
        assert_eq!(kinds(&ast.body), ["assign", "return", "assign"]);
    }

    #[test]
    fn missing_block_is_reported() {
        let ast = parse("def f():\n");
        assert_eq!(ast.functions(), 1);
        assert_eq!(ast.diagnostics.len(), 1);
    }
}
