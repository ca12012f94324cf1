//! Deterministic maximal-munch lexer for the indentation-based code subset.
//!
//! The lexer never fails on well-formed UTF-8: characters outside the
//! grammar become single-character operator tokens. Whitespace between
//! tokens (including line indentation) is not tokenized; it is recovered as
//! the gap between consecutive `byte_offset`s. Indentation structure is
//! derived afterwards by [`crate::layout`].

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TokenKind {
    Identifier,
    Keyword,
    Number,
    StringLiteral,
    Operator,
    Punctuation,
    Comment,
    Newline,
    Indent,
    Dedent,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Token {
    pub text: String,
    pub byte_offset: usize,
    /// 1-based.
    pub line: usize,
    /// 1-based, counted in characters.
    pub column: usize,
    pub kind: TokenKind,
}

impl Token {
    pub fn is(&self, kind: TokenKind, text: &str) -> bool {
        self.kind == kind && self.text == text
    }

    pub fn is_punct(&self, text: &str) -> bool {
        self.is(TokenKind::Punctuation, text)
    }

    pub fn is_op(&self, text: &str) -> bool {
        self.is(TokenKind::Operator, text)
    }

    pub fn is_keyword(&self, text: &str) -> bool {
        self.is(TokenKind::Keyword, text)
    }

    /// Trivia tokens carry no program content (comments and line breaks).
    pub fn is_trivia(&self) -> bool {
        matches!(self.kind, TokenKind::Comment | TokenKind::Newline)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum LanguageTag {
    /// Parsed by the built-in subset parser.
    SubsetPy,
    /// Tokenized only; structure comes from an imported CPG.
    External,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct SourceFile {
    pub path: String,
    pub content: String,
    pub language_tag: LanguageTag,
}

impl SourceFile {
    pub fn new(path: impl Into<String>, content: impl Into<String>) -> Self {
        Self {
            path: path.into(),
            content: content.into(),
            language_tag: LanguageTag::SubsetPy,
        }
    }

    pub fn from_bytes(path: impl Into<String>, bytes: &[u8], language_tag: LanguageTag) -> Result<Self> {
        let path = path.into();
        let content = std::str::from_utf8(bytes)
            .map_err(|source| Error::Encoding {
                path: path.clone(),
                source,
            })?
            .to_owned();
        Ok(Self {
            path,
            content,
            language_tag,
        })
    }
}

pub const KEYWORDS: &[&str] = &[
    "False", "None", "True", "and", "as", "assert", "async", "await", "break", "class", "continue",
    "def", "del", "elif", "else", "except", "finally", "for", "from", "global", "if", "import",
    "in", "is", "lambda", "nonlocal", "not", "or", "pass", "raise", "return", "try", "while",
    "with", "yield",
];

pub fn is_keyword(word: &str) -> bool {
    KEYWORDS.binary_search(&word).is_ok()
}

/// Identifier lexical rule: letter or underscore, then letters, digits or
/// underscores.
pub fn is_identifier(word: &str) -> bool {
    let mut chars = word.chars();
    match chars.next() {
        Some(c) if c.is_alphabetic() || c == '_' => chars.all(|c| c.is_alphanumeric() || c == '_'),
        _ => false,
    }
}

const OPERATORS_3: &[&str] = &["**=", "//=", ">>=", "<<=", "..."];
const OPERATORS_2: &[&str] = &[
    "->", ":=", "==", "!=", "<=", ">=", "**", "//", "<<", ">>", "+=", "-=", "*=", "/=", "%=", "&=",
    "|=", "^=", "@=",
];
const PUNCTUATION: &[char] = &['(', ')', '[', ']', '{', '}', ',', ':', ';', '.'];

/// Tokenize raw bytes, rejecting invalid UTF-8.
pub fn tokenize_bytes(path: &str, bytes: &[u8]) -> Result<Vec<Token>> {
    let text = std::str::from_utf8(bytes).map_err(|source| Error::Encoding {
        path: path.to_owned(),
        source,
    })?;
    Ok(tokenize_str(text))
}

pub fn tokenize(source: &SourceFile) -> Vec<Token> {
    tokenize_str(&source.content)
}

pub fn tokenize_str(src: &str) -> Vec<Token> {
    Lexer::new(src).run()
}

struct Lexer<'a> {
    src: &'a str,
    pos: usize,
    line: usize,
    column: usize,
    out: Vec<Token>,
}

impl<'a> Lexer<'a> {
    fn new(src: &'a str) -> Self {
        Self {
            src,
            pos: 0,
            line: 1,
            column: 1,
            out: Vec::new(),
        }
    }

    fn rest(&self) -> &'a str {
        &self.src[self.pos..]
    }

    fn peek(&self) -> Option<char> {
        self.rest().chars().next()
    }

    fn peek_at(&self, n: usize) -> Option<char> {
        self.rest().chars().nth(n)
    }

    /// Advance over `len` bytes, keeping line/column in sync.
    fn advance(&mut self, len: usize) {
        for c in self.src[self.pos..self.pos + len].chars() {
            if c == '\n' {
                self.line += 1;
                self.column = 1;
            } else {
                self.column += 1;
            }
        }
        self.pos += len;
    }

    fn emit(&mut self, len: usize, kind: TokenKind) {
        let token = Token {
            text: self.src[self.pos..self.pos + len].to_owned(),
            byte_offset: self.pos,
            line: self.line,
            column: self.column,
            kind,
        };
        self.advance(len);
        self.out.push(token);
    }

    fn run(mut self) -> Vec<Token> {
        while let Some(c) = self.peek() {
            match c {
                ' ' | '\t' | '\x0c' => self.advance(1),
                '\r' if self.peek_at(1) == Some('\n') => self.emit(2, TokenKind::Newline),
                '\r' => self.advance(1),
                '\n' => self.emit(1, TokenKind::Newline),
                '\\' if self.rest().starts_with("\\\n") => self.advance(2),
                '\\' if self.rest().starts_with("\\\r\n") => self.advance(3),
                '#' => {
                    let len = self.rest().find(['\n', '\r']).unwrap_or(self.rest().len());
                    self.emit(len, TokenKind::Comment);
                }
                '"' | '\'' => {
                    let len = self.string_len(0);
                    self.emit(len, TokenKind::StringLiteral);
                }
                c if c.is_ascii_digit() => {
                    let len = self.number_len();
                    self.emit(len, TokenKind::Number);
                }
                '.' if self.peek_at(1).is_some_and(|c| c.is_ascii_digit()) => {
                    let len = self.number_len();
                    self.emit(len, TokenKind::Number);
                }
                c if c.is_alphabetic() || c == '_' => self.word(),
                _ => self.symbol(c),
            }
        }
        self.out
    }

    fn word(&mut self) {
        let len: usize = self
            .rest()
            .char_indices()
            .find(|&(_, c)| !(c.is_alphanumeric() || c == '_'))
            .map(|(i, _)| i)
            .unwrap_or(self.rest().len());
        let word = &self.rest()[..len];
        let next = self.rest()[len..].chars().next();
        if len <= 2
            && matches!(next, Some('"' | '\''))
            && word.chars().all(|c| "rRbBuUfF".contains(c))
        {
            let total = self.string_len(len);
            self.emit(total, TokenKind::StringLiteral);
            return;
        }
        let kind = if is_keyword(word) {
            TokenKind::Keyword
        } else {
            TokenKind::Identifier
        };
        self.emit(len, kind);
    }

    /// Byte length of a string literal whose opening quote sits at `prefix`
    /// bytes into the remaining input. Unterminated single-line strings end
    /// at the line break; unterminated triple-quoted strings run to EOF.
    fn string_len(&self, prefix: usize) -> usize {
        let rest = self.rest();
        let body = &rest[prefix..];
        let quote = body.chars().next().expect("caller checked quote");
        let triple: String = std::iter::repeat_n(quote, 3).collect();
        if body.starts_with(&triple) {
            let mut i = 3;
            while i < body.len() {
                if body[i..].starts_with('\\') {
                    i += 1 + body[i + 1..].chars().next().map_or(0, char::len_utf8);
                    continue;
                }
                if body[i..].starts_with(&triple) {
                    return prefix + i + 3;
                }
                i += body[i..].chars().next().map_or(1, char::len_utf8);
            }
            return rest.len();
        }
        let mut iter = body.char_indices().skip(1);
        while let Some((i, c)) = iter.next() {
            match c {
                '\\' => {
                    iter.next();
                }
                '\n' | '\r' => return prefix + i,
                c if c == quote => return prefix + i + 1,
                _ => {}
            }
        }
        rest.len()
    }

    fn number_len(&self) -> usize {
        let b = self.rest().as_bytes();
        let digits = |mut i: usize, radix_alnum: bool| {
            while i < b.len()
                && (b[i].is_ascii_digit() || b[i] == b'_' || (radix_alnum && b[i].is_ascii_alphanumeric()))
            {
                i += 1;
            }
            i
        };
        if b.len() > 1 && b[0] == b'0' && matches!(b[1], b'x' | b'X' | b'o' | b'O' | b'b' | b'B') {
            return digits(2, true);
        }
        let mut i = digits(0, false);
        if i < b.len() && b[i] == b'.' {
            i = digits(i + 1, false);
        }
        if i < b.len() && matches!(b[i], b'e' | b'E') {
            let mut j = i + 1;
            if j < b.len() && matches!(b[j], b'+' | b'-') {
                j += 1;
            }
            if j < b.len() && b[j].is_ascii_digit() {
                i = digits(j, false);
            }
        }
        if i < b.len() && matches!(b[i], b'j' | b'J') {
            i += 1;
        }
        i
    }

    fn symbol(&mut self, c: char) {
        let rest = self.rest();
        if let Some(op) = OPERATORS_3.iter().chain(OPERATORS_2).find(|op| rest.starts_with(**op)) {
            self.emit(op.len(), TokenKind::Operator);
        } else if PUNCTUATION.contains(&c) {
            self.emit(1, TokenKind::Punctuation);
        } else {
            self.emit(c.len_utf8(), TokenKind::Operator);
        }
    }
}

/// Rebuild the source text from tokens plus the original gaps.
pub fn reconstruct(src: &str, tokens: &[Token]) -> String {
    let mut out = String::with_capacity(src.len());
    let mut cursor = 0;
    for t in tokens {
        out.push_str(&src[cursor..t.byte_offset]);
        out.push_str(&t.text);
        cursor = t.byte_offset + t.text.len();
    }
    out.push_str(&src[cursor..]);
    out
}
