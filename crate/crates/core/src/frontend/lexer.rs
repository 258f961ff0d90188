//! Hand-written lexer for the PHP subset we analyse.
//!
//! The lexer is lossless: every byte of the input belongs to exactly one
//! token, so concatenating token texts reproduces the source. Inline HTML
//! outside `<?php ... ?>` regions is kept as [`TokenKind::InlineHtml`].

use std::fmt;

use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum TokenKind {
    Keyword,
    Identifier,
    Variable,
    ConstantLiteral,
    Operator,
    Punctuation,
    Comment,
    Whitespace,
    PhpTag,
    InlineHtml,
}

impl TokenKind {
    /// Whitespace and comments carry no program meaning.
    pub fn is_trivia(self) -> bool {
        matches!(self, TokenKind::Whitespace | TokenKind::Comment)
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct RawToken {
    pub kind: TokenKind,
    pub text: String,
    /// 1-based line of the first character.
    pub line: usize,
    /// 1-based column (in characters) of the first character.
    pub col: usize,
    /// Byte offset of the token in the source.
    pub offset: usize,
}

impl RawToken {
    pub fn is(&self, kind: TokenKind, text: &str) -> bool {
        self.kind == kind && self.text == text
    }

    pub fn is_punct(&self, text: &str) -> bool {
        self.is(TokenKind::Punctuation, text)
    }

    pub fn is_op(&self, text: &str) -> bool {
        self.is(TokenKind::Operator, text)
    }

    /// Keyword comparison is case-insensitive, as in PHP.
    pub fn is_keyword(&self, kw: &str) -> bool {
        self.kind == TokenKind::Keyword && self.text.eq_ignore_ascii_case(kw)
    }

    pub fn end_offset(&self) -> usize {
        self.offset + self.text.len()
    }

    /// Line on which the token ends (tokens such as heredocs span lines).
    pub fn end_line(&self) -> usize {
        self.line + self.text.matches('\n').count()
    }
}

impl fmt::Display for RawToken {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{:?}({})", self.kind, self.text)
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
#[error("lex error at {line}:{col}: {message}")]
pub struct LexError {
    pub line: usize,
    pub col: usize,
    pub message: String,
}

/// Where lexing starts: `Html` for whole files, `Php` for code fragments
/// (function bodies) that carry no open tag.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum LexMode {
    Html,
    Php,
}

pub const KEYWORDS: &[&str] = &[
    "abstract",
    "and",
    "array",
    "as",
    "break",
    "callable",
    "case",
    "catch",
    "class",
    "clone",
    "const",
    "continue",
    "declare",
    "default",
    "die",
    "do",
    "echo",
    "else",
    "elseif",
    "empty",
    "enddeclare",
    "endfor",
    "endforeach",
    "endif",
    "endswitch",
    "endwhile",
    "eval",
    "exit",
    "extends",
    "false",
    "final",
    "finally",
    "fn",
    "for",
    "foreach",
    "function",
    "global",
    "goto",
    "if",
    "implements",
    "include",
    "include_once",
    "instanceof",
    "insteadof",
    "interface",
    "isset",
    "list",
    "match",
    "namespace",
    "new",
    "null",
    "or",
    "parent",
    "print",
    "private",
    "protected",
    "public",
    "readonly",
    "require",
    "require_once",
    "return",
    "self",
    "static",
    "switch",
    "throw",
    "trait",
    "true",
    "try",
    "unset",
    "use",
    "var",
    "while",
    "xor",
    "yield",
];

pub fn is_keyword(word: &str) -> bool {
    KEYWORDS.iter().any(|k| k.eq_ignore_ascii_case(word))
}

const OPERATORS: &[&str] = &[
    "<<=", ">>=", "**=", "...", "<=>", "===", "!==", "??=", "?->", "<<", ">>", "<=", ">=", "==", "!=", "<>", "&&",
    "||", "++", "--", "+=", "-=", "*=", "/=", ".=", "%=", "&=", "|=", "^=", "->", "=>", "::", "??", "**", "+", "-",
    "*", "/", "%", "=", "<", ">", "!", ".", "&", "|", "^", "~", "?", ":", "@", "$",
];

const PUNCTUATION: &[u8] = b";,()[]{}\\";

const CASTS: &[&str] =
    &["int", "integer", "bool", "boolean", "float", "double", "real", "string", "array", "object", "unset", "binary"];

/// Lex a whole PHP file (starts in HTML mode).
pub fn lex(source: &str) -> Result<Vec<RawToken>, LexError> {
    lex_with_mode(source, LexMode::Html)
}

/// Lex a code fragment that has no leading `<?php` tag. A fragment that does
/// start with an open tag is lexed as a file.
pub fn lex_fragment(source: &str) -> Result<Vec<RawToken>, LexError> {
    if source.trim_start().starts_with("<?") {
        lex_with_mode(source, LexMode::Html)
    } else {
        lex_with_mode(source, LexMode::Php)
    }
}

pub fn lex_with_mode(source: &str, mode: LexMode) -> Result<Vec<RawToken>, LexError> {
    let mut lexer = Lexer::new(source);
    lexer.run(mode)?;
    Ok(lexer.tokens)
}

struct Lexer<'a> {
    src: &'a str,
    bytes: &'a [u8],
    pos: usize,
    line: usize,
    col: usize,
    tokens: Vec<RawToken>,
}

fn is_ident_start(b: u8) -> bool {
    b.is_ascii_alphabetic() || b == b'_' || b >= 0x80
}

fn is_ident_char(b: u8) -> bool {
    b.is_ascii_alphanumeric() || b == b'_' || b >= 0x80
}

impl<'a> Lexer<'a> {
    fn new(src: &'a str) -> Self {
        Lexer { src, bytes: src.as_bytes(), pos: 0, line: 1, col: 1, tokens: Vec::new() }
    }

    fn peek(&self, ahead: usize) -> Option<u8> {
        self.bytes.get(self.pos + ahead).copied()
    }

    fn rest(&self) -> &'a str {
        &self.src[self.pos..]
    }

    fn error(&self, message: impl Into<String>) -> LexError {
        LexError { line: self.line, col: self.col, message: message.into() }
    }

    fn error_at(&self, offset: usize, message: impl Into<String>) -> LexError {
        let (line, col) = position_of(self.src, offset);
        LexError { line, col, message: message.into() }
    }

    /// Emit a token covering `len` bytes from the current position.
    fn emit(&mut self, kind: TokenKind, len: usize) {
        let text = &self.src[self.pos..self.pos + len];
        self.tokens.push(RawToken { kind, text: text.to_string(), line: self.line, col: self.col, offset: self.pos });
        for ch in text.chars() {
            if ch == '\n' {
                self.line += 1;
                self.col = 1;
            } else {
                self.col += 1;
            }
        }
        self.pos += len;
    }

    fn run(&mut self, mode: LexMode) -> Result<(), LexError> {
        let mut in_php = mode == LexMode::Php;
        while self.pos < self.bytes.len() {
            if in_php {
                in_php = self.php_token()?;
            } else {
                self.html_segment();
                in_php = true;
            }
        }
        Ok(())
    }

    /// Consume inline HTML up to (and including) the next open tag.
    fn html_segment(&mut self) {
        let rest = self.rest();
        let mut search = 0;
        loop {
            match rest[search..].find("<?") {
                None => {
                    if !rest.is_empty() {
                        self.emit(TokenKind::InlineHtml, rest.len());
                    }
                    return;
                }
                Some(i) => {
                    let at = search + i;
                    if let Some(tag_len) = open_tag_len(&rest[at..]) {
                        if at > 0 {
                            self.emit(TokenKind::InlineHtml, at);
                        }
                        self.emit(TokenKind::PhpTag, tag_len);
                        return;
                    }
                    search = at + 2;
                }
            }
        }
    }

    /// Lex one token in PHP mode. Returns false when a close tag switches
    /// back to HTML.
    fn php_token(&mut self) -> Result<bool, LexError> {
        let b = self.bytes[self.pos];
        let rest = self.rest();

        if b.is_ascii_whitespace() {
            let len = rest.bytes().take_while(|c| c.is_ascii_whitespace()).count();
            self.emit(TokenKind::Whitespace, len);
            return Ok(true);
        }
        if rest.starts_with("?>") {
            self.emit(TokenKind::PhpTag, 2);
            return Ok(false);
        }
        if rest.starts_with("//") || (b == b'#' && !rest.starts_with("#[")) {
            self.emit(TokenKind::Comment, line_comment_len(rest));
            return Ok(true);
        }
        if rest.starts_with("#[") {
            self.emit(TokenKind::Punctuation, 2);
            return Ok(true);
        }
        if let Some(body) = rest.strip_prefix("/*") {
            match body.find("*/") {
                Some(end) => self.emit(TokenKind::Comment, end + 4),
                None => return Err(self.error("unterminated comment")),
            }
            return Ok(true);
        }
        if b == b'$' && self.peek(1).is_some_and(is_ident_start) {
            let len = 1 + ident_len(&rest.as_bytes()[1..]);
            self.emit(TokenKind::Variable, len);
            return Ok(true);
        }
        if is_ident_start(b) {
            let len = ident_len(rest.as_bytes());
            let word = &rest[..len];
            if word.eq_ignore_ascii_case("__halt_compiler") {
                // Everything after the halt call is raw data.
                self.emit(TokenKind::Identifier, len);
                let remaining = self.bytes.len() - self.pos;
                if remaining > 0 {
                    self.emit(TokenKind::InlineHtml, remaining);
                }
                return Ok(true);
            }
            let kind = if is_keyword(word) { TokenKind::Keyword } else { TokenKind::Identifier };
            self.emit(kind, len);
            return Ok(true);
        }
        if b.is_ascii_digit() || (b == b'.' && self.peek(1).is_some_and(|c| c.is_ascii_digit())) {
            let len = number_len(rest.as_bytes());
            self.emit(TokenKind::ConstantLiteral, len);
            return Ok(true);
        }
        if b == b'\'' {
            let len = self.single_quoted_len()?;
            self.emit(TokenKind::ConstantLiteral, len);
            return Ok(true);
        }
        if b == b'"' {
            self.double_quoted(b'"')?;
            return Ok(true);
        }
        if b == b'`' {
            self.double_quoted(b'`')?;
            return Ok(true);
        }
        if rest.starts_with("<<<") {
            if let Some(len) = self.heredoc_len()? {
                self.emit(TokenKind::ConstantLiteral, len);
                return Ok(true);
            }
        }
        if b == b'(' {
            if let Some(len) = cast_len(rest) {
                self.emit(TokenKind::Operator, len);
                return Ok(true);
            }
        }
        if PUNCTUATION.contains(&b) {
            self.emit(TokenKind::Punctuation, 1);
            return Ok(true);
        }
        if let Some(op) = OPERATORS.iter().find(|op| rest.starts_with(**op)) {
            self.emit(TokenKind::Operator, op.len());
            return Ok(true);
        }
        let ch = rest.chars().next().unwrap_or('?');
        Err(self.error(format!("unrecognized character {ch:?}")))
    }

    fn single_quoted_len(&self) -> Result<usize, LexError> {
        let bytes = &self.bytes[self.pos..];
        let mut i = 1;
        while i < bytes.len() {
            match bytes[i] {
                b'\\' => i += 2,
                b'\'' => return Ok(i + 1),
                _ => i += 1,
            }
        }
        Err(self.error("unterminated string literal"))
    }

    /// Double-quoted and backtick strings. A string without interpolation is
    /// a single literal; otherwise it is split into the quote characters,
    /// literal runs, and the interpolated variable expressions.
    fn double_quoted(&mut self, quote: u8) -> Result<(), LexError> {
        let start = self.pos;
        let bytes = self.bytes;
        let mut i = start + 1;
        let mut interpolates = false;
        let end = loop {
            match bytes.get(i) {
                None => return Err(self.error_at(start, "unterminated string literal")),
                Some(b'\\') => i += 2,
                Some(&c) if c == quote => break i,
                Some(b'$') if bytes.get(i + 1).is_some_and(|&c| is_ident_start(c) || c == b'{') => {
                    interpolates = true;
                    i += 1;
                }
                Some(b'{') if bytes.get(i + 1) == Some(&b'$') => {
                    interpolates = true;
                    i += 1;
                }
                Some(_) => i += 1,
            }
        };
        if !interpolates {
            self.emit(TokenKind::ConstantLiteral, end + 1 - start);
            return Ok(());
        }

        self.emit(TokenKind::Punctuation, 1);
        let mut lit_start = self.pos;
        while self.pos < end {
            let b = self.bytes[self.pos];
            let next = self.bytes.get(self.pos + 1).copied();
            let is_var = b == b'$' && next.is_some_and(is_ident_start);
            let is_brace = (b == b'{' && next == Some(b'$')) || (b == b'$' && next == Some(b'{'));
            if b == b'\\' {
                self.pos += 2;
                continue;
            }
            if !(is_var || is_brace) {
                self.pos += 1;
                continue;
            }
            // flush the literal run before the interpolation
            let run = self.pos - lit_start;
            if run > 0 {
                self.pos = lit_start;
                self.emit(TokenKind::ConstantLiteral, run);
            }
            if is_var {
                self.simple_interpolation(end);
            } else {
                self.complex_interpolation(end)?;
            }
            lit_start = self.pos;
        }
        let run = end - lit_start;
        if run > 0 {
            self.pos = lit_start;
            self.emit(TokenKind::ConstantLiteral, run);
        }
        self.pos = end;
        self.emit(TokenKind::Punctuation, 1);
        Ok(())
    }

    /// `$name`, `$name[key]`, `$name->prop` inside a string.
    fn simple_interpolation(&mut self, end: usize) {
        let len = 1 + ident_len(&self.bytes[self.pos + 1..end]);
        self.emit(TokenKind::Variable, len);
        if self.pos < end && self.bytes[self.pos] == b'[' {
            if let Some(close) = self.src[self.pos..end].find(']') {
                self.emit(TokenKind::Punctuation, 1);
                let key = &self.src[self.pos..self.pos + close - 1];
                if !key.is_empty() {
                    let kind = if key.starts_with('$') {
                        TokenKind::Variable
                    } else if key.bytes().all(|c| c.is_ascii_digit() || c == b'-') || key.starts_with('\'') {
                        TokenKind::ConstantLiteral
                    } else {
                        TokenKind::Identifier
                    };
                    self.emit(kind, key.len());
                }
                self.emit(TokenKind::Punctuation, 1);
            }
        } else if self.src[self.pos..end].starts_with("->")
            && self.bytes.get(self.pos + 2).is_some_and(|&c| is_ident_start(c))
        {
            self.emit(TokenKind::Operator, 2);
            let len = ident_len(&self.bytes[self.pos..end]);
            self.emit(TokenKind::Identifier, len);
        }
    }

    /// `{$expr}` or `${expr}`: lex the embedded expression as PHP code.
    fn complex_interpolation(&mut self, end: usize) -> Result<(), LexError> {
        let opener = if self.bytes[self.pos] == b'{' { 1 } else { 2 };
        self.emit(TokenKind::Punctuation, opener);
        let mut depth = 1usize;
        while self.pos < end {
            match self.bytes[self.pos] {
                b'{' => depth += 1,
                b'}' => {
                    depth -= 1;
                    if depth == 0 {
                        self.emit(TokenKind::Punctuation, 1);
                        return Ok(());
                    }
                }
                _ => {}
            }
            let before = self.tokens.len();
            self.php_token()?;
            if self.pos > end {
                return Err(self.error("malformed string interpolation"));
            }
            debug_assert!(self.tokens.len() > before);
        }
        Err(self.error("unterminated string interpolation"))
    }

    /// Heredoc / nowdoc as a single literal. `None` if `<<<` is not followed
    /// by a heredoc label (it is then lexed as operators).
    fn heredoc_len(&self) -> Result<Option<usize>, LexError> {
        let rest = self.rest();
        let after = rest[3..].trim_start_matches([' ', '\t']);
        let skipped = rest.len() - 3 - after.len();
        let (label, quoted) = match after.as_bytes().first() {
            Some(b'\'') | Some(b'"') => {
                let q = after.as_bytes()[0];
                let n = ident_len(&after.as_bytes()[1..]);
                if after.as_bytes().get(1 + n) != Some(&q) {
                    return Ok(None);
                }
                (&after[1..1 + n], 2)
            }
            Some(&c) if is_ident_start(c) => (&after[..ident_len(after.as_bytes())], 0),
            _ => return Ok(None),
        };
        if label.is_empty() {
            return Ok(None);
        }
        let header = 3 + skipped + label.len() + quoted;
        let Some(nl) = rest[header..].find('\n') else {
            return Ok(None);
        };
        let mut line_start = header + nl + 1;
        while line_start <= rest.len() {
            let line_end = rest[line_start..].find('\n').map_or(rest.len(), |i| line_start + i);
            let line = &rest[line_start..line_end];
            let trimmed = line.trim_start_matches([' ', '\t']);
            if let Some(tail) = trimmed.strip_prefix(label) {
                if tail.as_bytes().first().is_none_or(|&c| !is_ident_char(c)) {
                    let indent = line.len() - trimmed.len();
                    return Ok(Some(line_start + indent + label.len()));
                }
            }
            if line_end == rest.len() {
                break;
            }
            line_start = line_end + 1;
        }
        Err(self.error("unterminated heredoc"))
    }
}

fn open_tag_len(s: &str) -> Option<usize> {
    let b = s.as_bytes();
    if b.len() >= 5 && s[..5].eq_ignore_ascii_case("<?php") {
        if b.get(5).is_none_or(|c| c.is_ascii_whitespace()) {
            return Some(5);
        }
        return None;
    }
    if s.starts_with("<?=") {
        return Some(3);
    }
    if b.len() == 2 || b.get(2).is_some_and(|c| c.is_ascii_whitespace()) {
        return Some(2);
    }
    None
}

fn ident_len(bytes: &[u8]) -> usize {
    bytes.iter().take_while(|&&c| is_ident_char(c)).count()
}

/// Line comments stop before a newline or a close tag.
fn line_comment_len(s: &str) -> usize {
    let nl = s.find('\n').unwrap_or(s.len());
    let tag = s.find("?>").unwrap_or(s.len());
    nl.min(tag)
}

fn number_len(b: &[u8]) -> usize {
    if b.len() > 1 && b[0] == b'0' && matches!(b[1], b'x' | b'X' | b'b' | b'B' | b'o' | b'O') {
        return 2 + b[2..].iter().take_while(|c| c.is_ascii_hexdigit() || **c == b'_').count();
    }
    let mut i = b.iter().take_while(|c| c.is_ascii_digit() || **c == b'_').count();
    if b.get(i) == Some(&b'.') && b.get(i + 1).is_none_or(|c| c.is_ascii_digit()) {
        i += 1;
        i += b[i..].iter().take_while(|c| c.is_ascii_digit() || **c == b'_').count();
    }
    if matches!(b.get(i), Some(b'e') | Some(b'E')) {
        let mut j = i + 1;
        if matches!(b.get(j), Some(b'+') | Some(b'-')) {
            j += 1;
        }
        if b.get(j).is_some_and(|c| c.is_ascii_digit()) {
            i = j + b[j..].iter().take_while(|c| c.is_ascii_digit()).count();
        }
    }
    i
}

/// `(int)`, `( string )` and friends are single cast operators.
fn cast_len(s: &str) -> Option<usize> {
    let inner = s[1..].trim_start_matches([' ', '\t']);
    let word_len = ident_len(inner.as_bytes());
    let word = &inner[..word_len];
    if !CASTS.iter().any(|c| c.eq_ignore_ascii_case(word)) {
        return None;
    }
    let after = inner[word_len..].trim_start_matches([' ', '\t']);
    if !after.starts_with(')') {
        return None;
    }
    Some(s.len() - after.len() + 1)
}

/// 1-based (line, column) of a byte offset.
pub fn position_of(src: &str, offset: usize) -> (usize, usize) {
    let before = &src[..offset.min(src.len())];
    let line = before.matches('\n').count() + 1;
    let col = before.rsplit('\n').next().map_or(0, |l| l.chars().count()) + 1;
    (line, col)
}
