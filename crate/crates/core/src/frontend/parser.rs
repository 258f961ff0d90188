//! Statement-level parser.
//!
//! Expressions are not modelled: a simple statement is the token run up to
//! its terminating `;` (or close tag, or an unbalanced `}`), which is all the
//! control-flow builder and function extractor need. Control structures,
//! function and class declarations are parsed structurally, including the
//! `if (...): ... endif;` alternative syntax.

use thiserror::Error;

use super::lexer::{RawToken, TokenKind};

#[derive(Debug, Clone, PartialEq, Eq, Error)]
#[error("parse error at {line}:{col}: {message}")]
pub struct ParseError {
    pub line: usize,
    pub col: usize,
    pub message: String,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SimpleKind {
    Expr,
    Return,
    Exit,
    Throw,
    Break(usize),
    Continue(usize),
    /// Declarations and other statements with no control effect.
    Opaque,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Branch {
    /// Line of the `if`/`elseif`/`else`/`case` head.
    pub line: usize,
    pub body: Vec<Stmt>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct FunctionDecl {
    /// `None` for closures.
    pub name: Option<String>,
    pub class: Option<String>,
    /// First line of the declaration (modifiers included).
    pub start_line: usize,
    pub end_line: usize,
    /// Byte range of the declaration in the source.
    pub start_offset: usize,
    pub end_offset: usize,
    /// Line of the `function` keyword.
    pub header_line: usize,
    pub body: Vec<Stmt>,
}

impl FunctionDecl {
    pub fn qualified_name(&self) -> Option<String> {
        let name = self.name.as_ref()?;
        Some(match &self.class {
            Some(c) => format!("{c}::{name}"),
            None => name.clone(),
        })
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum Stmt {
    Simple {
        line: usize,
        kind: SimpleKind,
    },
    Block(Vec<Stmt>),
    If {
        branches: Vec<Branch>,
        otherwise: Option<Branch>,
    },
    /// `while`, `for` and `foreach`: the head line is tested before each
    /// iteration.
    Loop {
        line: usize,
        body: Vec<Stmt>,
    },
    DoWhile {
        line: usize,
        body: Vec<Stmt>,
        cond_line: usize,
    },
    Switch {
        line: usize,
        cases: Vec<Branch>,
        has_default: bool,
    },
    Try {
        body: Vec<Stmt>,
        catches: Vec<Branch>,
        finally: Option<Branch>,
    },
    Function(FunctionDecl),
    Class {
        name: String,
        line: usize,
        methods: Vec<FunctionDecl>,
    },
    InlineHtml {
        line: usize,
    },
}

/// Parse a token stream (as produced by the lexer) into statements.
pub fn parse(tokens: &[RawToken]) -> Result<Vec<Stmt>, ParseError> {
    let toks: Vec<&RawToken> = tokens.iter().filter(|t| !t.kind.is_trivia()).collect();
    let mut p = Parser { toks, pos: 0 };
    let stmts = p.statements(&Terminator::Eof)?;
    if let Some(t) = p.peek() {
        return Err(p.error_at(t, format!("unexpected {}", t.text)));
    }
    Ok(stmts)
}

/// Walk every function declaration (including methods and nested
/// functions) in source order.
pub fn visit_functions<'a>(stmts: &'a [Stmt], f: &mut dyn FnMut(&'a FunctionDecl)) {
    for s in stmts {
        match s {
            Stmt::Function(d) => {
                f(d);
                visit_functions(&d.body, f);
            }
            Stmt::Class { methods, .. } => {
                for m in methods {
                    f(m);
                    visit_functions(&m.body, f);
                }
            }
            Stmt::Block(b) => visit_functions(b, f),
            Stmt::If { branches, otherwise } => {
                for b in branches {
                    visit_functions(&b.body, f);
                }
                if let Some(o) = otherwise {
                    visit_functions(&o.body, f);
                }
            }
            Stmt::Loop { body, .. } | Stmt::DoWhile { body, .. } => visit_functions(body, f),
            Stmt::Switch { cases, .. } => {
                for c in cases {
                    visit_functions(&c.body, f);
                }
            }
            Stmt::Try { body, catches, finally } => {
                visit_functions(body, f);
                for c in catches {
                    visit_functions(&c.body, f);
                }
                if let Some(fin) = finally {
                    visit_functions(&fin.body, f);
                }
            }
            Stmt::Simple { .. } | Stmt::InlineHtml { .. } => {}
        }
    }
}

enum Terminator {
    Eof,
    Brace,
    /// Alternative-syntax block ending at one of these keywords.
    Keywords(&'static [&'static str]),
    /// Statements of a switch case.
    Case,
}

const MODIFIERS: &[&str] = &["public", "private", "protected", "static", "abstract", "final", "readonly", "var"];

struct Parser<'a> {
    toks: Vec<&'a RawToken>,
    pos: usize,
}

impl<'a> Parser<'a> {
    fn peek(&self) -> Option<&'a RawToken> {
        self.toks.get(self.pos).copied()
    }

    fn peek_at(&self, ahead: usize) -> Option<&'a RawToken> {
        self.toks.get(self.pos + ahead).copied()
    }

    fn bump(&mut self) -> Option<&'a RawToken> {
        let t = self.peek();
        if t.is_some() {
            self.pos += 1;
        }
        t
    }

    fn error_at(&self, t: &RawToken, message: impl Into<String>) -> ParseError {
        ParseError { line: t.line, col: t.col, message: message.into() }
    }

    fn eof_error(&self, what: &str) -> ParseError {
        let (line, col) = self.toks.last().map_or((1, 1), |t| (t.end_line(), t.col));
        ParseError { line, col, message: format!("unexpected end of input, expected {what}") }
    }

    fn at_punct(&self, p: &str) -> bool {
        self.peek().is_some_and(|t| t.is_punct(p))
    }

    fn at_keyword(&self, kw: &str) -> bool {
        self.peek().is_some_and(|t| t.is_keyword(kw))
    }

    fn expect_punct(&mut self, p: &str) -> Result<&'a RawToken, ParseError> {
        match self.peek() {
            Some(t) if t.is_punct(p) => {
                self.pos += 1;
                Ok(t)
            }
            Some(t) => Err(self.error_at(t, format!("expected '{p}', found '{}'", t.text))),
            None => Err(self.eof_error(&format!("'{p}'"))),
        }
    }

    fn at_terminator(&self, term: &Terminator) -> bool {
        let Some(t) = self.peek() else { return true };
        match term {
            Terminator::Eof => false,
            Terminator::Brace => t.is_punct("}"),
            Terminator::Keywords(kws) => kws.iter().any(|k| t.is_keyword(k)),
            Terminator::Case => {
                t.is_punct("}") || t.is_keyword("case") || t.is_keyword("default") || t.is_keyword("endswitch")
            }
        }
    }

    fn statements(&mut self, term: &Terminator) -> Result<Vec<Stmt>, ParseError> {
        let mut out = Vec::new();
        while !self.at_terminator(term) {
            let Some(t) = self.peek() else { break };
            if t.is_punct("}") && matches!(term, Terminator::Eof) {
                return Err(self.error_at(t, "unmatched '}'"));
            }
            if let Some(s) = self.statement()? {
                out.push(s);
            }
        }
        if self.peek().is_none() && !matches!(term, Terminator::Eof) {
            return Err(self.eof_error("end of block"));
        }
        Ok(out)
    }

    /// `{ ... }` or a single statement.
    fn body(&mut self) -> Result<Vec<Stmt>, ParseError> {
        if self.at_punct("{") {
            self.pos += 1;
            let stmts = self.statements(&Terminator::Brace)?;
            self.expect_punct("}")?;
            Ok(stmts)
        } else {
            Ok(self.statement()?.into_iter().collect())
        }
    }

    /// Skip a balanced `( ... )` group; returns the closing token.
    fn paren_group(&mut self) -> Result<&'a RawToken, ParseError> {
        self.expect_punct("(")?;
        let mut depth = 1usize;
        while let Some(t) = self.bump() {
            if t.is_punct("(") || t.is_punct("[") || t.is_punct("{") {
                depth += 1;
            } else if t.is_punct(")") || t.is_punct("]") || t.is_punct("}") {
                depth -= 1;
                if depth == 0 {
                    return Ok(t);
                }
            }
        }
        Err(self.eof_error("')'"))
    }

    /// Skip to the end of a simple statement. Consumes the terminating `;`
    /// or close tag; an unbalanced closer ends the statement unconsumed.
    fn skip_simple(&mut self) -> Result<(), ParseError> {
        let mut depth = 0usize;
        while let Some(t) = self.peek() {
            match t.kind {
                TokenKind::Punctuation if t.text == ";" && depth == 0 => {
                    self.pos += 1;
                    return Ok(());
                }
                TokenKind::PhpTag if t.text == "?>" && depth == 0 => {
                    self.pos += 1;
                    return Ok(());
                }
                TokenKind::InlineHtml if depth == 0 => return Ok(()),
                TokenKind::Punctuation if matches!(t.text.as_str(), "(" | "[" | "{" | "#[") => depth += 1,
                TokenKind::Punctuation if matches!(t.text.as_str(), ")" | "]" | "}") => {
                    if depth == 0 {
                        return Ok(());
                    }
                    depth -= 1;
                }
                _ => {}
            }
            self.pos += 1;
        }
        Ok(())
    }

    fn simple(&mut self, line: usize, kind: SimpleKind) -> Result<Option<Stmt>, ParseError> {
        self.skip_simple()?;
        Ok(Some(Stmt::Simple { line, kind }))
    }

    fn statement(&mut self) -> Result<Option<Stmt>, ParseError> {
        let Some(t) = self.peek() else { return Ok(None) };
        let line = t.line;
        match t.kind {
            TokenKind::InlineHtml => {
                self.pos += 1;
                return Ok(Some(Stmt::InlineHtml { line }));
            }
            TokenKind::PhpTag => {
                self.pos += 1;
                if t.text == "<?=" {
                    return self.simple(line, SimpleKind::Expr);
                }
                return Ok(None);
            }
            TokenKind::Punctuation if t.text == ";" => {
                self.pos += 1;
                return Ok(None);
            }
            TokenKind::Punctuation if t.text == "{" => {
                self.pos += 1;
                let stmts = self.statements(&Terminator::Brace)?;
                self.expect_punct("}")?;
                return Ok(Some(Stmt::Block(stmts)));
            }
            TokenKind::Punctuation if t.text == "#[" => {
                // attribute group
                self.pos += 1;
                let mut depth = 1usize;
                while let Some(t) = self.bump() {
                    if t.is_punct("[") || t.is_punct("#[") {
                        depth += 1;
                    } else if t.is_punct("]") {
                        depth -= 1;
                        if depth == 0 {
                            break;
                        }
                    }
                }
                return Ok(None);
            }
            TokenKind::Identifier if self.peek_at(1).is_some_and(|n| n.is_op(":")) => {
                // goto label
                self.pos += 2;
                return Ok(Some(Stmt::Simple { line, kind: SimpleKind::Opaque }));
            }
            TokenKind::Keyword => {}
            _ => return self.simple(line, SimpleKind::Expr),
        }

        let kw = t.text.to_ascii_lowercase();
        match kw.as_str() {
            "if" => self.if_stmt().map(Some),
            "while" | "for" | "foreach" => self.loop_stmt(&kw).map(Some),
            "do" => self.do_while().map(Some),
            "switch" => self.switch_stmt().map(Some),
            "try" => self.try_stmt().map(Some),
            "return" => self.simple(line, SimpleKind::Return),
            "throw" => self.simple(line, SimpleKind::Throw),
            "exit" | "die" => self.simple(line, SimpleKind::Exit),
            "break" | "continue" => {
                self.pos += 1;
                let levels = match self.peek() {
                    Some(n) if n.kind == TokenKind::ConstantLiteral => n.text.parse().unwrap_or(1).max(1),
                    _ => 1,
                };
                let kind = if kw == "break" { SimpleKind::Break(levels) } else { SimpleKind::Continue(levels) };
                self.simple(line, kind)
            }
            "function"
                if self.peek_at(1).is_some_and(|n| {
                    n.kind == TokenKind::Identifier || n.kind == TokenKind::Keyword || n.is_op("&")
                }) && !self.is_closure_at(self.pos) =>
            {
                let decl = self.function_decl(self.pos, None)?;
                Ok(Some(Stmt::Function(decl)))
            }
            "abstract" | "final" | "readonly" if self.class_keyword_ahead().is_some() => self.class_decl().map(Some),
            "class" | "interface" | "trait" => self.class_decl().map(Some),
            "namespace" => {
                self.pos += 1;
                while let Some(n) = self.peek() {
                    if n.is_punct("{") || n.is_punct(";") {
                        break;
                    }
                    self.pos += 1;
                }
                if self.at_punct("{") {
                    self.pos += 1;
                    let stmts = self.statements(&Terminator::Brace)?;
                    self.expect_punct("}")?;
                    Ok(Some(Stmt::Block(stmts)))
                } else {
                    self.skip_simple()?;
                    Ok(None)
                }
            }
            "use" | "global" | "static" | "const" | "declare" | "unset" | "goto" => {
                if kw == "static"
                    && self.peek_at(1).is_some_and(|n| n.is_keyword("function") || n.is_keyword("fn") || n.is_op("::"))
                {
                    return self.simple(line, SimpleKind::Expr);
                }
                self.simple(line, SimpleKind::Opaque)
            }
            _ => self.simple(line, SimpleKind::Expr),
        }
    }

    /// `function (` or `function & (` starts a closure, not a declaration.
    fn is_closure_at(&self, at: usize) -> bool {
        let mut i = at + 1;
        if self.toks.get(i).is_some_and(|t| t.is_op("&")) {
            i += 1;
        }
        self.toks.get(i).is_some_and(|t| t.is_punct("("))
    }

    fn class_keyword_ahead(&self) -> Option<usize> {
        let mut i = self.pos;
        while let Some(t) = self.toks.get(i) {
            if t.is_keyword("class") {
                return Some(i);
            }
            if !(t.is_keyword("abstract") || t.is_keyword("final") || t.is_keyword("readonly")) {
                return None;
            }
            i += 1;
        }
        None
    }

    /// Condition head: keyword followed by a parenthesised group.
    fn head(&mut self) -> Result<usize, ParseError> {
        let kw = self.bump().expect("caller checked keyword");
        self.paren_group()?;
        Ok(kw.line)
    }

    fn alt_body(&mut self, ends: &'static [&'static str]) -> Result<Vec<Stmt>, ParseError> {
        self.pos += 1; // ':'
        self.statements(&Terminator::Keywords(ends))
    }

    fn if_stmt(&mut self) -> Result<Stmt, ParseError> {
        let mut branches = Vec::new();
        let line = self.head()?;
        if self.peek().is_some_and(|t| t.is_op(":")) {
            const ENDS: &[&str] = &["elseif", "else", "endif"];
            let body = self.alt_body(ENDS)?;
            branches.push(Branch { line, body });
            let mut otherwise = None;
            loop {
                let Some(t) = self.peek() else { return Err(self.eof_error("endif")) };
                if t.is_keyword("elseif") {
                    let line = self.head()?;
                    if !self.peek().is_some_and(|t| t.is_op(":")) {
                        return Err(self.error_at(t, "expected ':' in alternative if"));
                    }
                    let body = self.alt_body(ENDS)?;
                    branches.push(Branch { line, body });
                } else if t.is_keyword("else") {
                    self.pos += 1;
                    if self.at_keyword("if") {
                        // `else if (...):` is not valid in alternative syntax
                        return Err(self.error_at(t, "'else if' in alternative if"));
                    }
                    if !self.peek().is_some_and(|t| t.is_op(":")) {
                        return Err(self.error_at(t, "expected ':' after else"));
                    }
                    let body = self.alt_body(&["endif"])?;
                    otherwise = Some(Branch { line: t.line, body });
                } else {
                    // endif
                    self.pos += 1;
                    self.skip_simple()?;
                    break;
                }
            }
            return Ok(Stmt::If { branches, otherwise });
        }

        let body = self.body()?;
        branches.push(Branch { line, body });
        let mut otherwise = None;
        loop {
            if self.at_keyword("elseif") {
                let line = self.head()?;
                let body = self.body()?;
                branches.push(Branch { line, body });
            } else if self.at_keyword("else") && self.peek_at(1).is_some_and(|t| t.is_keyword("if")) {
                self.pos += 1;
                let line = self.head()?;
                let body = self.body()?;
                branches.push(Branch { line, body });
            } else if self.at_keyword("else") {
                let t = self.bump().expect("checked");
                let body = self.body()?;
                otherwise = Some(Branch { line: t.line, body });
                break;
            } else {
                break;
            }
        }
        Ok(Stmt::If { branches, otherwise })
    }

    fn loop_stmt(&mut self, kw: &str) -> Result<Stmt, ParseError> {
        let line = self.head()?;
        if self.peek().is_some_and(|t| t.is_op(":")) {
            let end: &'static [&'static str] = match kw {
                "while" => &["endwhile"],
                "for" => &["endfor"],
                _ => &["endforeach"],
            };
            let body = self.alt_body(end)?;
            self.pos += 1;
            self.skip_simple()?;
            return Ok(Stmt::Loop { line, body });
        }
        let body = self.body()?;
        Ok(Stmt::Loop { line, body })
    }

    fn do_while(&mut self) -> Result<Stmt, ParseError> {
        let line = self.bump().expect("checked").line;
        let body = self.body()?;
        let Some(w) = self.peek() else { return Err(self.eof_error("while")) };
        if !w.is_keyword("while") {
            return Err(self.error_at(w, "expected 'while' after do body"));
        }
        let cond_line = self.head()?;
        self.skip_simple()?;
        Ok(Stmt::DoWhile { line, body, cond_line })
    }

    fn switch_stmt(&mut self) -> Result<Stmt, ParseError> {
        let line = self.head()?;
        let alt = self.peek().is_some_and(|t| t.is_op(":"));
        if alt {
            self.pos += 1;
        } else {
            self.expect_punct("{")?;
        }
        let mut cases = Vec::new();
        let mut has_default = false;
        loop {
            let Some(t) = self.peek() else { return Err(self.eof_error("end of switch")) };
            if (!alt && t.is_punct("}")) || (alt && t.is_keyword("endswitch")) {
                self.pos += 1;
                if alt {
                    self.skip_simple()?;
                }
                break;
            }
            if t.is_punct(";") {
                self.pos += 1;
                continue;
            }
            if !(t.is_keyword("case") || t.is_keyword("default")) {
                return Err(self.error_at(t, format!("expected case label, found '{}'", t.text)));
            }
            has_default |= t.is_keyword("default");
            self.pos += 1;
            // label expression up to ':' or ';' at depth 0
            let mut depth = 0usize;
            loop {
                let Some(n) = self.bump() else { return Err(self.eof_error("':'")) };
                if n.is_punct("(") || n.is_punct("[") {
                    depth += 1;
                } else if n.is_punct(")") || n.is_punct("]") {
                    depth = depth.saturating_sub(1);
                } else if depth == 0 && (n.is_op(":") || n.is_punct(";")) {
                    break;
                }
            }
            let body = self.statements(&Terminator::Case)?;
            cases.push(Branch { line: t.line, body });
        }
        Ok(Stmt::Switch { line, cases, has_default })
    }

    fn try_stmt(&mut self) -> Result<Stmt, ParseError> {
        self.pos += 1;
        if !self.at_punct("{") {
            return Err(match self.peek() {
                Some(t) => self.error_at(t, "expected '{' after try"),
                None => self.eof_error("'{'"),
            });
        }
        let body = self.body()?;
        let mut catches = Vec::new();
        let mut finally = None;
        while self.at_keyword("catch") {
            let line = self.head()?;
            let body = self.body()?;
            catches.push(Branch { line, body });
        }
        if self.at_keyword("finally") {
            let t = self.bump().expect("checked");
            let body = self.body()?;
            finally = Some(Branch { line: t.line, body });
        }
        Ok(Stmt::Try { body, catches, finally })
    }

    /// Parse a function declaration whose first token (modifier or
    /// `function`) is at `start`.
    fn function_decl(&mut self, start: usize, class: Option<&str>) -> Result<FunctionDecl, ParseError> {
        self.pos = start;
        let first = self.toks[start];
        while self.peek().is_some_and(|t| MODIFIERS.iter().any(|m| t.is_keyword(m))) {
            self.pos += 1;
        }
        let kw = self.bump().ok_or_else(|| self.eof_error("function"))?;
        if !kw.is_keyword("function") {
            return Err(self.error_at(kw, "expected 'function'"));
        }
        if self.peek().is_some_and(|t| t.is_op("&")) {
            self.pos += 1;
        }
        let name_tok = self.bump().ok_or_else(|| self.eof_error("function name"))?;
        if !matches!(name_tok.kind, TokenKind::Identifier | TokenKind::Keyword) {
            return Err(self.error_at(name_tok, "expected function name"));
        }
        self.paren_group()?;
        // return type
        while let Some(t) = self.peek() {
            if t.is_punct("{") || t.is_punct(";") {
                break;
            }
            self.pos += 1;
        }
        let Some(open) = self.peek() else { return Err(self.eof_error("function body")) };
        let (body, end_tok) = if open.is_punct(";") {
            self.pos += 1;
            (Vec::new(), open)
        } else {
            self.pos += 1;
            let body = self.statements(&Terminator::Brace)?;
            let close = self.expect_punct("}")?;
            (body, close)
        };
        Ok(FunctionDecl {
            name: Some(name_tok.text.clone()),
            class: class.map(str::to_string),
            start_line: first.line,
            end_line: end_tok.end_line(),
            start_offset: first.offset,
            end_offset: end_tok.end_offset(),
            header_line: kw.line,
            body,
        })
    }

    fn class_decl(&mut self) -> Result<Stmt, ParseError> {
        while self.peek().is_some_and(|t| t.is_keyword("abstract") || t.is_keyword("final") || t.is_keyword("readonly"))
        {
            self.pos += 1;
        }
        let kw = self.bump().expect("checked");
        let name = match self.peek() {
            Some(t) if matches!(t.kind, TokenKind::Identifier | TokenKind::Keyword) => {
                self.pos += 1;
                t.text.clone()
            }
            _ => String::from("class@anonymous"),
        };
        while let Some(t) = self.peek() {
            if t.is_punct("{") {
                break;
            }
            self.pos += 1;
        }
        self.expect_punct("{")?;
        let mut methods = Vec::new();
        loop {
            let Some(t) = self.peek() else { return Err(self.eof_error("'}'")) };
            if t.is_punct("}") {
                self.pos += 1;
                break;
            }
            if t.is_punct("#[") {
                self.statement()?;
                continue;
            }
            // find out whether this member is a method
            let start = self.pos;
            let mut i = start;
            while self.toks.get(i).is_some_and(|t| MODIFIERS.iter().any(|m| t.is_keyword(m))) {
                i += 1;
            }
            if self.toks.get(i).is_some_and(|t| t.is_keyword("function")) {
                let decl = self.function_decl(start, Some(&name))?;
                if !decl.body.is_empty() || decl.end_line > decl.header_line || self.toks[self.pos - 1].is_punct("}") {
                    methods.push(decl);
                }
            } else {
                self.skip_simple()?;
                if self.pos == start {
                    return Err(self.error_at(t, format!("unexpected '{}' in class body", t.text)));
                }
            }
        }
        Ok(Stmt::Class { name, line: kw.line, methods })
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::frontend::lexer::{lex, lex_fragment};

    fn p(src: &str) -> Vec<Stmt> {
        parse(&lex_fragment(src).unwrap()).unwrap()
    }

    #[test]
    fn straight_line() {
        let s = p("$a = 1;\n$b = 2;\necho $a;");
        assert_eq!(s.len(), 3);
        assert!(matches!(s[2], Stmt::Simple { line: 3, kind: SimpleKind::Expr }));
    }

    #[test]
    fn if_else_chain() {
        let s = p("if ($a) { x(); } elseif ($b) { y(); } else if ($c) z(); else { w(); }");
        match &s[0] {
            Stmt::If { branches, otherwise } => {
                assert_eq!(branches.len(), 3);
                assert!(otherwise.is_some());
            }
            other => panic!("{other:?}"),
        }
    }

    #[test]
    fn alternative_syntax() {
        let s = p("if ($a):\n  x();\nelseif ($b):\n  y();\nelse:\n  z();\nendif;\nforeach ($l as $v):\n echo $v;\nendforeach;\n");
        assert_eq!(s.len(), 2);
        assert!(matches!(&s[1], Stmt::Loop { line: 8, body } if body.len() == 1));
    }

    #[test]
    fn missing_semicolon_before_brace() {
        let s = p("if ($e) { $r->error = $e; } else { $r->data = $q\n}\nprint($r);");
        assert_eq!(s.len(), 2);
    }

    #[test]
    fn closures_are_expressions() {
        let s = p("$f = function($x) use ($y) { return $x; };\n$g = fn($x) => $x;");
        assert_eq!(s.len(), 2);
        assert!(s.iter().all(|st| matches!(st, Stmt::Simple { .. })));
    }

    #[test]
    fn class_methods() {
        let s = p("class A extends B {\n  const X = 1;\n  public $p = [1];\n  public static function f($a) {\n    return $a;\n  }\n  abstract protected function g();\n}");
        match &s[0] {
            Stmt::Class { name, methods, .. } => {
                assert_eq!(name, "A");
                assert_eq!(methods.len(), 1);
                assert_eq!(methods[0].qualified_name().unwrap(), "A::f");
                assert_eq!((methods[0].start_line, methods[0].end_line), (4, 6));
            }
            other => panic!("{other:?}"),
        }
    }

    #[test]
    fn switch_cases() {
        let s = p("switch ($x) {\n case 1:\n a();\n break;\n case 'b': case 'c':\n b();\n default:\n c();\n}");
        match &s[0] {
            Stmt::Switch { cases, has_default, .. } => {
                assert_eq!(cases.len(), 4);
                assert!(*has_default);
            }
            other => panic!("{other:?}"),
        }
    }

    #[test]
    fn unbalanced_input_errors() {
        let err = parse(&lex("<?php\nfunction f() {\n  $a = 1;\n").unwrap()).unwrap_err();
        assert!(err.message.contains("end of input"), "{err}");
        let err = parse(&lex("<?php\n}\n").unwrap()).unwrap_err();
        assert_eq!(err.line, 2);
    }

    #[test]
    fn html_and_tags() {
        let s = parse(&lex("<b><?php $a = 1 ?></b><?= $a ?>").unwrap()).unwrap();
        assert_eq!(s.len(), 4);
    }
}
