//! Tokenizer shared by the ASN.1 and ACN grammars.

use super::diag::{Diagnostic, DiagnosticKind, Source, Span};

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Tok {
    Ident(String),
    Number(u64),
    Str(String),
    Hex(Vec<u8>),
    Assign,
    DotDot,
    Dot,
    Comma,
    Colon,
    LBrace,
    RBrace,
    LBracket,
    RBracket,
    LParen,
    RParen,
    Lt,
    Gt,
    Pipe,
    Caret,
    Minus,
    Eof,
}

impl Tok {
    pub fn describe(&self) -> String {
        match self {
            Tok::Ident(s) => format!("identifier `{s}`"),
            Tok::Number(n) => format!("number `{n}`"),
            Tok::Str(s) => format!("string {s:?}"),
            Tok::Hex(_) => "hex string".to_string(),
            Tok::Assign => "`::=`".into(),
            Tok::DotDot => "`..`".into(),
            Tok::Dot => "`.`".into(),
            Tok::Comma => "`,`".into(),
            Tok::Colon => "`:`".into(),
            Tok::LBrace => "`{`".into(),
            Tok::RBrace => "`}`".into(),
            Tok::LBracket => "`[`".into(),
            Tok::RBracket => "`]`".into(),
            Tok::LParen => "`(`".into(),
            Tok::RParen => "`)`".into(),
            Tok::Lt => "`<`".into(),
            Tok::Gt => "`>`".into(),
            Tok::Pipe => "`|`".into(),
            Tok::Caret => "`^`".into(),
            Tok::Minus => "`-`".into(),
            Tok::Eof => "end of input".into(),
        }
    }
}

#[derive(Debug, Clone)]
pub struct Token {
    pub tok: Tok,
    pub span: Span,
}

struct Lexer<'a> {
    src: &'a [u8],
    pos: usize,
    line: u32,
    col: u32,
    source: Source,
}

impl<'a> Lexer<'a> {
    fn peek(&self, ahead: usize) -> Option<u8> {
        self.src.get(self.pos + ahead).copied()
    }

    fn bump(&mut self) -> Option<u8> {
        let c = self.peek(0)?;
        self.pos += 1;
        if c == b'\n' {
            self.line += 1;
            self.col = 1;
        } else if c & 0xC0 != 0x80 {
            // count characters, not UTF-8 continuation bytes
            self.col += 1;
        }
        Some(c)
    }

    fn mark(&self) -> (usize, u32, u32) {
        (self.pos, self.line, self.col)
    }

    fn span_from(&self, mark: (usize, u32, u32)) -> Span {
        Span {
            start: mark.0,
            end: self.pos,
            line: mark.1,
            col: mark.2,
            source: self.source,
        }
    }

    fn error(&self, mark: (usize, u32, u32), message: String) -> Diagnostic {
        Diagnostic::new(DiagnosticKind::Lexical, self.span_from(mark), message)
    }

    fn skip_trivia(&mut self) -> Result<(), Diagnostic> {
        loop {
            match (self.peek(0), self.peek(1)) {
                (Some(c), _) if c.is_ascii_whitespace() => {
                    self.bump();
                }
                (Some(b'-'), Some(b'-')) => {
                    while let Some(c) = self.peek(0) {
                        if c == b'\n' {
                            break;
                        }
                        self.bump();
                    }
                }
                (Some(b'/'), Some(b'*')) => {
                    let mark = self.mark();
                    self.bump();
                    self.bump();
                    loop {
                        match (self.peek(0), self.peek(1)) {
                            (Some(b'*'), Some(b'/')) => {
                                self.bump();
                                self.bump();
                                break;
                            }
                            (Some(_), _) => {
                                self.bump();
                            }
                            (None, _) => return Err(self.error(mark, "unterminated block comment".into())),
                        }
                    }
                }
                _ => return Ok(()),
            }
        }
    }

    fn next_token(&mut self) -> Result<Token, Diagnostic> {
        self.skip_trivia()?;
        let mark = self.mark();
        let Some(c) = self.bump() else {
            return Ok(Token {
                tok: Tok::Eof,
                span: self.span_from(mark),
            });
        };
        let tok = match c {
            b'a'..=b'z' | b'A'..=b'Z' => {
                // Hyphens are part of identifiers when followed by a letter or
                // digit; `--` always starts a comment.
                loop {
                    match (self.peek(0), self.peek(1)) {
                        (Some(d), _) if d.is_ascii_alphanumeric() || d == b'_' => {
                            self.bump();
                        }
                        (Some(b'-'), Some(d)) if d.is_ascii_alphanumeric() => {
                            self.bump();
                        }
                        _ => break,
                    }
                }
                Tok::Ident(String::from_utf8_lossy(&self.src[mark.0..self.pos]).into_owned())
            }
            b'0'..=b'9' => {
                while self.peek(0).is_some_and(|d| d.is_ascii_digit()) {
                    self.bump();
                }
                let text = std::str::from_utf8(&self.src[mark.0..self.pos]).unwrap();
                match text.parse::<u64>() {
                    Ok(n) => Tok::Number(n),
                    Err(_) => return Err(self.error(mark, format!("number `{text}` is too large"))),
                }
            }
            b'"' => {
                let mut s = Vec::new();
                loop {
                    match self.bump() {
                        Some(b'"') if self.peek(0) == Some(b'"') => {
                            self.bump();
                            s.push(b'"');
                        }
                        Some(b'"') => break,
                        Some(b) => s.push(b),
                        None => return Err(self.error(mark, "unterminated string".into())),
                    }
                }
                Tok::Str(String::from_utf8_lossy(&s).into_owned())
            }
            b'\'' => {
                let mut digits = String::new();
                loop {
                    match self.bump() {
                        Some(b'\'') => break,
                        Some(b) if b.is_ascii_hexdigit() => digits.push(b as char),
                        Some(b) if b.is_ascii_whitespace() => {}
                        Some(b) => {
                            return Err(self.error(mark, format!("invalid hex digit `{}`", b as char)))
                        }
                        None => return Err(self.error(mark, "unterminated hex string".into())),
                    }
                }
                if self.bump() != Some(b'H') {
                    return Err(self.error(mark, "hex string must end with 'H".into()));
                }
                if !digits.len().is_multiple_of(2) {
                    return Err(self.error(mark, "hex string needs an even number of digits".into()));
                }
                let bytes = (0..digits.len())
                    .step_by(2)
                    .map(|i| u8::from_str_radix(&digits[i..i + 2], 16).unwrap())
                    .collect();
                Tok::Hex(bytes)
            }
            b':' if self.peek(0) == Some(b':') && self.peek(1) == Some(b'=') => {
                self.bump();
                self.bump();
                Tok::Assign
            }
            b':' => Tok::Colon,
            b'.' if self.peek(0) == Some(b'.') => {
                self.bump();
                Tok::DotDot
            }
            b'.' => Tok::Dot,
            b',' => Tok::Comma,
            b'{' => Tok::LBrace,
            b'}' => Tok::RBrace,
            b'[' => Tok::LBracket,
            b']' => Tok::RBracket,
            b'(' => Tok::LParen,
            b')' => Tok::RParen,
            b'<' => Tok::Lt,
            b'>' => Tok::Gt,
            b'|' => Tok::Pipe,
            b'^' => Tok::Caret,
            b'-' => Tok::Minus,
            other => {
                let shown = if other.is_ascii_graphic() {
                    format!("`{}`", other as char)
                } else {
                    format!("byte {other:#04x}")
                };
                return Err(self.error(mark, format!("unexpected character {shown}")));
            }
        };
        Ok(Token {
            tok,
            span: self.span_from(mark),
        })
    }
}

pub fn tokenize(src: &str, source: Source) -> Result<Vec<Token>, Diagnostic> {
    let mut lx = Lexer {
        src: src.as_bytes(),
        pos: 0,
        line: 1,
        col: 1,
        source,
    };
    let mut out = Vec::new();
    loop {
        let t = lx.next_token()?;
        let done = t.tok == Tok::Eof;
        out.push(t);
        if done {
            return Ok(out);
        }
    }
}

/// Cursor over a token vector with the helpers both parsers use.
pub struct TokenStream {
    toks: Vec<Token>,
    pos: usize,
}

impl TokenStream {
    pub fn new(toks: Vec<Token>) -> Self {
        TokenStream { toks, pos: 0 }
    }

    pub fn peek(&self) -> &Tok {
        &self.toks[self.pos].tok
    }

    pub fn peek_at(&self, ahead: usize) -> &Tok {
        let i = (self.pos + ahead).min(self.toks.len() - 1);
        &self.toks[i].tok
    }

    pub fn span(&self) -> Span {
        self.toks[self.pos].span
    }

    /// Span of the most recently consumed token.
    pub fn prev_span(&self) -> Span {
        self.toks[self.pos.saturating_sub(1)].span
    }

    pub fn bump(&mut self) -> Token {
        let t = self.toks[self.pos].clone();
        if t.tok != Tok::Eof {
            self.pos += 1;
        }
        t
    }

    pub fn at(&self, tok: &Tok) -> bool {
        self.peek() == tok
    }

    pub fn at_keyword(&self, kw: &str) -> bool {
        matches!(self.peek(), Tok::Ident(s) if s == kw)
    }

    pub fn eat(&mut self, tok: &Tok) -> bool {
        if self.at(tok) {
            self.bump();
            true
        } else {
            false
        }
    }

    pub fn eat_keyword(&mut self, kw: &str) -> bool {
        if self.at_keyword(kw) {
            self.bump();
            true
        } else {
            false
        }
    }

    pub fn unexpected(&self, expected: &str) -> Diagnostic {
        Diagnostic::new(
            DiagnosticKind::Syntax,
            self.span(),
            format!("expected {expected}, found {}", self.peek().describe()),
        )
    }

    pub fn expect(&mut self, tok: &Tok) -> Result<Span, Diagnostic> {
        if self.at(tok) {
            Ok(self.bump().span)
        } else {
            Err(self.unexpected(&tok.describe()))
        }
    }

    pub fn expect_keyword(&mut self, kw: &str) -> Result<Span, Diagnostic> {
        if self.at_keyword(kw) {
            Ok(self.bump().span)
        } else {
            Err(self.unexpected(&format!("`{kw}`")))
        }
    }

    pub fn expect_ident(&mut self, what: &str) -> Result<(String, Span), Diagnostic> {
        match self.peek().clone() {
            Tok::Ident(s) => {
                let span = self.bump().span;
                Ok((s, span))
            }
            _ => Err(self.unexpected(what)),
        }
    }

    /// Optionally signed integer literal.
    pub fn expect_signed(&mut self) -> Result<(i128, Span), Diagnostic> {
        let start = self.span();
        let neg = self.eat(&Tok::Minus);
        match *self.peek() {
            Tok::Number(n) => {
                let end = self.bump().span;
                let v = if neg { -(n as i128) } else { n as i128 };
                Ok((v, start.to(end)))
            }
            _ => Err(self.unexpected("a number")),
        }
    }
}
