//! The supported ASN.1 subset: INTEGER, BOOLEAN, NULL, REAL, ENUMERATED,
//! IA5String, SEQUENCE, CHOICE, SEQUENCE OF and type references, with
//! value-range, SIZE and FROM constraints.

use std::collections::{BTreeSet, HashSet};
use std::fmt::{self, Write as _};

use super::diag::{Diagnostic, DiagnosticKind, Diagnostics, Source, Span};
use super::lexer::{tokenize, Tok, TokenStream};

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct AsnModule {
    pub name: String,
    pub assignments: Vec<TypeAssignment>,
}

impl AsnModule {
    pub fn get(&self, name: &str) -> Option<&TypeAssignment> {
        self.assignments.iter().find(|a| a.name == name)
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct TypeAssignment {
    pub name: String,
    pub ty: AsnType,
    pub span: Span,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct AsnType {
    pub kind: AsnTypeKind,
    pub span: Span,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum AsnTypeKind {
    Integer { range: Option<(i64, i64)> },
    Boolean,
    Null,
    Real,
    Enumerated { items: Vec<EnumItem> },
    IA5String {
        size: (u64, u64),
        /// Permitted characters in ascending code order.
        alphabet: Option<Vec<u8>>,
    },
    Sequence { fields: Vec<SequenceField> },
    Choice { alternatives: Vec<Alternative> },
    SequenceOf { size: (u64, u64), element: Box<AsnType> },
    Reference { name: String },
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct EnumItem {
    pub name: String,
    pub value: i64,
    pub explicit: bool,
    pub span: Span,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SequenceField {
    pub name: String,
    pub ty: AsnType,
    pub optional: bool,
    pub span: Span,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Alternative {
    pub name: String,
    pub ty: AsnType,
    pub span: Span,
}

const KEYWORDS: &[&str] = &[
    "INTEGER",
    "BOOLEAN",
    "NULL",
    "REAL",
    "ENUMERATED",
    "IA5String",
    "SEQUENCE",
    "CHOICE",
    "OF",
    "SIZE",
    "FROM",
    "OPTIONAL",
    "DEFINITIONS",
    "BEGIN",
    "END",
];

struct Parser {
    ts: TokenStream,
    diags: Vec<Diagnostic>,
}

type PResult<T> = Result<T, Diagnostic>;

/// Parses a module. Both a full `Name DEFINITIONS ::= BEGIN ... END` module
/// and a bare list of type assignments are accepted; the latter gets the
/// module name `Anonymous`.
pub fn parse_asn1(text: &str) -> Result<AsnModule, Diagnostics> {
    let toks = tokenize(text, Source::Asn1)?;
    let mut p = Parser {
        ts: TokenStream::new(toks),
        diags: Vec::new(),
    };
    let module = p.module()?;
    if p.diags.is_empty() {
        Ok(module)
    } else {
        Err(Diagnostics(p.diags))
    }
}

fn is_type_reference(s: &str) -> bool {
    s.starts_with(|c: char| c.is_ascii_uppercase()) && !KEYWORDS.contains(&s)
}

impl Parser {
    fn module(&mut self) -> PResult<AsnModule> {
        let shell = matches!(self.ts.peek_at(1), Tok::Ident(s) if s == "DEFINITIONS");
        let name = if shell {
            let (name, _) = self.ts.expect_ident("a module name")?;
            self.ts.expect_keyword("DEFINITIONS")?;
            // AUTOMATIC TAGS and friends carry no meaning for ACN.
            while matches!(self.ts.peek(), Tok::Ident(s) if s != "BEGIN") {
                self.ts.bump();
            }
            self.ts.expect(&Tok::Assign)?;
            self.ts.expect_keyword("BEGIN")?;
            name
        } else {
            "Anonymous".to_string()
        };
        let mut assignments: Vec<TypeAssignment> = Vec::new();
        let mut seen = HashSet::new();
        loop {
            if shell && self.ts.eat_keyword("END") {
                break;
            }
            if !shell && self.ts.at(&Tok::Eof) {
                break;
            }
            let a = self.assignment()?;
            if !seen.insert(a.name.clone()) {
                self.diags.push(Diagnostic::new(
                    DiagnosticKind::DuplicateName,
                    a.span,
                    format!("type `{}` is defined more than once", a.name),
                ));
            }
            assignments.push(a);
        }
        if !self.ts.at(&Tok::Eof) {
            return Err(self.ts.unexpected("end of input"));
        }
        Ok(AsnModule { name, assignments })
    }

    fn assignment(&mut self) -> PResult<TypeAssignment> {
        let (name, span) = self.ts.expect_ident("a type assignment")?;
        if !is_type_reference(&name) {
            return Err(Diagnostic::new(
                DiagnosticKind::Syntax,
                span,
                format!("type names must start with an upper-case letter and not be keywords: `{name}`"),
            ));
        }
        self.ts.expect(&Tok::Assign)?;
        let ty = self.ty()?;
        Ok(TypeAssignment {
            name,
            span: span.to(ty.span),
            ty,
        })
    }

    fn ty(&mut self) -> PResult<AsnType> {
        let start = self.ts.span();
        let (word, _) = self.ts.expect_ident("a type")?;
        let kind = match word.as_str() {
            "INTEGER" => {
                let range = if self.ts.at(&Tok::LParen) {
                    Some(self.value_range()?)
                } else {
                    None
                };
                AsnTypeKind::Integer { range }
            }
            "BOOLEAN" => AsnTypeKind::Boolean,
            "NULL" => AsnTypeKind::Null,
            "REAL" => AsnTypeKind::Real,
            "ENUMERATED" => self.enumerated()?,
            "IA5String" => self.ia5string(start)?,
            "SEQUENCE" => {
                if self.ts.at(&Tok::LBrace) {
                    self.sequence()?
                } else {
                    self.sequence_of(start)?
                }
            }
            "CHOICE" => self.choice()?,
            other if is_type_reference(other) => AsnTypeKind::Reference { name: word.clone() },
            _ => {
                return Err(Diagnostic::new(
                    DiagnosticKind::Syntax,
                    start,
                    format!("expected a type, found `{word}`"),
                ))
            }
        };
        Ok(AsnType {
            kind,
            span: start.to(self.ts.prev_span()),
        })
    }

    fn signed_i64(&mut self) -> PResult<i64> {
        let (v, span) = self.ts.expect_signed()?;
        i64::try_from(v).map_err(|_| {
            Diagnostic::new(
                DiagnosticKind::MalformedConstraint,
                span,
                format!("{v} does not fit a 64-bit signed integer"),
            )
        })
    }

    // `(lo .. hi)` or `(v)`.
    fn value_range(&mut self) -> PResult<(i64, i64)> {
        let open = self.ts.expect(&Tok::LParen)?;
        let lo = self.signed_i64()?;
        let hi = if self.ts.eat(&Tok::DotDot) { self.signed_i64()? } else { lo };
        let close = self.ts.expect(&Tok::RParen)?;
        if lo > hi {
            self.diags.push(Diagnostic::new(
                DiagnosticKind::MalformedConstraint,
                open.to(close),
                format!("empty range {lo} .. {hi}"),
            ));
        }
        Ok((lo, hi))
    }

    // `SIZE (lo .. hi)` or `SIZE (n)`, with the keyword already consumed.
    fn size_range(&mut self) -> PResult<(u64, u64)> {
        let open = self.ts.expect(&Tok::LParen)?;
        let lo = self.unsigned()?;
        let hi = if self.ts.eat(&Tok::DotDot) { self.unsigned()? } else { lo };
        let close = self.ts.expect(&Tok::RParen)?;
        if lo > hi {
            self.diags.push(Diagnostic::new(
                DiagnosticKind::MalformedConstraint,
                open.to(close),
                format!("empty size range {lo} .. {hi}"),
            ));
        }
        Ok((lo, hi))
    }

    fn unsigned(&mut self) -> PResult<u64> {
        match *self.ts.peek() {
            Tok::Number(n) => {
                self.ts.bump();
                Ok(n)
            }
            _ => Err(self.ts.unexpected("a non-negative number")),
        }
    }

    fn enumerated(&mut self) -> PResult<AsnTypeKind> {
        self.ts.expect(&Tok::LBrace)?;
        let mut raw: Vec<(String, Option<i64>, Span)> = Vec::new();
        loop {
            let (name, span) = self.ts.expect_ident("an enumeration item")?;
            let value = if self.ts.eat(&Tok::LParen) {
                let v = self.signed_i64()?;
                self.ts.expect(&Tok::RParen)?;
                Some(v)
            } else {
                None
            };
            raw.push((name, value, span));
            if !self.ts.eat(&Tok::Comma) {
                break;
            }
        }
        self.ts.expect(&Tok::RBrace)?;

        // Unnumbered items take the smallest unused non-negative values in order.
        let mut used: BTreeSet<i64> = BTreeSet::new();
        let mut names = HashSet::new();
        for (name, value, span) in &raw {
            if !names.insert(name.clone()) {
                self.diags.push(Diagnostic::new(
                    DiagnosticKind::DuplicateName,
                    *span,
                    format!("enumeration item `{name}` appears twice"),
                ));
            }
            if let Some(v) = value {
                if !used.insert(*v) {
                    self.diags.push(Diagnostic::new(
                        DiagnosticKind::DuplicateName,
                        *span,
                        format!("enumeration value {v} appears twice"),
                    ));
                }
            }
        }
        let mut next = 0i64;
        let items = raw
            .into_iter()
            .map(|(name, value, span)| {
                let (value, explicit) = match value {
                    Some(v) => (v, true),
                    None => {
                        while used.contains(&next) {
                            next += 1;
                        }
                        used.insert(next);
                        (next, false)
                    }
                };
                EnumItem {
                    name,
                    value,
                    explicit,
                    span,
                }
            })
            .collect();
        Ok(AsnTypeKind::Enumerated { items })
    }

    fn ia5string(&mut self, start: Span) -> PResult<AsnTypeKind> {
        let mut size = None;
        let mut alphabet = None;
        while self.ts.eat(&Tok::LParen) {
            loop {
                if self.ts.eat_keyword("SIZE") {
                    size = Some(self.size_range()?);
                } else if self.ts.eat_keyword("FROM") {
                    alphabet = Some(self.permitted_alphabet()?);
                } else {
                    return Err(self.ts.unexpected("`SIZE` or `FROM`"));
                }
                if !self.ts.eat(&Tok::Caret) {
                    break;
                }
            }
            self.ts.expect(&Tok::RParen)?;
        }
        let Some(size) = size else {
            return Err(Diagnostic::new(
                DiagnosticKind::MalformedConstraint,
                start.to(self.ts.prev_span()),
                "IA5String needs a SIZE constraint",
            ));
        };
        Ok(AsnTypeKind::IA5String { size, alphabet })
    }

    // `("A".."Z" | "0".."9" | "_-")`
    fn permitted_alphabet(&mut self) -> PResult<Vec<u8>> {
        let open = self.ts.expect(&Tok::LParen)?;
        let mut chars = BTreeSet::new();
        loop {
            let (first, span) = self.string_lit()?;
            if self.ts.eat(&Tok::DotDot) {
                let (last, end) = self.string_lit()?;
                if first.len() != 1 || last.len() != 1 || first[0] > last[0] {
                    return Err(Diagnostic::new(
                        DiagnosticKind::MalformedConstraint,
                        span.to(end),
                        "character ranges need single, ordered characters",
                    ));
                }
                chars.extend(first[0]..=last[0]);
            } else {
                chars.extend(first);
            }
            if !self.ts.eat(&Tok::Pipe) {
                break;
            }
        }
        let close = self.ts.expect(&Tok::RParen)?;
        if let Some(&c) = chars.iter().find(|&&c| c > 127) {
            return Err(Diagnostic::new(
                DiagnosticKind::MalformedConstraint,
                open.to(close),
                format!("character {c:#04x} is not 7-bit"),
            ));
        }
        if chars.is_empty() {
            return Err(Diagnostic::new(
                DiagnosticKind::MalformedConstraint,
                open.to(close),
                "empty permitted alphabet",
            ));
        }
        Ok(chars.into_iter().collect())
    }

    fn string_lit(&mut self) -> PResult<(Vec<u8>, Span)> {
        match self.ts.peek().clone() {
            Tok::Str(s) => {
                let span = self.ts.bump().span;
                Ok((s.into_bytes(), span))
            }
            _ => Err(self.ts.unexpected("a string literal")),
        }
    }

    fn sequence(&mut self) -> PResult<AsnTypeKind> {
        self.ts.expect(&Tok::LBrace)?;
        let mut fields: Vec<SequenceField> = Vec::new();
        let mut names = HashSet::new();
        if !self.ts.at(&Tok::RBrace) {
            loop {
                let (name, span) = self.ts.expect_ident("a field name")?;
                let ty = self.ty()?;
                let optional = self.ts.eat_keyword("OPTIONAL");
                if !names.insert(name.clone()) {
                    self.diags.push(Diagnostic::new(
                        DiagnosticKind::DuplicateName,
                        span,
                        format!("field `{name}` appears twice"),
                    ));
                }
                fields.push(SequenceField {
                    name,
                    span: span.to(self.ts.prev_span()),
                    ty,
                    optional,
                });
                if !self.ts.eat(&Tok::Comma) {
                    break;
                }
            }
        }
        self.ts.expect(&Tok::RBrace)?;
        Ok(AsnTypeKind::Sequence { fields })
    }

    fn sequence_of(&mut self, start: Span) -> PResult<AsnTypeKind> {
        let parenthesized = self.ts.eat(&Tok::LParen);
        if !self.ts.eat_keyword("SIZE") {
            if !parenthesized && self.ts.at_keyword("OF") {
                return Err(Diagnostic::new(
                    DiagnosticKind::MalformedConstraint,
                    start.to(self.ts.span()),
                    "SEQUENCE OF needs a SIZE constraint",
                ));
            }
            return Err(self.ts.unexpected("`SIZE`"));
        }
        let size = self.size_range()?;
        if parenthesized {
            self.ts.expect(&Tok::RParen)?;
        }
        self.ts.expect_keyword("OF")?;
        let element = Box::new(self.ty()?);
        Ok(AsnTypeKind::SequenceOf { size, element })
    }

    fn choice(&mut self) -> PResult<AsnTypeKind> {
        self.ts.expect(&Tok::LBrace)?;
        let mut alternatives: Vec<Alternative> = Vec::new();
        let mut names = HashSet::new();
        loop {
            let (name, span) = self.ts.expect_ident("an alternative name")?;
            let ty = self.ty()?;
            if !names.insert(name.clone()) {
                self.diags.push(Diagnostic::new(
                    DiagnosticKind::DuplicateName,
                    span,
                    format!("alternative `{name}` appears twice"),
                ));
            }
            alternatives.push(Alternative {
                name,
                span: span.to(self.ts.prev_span()),
                ty,
            });
            if !self.ts.eat(&Tok::Comma) {
                break;
            }
        }
        self.ts.expect(&Tok::RBrace)?;
        Ok(AsnTypeKind::Choice { alternatives })
    }
}

fn quote_char(c: u8) -> String {
    if c == b'"' {
        "\"\"\"\"".to_string()
    } else {
        format!("\"{}\"", c as char)
    }
}

// Renders a permitted alphabet as maximal ranges of consecutive codes.
fn write_alphabet(out: &mut String, chars: &[u8]) {
    let mut parts = Vec::new();
    let mut i = 0;
    while i < chars.len() {
        let mut j = i;
        while j + 1 < chars.len() && chars[j + 1] == chars[j] + 1 {
            j += 1;
        }
        if j > i {
            parts.push(format!("{}..{}", quote_char(chars[i]), quote_char(chars[j])));
        } else {
            parts.push(quote_char(chars[i]));
        }
        i = j + 1;
    }
    out.push_str(&parts.join(" | "));
}

fn write_type(out: &mut String, ty: &AsnType, indent: usize) {
    let pad = "  ".repeat(indent + 1);
    match &ty.kind {
        AsnTypeKind::Integer { range: None } => out.push_str("INTEGER"),
        AsnTypeKind::Integer { range: Some((lo, hi)) } => {
            let _ = write!(out, "INTEGER ({lo} .. {hi})");
        }
        AsnTypeKind::Boolean => out.push_str("BOOLEAN"),
        AsnTypeKind::Null => out.push_str("NULL"),
        AsnTypeKind::Real => out.push_str("REAL"),
        AsnTypeKind::Enumerated { items } => {
            let parts: Vec<String> = items
                .iter()
                .map(|i| format!("{}({})", i.name, i.value))
                .collect();
            let _ = write!(out, "ENUMERATED {{{}}}", parts.join(", "));
        }
        AsnTypeKind::IA5String { size, alphabet } => {
            let _ = write!(out, "IA5String (SIZE({} .. {}))", size.0, size.1);
            if let Some(chars) = alphabet {
                out.push_str(" (FROM(");
                write_alphabet(out, chars);
                out.push_str("))");
            }
        }
        AsnTypeKind::Sequence { fields } => {
            out.push_str("SEQUENCE {");
            for (i, f) in fields.iter().enumerate() {
                out.push_str(if i == 0 { "\n" } else { ",\n" });
                let _ = write!(out, "{pad}{} ", f.name);
                write_type(out, &f.ty, indent + 1);
                if f.optional {
                    out.push_str(" OPTIONAL");
                }
            }
            if !fields.is_empty() {
                let _ = write!(out, "\n{}", "  ".repeat(indent));
            }
            out.push('}');
        }
        AsnTypeKind::Choice { alternatives } => {
            out.push_str("CHOICE {");
            for (i, a) in alternatives.iter().enumerate() {
                out.push_str(if i == 0 { "\n" } else { ",\n" });
                let _ = write!(out, "{pad}{} ", a.name);
                write_type(out, &a.ty, indent + 1);
            }
            let _ = write!(out, "\n{}}}", "  ".repeat(indent));
        }
        AsnTypeKind::SequenceOf { size, element } => {
            let _ = write!(out, "SEQUENCE (SIZE({} .. {})) OF ", size.0, size.1);
            write_type(out, element, indent);
        }
        AsnTypeKind::Reference { name } => out.push_str(name),
    }
}

impl fmt::Display for AsnType {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let mut s = String::new();
        write_type(&mut s, self, 0);
        f.write_str(&s)
    }
}

/// Canonical text; parsing it yields the same module up to spans.
impl fmt::Display for AsnModule {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        writeln!(f, "{} DEFINITIONS ::= BEGIN", self.name)?;
        for a in &self.assignments {
            let mut s = String::new();
            write_type(&mut s, &a.ty, 0);
            writeln!(f, "{} ::= {}", a.name, s)?;
        }
        writeln!(f, "END")
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn integer_range() {
        let m = parse_asn1("T ::= INTEGER (0 .. 255)").unwrap();
        assert_eq!(m.assignments[0].ty.kind, AsnTypeKind::Integer { range: Some((0, 255)) });
        let m = parse_asn1("T ::= INTEGER (-10..-2)").unwrap();
        assert_eq!(m.assignments[0].ty.kind, AsnTypeKind::Integer { range: Some((-10, -2)) });
    }

    #[test]
    fn empty_range_is_diagnosed() {
        let err = parse_asn1("T ::= INTEGER (5 .. 3)").unwrap_err();
        assert!(err.has_kind(DiagnosticKind::MalformedConstraint));
        assert_eq!(err.0[0].span.line, 1);
    }

    #[test]
    fn module_shell() {
        let m = parse_asn1("M DEFINITIONS AUTOMATIC TAGS ::= BEGIN\n A ::= BOOLEAN\nEND").unwrap();
        assert_eq!(m.name, "M");
        assert_eq!(m.assignments.len(), 1);
        assert!(parse_asn1("M DEFINITIONS ::= BEGIN A ::= BOOLEAN").is_err());
    }

    #[test]
    fn duplicates() {
        let err = parse_asn1("A ::= BOOLEAN\nA ::= NULL").unwrap_err();
        assert!(err.has_kind(DiagnosticKind::DuplicateName));
        assert_eq!(err.0[0].span.line, 2);
        assert!(parse_asn1("A ::= SEQUENCE { x BOOLEAN, x NULL }").is_err());
        assert!(parse_asn1("A ::= CHOICE { x BOOLEAN, x NULL }").is_err());
        assert!(parse_asn1("A ::= ENUMERATED { a(1), b(1) }").is_err());
    }

    #[test]
    fn enumeration_numbering() {
        let m = parse_asn1("E ::= ENUMERATED { a, b(0), c, d(7), e }").unwrap();
        let AsnTypeKind::Enumerated { items } = &m.assignments[0].ty.kind else { panic!() };
        let values: Vec<i64> = items.iter().map(|i| i.value).collect();
        assert_eq!(values, vec![1, 0, 2, 7, 3]);
    }

    #[test]
    fn strings() {
        let m = parse_asn1("S ::= IA5String (SIZE(1..10)) (FROM(\"A\"..\"C\" | \"xy\"))").unwrap();
        assert_eq!(
            m.assignments[0].ty.kind,
            AsnTypeKind::IA5String {
                size: (1, 10),
                alphabet: Some(b"ABCxy".to_vec())
            }
        );
        let m = parse_asn1("S ::= IA5String (SIZE(4) ^ FROM(\"01\"))").unwrap();
        assert_eq!(
            m.assignments[0].ty.kind,
            AsnTypeKind::IA5String {
                size: (4, 4),
                alphabet: Some(b"01".to_vec())
            }
        );
        assert!(parse_asn1("S ::= IA5String").is_err());
    }

    #[test]
    fn sequence_of_forms() {
        for src in ["L ::= SEQUENCE (SIZE(1 .. 63)) OF BOOLEAN", "L ::= SEQUENCE SIZE(1..63) OF BOOLEAN"] {
            let m = parse_asn1(src).unwrap();
            assert!(matches!(
                &m.assignments[0].ty.kind,
                AsnTypeKind::SequenceOf { size: (1, 63), .. }
            ));
        }
        let err = parse_asn1("L ::= SEQUENCE OF BOOLEAN").unwrap_err();
        assert!(err.has_kind(DiagnosticKind::MalformedConstraint));
    }

    #[test]
    fn syntax_error_location() {
        let err = parse_asn1("A ::= SEQUENCE {\n  x INTEGER (0 .. )\n}").unwrap_err();
        assert_eq!(err.0[0].kind, DiagnosticKind::Syntax);
        assert_eq!((err.0[0].span.line, err.0[0].span.col), (2, 19));
    }

    #[test]
    fn print_parse_fixpoint() {
        let src = "X ::= SEQUENCE { a INTEGER (-3 .. 3), b IA5String (SIZE(0..4)) (FROM(\"a\"..\"f\" | \"\"\"\")), \
                   c SEQUENCE (SIZE(0..2)) OF CHOICE { p NULL, q REAL }, d ENUMERATED { u, v(4) } OPTIONAL, e SEQUENCE {} }";
        let once = parse_asn1(src).unwrap().to_string();
        let twice = parse_asn1(&once).unwrap().to_string();
        assert_eq!(once, twice);
    }
}
