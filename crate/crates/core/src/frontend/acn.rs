//! The supported ACN subset.
//!
//! An ACN file is a list of entries, one per ASN.1 type assignment:
//!
//! ```text
//! Name[<ParamType: param, ...>] [prop, prop, ...] [{ child, child, ... }]
//! ```
//!
//! A child is `name[<arg, ...>] [InsertedType] [props] [{ ... }]`. Children
//! that carry a type are ACN-inserted fields. A child without a name
//! (`[props] { ... }`) describes the element of a SEQUENCE OF.

use std::collections::HashSet;
use std::fmt::{self, Write as _};

use crate::codec::Endianness;

use super::diag::{Diagnostic, DiagnosticKind, Diagnostics, Source, Span};
use super::lexer::{tokenize, Tok, TokenStream};

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct AcnSpec {
    pub module: Option<String>,
    pub entries: Vec<AcnEntry>,
}

impl AcnSpec {
    pub fn get(&self, name: &str) -> Option<&AcnEntry> {
        self.entries.iter().find(|e| e.name == name)
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct AcnEntry {
    pub name: String,
    pub params: Vec<AcnParam>,
    pub props: Vec<AcnProp>,
    pub children: Option<Vec<AcnChild>>,
    pub span: Span,
}

/// Formal parameter `Type: name`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct AcnParam {
    pub ty: String,
    pub name: String,
    pub span: Span,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct AcnChild {
    /// `None` for the element of a SEQUENCE OF.
    pub name: Option<String>,
    pub args: Vec<FieldRef>,
    pub inserted: Option<InsertedType>,
    pub props: Vec<AcnProp>,
    pub children: Option<Vec<AcnChild>>,
    pub span: Span,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum InsertedType {
    Integer,
    Boolean,
    Reference(String),
}

impl fmt::Display for InsertedType {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            InsertedType::Integer => f.write_str("INTEGER"),
            InsertedType::Boolean => f.write_str("BOOLEAN"),
            InsertedType::Reference(name) => f.write_str(name),
        }
    }
}

/// A dotted field path such as `n` or `hdr.len`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct FieldRef {
    pub path: Vec<String>,
    pub span: Span,
}

impl fmt::Display for FieldRef {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.path.join("."))
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct AcnProp {
    pub kind: AcnProperty,
    pub span: Span,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum AcnProperty {
    Size(SizeProp),
    Encoding(EncodingProp),
    Endianness(Endianness),
    AlignToNext(AlignTo),
    Determinant(FieldRef),
    PresentWhen(FieldRef),
    TerminationPattern(Vec<u8>),
}

impl AcnProperty {
    pub fn keyword(&self) -> &'static str {
        match self {
            AcnProperty::Size(_) => "size",
            AcnProperty::Encoding(_) => "encoding",
            AcnProperty::Endianness(_) => "endianness",
            AcnProperty::AlignToNext(_) => "align-to-next",
            AcnProperty::Determinant(_) => "determinant",
            AcnProperty::PresentWhen(_) => "present-when",
            AcnProperty::TerminationPattern(_) => "termination-pattern",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum SizeProp {
    Fixed(u64),
    NullTerminated,
    Field(FieldRef),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum EncodingProp {
    PosInt,
    TwosComplement,
    Ieee754Single,
    Ieee754Double,
    Ascii,
    Bcd,
}

impl EncodingProp {
    pub fn keyword(self) -> &'static str {
        match self {
            EncodingProp::PosInt => "pos-int",
            EncodingProp::TwosComplement => "twos-complement",
            EncodingProp::Ieee754Single => "IEEE754-1985-32",
            EncodingProp::Ieee754Double => "IEEE754-1985-64",
            EncodingProp::Ascii => "ASCII",
            EncodingProp::Bcd => "BCD",
        }
    }

    fn from_keyword(s: &str) -> Option<Self> {
        Some(match s {
            "pos-int" => EncodingProp::PosInt,
            "twos-complement" => EncodingProp::TwosComplement,
            "IEEE754-1985-32" => EncodingProp::Ieee754Single,
            "IEEE754-1985-64" => EncodingProp::Ieee754Double,
            "ASCII" => EncodingProp::Ascii,
            "BCD" => EncodingProp::Bcd,
            _ => return None,
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum AlignTo {
    Byte,
    Word,
    Dword,
}

impl AlignTo {
    pub fn bits(self) -> u32 {
        match self {
            AlignTo::Byte => 8,
            AlignTo::Word => 16,
            AlignTo::Dword => 32,
        }
    }

    pub fn keyword(self) -> &'static str {
        match self {
            AlignTo::Byte => "byte",
            AlignTo::Word => "word",
            AlignTo::Dword => "dword",
        }
    }
}

type PResult<T> = Result<T, Diagnostic>;

struct Parser {
    ts: TokenStream,
    diags: Vec<Diagnostic>,
}

/// Parses an ACN file. References are not checked here; see
/// [`crate::compiler::resolve`].
pub fn parse_acn(text: &str) -> Result<AcnSpec, Diagnostics> {
    let toks = tokenize(text, Source::Acn)?;
    let mut p = Parser {
        ts: TokenStream::new(toks),
        diags: Vec::new(),
    };
    let spec = p.spec()?;
    if p.diags.is_empty() {
        Ok(spec)
    } else {
        Err(Diagnostics(p.diags))
    }
}

impl Parser {
    fn spec(&mut self) -> PResult<AcnSpec> {
        let shell = matches!(self.ts.peek_at(1), Tok::Ident(s) if s == "DEFINITIONS");
        let module = if shell {
            let (name, _) = self.ts.expect_ident("a module name")?;
            self.ts.expect_keyword("DEFINITIONS")?;
            self.ts.expect(&Tok::Assign)?;
            self.ts.expect_keyword("BEGIN")?;
            Some(name)
        } else {
            None
        };
        let mut entries: Vec<AcnEntry> = Vec::new();
        let mut seen = HashSet::new();
        loop {
            if shell && self.ts.eat_keyword("END") {
                break;
            }
            if !shell && self.ts.at(&Tok::Eof) {
                break;
            }
            let e = self.entry()?;
            if !seen.insert(e.name.clone()) {
                self.diags.push(Diagnostic::new(
                    DiagnosticKind::DuplicateName,
                    e.span,
                    format!("ACN entry `{}` appears twice", e.name),
                ));
            }
            entries.push(e);
        }
        if !self.ts.at(&Tok::Eof) {
            return Err(self.ts.unexpected("end of input"));
        }
        Ok(AcnSpec { module, entries })
    }

    fn entry(&mut self) -> PResult<AcnEntry> {
        let (name, start) = self.ts.expect_ident("a type name")?;
        let mut params = Vec::new();
        if self.ts.eat(&Tok::Lt) {
            loop {
                let (ty, span) = self.ts.expect_ident("a parameter type")?;
                self.ts.expect(&Tok::Colon)?;
                let (pname, end) = self.ts.expect_ident("a parameter name")?;
                params.push(AcnParam {
                    ty,
                    name: pname,
                    span: span.to(end),
                });
                if !self.ts.eat(&Tok::Comma) {
                    break;
                }
            }
            self.ts.expect(&Tok::Gt)?;
        }
        let props = self.props()?;
        let children = self.children()?;
        Ok(AcnEntry {
            name,
            params,
            props,
            children,
            span: start.to(self.ts.prev_span()),
        })
    }

    fn children(&mut self) -> PResult<Option<Vec<AcnChild>>> {
        if !self.ts.eat(&Tok::LBrace) {
            return Ok(None);
        }
        let mut children: Vec<AcnChild> = Vec::new();
        let mut names = HashSet::new();
        if !self.ts.at(&Tok::RBrace) {
            loop {
                let c = self.child()?;
                if let Some(n) = &c.name {
                    if !names.insert(n.clone()) {
                        self.diags.push(Diagnostic::new(
                            DiagnosticKind::DuplicateName,
                            c.span,
                            format!("child `{n}` appears twice"),
                        ));
                    }
                }
                children.push(c);
                if !self.ts.eat(&Tok::Comma) {
                    break;
                }
            }
        }
        self.ts.expect(&Tok::RBrace)?;
        Ok(Some(children))
    }

    fn child(&mut self) -> PResult<AcnChild> {
        let start = self.ts.span();
        let name = match self.ts.peek() {
            Tok::LBracket => None,
            _ => Some(self.ts.expect_ident("a field name or `[`")?.0),
        };
        let mut args = Vec::new();
        if name.is_some() && self.ts.eat(&Tok::Lt) {
            loop {
                args.push(self.field_ref()?);
                if !self.ts.eat(&Tok::Comma) {
                    break;
                }
            }
            self.ts.expect(&Tok::Gt)?;
        }
        let inserted = match self.ts.peek().clone() {
            Tok::Ident(ty) if name.is_some() => {
                self.ts.bump();
                Some(match ty.as_str() {
                    "INTEGER" => InsertedType::Integer,
                    "BOOLEAN" => InsertedType::Boolean,
                    _ => InsertedType::Reference(ty),
                })
            }
            _ => None,
        };
        let props = self.props()?;
        let children = self.children()?;
        Ok(AcnChild {
            name,
            args,
            inserted,
            props,
            children,
            span: start.to(self.ts.prev_span()),
        })
    }

    fn field_ref(&mut self) -> PResult<FieldRef> {
        let (first, start) = self.ts.expect_ident("a field reference")?;
        let mut path = vec![first];
        while self.ts.eat(&Tok::Dot) {
            path.push(self.ts.expect_ident("a field name")?.0);
        }
        Ok(FieldRef {
            path,
            span: start.to(self.ts.prev_span()),
        })
    }

    // Property brackets are mandatory, even when empty.
    fn props(&mut self) -> PResult<Vec<AcnProp>> {
        self.ts.expect(&Tok::LBracket)?;
        let mut props: Vec<AcnProp> = Vec::new();
        if !self.ts.at(&Tok::RBracket) {
            loop {
                let p = self.prop()?;
                if props.iter().any(|q| q.kind.keyword() == p.kind.keyword()) {
                    self.diags.push(Diagnostic::new(
                        DiagnosticKind::DuplicateName,
                        p.span,
                        format!("property `{}` given twice", p.kind.keyword()),
                    ));
                }
                props.push(p);
                if !self.ts.eat(&Tok::Comma) {
                    break;
                }
            }
        }
        self.ts.expect(&Tok::RBracket)?;
        Ok(props)
    }

    fn prop(&mut self) -> PResult<AcnProp> {
        let (key, start) = self.ts.expect_ident("a property")?;
        let kind = match key.as_str() {
            "size" => match self.ts.peek().clone() {
                Tok::Number(n) => {
                    self.ts.bump();
                    AcnProperty::Size(SizeProp::Fixed(n))
                }
                Tok::Ident(s) if s == "null-terminated" => {
                    self.ts.bump();
                    AcnProperty::Size(SizeProp::NullTerminated)
                }
                Tok::Ident(_) => AcnProperty::Size(SizeProp::Field(self.field_ref()?)),
                _ => return Err(self.ts.unexpected("a bit count, `null-terminated` or a field")),
            },
            "encoding" => {
                let (v, span) = self.ts.expect_ident("an encoding")?;
                match EncodingProp::from_keyword(&v) {
                    Some(e) => AcnProperty::Encoding(e),
                    None => {
                        return Err(Diagnostic::new(
                            DiagnosticKind::UnknownProperty,
                            span,
                            format!("unknown encoding `{v}`"),
                        ))
                    }
                }
            }
            "endianness" => {
                let (v, span) = self.ts.expect_ident("`big` or `little`")?;
                match v.as_str() {
                    "big" => AcnProperty::Endianness(Endianness::Big),
                    "little" => AcnProperty::Endianness(Endianness::Little),
                    _ => {
                        return Err(Diagnostic::new(
                            DiagnosticKind::UnknownProperty,
                            span,
                            format!("unknown endianness `{v}`"),
                        ))
                    }
                }
            }
            "align-to-next" => {
                let (v, span) = self.ts.expect_ident("`byte`, `word` or `dword`")?;
                match v.as_str() {
                    "byte" => AcnProperty::AlignToNext(AlignTo::Byte),
                    "word" => AcnProperty::AlignToNext(AlignTo::Word),
                    "dword" => AcnProperty::AlignToNext(AlignTo::Dword),
                    _ => {
                        return Err(Diagnostic::new(
                            DiagnosticKind::UnknownProperty,
                            span,
                            format!("unknown alignment `{v}`"),
                        ))
                    }
                }
            }
            "determinant" => AcnProperty::Determinant(self.field_ref()?),
            "present-when" => AcnProperty::PresentWhen(self.field_ref()?),
            "termination-pattern" => match self.ts.peek().clone() {
                Tok::Hex(bytes) => {
                    self.ts.bump();
                    AcnProperty::TerminationPattern(bytes)
                }
                _ => return Err(self.ts.unexpected("a hex string such as '00'H")),
            },
            _ => {
                return Err(Diagnostic::new(
                    DiagnosticKind::UnknownProperty,
                    start,
                    format!("unknown property `{key}`"),
                ))
            }
        };
        Ok(AcnProp {
            kind,
            span: start.to(self.ts.prev_span()),
        })
    }
}

impl fmt::Display for AcnProperty {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            AcnProperty::Size(SizeProp::Fixed(n)) => write!(f, "size {n}"),
            AcnProperty::Size(SizeProp::NullTerminated) => f.write_str("size null-terminated"),
            AcnProperty::Size(SizeProp::Field(r)) => write!(f, "size {r}"),
            AcnProperty::Encoding(e) => write!(f, "encoding {}", e.keyword()),
            AcnProperty::Endianness(e) => write!(f, "endianness {e}"),
            AcnProperty::AlignToNext(a) => write!(f, "align-to-next {}", a.keyword()),
            AcnProperty::Determinant(r) => write!(f, "determinant {r}"),
            AcnProperty::PresentWhen(r) => write!(f, "present-when {r}"),
            AcnProperty::TerminationPattern(bytes) => {
                f.write_str("termination-pattern '")?;
                for b in bytes {
                    write!(f, "{b:02X}")?;
                }
                f.write_str("'H")
            }
        }
    }
}

fn write_props(out: &mut String, props: &[AcnProp]) {
    let parts: Vec<String> = props.iter().map(|p| p.kind.to_string()).collect();
    let _ = write!(out, "[{}]", parts.join(", "));
}

fn write_children(out: &mut String, children: &Option<Vec<AcnChild>>, indent: usize) {
    let Some(children) = children else { return };
    if children.is_empty() {
        out.push_str(" {}");
        return;
    }
    out.push_str(" {");
    let pad = "  ".repeat(indent + 1);
    for (i, c) in children.iter().enumerate() {
        out.push_str(if i == 0 { "\n" } else { ",\n" });
        out.push_str(&pad);
        if let Some(name) = &c.name {
            out.push_str(name);
            if !c.args.is_empty() {
                let args: Vec<String> = c.args.iter().map(|a| a.to_string()).collect();
                let _ = write!(out, "<{}>", args.join(", "));
            }
            out.push(' ');
            if let Some(ty) = &c.inserted {
                let _ = write!(out, "{ty} ");
            }
        }
        write_props(out, &c.props);
        write_children(out, &c.children, indent + 1);
    }
    let _ = write!(out, "\n{}}}", "  ".repeat(indent));
}

/// Canonical text; parsing it yields the same spec up to spans.
impl fmt::Display for AcnSpec {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if let Some(m) = &self.module {
            writeln!(f, "{m} DEFINITIONS ::= BEGIN")?;
        }
        for e in &self.entries {
            let mut s = e.name.clone();
            if !e.params.is_empty() {
                let ps: Vec<String> = e.params.iter().map(|p| format!("{}: {}", p.ty, p.name)).collect();
                let _ = write!(s, "<{}>", ps.join(", "));
            }
            s.push(' ');
            write_props(&mut s, &e.props);
            write_children(&mut s, &e.children, 0);
            writeln!(f, "{s}")?;
        }
        if self.module.is_some() {
            writeln!(f, "END")?;
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn property_forms() {
        let spec = parse_acn(
            "T [size 16, encoding pos-int, endianness big, align-to-next word] \
             { a [size null-terminated, termination-pattern '0D0A'H], b [size hdr.len], c [present-when flag] }",
        )
        .unwrap();
        let e = &spec.entries[0];
        assert_eq!(e.props.len(), 4);
        assert_eq!(e.props[0].kind, AcnProperty::Size(SizeProp::Fixed(16)));
        let ch = e.children.as_ref().unwrap();
        assert_eq!(ch[0].props[1].kind, AcnProperty::TerminationPattern(vec![0x0D, 0x0A]));
        match &ch[1].props[0].kind {
            AcnProperty::Size(SizeProp::Field(r)) => assert_eq!(r.path, vec!["hdr", "len"]),
            other => panic!("{other:?}"),
        }
    }

    #[test]
    fn unknown_property() {
        let err = parse_acn("T [colour blue]").unwrap_err();
        assert!(err.has_kind(DiagnosticKind::UnknownProperty));
        let err = parse_acn("T [encoding EBCDIC]").unwrap_err();
        assert!(err.has_kind(DiagnosticKind::UnknownProperty));
    }

    #[test]
    fn brackets_are_required() {
        assert!(parse_acn("T").is_err());
        assert!(parse_acn("T [] { a }").is_err());
    }

    #[test]
    fn inserted_and_element_children() {
        let spec = parse_acn("L [] { n INTEGER [size 8], items [size n] { [align-to-next byte] } }").unwrap();
        let ch = spec.entries[0].children.as_ref().unwrap();
        assert_eq!(ch[0].inserted, Some(InsertedType::Integer));
        let elem = &ch[1].children.as_ref().unwrap()[0];
        assert_eq!(elem.name, None);
        assert_eq!(elem.props[0].kind, AcnProperty::AlignToNext(AlignTo::Byte));
    }

    #[test]
    fn printer_fixpoint() {
        let src = "M DEFINITIONS ::= BEGIN\nC<PhysicalDev-ID: device> [determinant device] { dev1 [/*...*/] }\n\
                   S [] { d PhysicalDev-ID [size 8], c<d> [], s [size null-terminated, termination-pattern '00'H], e [] {} }\nEND";
        let once = parse_acn(src).unwrap().to_string();
        assert_eq!(once, parse_acn(&once).unwrap().to_string());
    }
}
