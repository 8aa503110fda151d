use std::fmt;

use serde::Serialize;

/// Which of the two paired inputs a span points into.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Hash, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum Source {
    #[default]
    Asn1,
    Acn,
}

/// Location of a construct in its source text. Lines and columns start at 1.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize)]
pub struct Span {
    pub start: usize,
    pub end: usize,
    pub line: u32,
    pub col: u32,
    pub source: Source,
}

impl Span {
    /// Span covering `self` through `other`.
    pub fn to(self, other: Span) -> Span {
        Span {
            start: self.start,
            end: other.end.max(self.end),
            line: self.line,
            col: self.col,
            source: self.source,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum DiagnosticKind {
    Lexical,
    Syntax,
    DuplicateName,
    MalformedConstraint,
    UnknownProperty,
    UnresolvedReference,
    ArityMismatch,
    DeterminantType,
    Ordering,
    Recursion,
    Unsupported,
}

impl fmt::Display for DiagnosticKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            DiagnosticKind::Lexical => "lexical error",
            DiagnosticKind::Syntax => "syntax error",
            DiagnosticKind::DuplicateName => "duplicate name",
            DiagnosticKind::MalformedConstraint => "malformed constraint",
            DiagnosticKind::UnknownProperty => "unknown property",
            DiagnosticKind::UnresolvedReference => "unresolved reference",
            DiagnosticKind::ArityMismatch => "arity mismatch",
            DiagnosticKind::DeterminantType => "determinant type mismatch",
            DiagnosticKind::Ordering => "ordering violation",
            DiagnosticKind::Recursion => "recursive type",
            DiagnosticKind::Unsupported => "unsupported",
        })
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct Diagnostic {
    pub kind: DiagnosticKind,
    pub span: Span,
    pub message: String,
}

impl Diagnostic {
    pub fn new(kind: DiagnosticKind, span: Span, message: impl Into<String>) -> Self {
        Diagnostic {
            kind,
            span,
            message: message.into(),
        }
    }
}

impl fmt::Display for Diagnostic {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}:{}: {}: {}", self.span.line, self.span.col, self.kind, self.message)
    }
}

/// One or more diagnostics; returned whenever parsing or resolution fails.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Diagnostics(pub Vec<Diagnostic>);

impl Diagnostics {
    pub fn iter(&self) -> std::slice::Iter<'_, Diagnostic> {
        self.0.iter()
    }

    pub fn has_kind(&self, kind: DiagnosticKind) -> bool {
        self.0.iter().any(|d| d.kind == kind)
    }

    /// Renders every diagnostic as `file:line:col: kind: message`, where
    /// `file` names the input the diagnostic points into.
    pub fn render(&self, asn1_file: &str, acn_file: &str) -> String {
        self.0
            .iter()
            .map(|d| {
                let file = match d.span.source {
                    Source::Asn1 => asn1_file,
                    Source::Acn => acn_file,
                };
                format!("{file}:{d}")
            })
            .collect::<Vec<_>>()
            .join("\n")
    }
}

impl From<Diagnostic> for Diagnostics {
    fn from(d: Diagnostic) -> Self {
        Diagnostics(vec![d])
    }
}

impl fmt::Display for Diagnostics {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for (i, d) in self.0.iter().enumerate() {
            if i > 0 {
                writeln!(f)?;
            }
            write!(f, "{d}")?;
        }
        Ok(())
    }
}

impl std::error::Error for Diagnostics {}
