//! Parsers for the ASN.1 and ACN subsets and for the JSON value notation.

pub mod acn;
pub mod asn1;
pub mod diag;
pub mod lexer;
pub mod notation;

pub use acn::{parse_acn, AcnSpec};
pub use asn1::{parse_asn1, AsnModule};
pub use diag::{Diagnostic, DiagnosticKind, Diagnostics, Source, Span};
pub use notation::{parse_value, print_value};
