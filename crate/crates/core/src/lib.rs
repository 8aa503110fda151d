//! Schema-driven ASN.1/ACN codecs.
//!
//! An ASN.1 module says what a message contains; an ACN specification says
//! exactly how each field is laid out on the wire, down to the bit. acnkit
//! reads both, compiles a type into a [`compiler::CodecPlan`], and
//! interprets that plan to encode, decode and size values.
//!
//! The layers, bottom up:
//!
//! - [`bitstream`]: MSB-first bit stream over a fixed buffer.
//! - [`codec`]: the ACN primitive encoders and decoders.
//! - [`frontend`]: lexers, parsers and printers for the ASN.1 subset, ACN,
//!   and the JSON value notation.
//! - [`compiler`]: name resolution, slot wiring and size bounds.
//! - [`engine`]: the plan interpreter and the roundtrip contract checks.
//! - [`gen`]: random schemas and values for property tests.
//! - [`cli`]: the `acnkit` command.
//!
//! ```
//! use acnkit::codec::AcnCodec;
//! use acnkit::compiler::compile_source;
//! use acnkit::engine::{decode, encode};
//! use acnkit::value::Value;
//!
//! let plan = compile_source(
//!     "Msg ::= SEQUENCE { id INTEGER (0 .. 15), ok BOOLEAN }",
//!     "Msg [] { id [], ok [] }",
//!     "Msg",
//! )
//! .unwrap();
//! let v = Value::record([("id", Value::Int(9)), ("ok", Value::Bool(true))]);
//!
//! let mut out = AcnCodec::with_capacity(1).unwrap();
//! let report = encode(&plan, &v, &mut out).unwrap();
//! assert_eq!((report.bytes, report.bit_length), (vec![0b1001_1000], 5));
//!
//! let mut input = AcnCodec::from_bytes(vec![0b1001_1000]).unwrap();
//! assert_eq!(decode(&plan, &mut input).unwrap().value, v);
//! ```

pub mod bitstream;
pub mod codec;
pub mod frontend;
pub mod value;
pub mod compiler;
pub mod engine;
pub mod gen;
pub mod cli;
