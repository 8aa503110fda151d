//! Generic values that plans encode and decode.

use std::fmt;

use crate::codec::RealWidth;

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Value {
    Int(i64),
    Bool(bool),
    /// Enumeration item, by name.
    Enum(String),
    Str(Vec<u8>),
    Null,
    /// IEEE-754 bit pattern; never interpreted, so NaN payloads survive.
    Real { pattern: u64, width: RealWidth },
    /// Fields in declaration order. Absent optional fields are left out.
    Record(Vec<(String, Value)>),
    Variant(String, Box<Value>),
    List(Vec<Value>),
}

impl Value {
    pub fn record<I, S>(fields: I) -> Value
    where
        I: IntoIterator<Item = (S, Value)>,
        S: Into<String>,
    {
        Value::Record(fields.into_iter().map(|(k, v)| (k.into(), v)).collect())
    }

    pub fn variant(name: impl Into<String>, inner: Value) -> Value {
        Value::Variant(name.into(), Box::new(inner))
    }

    pub fn str(s: &str) -> Value {
        Value::Str(s.as_bytes().to_vec())
    }

    pub fn real64(x: f64) -> Value {
        Value::Real {
            pattern: x.to_bits(),
            width: RealWidth::W64,
        }
    }

    pub fn real32(x: f32) -> Value {
        Value::Real {
            pattern: x.to_bits() as u64,
            width: RealWidth::W32,
        }
    }

    /// Field lookup on records.
    pub fn field(&self, name: &str) -> Option<&Value> {
        match self {
            Value::Record(fields) => fields.iter().find(|(k, _)| k == name).map(|(_, v)| v),
            _ => None,
        }
    }

    /// Short name of the value's shape, for error messages.
    pub fn shape(&self) -> &'static str {
        match self {
            Value::Int(_) => "integer",
            Value::Bool(_) => "boolean",
            Value::Enum(_) => "enumeration item",
            Value::Str(_) => "string",
            Value::Null => "null",
            Value::Real { .. } => "real",
            Value::Record(_) => "record",
            Value::Variant(..) => "variant",
            Value::List(_) => "list",
        }
    }
}

/// Compact JSON value notation.
impl fmt::Display for Value {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&crate::frontend::notation::to_json(self).to_string())
    }
}
