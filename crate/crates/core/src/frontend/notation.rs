//! JSON value notation.
//!
//! Records are objects, lists are arrays, NULL is `null`, integers are
//! numbers, strings are JSON strings whose characters are bytes (U+0000 to
//! U+00FF). A CHOICE value is a single-key object naming the alternative and
//! a REAL is `{"pattern": "<hex>", "width": 32|64}`.
//!
//! Without a schema, objects parse as records and strings as byte strings;
//! [`crate::engine::coerce`] reshapes them against a plan.
//!
//! ```
//! use acnkit::frontend::{parse_value, print_value};
//! use acnkit::value::Value;
//!
//! let v = parse_value(r#"{"n": [1, 2], "name": "ok"}"#).unwrap();
//! assert_eq!(v.field("name"), Some(&Value::str("ok")));
//! assert_eq!(parse_value(&print_value(&v)).unwrap(), v);
//! ```

use serde_json::{Map, Number, Value as Json};
use thiserror::Error;

use crate::codec::RealWidth;
use crate::value::Value;

#[derive(Debug, Error)]
pub enum NotationError {
    #[error("invalid JSON: {0}")]
    Json(#[from] serde_json::Error),
    #[error("{path}: {message}")]
    Value { path: String, message: String },
}

fn bad(path: &str, message: impl Into<String>) -> NotationError {
    NotationError::Value {
        path: path.to_string(),
        message: message.into(),
    }
}

pub fn parse_value(text: &str) -> Result<Value, NotationError> {
    let json: Json = serde_json::from_str(text)?;
    from_json(&json)
}

/// Pretty-printed notation.
pub fn print_value(v: &Value) -> String {
    serde_json::to_string_pretty(&to_json(v)).expect("JSON values always serialize")
}

pub fn from_json(json: &Json) -> Result<Value, NotationError> {
    convert(json, "$")
}

fn convert(json: &Json, path: &str) -> Result<Value, NotationError> {
    Ok(match json {
        Json::Null => Value::Null,
        Json::Bool(b) => Value::Bool(*b),
        Json::Number(n) => match n.as_i64() {
            Some(i) => Value::Int(i),
            None => return Err(bad(path, format!("{n} is not a 64-bit signed integer"))),
        },
        Json::String(s) => Value::Str(latin1(s, path)?),
        Json::Array(items) => Value::List(
            items
                .iter()
                .enumerate()
                .map(|(i, item)| convert(item, &format!("{path}[{i}]")))
                .collect::<Result<_, _>>()?,
        ),
        Json::Object(map) => {
            if let Some(real) = real_from(map, path)? {
                return Ok(real);
            }
            Value::Record(
                map.iter()
                    .map(|(k, v)| Ok((k.clone(), convert(v, &format!("{path}.{k}"))?)))
                    .collect::<Result<_, NotationError>>()?,
            )
        }
    })
}

fn latin1(s: &str, path: &str) -> Result<Vec<u8>, NotationError> {
    s.chars()
        .map(|c| u8::try_from(c as u32).map_err(|_| bad(path, format!("character {c:?} is not a single byte"))))
        .collect()
}

fn real_from(map: &Map<String, Json>, path: &str) -> Result<Option<Value>, NotationError> {
    if map.len() != 2 {
        return Ok(None);
    }
    let (Some(Json::String(hex)), Some(Json::Number(w))) = (map.get("pattern"), map.get("width")) else {
        return Ok(None);
    };
    let width = match w.as_u64().and_then(|w| RealWidth::from_bits(w as u32)) {
        Some(width) => width,
        None => return Err(bad(path, format!("real width must be 32 or 64, got {w}"))),
    };
    let digits = hex.strip_prefix("0x").unwrap_or(hex);
    let pattern = u64::from_str_radix(digits, 16).map_err(|_| bad(path, format!("bad hex pattern {hex:?}")))?;
    if width == RealWidth::W32 && pattern > u32::MAX as u64 {
        return Err(bad(path, format!("pattern {hex} is wider than 32 bits")));
    }
    Ok(Some(Value::Real { pattern, width }))
}

pub fn to_json(v: &Value) -> Json {
    match v {
        Value::Int(i) => Json::Number(Number::from(*i)),
        Value::Bool(b) => Json::Bool(*b),
        Value::Enum(name) => Json::String(name.clone()),
        Value::Str(bytes) => Json::String(bytes.iter().map(|&b| b as char).collect()),
        Value::Null => Json::Null,
        Value::Real { pattern, width } => {
            let digits = (width.bits() / 4) as usize;
            let mut m = Map::new();
            m.insert("pattern".into(), Json::String(format!("{pattern:0digits$x}")));
            m.insert("width".into(), Json::Number(Number::from(width.bits())));
            Json::Object(m)
        }
        Value::Record(fields) => Json::Object(fields.iter().map(|(k, v)| (k.clone(), to_json(v))).collect()),
        Value::Variant(name, inner) => {
            let mut m = Map::new();
            m.insert(name.clone(), to_json(inner));
            Json::Object(m)
        }
        Value::List(items) => Json::Array(items.iter().map(to_json).collect()),
    }
}
