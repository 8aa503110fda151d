//! Plan interpreter: encode, decode, exact sizes, constraint checks, and
//! the runtime roundtrip contracts.
//!
//! ```
//! use acnkit::codec::AcnCodec;
//! use acnkit::compiler::compile_source;
//! use acnkit::engine::{decode, encode};
//! use acnkit::value::Value;
//!
//! let plan = compile_source("T ::= INTEGER (0 .. 255)", "", "T").unwrap();
//! let mut codec = AcnCodec::with_capacity(1).unwrap();
//! let report = encode(&plan, &Value::Int(5), &mut codec).unwrap();
//! assert_eq!((report.bytes, report.bit_length), (vec![0x05], 8));
//!
//! let mut codec = AcnCodec::from_bytes(vec![0x05]).unwrap();
//! assert_eq!(decode(&plan, &mut codec).unwrap().value, Value::Int(5));
//! ```

use std::fmt;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use thiserror::Error;

use crate::bitstream::{padding_bits, BitCursor};
use crate::codec::{bits_needed, Alphabet, AcnCodec, CodecError, WordWidth};
use crate::compiler::plan::{
    CodecPlan, Constraint, Determinant, FieldRole, ListSize, NodeKind, PlanNode, SlotRef, StringLength,
};
use crate::value::Value;

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum EngineError {
    #[error("{path}: {source}")]
    Codec { path: String, source: CodecError },
    #[error("{path}: expected {expected}, found {found}")]
    Shape {
        path: String,
        expected: String,
        found: String,
    },
    #[error("{path}: constraint violated: {message}")]
    Constraint { path: String, message: String },
    #[error("{path}: determinant value {value} selects no alternative")]
    Determinant { path: String, value: i64 },
    #[error("insufficient buffer: the plan needs up to {needed} bits, {available} available")]
    Buffer { needed: u64, available: u64 },
    #[error("{path}: slot `{slot}` is needed both as {first} and as {second}")]
    ConflictingDemand {
        path: String,
        slot: String,
        first: i64,
        second: i64,
    },
    #[error("{path}: {slot} is not bound")]
    Unbound { path: String, slot: String },
}

pub type EngineResult<T> = Result<T, EngineError>;

fn shape(path: &str, expected: impl Into<String>, found: &Value) -> EngineError {
    EngineError::Shape {
        path: path.to_string(),
        expected: expected.into(),
        found: found.shape().to_string(),
    }
}

fn codec_err(path: &str) -> impl Fn(CodecError) -> EngineError + '_ {
    move |source| EngineError::Codec {
        path: path.to_string(),
        source,
    }
}

fn constraint(path: &str, message: impl Into<String>) -> EngineError {
    EngineError::Constraint {
        path: path.to_string(),
        message: message.into(),
    }
}

/// Result of a successful encode.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct EncodeReport {
    /// Bytes covering bits `[start_offset, start_offset + bit_length)`,
    /// starting at the byte that holds `start_offset`.
    pub bytes: Vec<u8>,
    pub bit_length: u64,
    pub start_offset: u64,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Decoded {
    pub value: Value,
    /// Decoded ACN-inserted fields, keyed by instance path.
    pub slots: Vec<(String, i64)>,
}

fn pattern_bytes(hex: &str) -> Vec<u8> {
    (0..hex.len())
        .step_by(2)
        .filter_map(|i| u8::from_str_radix(&hex[i..i + 2], 16).ok())
        .collect()
}

fn alphabet(chars: &str, path: &str) -> EngineResult<Alphabet> {
    Alphabet::new(chars.as_bytes()).map_err(codec_err(path))
}

fn field_path(path: &str, name: &str) -> String {
    format!("{path}.{name}")
}

/// Slot values in scope during a walk.
#[derive(Default)]
struct Env {
    slots: Vec<(String, i64)>,
    params: Vec<Vec<(String, i64)>>,
}

impl Env {
    fn get(&self, r: &SlotRef, path: &str) -> EngineResult<i64> {
        let found = match r {
            SlotRef::Slot(id) => self.slots.iter().rev().find(|(s, _)| s == id).map(|(_, v)| *v),
            SlotRef::Param(p) => self
                .params
                .last()
                .and_then(|frame| frame.iter().find(|(n, _)| n == p))
                .map(|(_, v)| *v),
        };
        found.ok_or_else(|| EngineError::Unbound {
            path: path.to_string(),
            slot: r.to_string(),
        })
    }
}

/// Integer a slot holds for a producer value.
fn slot_of(node: &PlanNode, v: &Value) -> Option<i64> {
    match (&node.core().kind, v) {
        (_, Value::Int(i)) => Some(*i),
        (_, Value::Bool(b)) => Some(*b as i64),
        (NodeKind::Enumerated { items, .. }, Value::Enum(name)) => {
            items.iter().find(|i| &i.name == name).map(|i| i.value)
        }
        _ => None,
    }
}

/// Producer value that carries slot integer `s`.
fn value_of_slot(node: &PlanNode, s: i64) -> Value {
    match &node.core().kind {
        NodeKind::Bool => Value::Bool(s != 0),
        NodeKind::Enumerated { items, .. } => Value::Enum(
            items
                .iter()
                .find(|i| i.value == s)
                .map_or_else(|| format!("#{s}"), |i| i.name.clone()),
        ),
        _ => Value::Int(s),
    }
}

/// Slot value used when nothing consumes an inserted field.
fn default_slot(node: &PlanNode) -> i64 {
    fn lowest(n: &PlanNode) -> Option<i64> {
        match &n.kind {
            NodeKind::ConstraintCheck {
                constraint: Constraint::Range { min, .. },
                ..
            } => Some(*min),
            NodeKind::Align { inner, .. } | NodeKind::ConstraintCheck { inner, .. } => lowest(inner),
            NodeKind::Outlined { body, .. } => lowest(body),
            NodeKind::ConstrainedInt { min, .. } => Some(*min),
            NodeKind::Enumerated { items, .. } => items.first().map(|i| i.value),
            _ => None,
        }
    }
    lowest(node).unwrap_or(0)
}

fn check(c: &Constraint, v: &Value) -> Result<(), String> {
    match (c, v) {
        (Constraint::Range { min, max }, Value::Int(i)) => {
            if i < min || i > max {
                return Err(format!("{i} is outside ({min} .. {max})"));
            }
        }
        (Constraint::Size { min, max }, Value::Str(s)) => {
            let n = s.len() as u64;
            if n < *min || n > *max {
                return Err(format!("length {n} is outside SIZE({min} .. {max})"));
            }
        }
        (Constraint::Size { min, max }, Value::List(items)) => {
            let n = items.len() as u64;
            if n < *min || n > *max {
                return Err(format!("{n} elements is outside SIZE({min} .. {max})"));
            }
        }
        (Constraint::Alphabet { chars }, Value::Str(s)) => {
            // Bytes above 0x7f are reported by the string itself.
            if let Some(i) = s.iter().position(|b| b.is_ascii() && !chars.as_bytes().contains(b)) {
                return Err(format!(
                    "character {:?} at index {i} is not in the permitted alphabet",
                    s[i] as char
                ));
            }
        }
        (_, other) => return Err(format!("{} cannot be checked against {c}", other.shape())),
    }
    Ok(())
}

/// Collects the slot value that consumers below `node` need from the slot
/// `target` (or from parameters aliasing it).
fn demand(
    target: &str,
    node: &PlanNode,
    value: &Value,
    aliases: &[String],
    path: &str,
    out: &mut Option<i64>,
) -> EngineResult<()> {
    let hits = |r: &SlotRef| match r {
        SlotRef::Slot(s) => s == target,
        SlotRef::Param(p) => aliases.contains(p),
    };
    match (&node.kind, value) {
        (NodeKind::Align { inner, .. } | NodeKind::ConstraintCheck { inner, .. }, _) => {
            demand(target, inner, value, aliases, path, out)?
        }
        (NodeKind::Outlined { args, body, .. }, _) => {
            let inner: Vec<String> = args.iter().filter(|b| hits(&b.arg)).map(|b| b.param.clone()).collect();
            if !inner.is_empty() {
                // Only parameters cross an outlined boundary.
                demand("", body, value, &inner, path, out)?;
            }
        }
        (
            NodeKind::StringCharIndex {
                length: StringLength::External { slot },
                ..
            },
            Value::Str(s),
        ) if hits(slot) => demand_put(out, s.len() as i64, target, path)?,
        (NodeKind::Record { fields }, Value::Record(vals)) => {
            for f in fields {
                let fv = vals.iter().find(|(k, _)| k == &f.name).map(|(_, v)| v);
                if let FieldRole::Optional { present_when } = &f.role {
                    if hits(present_when) {
                        demand_put(out, fv.is_some() as i64, target, path)?;
                    }
                }
                if let (Some(fv), false) = (fv, matches!(f.role, FieldRole::Inserted { .. })) {
                    demand(target, &f.node, fv, aliases, &field_path(path, &f.name), out)?;
                }
            }
        }
        (
            NodeKind::Variant {
                determinant,
                alternatives,
            },
            Value::Variant(name, inner),
        ) => {
            if let Some(alt) = alternatives.iter().find(|a| &a.name == name) {
                if let Determinant::Slot { slot } = determinant {
                    if hits(slot) {
                        demand_put(out, alt.select, target, path)?;
                    }
                }
                demand(target, &alt.node, inner, aliases, &field_path(path, name), out)?;
            }
        }
        (NodeKind::List { size, element, .. }, Value::List(items)) => {
            if let ListSize::External { slot } = size {
                if hits(slot) {
                    demand_put(out, items.len() as i64, target, path)?;
                }
            }
            for (i, item) in items.iter().enumerate() {
                demand(target, element, item, aliases, &format!("{path}[{i}]"), out)?;
            }
        }
        _ => {}
    }
    Ok(())
}

struct Encoder<'c> {
    codec: &'c mut AcnCodec,
    env: Env,
}

impl Encoder<'_> {
    fn int(v: &Value, path: &str) -> EngineResult<i64> {
        match v {
            Value::Int(i) => Ok(*i),
            other => Err(shape(path, "integer", other)),
        }
    }

    fn unsigned(v: &Value, path: &str) -> EngineResult<u64> {
        let i = Self::int(v, path)?;
        u64::try_from(i).map_err(|_| constraint(path, format!("{i} is negative but the encoding is unsigned")))
    }

    fn node(&mut self, node: &PlanNode, v: &Value, path: &str) -> EngineResult<()> {
        let c = &mut *self.codec;
        let err = codec_err(path);
        match &node.kind {
            NodeKind::ConstUInt { width, .. } => c.enc_uint_const_size_aligned(Self::unsigned(v, path)?, *width).map_err(err),
            NodeKind::UIntBits { bits } => c.enc_uint_const_size(Self::unsigned(v, path)?, *bits).map_err(err),
            NodeKind::ConstrainedInt { min, max } => {
                c.encode_constrained_whole_number(Self::int(v, path)?, *min, *max).map_err(err)
            }
            NodeKind::TwosComplement { bits } => {
                let i = Self::int(v, path)?;
                match WordWidth::from_bits(*bits) {
                    Some(w) => c.enc_int_twos_complement_const_size_aligned(i, w),
                    None => c.enc_int_twos_complement_const_size(i, *bits),
                }
                .map_err(err)
            }
            NodeKind::Real { width, endianness } => match v {
                Value::Real { pattern, width: w } if w == width => {
                    c.enc_real_ieee754(*pattern, *width, *endianness).map_err(err)
                }
                other => Err(shape(path, format!("{}-bit real", width.bits()), other)),
            },
            NodeKind::Bool => match v {
                Value::Bool(b) => c.enc_boolean(*b).map_err(err),
                other => Err(shape(path, "boolean", other)),
            },
            NodeKind::Null => match v {
                Value::Null => Ok(()),
                other => Err(shape(path, "null", other)),
            },
            NodeKind::Enumerated { items, repr } => match v {
                Value::Enum(name) => match items.iter().find(|i| &i.name == name) {
                    Some(item) => self.node(repr, &Value::Int(item.value), path),
                    None => Err(constraint(path, format!("`{name}` is not an enumeration item"))),
                },
                other => Err(shape(path, "enumeration item", other)),
            },
            NodeKind::StringAsciiNull { max_len, pattern } => match v {
                Value::Str(s) => c
                    .enc_string_ascii_null_terminated(s, *max_len as usize, &pattern_bytes(pattern))
                    .map_err(err),
                other => Err(shape(path, "string", other)),
            },
            NodeKind::StringCharIndex {
                alphabet: chars,
                min_len,
                max_len,
                length,
            } => {
                let Value::Str(s) = v else { return Err(shape(path, "string", v)) };
                let a = alphabet(chars, path)?;
                match length {
                    StringLength::Internal => {
                        c.enc_string_char_index_internal(s, &a, *min_len as usize, *max_len as usize)
                    }
                    StringLength::Fixed => c.enc_string_char_index_external(s, &a, *max_len as usize, *max_len as usize),
                    StringLength::External { slot } => {
                        let n = self.env.get(slot, path)?;
                        self.codec
                            .enc_string_char_index_external(s, &a, *max_len as usize, n.max(0) as usize)
                    }
                }
                .map_err(err)
            }
            NodeKind::Align { to, inner } => {
                c.stream_mut()
                    .align_to(*to as usize)
                    .map_err(|e| codec_err(path)(e.into()))?;
                self.node(inner, v, path)
            }
            NodeKind::ConstraintCheck { constraint: k, inner } => {
                check(k, v).map_err(|m| constraint(path, m))?;
                self.node(inner, v, path)
            }
            NodeKind::Record { fields } => {
                let Value::Record(vals) = v else { return Err(shape(path, "record", v)) };
                for (k, _) in vals {
                    match fields.iter().find(|f| &f.name == k) {
                        None => return Err(shape(&field_path(path, k), "no such field", &vals_get(vals, k))),
                        Some(f) if matches!(f.role, FieldRole::Inserted { .. }) => {
                            return Err(constraint(
                                &field_path(path, k),
                                "ACN-inserted fields are synthesized and must not appear in values",
                            ))
                        }
                        _ => {}
                    }
                }
                let mark = self.env.slots.len();
                for (i, f) in fields.iter().enumerate() {
                    let fpath = field_path(path, &f.name);
                    let fv = vals.iter().find(|(k, _)| k == &f.name).map(|(_, v)| v);
                    match &f.role {
                        FieldRole::Value => match fv {
                            Some(fv) => self.node(&f.node, fv, &fpath)?,
                            None => return Err(shape(&fpath, "a value", &Value::Null)),
                        },
                        FieldRole::Optional { present_when } => {
                            let flag = self.env.get(present_when, &fpath)? != 0;
                            match (flag, fv) {
                                (true, Some(fv)) => self.node(&f.node, fv, &fpath)?,
                                (false, None) => {}
                                _ => {
                                    return Err(constraint(
                                        &fpath,
                                        "field presence contradicts its present-when determinant",
                                    ))
                                }
                            }
                        }
                        FieldRole::Inserted { slot } => {
                            let mut need = None;
                            for later in &fields[i + 1..] {
                                if let Some(lv) = vals.iter().find(|(k, _)| k == &later.name).map(|(_, v)| v) {
                                    if let FieldRole::Optional { present_when: SlotRef::Slot(s) } = &later.role {
                                        if s == slot {
                                            demand_put(&mut need, 1, slot, &fpath)?;
                                        }
                                    }
                                    demand(slot, &later.node, lv, &[], &field_path(path, &later.name), &mut need)?;
                                } else if let FieldRole::Optional { present_when: SlotRef::Slot(s) } = &later.role {
                                    if s == slot {
                                        demand_put(&mut need, 0, slot, &fpath)?;
                                    }
                                }
                            }
                            let s = need.unwrap_or_else(|| default_slot(&f.node));
                            self.node(&f.node, &value_of_slot(&f.node, s), &fpath)?;
                            self.env.slots.push((slot.clone(), s));
                        }
                    }
                }
                self.env.slots.truncate(mark);
                Ok(())
            }
            NodeKind::Variant {
                determinant,
                alternatives,
            } => {
                let Value::Variant(name, inner) = v else { return Err(shape(path, "variant", v)) };
                let Some((idx, alt)) = alternatives.iter().enumerate().find(|(_, a)| &a.name == name) else {
                    return Err(constraint(path, format!("no alternative `{name}`")));
                };
                match determinant {
                    Determinant::Index { .. } => c
                        .encode_constrained_pos_whole_number(idx as u64, 0, alternatives.len() as u64 - 1)
                        .map_err(err)?,
                    Determinant::Slot { slot } => {
                        let got = self.env.get(slot, path)?;
                        if got != alt.select {
                            return Err(constraint(
                                path,
                                format!("determinant is {got} but alternative `{name}` needs {}", alt.select),
                            ));
                        }
                    }
                }
                self.node(&alt.node, inner, &field_path(path, name))
            }
            NodeKind::List {
                min_len,
                max_len,
                size,
                element,
            } => {
                let Value::List(items) = v else { return Err(shape(path, "list", v)) };
                let n = items.len() as u64;
                match size {
                    ListSize::Inline => c.encode_constrained_pos_whole_number(n, *min_len, *max_len).map_err(err)?,
                    ListSize::External { slot } => {
                        let got = self.env.get(slot, path)?;
                        if got != n as i64 {
                            return Err(constraint(path, format!("size determinant is {got} but the list has {n} elements")));
                        }
                        if n < *min_len || n > *max_len {
                            return Err(constraint(path, format!("{n} elements is outside SIZE({min_len} .. {max_len})")));
                        }
                    }
                }
                for (i, item) in items.iter().enumerate() {
                    self.node(element, item, &format!("{path}[{i}]"))?;
                }
                Ok(())
            }
            NodeKind::Outlined { args, body, .. } => {
                let frame = args
                    .iter()
                    .map(|b| Ok((b.param.clone(), self.env.get(&b.arg, path)?)))
                    .collect::<EngineResult<Vec<_>>>()?;
                self.env.params.push(frame);
                let r = self.node(body, v, path);
                self.env.params.pop();
                r
            }
        }
    }
}

fn vals_get(vals: &[(String, Value)], k: &str) -> Value {
    vals.iter().find(|(n, _)| n == k).map(|(_, v)| v.clone()).unwrap_or(Value::Null)
}

fn demand_put(out: &mut Option<i64>, v: i64, slot: &str, path: &str) -> EngineResult<()> {
    match *out {
        Some(w) if w != v => Err(EngineError::ConflictingDemand {
            path: path.to_string(),
            slot: slot.to_string(),
            first: w,
            second: v,
        }),
        _ => {
            *out = Some(v);
            Ok(())
        }
    }
}

/// Encodes `v` at the codec's cursor.
///
/// The codec must have at least the plan's maximum size left. On success
/// the cursor has advanced by exactly [`size_of`] bits and no bit before the
/// start position has changed. On failure bits before the start position
/// are still intact; the cursor is unspecified.
pub fn encode(plan: &CodecPlan, v: &Value, codec: &mut AcnCodec) -> EngineResult<EncodeReport> {
    let needed = plan.root.bounds.max_bits;
    let available = codec.remaining_bits() as u64;
    if available < needed {
        return Err(EngineError::Buffer { needed, available });
    }
    let start = codec.bit_index();
    let mut enc = Encoder {
        codec,
        env: Env::default(),
    };
    enc.node(&plan.root, v, "$")?;
    let end = codec.bit_index();
    Ok(EncodeReport {
        bytes: codec.buf()[start / 8..end.div_ceil(8)].to_vec(),
        bit_length: (end - start) as u64,
        start_offset: start as u64,
    })
}

struct Decoder<'c> {
    codec: &'c mut AcnCodec,
    env: Env,
    slots: Vec<(String, i64)>,
}

impl Decoder<'_> {
    fn node(&mut self, node: &PlanNode, path: &str) -> EngineResult<Value> {
        let c = &mut *self.codec;
        let err = codec_err(path);
        Ok(match &node.kind {
            NodeKind::ConstUInt { width, .. } => {
                let u = c.dec_uint_const_size_aligned(*width).map_err(err)?;
                Value::Int(i64::try_from(u).map_err(|_| constraint(path, format!("{u} exceeds the signed 64-bit range")))?)
            }
            NodeKind::UIntBits { bits } => {
                let u = c.dec_uint_const_size(*bits).map_err(err)?;
                Value::Int(i64::try_from(u).map_err(|_| constraint(path, format!("{u} exceeds the signed 64-bit range")))?)
            }
            NodeKind::ConstrainedInt { min, max } => {
                Value::Int(c.decode_constrained_whole_number(*min, *max).map_err(err)?)
            }
            NodeKind::TwosComplement { bits } => Value::Int(
                match WordWidth::from_bits(*bits) {
                    Some(w) => c.dec_int_twos_complement_const_size_aligned(w),
                    None => c.dec_int_twos_complement_const_size(*bits),
                }
                .map_err(err)?,
            ),
            NodeKind::Real { width, endianness } => Value::Real {
                pattern: c.dec_real_ieee754(*width, *endianness).map_err(err)?,
                width: *width,
            },
            NodeKind::Bool => Value::Bool(c.dec_boolean().map_err(err)?),
            NodeKind::Null => Value::Null,
            NodeKind::Enumerated { items, repr } => {
                let Value::Int(i) = self.node(repr, path)? else { unreachable!("integer repr") };
                match items.iter().find(|it| it.value == i) {
                    Some(it) => Value::Enum(it.name.clone()),
                    None => return Err(constraint(path, format!("decoded value {i} is not an enumeration item"))),
                }
            }
            NodeKind::StringAsciiNull { max_len, pattern } => Value::Str(
                c.dec_string_ascii_null_terminated(*max_len as usize, &pattern_bytes(pattern))
                    .map_err(err)?,
            ),
            NodeKind::StringCharIndex {
                alphabet: chars,
                min_len,
                max_len,
                length,
            } => {
                let a = alphabet(chars, path)?;
                Value::Str(
                    match length {
                        StringLength::Internal => {
                            c.dec_string_char_index_internal(&a, *min_len as usize, *max_len as usize)
                        }
                        StringLength::Fixed => c.dec_string_char_index_external(&a, *max_len as usize, *max_len as usize),
                        StringLength::External { slot } => {
                            let n = self.env.get(slot, path)?;
                            if n < 0 || (n as u64) > *max_len {
                                return Err(constraint(path, format!("length determinant {n} is outside 0 .. {max_len}")));
                            }
                            self.codec.dec_string_char_index_external(&a, *max_len as usize, n as usize)
                        }
                    }
                    .map_err(err)?,
                )
            }
            NodeKind::Align { to, inner } => {
                c.stream_mut()
                    .skip_alignment(*to as usize)
                    .map_err(|e| codec_err(path)(e.into()))?;
                self.node(inner, path)?
            }
            NodeKind::ConstraintCheck { constraint: k, inner } => {
                let v = self.node(inner, path)?;
                check(k, &v).map_err(|m| constraint(path, m))?;
                v
            }
            NodeKind::Record { fields } => {
                let mark = self.env.slots.len();
                let mut out = Vec::new();
                for f in fields {
                    let fpath = field_path(path, &f.name);
                    match &f.role {
                        FieldRole::Value => out.push((f.name.clone(), self.node(&f.node, &fpath)?)),
                        FieldRole::Optional { present_when } => {
                            if self.env.get(present_when, &fpath)? != 0 {
                                out.push((f.name.clone(), self.node(&f.node, &fpath)?));
                            }
                        }
                        FieldRole::Inserted { slot } => {
                            let v = self.node(&f.node, &fpath)?;
                            let s = slot_of(&f.node, &v).expect("inserted fields decode to integers, booleans or items");
                            self.env.slots.push((slot.clone(), s));
                            self.slots.push((fpath, s));
                        }
                    }
                }
                self.env.slots.truncate(mark);
                Value::Record(out)
            }
            NodeKind::Variant {
                determinant,
                alternatives,
            } => {
                let alt = match determinant {
                    Determinant::Index { .. } => {
                        let i = c
                            .decode_constrained_pos_whole_number(0, alternatives.len() as u64 - 1)
                            .map_err(err)?;
                        &alternatives[i as usize]
                    }
                    Determinant::Slot { slot } => {
                        let s = self.env.get(slot, path)?;
                        alternatives
                            .iter()
                            .find(|a| a.select == s)
                            .ok_or_else(|| EngineError::Determinant {
                                path: path.to_string(),
                                value: s,
                            })?
                    }
                };
                let inner = self.node(&alt.node, &field_path(path, &alt.name))?;
                Value::Variant(alt.name.clone(), Box::new(inner))
            }
            NodeKind::List {
                min_len,
                max_len,
                size,
                element,
            } => {
                let n = match size {
                    ListSize::Inline => c.decode_constrained_pos_whole_number(*min_len, *max_len).map_err(err)?,
                    ListSize::External { slot } => {
                        let s = self.env.get(slot, path)?;
                        if s < 0 || (s as u64) < *min_len || (s as u64) > *max_len {
                            return Err(constraint(
                                path,
                                format!("size determinant {s} is outside SIZE({min_len} .. {max_len})"),
                            ));
                        }
                        s as u64
                    }
                };
                let mut items = Vec::with_capacity(n as usize);
                for i in 0..n {
                    items.push(self.node(element, &format!("{path}[{i}]"))?);
                }
                Value::List(items)
            }
            NodeKind::Outlined { args, body, .. } => {
                let frame = args
                    .iter()
                    .map(|b| Ok((b.param.clone(), self.env.get(&b.arg, path)?)))
                    .collect::<EngineResult<Vec<_>>>()?;
                self.env.params.push(frame);
                let r = self.node(body, path);
                self.env.params.pop();
                r?
            }
        })
    }
}

/// Decodes a value at the codec's cursor.
pub fn decode(plan: &CodecPlan, codec: &mut AcnCodec) -> EngineResult<Decoded> {
    let mut dec = Decoder {
        codec,
        env: Env::default(),
        slots: Vec::new(),
    };
    let value = dec.node(&plan.root, "$")?;
    Ok(Decoded {
        value,
        slots: dec.slots,
    })
}

/// Size of an inserted field, which does not depend on its value.
fn fixed_size(node: &PlanNode, offset: u64) -> u64 {
    match &node.kind {
        NodeKind::Align { to, inner } => {
            let pad = padding_bits(offset as usize, *to as usize) as u64;
            pad + fixed_size(inner, offset + pad)
        }
        NodeKind::ConstraintCheck { inner, .. } => fixed_size(inner, offset),
        NodeKind::Outlined { body, .. } => fixed_size(body, offset),
        _ => node.bounds.min_bits,
    }
}

fn size(node: &PlanNode, v: &Value, offset: u64, path: &str) -> EngineResult<u64> {
    Ok(match &node.kind {
        NodeKind::ConstUInt { .. }
        | NodeKind::UIntBits { .. }
        | NodeKind::ConstrainedInt { .. }
        | NodeKind::TwosComplement { .. }
        | NodeKind::Real { .. }
        | NodeKind::Bool
        | NodeKind::Null
        | NodeKind::Enumerated { .. } => node.bounds.min_bits,
        NodeKind::StringAsciiNull { pattern, .. } => match v {
            Value::Str(s) => (s.len() as u64 + pattern.len() as u64 / 2) * 8,
            other => return Err(shape(path, "string", other)),
        },
        NodeKind::StringCharIndex {
            alphabet,
            min_len,
            max_len,
            length,
        } => {
            let Value::Str(s) = v else { return Err(shape(path, "string", v)) };
            let per = bits_needed(alphabet.len() as u64 - 1) as u64;
            let prefix = match length {
                StringLength::Internal => bits_needed(max_len - min_len) as u64,
                _ => 0,
            };
            prefix + s.len() as u64 * per
        }
        NodeKind::Align { to, inner } => {
            let pad = padding_bits(offset as usize, *to as usize) as u64;
            pad + size(inner, v, offset + pad, path)?
        }
        NodeKind::ConstraintCheck { inner, .. } => size(inner, v, offset, path)?,
        NodeKind::Outlined { body, .. } => size(body, v, offset, path)?,
        NodeKind::Record { fields } => {
            let Value::Record(vals) = v else { return Err(shape(path, "record", v)) };
            let mut at = offset;
            for f in fields {
                let fpath = field_path(path, &f.name);
                let fv = vals.iter().find(|(k, _)| k == &f.name).map(|(_, v)| v);
                at += match (&f.role, fv) {
                    (FieldRole::Inserted { .. }, _) => fixed_size(&f.node, at),
                    (_, Some(fv)) => size(&f.node, fv, at, &fpath)?,
                    (FieldRole::Optional { .. }, None) => 0,
                    (FieldRole::Value, None) => return Err(shape(&fpath, "a value", &Value::Null)),
                };
            }
            at - offset
        }
        NodeKind::Variant {
            determinant,
            alternatives,
        } => {
            let Value::Variant(name, inner) = v else { return Err(shape(path, "variant", v)) };
            let Some(alt) = alternatives.iter().find(|a| &a.name == name) else {
                return Err(constraint(path, format!("no alternative `{name}`")));
            };
            let head = match determinant {
                Determinant::Index { bits } => *bits as u64,
                Determinant::Slot { .. } => 0,
            };
            head + size(&alt.node, inner, offset + head, &field_path(path, name))?
        }
        NodeKind::List {
            min_len,
            max_len,
            size: list_size,
            element,
        } => {
            let Value::List(items) = v else { return Err(shape(path, "list", v)) };
            let mut at = offset
                + match list_size {
                    ListSize::Inline => bits_needed(max_len - min_len) as u64,
                    ListSize::External { .. } => 0,
                };
            for (i, item) in items.iter().enumerate() {
                at += size(element, item, at, &format!("{path}[{i}]"))?;
            }
            at - offset
        }
    })
}

/// Exact number of bits `encode` writes for `v` starting at `offset`.
pub fn size_of(plan: &CodecPlan, v: &Value, offset: u64) -> EngineResult<u64> {
    size(&plan.root, v, offset, "$")
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Violation {
    pub path: String,
    pub message: String,
}

impl fmt::Display for Violation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}: {}", self.path, self.message)
    }
}

fn violations(node: &PlanNode, v: &Value, path: &str, out: &mut Vec<Violation>) {
    let mut push = |message: String| {
        out.push(Violation {
            path: path.to_string(),
            message,
        })
    };
    match (&node.kind, v) {
        (NodeKind::ConstraintCheck { constraint: k, inner }, _) => {
            if let Err(m) = check(k, v) {
                push(m);
            }
            violations(inner, v, path, out);
        }
        (NodeKind::Align { inner, .. }, _) => violations(inner, v, path, out),
        (NodeKind::Outlined { body, .. }, _) => violations(body, v, path, out),
        (NodeKind::Enumerated { items, .. }, Value::Enum(name)) => {
            if !items.iter().any(|i| &i.name == name) {
                push(format!("`{name}` is not an enumeration item"));
            }
        }
        (NodeKind::Record { fields }, Value::Record(vals)) => {
            for (k, _) in vals {
                if !fields.iter().any(|f| &f.name == k && !matches!(f.role, FieldRole::Inserted { .. })) {
                    out.push(Violation {
                        path: field_path(path, k),
                        message: "unexpected field".into(),
                    });
                }
            }
            for f in fields {
                let fpath = field_path(path, &f.name);
                match (vals.iter().find(|(k, _)| k == &f.name), &f.role) {
                    (_, FieldRole::Inserted { .. }) => {}
                    (Some((_, fv)), _) => violations(&f.node, fv, &fpath, out),
                    (None, FieldRole::Value) => out.push(Violation {
                        path: fpath,
                        message: "missing field".into(),
                    }),
                    (None, FieldRole::Optional { .. }) => {}
                }
            }
        }
        (NodeKind::Variant { alternatives, .. }, Value::Variant(name, inner)) => {
            match alternatives.iter().find(|a| &a.name == name) {
                Some(a) => violations(&a.node, inner, &field_path(path, name), out),
                None => push(format!("no alternative `{name}`")),
            }
        }
        (NodeKind::List { element, .. }, Value::List(items)) => {
            for (i, item) in items.iter().enumerate() {
                violations(element, item, &format!("{path}[{i}]"), out);
            }
        }
        (NodeKind::ConstUInt { .. } | NodeKind::UIntBits { .. } | NodeKind::ConstrainedInt { .. } | NodeKind::TwosComplement { .. }, Value::Int(_))
        | (NodeKind::Bool, Value::Bool(_))
        | (NodeKind::Null, Value::Null) => {}
        (NodeKind::StringAsciiNull { .. } | NodeKind::StringCharIndex { .. }, Value::Str(s)) => {
            if let Some(i) = s.iter().position(|b| !b.is_ascii()) {
                push(format!("byte {:#04x} at index {i} is outside the 7-bit range", s[i]));
            }
        }
        (NodeKind::Real { width, .. }, Value::Real { width: w, .. }) => {
            if w != width {
                push(format!("expected a {}-bit real", width.bits()));
            }
        }
        (_, other) => push(format!("unexpected {}", other.shape())),
    }
}

/// Evaluates every constraint of the plan against `v`. An empty list means
/// the value is valid.
pub fn check_constraints(plan: &CodecPlan, v: &Value) -> Vec<Violation> {
    let mut out = Vec::new();
    violations(&plan.root, v, "$", &mut out);
    out
}

fn reshape(node: &PlanNode, v: Value, path: &str) -> EngineResult<Value> {
    Ok(match (&node.kind, v) {
        (NodeKind::Align { inner, .. } | NodeKind::ConstraintCheck { inner, .. }, v) => reshape(inner, v, path)?,
        (NodeKind::Outlined { body, .. }, v) => reshape(body, v, path)?,
        (NodeKind::Enumerated { .. }, Value::Str(s)) => Value::Enum(String::from_utf8_lossy(&s).into_owned()),
        (NodeKind::Record { fields }, Value::Record(mut vals)) => {
            let mut out = Vec::with_capacity(vals.len());
            for f in fields {
                if let Some(pos) = vals.iter().position(|(k, _)| k == &f.name) {
                    let (k, fv) = vals.remove(pos);
                    let fv = reshape(&f.node, fv, &field_path(path, &k))?;
                    out.push((k, fv));
                }
            }
            if let Some((k, fv)) = vals.first() {
                return Err(shape(&field_path(path, k), "no such field", fv));
            }
            Value::Record(out)
        }
        (NodeKind::Record { .. }, Value::Real { pattern, width }) => Value::record([
            ("pattern", Value::Str(format!("{pattern:0w$x}", w = (width.bits() / 4) as usize).into_bytes())),
            ("width", Value::Int(width.bits() as i64)),
        ]),
        (NodeKind::Variant { alternatives, .. }, Value::Record(mut vals)) if vals.len() == 1 => {
            let (name, inner) = vals.remove(0);
            let inner = match alternatives.iter().find(|a| a.name == name) {
                Some(a) => reshape(&a.node, inner, &field_path(path, &name))?,
                None => return Err(constraint(path, format!("no alternative `{name}`"))),
            };
            Value::Variant(name, Box::new(inner))
        }
        (NodeKind::Variant { alternatives, .. }, Value::Variant(name, inner)) => {
            let inner = match alternatives.iter().find(|a| a.name == name) {
                Some(a) => reshape(&a.node, *inner, &field_path(path, &name))?,
                None => *inner,
            };
            Value::Variant(name, Box::new(inner))
        }
        (NodeKind::List { element, .. }, Value::List(items)) => Value::List(
            items
                .into_iter()
                .enumerate()
                .map(|(i, item)| reshape(element, item, &format!("{path}[{i}]")))
                .collect::<EngineResult<_>>()?,
        ),
        (_, v) => v,
    })
}

/// Reshapes a schema-less value (as parsed from the JSON notation) to the
/// plan: strings become enumeration items, single-key objects become
/// variants, and record fields are put in declaration order.
pub fn coerce(plan: &CodecPlan, v: Value) -> EngineResult<Value> {
    reshape(&plan.root, v, "$")
}

/// The runtime counterparts of the encoder and decoder postconditions.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Contract {
    Constraints,
    EncodeSucceeds,
    BufferLength,
    ExactAdvance,
    Bounds,
    Prefix,
    DecodeSucceeds,
    ValueEquality,
    CursorEquality,
    PrefixStability,
}

impl fmt::Display for Contract {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Contract::Constraints => "constraints",
            Contract::EncodeSucceeds => "encode-succeeds",
            Contract::BufferLength => "buffer-length",
            Contract::ExactAdvance => "exact-advance",
            Contract::Bounds => "bounds",
            Contract::Prefix => "prefix",
            Contract::DecodeSucceeds => "decode-succeeds",
            Contract::ValueEquality => "value-equality",
            Contract::CursorEquality => "cursor-equality",
            Contract::PrefixStability => "prefix-stability",
        })
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ContractResult {
    pub contract: Contract,
    pub passed: bool,
    pub detail: String,
}

#[derive(Debug, Clone, PartialEq, Eq, Default)]
pub struct RoundtripReport {
    pub results: Vec<ContractResult>,
    /// Exact size at the tested offset, when it could be computed.
    pub size: Option<u64>,
}

impl RoundtripReport {
    pub fn passed(&self) -> bool {
        !self.results.is_empty() && self.results.iter().all(|r| r.passed)
    }

    pub fn failures(&self) -> impl Iterator<Item = &ContractResult> {
        self.results.iter().filter(|r| !r.passed)
    }

    fn record(&mut self, contract: Contract, passed: bool, detail: impl Into<String>) -> bool {
        self.results.push(ContractResult {
            contract,
            passed,
            detail: detail.into(),
        });
        passed
    }
}

impl fmt::Display for RoundtripReport {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for r in &self.results {
            let mark = if r.passed { "ok  " } else { "FAIL" };
            if r.detail.is_empty() {
                writeln!(f, "{mark} {}", r.contract)?;
            } else {
                writeln!(f, "{mark} {}: {}", r.contract, r.detail)?;
            }
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct RoundtripOptions {
    /// Number of prefix-stability trials.
    pub fuzz: usize,
    pub seed: u64,
}

impl Default for RoundtripOptions {
    fn default() -> Self {
        RoundtripOptions { fuzz: 16, seed: 0 }
    }
}

pub type DecodeFn<'a> = &'a dyn Fn(&CodecPlan, &mut AcnCodec) -> EngineResult<Value>;

/// Encodes `v` at `offset` into a buffer of random bits, rewinds, decodes,
/// and checks every [`Contract`].
pub fn roundtrip_check(plan: &CodecPlan, v: &Value, offset: u64, opts: RoundtripOptions) -> RoundtripReport {
    roundtrip_check_with(plan, v, offset, opts, &|p, c| decode(p, c).map(|d| d.value))
}

/// [`roundtrip_check`] with a substitute decoder.
pub fn roundtrip_check_with(
    plan: &CodecPlan,
    v: &Value,
    offset: u64,
    opts: RoundtripOptions,
    decoder: DecodeFn,
) -> RoundtripReport {
    let mut report = RoundtripReport::default();
    let bad = check_constraints(plan, v);
    let detail = bad.iter().map(|b| b.to_string()).collect::<Vec<_>>().join("; ");
    if !report.record(Contract::Constraints, bad.is_empty(), detail) {
        return report;
    }

    let mut rng = ChaCha8Rng::seed_from_u64(opts.seed);
    let bounds = plan.root.bounds;
    // Slack past the maximum size gives the fuzzer bits to flip.
    let capacity_bits = offset + bounds.max_bits + 64;
    let mut bytes = vec![0u8; capacity_bits.div_ceil(8) as usize];
    rng.fill(&mut bytes[..]);
    let mut codec = match AcnCodec::from_bytes(bytes) {
        Ok(c) => c,
        Err(e) => {
            report.record(Contract::EncodeSucceeds, false, e.to_string());
            return report;
        }
    };
    codec
        .stream_mut()
        .set_cursor(BitCursor::new(offset as usize))
        .expect("offset lies inside the buffer");
    let old = codec.clone();

    if let Err(e) = encode(plan, v, &mut codec) {
        report.record(Contract::EncodeSucceeds, false, e.to_string());
        return report;
    }
    report.record(Contract::EncodeSucceeds, true, "");
    report.record(
        Contract::BufferLength,
        codec.buf().len() == old.buf().len(),
        format!("{} -> {} bytes", old.buf().len(), codec.buf().len()),
    );
    let advance = (codec.bit_index() - old.bit_index()) as u64;
    match size_of(plan, v, offset) {
        Ok(sz) => {
            report.size = Some(sz);
            report.record(
                Contract::ExactAdvance,
                advance == sz,
                format!("cursor advanced {advance} bits, size_of is {sz}"),
            );
        }
        Err(e) => {
            report.record(Contract::ExactAdvance, false, e.to_string());
        }
    }
    report.record(
        Contract::Bounds,
        bounds.min_bits <= advance && advance <= bounds.max_bits,
        format!("{advance} bits within {}..{}", bounds.min_bits, bounds.max_bits),
    );
    report.record(
        Contract::Prefix,
        old.is_prefix_of(&codec).unwrap_or(false),
        "",
    );

    let end = codec.bit_index();
    let mut rewound = codec.reset_at(&old).expect("same buffer length");
    let decoded = match decoder(plan, &mut rewound) {
        Ok(d) => d,
        Err(e) => {
            report.record(Contract::DecodeSucceeds, false, e.to_string());
            return report;
        }
    };
    report.record(Contract::DecodeSucceeds, true, "");
    let eq = decoded == *v;
    report.record(
        Contract::ValueEquality,
        eq,
        if eq { String::new() } else { format!("decoded {decoded}, encoded {v}") },
    );
    report.record(
        Contract::CursorEquality,
        rewound.bit_index() == end,
        format!("decoder stopped at bit {}, encoder at {end}", rewound.bit_index()),
    );

    let total_bits = codec.buf().len() as u64 * 8;
    let mut failure = None;
    for trial in 0..opts.fuzz {
        if end as u64 >= total_bits {
            break;
        }
        let mut fuzzed = codec.clone();
        // A decoder that peeks past its end most likely peeks at the next
        // few bits, so the first trial flips the very next bit and every
        // other trial stays close to the end.
        let hi = if trial % 2 == 0 { total_bits.min(end as u64 + 16) } else { total_bits };
        let mut flips: Vec<u64> = (0..rng.gen_range(1..=8)).map(|_| rng.gen_range(end as u64..hi)).collect();
        if trial == 0 {
            flips[0] = end as u64;
        }
        for bit in flips {
            fuzzed.stream_mut().buf_mut()[bit as usize / 8] ^= 0x80 >> (bit % 8);
        }
        let mut r = fuzzed.reset_at(&old).expect("same buffer length");
        match decoder(plan, &mut r) {
            Ok(d) if d == decoded && r.bit_index() == end => {}
            Ok(d) => {
                failure = Some(format!("trial {trial}: decoded {d} ending at bit {}", r.bit_index()));
                break;
            }
            Err(e) => {
                failure = Some(format!("trial {trial}: {e}"));
                break;
            }
        }
    }
    let detail = failure.clone().unwrap_or_else(|| format!("{} trials", opts.fuzz));
    report.record(Contract::PrefixStability, failure.is_none(), detail);
    report
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::compiler::compile_source;

    #[test]
    fn constrained_byte() {
        let plan = compile_source("T ::= INTEGER (0 .. 255)", "", "T").unwrap();
        assert_eq!(size_of(&plan, &Value::Int(5), 3).unwrap(), 8);
        let mut c = AcnCodec::with_capacity(1).unwrap();
        let err = encode(&plan, &Value::Int(300), &mut c).unwrap_err();
        assert!(matches!(err, EngineError::Constraint { .. }), "{err}");
    }

    #[test]
    fn aligned_bool_sizes() {
        let plan = compile_source("T ::= BOOLEAN", "T [align-to-next byte]", "T").unwrap();
        assert_eq!(size_of(&plan, &Value::Bool(true), 3).unwrap(), 6);
        assert_eq!(size_of(&plan, &Value::Bool(true), 8).unwrap(), 1);
    }

    #[test]
    fn buffer_precheck() {
        let plan = compile_source("T ::= INTEGER (0 .. 4294967295)", "T [size 32]", "T").unwrap();
        let mut c = AcnCodec::from_bytes(vec![0; 3]).unwrap();
        assert!(matches!(encode(&plan, &Value::Int(1), &mut c), Err(EngineError::Buffer { .. })));
        let mut c = AcnCodec::from_bytes(vec![0; 3]).unwrap();
        assert!(matches!(decode(&plan, &mut c), Err(EngineError::Codec { .. })));
    }

    #[test]
    fn roundtrip_contracts_pass() {
        let plan = compile_source(
            "T ::= SEQUENCE { a INTEGER (-5 .. 5), s IA5String (SIZE(0..4)), b BOOLEAN }",
            "T [] { a [], s [size null-terminated], b [align-to-next byte] }",
            "T",
        )
        .unwrap();
        let v = Value::record([("a", Value::Int(-3)), ("s", Value::str("hey")), ("b", Value::Bool(true))]);
        for offset in 0..16 {
            let r = roundtrip_check(&plan, &v, offset, RoundtripOptions::default());
            assert!(r.passed(), "{r}");
        }
    }

    #[test]
    fn corrupted_decoder_is_caught() {
        let plan = compile_source("T ::= INTEGER (0 .. 255)", "", "T").unwrap();
        let liar = |p: &CodecPlan, c: &mut AcnCodec| {
            decode(p, c).map(|d| match d.value {
                Value::Int(i) => Value::Int(i ^ 1),
                other => other,
            })
        };
        let r = roundtrip_check_with(&plan, &Value::Int(7), 0, RoundtripOptions::default(), &liar);
        let failed: Vec<Contract> = r.failures().map(|f| f.contract).collect();
        assert_eq!(failed, vec![Contract::ValueEquality]);
    }

    #[test]
    fn violation_paths() {
        let plan = compile_source(
            "T ::= SEQUENCE { xs SEQUENCE (SIZE(2..3)) OF IA5String (SIZE(0..4)) (FROM(\"a\"..\"c\")) }",
            "",
            "T",
        )
        .unwrap();
        let v = Value::record([("xs", Value::List(vec![Value::str("abz")]))]);
        let got = check_constraints(&plan, &v);
        assert_eq!(got.len(), 2);
        assert_eq!(got[0].path, "$.xs");
        assert_eq!(got[1].path, "$.xs[0]");
        assert!(got[1].message.contains("index 2"), "{}", got[1].message);
    }
}
