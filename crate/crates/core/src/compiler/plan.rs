//! Codec plans: the compiled, interpretable form of a type.
//!
//! A plan is an immutable tree of [`PlanNode`]s. Every node carries its
//! static [`SizeBounds`]. ACN-inserted fields are record fields with the
//! [`FieldRole::Inserted`] role; they produce named slots that later nodes
//! consume through [`SlotRef`]s.

use std::collections::HashSet;
use std::fmt;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::codec::{bits_needed, Alphabet, Endianness, RealWidth, WordWidth};

pub const PLAN_FORMAT: &str = "acnkit-plan/1";

/// Coarsest modulus `m` such that the exact size depends on the start
/// offset only through `offset % m`. Ordered from finest to coarsest.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize, Default)]
#[serde(rename_all = "lowercase")]
pub enum AlignClass {
    #[default]
    None,
    Mod8,
    Mod16,
    Mod32,
}

impl AlignClass {
    pub fn modulus(self) -> Option<u64> {
        match self {
            AlignClass::None => None,
            AlignClass::Mod8 => Some(8),
            AlignClass::Mod16 => Some(16),
            AlignClass::Mod32 => Some(32),
        }
    }

    pub fn for_alignment(bits: u32) -> AlignClass {
        match bits {
            8 => AlignClass::Mod8,
            16 => AlignClass::Mod16,
            _ => AlignClass::Mod32,
        }
    }
}

impl fmt::Display for AlignClass {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            AlignClass::None => "none",
            AlignClass::Mod8 => "mod8",
            AlignClass::Mod16 => "mod16",
            AlignClass::Mod32 => "mod32",
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "camelCase")]
pub struct SizeBounds {
    pub min_bits: u64,
    pub max_bits: u64,
    pub alignment: AlignClass,
}

impl SizeBounds {
    pub fn fixed(bits: u64) -> Self {
        SizeBounds {
            min_bits: bits,
            max_bits: bits,
            alignment: AlignClass::None,
        }
    }

    fn seq(self, other: SizeBounds) -> SizeBounds {
        SizeBounds {
            min_bits: self.min_bits.saturating_add(other.min_bits),
            max_bits: self.max_bits.saturating_add(other.max_bits),
            alignment: self.alignment.max(other.alignment),
        }
    }
}

impl fmt::Display for SizeBounds {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}..{} bits, alignment {}", self.min_bits, self.max_bits, self.alignment)
    }
}

/// Reference to a slot value: an inserted field visible in the current
/// scope, or a parameter of the enclosing outlined node.
#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum SlotRef {
    Slot(String),
    Param(String),
}

impl fmt::Display for SlotRef {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            SlotRef::Slot(s) => write!(f, "slot `{s}`"),
            SlotRef::Param(p) => write!(f, "parameter `{p}`"),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct EnumItemPlan {
    pub name: String,
    pub value: i64,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "mode", rename_all = "lowercase")]
pub enum StringLength {
    /// Constrained-number length prefix over `[minLen, maxLen]`.
    Internal,
    /// Length carried by a slot.
    External { slot: SlotRef },
    /// Always `maxLen` characters.
    Fixed,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "check", rename_all = "lowercase")]
pub enum Constraint {
    Range { min: i64, max: i64 },
    Size { min: u64, max: u64 },
    Alphabet { chars: String },
}

impl fmt::Display for Constraint {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Constraint::Range { min, max } => write!(f, "({min} .. {max})"),
            Constraint::Size { min, max } => write!(f, "SIZE({min} .. {max})"),
            Constraint::Alphabet { chars } => write!(f, "FROM({chars:?})"),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "role", rename_all = "lowercase")]
pub enum FieldRole {
    Value,
    Optional {
        #[serde(rename = "presentWhen")]
        present_when: SlotRef,
    },
    /// ACN-inserted field producing `slot`; never part of the value.
    Inserted { slot: String },
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct FieldPlan {
    pub name: String,
    #[serde(flatten)]
    pub role: FieldRole,
    pub node: PlanNode,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "by", rename_all = "lowercase")]
pub enum Determinant {
    /// Alternative chosen by a slot; alternatives carry the selecting value.
    Slot { slot: SlotRef },
    /// Alternative index encoded in front of the variant.
    Index { bits: u32 },
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct AlternativePlan {
    pub name: String,
    pub select: i64,
    pub node: PlanNode,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "mode", rename_all = "lowercase")]
pub enum ListSize {
    /// Constrained-number count in front of the elements.
    Inline,
    External { slot: SlotRef },
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Binding {
    pub param: String,
    pub arg: SlotRef,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "kind")]
pub enum NodeKind {
    ConstUInt {
        width: WordWidth,
        endianness: Endianness,
    },
    UIntBits {
        bits: u32,
    },
    ConstrainedInt {
        min: i64,
        max: i64,
    },
    TwosComplement {
        bits: u32,
    },
    Real {
        width: RealWidth,
        endianness: Endianness,
    },
    Bool,
    Null,
    /// Items map to integers, which `repr` encodes.
    Enumerated {
        items: Vec<EnumItemPlan>,
        repr: Box<PlanNode>,
    },
    StringAsciiNull {
        #[serde(rename = "maxLen")]
        max_len: u64,
        /// Termination pattern, hex.
        pattern: String,
    },
    StringCharIndex {
        alphabet: String,
        #[serde(rename = "minLen")]
        min_len: u64,
        #[serde(rename = "maxLen")]
        max_len: u64,
        length: StringLength,
    },
    Align {
        to: u32,
        inner: Box<PlanNode>,
    },
    ConstraintCheck {
        constraint: Constraint,
        inner: Box<PlanNode>,
    },
    Record {
        fields: Vec<FieldPlan>,
    },
    Variant {
        determinant: Determinant,
        alternatives: Vec<AlternativePlan>,
    },
    List {
        #[serde(rename = "minLen")]
        min_len: u64,
        #[serde(rename = "maxLen")]
        max_len: u64,
        size: ListSize,
        element: Box<PlanNode>,
    },
    /// A type assignment instantiated with ACN arguments.
    Outlined {
        name: String,
        args: Vec<Binding>,
        body: Box<PlanNode>,
    },
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct PlanNode {
    #[serde(flatten)]
    pub kind: NodeKind,
    pub bounds: SizeBounds,
}

impl PlanNode {
    /// Wraps `kind` with its computed bounds.
    pub fn new(kind: NodeKind) -> PlanNode {
        let bounds = compute_bounds(&kind);
        PlanNode { kind, bounds }
    }

    /// Looks through alignment, constraint and outlining wrappers.
    pub fn core(&self) -> &PlanNode {
        match &self.kind {
            NodeKind::Align { inner, .. } | NodeKind::ConstraintCheck { inner, .. } => inner.core(),
            NodeKind::Outlined { body, .. } => body.core(),
            _ => self,
        }
    }
}

/// Bounds of a node from those of its children.
pub fn compute_bounds(kind: &NodeKind) -> SizeBounds {
    match kind {
        NodeKind::ConstUInt { width, .. } => SizeBounds::fixed(width.bits() as u64),
        NodeKind::UIntBits { bits } | NodeKind::TwosComplement { bits } => SizeBounds::fixed(*bits as u64),
        NodeKind::ConstrainedInt { min, max } => {
            SizeBounds::fixed(bits_needed(max.wrapping_sub(*min) as u64) as u64)
        }
        NodeKind::Real { width, .. } => SizeBounds::fixed(width.bits() as u64),
        NodeKind::Bool => SizeBounds::fixed(1),
        NodeKind::Null => SizeBounds::fixed(0),
        NodeKind::Enumerated { repr, .. } => repr.bounds,
        NodeKind::StringAsciiNull { max_len, pattern } => {
            let term = pattern.len() as u64 / 2 * 8;
            SizeBounds {
                min_bits: term,
                max_bits: max_len.saturating_mul(8).saturating_add(term),
                alignment: AlignClass::None,
            }
        }
        NodeKind::StringCharIndex {
            alphabet,
            min_len,
            max_len,
            length,
        } => {
            let per = bits_needed((alphabet.len() as u64).saturating_sub(1)) as u64;
            let prefix = match length {
                StringLength::Internal => bits_needed(max_len.saturating_sub(*min_len)) as u64,
                _ => 0,
            };
            let lo = match length {
                StringLength::Fixed => *max_len,
                _ => *min_len,
            };
            SizeBounds {
                min_bits: prefix + lo.saturating_mul(per),
                max_bits: prefix + max_len.saturating_mul(per),
                alignment: AlignClass::None,
            }
        }
        NodeKind::Align { to, inner } => SizeBounds {
            min_bits: inner.bounds.min_bits,
            max_bits: inner.bounds.max_bits.saturating_add(*to as u64 - 1),
            alignment: inner.bounds.alignment.max(AlignClass::for_alignment(*to)),
        },
        NodeKind::ConstraintCheck { inner, .. } => inner.bounds,
        NodeKind::Outlined { body, .. } => body.bounds,
        NodeKind::Record { fields } => fields.iter().fold(SizeBounds::fixed(0), |acc, f| {
            let b = match f.role {
                FieldRole::Optional { .. } => SizeBounds {
                    min_bits: 0,
                    ..f.node.bounds
                },
                _ => f.node.bounds,
            };
            acc.seq(b)
        }),
        NodeKind::Variant {
            determinant,
            alternatives,
        } => {
            let head = match determinant {
                Determinant::Index { bits } => *bits as u64,
                Determinant::Slot { .. } => 0,
            };
            let mut b = SizeBounds {
                min_bits: alternatives.iter().map(|a| a.node.bounds.min_bits).min().unwrap_or(0),
                max_bits: alternatives.iter().map(|a| a.node.bounds.max_bits).max().unwrap_or(0),
                alignment: alternatives
                    .iter()
                    .map(|a| a.node.bounds.alignment)
                    .max()
                    .unwrap_or_default(),
            };
            b.min_bits += head;
            b.max_bits = b.max_bits.saturating_add(head);
            b
        }
        NodeKind::List {
            min_len,
            max_len,
            size,
            element,
        } => {
            let head = match size {
                ListSize::Inline => bits_needed(max_len.saturating_sub(*min_len)) as u64,
                ListSize::External { .. } => 0,
            };
            SizeBounds {
                min_bits: head + min_len.saturating_mul(element.bounds.min_bits),
                max_bits: head.saturating_add(max_len.saturating_mul(element.bounds.max_bits)),
                alignment: element.bounds.alignment,
            }
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct CodecPlan {
    pub format: String,
    #[serde(rename = "type")]
    pub type_name: String,
    pub root: PlanNode,
}

impl CodecPlan {
    pub fn new(type_name: impl Into<String>, root: PlanNode) -> Self {
        CodecPlan {
            format: PLAN_FORMAT.to_string(),
            type_name: type_name.into(),
            root,
        }
    }

    pub fn bounds(&self) -> SizeBounds {
        self.root.bounds
    }

    /// Canonical JSON text.
    pub fn dump(&self) -> String {
        let mut s = serde_json::to_string_pretty(self).expect("plans always serialize");
        s.push('\n');
        s
    }

    /// Parses and validates plan text.
    pub fn load(text: &str) -> Result<CodecPlan, PlanError> {
        let plan: CodecPlan = serde_json::from_str(text).map_err(|e| PlanError::Syntax(e.to_string()))?;
        plan.validate()?;
        Ok(plan)
    }

    /// Checks every structural invariant: stored bounds match, slot
    /// references point at slots produced earlier in scope, names are
    /// unique, and parameters are parameter-compatible.
    pub fn validate(&self) -> Result<(), PlanError> {
        if self.format != PLAN_FORMAT {
            return Err(PlanError::Invalid {
                path: String::new(),
                message: format!("unsupported format `{}`", self.format),
            });
        }
        let mut v = Validator {
            outlined: HashSet::new(),
            slots: HashSet::new(),
        };
        v.node(&self.root, "$", &mut Scope::default())
    }

    /// Every Outlined node in encoding order, as `(name, bindings)`.
    pub fn outlined(&self) -> Vec<(&str, &[Binding])> {
        fn walk<'a>(n: &'a PlanNode, out: &mut Vec<(&'a str, &'a [Binding])>) {
            if let NodeKind::Outlined { name, args, .. } = &n.kind {
                out.push((name, args));
            }
            for c in children(n) {
                walk(c, out);
            }
        }
        let mut out = Vec::new();
        walk(&self.root, &mut out);
        out
    }
}

/// Direct child nodes, in encoding order.
pub fn children(n: &PlanNode) -> Vec<&PlanNode> {
    match &n.kind {
        NodeKind::Enumerated { repr, .. } => vec![repr],
        NodeKind::Align { inner, .. } | NodeKind::ConstraintCheck { inner, .. } => vec![inner],
        NodeKind::Outlined { body, .. } => vec![body],
        NodeKind::Record { fields } => fields.iter().map(|f| &f.node).collect(),
        NodeKind::Variant { alternatives, .. } => alternatives.iter().map(|a| &a.node).collect(),
        NodeKind::List { element, .. } => vec![element],
        _ => Vec::new(),
    }
}

#[derive(Debug, Error, PartialEq, Eq)]
pub enum PlanError {
    #[error("malformed plan text: {0}")]
    Syntax(String),
    #[error("invalid plan at {path}: {message}")]
    Invalid { path: String, message: String },
}

#[derive(Default, Clone)]
struct Scope {
    /// Slots produced so far and visible here.
    slots: Vec<String>,
    params: Vec<String>,
}

struct Validator {
    outlined: HashSet<String>,
    slots: HashSet<String>,
}

fn invalid(path: &str, message: impl Into<String>) -> PlanError {
    PlanError::Invalid {
        path: path.to_string(),
        message: message.into(),
    }
}

impl Validator {
    fn slot_ref(&self, r: &SlotRef, scope: &Scope, path: &str) -> Result<(), PlanError> {
        let ok = match r {
            SlotRef::Slot(s) => scope.slots.contains(s),
            SlotRef::Param(p) => scope.params.contains(p),
        };
        if ok {
            Ok(())
        } else {
            Err(invalid(path, format!("{r} is not produced before this point")))
        }
    }

    fn node(&mut self, n: &PlanNode, path: &str, scope: &mut Scope) -> Result<(), PlanError> {
        match &n.kind {
            NodeKind::ConstUInt { endianness, .. } => {
                if *endianness != Endianness::Big {
                    return Err(invalid(path, "integers are big-endian only"));
                }
            }
            NodeKind::UIntBits { bits } | NodeKind::TwosComplement { bits } => {
                if !(1..=64).contains(bits) {
                    return Err(invalid(path, format!("bit width {bits} outside 1..64")));
                }
            }
            NodeKind::ConstrainedInt { min, max } => {
                if min > max {
                    return Err(invalid(path, format!("empty range {min} .. {max}")));
                }
            }
            NodeKind::Real { .. } | NodeKind::Bool | NodeKind::Null => {}
            NodeKind::Enumerated { items, repr } => {
                let mut names = HashSet::new();
                let mut values = HashSet::new();
                for i in items {
                    if !names.insert(&i.name) || !values.insert(i.value) {
                        return Err(invalid(path, format!("duplicate enumeration item `{}`", i.name)));
                    }
                }
                if items.is_empty() {
                    return Err(invalid(path, "enumeration without items"));
                }
                self.node(repr, path, scope)?;
            }
            NodeKind::StringAsciiNull { pattern, .. } => {
                let ok = pattern.len() % 2 == 0
                    && (2..=16).contains(&pattern.len())
                    && pattern.chars().all(|c| c.is_ascii_hexdigit());
                if !ok {
                    return Err(invalid(path, format!("bad termination pattern `{pattern}`")));
                }
            }
            NodeKind::StringCharIndex {
                alphabet,
                min_len,
                max_len,
                length,
            } => {
                Alphabet::new(alphabet.as_bytes()).map_err(|e| invalid(path, e.to_string()))?;
                if min_len > max_len {
                    return Err(invalid(path, "empty length range"));
                }
                if let StringLength::External { slot } = length {
                    self.slot_ref(slot, scope, path)?;
                }
            }
            NodeKind::Align { to, inner } => {
                if ![8, 16, 32].contains(to) {
                    return Err(invalid(path, format!("alignment must be 8, 16 or 32, got {to}")));
                }
                self.node(inner, path, scope)?;
            }
            NodeKind::ConstraintCheck { constraint, inner } => {
                match constraint {
                    Constraint::Range { min, max } if min > max => {
                        return Err(invalid(path, "empty range constraint"))
                    }
                    Constraint::Size { min, max } if min > max => return Err(invalid(path, "empty size constraint")),
                    _ => {}
                }
                self.node(inner, path, scope)?;
            }
            NodeKind::Record { fields } => {
                let mark = scope.slots.len();
                let mut names = HashSet::new();
                for f in fields {
                    let fpath = format!("{path}.{}", f.name);
                    if !names.insert(&f.name) {
                        return Err(invalid(&fpath, "duplicate field name"));
                    }
                    if let FieldRole::Optional { present_when } = &f.role {
                        self.slot_ref(present_when, scope, &fpath)?;
                    }
                    self.node(&f.node, &fpath, scope)?;
                    if let FieldRole::Inserted { slot } = &f.role {
                        if !self.slots.insert(slot.clone()) {
                            return Err(invalid(&fpath, format!("slot `{slot}` defined twice")));
                        }
                        scope.slots.push(slot.clone());
                    }
                }
                scope.slots.truncate(mark);
            }
            NodeKind::Variant {
                determinant,
                alternatives,
            } => {
                if alternatives.is_empty() {
                    return Err(invalid(path, "variant without alternatives"));
                }
                if let Determinant::Slot { slot } = determinant {
                    self.slot_ref(slot, scope, path)?;
                }
                if let Determinant::Index { bits } = determinant {
                    if *bits != bits_needed(alternatives.len() as u64 - 1) {
                        return Err(invalid(path, "index width does not match the alternative count"));
                    }
                }
                let mut names = HashSet::new();
                let mut selects = HashSet::new();
                for a in alternatives {
                    if !names.insert(&a.name) || !selects.insert(a.select) {
                        return Err(invalid(path, format!("duplicate alternative `{}`", a.name)));
                    }
                    self.node(&a.node, &format!("{path}.{}", a.name), scope)?;
                }
            }
            NodeKind::List {
                min_len,
                max_len,
                size,
                element,
            } => {
                if min_len > max_len {
                    return Err(invalid(path, "empty size range"));
                }
                if let ListSize::External { slot } = size {
                    self.slot_ref(slot, scope, path)?;
                }
                self.node(element, &format!("{path}[]"), scope)?;
            }
            NodeKind::Outlined { name, args, body } => {
                if !self.outlined.insert(name.clone()) {
                    return Err(invalid(path, format!("outlined name `{name}` is not unique")));
                }
                let mut inner = Scope::default();
                for b in args {
                    self.slot_ref(&b.arg, scope, path)?;
                    if inner.params.contains(&b.param) {
                        return Err(invalid(path, format!("parameter `{}` bound twice", b.param)));
                    }
                    inner.params.push(b.param.clone());
                }
                self.node(body, path, &mut inner)?;
            }
        }
        let expected = compute_bounds(&n.kind);
        if n.bounds != expected {
            return Err(invalid(
                path,
                format!("stored bounds ({}) differ from computed bounds ({expected})", n.bounds),
            ));
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn int8() -> PlanNode {
        PlanNode::new(NodeKind::ConstUInt {
            width: WordWidth::W8,
            endianness: Endianness::Big,
        })
    }

    #[test]
    fn record_bounds_with_alignment() {
        let rec = PlanNode::new(NodeKind::Record {
            fields: vec![
                FieldPlan {
                    name: "a".into(),
                    role: FieldRole::Value,
                    node: int8(),
                },
                FieldPlan {
                    name: "b".into(),
                    role: FieldRole::Value,
                    node: PlanNode::new(NodeKind::Align {
                        to: 8,
                        inner: Box::new(PlanNode::new(NodeKind::Bool)),
                    }),
                },
            ],
        });
        assert_eq!(
            rec.bounds,
            SizeBounds {
                min_bits: 9,
                max_bits: 16,
                alignment: AlignClass::Mod8
            }
        );
    }

    #[test]
    fn list_bounds_external() {
        let elem = PlanNode::new(NodeKind::UIntBits { bits: 24 });
        let list = NodeKind::List {
            min_len: 1,
            max_len: 63,
            size: ListSize::External {
                slot: SlotRef::Slot("n".into()),
            },
            element: Box::new(elem),
        };
        assert_eq!(
            compute_bounds(&list),
            SizeBounds {
                min_bits: 24,
                max_bits: 1512,
                alignment: AlignClass::None
            }
        );
    }

    #[test]
    fn empty_record_dump() {
        let plan = CodecPlan::new("E", PlanNode::new(NodeKind::Record { fields: vec![] }));
        let text = plan.dump();
        assert_eq!(CodecPlan::load(&text).unwrap(), plan);
        assert!(text.contains("\"kind\": \"Record\""));
    }

    #[test]
    fn forward_slot_reference_is_rejected() {
        let list = PlanNode::new(NodeKind::List {
            min_len: 0,
            max_len: 3,
            size: ListSize::External {
                slot: SlotRef::Slot("n".into()),
            },
            element: Box::new(PlanNode::new(NodeKind::Bool)),
        });
        let rec = PlanNode::new(NodeKind::Record {
            fields: vec![
                FieldPlan {
                    name: "xs".into(),
                    role: FieldRole::Value,
                    node: list,
                },
                FieldPlan {
                    name: "n".into(),
                    role: FieldRole::Inserted { slot: "n".into() },
                    node: int8(),
                },
            ],
        });
        let plan = CodecPlan::new("T", rec);
        let err = CodecPlan::load(&plan.dump()).unwrap_err();
        assert!(matches!(err, PlanError::Invalid { .. }), "{err}");
    }

    #[test]
    fn tampered_bounds_are_rejected() {
        let plan = CodecPlan::new("T", int8());
        let text = plan.dump().replace("\"maxBits\": 8", "\"maxBits\": 9");
        assert!(CodecPlan::load(&text).is_err());
    }
}
