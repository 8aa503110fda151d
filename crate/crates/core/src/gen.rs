//! Random bounded schemas and random valid values, for the property suites
//! and `acnkit selftest`.
//!
//! Schemas are built as ASN.1 and ACN syntax trees, so a generated schema
//! exercises the printers and parsers as well as the compiler.
//!
//! ```
//! use acnkit::gen::{random_schema, random_value, GenConfig};
//! use rand::SeedableRng;
//! use rand_chacha::ChaCha8Rng;
//!
//! let mut rng = ChaCha8Rng::seed_from_u64(7);
//! let schema = random_schema(&mut rng, &GenConfig::default());
//! let plan = schema.compile().unwrap();
//! let v = random_value(&plan, &mut rng);
//! assert!(acnkit::engine::check_constraints(&plan, &v).is_empty());
//! ```

use rand::seq::SliceRandom;
use rand::Rng;

use crate::codec::{bits_needed, Endianness, RealWidth};
use crate::compiler::plan::{
    CodecPlan, Constraint, Determinant, FieldRole, ListSize, NodeKind, PlanNode, SlotRef, StringLength,
};
use crate::compiler::{compile_source, CompileError};
use crate::frontend::acn::{
    AcnChild, AcnEntry, AcnParam, AcnProp, AcnProperty, AcnSpec, AlignTo, EncodingProp, FieldRef, InsertedType,
    SizeProp,
};
use crate::frontend::asn1::{Alternative, AsnModule, AsnType, AsnTypeKind, EnumItem, SequenceField, TypeAssignment};
use crate::frontend::Span;
use crate::value::Value;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct GenConfig {
    /// Nesting depth of constructed types below the root.
    pub max_depth: u32,
    /// Most fields, alternatives or enumeration items per type.
    pub max_fanout: usize,
    pub max_list_len: u64,
    pub max_string_len: u64,
}

impl Default for GenConfig {
    fn default() -> Self {
        GenConfig {
            max_depth: 4,
            max_fanout: 5,
            max_list_len: 4,
            max_string_len: 6,
        }
    }
}

/// A generated ASN.1/ACN pair and the name of its root type.
#[derive(Debug, Clone)]
pub struct GeneratedSchema {
    pub asn: AsnModule,
    pub acn: AcnSpec,
    pub root: String,
}

impl GeneratedSchema {
    pub fn asn_text(&self) -> String {
        self.asn.to_string()
    }

    pub fn acn_text(&self) -> String {
        self.acn.to_string()
    }

    /// Prints, reparses, and compiles the root type.
    pub fn compile(&self) -> Result<CodecPlan, CompileError> {
        compile_source(&self.asn_text(), &self.acn_text(), &self.root)
    }
}

fn sp() -> Span {
    Span::default()
}

fn ty(kind: AsnTypeKind) -> AsnType {
    AsnType { kind, span: sp() }
}

fn prop(kind: AcnProperty) -> AcnProp {
    AcnProp { kind, span: sp() }
}

fn field_ref(name: &str) -> FieldRef {
    FieldRef {
        path: vec![name.to_string()],
        span: sp(),
    }
}

fn child(name: &str, props: Vec<AcnProp>, children: Option<Vec<AcnChild>>) -> AcnChild {
    AcnChild {
        name: Some(name.to_string()),
        args: vec![],
        inserted: None,
        props,
        children,
        span: sp(),
    }
}

fn inserted(name: &str, t: InsertedType, props: Vec<AcnProp>) -> AcnChild {
    AcnChild {
        inserted: Some(t),
        ..child(name, props, None)
    }
}

/// ACN annotation for one use of a type.
#[derive(Default)]
struct Ann {
    props: Vec<AcnProp>,
    children: Option<Vec<AcnChild>>,
}

/// What a sequence field needs from an ACN-inserted sibling.
enum Need {
    /// An integer of at least this many bits.
    Length(u32),
    /// An enumeration type whose items name the CHOICE alternatives.
    Selector(String),
}

struct Gen<'r, R: Rng> {
    rng: &'r mut R,
    cfg: GenConfig,
    asn: Vec<TypeAssignment>,
    acn: Vec<AcnEntry>,
    next_type: usize,
}

impl<R: Rng> Gen<'_, R> {
    fn fresh_type(&mut self, stem: &str) -> String {
        self.next_type += 1;
        format!("{stem}{}", self.next_type)
    }

    fn chance(&mut self, p: f64) -> bool {
        self.rng.gen_bool(p)
    }

    fn maybe_align(&mut self, props: &mut Vec<AcnProp>) {
        if self.chance(0.12) {
            let to = *[AlignTo::Byte, AlignTo::Word, AlignTo::Dword].choose(self.rng).unwrap();
            props.push(prop(AcnProperty::AlignToNext(to)));
        }
    }

    fn define(&mut self, name: &str, t: AsnType, ann: Ann, params: Vec<AcnParam>) {
        self.asn.push(TypeAssignment {
            name: name.to_string(),
            ty: t,
            span: sp(),
        });
        if !ann.props.is_empty() || ann.children.is_some() || !params.is_empty() || self.chance(0.5) {
            self.acn.push(AcnEntry {
                name: name.to_string(),
                params,
                props: ann.props,
                children: ann.children,
                span: sp(),
            });
        }
    }

    fn integer(&mut self) -> (AsnType, Ann) {
        let mut props = Vec::new();
        let range = match self.rng.gen_range(0..10) {
            0 => None,
            1 => Some((0, u32::MAX as i64)),
            2 => {
                let lo = self.rng.gen_range(i64::MIN / 2..0);
                Some((lo, self.rng.gen_range(0..i64::MAX / 2)))
            }
            3 => Some((i64::MIN, i64::MAX)),
            _ => {
                let lo = self.rng.gen_range(-300..300);
                Some((lo, lo + self.rng.gen_range(0..2000)))
            }
        };
        match range {
            None => {
                let bits = self.rng.gen_range(1..=64u64);
                props.push(prop(AcnProperty::Size(SizeProp::Fixed(bits))));
                if bits < 64 && self.chance(0.5) {
                    props.push(prop(AcnProperty::Encoding(EncodingProp::PosInt)));
                } else {
                    props.push(prop(AcnProperty::Encoding(EncodingProp::TwosComplement)));
                }
            }
            Some((lo, hi)) if self.chance(0.5) => {
                let unsigned = lo >= 0;
                let need = if unsigned {
                    bits_needed(hi as u64).max(1)
                } else {
                    // Two's complement width holding both ends.
                    let mag = (lo.unsigned_abs() - 1).max(hi.unsigned_abs());
                    bits_needed(mag) + 1
                };
                if need <= 64 {
                    let choices: Vec<u32> = [need, 8, 16, 32, 64].into_iter().filter(|&b| b >= need).collect();
                    let bits = *choices.choose(self.rng).unwrap();
                    props.push(prop(AcnProperty::Size(SizeProp::Fixed(bits as u64))));
                    if unsigned && bits < 64 && self.chance(0.5) {
                        props.push(prop(AcnProperty::Encoding(EncodingProp::PosInt)));
                    } else if !unsigned || (bits > need && self.chance(0.3)) {
                        props.push(prop(AcnProperty::Encoding(EncodingProp::TwosComplement)));
                    }
                    if self.chance(0.3) {
                        props.push(prop(AcnProperty::Endianness(Endianness::Big)));
                    }
                }
            }
            _ => {}
        }
        // pos-int of a negative-capable range is rejected, so drop it.
        if let Some((lo, _)) = range {
            if lo < 0 {
                props.retain(|p| !matches!(p.kind, AcnProperty::Encoding(EncodingProp::PosInt)));
            }
        }
        (
            ty(AsnTypeKind::Integer { range }),
            Ann {
                props,
                children: None,
            },
        )
    }

    fn enumerated(&mut self, names: Option<&[String]>) -> (AsnType, Ann) {
        let names: Vec<String> = match names {
            Some(n) => n.to_vec(),
            None => (0..self.rng.gen_range(1..=self.cfg.max_fanout)).map(|i| format!("e{i}")).collect(),
        };
        let mut used = Vec::new();
        let mut items = Vec::new();
        for name in names {
            let (value, explicit) = if self.chance(0.5) {
                let mut v = self.rng.gen_range(-20..60);
                while used.contains(&v) {
                    v += 1;
                }
                (v, true)
            } else {
                let mut v = 0;
                while used.contains(&v) {
                    v += 1;
                }
                (v, false)
            };
            used.push(value);
            items.push(EnumItem {
                name,
                value,
                explicit,
                span: sp(),
            });
        }
        // Implicit items take the smallest unused value, which depends on the
        // explicit ones that follow; recompute as the parser does.
        let explicit: Vec<i64> = items.iter().filter(|i| i.explicit).map(|i| i.value).collect();
        let mut taken = explicit.clone();
        for item in items.iter_mut().filter(|i| !i.explicit) {
            let mut v = 0;
            while taken.contains(&v) {
                v += 1;
            }
            item.value = v;
            taken.push(v);
        }
        let lo = items.iter().map(|i| i.value).min().unwrap();
        let mut props = Vec::new();
        if lo >= 0 && self.chance(0.5) {
            props.push(prop(AcnProperty::Size(SizeProp::Fixed(*[8u64, 16].choose(self.rng).unwrap()))));
        }
        (
            ty(AsnTypeKind::Enumerated { items }),
            Ann {
                props,
                children: None,
            },
        )
    }

    fn real(&mut self) -> (AsnType, Ann) {
        let mut props = Vec::new();
        match self.rng.gen_range(0..3) {
            0 => props.push(prop(AcnProperty::Encoding(EncodingProp::Ieee754Single))),
            1 => props.push(prop(AcnProperty::Encoding(EncodingProp::Ieee754Double))),
            _ => {}
        }
        if self.chance(0.5) {
            let e = if self.chance(0.5) { Endianness::Little } else { Endianness::Big };
            props.push(prop(AcnProperty::Endianness(e)));
        }
        (
            ty(AsnTypeKind::Real),
            Ann {
                props,
                children: None,
            },
        )
    }

    fn alphabet(&mut self) -> Option<Vec<u8>> {
        match self.rng.gen_range(0..4) {
            0 => None,
            1 => Some((b'a'..=b'f').collect()),
            2 => {
                let mut a: Vec<u8> = (b'0'..=b'9').chain(b'A'..=b'Z').collect();
                a.push(b'-');
                a.sort_unstable();
                Some(a)
            }
            _ => Some(vec![b'x']),
        }
    }

    /// String type; `external` asks for an ACN length field.
    fn string(&mut self, external: bool) -> (AsnType, Ann, Option<Need>) {
        let lo = self.rng.gen_range(0..=self.cfg.max_string_len);
        let hi = if self.chance(0.2) {
            lo
        } else {
            self.rng.gen_range(lo..=self.cfg.max_string_len)
        };
        let alphabet = self.alphabet();
        let mut props = Vec::new();
        let mut need = None;
        if external {
            need = Some(Need::Length(bits_needed(hi).max(1)));
        } else if lo == hi && self.chance(0.5) {
            props.push(prop(AcnProperty::Size(SizeProp::Fixed(hi))));
        } else if self.chance(0.35) {
            props.push(prop(AcnProperty::Size(SizeProp::NullTerminated)));
            if self.chance(0.5) {
                props.push(prop(AcnProperty::Encoding(EncodingProp::Ascii)));
            }
            if self.chance(0.5) {
                let n = self.rng.gen_range(1..=3);
                let pattern = (0..n).map(|_| self.rng.gen()).collect();
                props.push(prop(AcnProperty::TerminationPattern(pattern)));
            }
        }
        (
            ty(AsnTypeKind::IA5String {
                size: (lo, hi),
                alphabet,
            }),
            Ann {
                props,
                children: None,
            },
            need,
        )
    }

    /// A type for a value position at `depth`, with the annotation for its
    /// use site and what it needs from an inserted sibling.
    fn any(&mut self, depth: u32) -> (AsnType, Ann, Option<Need>) {
        let leaf = depth >= self.cfg.max_depth;
        let pick = if leaf {
            self.rng.gen_range(0..7)
        } else {
            self.rng.gen_range(0..13)
        };
        let (t, mut ann, need) = match pick {
            0 | 1 => {
                let (t, a) = self.integer();
                (t, a, None)
            }
            2 => (ty(AsnTypeKind::Boolean), Ann::default(), None),
            3 => (ty(AsnTypeKind::Null), Ann::default(), None),
            4 => {
                let (t, a) = self.real();
                (t, a, None)
            }
            5 => {
                let (t, a) = self.enumerated(None);
                (t, a, None)
            }
            6 => {
                let ext = self.chance(0.3);
                self.string(ext)
            }
            7 | 8 => {
                let (t, a) = self.sequence(depth + 1);
                (t, a, None)
            }
            9 => {
                let (t, a) = self.choice(depth + 1, false);
                (t, a, None)
            }
            10 => return self.selected_choice(depth + 1),
            _ => self.list(depth + 1),
        };
        self.maybe_align(&mut ann.props);
        // Sometimes hoist the type into its own assignment.
        if self.chance(0.25) && need.is_none() {
            let name = self.fresh_type("T");
            self.define(&name, t, ann, vec![]);
            let mut use_props = Vec::new();
            self.maybe_align(&mut use_props);
            return (
                ty(AsnTypeKind::Reference { name }),
                Ann {
                    props: use_props,
                    children: None,
                },
                None,
            );
        }
        (t, ann, need)
    }

    fn list(&mut self, depth: u32) -> (AsnType, Ann, Option<Need>) {
        let lo = self.rng.gen_range(0..=self.cfg.max_list_len);
        let hi = self.rng.gen_range(lo..=self.cfg.max_list_len);
        let (element, elem_ann, elem_need) = loop {
            let got = self.any(depth);
            if got.2.is_none() {
                break got;
            }
        };
        let mut props = Vec::new();
        let external = self.chance(0.4);
        if !external && lo == hi && self.chance(0.3) {
            props.push(prop(AcnProperty::Size(SizeProp::Fixed(hi))));
        }
        debug_assert!(elem_need.is_none());
        let children = if elem_ann.props.is_empty() && elem_ann.children.is_none() && self.chance(0.5) {
            None
        } else {
            Some(vec![AcnChild {
                name: None,
                args: vec![],
                inserted: None,
                props: elem_ann.props,
                children: elem_ann.children,
                span: sp(),
            }])
        };
        (
            ty(AsnTypeKind::SequenceOf {
                size: (lo, hi),
                element: Box::new(element),
            }),
            Ann { props, children },
            external.then(|| Need::Length(bits_needed(hi).max(1))),
        )
    }

    fn choice(&mut self, depth: u32, named: bool) -> (AsnType, Ann) {
        let n = self.rng.gen_range(1..=self.cfg.max_fanout);
        let mut alternatives = Vec::new();
        let mut children = Vec::new();
        for i in 0..n {
            let name = if named { format!("alt{i}") } else { format!("a{i}") };
            let (t, ann) = loop {
                let (t, ann, need) = self.any(depth);
                if need.is_none() {
                    break (t, ann);
                }
            };
            if !ann.props.is_empty() || ann.children.is_some() || self.chance(0.3) {
                children.push(child(&name, ann.props, ann.children));
            }
            alternatives.push(Alternative {
                name,
                ty: t,
                span: sp(),
            });
        }
        (
            ty(AsnTypeKind::Choice { alternatives }),
            Ann {
                props: vec![],
                children: (!children.is_empty() || self.chance(0.3)).then_some(children),
            },
        )
    }

    /// A CHOICE selected by an ACN-inserted enumeration, which has to be
    /// its own parameterized assignment.
    fn selected_choice(&mut self, depth: u32) -> (AsnType, Ann, Option<Need>) {
        let (t, ann) = self.choice(depth, true);
        let AsnTypeKind::Choice { alternatives } = &t.kind else { unreachable!() };
        let names: Vec<String> = alternatives.iter().map(|a| a.name.clone()).collect();
        let selector = self.fresh_type("Sel");
        let (et, eann) = self.enumerated(Some(&names));
        self.define(&selector, et, eann, vec![]);
        let name = self.fresh_type("C");
        let mut props = vec![prop(AcnProperty::Determinant(field_ref("sel")))];
        props.extend(ann.props);
        self.define(
            &name,
            t,
            Ann {
                props,
                children: ann.children,
            },
            vec![AcnParam {
                ty: selector.clone(),
                name: "sel".into(),
                span: sp(),
            }],
        );
        (ty(AsnTypeKind::Reference { name }), Ann::default(), Some(Need::Selector(selector)))
    }

    fn sequence(&mut self, depth: u32) -> (AsnType, Ann) {
        let n = self.rng.gen_range(0..=self.cfg.max_fanout);
        let mut fields = Vec::new();
        let mut children = Vec::new();
        for i in 0..n {
            let name = format!("f{i}");
            let (t, mut ann, need) = self.any(depth);
            let optional = self.chance(0.2);
            let mut args = vec![];
            match need {
                Some(Need::Length(min_bits)) => {
                    let len = format!("{name}-len");
                    let bits = self.rng.gen_range(min_bits..=min_bits + 4);
                    children.push(inserted(
                        &len,
                        InsertedType::Integer,
                        vec![prop(AcnProperty::Size(SizeProp::Fixed(bits as u64)))],
                    ));
                    ann.props.insert(0, prop(AcnProperty::Size(SizeProp::Field(field_ref(&len)))));
                }
                Some(Need::Selector(sel)) => {
                    let id = format!("{name}-id");
                    children.push(inserted(&id, InsertedType::Reference(sel), vec![]));
                    args.push(field_ref(&id));
                }
                None => {}
            }
            if optional {
                let flag = format!("has-{name}");
                children.push(inserted(&flag, InsertedType::Boolean, vec![]));
                ann.props.push(prop(AcnProperty::PresentWhen(field_ref(&flag))));
            }
            // A second CHOICE driven by the same determinant.
            let twin = (!args.is_empty() && self.chance(0.3)).then(|| (format!("{name}-twin"), t.clone(), args.clone()));
            if !ann.props.is_empty() || ann.children.is_some() || !args.is_empty() || self.chance(0.3) {
                let mut c = child(&name, ann.props, ann.children);
                c.args = args;
                children.push(c);
            }
            fields.push(SequenceField {
                name,
                ty: t,
                optional,
                span: sp(),
            });
            if let Some((name, t, args)) = twin {
                let mut c = child(&name, vec![], None);
                c.args = args;
                children.push(c);
                fields.push(SequenceField {
                    name,
                    ty: t,
                    optional: false,
                    span: sp(),
                });
            }
        }
        (
            ty(AsnTypeKind::Sequence { fields }),
            Ann {
                props: vec![],
                children: (!children.is_empty() || self.chance(0.3)).then_some(children),
            },
        )
    }
}

/// A random schema whose root type `Root` is a SEQUENCE.
pub fn random_schema<R: Rng>(rng: &mut R, cfg: &GenConfig) -> GeneratedSchema {
    let mut g = Gen {
        rng,
        cfg: *cfg,
        asn: Vec::new(),
        acn: Vec::new(),
        next_type: 0,
    };
    let (t, mut ann) = g.sequence(1);
    g.maybe_align(&mut ann.props);
    g.define("Root", t, ann, vec![]);
    let module = "Generated".to_string();
    let shell = g.chance(0.5);
    GeneratedSchema {
        asn: AsnModule {
            name: module.clone(),
            assignments: g.asn,
        },
        acn: AcnSpec {
            module: shell.then_some(module),
            entries: g.acn,
        },
        root: "Root".into(),
    }
}

/// Slot decisions made while generating one value, so that consumers sharing
/// a determinant agree.
#[derive(Default)]
struct Decided {
    slots: Vec<(String, i64)>,
    params: Vec<Vec<(String, SlotTarget)>>,
}

#[derive(Clone)]
enum SlotTarget {
    Slot(String),
    Unbound,
}

impl Decided {
    fn key(&self, r: &SlotRef) -> SlotTarget {
        match r {
            SlotRef::Slot(s) => SlotTarget::Slot(s.clone()),
            SlotRef::Param(p) => self
                .params
                .last()
                .and_then(|f| f.iter().find(|(n, _)| n == p))
                .map_or(SlotTarget::Unbound, |(_, t)| t.clone()),
        }
    }

    fn get(&self, r: &SlotRef) -> Option<i64> {
        match self.key(r) {
            SlotTarget::Slot(s) => self.slots.iter().rev().find(|(k, _)| *k == s).map(|(_, v)| *v),
            SlotTarget::Unbound => None,
        }
    }

    fn set(&mut self, r: &SlotRef, v: i64) {
        if let SlotTarget::Slot(s) = self.key(r) {
            self.slots.push((s, v));
        }
    }
}

/// Integer range a node accepts, narrowed by enclosing range checks.
fn int_range(node: &PlanNode, outer: (i128, i128)) -> (i128, i128) {
    let (lo, hi) = match &node.kind {
        NodeKind::ConstraintCheck {
            constraint: Constraint::Range { min, max },
            inner,
        } => return int_range(inner, (outer.0.max(*min as i128), outer.1.min(*max as i128))),
        NodeKind::Align { inner, .. } | NodeKind::ConstraintCheck { inner, .. } => return int_range(inner, outer),
        NodeKind::Outlined { body, .. } => return int_range(body, outer),
        NodeKind::ConstUInt { width, .. } => (0, (1i128 << width.bits()) - 1),
        NodeKind::UIntBits { bits } => (0, (1i128 << bits) - 1),
        NodeKind::TwosComplement { bits } => (-(1i128 << (bits - 1)), (1i128 << (bits - 1)) - 1),
        NodeKind::ConstrainedInt { min, max } => (*min as i128, *max as i128),
        _ => (i64::MIN as i128, i64::MAX as i128),
    };
    (
        lo.max(outer.0).max(i64::MIN as i128),
        hi.min(outer.1).min(i64::MAX as i128),
    )
}

struct ValueGen<'r, R: Rng> {
    rng: &'r mut R,
    decided: Decided,
}

impl<R: Rng> ValueGen<'_, R> {
    fn int_in(&mut self, (lo, hi): (i128, i128)) -> i64 {
        // Favor the ends of the range.
        match self.rng.gen_range(0..6) {
            0 => lo as i64,
            1 => hi as i64,
            _ => self.rng.gen_range(lo..=hi) as i64,
        }
    }

    fn len_in(&mut self, lo: u64, hi: u64, slot: Option<&SlotRef>) -> u64 {
        if let Some(r) = slot {
            if let Some(n) = self.decided.get(r) {
                return n as u64;
            }
        }
        let n = self.rng.gen_range(lo..=hi);
        if let Some(r) = slot {
            self.decided.set(r, n as i64);
        }
        n
    }

    fn string(&mut self, chars: &[u8], len: u64) -> Value {
        Value::Str((0..len).map(|_| *chars.choose(self.rng).unwrap()).collect())
    }

    fn node(&mut self, node: &PlanNode, allowed: Option<&[u8]>, size: Option<(u64, u64)>) -> Value {
        match &node.kind {
            NodeKind::ConstUInt { .. }
            | NodeKind::UIntBits { .. }
            | NodeKind::TwosComplement { .. }
            | NodeKind::ConstrainedInt { .. } => Value::Int(self.int_in(int_range(node, (i128::MIN, i128::MAX)))),
            NodeKind::Real { width, .. } => {
                let pattern = match self.rng.gen_range(0..8) {
                    // NaNs with payloads and signed zeros.
                    0 => 0x7ff8_0000_0000_0001,
                    1 => 0x8000_0000_0000_0000,
                    _ => self.rng.gen(),
                };
                Value::Real {
                    pattern: match width {
                        RealWidth::W32 => pattern >> 32,
                        RealWidth::W64 => pattern,
                    },
                    width: *width,
                }
            }
            NodeKind::Bool => Value::Bool(self.rng.gen()),
            NodeKind::Null => Value::Null,
            NodeKind::Enumerated { items, .. } => Value::Enum(items.choose(self.rng).unwrap().name.clone()),
            NodeKind::StringAsciiNull { max_len, pattern } => {
                let (lo, hi) = size.unwrap_or((0, *max_len));
                let first = u8::from_str_radix(&pattern[..2], 16).unwrap();
                let pool: Vec<u8> = allowed
                    .map(|a| a.to_vec())
                    .unwrap_or_else(|| (0..=127).collect())
                    .into_iter()
                    .filter(|&c| c != first)
                    .collect();
                let len = self.rng.gen_range(lo..=hi);
                self.string(&pool, len)
            }
            NodeKind::StringCharIndex {
                alphabet,
                min_len,
                max_len,
                length,
            } => {
                let slot = match length {
                    StringLength::External { slot } => Some(slot),
                    _ => None,
                };
                let len = match length {
                    StringLength::Fixed => *max_len,
                    _ => self.len_in(*min_len, *max_len, slot),
                };
                self.string(alphabet.as_bytes(), len)
            }
            NodeKind::Align { inner, .. } => self.node(inner, allowed, size),
            NodeKind::ConstraintCheck { constraint, inner } => match constraint {
                Constraint::Alphabet { chars } => self.node(inner, Some(chars.as_bytes()), size),
                Constraint::Size { min, max } => self.node(inner, allowed, Some((*min, *max))),
                Constraint::Range { .. } => {
                    Value::Int(self.int_in(int_range(node, (i128::MIN, i128::MAX))))
                }
            },
            NodeKind::Outlined { args, body, .. } => {
                let frame = args.iter().map(|b| (b.param.clone(), self.decided.key(&b.arg))).collect();
                self.decided.params.push(frame);
                let v = self.node(body, None, None);
                self.decided.params.pop();
                v
            }
            NodeKind::Record { fields } => {
                let mark = self.decided.slots.len();
                let mut out = Vec::new();
                for f in fields {
                    match &f.role {
                        FieldRole::Inserted { .. } => {}
                        FieldRole::Value => out.push((f.name.clone(), self.node(&f.node, None, None))),
                        FieldRole::Optional { present_when } => {
                            let present = match self.decided.get(present_when) {
                                Some(p) => p != 0,
                                None => {
                                    let p = self.rng.gen_bool(0.6);
                                    self.decided.set(present_when, p as i64);
                                    p
                                }
                            };
                            if present {
                                out.push((f.name.clone(), self.node(&f.node, None, None)));
                            }
                        }
                    }
                }
                self.decided.slots.truncate(mark);
                Value::Record(out)
            }
            NodeKind::Variant {
                determinant,
                alternatives,
            } => {
                let alt = match determinant {
                    Determinant::Index { .. } => alternatives.choose(self.rng).unwrap(),
                    Determinant::Slot { slot } => match self.decided.get(slot) {
                        Some(s) => alternatives
                            .iter()
                            .find(|a| a.select == s)
                            .expect("shared determinants select alternatives of the same names"),
                        None => {
                            let a = alternatives.choose(self.rng).unwrap();
                            self.decided.set(slot, a.select);
                            a
                        }
                    },
                };
                Value::variant(alt.name.clone(), self.node(&alt.node, None, None))
            }
            NodeKind::List {
                min_len,
                max_len,
                size: list_size,
                element,
            } => {
                let slot = match list_size {
                    ListSize::External { slot } => Some(slot),
                    ListSize::Inline => None,
                };
                let n = self.len_in(*min_len, *max_len, slot);
                Value::List((0..n).map(|_| self.node(element, None, None)).collect())
            }
        }
    }
}

/// A random value satisfying every constraint of `plan`.
pub fn random_value<R: Rng>(plan: &CodecPlan, rng: &mut R) -> Value {
    ValueGen {
        rng,
        decided: Decided::default(),
    }
    .node(&plan.root, None, None)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::engine::{check_constraints, roundtrip_check, RoundtripOptions};
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn generated_schemas_compile_and_roundtrip() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        for case in 0..200 {
            let s = random_schema(&mut rng, &GenConfig::default());
            let plan = match s.compile() {
                Ok(p) => p,
                Err(e) => panic!("case {case}: {e}\n{}\n{}", s.asn_text(), s.acn_text()),
            };
            let v = random_value(&plan, &mut rng);
            assert_eq!(check_constraints(&plan, &v), vec![], "case {case}");
            let r = roundtrip_check(&plan, &v, rng.gen_range(0..32), RoundtripOptions { fuzz: 4, seed: case });
            assert!(r.passed(), "case {case}: {v}\n{r}\n{}\n{}", s.asn_text(), s.acn_text());
        }
    }
}
