//! Resolution of an ASN.1 module and its ACN spec into plan trees.
//!
//! Every type assignment is compiled once as a root. Type references are
//! expanded in place; references that pass ACN arguments become
//! [`NodeKind::Outlined`] nodes named `<Type>__<use-site path>`.
//!
//! Field references (`size n`, `determinant d`, `present-when b`, and
//! arguments) name ACN-inserted fields among the siblings of the referring
//! item or the siblings of its ancestors, within one type assignment, or a
//! parameter of that assignment. A producer must be encoded before any of
//! its consumers.

use std::collections::{HashMap, HashSet};

use crate::codec::{bits_needed, Endianness, RealWidth, WordWidth};
use crate::frontend::acn::{
    AcnChild, AcnEntry, AcnProp, AcnProperty, AcnSpec, EncodingProp, FieldRef, InsertedType, SizeProp,
};
use crate::frontend::asn1::{AsnModule, AsnType, AsnTypeKind, SequenceField};
use crate::frontend::diag::{Diagnostic, DiagnosticKind, Diagnostics, Span};

use super::plan::{
    AlternativePlan, Binding, Constraint, Determinant, EnumItemPlan, FieldPlan, FieldRole, ListSize, NodeKind,
    PlanNode, SizeBounds, SlotRef, StringLength,
};

/// What a producer field or parameter carries.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum SlotKind {
    Int,
    Enum(Vec<(String, i64)>),
    Bool,
}

/// One resolved dependency: `consumer` reads `producer`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Wire {
    pub consumer: String,
    pub producer: SlotRef,
    pub role: WireRole,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum WireRole {
    Size,
    Determinant,
    PresentWhen,
    Argument,
}

#[derive(Debug, Clone)]
pub struct ResolvedType {
    pub name: String,
    /// Formal parameters as `(name, type)`.
    pub params: Vec<(String, String)>,
    pub root: PlanNode,
    pub wires: Vec<Wire>,
}

#[derive(Debug, Clone)]
pub struct ResolvedSchema {
    pub module: String,
    pub types: Vec<ResolvedType>,
}

impl ResolvedSchema {
    pub fn get(&self, name: &str) -> Option<&ResolvedType> {
        self.types.iter().find(|t| t.name == name)
    }

    pub fn type_names(&self) -> impl Iterator<Item = &str> {
        self.types.iter().map(|t| t.name.as_str())
    }
}

/// Static size bounds of a type, if it exists.
pub fn size_bounds(schema: &ResolvedSchema, type_name: &str) -> Option<SizeBounds> {
    schema.get(type_name).map(|t| t.root.bounds)
}

pub fn resolve(asn: &AsnModule, acn: &AcnSpec) -> Result<ResolvedSchema, Diagnostics> {
    let mut cx = Cx {
        asn,
        acn: acn.entries.iter().map(|e| (e.name.as_str(), e)).collect(),
        diags: Vec::new(),
        expanding: Vec::new(),
        wires: Vec::new(),
    };
    for e in &acn.entries {
        if asn.get(&e.name).is_none() {
            cx.diag(
                DiagnosticKind::UnresolvedReference,
                e.span,
                format!("ACN entry `{}` has no ASN.1 type assignment", e.name),
            );
        }
    }
    let mut types = Vec::new();
    for a in &asn.assignments {
        let entry = cx.acn.get(a.name.as_str()).copied();
        let params = entry.map(|e| cx.params_of(e)).unwrap_or_default();
        let mut env = Env {
            frames: Vec::new(),
            params: params.clone(),
        };
        let ann = Ann::from_entry(entry, a.span);
        cx.expanding.push(a.name.clone());
        cx.wires.clear();
        let root = cx.ty(&a.ty, &ann, &mut env, "");
        cx.expanding.pop();
        types.push(ResolvedType {
            name: a.name.clone(),
            params: params.into_iter().map(|p| (p.name, p.ty)).collect(),
            root,
            wires: std::mem::take(&mut cx.wires),
        });
    }
    if cx.diags.is_empty() {
        Ok(ResolvedSchema {
            module: asn.name.clone(),
            types,
        })
    } else {
        // Types are expanded at every use, so the same problem can be found
        // more than once.
        let mut seen = HashSet::new();
        let mut diags: Vec<Diagnostic> = cx
            .diags
            .into_iter()
            .filter(|d| seen.insert((d.span.start, d.span.end, d.message.clone())))
            .collect();
        diags.sort_by_key(|d| (d.span.line, d.span.col));
        Err(Diagnostics(diags))
    }
}

#[derive(Debug, Clone)]
struct Param {
    name: String,
    ty: String,
    kind: Option<SlotKind>,
}

struct ScopeEntry {
    name: String,
    /// Slot id for inserted fields.
    slot: Option<String>,
    ty: String,
    kind: Option<SlotKind>,
    done: bool,
}

struct Env {
    frames: Vec<Vec<ScopeEntry>>,
    params: Vec<Param>,
}

/// ACN annotations that apply to one type occurrence.
#[derive(Clone, Default)]
struct Ann<'a> {
    props: Vec<&'a AcnProp>,
    children: Option<&'a [AcnChild]>,
    args: &'a [FieldRef],
    site: Span,
}

impl<'a> Ann<'a> {
    fn from_entry(entry: Option<&'a AcnEntry>, site: Span) -> Self {
        match entry {
            Some(e) => Ann {
                props: e.props.iter().collect(),
                children: e.children.as_deref(),
                args: &[],
                site: e.span,
            },
            None => Ann {
                site,
                ..Ann::default()
            },
        }
    }

    fn from_child(c: &'a AcnChild) -> Self {
        Ann {
            props: c
                .props
                .iter()
                .filter(|p| !matches!(p.kind, AcnProperty::PresentWhen(_)))
                .collect(),
            children: c.children.as_deref(),
            args: &c.args,
            site: c.span,
        }
    }

    fn get(&self, keyword: &str) -> Option<&'a AcnProp> {
        self.props.iter().copied().find(|p| p.kind.keyword() == keyword)
    }

    fn size(&self) -> Option<(&'a SizeProp, Span)> {
        self.get("size").map(|p| match &p.kind {
            AcnProperty::Size(s) => (s, p.span),
            _ => unreachable!(),
        })
    }

    fn encoding(&self) -> Option<(EncodingProp, Span)> {
        self.get("encoding").map(|p| match &p.kind {
            AcnProperty::Encoding(e) => (*e, p.span),
            _ => unreachable!(),
        })
    }

    fn endianness(&self) -> Option<(Endianness, Span)> {
        self.get("endianness").map(|p| match &p.kind {
            AcnProperty::Endianness(e) => (*e, p.span),
            _ => unreachable!(),
        })
    }

    fn align(&self) -> Option<u32> {
        self.get("align-to-next").map(|p| match &p.kind {
            AcnProperty::AlignToNext(a) => a.bits(),
            _ => unreachable!(),
        })
    }

    /// Use-site properties take precedence over those of the referenced
    /// type's own entry.
    fn merged_with(&self, entry: Option<&'a AcnEntry>) -> Ann<'a> {
        let mut out = self.clone();
        if let Some(e) = entry {
            for p in &e.props {
                if self.get(p.kind.keyword()).is_none() {
                    out.props.push(p);
                }
            }
            if out.children.is_none() {
                out.children = e.children.as_deref();
            }
        }
        out.args = &[];
        out
    }
}

struct Cx<'a> {
    asn: &'a AsnModule,
    acn: HashMap<&'a str, &'a AcnEntry>,
    diags: Vec<Diagnostic>,
    expanding: Vec<String>,
    wires: Vec<Wire>,
}

fn join(path: &str, name: &str) -> String {
    if path.is_empty() {
        name.to_string()
    } else {
        format!("{path}.{name}")
    }
}

fn placeholder() -> PlanNode {
    PlanNode::new(NodeKind::Null)
}

impl<'a> Cx<'a> {
    fn diag(&mut self, kind: DiagnosticKind, span: Span, message: impl Into<String>) {
        self.diags.push(Diagnostic::new(kind, span, message));
    }

    fn params_of(&mut self, e: &AcnEntry) -> Vec<Param> {
        e.params
            .iter()
            .map(|p| Param {
                name: p.name.clone(),
                ty: p.ty.clone(),
                kind: self.kind_of_type_name(&p.ty, p.span),
            })
            .collect()
    }

    /// Underlying kind of a named type, following references.
    fn kind_of_type_name(&mut self, name: &str, span: Span) -> Option<SlotKind> {
        match name {
            "INTEGER" => return Some(SlotKind::Int),
            "BOOLEAN" => return Some(SlotKind::Bool),
            _ => {}
        }
        let mut seen = HashSet::new();
        let mut current = name.to_string();
        loop {
            if !seen.insert(current.clone()) {
                return None;
            }
            let Some(a) = self.asn.get(&current) else {
                self.diag(
                    DiagnosticKind::UnresolvedReference,
                    span,
                    format!("unknown type `{current}`"),
                );
                return None;
            };
            match &a.ty.kind {
                AsnTypeKind::Integer { .. } => return Some(SlotKind::Int),
                AsnTypeKind::Boolean => return Some(SlotKind::Bool),
                AsnTypeKind::Enumerated { items } => {
                    return Some(SlotKind::Enum(items.iter().map(|i| (i.name.clone(), i.value)).collect()))
                }
                AsnTypeKind::Reference { name } => current = name.clone(),
                _ => return None,
            }
        }
    }

    /// Resolves a field reference to a slot, checking visibility and order.
    fn lookup(&mut self, r: &FieldRef, env: &Env) -> Option<(SlotRef, String, Option<SlotKind>)> {
        if r.path.len() > 1 {
            self.diag(
                DiagnosticKind::Unsupported,
                r.span,
                format!("dotted reference `{r}`: only siblings and ancestors' siblings can be referenced"),
            );
            return None;
        }
        let name = &r.path[0];
        for frame in env.frames.iter().rev() {
            if let Some(e) = frame.iter().find(|e| &e.name == name) {
                let Some(slot) = &e.slot else {
                    self.diag(
                        DiagnosticKind::Unsupported,
                        r.span,
                        format!("`{name}` is an ASN.1 field; only ACN-inserted fields can be referenced"),
                    );
                    return None;
                };
                if !e.done {
                    self.diag(
                        DiagnosticKind::Ordering,
                        r.span,
                        format!("`{name}` is encoded after the item that depends on it"),
                    );
                    return None;
                }
                return Some((SlotRef::Slot(slot.clone()), e.ty.clone(), e.kind.clone()));
            }
        }
        if let Some(p) = env.params.iter().find(|p| &p.name == name) {
            return Some((SlotRef::Param(p.name.clone()), p.ty.clone(), p.kind.clone()));
        }
        self.diag(
            DiagnosticKind::UnresolvedReference,
            r.span,
            format!("no ACN field or parameter named `{name}` is in scope"),
        );
        None
    }

    fn lookup_int(&mut self, r: &FieldRef, env: &Env, consumer: &str) -> Option<SlotRef> {
        let (slot, ty, kind) = self.lookup(r, env)?;
        if kind != Some(SlotKind::Int) {
            self.diag(
                DiagnosticKind::DeterminantType,
                r.span,
                format!("size determinant `{r}` must be an INTEGER, but it is `{ty}`"),
            );
            return None;
        }
        self.wires.push(Wire {
            consumer: consumer.to_string(),
            producer: slot.clone(),
            role: WireRole::Size,
        });
        Some(slot)
    }

    fn allow(&mut self, ann: &Ann, allowed: &[&str], what: &str) {
        for p in &ann.props {
            if !allowed.contains(&p.kind.keyword()) {
                self.diag(
                    DiagnosticKind::Unsupported,
                    p.span,
                    format!("property `{}` does not apply to {what}", p.kind.keyword()),
                );
            }
        }
    }

    fn no_children(&mut self, ann: &Ann, what: &str) {
        if ann.children.is_some_and(|c| !c.is_empty()) {
            self.diag(
                DiagnosticKind::Unsupported,
                ann.site,
                format!("{what} has no components to annotate"),
            );
        }
    }

    fn wrap(&mut self, mut node: PlanNode, constraints: Vec<Constraint>, ann: &Ann) -> PlanNode {
        for c in constraints.into_iter().rev() {
            node = PlanNode::new(NodeKind::ConstraintCheck {
                constraint: c,
                inner: Box::new(node),
            });
        }
        if let Some(to) = ann.align() {
            node = PlanNode::new(NodeKind::Align {
                to,
                inner: Box::new(node),
            });
        }
        node
    }

    fn ty(&mut self, ty: &'a AsnType, ann: &Ann<'a>, env: &mut Env, path: &str) -> PlanNode {
        if !ann.args.is_empty() && !matches!(ty.kind, AsnTypeKind::Reference { .. }) {
            self.diag(
                DiagnosticKind::ArityMismatch,
                ann.site,
                "arguments can only be passed to a parameterized type",
            );
        }
        match &ty.kind {
            AsnTypeKind::Reference { name } => self.reference(name, ty.span, ann, env, path),
            AsnTypeKind::Integer { range } => {
                self.allow(ann, &["size", "encoding", "endianness", "align-to-next"], "INTEGER");
                self.no_children(ann, "INTEGER");
                let node = self.int_repr(*range, ann, "INTEGER");
                let cs = range
                    .map(|(min, max)| vec![Constraint::Range { min, max }])
                    .unwrap_or_default();
                self.wrap(node, cs, ann)
            }
            AsnTypeKind::Enumerated { items } => {
                self.allow(ann, &["size", "encoding", "endianness", "align-to-next"], "ENUMERATED");
                self.no_children(ann, "ENUMERATED");
                let lo = items.iter().map(|i| i.value).min().unwrap_or(0);
                let hi = items.iter().map(|i| i.value).max().unwrap_or(0);
                let repr = self.int_repr(Some((lo, hi)), ann, "ENUMERATED");
                let node = PlanNode::new(NodeKind::Enumerated {
                    items: items
                        .iter()
                        .map(|i| EnumItemPlan {
                            name: i.name.clone(),
                            value: i.value,
                        })
                        .collect(),
                    repr: Box::new(repr),
                });
                self.wrap(node, vec![], ann)
            }
            AsnTypeKind::Boolean => {
                self.allow(ann, &["align-to-next"], "BOOLEAN");
                self.no_children(ann, "BOOLEAN");
                self.wrap(PlanNode::new(NodeKind::Bool), vec![], ann)
            }
            AsnTypeKind::Null => {
                self.allow(ann, &["align-to-next"], "NULL");
                self.no_children(ann, "NULL");
                self.wrap(PlanNode::new(NodeKind::Null), vec![], ann)
            }
            AsnTypeKind::Real => {
                self.allow(ann, &["encoding", "endianness", "align-to-next"], "REAL");
                self.no_children(ann, "REAL");
                let width = match ann.encoding() {
                    None | Some((EncodingProp::Ieee754Double, _)) => RealWidth::W64,
                    Some((EncodingProp::Ieee754Single, _)) => RealWidth::W32,
                    Some((e, span)) => {
                        self.diag(
                            DiagnosticKind::Unsupported,
                            span,
                            format!("encoding `{}` does not apply to REAL", e.keyword()),
                        );
                        RealWidth::W64
                    }
                };
                let endianness = ann.endianness().map(|e| e.0).unwrap_or_default();
                self.wrap(PlanNode::new(NodeKind::Real { width, endianness }), vec![], ann)
            }
            AsnTypeKind::IA5String { size, alphabet } => self.string(*size, alphabet.as_deref(), ann, env, path),
            AsnTypeKind::Sequence { fields } => {
                self.allow(ann, &["align-to-next"], "SEQUENCE");
                let node = self.sequence(fields, ann, env, path);
                self.wrap(node, vec![], ann)
            }
            AsnTypeKind::Choice { alternatives } => {
                self.allow(ann, &["determinant", "align-to-next"], "CHOICE");
                let children = self.child_map(ann, alternatives.iter().map(|a| a.name.as_str()), "CHOICE");
                let determinant = ann.get("determinant").map(|p| match &p.kind {
                    AcnProperty::Determinant(r) => r,
                    _ => unreachable!(),
                });
                let mut selects: Vec<i64> = (0..alternatives.len() as i64).collect();
                let det = match determinant {
                    None => Determinant::Index {
                        bits: bits_needed(alternatives.len() as u64 - 1),
                    },
                    Some(r) => match self.lookup(r, env) {
                        Some((slot, ty, Some(SlotKind::Enum(items)))) => {
                            for (i, a) in alternatives.iter().enumerate() {
                                match items.iter().find(|(n, _)| n == &a.name) {
                                    Some((_, v)) => selects[i] = *v,
                                    None => self.diag(
                                        DiagnosticKind::DeterminantType,
                                        a.span,
                                        format!("alternative `{}` has no item of the same name in `{ty}`", a.name),
                                    ),
                                }
                            }
                            self.wires.push(Wire {
                                consumer: path.to_string(),
                                producer: slot.clone(),
                                role: WireRole::Determinant,
                            });
                            Determinant::Slot { slot }
                        }
                        Some((_, ty, _)) => {
                            self.diag(
                                DiagnosticKind::DeterminantType,
                                r.span,
                                format!("CHOICE determinant `{r}` must be an ENUMERATED, but it is `{ty}`"),
                            );
                            Determinant::Index { bits: 0 }
                        }
                        None => Determinant::Index { bits: 0 },
                    },
                };
                let alts = alternatives
                    .iter()
                    .zip(selects)
                    .map(|(a, select)| {
                        let child_ann = match children.get(a.name.as_str()) {
                            Some(c) => Ann::from_child(c),
                            None => Ann {
                                site: a.span,
                                ..Ann::default()
                            },
                        };
                        AlternativePlan {
                            name: a.name.clone(),
                            select,
                            node: self.ty(&a.ty, &child_ann, env, &join(path, &a.name)),
                        }
                    })
                    .collect();
                let node = PlanNode::new(NodeKind::Variant {
                    determinant: det,
                    alternatives: alts,
                });
                self.wrap(node, vec![], ann)
            }
            AsnTypeKind::SequenceOf { size, element } => {
                self.allow(ann, &["size", "align-to-next"], "SEQUENCE OF");
                let (lo, hi) = *size;
                let list_size = match ann.size() {
                    None => ListSize::Inline,
                    Some((SizeProp::Fixed(n), span)) => {
                        if !(lo == hi && hi == *n) {
                            self.diag(
                                DiagnosticKind::MalformedConstraint,
                                span,
                                format!("fixed size {n} conflicts with SIZE({lo} .. {hi})"),
                            );
                        }
                        ListSize::Inline
                    }
                    Some((SizeProp::Field(r), _)) => match self.lookup_int(r, env, path) {
                        Some(slot) => ListSize::External { slot },
                        None => ListSize::Inline,
                    },
                    Some((SizeProp::NullTerminated, span)) => {
                        self.diag(
                            DiagnosticKind::Unsupported,
                            span,
                            "null-terminated SEQUENCE OF is not supported",
                        );
                        ListSize::Inline
                    }
                };
                let mut elem_ann = Ann {
                    site: element.span,
                    ..Ann::default()
                };
                if let Some(children) = ann.children {
                    for (i, c) in children.iter().enumerate() {
                        if c.name.is_some() || i > 0 {
                            self.diag(
                                DiagnosticKind::Unsupported,
                                c.span,
                                "a SEQUENCE OF takes one unnamed child describing its element",
                            );
                        } else {
                            elem_ann = Ann::from_child(c);
                        }
                    }
                }
                let elem = self.ty(element, &elem_ann, env, &format!("{path}[]"));
                let node = PlanNode::new(NodeKind::List {
                    min_len: lo,
                    max_len: hi,
                    size: list_size,
                    element: Box::new(elem),
                });
                self.wrap(node, vec![Constraint::Size { min: lo, max: hi }], ann)
            }
        }
    }

    fn reference(&mut self, name: &str, span: Span, ann: &Ann<'a>, env: &mut Env, path: &str) -> PlanNode {
        let asn = self.asn;
        let Some(target) = asn.get(name) else {
            self.diag(DiagnosticKind::UnresolvedReference, span, format!("unknown type `{name}`"));
            return placeholder();
        };
        if self.expanding.iter().any(|n| n == name) {
            let cycle = format!("{} -> {name}", self.expanding.join(" -> "));
            self.diag(DiagnosticKind::Recursion, span, cycle);
            return placeholder();
        }
        let entry = self.acn.get(name).copied();
        let params = entry.map(|e| self.params_of(e)).unwrap_or_default();
        if params.len() != ann.args.len() {
            self.diag(
                DiagnosticKind::ArityMismatch,
                ann.site,
                format!("`{name}` takes {} argument(s), {} given", params.len(), ann.args.len()),
            );
            return placeholder();
        }
        let mut bindings = Vec::new();
        for (p, a) in params.iter().zip(ann.args) {
            let Some((slot, ty, _)) = self.lookup(a, env) else {
                continue;
            };
            if ty != p.ty {
                self.diag(
                    DiagnosticKind::DeterminantType,
                    a.span,
                    format!("argument `{a}` has type `{ty}`, but parameter `{}` expects `{}`", p.name, p.ty),
                );
            }
            self.wires.push(Wire {
                consumer: path.to_string(),
                producer: slot.clone(),
                role: WireRole::Argument,
            });
            bindings.push(Binding {
                param: p.name.clone(),
                arg: slot,
            });
        }
        let merged = ann.merged_with(entry);
        // A type assignment is its own scope: only its parameters come in.
        let mut inner = Env {
            frames: Vec::new(),
            params,
        };
        self.expanding.push(name.to_string());
        let body = self.ty(&target.ty, &merged, &mut inner, path);
        self.expanding.pop();
        if ann.args.is_empty() {
            body
        } else {
            PlanNode::new(NodeKind::Outlined {
                name: format!("{name}__{path}"),
                args: bindings,
                body: Box::new(body),
            })
        }
    }

    /// Integer representation chosen from the range and ACN properties.
    fn int_repr(&mut self, range: Option<(i64, i64)>, ann: &Ann, what: &str) -> PlanNode {
        if let Some((Endianness::Little, span)) = ann.endianness() {
            self.diag(
                DiagnosticKind::Unsupported,
                span,
                format!("little-endian {what} encoding is not supported"),
            );
        }
        let enc = match ann.encoding() {
            Some((e @ (EncodingProp::PosInt | EncodingProp::TwosComplement), _)) => Some(e),
            Some((e, span)) => {
                self.diag(
                    DiagnosticKind::Unsupported,
                    span,
                    format!("encoding `{}` is not supported for {what}", e.keyword()),
                );
                None
            }
            None => None,
        };
        let bits = match ann.size() {
            None => None,
            Some((SizeProp::Fixed(n), span)) => {
                if !(1..=64).contains(n) {
                    self.diag(
                        DiagnosticKind::MalformedConstraint,
                        span,
                        format!("bit width {n} is outside 1 .. 64"),
                    );
                    return placeholder();
                }
                Some((*n as u32, span))
            }
            Some((_, span)) => {
                self.diag(
                    DiagnosticKind::Unsupported,
                    span,
                    format!("{what} sizes must be a fixed bit count"),
                );
                return placeholder();
            }
        };
        let Some((bits, span)) = bits else {
            if enc.is_some() {
                self.diag(
                    DiagnosticKind::MalformedConstraint,
                    ann.site,
                    format!("an explicit {what} encoding needs a `size`"),
                );
            }
            return match range {
                Some((min, max)) => PlanNode::new(NodeKind::ConstrainedInt { min, max }),
                None => {
                    self.diag(
                        DiagnosticKind::MalformedConstraint,
                        ann.site,
                        format!("{what} without a range needs an ACN `size`"),
                    );
                    placeholder()
                }
            };
        };
        let twos = match enc {
            Some(EncodingProp::TwosComplement) => true,
            Some(_) => false,
            None => range.is_some_and(|(lo, _)| lo < 0),
        };
        let (lo, hi): (i128, i128) = if twos {
            (-(1i128 << (bits - 1)), (1i128 << (bits - 1)) - 1)
        } else {
            (0, (1i128 << bits) - 1)
        };
        if let Some((min, max)) = range {
            if (min as i128) < lo || (max as i128) > hi {
                self.diag(
                    DiagnosticKind::MalformedConstraint,
                    span,
                    format!("range {min} .. {max} does not fit {bits}-bit {}", if twos { "two's complement" } else { "pos-int" }),
                );
            }
        }
        if twos {
            PlanNode::new(NodeKind::TwosComplement { bits })
        } else {
            match WordWidth::from_bits(bits) {
                Some(width) => PlanNode::new(NodeKind::ConstUInt {
                    width,
                    endianness: Endianness::Big,
                }),
                None => PlanNode::new(NodeKind::UIntBits { bits }),
            }
        }
    }

    fn string(&mut self, size: (u64, u64), alphabet: Option<&[u8]>, ann: &Ann, env: &mut Env, path: &str) -> PlanNode {
        self.allow(ann, &["size", "encoding", "align-to-next", "termination-pattern"], "IA5String");
        self.no_children(ann, "IA5String");
        let (lo, hi) = size;
        let chars: Vec<u8> = alphabet.map(|a| a.to_vec()).unwrap_or_else(|| (0..=127).collect());
        let alphabet_text = String::from_utf8(chars).expect("7-bit alphabet");
        let null_terminated = matches!(ann.size(), Some((SizeProp::NullTerminated, _)));
        if let Some((e, span)) = ann.encoding() {
            if !(e == EncodingProp::Ascii && null_terminated) {
                self.diag(
                    DiagnosticKind::Unsupported,
                    span,
                    format!("encoding `{}` on IA5String is only supported with `size null-terminated`", e.keyword()),
                );
            }
        }
        let pattern = ann.get("termination-pattern").map(|p| match &p.kind {
            AcnProperty::TerminationPattern(b) => (b.clone(), p.span),
            _ => unreachable!(),
        });
        if let Some((_, span)) = &pattern {
            if !null_terminated {
                self.diag(
                    DiagnosticKind::Unsupported,
                    *span,
                    "`termination-pattern` needs `size null-terminated`",
                );
            }
        }
        let char_index = |length| NodeKind::StringCharIndex {
            alphabet: alphabet_text.clone(),
            min_len: lo,
            max_len: hi,
            length,
        };
        let kind = match ann.size() {
            None => char_index(StringLength::Internal),
            Some((SizeProp::Fixed(n), span)) => {
                if !(lo == hi && hi == *n) {
                    self.diag(
                        DiagnosticKind::MalformedConstraint,
                        span,
                        format!("fixed size {n} conflicts with SIZE({lo} .. {hi})"),
                    );
                }
                char_index(StringLength::Fixed)
            }
            Some((SizeProp::Field(r), _)) => match self.lookup_int(r, env, path) {
                Some(slot) => char_index(StringLength::External { slot }),
                None => char_index(StringLength::Internal),
            },
            Some((SizeProp::NullTerminated, _)) => {
                let (bytes, span) = pattern.unwrap_or((vec![0], ann.site));
                if !(1..=8).contains(&bytes.len()) {
                    self.diag(
                        DiagnosticKind::MalformedConstraint,
                        span,
                        format!("termination pattern must have 1 to 8 bytes, got {}", bytes.len()),
                    );
                }
                NodeKind::StringAsciiNull {
                    max_len: hi,
                    pattern: bytes.iter().map(|b| format!("{b:02x}")).collect(),
                }
            }
        };
        let mut cs = vec![Constraint::Size { min: lo, max: hi }];
        if let Some(a) = alphabet {
            cs.push(Constraint::Alphabet {
                chars: String::from_utf8(a.to_vec()).expect("7-bit alphabet"),
            });
        }
        self.wrap(PlanNode::new(kind), cs, ann)
    }

    /// Maps child names to ACN children, reporting children that name no
    /// component.
    fn child_map(
        &mut self,
        ann: &Ann<'a>,
        names: impl Iterator<Item = &'a str> + Clone,
        what: &str,
    ) -> HashMap<&'a str, &'a AcnChild> {
        let mut map = HashMap::new();
        for c in ann.children.unwrap_or(&[]) {
            match &c.name {
                None => self.diag(DiagnosticKind::Unsupported, c.span, format!("unnamed child in a {what}")),
                Some(_) if c.inserted.is_some() => self.diag(
                    DiagnosticKind::Unsupported,
                    c.span,
                    format!("ACN-inserted fields are not supported in a {what}"),
                ),
                Some(n) => match names.clone().find(|m| m == n) {
                    Some(m) => {
                        map.insert(m, c);
                    }
                    None => self.diag(
                        DiagnosticKind::UnresolvedReference,
                        c.span,
                        format!("{what} has no component `{n}`"),
                    ),
                },
            }
        }
        map
    }

    fn sequence(&mut self, fields: &'a [SequenceField], ann: &Ann<'a>, env: &mut Env, path: &str) -> PlanNode {
        enum Item<'b> {
            Field(&'b SequenceField, Option<&'b AcnChild>),
            Inserted(&'b AcnChild, String),
        }
        let mut items: Vec<Item> = Vec::new();
        let mut next_field = 0;
        for c in ann.children.unwrap_or(&[]) {
            let Some(name) = &c.name else {
                self.diag(DiagnosticKind::Unsupported, c.span, "unnamed child in a SEQUENCE");
                continue;
            };
            let field_pos = fields.iter().position(|f| &f.name == name);
            match (&c.inserted, field_pos) {
                (Some(_), Some(_)) => self.diag(
                    DiagnosticKind::DuplicateName,
                    c.span,
                    format!("inserted field `{name}` has the name of an ASN.1 field"),
                ),
                (Some(ty), None) => {
                    if !c.args.is_empty() {
                        self.diag(DiagnosticKind::ArityMismatch, c.span, "inserted fields take no arguments");
                    }
                    items.push(Item::Inserted(c, ty.to_string()));
                }
                (None, Some(pos)) if pos < next_field => self.diag(
                    DiagnosticKind::Ordering,
                    c.span,
                    format!("`{name}` is listed out of ASN.1 field order"),
                ),
                (None, Some(pos)) => {
                    for f in &fields[next_field..pos] {
                        items.push(Item::Field(f, None));
                    }
                    items.push(Item::Field(&fields[pos], Some(c)));
                    next_field = pos + 1;
                }
                (None, None) => self.diag(
                    DiagnosticKind::UnresolvedReference,
                    c.span,
                    format!("SEQUENCE has no field `{name}`"),
                ),
            }
        }
        for f in &fields[next_field..] {
            items.push(Item::Field(f, None));
        }

        let frame = items
            .iter()
            .map(|it| match it {
                Item::Field(f, _) => ScopeEntry {
                    name: f.name.clone(),
                    slot: None,
                    ty: String::new(),
                    kind: None,
                    done: false,
                },
                Item::Inserted(c, ty) => {
                    let name = c.name.clone().unwrap();
                    ScopeEntry {
                        slot: Some(join(path, &name)),
                        name,
                        ty: ty.clone(),
                        kind: None,
                        done: false,
                    }
                }
            })
            .collect();
        env.frames.push(frame);

        let mut planned = Vec::new();
        for (i, it) in items.iter().enumerate() {
            match it {
                Item::Inserted(c, _) => {
                    let name = c.name.clone().unwrap();
                    let fpath = join(path, &name);
                    let child_ann = Ann::from_child(c);
                    let (node, kind) = match c.inserted.as_ref().unwrap() {
                        InsertedType::Integer => {
                            self.allow(&child_ann, &["size", "encoding", "endianness", "align-to-next"], "INTEGER");
                            let n = self.int_repr(None, &child_ann, "INTEGER");
                            (self.wrap(n, vec![], &child_ann), Some(SlotKind::Int))
                        }
                        InsertedType::Boolean => {
                            self.allow(&child_ann, &["align-to-next"], "BOOLEAN");
                            (self.wrap(PlanNode::new(NodeKind::Bool), vec![], &child_ann), Some(SlotKind::Bool))
                        }
                        InsertedType::Reference(tname) => {
                            let kind = self.kind_of_type_name(tname, c.span);
                            if kind.is_none() && self.asn.get(tname).is_some() {
                                self.diag(
                                    DiagnosticKind::DeterminantType,
                                    c.span,
                                    format!("inserted field `{name}` must be INTEGER, BOOLEAN or ENUMERATED; `{tname}` is not"),
                                );
                            }
                            let n = self.reference(tname, c.span, &child_ann, env, &fpath);
                            (n, kind)
                        }
                    };
                    let entry = &mut env.frames.last_mut().unwrap()[i];
                    entry.kind = kind;
                    entry.done = true;
                    planned.push(FieldPlan {
                        name,
                        role: FieldRole::Inserted { slot: fpath },
                        node,
                    });
                }
                Item::Field(f, child) => {
                    let fpath = join(path, &f.name);
                    let present_when = child.and_then(|c| {
                        c.props.iter().find_map(|p| match &p.kind {
                            AcnProperty::PresentWhen(r) => Some((r, p.span)),
                            _ => None,
                        })
                    });
                    let role = match (f.optional, present_when) {
                        (false, None) => FieldRole::Value,
                        (false, Some((_, span))) => {
                            self.diag(
                                DiagnosticKind::Unsupported,
                                span,
                                format!("`present-when` on `{}`, which is not OPTIONAL", f.name),
                            );
                            FieldRole::Value
                        }
                        (true, None) => {
                            self.diag(
                                DiagnosticKind::Unsupported,
                                child.map_or(f.span, |c| c.span),
                                format!("OPTIONAL field `{}` needs a `present-when` property", f.name),
                            );
                            FieldRole::Value
                        }
                        (true, Some((r, _))) => match self.lookup(r, env) {
                            Some((slot, _, Some(SlotKind::Bool))) => {
                                self.wires.push(Wire {
                                    consumer: fpath.clone(),
                                    producer: slot.clone(),
                                    role: WireRole::PresentWhen,
                                });
                                FieldRole::Optional { present_when: slot }
                            }
                            Some((_, ty, _)) => {
                                self.diag(
                                    DiagnosticKind::DeterminantType,
                                    r.span,
                                    format!("`present-when {r}` needs a BOOLEAN, but it is `{ty}`"),
                                );
                                FieldRole::Value
                            }
                            None => FieldRole::Value,
                        },
                    };
                    let child_ann = match child {
                        Some(c) => Ann::from_child(c),
                        None => Ann {
                            site: f.span,
                            ..Ann::default()
                        },
                    };
                    let node = self.ty(&f.ty, &child_ann, env, &fpath);
                    env.frames.last_mut().unwrap()[i].done = true;
                    planned.push(FieldPlan {
                        name: f.name.clone(),
                        role,
                        node,
                    });
                }
            }
        }
        env.frames.pop();
        PlanNode::new(NodeKind::Record { fields: planned })
    }
}
