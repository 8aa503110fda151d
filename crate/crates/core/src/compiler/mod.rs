//! Resolution, size analysis and compilation of schemas into codec plans.
//!
//! ```
//! use acnkit::compiler::compile_source;
//!
//! let plan = compile_source("T ::= INTEGER (0 .. 255)", "T [size 8]", "T").unwrap();
//! assert_eq!(plan.bounds().max_bits, 8);
//! ```

pub mod plan;
pub mod resolve;

use thiserror::Error;

use crate::frontend::{parse_acn, parse_asn1, Diagnostics};

pub use plan::{AlignClass, CodecPlan, NodeKind, PlanError, PlanNode, SizeBounds, SlotRef};
pub use resolve::{resolve, size_bounds, ResolvedSchema, Wire, WireRole};

#[derive(Debug, Error)]
pub enum CompileError {
    #[error("{0}")]
    Diagnostics(#[from] Diagnostics),
    #[error("no type assignment named `{0}`")]
    UnknownType(String),
    #[error("`{0}` takes ACN parameters and can only be compiled where it is instantiated")]
    Parameterized(String),
    #[error(transparent)]
    Invalid(#[from] PlanError),
}

/// Plan for one type assignment of a resolved schema.
pub fn compile(schema: &ResolvedSchema, type_name: &str) -> Result<CodecPlan, CompileError> {
    let t = schema
        .get(type_name)
        .ok_or_else(|| CompileError::UnknownType(type_name.to_string()))?;
    if !t.params.is_empty() {
        return Err(CompileError::Parameterized(type_name.to_string()));
    }
    let plan = CodecPlan::new(type_name, t.root.clone());
    plan.validate()?;
    Ok(plan)
}

/// Parses, resolves and compiles in one step.
pub fn compile_source(asn: &str, acn: &str, type_name: &str) -> Result<CodecPlan, CompileError> {
    let schema = resolve(&parse_asn1(asn)?, &parse_acn(acn)?)?;
    compile(&schema, type_name)
}
