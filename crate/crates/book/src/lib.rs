//! Compiles the code listings of the guide in `book/` as doc-tests, so
//! `cargo test` catches a chapter that drifts from the library.

#[doc = include_str!("../../../book/src/introduction.md")]
pub mod introduction {}
#[doc = include_str!("../../../book/src/bitstream.md")]
pub mod bitstream {}
#[doc = include_str!("../../../book/src/primitives.md")]
pub mod primitives {}
#[doc = include_str!("../../../book/src/schemas.md")]
pub mod schemas {}
#[doc = include_str!("../../../book/src/plans.md")]
pub mod plans {}
#[doc = include_str!("../../../book/src/engine.md")]
pub mod engine {}
#[doc = include_str!("../../../book/src/cli.md")]
pub mod cli {}
