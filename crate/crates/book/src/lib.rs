//! The guide chapters, compiled as documentation so that every Rust
//! snippet in `book/src` runs as a doc-test.

#[doc = include_str!("../../../book/src/introduction.md")]
pub mod introduction {}

#[doc = include_str!("../../../book/src/measures.md")]
pub mod measures {}

#[doc = include_str!("../../../book/src/algorithm.md")]
pub mod algorithm {}

#[doc = include_str!("../../../book/src/scaling.md")]
pub mod scaling {}

#[doc = include_str!("../../../book/src/trs.md")]
pub mod trs {}

#[doc = include_str!("../../../book/src/subspace.md")]
pub mod subspace {}

#[doc = include_str!("../../../book/src/sharpness.md")]
pub mod sharpness {}

#[doc = include_str!("../../../book/src/cli.md")]
pub mod cli {}

#[doc = include_str!("../../../README.md")]
pub mod readme {}
