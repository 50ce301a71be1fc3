//! The user guide, compiled.
//!
//! Each module embeds one chapter of the mdbook under `book/`, so `cargo
//! test` compiles and runs every code block the guide shows. If a chapter
//! drifts from the API, the build breaks here first.

#[doc = include_str!("../../../book/src/introduction.md")]
pub mod introduction {}

#[doc = include_str!("../../../book/src/autodiff.md")]
pub mod autodiff {}

#[doc = include_str!("../../../book/src/model.md")]
pub mod model {}

#[doc = include_str!("../../../book/src/losses.md")]
pub mod losses {}

#[doc = include_str!("../../../book/src/clustering.md")]
pub mod clustering {}

#[doc = include_str!("../../../book/src/blocks.md")]
pub mod blocks {}

#[doc = include_str!("../../../book/src/metrics.md")]
pub mod metrics {}

#[doc = include_str!("../../../book/src/training.md")]
pub mod training {}

#[doc = include_str!("../../../book/src/cli.md")]
pub mod cli {}
