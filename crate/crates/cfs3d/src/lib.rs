//! Joint semantic/instance segmentation of 3D point clouds.
//!
//! The crate trains a small per-point network whose two decoder branches
//! exchange information through coupled gate units, supervises the instance
//! branch with a discriminative embedding loss plus an equilibrium term that
//! balances embedding dimension magnitudes, clusters the embeddings with
//! mean-shift at inference, stitches per-block instances into scene-global
//! ids, and scores the result with the usual semantic and instance metrics.
//!
//! Everything runs on the CPU in `f64` and is deterministic given a seed.
//! See the `book/` guide for worked examples; its code blocks are compiled
//! and run as doctests via the [`guide`] module.

pub mod blocks;
pub mod cluster;
pub mod config;
pub mod data_io;
pub mod diffcore;
pub mod error;
pub mod guide;
pub mod losses;
pub mod metrics;
pub mod model;
pub mod pipeline;
pub mod seeding;
pub mod train;

pub use error::{Error, Result};
