//! Correspondence (DP) coloring with a wasteful nibble procedure.
//!
//! The crate is organised bottom-up:
//!
//! - [`graph`]: simple graphs, instance generators, `K_{1,s,t}` detection.
//! - [`cover`]: DP-covers, their validation and restriction, properness.
//! - [`nibble`]: one randomized coloring round, its acceptance conditions,
//!   the retry loop, and Monte-Carlo statistics.
//! - [`schedule`]: the deterministic parameter recursion that drives the rounds.
//! - [`pipeline`]: the full multi-round coloring, ending in a finisher.
//! - [`finisher`]: completing a coloring once lists dominate degrees, plus an
//!   exhaustive oracle for small instances.

pub mod coloring;
pub mod cover;
mod csr;
pub mod error;
pub mod finisher;
pub mod fmt;
pub mod graph;
pub mod nibble;
pub mod pipeline;
pub mod rng;
pub mod schedule;

pub use coloring::PartialColoring;
pub use cover::{ColorId, CoverViolation, DPCover, Restriction};
pub use error::{Error, Result};
pub use graph::{Graph, VertexId};
