//! Desk-scale science text-game laboratory.
//!
//! The crate bundles a deterministic multi-room text world, a catalog of
//! seeded task variations with milestone scoring, a gold-path planner that
//! produces behavior-cloning transcripts, the agent/game dialog codec with
//! word-piece budget packing, a text-level preconditions guard, pluggable
//! policies (including an HTTP completion client) and the evaluation
//! pipeline that classifies every emitted action and aggregates reports.

pub mod category;
pub mod cli;
pub mod error;
pub mod eval;
pub mod guard;
pub mod planner;
pub mod policy;
pub mod seed;
pub mod tasks;
pub mod transcript;
pub mod world;

pub use category::ActionCategory;
pub use error::{Error, Result};
