//! Online verification engine for feedforward ReLU networks.
//!
//! The library verifies input-output specifications by interval reachability
//! plus input branching, and keeps the result current across a stream of
//! changing problems (input-set drift, weight updates, fine-tuning) by
//! reusing, tolerating, or incrementally recomputing previous results
//! instead of re-verifying from scratch.
//!
//! Layout:
//! - [`geometry`]: interval boxes, polytopes, a dense LP solver, and set
//!   distances.
//! - [`network`]: ReLU networks, weight-change metrics, interval networks,
//!   and Lipschitz bounds.
//! - [`reachability`]: interval reachable sets, spec checking, incremental
//!   recomputation.
//! - [`branching`]: the reach-plus-branch baseline and the branch store.
//! - [`engine`]: the per-step online loop with its six accelerators and the
//!   real-time construction planner.

pub mod branching;
pub mod engine;
pub mod error;
pub mod geometry;
pub mod network;
pub mod reachability;

mod par;

pub use error::{Error, Result};
