//! Counterexample generation for discrete-time Markov chains.
//!
//! Given a DTMC and a violated upper-bounded reachability property
//! `P<=λ (F target)` (or `P<λ`), the crate computes a *critical subsystem*:
//! a fragment of the chain whose own reachability probability already
//! breaks the bound. Subsystems live in views of an SCC hierarchy, so a
//! counterexample can start fully abstract and be concretized step by step.

pub mod cli;
pub mod ingest;
pub mod model;
pub mod reachability;
pub mod scc;
pub mod search;
pub mod service;
pub mod session;
pub mod subsystem;

mod solver;

pub use model::{Comparison, Dtmc, ModelError, ReachabilityProperty, StateId, Violation};
pub use reachability::{check_property, compute_prob01, solve_reachability, ProbVector, Verdict};
pub use scc::{build_hierarchy, build_view, decompose_sccs, SccHierarchy, View, ViewVertex};
pub use search::{Budget, SearchConfig, SearchMethod};
pub use session::{RefinementSession, SessionStatus};
pub use subsystem::Subsystem;


/// Formats a probability with six decimals, trailing zeros trimmed.
pub fn fmt_prob(p: f64) -> String {
    let s = format!("{p:.6}");
    let s = s.trim_end_matches('0').trim_end_matches('.');
    if s.is_empty() || s == "-" {
        "0".to_string()
    } else {
        s.to_string()
    }
}
