//! SCC decomposition, the nested SCC hierarchy, and mixed
//! concrete/abstract views built from it.

mod hierarchy;
pub mod tarjan;
mod view;

pub use hierarchy::{build_hierarchy, AbstractTransitions, NodeId, SccHierarchy, SccNode};
pub use view::{build_view, View, ViewError, ViewVertex};

use crate::model::{Dtmc, StateId};

/// One strongly connected component of a model.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Scc {
    pub states: Vec<StateId>,
    pub nontrivial: bool,
}

/// Partitions all states into SCCs, in reverse topological order.
///
/// A component is non-trivial when it has at least two states, or a single
/// state with a self-loop of probability below 1. Absorbing states are
/// trivial.
pub fn decompose_sccs(model: &Dtmc) -> Vec<Scc> {
    tarjan::strongly_connected_components(model.num_states(), |s| model.row(s).0.iter().copied())
        .into_iter()
        .map(|states| {
            let nontrivial = is_nontrivial(model, &states);
            Scc { states, nontrivial }
        })
        .collect()
}

pub(crate) fn is_nontrivial(model: &Dtmc, comp: &[StateId]) -> bool {
    match comp {
        [s] => {
            let p = model.prob(*s, *s);
            p > 0.0 && p < 1.0
        }
        _ => comp.len() > 1,
    }
}
