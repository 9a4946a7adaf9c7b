use std::collections::{BTreeMap, BTreeSet};

use schemars::JsonSchema;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use super::hierarchy::{NodeId, SccHierarchy};
use crate::model::{Dtmc, StateId};
use crate::reachability::SolveError;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum ViewError {
    #[error("unknown hierarchy node {0}")]
    UnknownNode(NodeId),
    #[error("node {node} cannot be expanded while its parent {parent} is collapsed")]
    ParentCollapsed { node: NodeId, parent: NodeId },
    #[error(transparent)]
    Solve(#[from] SolveError),
}

/// A vertex of a view: a visible concrete state, or the entry point of a
/// collapsed SCC node identified by its input state.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize, JsonSchema)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum ViewVertex {
    Concrete { state: StateId },
    Abstract { node: NodeId, input: StateId },
}

impl ViewVertex {
    /// The concrete state this vertex stands at.
    pub fn state(self) -> StateId {
        match self {
            ViewVertex::Concrete { state } => state,
            ViewVertex::Abstract { input, .. } => input,
        }
    }

    pub fn node(self) -> Option<NodeId> {
        match self {
            ViewVertex::Concrete { .. } => None,
            ViewVertex::Abstract { node, .. } => Some(node),
        }
    }

    pub fn is_abstract(self) -> bool {
        matches!(self, ViewVertex::Abstract { .. })
    }
}

/// The mixed concrete/abstract graph selected by a set of expanded nodes.
///
/// Vertices are ordered by the concrete state they stand at, so a view with
/// every node expanded is numbered exactly like the model.
#[derive(Debug, Clone)]
pub struct View {
    expanded: BTreeSet<NodeId>,
    vertices: Vec<ViewVertex>,
    index_of: Vec<usize>,
    graph: Dtmc,
}

impl View {
    pub fn expanded(&self) -> &BTreeSet<NodeId> {
        &self.expanded
    }

    pub fn vertices(&self) -> &[ViewVertex] {
        &self.vertices
    }

    pub fn vertex(&self, v: usize) -> ViewVertex {
        self.vertices[v]
    }

    pub fn num_vertices(&self) -> usize {
        self.vertices.len()
    }

    /// The view as a chain over vertex indices, labels projected from states.
    pub fn graph(&self) -> &Dtmc {
        &self.graph
    }

    pub fn initial(&self) -> usize {
        self.graph.initial()
    }

    /// Vertex standing at concrete state `s`, if visible.
    pub fn index_of_state(&self, s: StateId) -> Option<usize> {
        self.index_of.get(s).copied().filter(|&v| v != usize::MAX)
    }

    /// Vertex membership mask of the states carrying `label`.
    pub fn label_mask(&self, label: &str) -> Vec<bool> {
        let mut mask = vec![false; self.num_vertices()];
        if let Some(set) = self.graph.label(label) {
            for &v in set {
                mask[v] = true;
            }
        }
        mask
    }

    pub fn abstract_vertices(&self) -> impl Iterator<Item = (usize, NodeId)> + '_ {
        self.vertices
            .iter()
            .enumerate()
            .filter_map(|(v, x)| x.node().map(|n| (v, n)))
    }
}

/// Builds the view in which exactly the nodes in `expanded` are concretized.
/// Expansion is parent-first: a child may only be listed if its parent is.
pub fn build_view(model: &Dtmc, hierarchy: &SccHierarchy, expanded: &BTreeSet<NodeId>) -> Result<View, ViewError> {
    for &id in expanded {
        let node = hierarchy.node(id).ok_or(ViewError::UnknownNode(id))?;
        if let Some(parent) = node.parent {
            if !expanded.contains(&parent) {
                return Err(ViewError::ParentCollapsed { node: id, parent });
            }
        }
    }

    // Top-most collapsed node on each node's ancestor chain (parents precede children).
    let mut collapsed_top: Vec<Option<NodeId>> = Vec::with_capacity(hierarchy.len());
    for node in hierarchy.nodes() {
        let inherited = node.parent.and_then(|p| collapsed_top[p]);
        collapsed_top.push(inherited.or((!expanded.contains(&node.id)).then_some(node.id)));
    }

    let n = model.num_states();
    let mut vertices = Vec::new();
    let mut index_of = vec![usize::MAX; n];
    for s in 0..n {
        let vertex = match hierarchy.home(s).and_then(|h| collapsed_top[h].map(|c| (h, c))) {
            None => Some(ViewVertex::Concrete { state: s }),
            Some((home, top)) => {
                let node = &hierarchy.nodes()[top];
                (home == top && node.is_input(s)).then_some(ViewVertex::Abstract { node: top, input: s })
            }
        };
        if let Some(v) = vertex {
            index_of[s] = vertices.len();
            vertices.push(v);
        }
    }

    let mut rows = Vec::with_capacity(vertices.len());
    for &v in &vertices {
        let row: Vec<(usize, f64)> = match v {
            ViewVertex::Concrete { state } => model.row_iter(state).map(|(t, p)| (index_of[t], p)).collect(),
            ViewVertex::Abstract { node, input } => hierarchy
                .abstract_transitions(node, model)?
                .row(input)
                .unwrap_or(&[])
                .iter()
                .map(|&(o, p)| (index_of[o], p))
                .collect(),
        };
        debug_assert!(row.iter().all(|&(t, _)| t != usize::MAX), "edge into hidden state");
        rows.push(row);
    }

    let mut graph = Dtmc::from_rows(index_of[model.initial()], rows);
    let labels: BTreeMap<String, BTreeSet<usize>> = model
        .labels()
        .iter()
        .map(|(name, states)| {
            let vs = states.iter().filter_map(|&s| index_of.get(s).copied().filter(|&v| v != usize::MAX));
            (name.clone(), vs.collect())
        })
        .collect();
    graph.set_labels(labels);

    Ok(View {
        expanded: expanded.clone(),
        vertices,
        index_of,
        graph,
    })
}
