use std::collections::{BTreeSet, VecDeque};
use std::sync::OnceLock;

use serde::Serialize;

use super::is_nontrivial;
use super::tarjan::strongly_connected_components;
use crate::model::{Dtmc, StateId};
use crate::reachability::SolveError;
use crate::solver::{Solved, SolveOptions, SparseSystem, COLUMN_CHUNK};

pub type NodeId = usize;

/// Tolerance of the per-node absorption solves. Tighter than the default
/// model-checking tolerance since abstract edges feed every later solve.
const ABSTRACTION_TOL: f64 = 1e-14;
const ABSTRACTION_MAX_ITER: usize = 10_000_000;

/// Exit distribution of each input state of an SCC node.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct AbstractTransitions {
    /// `(input, [(output, prob)])`, inputs ascending, outputs ascending.
    pub rows: Vec<(StateId, Vec<(StateId, f64)>)>,
}

impl AbstractTransitions {
    pub fn row(&self, input: StateId) -> Option<&[(StateId, f64)]> {
        self.rows
            .binary_search_by_key(&input, |(i, _)| *i)
            .ok()
            .map(|k| self.rows[k].1.as_slice())
    }

    pub fn get(&self, input: StateId, output: StateId) -> f64 {
        self.row(input)
            .and_then(|r| r.iter().find(|(o, _)| *o == output).map(|(_, p)| *p))
            .unwrap_or(0.0)
    }
}

/// A non-trivial SCC in the hierarchy.
#[derive(Debug)]
pub struct SccNode {
    pub id: NodeId,
    pub parent: Option<NodeId>,
    pub depth: usize,
    pub members: Vec<StateId>,
    /// Members entered from outside the node, plus the initial state if it is a member.
    pub inputs: Vec<StateId>,
    /// Non-members entered from a member.
    pub outputs: Vec<StateId>,
    pub children: Vec<NodeId>,
    abstract_trans: OnceLock<AbstractTransitions>,
}

impl SccNode {
    pub fn is_input(&self, s: StateId) -> bool {
        self.inputs.binary_search(&s).is_ok()
    }

    pub fn contains(&self, s: StateId) -> bool {
        self.members.binary_search(&s).is_ok()
    }

    /// True when no transition leaves the node.
    pub fn is_bottom(&self) -> bool {
        self.outputs.is_empty()
    }
}

/// Forest of nested non-trivial SCCs.
#[derive(Debug)]
pub struct SccHierarchy {
    roots: Vec<NodeId>,
    nodes: Vec<SccNode>,
    home: Vec<Option<NodeId>>,
}

impl SccHierarchy {
    pub fn roots(&self) -> &[NodeId] {
        &self.roots
    }

    pub fn nodes(&self) -> &[SccNode] {
        &self.nodes
    }

    pub fn node(&self, id: NodeId) -> Option<&SccNode> {
        self.nodes.get(id)
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    /// Deepest node containing `s`.
    pub fn home(&self, s: StateId) -> Option<NodeId> {
        self.home.get(s).copied().flatten()
    }

    pub fn depth(&self) -> usize {
        self.nodes.iter().map(|n| n.depth + 1).max().unwrap_or(0)
    }

    /// Abstract transitions of node `id`, computed on first use and cached.
    pub fn abstract_transitions(&self, id: NodeId, model: &Dtmc) -> Result<&AbstractTransitions, SolveError> {
        let node = &self.nodes[id];
        if let Some(t) = node.abstract_trans.get() {
            return Ok(t);
        }
        let computed = compute_abstract_transitions(node, model)?;
        Ok(node.abstract_trans.get_or_init(|| computed))
    }

    /// Fills every node's cache, solving independent nodes on parallel threads.
    pub fn precompute(&self, model: &Dtmc) -> Result<(), SolveError> {
        let workers = std::thread::available_parallelism().map_or(1, |n| n.get()).min(self.nodes.len().max(1));
        let ids: Vec<NodeId> = (0..self.nodes.len()).collect();
        let chunk = ids.len().div_ceil(workers).max(1);
        std::thread::scope(|scope| {
            let handles: Vec<_> = ids
                .chunks(chunk)
                .map(|part| {
                    scope.spawn(move || {
                        for &id in part {
                            self.abstract_transitions(id, model)?;
                        }
                        Ok::<_, SolveError>(())
                    })
                })
                .collect();
            handles
                .into_iter()
                .try_for_each(|h| h.join().expect("abstraction worker panicked"))
        })
    }
}

/// Builds the SCC hierarchy of `model`. States in `excluded` (the targets)
/// never become members of any node.
pub fn build_hierarchy(model: &Dtmc, excluded: &BTreeSet<StateId>) -> SccHierarchy {
    let n = model.num_states();
    let excluded = model.mask(excluded);
    let pred = model.predecessors();
    let mut scratch = vec![usize::MAX; n];
    let mut in_node = vec![false; n];

    let all: Vec<StateId> = (0..n).filter(|&s| !excluded[s]).collect();
    let mut queue: VecDeque<(Vec<StateId>, Option<NodeId>, usize)> = nontrivial_sccs_within(model, &all, &mut scratch)
        .into_iter()
        .map(|c| (c, None, 0))
        .collect();

    let mut nodes: Vec<SccNode> = Vec::new();
    let mut roots = Vec::new();
    while let Some((members, parent, depth)) = queue.pop_front() {
        let id = nodes.len();
        for &m in &members {
            in_node[m] = true;
        }
        let mut inputs = Vec::new();
        let mut outputs = Vec::new();
        for &m in &members {
            if m == model.initial() || pred.of(m).iter().any(|&p| !in_node[p]) {
                inputs.push(m);
            }
            outputs.extend(model.row(m).0.iter().copied().filter(|&t| !in_node[t]));
        }
        outputs.sort_unstable();
        outputs.dedup();
        for &m in &members {
            in_node[m] = false;
        }

        // An unenterable node has no inputs to peel off.
        if !inputs.is_empty() {
            let rest: Vec<StateId> = members.iter().copied().filter(|s| inputs.binary_search(s).is_err()).collect();
            for c in nontrivial_sccs_within(model, &rest, &mut scratch) {
                queue.push_back((c, Some(id), depth + 1));
            }
        }

        match parent {
            Some(p) => nodes[p].children.push(id),
            None => roots.push(id),
        }
        nodes.push(SccNode {
            id,
            parent,
            depth,
            members,
            inputs,
            outputs,
            children: Vec::new(),
            abstract_trans: OnceLock::new(),
        });
    }

    let mut home = vec![None; n];
    for node in &nodes {
        for &m in &node.members {
            home[m] = Some(node.id);
        }
    }
    SccHierarchy { roots, nodes, home }
}

/// Non-trivial SCCs of the subgraph induced by `subset` (sorted, global ids).
fn nontrivial_sccs_within(model: &Dtmc, subset: &[StateId], scratch: &mut [usize]) -> Vec<Vec<StateId>> {
    for (k, &s) in subset.iter().enumerate() {
        scratch[s] = k;
    }
    let comps = strongly_connected_components(subset.len(), |k| {
        let scratch = &*scratch;
        model.row(subset[k]).0.iter().filter_map(move |&t| {
            let l = scratch[t];
            (l != usize::MAX).then_some(l)
        })
    });
    for &s in subset {
        scratch[s] = usize::MAX;
    }
    let mut out: Vec<Vec<StateId>> = comps
        .into_iter()
        .map(|c| c.into_iter().map(|k| subset[k]).collect::<Vec<_>>())
        .filter(|c| is_nontrivial(model, c))
        .collect();
    out.sort();
    out
}

/// Exit probabilities from each input to each output, with outputs made
/// absorbing and the walk confined to the node's members.
fn compute_abstract_transitions(node: &SccNode, model: &Dtmc) -> Result<AbstractTransitions, SolveError> {
    if node.is_bottom() {
        return Ok(AbstractTransitions {
            rows: node.inputs.iter().map(|&i| (i, vec![(i, 1.0)])).collect(),
        });
    }
    let local = |s: StateId| node.members.binary_search(&s).ok();
    let out_index = |s: StateId| node.outputs.binary_search(&s).ok();
    let m = node.members.len();

    let k_in = node.inputs.len();
    let k_out = node.outputs.len();
    let mut raw_rows: Vec<Vec<f64>> = vec![Vec::new(); k_in];

    if k_in <= k_out {
        // Expected visits y = e_i + Qᵀy for each input, then exits y·R.
        let mut incoming: Vec<Vec<(usize, f64)>> = vec![Vec::new(); m];
        for (k, &s) in node.members.iter().enumerate() {
            for (t, p) in model.row_iter(s) {
                if let Some(l) = local(t) {
                    incoming[l].push((k, p));
                }
            }
        }
        let mut sys = SparseSystem::with_capacity(m, incoming.iter().map(Vec::len).sum());
        for inc in &incoming {
            sys.push_row(inc.iter().copied(), 0.0);
        }
        let mut rhs: Vec<Vec<(usize, f64)>> = vec![Vec::new(); m];
        for (c, &input) in node.inputs.iter().enumerate() {
            rhs[local(input).expect("input is a member")].push((c, 1.0));
        }
        let exits_of: Vec<Vec<(usize, f64)>> = node
            .members
            .iter()
            .map(|&s| model.row_iter(s).filter_map(|(t, p)| out_index(t).map(|o| (o, p))).collect())
            .collect();
        for row in &mut raw_rows {
            *row = vec![0.0; k_out];
        }
        sys.solve_columns(k_in, &rhs, block_options(true), |start, w, x| {
            for (l, exits) in exits_of.iter().enumerate() {
                let visits = &x[l * COLUMN_CHUNK..l * COLUMN_CHUNK + w];
                for &(o, p) in exits {
                    for (c, &v) in visits.iter().enumerate() {
                        raw_rows[start + c][o] += v * p;
                    }
                }
            }
        })
        .map_err(not_converged)?;
    } else {
        // Absorption probabilities, one column per output.
        let mut sys = SparseSystem::with_capacity(m, m * 4);
        let mut rhs: Vec<Vec<(usize, f64)>> = Vec::with_capacity(m);
        for &s in &node.members {
            let mut entries = Vec::new();
            let mut b: Vec<(usize, f64)> = Vec::new();
            for (t, p) in model.row_iter(s) {
                if let Some(l) = local(t) {
                    entries.push((l, p));
                } else if let Some(o) = out_index(t) {
                    b.push((o, p));
                }
            }
            sys.push_row(entries, 0.0);
            rhs.push(b);
        }
        let input_locals: Vec<usize> = node.inputs.iter().map(|&i| local(i).expect("input is a member")).collect();
        for row in &mut raw_rows {
            row.reserve_exact(k_out);
        }
        sys.solve_columns(k_out, &rhs, block_options(false), |_, w, x| {
            for (row, &l) in raw_rows.iter_mut().zip(&input_locals) {
                row.extend_from_slice(&x[l * COLUMN_CHUNK..l * COLUMN_CHUNK + w]);
            }
        })
        .map_err(not_converged)?;
    }

    let rows = node
        .inputs
        .iter()
        .zip(raw_rows)
        .map(|(&input, exits)| {
            // A non-bottom SCC is left with probability 1.
            let total: f64 = exits.iter().sum();
            let row = node
                .outputs
                .iter()
                .zip(&exits)
                .filter(|(_, &p)| p > 0.0)
                .map(|(&o, &p)| (o, if total > 0.0 { p / total } else { p }))
                .collect();
            (input, row)
        })
        .collect();
    Ok(AbstractTransitions { rows })
}

fn block_options(relative: bool) -> SolveOptions {
    SolveOptions {
        tol: ABSTRACTION_TOL,
        max_iter: ABSTRACTION_MAX_ITER,
        monotone: true,
        relative,
    }
}

fn not_converged(s: Solved) -> SolveError {
    SolveError::NotConverged {
        best: s.values,
        residual: s.residual,
        iterations: s.iterations,
    }
}
