//! Critical subsystems: vertex/edge sets of a view together with the
//! reachability probability of the chain they induce.

use std::collections::BTreeSet;
use std::fmt::Write as _;

use schemars::JsonSchema;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::model::{Dtmc, ReachabilityProperty};
use crate::reachability::{solve_reachability_with, SolveConfig, SolveError};
use crate::scc::{SccHierarchy, View, ViewVertex};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum SubsystemError {
    #[error("subsystem does not contain the initial vertex")]
    MissingInitial,
    #[error(transparent)]
    Solve(#[from] SolveError),
}

/// How a subsystem picks up edges.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize, JsonSchema)]
#[serde(rename_all = "snake_case")]
pub enum EdgeMode {
    /// Only edges on added walks and fragments.
    #[default]
    Tracked,
    /// Every view edge between member vertices.
    StateClosure,
}

#[derive(Debug, Clone, PartialEq)]
struct Cached {
    prob: Option<f64>,
    /// Last solution indexed by view vertex; kept across edits for warm starts.
    values: Vec<f64>,
}

/// A set of view vertices and view edges.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct Subsystem {
    vertices: BTreeSet<usize>,
    edges: BTreeSet<(usize, usize)>,
    cache: Option<Cached>,
}

/// The chain induced by a subsystem: members in ascending vertex order,
/// followed by one absorbing sink.
#[derive(Debug, Clone, PartialEq)]
pub struct InducedModel {
    pub model: Dtmc,
    /// Local index → view vertex.
    pub members: Vec<usize>,
    pub sink: usize,
}

impl Subsystem {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn from_parts(vertices: BTreeSet<usize>, edges: BTreeSet<(usize, usize)>) -> Self {
        Subsystem {
            vertices,
            edges,
            cache: None,
        }
    }

    pub fn vertices(&self) -> &BTreeSet<usize> {
        &self.vertices
    }

    pub fn edges(&self) -> &BTreeSet<(usize, usize)> {
        &self.edges
    }

    pub fn is_empty(&self) -> bool {
        self.vertices.is_empty()
    }

    pub fn contains(&self, v: usize) -> bool {
        self.vertices.contains(&v)
    }

    pub fn has_edge(&self, u: usize, v: usize) -> bool {
        self.edges.contains(&(u, v))
    }

    /// The whole view as a subsystem.
    pub fn whole(view: &View) -> Self {
        let g = view.graph();
        Subsystem::from_parts(
            (0..view.num_vertices()).collect(),
            g.transitions().map(|(s, t, _)| (s, t)).collect(),
        )
    }

    /// Unions the vertices and consecutive edges of `walk`.
    pub fn add_walk(&mut self, walk: &[usize]) {
        let before = (self.vertices.len(), self.edges.len());
        self.vertices.extend(walk.iter().copied());
        self.edges.extend(walk.windows(2).map(|w| (w[0], w[1])));
        if before != (self.vertices.len(), self.edges.len()) {
            self.invalidate();
        }
    }

    pub fn add_edge(&mut self, u: usize, v: usize) {
        let fresh = self.vertices.insert(u) | self.vertices.insert(v) | self.edges.insert((u, v));
        if fresh {
            self.invalidate();
        }
    }

    /// Adds every view edge whose endpoints are both members.
    pub fn close_states(&mut self, view: &View) {
        let g = view.graph();
        let mut added = false;
        for &u in &self.vertices {
            for &v in g.row(u).0 {
                if self.vertices.contains(&v) {
                    added |= self.edges.insert((u, v));
                }
            }
        }
        if added {
            self.invalidate();
        }
    }

    pub fn clear(&mut self) {
        *self = Subsystem::new();
    }

    fn invalidate(&mut self) {
        if let Some(c) = &mut self.cache {
            c.prob = None;
        }
    }

    /// The cached probability, if still valid.
    pub fn cached_probability(&self) -> Option<f64> {
        self.cache.as_ref().and_then(|c| c.prob)
    }

    /// Last solver vector by view vertex.
    pub fn cached_values(&self) -> Option<&[f64]> {
        self.cache.as_ref().map(|c| c.values.as_slice())
    }

    /// Builds the induced chain: member rows keep their subsystem edges,
    /// missing mass goes to a fresh absorbing sink, member targets become
    /// absorbing.
    pub fn induce(&self, view: &View, targets: &[bool]) -> Result<InducedModel, SubsystemError> {
        if !self.vertices.contains(&view.initial()) {
            return Err(SubsystemError::MissingInitial);
        }
        let g = view.graph();
        let members: Vec<usize> = self.vertices.iter().copied().collect();
        let local = |v: usize| members.binary_search(&v).expect("edge endpoint is a member");
        let sink = members.len();

        let mut rows: Vec<Vec<(usize, f64)>> = Vec::with_capacity(members.len() + 1);
        for &u in &members {
            if targets[u] {
                rows.push(vec![(local(u), 1.0)]);
                continue;
            }
            let mut row = Vec::new();
            let mut kept = 0.0;
            for (v, p) in g.row_iter(u) {
                if self.edges.contains(&(u, v)) {
                    row.push((local(v), p));
                    kept += p;
                }
            }
            let missing = 1.0 - kept;
            if missing > 1e-15 {
                row.push((sink, missing));
            }
            rows.push(row);
        }
        rows.push(vec![(sink, 1.0)]);

        let mut model = Dtmc::from_rows(local(view.initial()), rows);
        model.set_labels(
            g.labels()
                .iter()
                .map(|(name, vs)| {
                    let ls = vs.iter().filter_map(|v| members.binary_search(v).ok()).collect();
                    (name.clone(), ls)
                })
                .collect(),
        );
        Ok(InducedModel { model, members, sink })
    }

    /// Reachability probability of the induced chain, warm-started from the
    /// previous solution and cached until the next edit.
    pub fn probability(&mut self, view: &View, targets: &[bool]) -> Result<f64, SubsystemError> {
        if let Some(p) = self.cached_probability() {
            return Ok(p);
        }
        if self.vertices.is_empty() {
            return Ok(0.0);
        }
        let induced = self.induce(view, targets)?;
        let local_targets: Vec<bool> = induced
            .members
            .iter()
            .map(|&v| targets[v])
            .chain(std::iter::once(false))
            .collect();
        let warm: Option<Vec<f64>> = self.cache.as_ref().map(|c| {
            induced
                .members
                .iter()
                .map(|&v| c.values[v])
                .chain(std::iter::once(0.0))
                .collect()
        });
        let config = SolveConfig {
            warm_start: warm.as_deref(),
            monotone: true,
            ..Default::default()
        };
        let pv = solve_reachability_with(&induced.model, &local_targets, &config)?;
        let prob = pv.values[induced.model.initial()];

        let mut values = vec![0.0; view.num_vertices()];
        for (k, &v) in induced.members.iter().enumerate() {
            values[v] = pv.values[k];
        }
        self.cache = Some(Cached {
            prob: Some(prob),
            values,
        });
        Ok(prob)
    }

    pub fn is_critical(&mut self, view: &View, targets: &[bool], prop: &ReachabilityProperty) -> Result<bool, SubsystemError> {
        Ok(prop.is_violated_by(self.probability(view, targets)?))
    }

    pub fn stats(&self, view: &View, hierarchy: &SccHierarchy, prob: f64) -> SubsystemStats {
        let mut covered = BTreeSet::new();
        let mut abstract_vertices = 0;
        for &v in &self.vertices {
            match view.vertex(v) {
                ViewVertex::Concrete { state } => {
                    covered.insert(state);
                }
                ViewVertex::Abstract { node, .. } => {
                    abstract_vertices += 1;
                    if let Some(n) = hierarchy.node(node) {
                        covered.extend(n.members.iter().copied());
                    }
                }
            }
        }
        SubsystemStats {
            vertices: self.vertices.len(),
            abstract_vertices,
            concrete_states: covered.len(),
            transitions: self.edges.len(),
            prob: if self.vertices.is_empty() { 0.0 } else { prob },
        }
    }

    /// The subsystem's edges in `.tra` form over concrete state ids, with
    /// view probabilities.
    pub fn to_tra(&self, view: &View, num_states: usize) -> String {
        let mut out = String::new();
        let _ = writeln!(out, "STATES {num_states}");
        let _ = writeln!(out, "TRANSITIONS {}", self.edges.len());
        for &(u, v) in &self.edges {
            let p = view.graph().prob(u, v);
            let _ = writeln!(out, "{} {} {}", view.vertex(u).state(), view.vertex(v).state(), p);
        }
        out
    }
}

/// Free-function form of [`Subsystem::probability`] for one-off queries.
pub fn probability(view: &View, subsystem: &Subsystem, prop: &ReachabilityProperty) -> Result<f64, SubsystemError> {
    let mut sub = subsystem.clone();
    sub.probability(view, &view.label_mask(&prop.target_label))
}

pub fn is_critical(view: &View, subsystem: &Subsystem, prop: &ReachabilityProperty) -> Result<bool, SubsystemError> {
    Ok(prop.is_violated_by(probability(view, subsystem, prop)?))
}

/// Size figures of a subsystem.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize, JsonSchema)]
pub struct SubsystemStats {
    pub vertices: usize,
    pub abstract_vertices: usize,
    /// Concrete states covered, abstract vertices counted with all members of their node.
    pub concrete_states: usize,
    pub transitions: usize,
    pub prob: f64,
}
