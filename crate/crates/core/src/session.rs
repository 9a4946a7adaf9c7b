//! Hierarchical refinement workflow over (view, subsystem, history).
//!
//! The history stores semantic actions only. Undo and import rebuild the
//! state by replaying the history from the fully abstract start, which is
//! why searches record how many steps they took: a replayed search is run
//! with exactly that step budget and no clock.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt;
use std::sync::Arc;
use std::time::Duration;

use schemars::JsonSchema;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::ingest::{self, IndexBase, ParseError};
use crate::model::{Dtmc, ModelError, ReachabilityProperty, StateId};
use crate::reachability::{check_property, CheckError, Verdict};
use crate::scc::{build_hierarchy, build_view, NodeId, SccHierarchy, View, ViewError, ViewVertex};
use crate::search::{self, SearchConfig, SearchError, SearchOutcome};
use crate::subsystem::{Subsystem, SubsystemError, SubsystemStats};

pub const SESSION_SCHEMA: &str = "cexforge-session/1";

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize, JsonSchema)]
#[serde(rename_all = "snake_case")]
pub enum SessionStatus {
    Satisfied,
    Searching,
    Critical,
    BudgetExhausted,
}

impl fmt::Display for SessionStatus {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            SessionStatus::Satisfied => "satisfied",
            SessionStatus::Searching => "searching",
            SessionStatus::Critical => "critical",
            SessionStatus::BudgetExhausted => "budget_exhausted",
        })
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize, JsonSchema)]
#[serde(tag = "action", rename_all = "snake_case")]
pub enum Action {
    /// A search run from an empty subsystem that took `steps` steps.
    Search { steps: usize },
    Concretize { nodes: Vec<NodeId> },
    Reset,
}

/// How `auto_refine` picks the next node to concretize.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize, JsonSchema)]
#[serde(rename_all = "snake_case")]
pub enum RefinePolicy {
    /// The abstract vertex with the highest reachability value inside the
    /// subsystem, smallest node id on ties. A heuristic.
    #[default]
    MassGreedy,
    /// Concretize every node, then search once.
    ExpandAll,
}

#[derive(Debug, Error)]
pub enum SessionError {
    #[error(transparent)]
    Model(#[from] ModelError),
    #[error(transparent)]
    Check(#[from] CheckError),
    #[error(transparent)]
    View(#[from] ViewError),
    #[error(transparent)]
    Search(#[from] SearchError),
    #[error(transparent)]
    Subsystem(#[from] SubsystemError),
    #[error(transparent)]
    Parse(#[from] ParseError),
    #[error("`{action}` is not allowed while the session is {status}")]
    NotApplicable { action: &'static str, status: SessionStatus },
    #[error("nothing to undo")]
    EmptyHistory,
    #[error("search ran out of candidates before the subsystem became critical")]
    SearchFailed,
    #[error("session document: {0}")]
    Document(String),
}

/// Live refinement state. One logical owner; wrap in a lock to share.
#[derive(Debug, Clone)]
pub struct RefinementSession {
    model: Arc<Dtmc>,
    prop: ReachabilityProperty,
    config: SearchConfig,
    verdict: Verdict,
    hierarchy: Option<Arc<SccHierarchy>>,
    view: Option<View>,
    targets: Vec<bool>,
    subsystem: Subsystem,
    trace: Vec<f64>,
    last_steps: usize,
    last_elapsed: Duration,
    history: Vec<Action>,
    status: SessionStatus,
}

impl RefinementSession {
    /// Checks the property and, if violated, opens the fully abstract view.
    pub fn create(model: Arc<Dtmc>, prop: ReachabilityProperty, config: SearchConfig) -> Result<Self, SessionError> {
        let violations = model.validate();
        if !violations.is_empty() {
            return Err(ModelError::Invalid(violations).into());
        }
        let target_states = model.target_states(&prop)?;
        let verdict = check_property(&model, &prop)?;
        let mut session = RefinementSession {
            model: Arc::clone(&model),
            prop,
            config,
            verdict,
            hierarchy: None,
            view: None,
            targets: Vec::new(),
            subsystem: Subsystem::new(),
            trace: Vec::new(),
            last_steps: 0,
            last_elapsed: Duration::ZERO,
            history: Vec::new(),
            status: SessionStatus::Satisfied,
        };
        if verdict.is_violated() {
            let hierarchy = build_hierarchy(&model, &target_states);
            tracing::debug!(nodes = hierarchy.len(), depth = hierarchy.depth(), "built SCC hierarchy");
            session.hierarchy = Some(Arc::new(hierarchy));
            session.reset_to_start()?;
        }
        Ok(session)
    }

    fn reset_to_start(&mut self) -> Result<(), SessionError> {
        let view = build_view(&self.model, self.hierarchy(), &BTreeSet::new())?;
        tracing::debug!(vertices = view.num_vertices(), "built view");
        self.targets = view.label_mask(&self.prop.target_label);
        self.view = Some(view);
        self.subsystem = Subsystem::new();
        self.trace.clear();
        self.last_steps = 0;
        self.last_elapsed = Duration::ZERO;
        self.status = SessionStatus::Searching;
        Ok(())
    }

    pub fn model(&self) -> &Arc<Dtmc> {
        &self.model
    }

    pub fn property(&self) -> &ReachabilityProperty {
        &self.prop
    }

    pub fn config(&self) -> &SearchConfig {
        &self.config
    }

    pub fn verdict(&self) -> Verdict {
        self.verdict
    }

    pub fn status(&self) -> SessionStatus {
        self.status
    }

    pub fn history(&self) -> &[Action] {
        &self.history
    }

    pub fn trace(&self) -> &[f64] {
        &self.trace
    }

    pub fn last_steps(&self) -> usize {
        self.last_steps
    }

    pub fn last_elapsed(&self) -> Duration {
        self.last_elapsed
    }

    pub fn subsystem(&self) -> &Subsystem {
        &self.subsystem
    }

    /// The current view; `None` for satisfied sessions.
    pub fn view(&self) -> Option<&View> {
        self.view.as_ref()
    }

    pub fn hierarchy_opt(&self) -> Option<&SccHierarchy> {
        self.hierarchy.as_deref()
    }

    fn hierarchy(&self) -> &SccHierarchy {
        self.hierarchy.as_deref().expect("violated sessions have a hierarchy")
    }

    fn view_ref(&self) -> &View {
        self.view.as_ref().expect("violated sessions have a view")
    }

    pub fn expanded(&self) -> BTreeSet<NodeId> {
        self.view.as_ref().map(|v| v.expanded().clone()).unwrap_or_default()
    }

    /// Target membership over the current view's vertices.
    pub fn target_mask(&self) -> &[bool] {
        &self.targets
    }

    /// Current subsystem probability (0 for an empty subsystem).
    pub fn subsystem_prob(&self) -> f64 {
        self.subsystem.cached_probability().unwrap_or(0.0)
    }

    pub fn stats(&self) -> SubsystemStats {
        match (&self.view, &self.hierarchy) {
            (Some(view), Some(h)) => self.subsystem.stats(view, h, self.subsystem_prob()),
            _ => SubsystemStats {
                vertices: 0,
                abstract_vertices: 0,
                concrete_states: 0,
                transitions: 0,
                prob: 0.0,
            },
        }
    }

    fn require_open(&self, action: &'static str) -> Result<(), SessionError> {
        if self.status == SessionStatus::Satisfied {
            return Err(SessionError::NotApplicable {
                action,
                status: self.status,
            });
        }
        Ok(())
    }

    /// Runs the configured search on the current view from an empty subsystem.
    pub fn run_search(&mut self) -> Result<SessionStatus, SessionError> {
        self.require_open("search")?;
        let steps = self.search_with(self.config)?;
        self.history.push(Action::Search { steps });
        Ok(self.status)
    }

    fn search_with(&mut self, config: SearchConfig) -> Result<usize, SessionError> {
        let result = search::run(self.view_ref(), &self.targets, &self.prop, &config)?;
        let status = match result.outcome {
            SearchOutcome::Critical => SessionStatus::Critical,
            SearchOutcome::BudgetExhausted => SessionStatus::BudgetExhausted,
            SearchOutcome::NoProgress => return Err(SessionError::SearchFailed),
        };
        tracing::debug!(steps = result.steps, prob = result.prob(), %status, "search finished");
        self.subsystem = result.subsystem;
        self.trace = result.trace;
        self.last_steps = result.steps;
        self.last_elapsed = result.elapsed;
        self.status = status;
        Ok(result.steps)
    }

    /// Expands `nodes` (parent-first) and carries the subsystem over: every
    /// abstract vertex of an expanded node becomes the node's visible member
    /// subgraph together with the boundary edges toward the old successors.
    pub fn concretize(&mut self, nodes: &[NodeId]) -> Result<(), SessionError> {
        self.require_open("concretize")?;
        let current = self.expanded();
        let fresh: BTreeSet<NodeId> = nodes.iter().copied().filter(|n| !current.contains(n)).collect();
        if fresh.is_empty() {
            // Unknown ids are still worth reporting.
            for &n in nodes {
                if self.hierarchy().node(n).is_none() {
                    return Err(ViewError::UnknownNode(n).into());
                }
            }
            return Ok(());
        }
        self.apply_concretize(&fresh)?;
        self.history.push(Action::Concretize {
            nodes: fresh.into_iter().collect(),
        });
        Ok(())
    }

    fn apply_concretize(&mut self, fresh: &BTreeSet<NodeId>) -> Result<(), SessionError> {
        let expanded: BTreeSet<NodeId> = self.expanded().union(fresh).copied().collect();
        let new_view = build_view(&self.model, self.hierarchy(), &expanded)?;
        let old_view = self.view_ref();
        let remapped = remap_subsystem(&self.subsystem, old_view, &new_view, self.hierarchy(), fresh);

        self.targets = new_view.label_mask(&self.prop.target_label);
        self.view = Some(new_view);
        self.subsystem = remapped;
        self.status = if self.subsystem.is_empty() {
            SessionStatus::Searching
        } else {
            let view = self.view.as_ref().expect("just set");
            if self.subsystem.is_critical(view, &self.targets, &self.prop)? {
                SessionStatus::Critical
            } else {
                SessionStatus::Searching
            }
        };
        if let Some(p) = self.subsystem.cached_probability() {
            self.trace = vec![p];
        } else {
            self.trace.clear();
        }
        Ok(())
    }

    /// Drops the subsystem and returns to searching.
    pub fn reset(&mut self) -> Result<(), SessionError> {
        self.require_open("reset")?;
        self.subsystem = Subsystem::new();
        self.trace.clear();
        self.status = SessionStatus::Searching;
        self.history.push(Action::Reset);
        Ok(())
    }

    /// Reverts the last action by replaying the rest of the history.
    pub fn undo(&mut self) -> Result<(), SessionError> {
        let mut history = std::mem::take(&mut self.history);
        if history.pop().is_none() {
            return Err(SessionError::EmptyHistory);
        }
        self.replay(history)
    }

    fn replay(&mut self, history: Vec<Action>) -> Result<(), SessionError> {
        self.reset_to_start()?;
        for action in &history {
            self.apply(action)?;
        }
        self.history = history;
        Ok(())
    }

    fn apply(&mut self, action: &Action) -> Result<(), SessionError> {
        match action {
            Action::Search { steps } => {
                let mut config = self.config;
                config.budget.max_steps = *steps;
                config.budget.max_time = None;
                self.search_with(config)?;
            }
            Action::Concretize { nodes } => {
                let fresh: BTreeSet<NodeId> = nodes.iter().copied().collect();
                self.apply_concretize(&fresh)?;
            }
            Action::Reset => {
                self.subsystem = Subsystem::new();
                self.trace.clear();
                self.status = SessionStatus::Searching;
            }
        }
        Ok(())
    }

    /// Concretizes and re-searches until the subsystem has no abstract vertex.
    pub fn auto_refine(&mut self, policy: RefinePolicy) -> Result<SessionStatus, SessionError> {
        if self.status != SessionStatus::Critical {
            return Err(SessionError::NotApplicable {
                action: "auto_refine",
                status: self.status,
            });
        }
        match policy {
            RefinePolicy::ExpandAll => {
                let current = self.expanded();
                let all: Vec<NodeId> = (0..self.hierarchy().len()).filter(|n| !current.contains(n)).collect();
                if all.is_empty() {
                    return Ok(self.status);
                }
                self.concretize(&all)?;
                self.run_search()?;
            }
            RefinePolicy::MassGreedy => {
                while self.status == SessionStatus::Critical {
                    let Some(node) = self.heaviest_abstract_node() else { break };
                    self.concretize(&[node])?;
                    self.run_search()?;
                }
            }
        }
        Ok(self.status)
    }

    fn heaviest_abstract_node(&self) -> Option<NodeId> {
        let view = self.view.as_ref()?;
        let values = self.subsystem.cached_values();
        let mut best: Option<(f64, NodeId)> = None;
        for &v in self.subsystem.vertices() {
            if let ViewVertex::Abstract { node, .. } = view.vertex(v) {
                let mass = values.map_or(0.0, |x| x[v]);
                let better = match best {
                    None => true,
                    Some((m, n)) => mass > m || (mass == m && node < n),
                };
                if better {
                    best = Some((mass, node));
                }
            }
        }
        best.map(|(_, n)| n)
    }

    /// Whether the subsystem has no abstract vertex.
    pub fn is_concrete(&self) -> bool {
        match &self.view {
            Some(view) => self.subsystem.vertices().iter().all(|&v| !view.vertex(v).is_abstract()),
            None => true,
        }
    }

    /// The subsystem as concrete-state edges with view probabilities.
    pub fn subsystem_tra(&self) -> String {
        match &self.view {
            Some(view) => self.subsystem.to_tra(view, self.model.num_states()),
            None => format!("STATES {}\nTRANSITIONS 0\n", self.model.num_states()),
        }
    }

    pub fn export(&self) -> SessionDocument {
        let state = match &self.view {
            Some(view) => SessionState {
                status: self.status,
                expanded: view.expanded().iter().copied().collect(),
                vertices: self.subsystem.vertices().iter().map(|&v| view.vertex(v)).collect(),
                edges: self
                    .subsystem
                    .edges()
                    .iter()
                    .map(|&(u, v)| [view.vertex(u).state(), view.vertex(v).state()])
                    .collect(),
                trace: self.trace.clone(),
            },
            None => SessionState {
                status: self.status,
                expanded: Vec::new(),
                vertices: Vec::new(),
                edges: Vec::new(),
                trace: Vec::new(),
            },
        };
        SessionDocument {
            schema: SESSION_SCHEMA.to_string(),
            model: EmbeddedModel {
                tra: ingest::tra_string(&self.model, IndexBase::Zero),
                lab: ingest::lab_string(&self.model, IndexBase::Zero),
            },
            property: self.prop.clone(),
            config: self.config,
            history: self.history.clone(),
            state,
            report: ingest::Report::from_session(self, ingest::Timing::Fixed),
        }
    }

    /// Rebuilds a session from an exported document by replaying its history,
    /// and checks the result against the recorded state.
    pub fn import(doc: &SessionDocument) -> Result<Self, SessionError> {
        if doc.schema != SESSION_SCHEMA {
            return Err(SessionError::Document(format!("unsupported schema `{}`", doc.schema)));
        }
        let model = ingest::parse_tra_str(&doc.model.tra, IndexBase::Zero)?;
        let model = ingest::parse_lab_str(&doc.model.lab, model, IndexBase::Zero)?;
        let mut session = RefinementSession::create(Arc::new(model), doc.property.clone(), doc.config)?;
        if session.status != SessionStatus::Satisfied {
            session.replay(doc.history.clone())?;
        } else if !doc.history.is_empty() {
            return Err(SessionError::Document("satisfied session with history".into()));
        }
        if session.export().state != doc.state {
            return Err(SessionError::Document("replayed state differs from the recorded state".into()));
        }
        Ok(session)
    }
}

/// Carries a subsystem from `old` to `new`, where `new` additionally expands `fresh`.
fn remap_subsystem(sub: &Subsystem, old: &View, new: &View, hierarchy: &SccHierarchy, fresh: &BTreeSet<NodeId>) -> Subsystem {
    let map = |v: usize| new.index_of_state(old.vertex(v).state()).expect("expansion never hides a vertex");
    let replaced = |v: usize| old.vertex(v).node().filter(|n| fresh.contains(n));
    let g = new.graph();

    let mut members_of: BTreeMap<NodeId, Vec<usize>> = BTreeMap::new();
    let mut region = |node: NodeId| -> Vec<usize> {
        members_of
            .entry(node)
            .or_insert_with(|| {
                hierarchy.nodes()[node]
                    .members
                    .iter()
                    .filter_map(|&s| new.index_of_state(s))
                    .collect()
            })
            .clone()
    };

    let mut vertices = BTreeSet::new();
    let mut edges = BTreeSet::new();
    for &v in sub.vertices() {
        match replaced(v) {
            Some(node) => {
                let r = region(node);
                for &x in &r {
                    vertices.insert(x);
                    for &y in g.row(x).0 {
                        if r.binary_search(&y).is_ok() {
                            edges.insert((x, y));
                        }
                    }
                }
            }
            None => {
                vertices.insert(map(v));
            }
        }
    }
    for &(u, v) in sub.edges() {
        let nv = map(v);
        match replaced(u) {
            Some(node) => {
                for x in region(node) {
                    if g.prob(x, nv) > 0.0 {
                        edges.insert((x, nv));
                    }
                }
            }
            None => {
                edges.insert((map(u), nv));
            }
        }
    }
    Subsystem::from_parts(vertices, edges)
}

/// Versioned session save file.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize, JsonSchema)]
pub struct SessionDocument {
    pub schema: String,
    pub model: EmbeddedModel,
    pub property: ReachabilityProperty,
    pub config: SearchConfig,
    pub history: Vec<Action>,
    pub state: SessionState,
    pub report: ingest::Report,
}

impl SessionDocument {
    pub fn to_json(&self) -> String {
        let mut s = serde_json::to_string_pretty(self).expect("session documents serialize");
        s.push('\n');
        s
    }

    pub fn from_json(text: &str) -> Result<Self, SessionError> {
        serde_json::from_str(text).map_err(|e| SessionError::Document(e.to_string()))
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize, JsonSchema)]
pub struct EmbeddedModel {
    pub tra: String,
    pub lab: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize, JsonSchema)]
pub struct SessionState {
    pub status: SessionStatus,
    pub expanded: Vec<NodeId>,
    pub vertices: Vec<ViewVertex>,
    /// Subsystem edges as concrete `[src, dst]` state pairs.
    pub edges: Vec<[StateId; 2]>,
    pub trace: Vec<f64>,
}
