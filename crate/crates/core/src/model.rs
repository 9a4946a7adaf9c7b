//! Immutable DTMC data model: compressed sparse rows, labels and
//! upper-bounded reachability properties.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt;

use schemars::JsonSchema;
use serde::{Deserialize, Serialize};
use thiserror::Error;

/// Dense state index in `[0, num_states)`.
pub type StateId = usize;

/// Maximum allowed deviation of a row sum from 1.
pub const ROW_SUM_TOLERANCE: f64 = 1e-9;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum ModelError {
    #[error("label `{0}` not found")]
    LabelNotFound(String),
    #[error("state {state} out of range (model has {num_states} states)")]
    StateOutOfRange { state: StateId, num_states: usize },
    #[error("invalid model: {}", join_violations(.0))]
    Invalid(Vec<Violation>),
}

fn join_violations(v: &[Violation]) -> String {
    v.iter().map(ToString::to_string).collect::<Vec<_>>().join("; ")
}

/// One failed structural rule found by [`Dtmc::validate`].
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "rule", rename_all = "snake_case")]
pub enum Violation {
    RowSum { state: StateId, sum: f64 },
    DuplicateTransition { state: StateId, target: StateId },
    NonPositive { state: StateId, target: StateId, prob: f64 },
    TargetOutOfRange { state: StateId, target: StateId },
    InitialOutOfRange { initial: StateId },
    LabelStateOutOfRange { label: String, state: StateId },
}

impl fmt::Display for Violation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Violation::RowSum { state, sum } => {
                write!(f, "row {state} sums to {}", crate::fmt_prob(*sum))
            }
            Violation::DuplicateTransition { state, target } => {
                write!(f, "row {state} has duplicate transition to {target}")
            }
            Violation::NonPositive { state, target, prob } => {
                write!(f, "row {state} has non-positive probability {prob} to {target}")
            }
            Violation::TargetOutOfRange { state, target } => {
                write!(f, "row {state} targets out-of-range state {target}")
            }
            Violation::InitialOutOfRange { initial } => {
                write!(f, "initial state {initial} out of range")
            }
            Violation::LabelStateOutOfRange { label, state } => {
                write!(f, "label `{label}` names out-of-range state {state}")
            }
        }
    }
}

/// A discrete-time Markov chain stored as compressed sparse rows.
///
/// Rows are sorted by target index. Construction through [`Dtmc::from_rows`]
/// does not reject malformed input; call [`Dtmc::validate`] (or use
/// [`Dtmc::try_from_rows`]) to enforce the row-stochastic invariants.
#[derive(Debug, Clone, PartialEq)]
pub struct Dtmc {
    initial: StateId,
    row_offsets: Vec<usize>,
    targets: Vec<StateId>,
    probs: Vec<f64>,
    labels: BTreeMap<String, BTreeSet<StateId>>,
}

impl Dtmc {
    pub fn from_rows(initial: StateId, rows: Vec<Vec<(StateId, f64)>>) -> Self {
        let mut row_offsets = Vec::with_capacity(rows.len() + 1);
        let nnz = rows.iter().map(Vec::len).sum();
        let mut targets = Vec::with_capacity(nnz);
        let mut probs = Vec::with_capacity(nnz);
        row_offsets.push(0);
        for mut row in rows {
            row.sort_by_key(|&(t, _)| t);
            for (t, p) in row {
                targets.push(t);
                probs.push(p);
            }
            row_offsets.push(targets.len());
        }
        Dtmc {
            initial,
            row_offsets,
            targets,
            probs,
            labels: BTreeMap::new(),
        }
    }

    /// Builds from `(src, dst, prob)` triples. Triples may come in any order.
    pub fn from_triples(num_states: usize, initial: StateId, mut triples: Vec<(StateId, StateId, f64)>) -> Self {
        triples.sort_by_key(|t| (t.0, t.1));
        let mut row_offsets = vec![0usize; num_states + 1];
        for &(s, _, _) in &triples {
            if s < num_states {
                row_offsets[s + 1] += 1;
            }
        }
        for i in 0..num_states {
            row_offsets[i + 1] += row_offsets[i];
        }
        let (targets, probs) = triples
            .into_iter()
            .filter(|&(s, _, _)| s < num_states)
            .map(|(_, t, p)| (t, p))
            .unzip();
        Dtmc {
            initial,
            row_offsets,
            targets,
            probs,
            labels: BTreeMap::new(),
        }
    }

    pub fn try_from_rows(initial: StateId, rows: Vec<Vec<(StateId, f64)>>) -> Result<Self, ModelError> {
        Dtmc::from_rows(initial, rows).validated()
    }

    /// Returns `self` if it passes validation.
    pub fn validated(self) -> Result<Self, ModelError> {
        let report = self.validate();
        if report.is_empty() {
            Ok(self)
        } else {
            Err(ModelError::Invalid(report))
        }
    }

    pub fn with_label<I: IntoIterator<Item = StateId>>(mut self, name: &str, states: I) -> Self {
        self.labels.entry(name.to_string()).or_default().extend(states);
        self
    }

    pub fn set_labels(&mut self, labels: BTreeMap<String, BTreeSet<StateId>>) {
        self.labels = labels;
    }

    pub fn set_initial(&mut self, initial: StateId) {
        self.initial = initial;
    }

    pub fn num_states(&self) -> usize {
        self.row_offsets.len() - 1
    }

    pub fn num_transitions(&self) -> usize {
        self.targets.len()
    }

    pub fn initial(&self) -> StateId {
        self.initial
    }

    pub fn labels(&self) -> &BTreeMap<String, BTreeSet<StateId>> {
        &self.labels
    }

    pub fn label(&self, name: &str) -> Option<&BTreeSet<StateId>> {
        self.labels.get(name)
    }

    /// Labels carried by state `s`, in name order.
    pub fn labels_of(&self, s: StateId) -> Vec<&str> {
        self.labels
            .iter()
            .filter(|(_, set)| set.contains(&s))
            .map(|(name, _)| name.as_str())
            .collect()
    }

    /// The row of `s` as parallel target/probability slices. Panics if `s`
    /// is out of range; use [`Dtmc::successors`] for a checked variant.
    #[inline]
    pub fn row(&self, s: StateId) -> (&[StateId], &[f64]) {
        let (lo, hi) = (self.row_offsets[s], self.row_offsets[s + 1]);
        (&self.targets[lo..hi], &self.probs[lo..hi])
    }

    #[inline]
    pub fn row_iter(&self, s: StateId) -> impl Iterator<Item = (StateId, f64)> + '_ {
        let (t, p) = self.row(s);
        t.iter().copied().zip(p.iter().copied())
    }

    pub fn successors(&self, s: StateId) -> Result<Vec<(StateId, f64)>, ModelError> {
        if s >= self.num_states() {
            return Err(ModelError::StateOutOfRange {
                state: s,
                num_states: self.num_states(),
            });
        }
        Ok(self.row_iter(s).collect())
    }

    /// Probability of the transition `s -> t`, zero if absent.
    pub fn prob(&self, s: StateId, t: StateId) -> f64 {
        let (targets, probs) = self.row(s);
        match targets.binary_search(&t) {
            Ok(i) => probs[i],
            Err(_) => 0.0,
        }
    }

    /// All transitions as `(src, dst, prob)` in row order.
    pub fn transitions(&self) -> impl Iterator<Item = (StateId, StateId, f64)> + '_ {
        (0..self.num_states()).flat_map(move |s| self.row_iter(s).map(move |(t, p)| (s, t, p)))
    }

    /// A state is absorbing when its only transition is a self-loop of probability 1.
    pub fn is_absorbing(&self, s: StateId) -> bool {
        let (t, p) = self.row(s);
        t.len() == 1 && t[0] == s && p[0] == 1.0
    }

    /// Predecessor lists in CSR form: `(offsets, sources)`.
    pub fn predecessors(&self) -> Predecessors {
        let n = self.num_states();
        let mut offsets = vec![0usize; n + 1];
        for &t in &self.targets {
            if t < n {
                offsets[t + 1] += 1;
            }
        }
        for i in 0..n {
            offsets[i + 1] += offsets[i];
        }
        let mut fill = offsets.clone();
        let mut sources = vec![0; offsets[n]];
        for s in 0..n {
            for &t in self.row(s).0 {
                if t < n {
                    sources[fill[t]] = s;
                    fill[t] += 1;
                }
            }
        }
        Predecessors { offsets, sources }
    }

    /// Checks every structural invariant and reports all failures.
    pub fn validate(&self) -> Vec<Violation> {
        let n = self.num_states();
        let mut out = Vec::new();
        if self.initial >= n {
            out.push(Violation::InitialOutOfRange { initial: self.initial });
        }
        for s in 0..n {
            let (targets, probs) = self.row(s);
            let mut sum = 0.0;
            for (i, (&t, &p)) in targets.iter().zip(probs).enumerate() {
                if t >= n {
                    out.push(Violation::TargetOutOfRange { state: s, target: t });
                }
                if i > 0 && targets[i - 1] == t {
                    out.push(Violation::DuplicateTransition { state: s, target: t });
                }
                if !(p > 0.0 && p <= 1.0) {
                    out.push(Violation::NonPositive { state: s, target: t, prob: p });
                }
                sum += p;
            }
            if sum.is_nan() || (sum - 1.0).abs() > ROW_SUM_TOLERANCE {
                out.push(Violation::RowSum { state: s, sum });
            }
        }
        for (name, states) in &self.labels {
            for &s in states.range(n..) {
                out.push(Violation::LabelStateOutOfRange {
                    label: name.clone(),
                    state: s,
                });
            }
        }
        out
    }

    pub fn target_states(&self, prop: &ReachabilityProperty) -> Result<BTreeSet<StateId>, ModelError> {
        self.labels
            .get(&prop.target_label)
            .cloned()
            .ok_or_else(|| ModelError::LabelNotFound(prop.target_label.clone()))
    }

    /// Membership mask for `states`, out-of-range entries ignored.
    pub fn mask(&self, states: &BTreeSet<StateId>) -> Vec<bool> {
        let mut m = vec![false; self.num_states()];
        for &s in states.range(..self.num_states()) {
            m[s] = true;
        }
        m
    }
}

/// Reverse adjacency of a [`Dtmc`].
#[derive(Debug, Clone)]
pub struct Predecessors {
    offsets: Vec<usize>,
    sources: Vec<StateId>,
}

impl Predecessors {
    #[inline]
    pub fn of(&self, t: StateId) -> &[StateId] {
        &self.sources[self.offsets[t]..self.offsets[t + 1]]
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize, JsonSchema)]
#[serde(rename_all = "snake_case")]
pub enum Comparison {
    #[serde(alias = "le")]
    LessEq,
    #[serde(alias = "lt")]
    Less,
}

impl Comparison {
    /// Whether `prob` breaks the bound `threshold` under this comparison.
    pub fn violated_by(self, prob: f64, threshold: f64) -> bool {
        match self {
            Comparison::LessEq => prob > threshold,
            Comparison::Less => prob >= threshold,
        }
    }

    pub fn symbol(self) -> &'static str {
        match self {
            Comparison::LessEq => "<=",
            Comparison::Less => "<",
        }
    }

    pub fn short(self) -> &'static str {
        match self {
            Comparison::LessEq => "le",
            Comparison::Less => "lt",
        }
    }
}

/// `P ⋈ λ (F target)` with `⋈ ∈ {<=, <}`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize, JsonSchema)]
pub struct ReachabilityProperty {
    pub comparison: Comparison,
    pub threshold: f64,
    pub target_label: String,
}

impl ReachabilityProperty {
    pub fn new(comparison: Comparison, threshold: f64, target_label: impl Into<String>) -> Self {
        ReachabilityProperty {
            comparison,
            threshold,
            target_label: target_label.into(),
        }
    }

    pub fn at_most(threshold: f64, target_label: impl Into<String>) -> Self {
        Self::new(Comparison::LessEq, threshold, target_label)
    }

    pub fn below(threshold: f64, target_label: impl Into<String>) -> Self {
        Self::new(Comparison::Less, threshold, target_label)
    }

    pub fn is_violated_by(&self, prob: f64) -> bool {
        self.comparison.violated_by(prob, self.threshold)
    }
}

impl fmt::Display for ReachabilityProperty {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(
            f,
            "P{}{} [F \"{}\"]",
            self.comparison.symbol(),
            self.threshold,
            self.target_label
        )
    }
}
