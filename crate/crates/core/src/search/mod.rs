//! Heuristics that grow a critical subsystem inside a view.
//!
//! *Global* search adds initial-to-target walks in order of decreasing
//! probability. *Local* search seeds with the most probable walk and then
//! repeatedly adds the most probable fragment connecting the subsystem back
//! to itself (or to a target). Both recompute the subsystem probability
//! after every addition and stop as soon as it breaks the bound.

mod fragment;
mod paths;

pub use fragment::{best_fragment, Fragment};
pub use paths::{best_completion, PathEnumerator, Walk, MIN_WALK_PROB, TIE_TOLERANCE};

use std::fmt;
use std::time::{Duration, Instant};

use schemars::JsonSchema;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::model::ReachabilityProperty;
use crate::reachability::{solve_reachability_with, SolveConfig, SolveError};
use crate::scc::View;
use crate::subsystem::{EdgeMode, Subsystem, SubsystemError};

pub const DEFAULT_MAX_STEPS: usize = 100_000;

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize, JsonSchema)]
#[serde(rename_all = "snake_case")]
pub enum SearchMethod {
    #[default]
    Global,
    Local,
}

impl fmt::Display for SearchMethod {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            SearchMethod::Global => "global",
            SearchMethod::Local => "local",
        })
    }
}

/// Limits on a single search run.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, JsonSchema)]
pub struct Budget {
    /// Walks (global) or seed plus fragments (local).
    pub max_steps: usize,
    #[serde(default, with = "opt_millis")]
    #[schemars(with = "Option<u64>")]
    pub max_time: Option<Duration>,
}

impl Default for Budget {
    fn default() -> Self {
        Budget {
            max_steps: DEFAULT_MAX_STEPS,
            max_time: None,
        }
    }
}

mod opt_millis {
    use serde::{Deserialize, Deserializer, Serializer};
    use std::time::Duration;

    pub fn serialize<S: Serializer>(d: &Option<Duration>, s: S) -> Result<S::Ok, S::Error> {
        match d {
            Some(d) => s.serialize_some(&(d.as_millis() as u64)),
            None => s.serialize_none(),
        }
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> Result<Option<Duration>, D::Error> {
        Ok(Option::<u64>::deserialize(d)?.map(Duration::from_millis))
    }
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize, JsonSchema)]
pub struct SearchConfig {
    pub method: SearchMethod,
    pub budget: Budget,
    pub edge_mode: EdgeMode,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SearchOutcome {
    Critical,
    BudgetExhausted,
    /// Nothing left to add but the subsystem is still not critical.
    NoProgress,
}

#[derive(Debug, Clone)]
pub struct SearchResult {
    pub subsystem: Subsystem,
    /// Subsystem probability after each step.
    pub trace: Vec<f64>,
    pub steps: usize,
    pub outcome: SearchOutcome,
    pub elapsed: Duration,
}

impl SearchResult {
    pub fn prob(&self) -> f64 {
        self.trace.last().copied().unwrap_or(0.0)
    }
}

#[derive(Debug, Error, Clone, PartialEq)]
pub enum SearchError {
    #[error("property holds on the view (probability {0}); nothing to search")]
    NotViolated(f64),
    #[error(transparent)]
    Subsystem(#[from] SubsystemError),
    #[error(transparent)]
    Solve(#[from] SolveError),
}

fn ensure_violated(view: &View, targets: &[bool], prop: &ReachabilityProperty) -> Result<(), SearchError> {
    let pv = solve_reachability_with(view.graph(), targets, &SolveConfig::default())?;
    let prob = pv.values[view.initial()];
    if prop.is_violated_by(prob) {
        Ok(())
    } else {
        Err(SearchError::NotViolated(prob))
    }
}

pub fn global_search(view: &View, prop: &ReachabilityProperty, config: &SearchConfig) -> Result<SearchResult, SearchError> {
    let targets = view.label_mask(&prop.target_label);
    ensure_violated(view, &targets, prop)?;
    run_global(view, &targets, prop, config)
}

pub fn local_search(view: &View, prop: &ReachabilityProperty, config: &SearchConfig) -> Result<SearchResult, SearchError> {
    let targets = view.label_mask(&prop.target_label);
    ensure_violated(view, &targets, prop)?;
    run_local(view, &targets, prop, config)
}

/// Runs the configured method without re-checking the view's verdict.
pub(crate) fn run(view: &View, targets: &[bool], prop: &ReachabilityProperty, config: &SearchConfig) -> Result<SearchResult, SearchError> {
    match config.method {
        SearchMethod::Global => run_global(view, targets, prop, config),
        SearchMethod::Local => run_local(view, targets, prop, config),
    }
}

struct Progress<'a> {
    view: &'a View,
    targets: &'a [bool],
    prop: &'a ReachabilityProperty,
    config: &'a SearchConfig,
    started: Instant,
    subsystem: Subsystem,
    trace: Vec<f64>,
}

impl<'a> Progress<'a> {
    fn new(view: &'a View, targets: &'a [bool], prop: &'a ReachabilityProperty, config: &'a SearchConfig) -> Self {
        Progress {
            view,
            targets,
            prop,
            config,
            started: Instant::now(),
            subsystem: Subsystem::new(),
            trace: Vec::new(),
        }
    }

    /// Adds a walk and reports whether the subsystem became critical.
    fn add(&mut self, vertices: &[usize]) -> Result<bool, SearchError> {
        self.subsystem.add_walk(vertices);
        if self.config.edge_mode == EdgeMode::StateClosure {
            self.subsystem.close_states(self.view);
        }
        let p = self.subsystem.probability(self.view, self.targets)?;
        self.trace.push(p);
        Ok(self.prop.is_violated_by(p))
    }

    fn out_of_budget(&self) -> bool {
        self.trace.len() >= self.config.budget.max_steps
            || self.config.budget.max_time.is_some_and(|t| self.started.elapsed() >= t)
    }

    fn finish(self, outcome: SearchOutcome) -> SearchResult {
        SearchResult {
            steps: self.trace.len(),
            subsystem: self.subsystem,
            trace: self.trace,
            outcome,
            elapsed: self.started.elapsed(),
        }
    }
}

fn run_global(view: &View, targets: &[bool], prop: &ReachabilityProperty, config: &SearchConfig) -> Result<SearchResult, SearchError> {
    let mut progress = Progress::new(view, targets, prop, config);
    let mut walks = PathEnumerator::new(view.graph(), view.initial(), targets);
    loop {
        if progress.out_of_budget() {
            return Ok(progress.finish(SearchOutcome::BudgetExhausted));
        }
        let Some(walk) = walks.next() else {
            return Ok(progress.finish(SearchOutcome::NoProgress));
        };
        if progress.add(&walk.vertices)? {
            return Ok(progress.finish(SearchOutcome::Critical));
        }
    }
}

fn run_local(view: &View, targets: &[bool], prop: &ReachabilityProperty, config: &SearchConfig) -> Result<SearchResult, SearchError> {
    let mut progress = Progress::new(view, targets, prop, config);
    let mut walks = PathEnumerator::new(view.graph(), view.initial(), targets);
    if progress.out_of_budget() {
        return Ok(progress.finish(SearchOutcome::BudgetExhausted));
    }
    let Some(seed) = walks.next() else {
        return Ok(progress.finish(SearchOutcome::NoProgress));
    };
    if progress.add(&seed.vertices)? {
        return Ok(progress.finish(SearchOutcome::Critical));
    }
    let completion = walks.completion().to_vec();
    drop(walks);
    loop {
        if progress.out_of_budget() {
            return Ok(progress.finish(SearchOutcome::BudgetExhausted));
        }
        let Some(frag) = fragment::best_fragment_with(view.graph(), &progress.subsystem, targets, &completion) else {
            return Ok(progress.finish(SearchOutcome::NoProgress));
        };
        if progress.add(&frag.vertices)? {
            return Ok(progress.finish(SearchOutcome::Critical));
        }
    }
}
