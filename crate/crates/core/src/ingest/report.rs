//! Run reports in `key=value` text and JSON.

use std::fmt::Write as _;

use schemars::JsonSchema;
use serde::{Deserialize, Serialize};

use crate::fmt_prob;
use crate::scc::NodeId;
use crate::search::SearchMethod;
use crate::session::{RefinementSession, SessionStatus};
use crate::subsystem::SubsystemStats;

pub const REPORT_SCHEMA: &str = "cexforge-report/1";

/// Whether wall time is measured or pinned to 0 for reproducible output.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Timing {
    Measured,
    Fixed,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize, JsonSchema)]
pub struct Report {
    pub schema: String,
    pub property: String,
    pub states: usize,
    pub transitions: usize,
    pub model_prob: f64,
    pub violated: bool,
    pub status: SessionStatus,
    pub method: SearchMethod,
    pub hierarchy_nodes: usize,
    pub hierarchy_depth: usize,
    pub expanded: Vec<NodeId>,
    pub view_vertices: usize,
    pub subsystem: Option<SubsystemStats>,
    pub iterations: usize,
    pub wall_time_ms: u64,
    pub trace: Vec<f64>,
}

impl Report {
    pub fn from_session(session: &RefinementSession, timing: Timing) -> Self {
        let model = session.model();
        let (nodes, depth) = session.hierarchy_opt().map_or((0, 0), |h| (h.len(), h.depth()));
        let subsystem = (!session.subsystem().is_empty()).then(|| session.stats());
        Report {
            schema: REPORT_SCHEMA.to_string(),
            property: session.property().to_string(),
            states: model.num_states(),
            transitions: model.num_transitions(),
            model_prob: session.verdict().prob(),
            violated: session.verdict().is_violated(),
            status: session.status(),
            method: session.config().method,
            hierarchy_nodes: nodes,
            hierarchy_depth: depth,
            expanded: session.expanded().into_iter().collect(),
            view_vertices: session.view().map_or(0, |v| v.num_vertices()),
            subsystem,
            iterations: session.last_steps(),
            wall_time_ms: match timing {
                Timing::Measured => session.last_elapsed().as_millis() as u64,
                Timing::Fixed => 0,
            },
            trace: session.trace().to_vec(),
        }
    }

    pub fn verdict_word(&self) -> &'static str {
        if self.violated {
            "VIOLATED"
        } else {
            "HOLDS"
        }
    }

    pub fn to_text(&self) -> String {
        let mut out = String::new();
        let _ = writeln!(out, "property={}", self.property);
        let _ = writeln!(out, "model_states={} model_transitions={}", self.states, self.transitions);
        let _ = writeln!(out, "prob={} verdict={}", fmt_prob(self.model_prob), self.verdict_word());
        if !self.violated {
            let _ = writeln!(out, "property holds, no counterexample");
            return out;
        }
        let _ = writeln!(out, "status={} method={}", self.status, self.method);
        let expanded: Vec<String> = self.expanded.iter().map(|n| n.to_string()).collect();
        let _ = writeln!(
            out,
            "hierarchy_nodes={} hierarchy_depth={} expanded=[{}] view_vertices={}",
            self.hierarchy_nodes,
            self.hierarchy_depth,
            expanded.join(","),
            self.view_vertices
        );
        match &self.subsystem {
            Some(s) => {
                let _ = writeln!(out, "states={} transitions={} prob={}", s.concrete_states, s.transitions, fmt_prob(s.prob));
                let _ = writeln!(out, "vertices={} abstract_vertices={}", s.vertices, s.abstract_vertices);
            }
            None => {
                let _ = writeln!(out, "states=0 transitions=0 prob=0");
            }
        }
        let _ = writeln!(out, "iterations={} wall_time_ms={}", self.iterations, self.wall_time_ms);
        out
    }

    pub fn to_json(&self) -> String {
        let mut s = serde_json::to_string_pretty(self).expect("reports serialize");
        s.push('\n');
        s
    }
}
