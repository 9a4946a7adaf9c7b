//! Unbounded reachability: qualitative Prob0/Prob1 precomputation followed
//! by a Gauss–Seidel solve over the remaining states.

use std::collections::{BTreeSet, VecDeque};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::model::{Dtmc, ModelError, ReachabilityProperty, StateId};
use crate::solver::{SolveOptions, SparseSystem};

pub const DEFAULT_TOLERANCE: f64 = 1e-10;
pub const DEFAULT_MAX_ITER: usize = 1_000_000;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum SolveError {
    #[error("no convergence after {iterations} sweeps (residual {residual:e})")]
    NotConverged {
        best: Vec<f64>,
        residual: f64,
        iterations: usize,
    },
}

#[derive(Debug, Error, Clone, PartialEq)]
pub enum CheckError {
    #[error(transparent)]
    Model(#[from] ModelError),
    #[error(transparent)]
    Solve(#[from] SolveError),
}

/// Per-state reachability probabilities.
#[derive(Debug, Clone, PartialEq)]
pub struct ProbVector {
    pub values: Vec<f64>,
    pub residual: f64,
    pub iterations: usize,
}

#[derive(Debug, Clone)]
pub struct SolveConfig<'a> {
    pub tol: f64,
    pub max_iter: usize,
    /// Starting iterate, indexed by state.
    pub warm_start: Option<&'a [f64]>,
    /// Treat `warm_start` as a lower bound and never decrease below it.
    pub monotone: bool,
}

impl Default for SolveConfig<'_> {
    fn default() -> Self {
        SolveConfig {
            tol: DEFAULT_TOLERANCE,
            max_iter: DEFAULT_MAX_ITER,
            warm_start: None,
            monotone: false,
        }
    }
}

impl SolveConfig<'_> {
    pub fn with_tol(tol: f64) -> Self {
        SolveConfig {
            tol,
            ..Default::default()
        }
    }
}

/// Prob0 and Prob1 as membership masks.
pub(crate) fn prob01_masks(model: &Dtmc, targets: &[bool]) -> (Vec<bool>, Vec<bool>) {
    let n = model.num_states();
    let pred = model.predecessors();

    // States with a path to the targets.
    let mut reach = targets.to_vec();
    let mut queue: VecDeque<StateId> = (0..n).filter(|&s| targets[s]).collect();
    while let Some(t) = queue.pop_front() {
        for &p in pred.of(t) {
            if !reach[p] {
                reach[p] = true;
                queue.push_back(p);
            }
        }
    }
    let prob0: Vec<bool> = reach.iter().map(|r| !r).collect();

    // States that can reach Prob0 while avoiding the targets.
    let mut escape = prob0.clone();
    let mut queue: VecDeque<StateId> = (0..n).filter(|&s| prob0[s]).collect();
    while let Some(t) = queue.pop_front() {
        for &p in pred.of(t) {
            if !escape[p] && !targets[p] {
                escape[p] = true;
                queue.push_back(p);
            }
        }
    }
    let prob1: Vec<bool> = escape.iter().map(|e| !e).collect();
    (prob0, prob1)
}

/// States reaching the targets with probability 0 and with probability 1.
pub fn compute_prob01(model: &Dtmc, targets: &BTreeSet<StateId>) -> (BTreeSet<StateId>, BTreeSet<StateId>) {
    let (p0, p1) = prob01_masks(model, &model.mask(targets));
    let collect = |m: Vec<bool>| m.iter().enumerate().filter(|(_, &b)| b).map(|(i, _)| i).collect();
    (collect(p0), collect(p1))
}

pub fn solve_reachability(
    model: &Dtmc,
    targets: &BTreeSet<StateId>,
    tol: f64,
    max_iter: usize,
) -> Result<ProbVector, SolveError> {
    solve_reachability_with(
        model,
        &model.mask(targets),
        &SolveConfig {
            tol,
            max_iter,
            ..Default::default()
        },
    )
}

/// Full-control variant over a target mask.
pub fn solve_reachability_with(model: &Dtmc, targets: &[bool], config: &SolveConfig<'_>) -> Result<ProbVector, SolveError> {
    let n = model.num_states();
    let (prob0, prob1) = prob01_masks(model, targets);

    let mut local = vec![usize::MAX; n];
    let mut unknown = Vec::new();
    for s in 0..n {
        if !prob0[s] && !prob1[s] {
            local[s] = unknown.len();
            unknown.push(s);
        }
    }

    let mut values: Vec<f64> = (0..n).map(|s| if prob1[s] { 1.0 } else { 0.0 }).collect();
    if unknown.is_empty() {
        return Ok(ProbVector {
            values,
            residual: 0.0,
            iterations: 0,
        });
    }

    let mut sys = SparseSystem::with_capacity(unknown.len(), unknown.len() * 4);
    for &s in &unknown {
        let mut rhs = 0.0;
        let mut entries = Vec::new();
        for (t, p) in model.row_iter(s) {
            if prob1[t] {
                rhs += p;
            } else if !prob0[t] {
                entries.push((local[t], p));
            }
        }
        sys.push_row(entries, rhs);
    }
    let start = config
        .warm_start
        .map(|w| unknown.iter().map(|&s| w[s].clamp(0.0, 1.0)).collect());
    let opts = SolveOptions {
        tol: config.tol,
        max_iter: config.max_iter,
        monotone: config.monotone && config.warm_start.is_some(),
        relative: false,
    };
    match sys.solve(start, opts) {
        Ok(solved) => {
            for (k, &s) in unknown.iter().enumerate() {
                values[s] = solved.values[k].clamp(0.0, 1.0);
            }
            Ok(ProbVector {
                values,
                residual: solved.residual,
                iterations: solved.iterations,
            })
        }
        Err(partial) => {
            for (k, &s) in unknown.iter().enumerate() {
                values[s] = partial.values[k];
            }
            Err(SolveError::NotConverged {
                best: values,
                residual: partial.residual,
                iterations: partial.iterations,
            })
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "verdict", content = "prob", rename_all = "snake_case")]
pub enum Verdict {
    Holds(f64),
    Violated(f64),
}

impl Verdict {
    pub fn prob(self) -> f64 {
        match self {
            Verdict::Holds(p) | Verdict::Violated(p) => p,
        }
    }

    pub fn is_violated(self) -> bool {
        matches!(self, Verdict::Violated(_))
    }
}

pub fn check_property(model: &Dtmc, prop: &ReachabilityProperty) -> Result<Verdict, CheckError> {
    let targets = model.target_states(prop)?;
    let pv = solve_reachability_with(model, &model.mask(&targets), &SolveConfig::default())?;
    let prob = pv.values[model.initial()];
    Ok(if prop.is_violated_by(prob) {
        Verdict::Violated(prob)
    } else {
        Verdict::Holds(prob)
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::fixtures::{d1, d2};

    fn set(v: &[usize]) -> BTreeSet<usize> {
        v.iter().copied().collect()
    }

    #[test]
    fn prob01_examples() {
        assert_eq!(compute_prob01(&d1(), &set(&[3])), (set(&[2]), set(&[3])));
        assert_eq!(compute_prob01(&d2(), &set(&[4])), (set(&[3]), set(&[2, 4])));
        let all = set(&[0, 1, 2, 3]);
        assert_eq!(compute_prob01(&d1(), &all), (set(&[]), all));
    }

    #[test]
    fn solve_examples() {
        let pv = solve_reachability(&d1(), &set(&[3]), DEFAULT_TOLERANCE, DEFAULT_MAX_ITER).unwrap();
        assert!((pv.values[0] - 1.0 / 3.0).abs() < 1e-8);
        assert!((pv.values[1] - 2.0 / 3.0).abs() < 1e-8);
        assert_eq!(pv.values[2], 0.0);
        assert_eq!(pv.values[3], 1.0);

        let pv = solve_reachability(&d2(), &set(&[4]), DEFAULT_TOLERANCE, DEFAULT_MAX_ITER).unwrap();
        assert!((pv.values[0] - 0.7).abs() < 1e-12);
        assert!((pv.values[1] - 0.5).abs() < 1e-12);
        assert_eq!(pv.values[2], 1.0);
        assert_eq!(pv.iterations, 1);

        let pv = solve_reachability(&d2(), &set(&[0, 1, 2, 3, 4]), DEFAULT_TOLERANCE, DEFAULT_MAX_ITER).unwrap();
        assert!(pv.values.iter().all(|&v| v == 1.0));
    }

    #[test]
    fn check_examples() {
        let v = check_property(&d1(), &ReachabilityProperty::at_most(0.25, "goal")).unwrap();
        assert!(matches!(v, Verdict::Violated(p) if (p - 1.0 / 3.0).abs() < 1e-8));
        let v = check_property(&d1(), &ReachabilityProperty::at_most(0.5, "goal")).unwrap();
        assert!(matches!(v, Verdict::Holds(_)));
        let v = check_property(&d2(), &ReachabilityProperty::below(0.7, "b")).unwrap();
        assert!(matches!(v, Verdict::Violated(p) if (p - 0.7).abs() < 1e-12));
        assert!(matches!(
            check_property(&d2(), &ReachabilityProperty::below(0.7, "zzz")),
            Err(CheckError::Model(ModelError::LabelNotFound(_)))
        ));
    }

    #[test]
    fn non_convergence_carries_best_iterate() {
        let m = Dtmc::from_rows(
            0,
            vec![
                vec![(1, 0.999), (2, 0.001)],
                vec![(0, 0.999), (3, 0.001)],
                vec![(2, 1.0)],
                vec![(3, 1.0)],
            ],
        );
        let err = solve_reachability(&m, &set(&[3]), 1e-14, 2).unwrap_err();
        let SolveError::NotConverged { best, residual, iterations } = err;
        assert_eq!(best.len(), 4);
        assert_eq!(iterations, 2);
        assert!(residual > 1e-14);
    }
}
