//! Seeded random benchmark chains.
//!
//! States are laid out as `[interior..., trap?, targets...]`. Every interior
//! state has one forward edge (so every state drains into the absorbing
//! tail) plus further successors that point backwards with probability
//! `scc_bias`, which is what produces nested cycles.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use super::lab::INIT_LABEL;
use crate::model::{Dtmc, StateId};

pub const TARGET_LABEL: &str = "target";

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RandomModelSpec {
    pub num_states: usize,
    pub out_degree: usize,
    pub scc_bias: f64,
    pub target_fraction: f64,
    pub seed: u64,
}

impl Default for RandomModelSpec {
    fn default() -> Self {
        RandomModelSpec {
            num_states: 100,
            out_degree: 3,
            scc_bias: 0.3,
            target_fraction: 0.05,
            seed: 0,
        }
    }
}

#[derive(Debug, Error, Clone, PartialEq)]
pub enum RandomSpecError {
    #[error("num_states must be at least 1")]
    NoStates,
    #[error("out_degree must be at least 1 and below num_states (got {out_degree} for {num_states} states)")]
    OutDegree { out_degree: usize, num_states: usize },
    #[error("scc_bias must lie in [0, 1] (got {0})")]
    SccBias(f64),
    #[error("target_fraction must lie in (0, 1] (got {0})")]
    TargetFraction(f64),
}

impl RandomModelSpec {
    pub fn validate(&self) -> Result<(), RandomSpecError> {
        if self.num_states == 0 {
            return Err(RandomSpecError::NoStates);
        }
        if self.out_degree == 0 || (self.out_degree >= self.num_states && self.num_states != 1) {
            return Err(RandomSpecError::OutDegree {
                out_degree: self.out_degree,
                num_states: self.num_states,
            });
        }
        if !(0.0..=1.0).contains(&self.scc_bias) {
            return Err(RandomSpecError::SccBias(self.scc_bias));
        }
        if !(self.target_fraction > 0.0 && self.target_fraction <= 1.0) {
            return Err(RandomSpecError::TargetFraction(self.target_fraction));
        }
        Ok(())
    }

    pub fn num_targets(&self) -> usize {
        ((self.target_fraction * self.num_states as f64).ceil() as usize).clamp(1, self.num_states)
    }
}

/// Deterministic in `spec.seed`. Targets carry the label `target`, state 0
/// carries `init`.
pub fn generate_random_dtmc(spec: &RandomModelSpec) -> Result<Dtmc, RandomSpecError> {
    spec.validate()?;
    let n = spec.num_states;
    let num_targets = spec.num_targets();
    let trap = usize::from(n - num_targets >= 3);
    let interior = n - num_targets - trap;
    let mut rng = ChaCha8Rng::seed_from_u64(spec.seed);

    let mut rows: Vec<Vec<(StateId, f64)>> = Vec::with_capacity(n);
    for s in 0..interior {
        let mut succ: Vec<StateId> = Vec::with_capacity(spec.out_degree);
        succ.push(rng.random_range(s + 1..n));
        let mut attempts = 0;
        while succ.len() < spec.out_degree && attempts < 4 * spec.out_degree {
            attempts += 1;
            let t = if rng.random_bool(spec.scc_bias) {
                rng.random_range(0..=s)
            } else {
                rng.random_range(s + 1..n)
            };
            if !succ.contains(&t) {
                succ.push(t);
            }
        }
        let weights: Vec<f64> = succ.iter().map(|_| rng.random_range(0.05..1.0)).collect();
        let total: f64 = weights.iter().sum();
        rows.push(succ.into_iter().zip(weights).map(|(t, w)| (t, w / total)).collect());
    }
    for s in interior..n {
        rows.push(vec![(s, 1.0)]);
    }

    Ok(Dtmc::from_rows(0, rows)
        .with_label(TARGET_LABEL, n - num_targets..n)
        .with_label(INIT_LABEL, [0]))
}
