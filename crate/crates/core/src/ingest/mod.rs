//! File formats in and out: `.tra`/`.lab` models, random benchmarks, reports.

mod lab;
mod random;
mod report;
mod tra;

use thiserror::Error;

use crate::model::{ModelError, Violation};

pub use lab::{lab_string, parse_lab, parse_lab_str, write_lab, INIT_LABEL};
pub use random::{generate_random_dtmc, RandomModelSpec, RandomSpecError, TARGET_LABEL};
pub use report::{Report, Timing, REPORT_SCHEMA};
pub use tra::{fmt_exact, parse_prob, parse_tra, parse_tra_str, tra_string, write_tra};

/// Whether state indices in a file start at 0 or 1.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub enum IndexBase {
    #[default]
    Zero,
    One,
}

impl IndexBase {
    pub fn offset(self) -> usize {
        match self {
            IndexBase::Zero => 0,
            IndexBase::One => 1,
        }
    }
}

#[derive(Debug, Error)]
pub enum ParseError {
    #[error("line {line}: {message}")]
    Syntax { line: usize, message: String },
    #[error("line {line}: state {state} out of range (model has {num_states} states)")]
    StateOutOfRange { line: usize, state: usize, num_states: usize },
    #[error("line {line}: duplicate transition {src} -> {dst}")]
    Duplicate { line: usize, src: usize, dst: usize },
    #[error("header declares {declared} transitions, file has {found}")]
    CountMismatch { declared: usize, found: usize },
    #[error("line {line}: label `{label}` was not declared")]
    UndeclaredLabel { line: usize, label: String },
    #[error("`init` labels {0} states, expected one")]
    MultipleInitial(usize),
    #[error("invalid model: {}", join(.0))]
    Invalid(Vec<Violation>),
    #[error(transparent)]
    Model(ModelError),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

fn join(v: &[Violation]) -> String {
    v.iter().map(|x| x.to_string()).collect::<Vec<_>>().join("; ")
}

impl ParseError {
    pub(crate) fn syntax(line: usize, message: String) -> Self {
        ParseError::Syntax { line, message }
    }
}

impl From<ModelError> for ParseError {
    fn from(e: ModelError) -> Self {
        match e {
            ModelError::Invalid(v) => ParseError::Invalid(v),
            other => ParseError::Model(other),
        }
    }
}
