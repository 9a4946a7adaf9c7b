//! MRMC-style label files.
//!
//! ```text
//! #DECLARATION
//! init goal
//! #END
//! 0 init
//! 3 goal
//! ```
//!
//! A declared `init` label with exactly one state sets the initial state.

use std::collections::{BTreeMap, BTreeSet};
use std::io::{BufRead, Write};

use super::tra::{state_index, Lines};
use super::{IndexBase, ParseError};
use crate::model::{Dtmc, StateId};

pub const INIT_LABEL: &str = "init";

pub fn parse_lab<R: BufRead>(reader: R, mut model: Dtmc, base: IndexBase) -> Result<Dtmc, ParseError> {
    let mut lines = Lines::raw(reader);
    match lines.next_line()? {
        Some((_, "#DECLARATION")) => {}
        Some((line, _)) => return Err(ParseError::syntax(line, "expected `#DECLARATION`".into())),
        None => return Err(ParseError::syntax(1, "empty label file".into())),
    }
    let mut labels: BTreeMap<String, BTreeSet<StateId>> = BTreeMap::new();
    loop {
        match lines.next_line()? {
            Some((_, "#END")) => break,
            Some((_, text)) => {
                for name in text.split_whitespace() {
                    labels.insert(name.to_string(), BTreeSet::new());
                }
            }
            None => return Err(ParseError::syntax(lines_end(&lines), "missing `#END`".into())),
        }
    }
    let n = model.num_states();
    while let Some((line, tokens)) = lines.next_tokens()? {
        let (state, names) = tokens.split_first().expect("non-empty line");
        let s = state_index(state, line, base, n)?;
        for &name in names {
            labels
                .get_mut(name)
                .ok_or_else(|| ParseError::UndeclaredLabel {
                    line,
                    label: name.to_string(),
                })?
                .insert(s);
        }
    }
    if let Some(init) = labels.get(INIT_LABEL) {
        match init.iter().collect::<Vec<_>>().as_slice() {
            [] => {}
            [s] => model.set_initial(**s),
            _ => return Err(ParseError::MultipleInitial(init.len())),
        }
    }
    model.set_labels(labels);
    Ok(model)
}

fn lines_end<R: BufRead>(lines: &Lines<R>) -> usize {
    lines.line_number() + 1
}

pub fn parse_lab_str(text: &str, model: Dtmc, base: IndexBase) -> Result<Dtmc, ParseError> {
    parse_lab(text.as_bytes(), model, base)
}

/// Writes all labels; adds `init` when the initial state is not 0 and no
/// `init` label exists.
pub fn write_lab<W: Write>(model: &Dtmc, base: IndexBase, mut out: W) -> std::io::Result<()> {
    let mut labels = model.labels().clone();
    if model.initial() != 0 && !labels.contains_key(INIT_LABEL) {
        labels.insert(INIT_LABEL.to_string(), BTreeSet::from([model.initial()]));
    }
    writeln!(out, "#DECLARATION")?;
    writeln!(out, "{}", labels.keys().cloned().collect::<Vec<_>>().join(" "))?;
    writeln!(out, "#END")?;
    let mut per_state: BTreeMap<StateId, Vec<&str>> = BTreeMap::new();
    for (name, states) in &labels {
        for &s in states {
            per_state.entry(s).or_default().push(name);
        }
    }
    for (s, names) in per_state {
        writeln!(out, "{} {}", s + base.offset(), names.join(" "))?;
    }
    Ok(())
}

pub fn lab_string(model: &Dtmc, base: IndexBase) -> String {
    let mut buf = Vec::new();
    write_lab(model, base, &mut buf).expect("writing to memory");
    String::from_utf8(buf).expect("label names are utf-8")
}
