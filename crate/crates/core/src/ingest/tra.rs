//! Explicit transition files.
//!
//! ```text
//! STATES 4
//! TRANSITIONS 6
//! 0 1 0.5      # src dst prob
//! ...
//! ```
//!
//! Indices are 0-based unless [`IndexBase::One`] (MRMC style) is selected.
//! Probabilities may be decimal, scientific or `p/q` rationals.

use std::io::{BufRead, Write};

use super::{IndexBase, ParseError};
use crate::model::{Dtmc, StateId};

pub fn parse_tra<R: BufRead>(reader: R, base: IndexBase) -> Result<Dtmc, ParseError> {
    let mut lines = Lines::new(reader);
    let num_states = lines.header("STATES")?;
    let declared = lines.header("TRANSITIONS")?;

    let mut triples: Vec<(StateId, StateId, f64)> = Vec::with_capacity(declared.min(1 << 24));
    let mut line_of: Vec<usize> = Vec::with_capacity(declared.min(1 << 24));
    while let Some((line, tokens)) = lines.next_tokens()? {
        let [src, dst, prob] = tokens.as_slice() else {
            return Err(ParseError::syntax(line, format!("expected `<src> <dst> <prob>`, got {} fields", tokens.len())));
        };
        let src = state_index(src, line, base, num_states)?;
        let dst = state_index(dst, line, base, num_states)?;
        let prob = parse_prob(prob).ok_or_else(|| ParseError::syntax(line, format!("invalid probability `{prob}`")))?;
        triples.push((src, dst, prob));
        line_of.push(line);
    }
    if triples.len() != declared {
        return Err(ParseError::CountMismatch {
            declared,
            found: triples.len(),
        });
    }

    let mut order: Vec<usize> = (0..triples.len()).collect();
    order.sort_by_key(|&k| (triples[k].0, triples[k].1, line_of[k]));
    for w in order.windows(2) {
        let (a, b) = (triples[w[0]], triples[w[1]]);
        if (a.0, a.1) == (b.0, b.1) {
            return Err(ParseError::Duplicate {
                line: line_of[w[1]],
                src: a.0,
                dst: a.1,
            });
        }
    }
    Dtmc::from_triples(num_states, 0, triples).validated().map_err(ParseError::from)
}

pub fn parse_tra_str(text: &str, base: IndexBase) -> Result<Dtmc, ParseError> {
    parse_tra(text.as_bytes(), base)
}

pub fn write_tra<W: Write>(model: &Dtmc, base: IndexBase, mut out: W) -> std::io::Result<()> {
    let off = base.offset();
    writeln!(out, "STATES {}", model.num_states())?;
    writeln!(out, "TRANSITIONS {}", model.num_transitions())?;
    for (s, t, p) in model.transitions() {
        writeln!(out, "{} {} {}", s + off, t + off, fmt_exact(p))?;
    }
    Ok(())
}

pub fn tra_string(model: &Dtmc, base: IndexBase) -> String {
    let mut buf = Vec::new();
    write_tra(model, base, &mut buf).expect("writing to memory");
    String::from_utf8(buf).expect("ascii output")
}

/// Shortest decimal that parses back to exactly `p`.
pub fn fmt_exact(p: f64) -> String {
    if p != 0.0 && p.abs() < 1e-5 {
        format!("{p:e}")
    } else {
        format!("{p}")
    }
}

/// Decimal, scientific, or `p/q`.
pub fn parse_prob(token: &str) -> Option<f64> {
    let v = match token.split_once('/') {
        Some((num, den)) => {
            let (num, den): (f64, f64) = (num.trim().parse().ok()?, den.trim().parse().ok()?);
            if den == 0.0 {
                return None;
            }
            num / den
        }
        None => token.parse().ok()?,
    };
    v.is_finite().then_some(v)
}

pub(super) fn state_index(token: &str, line: usize, base: IndexBase, num_states: usize) -> Result<StateId, ParseError> {
    let raw: usize = token
        .parse()
        .map_err(|_| ParseError::syntax(line, format!("invalid state index `{token}`")))?;
    let s = raw
        .checked_sub(base.offset())
        .ok_or_else(|| ParseError::syntax(line, "state index 0 in a 1-based file".to_string()))?;
    if s >= num_states {
        return Err(ParseError::StateOutOfRange {
            line,
            state: raw,
            num_states,
        });
    }
    Ok(s)
}

/// Line reader that strips `#` comments and blank lines and tracks line numbers.
pub(super) struct Lines<R> {
    reader: R,
    buf: String,
    line: usize,
    strip_comments: bool,
}

impl<R: BufRead> Lines<R> {
    pub fn new(reader: R) -> Self {
        Lines {
            reader,
            buf: String::new(),
            line: 0,
            strip_comments: true,
        }
    }

    pub fn raw(reader: R) -> Self {
        Lines {
            strip_comments: false,
            ..Lines::new(reader)
        }
    }

    pub fn line_number(&self) -> usize {
        self.line
    }

    /// Next non-empty line, trimmed, with its 1-based number.
    pub fn next_line(&mut self) -> Result<Option<(usize, &str)>, ParseError> {
        loop {
            self.buf.clear();
            if self.reader.read_line(&mut self.buf)? == 0 {
                return Ok(None);
            }
            self.line += 1;
            let mut text = self.buf.as_str();
            if self.strip_comments {
                if let Some(i) = text.find('#') {
                    text = &text[..i];
                }
            }
            let text = text.trim();
            if !text.is_empty() {
                // Re-borrow to satisfy the loop.
                let (start, len) = (text.as_ptr() as usize - self.buf.as_ptr() as usize, text.len());
                return Ok(Some((self.line, &self.buf[start..start + len])));
            }
        }
    }

    pub fn next_tokens(&mut self) -> Result<Option<(usize, Vec<&str>)>, ParseError> {
        Ok(self
            .next_line()?
            .map(|(line, text)| (line, text.split_whitespace().collect())))
    }

    fn header(&mut self, keyword: &str) -> Result<usize, ParseError> {
        let Some((line, tokens)) = self.next_tokens()? else {
            return Err(ParseError::syntax(self.line + 1, format!("missing `{keyword}` header")));
        };
        match tokens.as_slice() {
            [k, v] if k.eq_ignore_ascii_case(keyword) => v
                .parse()
                .map_err(|_| ParseError::syntax(line, format!("invalid `{keyword}` count `{v}`"))),
            _ => Err(ParseError::syntax(line, format!("expected `{keyword} <count>`"))),
        }
    }
}
