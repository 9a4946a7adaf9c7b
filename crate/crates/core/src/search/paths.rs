//! Enumeration of initial-to-target walks in nonincreasing probability.
//!
//! Best-first search over walk prefixes. A prefix ending in `v` is keyed by
//! `prob(prefix) · best(v)`, where `best(v)` is the exact maximum probability
//! of completing from `v`; popping a complete walk therefore yields walks in
//! nonincreasing order. Prefixes live in a parent-pointer arena.

use std::cmp::Ordering;
use std::collections::BinaryHeap;

use crate::model::Dtmc;

/// Walks below this probability are dropped.
pub const MIN_WALK_PROB: f64 = 1e-300;

/// Two walk probabilities within this relative distance are a tie and are
/// ordered lexicographically by vertex sequence.
pub const TIE_TOLERANCE: f64 = 1e-12;

/// Headroom for rounding between a prefix key and its completions.
const KEY_SLACK: f64 = 1e-12;

#[derive(Debug, Clone, PartialEq)]
pub struct Walk {
    pub vertices: Vec<usize>,
    pub prob: f64,
}

#[derive(Debug, Clone, Copy)]
struct Prefix {
    vertex: usize,
    parent: usize,
    prob: f64,
}

const ROOT: usize = usize::MAX;

#[derive(Debug, Clone, Copy)]
struct Entry {
    key: f64,
    complete: bool,
    prefix: usize,
}

impl PartialEq for Entry {
    fn eq(&self, other: &Self) -> bool {
        self.cmp(other) == Ordering::Equal
    }
}
impl Eq for Entry {}
impl PartialOrd for Entry {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}
impl Ord for Entry {
    fn cmp(&self, other: &Self) -> Ordering {
        // Max-heap on key; older prefixes first among equal keys.
        self.key
            .total_cmp(&other.key)
            .then_with(|| other.prefix.cmp(&self.prefix))
    }
}

/// Maximum probability of reaching a target from each vertex, where walks
/// stop at their first target. Targets map to 1.
pub fn best_completion(graph: &Dtmc, targets: &[bool]) -> Vec<f64> {
    let n = graph.num_states();
    let pred = graph.predecessors();
    let mut best = vec![0.0f64; n];
    let mut done = vec![false; n];
    let mut heap = BinaryHeap::new();
    for v in 0..n {
        if targets[v] {
            best[v] = 1.0;
            heap.push(Entry {
                key: 1.0,
                complete: true,
                prefix: v,
            });
        }
    }
    while let Some(Entry { key, prefix: v, .. }) = heap.pop() {
        if done[v] || key < best[v] {
            continue;
        }
        done[v] = true;
        for &u in pred.of(v) {
            if targets[u] || done[u] {
                continue;
            }
            let cand = graph.prob(u, v) * key;
            if cand > best[u] {
                best[u] = cand;
                heap.push(Entry {
                    key: cand,
                    complete: false,
                    prefix: u,
                });
            }
        }
    }
    best
}

/// Lazy stream of walks from `source` to the first visit of a target.
pub struct PathEnumerator<'a> {
    graph: &'a Dtmc,
    targets: Vec<bool>,
    best: Vec<f64>,
    arena: Vec<Prefix>,
    heap: BinaryHeap<Entry>,
    pending: Vec<Walk>,
}

impl<'a> PathEnumerator<'a> {
    pub fn new(graph: &'a Dtmc, source: usize, targets: &[bool]) -> Self {
        let best = best_completion(graph, targets);
        let mut e = PathEnumerator {
            graph,
            targets: targets.to_vec(),
            best,
            arena: Vec::new(),
            heap: BinaryHeap::new(),
            pending: Vec::new(),
        };
        e.push(source, ROOT, 1.0);
        e
    }

    /// Per-vertex best completion probabilities used as search keys.
    pub fn completion(&self) -> &[f64] {
        &self.best
    }

    fn push(&mut self, vertex: usize, parent: usize, prob: f64) {
        let complete = self.targets[vertex];
        let key = if complete { prob } else { prob * self.best[vertex] };
        if key < MIN_WALK_PROB || key == 0.0 {
            return;
        }
        self.arena.push(Prefix { vertex, parent, prob });
        self.heap.push(Entry {
            key,
            complete,
            prefix: self.arena.len() - 1,
        });
    }

    fn materialize(&self, mut at: usize) -> Vec<usize> {
        let mut out = Vec::new();
        while at != ROOT {
            out.push(self.arena[at].vertex);
            at = self.arena[at].parent;
        }
        out.reverse();
        out
    }

    /// Pops the pending walk the tie rule selects.
    fn emit(&mut self) -> Walk {
        let pmax = self.pending.iter().map(|w| w.prob).fold(0.0, f64::max);
        let floor = pmax * (1.0 - TIE_TOLERANCE);
        let pick = self
            .pending
            .iter()
            .enumerate()
            .filter(|(_, w)| w.prob >= floor)
            .min_by(|a, b| a.1.vertices.cmp(&b.1.vertices))
            .map(|(i, _)| i)
            .expect("pending is non-empty");
        self.pending.swap_remove(pick)
    }
}

impl Iterator for PathEnumerator<'_> {
    type Item = Walk;

    fn next(&mut self) -> Option<Walk> {
        loop {
            if !self.pending.is_empty() {
                let pmax = self.pending.iter().map(|w| w.prob).fold(0.0, f64::max);
                let top = self.heap.peek().map_or(0.0, |e| e.key);
                if top * (1.0 + KEY_SLACK) < pmax * (1.0 - TIE_TOLERANCE) {
                    return Some(self.emit());
                }
            }
            let Some(entry) = self.heap.pop() else {
                return (!self.pending.is_empty()).then(|| self.emit());
            };
            let prefix = self.arena[entry.prefix];
            if entry.complete {
                let vertices = self.materialize(entry.prefix);
                self.pending.push(Walk {
                    vertices,
                    prob: prefix.prob,
                });
                continue;
            }
            let graph = self.graph;
            for (w, p) in graph.row_iter(prefix.vertex) {
                self.push(w, entry.prefix, prefix.prob * p);
            }
        }
    }
}
