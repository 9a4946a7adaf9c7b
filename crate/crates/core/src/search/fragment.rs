//! Most probable fragment leaving and re-entering a subsystem.

use std::collections::BinaryHeap;

use super::paths::best_completion;
use crate::model::Dtmc;
use crate::subsystem::Subsystem;

/// `v0 .. vk` with `v0` a non-target member, `v1 .. v(k-1)` outside the
/// subsystem and off the targets, and `vk` a member or a target.
#[derive(Debug, Clone, PartialEq)]
pub struct Fragment {
    pub vertices: Vec<usize>,
    pub prob: f64,
}

#[derive(Debug, Clone, Copy, PartialEq)]
struct Item {
    prob: f64,
    vertex: usize,
}
impl Eq for Item {}
impl PartialOrd for Item {
    fn partial_cmp(&self, other: &Self) -> Option<std::cmp::Ordering> {
        Some(self.cmp(other))
    }
}
impl Ord for Item {
    fn cmp(&self, other: &Self) -> std::cmp::Ordering {
        self.prob
            .total_cmp(&other.prob)
            .then_with(|| other.vertex.cmp(&self.vertex))
    }
}

/// Highest-probability fragment not yet contained in `subsystem`, found by
/// Dijkstra over max-product weights from all members at once. Fragments
/// ending at a vertex that cannot reach a target are ignored. Returns
/// `None` when no useful fragment exists.
pub fn best_fragment(graph: &Dtmc, subsystem: &Subsystem, targets: &[bool]) -> Option<Fragment> {
    best_fragment_with(graph, subsystem, targets, &best_completion(graph, targets))
}

pub(crate) fn best_fragment_with(graph: &Dtmc, subsystem: &Subsystem, targets: &[bool], completion: &[f64]) -> Option<Fragment> {
    if subsystem.is_empty() {
        return None;
    }
    let n = graph.num_states();
    let useful = |v: usize| completion[v] > 0.0;
    let closes = |v: usize| subsystem.contains(v) || targets[v];

    let mut dist = vec![0.0f64; n];
    let mut pred = vec![usize::MAX; n];
    let mut heap = BinaryHeap::new();
    let mut best: Option<Fragment> = None;

    let offer = |best: &mut Option<Fragment>, cand: Fragment| {
        let better = match best {
            None => true,
            Some(b) => cand.prob > b.prob || (cand.prob == b.prob && cand.vertices < b.vertices),
        };
        if better {
            *best = Some(cand);
        }
    };

    for &u in subsystem.vertices() {
        if targets[u] {
            continue;
        }
        for (w, p) in graph.row_iter(u) {
            if subsystem.has_edge(u, w) || !useful(w) {
                continue;
            }
            if closes(w) {
                offer(&mut best, Fragment { vertices: vec![u, w], prob: p });
            } else if p > dist[w] {
                dist[w] = p;
                pred[w] = u;
                heap.push(Item { prob: p, vertex: w });
            }
        }
    }

    let trace = |pred: &[usize], end: usize| {
        let mut path = vec![end];
        let mut at = end;
        while !subsystem.contains(at) {
            at = pred[at];
            path.push(at);
        }
        path.reverse();
        path
    };

    while let Some(Item { prob: d, vertex: w }) = heap.pop() {
        if d < dist[w] {
            continue;
        }
        if best.as_ref().is_some_and(|b| d < b.prob) {
            break;
        }
        for (x, p) in graph.row_iter(w) {
            if !useful(x) {
                continue;
            }
            let q = d * p;
            if closes(x) {
                let mut path = trace(&pred, w);
                path.push(x);
                offer(&mut best, Fragment { vertices: path, prob: q });
            } else if q > dist[x] {
                dist[x] = q;
                pred[x] = w;
                heap.push(Item { prob: q, vertex: x });
            }
        }
    }
    best
}
