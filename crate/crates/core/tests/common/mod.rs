//! Independent oracles and model sources shared by the integration tests.
//! Nothing here calls the library's solvers or search code.

#![allow(dead_code)]

use std::collections::BTreeSet;

use cexforge::ingest::{generate_random_dtmc, RandomModelSpec, TARGET_LABEL};
use cexforge::scc::NodeId;
use cexforge::{Dtmc, SccHierarchy};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

pub const D1_TRA: &str = "STATES 4\nTRANSITIONS 6\n0 1 0.5\n0 2 0.5\n1 0 0.5\n1 3 0.5\n2 2 1\n3 3 1\n";
pub const D1_LAB: &str = "#DECLARATION\ngoal\n#END\n3 goal\n";
pub const D2_TRA: &str = "STATES 5\nTRANSITIONS 7\n0 1 0.6\n0 2 0.4\n1 3 0.5\n1 4 0.5\n2 4 1\n3 3 1\n4 4 1\n";
pub const D2_LAB: &str = "#DECLARATION\na b\n#END\n3 a\n4 b\n";

pub fn d1() -> Dtmc {
    Dtmc::from_rows(
        0,
        vec![
            vec![(1, 0.5), (2, 0.5)],
            vec![(0, 0.5), (3, 0.5)],
            vec![(2, 1.0)],
            vec![(3, 1.0)],
        ],
    )
    .with_label("goal", [3])
}

pub fn d2() -> Dtmc {
    Dtmc::from_rows(
        0,
        vec![
            vec![(1, 0.6), (2, 0.4)],
            vec![(3, 0.5), (4, 0.5)],
            vec![(4, 1.0)],
            vec![(3, 1.0)],
            vec![(4, 1.0)],
        ],
    )
    .with_label("a", [3])
    .with_label("b", [4])
}

pub fn random_model(num_states: usize, out_degree: usize, scc_bias: f64, target_fraction: f64, seed: u64) -> Dtmc {
    generate_random_dtmc(&RandomModelSpec {
        num_states,
        out_degree: out_degree.min(num_states.saturating_sub(1)).max(1),
        scc_bias,
        target_fraction,
        seed,
    })
    .expect("valid spec")
}

/// Same graph with every row made uniform, which produces many exact ties.
pub fn uniformized(m: &Dtmc) -> Dtmc {
    let rows = (0..m.num_states())
        .map(|s| {
            let (succ, _) = m.row(s);
            let p = 1.0 / succ.len() as f64;
            succ.iter().map(|&t| (t, p)).collect()
        })
        .collect();
    let mut u = Dtmc::from_rows(m.initial(), rows);
    u.set_labels(m.labels().clone());
    u
}

pub fn targets_of(m: &Dtmc, label: &str) -> Vec<bool> {
    let set = m.label(label).cloned().unwrap_or_default();
    (0..m.num_states()).map(|s| set.contains(&s)).collect()
}

pub fn target_set(m: &Dtmc) -> BTreeSet<usize> {
    m.label(TARGET_LABEL).cloned().unwrap_or_default()
}

/// Least fixed point of `x = P x` with `x = 1` on targets, by Jacobi power
/// iteration from 0, restricted to `edges` when given.
pub fn power_iteration(
    n: usize,
    edges: &[(usize, usize, f64)],
    targets: &[bool],
    max_iter: usize,
) -> Vec<f64> {
    let mut x: Vec<f64> = targets.iter().map(|&t| if t { 1.0 } else { 0.0 }).collect();
    let mut next = x.clone();
    for _ in 0..max_iter {
        for (s, v) in next.iter_mut().enumerate() {
            *v = if targets[s] { 1.0 } else { 0.0 };
        }
        for &(s, t, p) in edges {
            if !targets[s] {
                next[s] += p * x[t];
            }
        }
        let delta = x.iter().zip(&next).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max);
        std::mem::swap(&mut x, &mut next);
        if delta < 1e-16 {
            break;
        }
    }
    x.truncate(n);
    x
}

pub fn oracle_reach(m: &Dtmc, targets: &[bool]) -> Vec<f64> {
    let edges: Vec<_> = m.transitions().collect();
    power_iteration(m.num_states(), &edges, targets, 100_000)
}

/// Probability from `init` inside a subgraph: only `edges` are kept, targets absorb.
pub fn oracle_subsystem(graph: &Dtmc, edges: &BTreeSet<(usize, usize)>, targets: &[bool], init: usize) -> f64 {
    let kept: Vec<_> = edges.iter().map(|&(u, v)| (u, v, graph.prob(u, v))).collect();
    power_iteration(graph.num_states(), &kept, targets, 100_000)[init]
}

/// Every walk from `source` that stops at its first target, with at most `max_len` edges.
pub fn brute_force_walks(g: &Dtmc, source: usize, targets: &[bool], max_len: usize) -> Vec<(Vec<usize>, f64)> {
    fn go(g: &Dtmc, targets: &[bool], max_len: usize, path: &mut Vec<usize>, prob: f64, out: &mut Vec<(Vec<usize>, f64)>) {
        let v = *path.last().expect("non-empty");
        if targets[v] {
            out.push((path.clone(), prob));
            return;
        }
        if path.len() > max_len {
            return;
        }
        let (succ, probs) = g.row(v);
        for (&t, &p) in succ.iter().zip(probs) {
            path.push(t);
            go(g, targets, max_len, path, prob * p, out);
            path.pop();
        }
    }
    let mut out = Vec::new();
    go(g, targets, max_len, &mut vec![source], 1.0, &mut out);
    out
}

pub fn close(a: f64, b: f64, rel: f64) -> bool {
    (a - b).abs() <= rel * a.abs().max(b.abs())
}

/// Decreasing probability; walks within relative 1e-12 ordered lexicographically.
pub fn sort_walks(walks: &mut [(Vec<usize>, f64)]) {
    walks.sort_by(|a, b| {
        if close(a.1, b.1, 1e-12) {
            a.0.cmp(&b.0)
        } else {
            b.1.total_cmp(&a.1)
        }
    });
}

/// A random parent-closed set of hierarchy nodes.
pub fn admissible_set(h: &SccHierarchy, rng: &mut ChaCha8Rng) -> BTreeSet<NodeId> {
    let mut set = BTreeSet::new();
    // Nodes are numbered parents first.
    for node in h.nodes() {
        let parent_ok = node.parent.is_none_or(|p| set.contains(&p));
        if parent_ok && rng.random_bool(0.5) {
            set.insert(node.id);
        }
    }
    set
}

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

/// Peak resident set size of this process in MiB, where available.
pub fn peak_rss_mib() -> Option<f64> {
    let status = std::fs::read_to_string("/proc/self/status").ok()?;
    let line = status.lines().find(|l| l.starts_with("VmHWM:"))?;
    let kb: f64 = line.split_whitespace().nth(1)?.parse().ok()?;
    Some(kb / 1024.0)
}
