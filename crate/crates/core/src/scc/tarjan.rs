//! Iterative Tarjan decomposition over an implicit graph on `0..n`.

const UNVISITED: u32 = u32::MAX;

/// Strongly connected components of the graph on vertices `0..n` whose
/// out-edges are produced by `succ`. Components are emitted in reverse
/// topological order of the condensation (a component appears before every
/// component that has an edge into it); each component is sorted.
///
/// Successors outside `0..n` must not be produced.
pub fn strongly_connected_components<F, I>(n: usize, mut succ: F) -> Vec<Vec<usize>>
where
    F: FnMut(usize) -> I,
    I: Iterator<Item = usize>,
{
    let mut index = vec![UNVISITED; n];
    let mut lowlink = vec![0u32; n];
    let mut on_stack = vec![false; n];
    let mut stack: Vec<usize> = Vec::new();
    let mut call: Vec<(usize, I)> = Vec::new();
    let mut next_index = 0u32;
    let mut out = Vec::new();

    for root in 0..n {
        if index[root] != UNVISITED {
            continue;
        }
        index[root] = next_index;
        lowlink[root] = next_index;
        next_index += 1;
        stack.push(root);
        on_stack[root] = true;
        call.push((root, succ(root)));

        while let Some((v, it)) = call.last_mut() {
            let v = *v;
            match it.next() {
                Some(w) => {
                    if index[w] == UNVISITED {
                        index[w] = next_index;
                        lowlink[w] = next_index;
                        next_index += 1;
                        stack.push(w);
                        on_stack[w] = true;
                        call.push((w, succ(w)));
                    } else if on_stack[w] {
                        lowlink[v] = lowlink[v].min(index[w]);
                    }
                }
                None => {
                    call.pop();
                    if lowlink[v] == index[v] {
                        let mut comp = Vec::new();
                        loop {
                            let w = stack.pop().expect("tarjan stack underflow");
                            on_stack[w] = false;
                            comp.push(w);
                            if w == v {
                                break;
                            }
                        }
                        comp.sort_unstable();
                        out.push(comp);
                    }
                    if let Some((u, _)) = call.last() {
                        let u = *u;
                        lowlink[u] = lowlink[u].min(lowlink[v]);
                    }
                }
            }
        }
    }
    out
}
