//! Strongly connected components of the support graph of a rate matrix
//! (iterative Tarjan).

/// SCCs of the directed graph on `0..n` with edges where `edge(i, j)` holds.
pub(crate) fn strongly_connected_components(
    n: usize,
    edge: impl Fn(usize, usize) -> bool,
) -> Vec<Vec<usize>> {
    let adj: Vec<Vec<usize>> = (0..n)
        .map(|i| (0..n).filter(|&j| j != i && edge(i, j)).collect())
        .collect();

    let mut index = vec![usize::MAX; n];
    let mut low = vec![0usize; n];
    let mut on_stack = vec![false; n];
    let mut stack = Vec::new();
    let mut next_index = 0usize;
    let mut comps = Vec::new();

    for root in 0..n {
        if index[root] != usize::MAX {
            continue;
        }
        // call stack of (node, next child position)
        let mut call: Vec<(usize, usize)> = vec![(root, 0)];
        index[root] = next_index;
        low[root] = next_index;
        next_index += 1;
        stack.push(root);
        on_stack[root] = true;

        while let Some(&mut (v, ref mut child)) = call.last_mut() {
            if *child < adj[v].len() {
                let w = adj[v][*child];
                *child += 1;
                if index[w] == usize::MAX {
                    index[w] = next_index;
                    low[w] = next_index;
                    next_index += 1;
                    stack.push(w);
                    on_stack[w] = true;
                    call.push((w, 0));
                } else if on_stack[w] {
                    low[v] = low[v].min(index[w]);
                }
            } else {
                call.pop();
                if let Some(&(parent, _)) = call.last() {
                    low[parent] = low[parent].min(low[v]);
                }
                if low[v] == index[v] {
                    let mut comp = Vec::new();
                    loop {
                        let w = stack.pop().unwrap();
                        on_stack[w] = false;
                        comp.push(w);
                        if w == v {
                            break;
                        }
                    }
                    comps.push(comp);
                }
            }
        }
    }
    comps
}

pub(crate) fn is_strongly_connected(n: usize, edge: impl Fn(usize, usize) -> bool) -> bool {
    strongly_connected_components(n, edge).len() == 1
}

/// Components with no edge leaving them (the closed classes of a chain).
pub(crate) fn closed_classes(n: usize, edge: impl Fn(usize, usize) -> bool) -> Vec<Vec<usize>> {
    let comps = strongly_connected_components(n, &edge);
    let mut comp_of = vec![0usize; n];
    for (c, comp) in comps.iter().enumerate() {
        for &v in comp {
            comp_of[v] = c;
        }
    }
    comps
        .iter()
        .enumerate()
        .filter(|(c, comp)| {
            comp.iter()
                .all(|&v| (0..n).all(|j| v == j || !edge(v, j) || comp_of[j] == *c))
        })
        .map(|(_, comp)| {
            let mut sorted = comp.clone();
            sorted.sort_unstable();
            sorted
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn two_state_cycle_is_connected() {
        assert!(is_strongly_connected(2, |i, j| i != j));
    }

    #[test]
    fn chain_without_return_is_not() {
        assert!(!is_strongly_connected(3, |i, j| j == i + 1));
    }

    #[test]
    fn closed_class_of_absorbing_chain() {
        // 0 -> 1 -> 2, 2 absorbing: closed class {2}.
        let classes = closed_classes(3, |i, j| j == i + 1);
        assert_eq!(classes, vec![vec![2]]);
    }
}
