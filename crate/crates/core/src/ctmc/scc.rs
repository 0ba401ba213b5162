use serde::Serialize;

/// Strongly connected components of a digraph given as adjacency lists.
///
/// Iterative Tarjan, linear in vertices plus edges. Components come out in
/// reverse topological order of the condensation, so the first one is a sink.
pub fn strongly_connected_components(adjacency: &[Vec<usize>]) -> Vec<Vec<usize>> {
    const UNVISITED: usize = usize::MAX;
    let n = adjacency.len();
    let mut index = vec![UNVISITED; n];
    let mut low = vec![0usize; n];
    let mut on_stack = vec![false; n];
    let mut stack = Vec::new();
    let mut components = Vec::new();
    let mut next_index = 0usize;
    // (vertex, position of the next edge to explore)
    let mut frames: Vec<(usize, usize)> = Vec::new();

    for root in 0..n {
        if index[root] != UNVISITED {
            continue;
        }
        frames.push((root, 0));
        while let Some(&(v, edge)) = frames.last() {
            if edge == 0 && index[v] == UNVISITED {
                index[v] = next_index;
                low[v] = next_index;
                next_index += 1;
                stack.push(v);
                on_stack[v] = true;
            }
            if let Some(&w) = adjacency[v].get(edge) {
                frames.last_mut().expect("current frame").1 += 1;
                if index[w] == UNVISITED {
                    frames.push((w, 0));
                } else if on_stack[w] {
                    low[v] = low[v].min(index[w]);
                }
                continue;
            }
            frames.pop();
            if let Some(&(parent, _)) = frames.last() {
                low[parent] = low[parent].min(low[v]);
            }
            if low[v] == index[v] {
                let mut component = Vec::new();
                loop {
                    let w = stack.pop().expect("tarjan stack underflow");
                    on_stack[w] = false;
                    component.push(w);
                    if w == v {
                        break;
                    }
                }
                components.push(component);
            }
        }
    }
    components
}

/// Outcome of the irreducibility check on a chain's transition digraph.
#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
#[serde(rename_all = "camelCase")]
pub struct IrreducibilityReport {
    pub irreducible: bool,
    /// Partition of the states; each component sorted, components ordered by
    /// their smallest state.
    pub components: Vec<Vec<usize>>,
    /// For a reducible chain, states `(i, j)` such that `j` cannot be reached from `i`.
    pub witness: Option<(usize, usize)>,
}

impl IrreducibilityReport {
    pub fn from_adjacency(adjacency: &[Vec<usize>]) -> Self {
        let mut components = strongly_connected_components(adjacency);
        let witness = match components.as_slice() {
            [] | [_] => None,
            [sink, ..] => {
                // Nothing leaves a sink component, so any outside state is unreachable from it.
                let mut in_sink = vec![false; adjacency.len()];
                sink.iter().for_each(|&s| in_sink[s] = true);
                let from = *sink.iter().min().expect("non-empty component");
                let to = (0..adjacency.len()).find(|&s| !in_sink[s]).expect("second component exists");
                Some((from, to))
            }
        };
        for c in &mut components {
            c.sort_unstable();
        }
        components.sort_unstable_by_key(|c| c[0]);
        Self { irreducible: components.len() == 1, components, witness }
    }

    pub fn component_sizes(&self) -> Vec<usize> {
        self.components.iter().map(Vec::len).collect()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn reachable(adj: &[Vec<usize>], from: usize) -> Vec<bool> {
        let mut seen = vec![false; adj.len()];
        let mut todo = vec![from];
        seen[from] = true;
        while let Some(v) = todo.pop() {
            for &w in &adj[v] {
                if !seen[w] {
                    seen[w] = true;
                    todo.push(w);
                }
            }
        }
        seen
    }

    #[test]
    fn cycle_is_one_component() {
        let adj = vec![vec![1], vec![2], vec![0]];
        let r = IrreducibilityReport::from_adjacency(&adj);
        assert!(r.irreducible);
        assert_eq!(r.components, vec![vec![0, 1, 2]]);
        assert_eq!(r.witness, None);
    }

    #[test]
    fn death_chain_is_all_singletons() {
        let adj: Vec<Vec<usize>> = (0..5).map(|s| if s == 0 { vec![] } else { vec![s - 1] }).collect();
        let r = IrreducibilityReport::from_adjacency(&adj);
        assert!(!r.irreducible);
        assert_eq!(r.component_sizes(), vec![1; 5]);
        let (i, j) = r.witness.unwrap();
        assert!(!reachable(&adj, i)[j]);
    }

    #[test]
    fn first_component_is_a_sink() {
        let adj = vec![vec![1], vec![0, 2], vec![3], vec![2]];
        let comps = strongly_connected_components(&adj);
        assert_eq!(comps.len(), 2);
        let mut sink = comps[0].clone();
        sink.sort();
        assert_eq!(sink, vec![2, 3]);
    }

    #[test]
    fn deep_path_does_not_overflow() {
        let n = 200_000;
        let adj: Vec<Vec<usize>> = (0..n).map(|s| vec![(s + 1) % n]).collect();
        assert!(IrreducibilityReport::from_adjacency(&adj).irreducible);
    }

    #[test]
    fn empty_graph() {
        let r = IrreducibilityReport::from_adjacency(&[]);
        assert!(!r.irreducible);
        assert!(r.components.is_empty());
    }
}
