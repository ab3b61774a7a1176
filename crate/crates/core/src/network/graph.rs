use std::collections::VecDeque;

use super::NetworkError;

/// One traversal of an interface edge; `forward` goes from side a to b.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct CycleStep {
    pub edge: usize,
    pub forward: bool,
}

/// Multigraph of component instances joined by interfaces, with a BFS
/// spanning tree and its fundamental cycles.
#[derive(Debug, Clone, PartialEq)]
pub struct ConnectivityGraph {
    pub node_count: usize,
    pub edges: Vec<(usize, usize)>,
    adjacency: Vec<Vec<(usize, usize)>>,
}

impl ConnectivityGraph {
    pub fn new(node_count: usize, edges: Vec<(usize, usize)>) -> Self {
        let mut adjacency = vec![Vec::new(); node_count];
        for (e, &(a, b)) in edges.iter().enumerate() {
            adjacency[a].push((e, b));
            if a != b {
                adjacency[b].push((e, a));
            }
        }
        Self {
            node_count,
            edges,
            adjacency,
        }
    }

    pub fn connected_components(&self) -> usize {
        let mut seen = vec![false; self.node_count];
        let mut count = 0;
        for s in 0..self.node_count {
            if seen[s] {
                continue;
            }
            count += 1;
            seen[s] = true;
            let mut stack = vec![s];
            while let Some(x) = stack.pop() {
                for &(_, y) in &self.adjacency[x] {
                    if !seen[y] {
                        seen[y] = true;
                        stack.push(y);
                    }
                }
            }
        }
        count
    }

    /// E − V + (number of connected parts).
    pub fn cycle_rank(&self) -> usize {
        self.edges.len() + self.connected_components() - self.node_count
    }
}

/// BFS spanning tree rooted at `root` and one cycle per non-tree edge.
#[derive(Debug, Clone, PartialEq)]
pub struct CycleBasis {
    pub root: usize,
    /// (edge, parent) of every non-root node.
    pub parent: Vec<Option<(usize, usize)>>,
    /// Nodes in BFS order, root first.
    pub order: Vec<usize>,
    pub tree_edge: Vec<bool>,
    pub cycles: Vec<Vec<CycleStep>>,
}

fn step_between(edges: &[(usize, usize)], edge: usize, from: usize) -> CycleStep {
    CycleStep {
        edge,
        forward: edges[edge].0 == from,
    }
}

/// Fundamental cycles of a connected graph; deterministic for a fixed edge
/// order.
pub fn fundamental_cycles(graph: &ConnectivityGraph, root: usize) -> Result<CycleBasis, NetworkError> {
    let n = graph.node_count;
    if n == 0 {
        return Err(NetworkError::Empty);
    }
    let components = graph.connected_components();
    if components > 1 {
        return Err(NetworkError::DisconnectedNetwork { components });
    }
    let mut parent: Vec<Option<(usize, usize)>> = vec![None; n];
    let mut depth = vec![usize::MAX; n];
    let mut tree_edge = vec![false; graph.edges.len()];
    let mut order = Vec::with_capacity(n);
    let mut queue = VecDeque::from([root]);
    depth[root] = 0;
    while let Some(x) = queue.pop_front() {
        order.push(x);
        for &(e, y) in &graph.adjacency[x] {
            if depth[y] == usize::MAX {
                depth[y] = depth[x] + 1;
                parent[y] = Some((e, x));
                tree_edge[e] = true;
                queue.push_back(y);
            }
        }
    }
    let climb = |mut x: usize, target_depth: usize| -> (usize, Vec<CycleStep>) {
        let mut steps = Vec::new();
        while depth[x] > target_depth {
            let (e, p) = parent[x].expect("non-root node has a parent");
            steps.push(step_between(&graph.edges, e, x));
            x = p;
        }
        (x, steps)
    };
    let mut cycles = Vec::new();
    for (e, &(u, v)) in graph.edges.iter().enumerate() {
        if tree_edge[e] {
            continue;
        }
        let mut cycle = vec![CycleStep { edge: e, forward: true }];
        if u != v {
            // v up to the common ancestor, then down to u
            let (mut a, mut up_v) = climb(v, depth[u].min(depth[v]));
            let (mut b, mut up_u) = climb(u, depth[u].min(depth[v]));
            while a != b {
                let (ea, pa) = parent[a].expect("distinct nodes below the root");
                let (eb, pb) = parent[b].expect("distinct nodes below the root");
                up_v.push(step_between(&graph.edges, ea, a));
                up_u.push(step_between(&graph.edges, eb, b));
                a = pa;
                b = pb;
            }
            cycle.extend(up_v);
            cycle.extend(up_u.into_iter().rev().map(|s| CycleStep {
                edge: s.edge,
                forward: !s.forward,
            }));
        }
        cycles.push(cycle);
    }
    Ok(CycleBasis {
        root,
        parent,
        order,
        tree_edge,
        cycles,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn walk(g: &ConnectivityGraph, cycle: &[CycleStep]) -> Vec<usize> {
        cycle
            .iter()
            .map(|s| {
                let (a, b) = g.edges[s.edge];
                if s.forward {
                    b
                } else {
                    a
                }
            })
            .collect()
    }

    fn assert_closed(g: &ConnectivityGraph, cycle: &[CycleStep]) {
        for k in 0..cycle.len() {
            let s = cycle[k];
            let next = cycle[(k + 1) % cycle.len()];
            let (a, b) = g.edges[s.edge];
            let arrive = if s.forward { b } else { a };
            let (c, d) = g.edges[next.edge];
            let leave = if next.forward { c } else { d };
            assert_eq!(arrive, leave);
        }
    }

    #[test]
    fn tree_has_no_cycles() {
        let g = ConnectivityGraph::new(3, vec![(0, 1), (0, 2)]);
        let b = fundamental_cycles(&g, 0).unwrap();
        assert!(b.cycles.is_empty());
        assert_eq!(b.order, vec![0, 1, 2]);
    }

    #[test]
    fn double_edge_gives_one_cycle() {
        let g = ConnectivityGraph::new(2, vec![(0, 1), (0, 1)]);
        let b = fundamental_cycles(&g, 0).unwrap();
        assert_eq!(b.cycles.len(), 1);
        assert_eq!(b.cycles[0].len(), 2);
        assert_closed(&g, &b.cycles[0]);
    }

    #[test]
    fn grid_cycles_are_closed() {
        // 3×3 lattice
        let idx = |r: usize, c: usize| 3 * r + c;
        let mut edges = Vec::new();
        for r in 0..3 {
            for c in 0..3 {
                if c + 1 < 3 {
                    edges.push((idx(r, c), idx(r, c + 1)));
                }
                if r + 1 < 3 {
                    edges.push((idx(r, c), idx(r + 1, c)));
                }
            }
        }
        let g = ConnectivityGraph::new(9, edges);
        assert_eq!(g.cycle_rank(), 4);
        for root in 0..9 {
            let b = fundamental_cycles(&g, root).unwrap();
            assert_eq!(b.cycles.len(), 4);
            for c in &b.cycles {
                assert_closed(&g, c);
                let nodes = walk(&g, c);
                let mut uniq = nodes.clone();
                uniq.sort();
                uniq.dedup();
                assert_eq!(uniq.len(), nodes.len(), "cycle revisits a node");
                assert_eq!(c.iter().filter(|s| !b.tree_edge[s.edge]).count(), 1);
            }
        }
    }

    #[test]
    fn disconnected_graph_is_rejected() {
        let g = ConnectivityGraph::new(3, vec![(0, 1)]);
        assert!(matches!(
            fundamental_cycles(&g, 0),
            Err(NetworkError::DisconnectedNetwork { components: 2 })
        ));
    }
}
