use serde::Serialize;

use super::WeightedDigraph;

/// Nodes reachable from `start` along positive-weight arcs (including `start`).
pub fn reachable_from(g: &WeightedDigraph, start: usize) -> Vec<bool> {
    walk(g, start, Direction::Forward)
}

#[derive(Clone, Copy)]
enum Direction {
    Forward,
    Backward,
}

#[inline]
fn arc(g: &WeightedDigraph, dir: Direction, u: usize, v: usize) -> bool {
    match dir {
        Direction::Forward => g.has_arc(u, v),
        Direction::Backward => g.has_arc(v, u),
    }
}

fn walk(g: &WeightedDigraph, start: usize, dir: Direction) -> Vec<bool> {
    let n = g.n();
    let mut seen = vec![false; n];
    let mut stack = vec![start];
    seen[start] = true;
    while let Some(u) = stack.pop() {
        for v in 0..n {
            if !seen[v] && arc(g, dir, u, v) {
                seen[v] = true;
                stack.push(v);
            }
        }
    }
    seen
}

/// Every node reaches every other node.
pub fn strongly_connected(g: &WeightedDigraph) -> bool {
    if g.n() <= 1 {
        return true;
    }
    walk(g, 0, Direction::Forward).iter().all(|&b| b)
        && walk(g, 0, Direction::Backward).iter().all(|&b| b)
}

/// Some root reaches every node (the graph has a directed spanning tree).
pub fn quasi_strongly_connected(g: &WeightedDigraph) -> bool {
    spanning_root(g).is_some()
}

/// Smallest-index root of a directed spanning tree, if one exists.
pub fn spanning_root(g: &WeightedDigraph) -> Option<usize> {
    if g.n() == 0 {
        return None;
    }
    let scc = scc_decomposition(g);
    let mut closed = scc
        .components
        .iter()
        .zip(&scc.closed)
        .filter(|(_, &c)| c)
        .map(|(comp, _)| comp);
    let root = closed.next()?;
    if closed.next().is_some() {
        None
    } else {
        Some(root[0])
    }
}

/// Strongly connected components, each sorted ascending, ordered by their
/// smallest node. A component is closed when no arc enters it from outside.
#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct SccDecomposition {
    pub components: Vec<Vec<usize>>,
    pub closed: Vec<bool>,
    /// `membership[v]` is the index of the component containing `v`.
    pub membership: Vec<usize>,
}

impl SccDecomposition {
    pub fn closed_components(&self) -> impl Iterator<Item = &[usize]> {
        self.components
            .iter()
            .zip(&self.closed)
            .filter(|(_, &c)| c)
            .map(|(comp, _)| comp.as_slice())
    }

    /// Components are pairwise disconnected (no arcs between them).
    pub fn isolated(&self, g: &WeightedDigraph) -> bool {
        let n = g.n();
        (0..n).all(|u| (0..n).all(|v| !g.has_arc(u, v) || self.membership[u] == self.membership[v]))
    }
}

/// Kosaraju's two-pass decomposition with iterative depth-first traversals;
/// neighbors are explored in node-index order.
pub fn scc_decomposition(g: &WeightedDigraph) -> SccDecomposition {
    let n = g.n();

    // pass 1: finishing order on the forward graph
    let mut visited = vec![false; n];
    let mut order = Vec::with_capacity(n);
    let mut stack: Vec<(usize, usize)> = Vec::new();
    for root in 0..n {
        if visited[root] {
            continue;
        }
        visited[root] = true;
        stack.push((root, 0));
        while let Some((u, next)) = stack.last_mut() {
            let u = *u;
            let mut advanced = false;
            while *next < n {
                let v = *next;
                *next += 1;
                if !visited[v] && g.has_arc(u, v) {
                    visited[v] = true;
                    stack.push((v, 0));
                    advanced = true;
                    break;
                }
            }
            if !advanced {
                order.push(u);
                stack.pop();
            }
        }
    }

    // pass 2: reversed graph in decreasing finishing time
    let mut membership = vec![usize::MAX; n];
    let mut raw: Vec<Vec<usize>> = Vec::new();
    for &root in order.iter().rev() {
        if membership[root] != usize::MAX {
            continue;
        }
        let id = raw.len();
        let mut comp = vec![root];
        membership[root] = id;
        let mut todo = vec![root];
        while let Some(u) = todo.pop() {
            for v in 0..n {
                if membership[v] == usize::MAX && g.has_arc(v, u) {
                    membership[v] = id;
                    comp.push(v);
                    todo.push(v);
                }
            }
        }
        raw.push(comp);
    }

    for comp in &mut raw {
        comp.sort_unstable();
    }
    let mut ids: Vec<usize> = (0..raw.len()).collect();
    ids.sort_by_key(|&c| raw[c][0]);
    let mut remap = vec![0; raw.len()];
    for (new, &old) in ids.iter().enumerate() {
        remap[old] = new;
    }
    let components: Vec<Vec<usize>> = ids.iter().map(|&c| raw[c].clone()).collect();
    let membership: Vec<usize> = membership.iter().map(|&c| remap[c]).collect();

    let mut closed = vec![true; components.len()];
    for u in 0..n {
        for v in 0..n {
            if g.has_arc(u, v) && membership[u] != membership[v] {
                closed[membership[v]] = false;
            }
        }
    }

    SccDecomposition {
        components,
        closed,
        membership,
    }
}
