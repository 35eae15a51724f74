//! Directed communication graphs.
//!
//! Edge convention, used everywhere in this crate: an edge `j -> i` means node
//! `j` transmits to node `i`. In matrix form that is entry `(i, j)` (row = receiver,
//! column = sender), so `W[i][j] > 0` iff `j -> i` iff `j` is an in-neighbour of `i`.
//! Nodes are indexed from 0.

use crate::error::{Error, Result};
use crate::stochmat::SquareMatrix;

/// Largest node count accepted by the cut-enumeration routines.
pub const MAX_CUT_ENUMERATION_NODES: usize = 20;

/// A directed graph on `n` nodes with a self-loop at every node.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct DirectedGraph {
    n: usize,
    // adjacency[from * n + to]
    adjacency: Vec<bool>,
}

impl DirectedGraph {
    /// Graph with only the mandatory self-loops.
    pub fn self_loops(n: usize) -> Result<Self> {
        if n == 0 {
            return Err(Error::Argument("graph needs at least one node".into()));
        }
        let mut adjacency = vec![false; n * n];
        for i in 0..n {
            adjacency[i * n + i] = true;
        }
        Ok(Self { n, adjacency })
    }

    /// Complete graph, every ordered pair connected.
    pub fn complete(n: usize) -> Result<Self> {
        if n == 0 {
            return Err(Error::Argument("graph needs at least one node".into()));
        }
        Ok(Self {
            n,
            adjacency: vec![true; n * n],
        })
    }

    /// Self-loops plus the given `(from, to)` edges.
    pub fn from_edges(n: usize, edges: impl IntoIterator<Item = (usize, usize)>) -> Result<Self> {
        let mut g = Self::self_loops(n)?;
        for (from, to) in edges {
            g.add_edge(from, to)?;
        }
        Ok(g)
    }

    /// Directed ring `0 -> 1 -> ... -> n-1 -> 0` with self-loops.
    pub fn ring(n: usize) -> Result<Self> {
        Self::from_edges(n, (0..n).map(|i| (i, (i + 1) % n)))
    }

    /// Graph of the positive pattern of `m`: edge `j -> i` iff `m[i][j] > tol`.
    ///
    /// Self-loops are always present, whatever the diagonal of `m` holds.
    pub fn from_positive_pattern(m: &SquareMatrix, tol: f64) -> Result<Self> {
        if !(tol >= 0.0) {
            return Err(Error::Argument(format!("tolerance must be >= 0, got {tol}")));
        }
        let n = m.n();
        let mut g = Self::self_loops(n)?;
        for i in 0..n {
            for j in 0..n {
                if m.get(i, j) > tol {
                    g.adjacency[j * n + i] = true;
                }
            }
        }
        Ok(g)
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn has_edge(&self, from: usize, to: usize) -> bool {
        from < self.n && to < self.n && self.adjacency[from * self.n + to]
    }

    /// Adds `from -> to`; returns whether the edge is new.
    pub fn add_edge(&mut self, from: usize, to: usize) -> Result<bool> {
        if from >= self.n || to >= self.n {
            return Err(Error::Dimension(format!(
                "edge {from} -> {to} outside node range 0..{}",
                self.n
            )));
        }
        let slot = &mut self.adjacency[from * self.n + to];
        let added = !*slot;
        *slot = true;
        Ok(added)
    }

    /// All edges as `(from, to)` pairs, in lexicographic order.
    pub fn edges(&self) -> impl Iterator<Item = (usize, usize)> + '_ {
        let n = self.n;
        self.adjacency
            .iter()
            .enumerate()
            .filter(|(_, &e)| e)
            .map(move |(k, _)| (k / n, k % n))
    }

    pub fn edge_count(&self) -> usize {
        self.adjacency.iter().filter(|&&e| e).count()
    }

    pub fn out_neighbors(&self, from: usize) -> impl Iterator<Item = usize> + '_ {
        let row = &self.adjacency[from * self.n..(from + 1) * self.n];
        row.iter().enumerate().filter(|(_, &e)| e).map(|(to, _)| to)
    }

    /// `|N_out(i)|` for every node; each entry counts the self-loop.
    pub fn out_degrees(&self) -> Vec<usize> {
        (0..self.n).map(|i| self.out_neighbors(i).count()).collect()
    }

    /// Merges the edges of `other` into `self`; returns how many edges were new.
    pub fn absorb(&mut self, other: &DirectedGraph) -> Result<usize> {
        if other.n != self.n {
            return Err(Error::Dimension(format!(
                "cannot merge graphs on {} and {} nodes",
                self.n, other.n
            )));
        }
        let mut added = 0;
        for (mine, theirs) in self.adjacency.iter_mut().zip(&other.adjacency) {
            if *theirs && !*mine {
                *mine = true;
                added += 1;
            }
        }
        Ok(added)
    }

    /// Strongly connected components (Tarjan, iterative). Components are
    /// returned in reverse topological order of the condensation.
    pub fn strongly_connected_components(&self) -> Vec<Vec<usize>> {
        let n = self.n;
        const UNVISITED: usize = usize::MAX;
        let mut index = vec![UNVISITED; n];
        let mut low = vec![0usize; n];
        let mut on_stack = vec![false; n];
        let mut stack = Vec::with_capacity(n);
        let mut components = Vec::new();
        let mut next_index = 0;
        // (node, next neighbour to inspect)
        let mut call: Vec<(usize, usize)> = Vec::new();

        for root in 0..n {
            if index[root] != UNVISITED {
                continue;
            }
            call.push((root, 0));
            index[root] = next_index;
            low[root] = next_index;
            next_index += 1;
            stack.push(root);
            on_stack[root] = true;

            while let Some(&(v, start)) = call.last() {
                let mut cursor = start;
                let mut child = None;
                while cursor < n {
                    let w = cursor;
                    cursor += 1;
                    if !self.adjacency[v * n + w] {
                        continue;
                    }
                    if index[w] == UNVISITED {
                        child = Some(w);
                        break;
                    } else if on_stack[w] {
                        low[v] = low[v].min(index[w]);
                    }
                }
                if let Some(w) = child {
                    if let Some(top) = call.last_mut() {
                        top.1 = cursor;
                    }
                    index[w] = next_index;
                    low[w] = next_index;
                    next_index += 1;
                    stack.push(w);
                    on_stack[w] = true;
                    call.push((w, 0));
                    continue;
                }
                call.pop();
                if let Some(&(parent, _)) = call.last() {
                    low[parent] = low[parent].min(low[v]);
                }
                if low[v] == index[v] {
                    let mut component = Vec::new();
                    while let Some(w) = stack.pop() {
                        on_stack[w] = false;
                        component.push(w);
                        if w == v {
                            break;
                        }
                    }
                    component.sort_unstable();
                    components.push(component);
                }
            }
        }
        components
    }

    /// True iff every ordered pair of nodes is joined by a directed path.
    /// A single node is strongly connected.
    pub fn is_strongly_connected(&self) -> bool {
        self.n == 1 || self.strongly_connected_components().len() == 1
    }

    /// Cut-enumeration check: every nontrivial subset `S` receives at least one
    /// edge from its complement. Exponential in `n`.
    pub fn every_cut_crossed(&self) -> Result<bool> {
        let n = self.n;
        if n > MAX_CUT_ENUMERATION_NODES {
            return Err(Error::Capability(format!(
                "cut enumeration limited to n <= {MAX_CUT_ENUMERATION_NODES}, got {n}"
            )));
        }
        let full = (1u32 << n) - 1;
        for mask in 1..full {
            let crossed = self
                .edges()
                .any(|(from, to)| mask & (1 << from) == 0 && mask & (1 << to) != 0);
            if !crossed {
                return Ok(false);
            }
        }
        Ok(true)
    }
}

/// Edge-set union of a nonempty sequence of graphs on the same node set.
pub fn union<'a>(graphs: impl IntoIterator<Item = &'a DirectedGraph>) -> Result<DirectedGraph> {
    let mut iter = graphs.into_iter();
    let mut acc = iter
        .next()
        .ok_or_else(|| Error::Argument("union of an empty sequence".into()))?
        .clone();
    for g in iter {
        acc.absorb(g)?;
    }
    Ok(acc)
}
