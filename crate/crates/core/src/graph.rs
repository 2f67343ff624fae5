//! Structure of transition graphs: strongly connected components, periods,
//! primitivity, and the canonical block decomposition.
//!
//! Every non-negative matrix can be relabelled so that its closed
//! irreducible classes come first, as diagonal blocks with no outgoing
//! edges, followed by the transient states:
//!
//! ```text
//! | B_1                     |   primitive closed classes (period 1)
//! |     ...                 |
//! |         C_{s+1}         |   periodic closed classes (period >= 2)
//! |               ...       |
//! | L_1 ...         L_r   Q |   transient states
//! ```

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::stochastic::StochasticMatrix;

/// 0-1 incidence structure: `edge(i, j)` means the transition `i -> j` is
/// allowed.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct TransitionGraph {
    n: usize,
    adj: Vec<bool>,
}

impl TransitionGraph {
    pub fn empty(n: usize) -> Self {
        Self {
            n,
            adj: vec![false; n * n],
        }
    }

    pub fn complete(n: usize) -> Self {
        Self {
            n,
            adj: vec![true; n * n],
        }
    }

    pub fn from_edges(n: usize, edges: &[(usize, usize)]) -> Result<Self> {
        let mut g = Self::empty(n);
        for &(from, to) in edges {
            if from >= n || to >= n {
                return Err(Error::EdgeOutOfRange { from, to, n });
            }
            g.adj[from * n + to] = true;
        }
        Ok(g)
    }

    /// Edge `(i, j)` iff `A_ij > threshold`.
    pub fn incidence(a: &StochasticMatrix, threshold: f64) -> Self {
        let n = a.n();
        let adj = (0..n)
            .flat_map(|i| (0..n).map(move |j| (i, j)))
            .map(|(i, j)| a.get(i, j) > threshold)
            .collect();
        Self { n, adj }
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn has_edge(&self, i: usize, j: usize) -> bool {
        self.adj[i * self.n + j]
    }

    pub fn add_edge(&mut self, i: usize, j: usize) {
        self.adj[i * self.n + j] = true;
    }

    pub fn remove_edge(&mut self, i: usize, j: usize) {
        self.adj[i * self.n + j] = false;
    }

    pub fn successors(&self, i: usize) -> impl Iterator<Item = usize> + '_ {
        (0..self.n).filter(move |&j| self.has_edge(i, j))
    }

    pub fn edges(&self) -> Vec<(usize, usize)> {
        (0..self.n)
            .flat_map(|i| self.successors(i).map(move |j| (i, j)))
            .collect()
    }

    /// Incidence matrix after relabelling: entry `(a, b)` of the result is
    /// `edge(order[a], order[b])`.
    pub fn permuted(&self, order: &[usize]) -> TransitionGraph {
        assert_eq!(order.len(), self.n);
        let mut g = Self::empty(self.n);
        for (a, &i) in order.iter().enumerate() {
            for (b, &j) in order.iter().enumerate() {
                if self.has_edge(i, j) {
                    g.add_edge(a, b);
                }
            }
        }
        g
    }

    pub fn to_rows(&self) -> Vec<Vec<u8>> {
        (0..self.n)
            .map(|i| (0..self.n).map(|j| u8::from(self.has_edge(i, j))).collect())
            .collect()
    }

    pub fn strongly_connected_components(&self) -> SccInfo {
        let components = tarjan(self);
        let mut component_of = vec![0; self.n];
        for (c, members) in components.iter().enumerate() {
            for &v in members {
                component_of[v] = c;
            }
        }
        let components = components
            .into_iter()
            .enumerate()
            .map(|(c, mut members)| {
                members.sort_unstable();
                let closed = members
                    .iter()
                    .all(|&u| self.successors(u).all(|v| component_of[v] == c));
                let period = component_period(self, &members, &component_of, c);
                Component {
                    members,
                    closed,
                    period,
                }
            })
            .collect();
        SccInfo {
            component_of,
            components,
        }
    }

    /// One strongly connected class containing every state, with at least
    /// one cycle (a lone state needs a self-loop).
    pub fn is_irreducible(&self) -> bool {
        let scc = self.strongly_connected_components();
        scc.components.len() == 1 && scc.components[0].period.is_some()
    }

    pub fn period(&self) -> Result<usize> {
        let scc = self.strongly_connected_components();
        match scc.components.as_slice() {
            [only] => only.period.ok_or(Error::NotIrreducible),
            _ => Err(Error::NotIrreducible),
        }
    }

    pub fn is_primitive(&self) -> bool {
        self.period() == Ok(1)
    }

    pub fn canonical_decomposition(&self) -> CanonicalDecomposition {
        let scc = self.strongly_connected_components();
        let mut primitive_blocks = Vec::new();
        let mut periodic_blocks = Vec::new();
        let mut transient = Vec::new();
        for comp in &scc.components {
            match (comp.closed, comp.period) {
                (true, Some(1)) => primitive_blocks.push(comp.members.clone()),
                (true, Some(d)) => periodic_blocks.push(PeriodicBlock {
                    states: comp.members.clone(),
                    period: d,
                }),
                // Non-closed classes, and dead-end states without any cycle.
                _ => transient.extend_from_slice(&comp.members),
            }
        }
        primitive_blocks.sort_by_key(|b| b[0]);
        periodic_blocks.sort_by_key(|b| b.states[0]);
        transient.sort_unstable();
        let permutation = primitive_blocks
            .iter()
            .flatten()
            .chain(periodic_blocks.iter().flat_map(|b| &b.states))
            .chain(&transient)
            .copied()
            .collect();
        CanonicalDecomposition {
            primitive_blocks,
            periodic_blocks,
            transient,
            permutation,
        }
    }
}

/// Iterative Tarjan. Components come out in reverse topological order.
fn tarjan(g: &TransitionGraph) -> Vec<Vec<usize>> {
    const UNVISITED: usize = usize::MAX;
    let n = g.n();
    let mut index = vec![UNVISITED; n];
    let mut lowlink = vec![0; n];
    let mut on_stack = vec![false; n];
    let mut stack = Vec::new();
    let mut components = Vec::new();
    let mut next_index = 0;
    // (node, next successor to inspect)
    let mut call: Vec<(usize, usize)> = Vec::new();

    for root in 0..n {
        if index[root] != UNVISITED {
            continue;
        }
        call.push((root, 0));
        index[root] = next_index;
        lowlink[root] = next_index;
        next_index += 1;
        stack.push(root);
        on_stack[root] = true;

        while let Some(&mut (v, ref mut next)) = call.last_mut() {
            let mut descended = false;
            while *next < n {
                let w = *next;
                *next += 1;
                if !g.has_edge(v, w) {
                    continue;
                }
                if index[w] == UNVISITED {
                    index[w] = next_index;
                    lowlink[w] = next_index;
                    next_index += 1;
                    stack.push(w);
                    on_stack[w] = true;
                    call.push((w, 0));
                    descended = true;
                    break;
                } else if on_stack[w] {
                    lowlink[v] = lowlink[v].min(index[w]);
                }
            }
            if descended {
                continue;
            }
            call.pop();
            if let Some(&(parent, _)) = call.last() {
                lowlink[parent] = lowlink[parent].min(lowlink[v]);
            }
            if lowlink[v] == index[v] {
                let mut members = Vec::new();
                while let Some(w) = stack.pop() {
                    on_stack[w] = false;
                    members.push(w);
                    if w == v {
                        break;
                    }
                }
                components.push(members);
            }
        }
    }
    components
}

fn gcd(mut a: usize, mut b: usize) -> usize {
    while b != 0 {
        (a, b) = (b, a % b);
    }
    a
}

/// gcd over internal edges `(u, v)` of `level(u) + 1 - level(v)`, with
/// levels from a BFS rooted in the component. `None` when the component
/// has no internal edge (no cycle passes through it).
fn component_period(
    g: &TransitionGraph,
    members: &[usize],
    component_of: &[usize],
    c: usize,
) -> Option<usize> {
    let mut level = vec![usize::MAX; g.n()];
    let mut queue = std::collections::VecDeque::new();
    level[members[0]] = 0;
    queue.push_back(members[0]);
    let mut d = 0;
    let mut has_edge = false;
    while let Some(u) = queue.pop_front() {
        for v in g.successors(u).filter(|&v| component_of[v] == c) {
            has_edge = true;
            if level[v] == usize::MAX {
                level[v] = level[u] + 1;
                queue.push_back(v);
            } else {
                d = gcd(d, (level[u] + 1).abs_diff(level[v]));
            }
        }
    }
    // Tree edges contribute 0 to the gcd; a strongly connected class with
    // any edge has at least one non-tree edge closing a cycle.
    has_edge.then_some(d.max(1))
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Component {
    pub members: Vec<usize>,
    /// No edge leaves the component.
    pub closed: bool,
    /// Undefined (`None`) for a single state with no self-loop.
    pub period: Option<usize>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct SccInfo {
    pub component_of: Vec<usize>,
    pub components: Vec<Component>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct PeriodicBlock {
    pub states: Vec<usize>,
    pub period: usize,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct CanonicalDecomposition {
    pub primitive_blocks: Vec<Vec<usize>>,
    pub periodic_blocks: Vec<PeriodicBlock>,
    pub transient: Vec<usize>,
    /// `permutation[new_index] = old_state`, ordering states as
    /// primitive blocks, then periodic blocks, then transient states.
    pub permutation: Vec<usize>,
}

impl CanonicalDecomposition {
    /// Closed blocks in permutation order.
    pub fn closed_blocks(&self) -> impl Iterator<Item = &[usize]> {
        self.primitive_blocks
            .iter()
            .map(Vec::as_slice)
            .chain(self.periodic_blocks.iter().map(|b| b.states.as_slice()))
    }
}

/// `max_{i in Q} sum_{j in Q} (A^t)_ij`: the largest probability of still
/// being transient after `t` steps when starting from a transient state.
pub fn transient_decay_check(
    a: &StochasticMatrix,
    decomposition: &CanonicalDecomposition,
    t: usize,
) -> Result<f64> {
    let q = &decomposition.transient;
    if q.is_empty() {
        return Err(Error::EmptyTransientSet);
    }
    let power = a.power(t);
    Ok(q.iter()
        .map(|&i| q.iter().map(|&j| power.get(i, j)).sum::<f64>())
        .fold(0.0, f64::max))
}
