//! Node-weighted undirected graphs, quotients and spanning-tree counting.

mod count;
mod io;

pub use count::{enumerate_spanning_trees, for_each_spanning_tree, spanning_tree_count, Laplacian};
pub use io::{load_graph, parse_graph};

use std::collections::{BTreeMap, HashMap};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Index of a node inside a [`Graph`]. Node order is the canonical id order.
pub type NodeId = usize;

/// Two-party vote tally for one node in one election.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct Tally {
    pub dem: u64,
    pub rep: u64,
}

/// An undirected simple graph with positive integer node populations.
///
/// Edges are stored once as `(u, v)` with `u < v`, sorted. Adjacency is kept
/// in compressed rows so that neighbor scans in the samplers stay cheap.
#[derive(Clone, Debug)]
pub struct Graph {
    labels: Vec<String>,
    pops: Vec<u64>,
    edges: Vec<(NodeId, NodeId)>,
    offsets: Vec<usize>,
    neighbors: Vec<NodeId>,
    votes: BTreeMap<String, Vec<Tally>>,
}

impl Graph {
    /// Builds a graph, checking populations, self-loops and duplicate edges.
    /// Connectivity is not required here; see [`Graph::is_connected`].
    pub fn new(labels: Vec<String>, pops: Vec<u64>, edges: Vec<(NodeId, NodeId)>) -> Result<Graph> {
        if labels.len() != pops.len() {
            return Err(Error::InvalidParameter(format!(
                "{} labels for {} populations",
                labels.len(),
                pops.len()
            )));
        }
        let n = pops.len();
        let mut seen = HashMap::with_capacity(n);
        for (i, label) in labels.iter().enumerate() {
            if seen.insert(label.as_str(), i).is_some() {
                return Err(Error::DuplicateNode(label.clone()));
            }
            if pops[i] == 0 {
                return Err(Error::NonpositivePopulation(label.clone()));
            }
        }
        let mut canon = Vec::with_capacity(edges.len());
        for (u, v) in edges {
            if u >= n {
                return Err(Error::UnknownNode(u.to_string()));
            }
            if v >= n {
                return Err(Error::UnknownNode(v.to_string()));
            }
            if u == v {
                return Err(Error::SelfLoop(labels[u].clone()));
            }
            canon.push((u.min(v), u.max(v)));
        }
        canon.sort_unstable();
        for w in canon.windows(2) {
            if w[0] == w[1] {
                return Err(Error::DuplicateEdge(
                    labels[w[0].0].clone(),
                    labels[w[0].1].clone(),
                ));
            }
        }
        Ok(Graph::from_parts(labels, pops, canon))
    }

    /// Assumes `edges` is canonical and validated.
    fn from_parts(labels: Vec<String>, pops: Vec<u64>, edges: Vec<(NodeId, NodeId)>) -> Graph {
        let n = pops.len();
        let mut degree = vec![0usize; n + 1];
        for &(u, v) in &edges {
            degree[u] += 1;
            degree[v] += 1;
        }
        let mut offsets = vec![0usize; n + 1];
        for i in 0..n {
            offsets[i + 1] = offsets[i] + degree[i];
        }
        let mut fill = offsets.clone();
        let mut neighbors = vec![0; offsets[n]];
        for &(u, v) in &edges {
            neighbors[fill[u]] = v;
            fill[u] += 1;
            neighbors[fill[v]] = u;
            fill[v] += 1;
        }
        for i in 0..n {
            neighbors[offsets[i]..offsets[i + 1]].sort_unstable();
        }
        Graph {
            labels,
            pops,
            edges,
            offsets,
            neighbors,
            votes: BTreeMap::new(),
        }
    }

    /// Attaches per-node tallies for `election`.
    pub fn set_votes(&mut self, election: &str, tallies: Vec<Tally>) -> Result<()> {
        if tallies.len() != self.node_count() {
            return Err(Error::InvalidParameter(format!(
                "{} tallies for {} nodes",
                tallies.len(),
                self.node_count()
            )));
        }
        self.votes.insert(election.to_string(), tallies);
        Ok(())
    }

    pub fn node_count(&self) -> usize {
        self.pops.len()
    }

    pub fn edge_count(&self) -> usize {
        self.edges.len()
    }

    pub fn edges(&self) -> &[(NodeId, NodeId)] {
        &self.edges
    }

    pub fn pop(&self, v: NodeId) -> u64 {
        self.pops[v]
    }

    pub fn pops(&self) -> &[u64] {
        &self.pops
    }

    pub fn total_pop(&self) -> u64 {
        self.pops.iter().sum()
    }

    pub fn label(&self, v: NodeId) -> &str {
        &self.labels[v]
    }

    pub fn labels(&self) -> &[String] {
        &self.labels
    }

    /// Map from node label to index.
    pub fn label_index(&self) -> HashMap<&str, NodeId> {
        self.labels
            .iter()
            .enumerate()
            .map(|(i, l)| (l.as_str(), i))
            .collect()
    }

    #[inline]
    pub fn neighbors(&self, v: NodeId) -> &[NodeId] {
        &self.neighbors[self.offsets[v]..self.offsets[v + 1]]
    }

    pub fn degree(&self, v: NodeId) -> usize {
        self.offsets[v + 1] - self.offsets[v]
    }

    /// Index of edge `{u, v}` in [`Graph::edges`], if present.
    pub fn edge_index(&self, u: NodeId, v: NodeId) -> Option<usize> {
        let key = (u.min(v), u.max(v));
        self.edges.binary_search(&key).ok()
    }

    pub fn elections(&self) -> impl Iterator<Item = &str> {
        self.votes.keys().map(|s| s.as_str())
    }

    pub fn votes(&self, election: &str) -> Option<&[Tally]> {
        self.votes.get(election).map(|v| v.as_slice())
    }

    pub fn is_connected(&self) -> bool {
        let n = self.node_count();
        if n == 0 {
            return false;
        }
        let mut seen = vec![false; n];
        let mut stack = vec![0];
        seen[0] = true;
        let mut count = 1;
        while let Some(u) = stack.pop() {
            for &w in self.neighbors(u) {
                if !seen[w] {
                    seen[w] = true;
                    count += 1;
                    stack.push(w);
                }
            }
        }
        count == n
    }

    /// Whether the nodes marked in `member` induce a connected subgraph.
    /// An empty set counts as disconnected.
    pub fn is_connected_set(&self, member: &[bool]) -> bool {
        let Some(start) = member.iter().position(|&m| m) else {
            return false;
        };
        let total = member.iter().filter(|&&m| m).count();
        let mut seen = vec![false; self.node_count()];
        let mut stack = vec![start];
        seen[start] = true;
        let mut count = 1;
        while let Some(u) = stack.pop() {
            for &w in self.neighbors(u) {
                if member[w] && !seen[w] {
                    seen[w] = true;
                    count += 1;
                    stack.push(w);
                }
            }
        }
        count == total
    }

    /// The subgraph induced by `nodes`, with populations and votes inherited.
    /// Connectivity of the result is not checked.
    pub fn induced_subgraph(&self, nodes: &[NodeId]) -> Result<Subgraph> {
        if nodes.is_empty() {
            return Err(Error::EmptyNodeSet);
        }
        let mut sorted = nodes.to_vec();
        sorted.sort_unstable();
        sorted.dedup();
        if let Some(&bad) = sorted.iter().find(|&&v| v >= self.node_count()) {
            return Err(Error::UnknownNode(bad.to_string()));
        }
        let mut local = vec![usize::MAX; self.node_count()];
        Ok(self.subgraph_sorted(sorted, &mut local))
    }

    /// Induced subgraph over sorted, deduplicated, in-range `nodes`.
    /// `local` is scratch of length `node_count()` filled with `usize::MAX`;
    /// it is restored before returning.
    pub(crate) fn subgraph_sorted(&self, nodes: Vec<NodeId>, local: &mut [usize]) -> Subgraph {
        for (i, &v) in nodes.iter().enumerate() {
            local[v] = i;
        }
        let mut edges = Vec::new();
        for (i, &v) in nodes.iter().enumerate() {
            for &w in self.neighbors(v) {
                let j = local[w];
                if j != usize::MAX && i < j {
                    edges.push((i, j));
                }
            }
        }
        edges.sort_unstable();
        let labels = nodes.iter().map(|&v| self.labels[v].clone()).collect();
        let pops = nodes.iter().map(|&v| self.pops[v]).collect();
        let mut graph = Graph::from_parts(labels, pops, edges);
        for (name, tallies) in &self.votes {
            graph
                .votes
                .insert(name.clone(), nodes.iter().map(|&v| tallies[v]).collect());
        }
        for &v in &nodes {
            local[v] = usize::MAX;
        }
        Subgraph {
            graph,
            to_parent: nodes,
        }
    }
}

/// An induced subgraph together with the map back to its parent's node ids.
#[derive(Clone, Debug)]
pub struct Subgraph {
    pub graph: Graph,
    pub to_parent: Vec<NodeId>,
}

impl std::ops::Deref for Subgraph {
    type Target = Graph;
    fn deref(&self) -> &Graph {
        &self.graph
    }
}

/// A rows x cols grid with 4-neighbor adjacency. Node `r * cols + c` is the
/// cell in row `r`, column `c`.
pub fn build_grid(rows: usize, cols: usize, node_pop: u64) -> Result<Graph> {
    if rows == 0 || cols == 0 {
        return Err(Error::InvalidParameter(
            "grid dimensions must be positive".into(),
        ));
    }
    let n = rows * cols;
    let mut edges = Vec::with_capacity(rows * (cols - 1) + cols * (rows - 1));
    for r in 0..rows {
        for c in 0..cols {
            let v = r * cols + c;
            if c + 1 < cols {
                edges.push((v, v + 1));
            }
            if r + 1 < rows {
                edges.push((v, v + cols));
            }
        }
    }
    let labels = (0..n).map(|v| v.to_string()).collect();
    Graph::new(labels, vec![node_pop; n], edges)
}

/// Multigraph on blocks; `multiplicity(x, y)` counts parallel edges.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct MultiGraph {
    n: usize,
    mult: Vec<u64>,
}

impl MultiGraph {
    pub fn new(n: usize) -> MultiGraph {
        MultiGraph {
            n,
            mult: vec![0; n * n],
        }
    }

    pub fn node_count(&self) -> usize {
        self.n
    }

    pub fn multiplicity(&self, x: usize, y: usize) -> u64 {
        self.mult[x * self.n + y]
    }

    pub fn add_edges(&mut self, x: usize, y: usize, m: u64) {
        assert!(x != y, "multigraph self-loop");
        self.mult[x * self.n + y] += m;
        self.mult[y * self.n + x] += m;
    }

    /// Sum of multiplicities over unordered pairs.
    pub fn total_multiplicity(&self) -> u64 {
        let mut total = 0;
        for x in 0..self.n {
            for y in x + 1..self.n {
                total += self.multiplicity(x, y);
            }
        }
        total
    }

    /// Merges blocks according to `group[x]` (a block index in `0..groups`).
    pub fn contract(&self, group: &[usize], groups: usize) -> MultiGraph {
        let mut out = MultiGraph::new(groups);
        for x in 0..self.n {
            for y in x + 1..self.n {
                let m = self.multiplicity(x, y);
                if m > 0 && group[x] != group[y] {
                    out.add_edges(group[x], group[y], m);
                }
            }
        }
        out
    }
}

/// Contracts each block of `blocks` to a single node, keeping cross-block
/// edges with multiplicity and discarding intra-block edges.
pub fn quotient_multigraph(g: &Graph, blocks: &[Vec<NodeId>]) -> Result<MultiGraph> {
    let n = g.node_count();
    let mut block_of = vec![usize::MAX; n];
    for (b, block) in blocks.iter().enumerate() {
        if block.is_empty() {
            return Err(Error::InvalidPartition(format!("block {b} is empty")));
        }
        for &v in block {
            if v >= n {
                return Err(Error::UnknownNode(v.to_string()));
            }
            if block_of[v] != usize::MAX {
                return Err(Error::InvalidPartition(format!(
                    "node {} in two blocks",
                    g.label(v)
                )));
            }
            block_of[v] = b;
        }
    }
    if let Some(v) = block_of.iter().position(|&b| b == usize::MAX) {
        return Err(Error::InvalidPartition(format!(
            "node {} not covered",
            g.label(v)
        )));
    }
    for (b, block) in blocks.iter().enumerate() {
        let mut member = vec![false; n];
        for &v in block {
            member[v] = true;
        }
        if !g.is_connected_set(&member) {
            return Err(Error::InvalidPartition(format!(
                "block {b} is disconnected"
            )));
        }
    }
    Ok(quotient_of_assignment(g, &block_of, blocks.len()))
}

/// Quotient multigraph for a block assignment, without validation.
pub(crate) fn quotient_of_assignment(g: &Graph, block_of: &[usize], blocks: usize) -> MultiGraph {
    let mut q = MultiGraph::new(blocks);
    for &(u, v) in g.edges() {
        let (a, b) = (block_of[u], block_of[v]);
        if a != b {
            q.add_edges(a, b, 1);
        }
    }
    q
}
