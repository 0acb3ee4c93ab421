//! Rooted spanning trees with subtree populations, and cut-edge analysis.

mod sample;

pub use sample::{load_edge_bias, random_weight_mst, wilson_ust, EdgeBias, TreeDrawer, TreeSource};

use num_rational::Ratio;

use crate::error::{Error, Result};
use crate::graph::{Graph, NodeId};
use crate::plan::{Balance, Phi};

const NONE: usize = usize::MAX;

/// A spanning tree of some host node set, rooted, with the population below
/// every edge. Tree nodes are addressed by local index `0..len()`; `nodes()`
/// maps them to host ids. The edge joining a non-root node to its parent is
/// identified by that child.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct SpanningTree {
    nodes: Vec<NodeId>,
    pops: Vec<u64>,
    parent: Vec<usize>,
    order: Vec<usize>,
    below: Vec<u64>,
}

impl SpanningTree {
    /// Builds a tree from a parent array (`parent[root] == usize::MAX`).
    pub(crate) fn from_parents(
        nodes: Vec<NodeId>,
        pops: Vec<u64>,
        parent: Vec<usize>,
        root: usize,
    ) -> SpanningTree {
        let n = parent.len();
        let mut start = vec![0usize; n + 1];
        for (v, &p) in parent.iter().enumerate() {
            if v != root {
                start[p + 1] += 1;
            }
        }
        for i in 0..n {
            start[i + 1] += start[i];
        }
        let mut fill = start.clone();
        let mut children = vec![0usize; n.saturating_sub(1)];
        for (v, &p) in parent.iter().enumerate() {
            if v != root {
                children[fill[p]] = v;
                fill[p] += 1;
            }
        }
        let mut order = Vec::with_capacity(n);
        let mut stack = vec![root];
        while let Some(u) = stack.pop() {
            order.push(u);
            stack.extend_from_slice(&children[start[u]..start[u + 1]]);
        }
        debug_assert_eq!(order.len(), n, "parent array is not a tree");
        let mut below = pops.clone();
        for &v in order.iter().rev() {
            if v != root {
                below[parent[v]] += below[v];
            }
        }
        SpanningTree {
            nodes,
            pops,
            parent,
            order,
            below,
        }
    }

    /// Tree of `g` given by edge indices, rooted at local node 0.
    pub fn from_edges(g: &Graph, edge_indices: &[usize]) -> Result<SpanningTree> {
        let n = g.node_count();
        if edge_indices.len() + 1 != n {
            return Err(Error::InvalidParameter("edge count is not n - 1".into()));
        }
        let mut adj = vec![Vec::new(); n];
        for &e in edge_indices {
            let (u, v) = g.edges()[e];
            adj[u].push(v);
            adj[v].push(u);
        }
        let mut parent = vec![NONE; n];
        let mut seen = vec![false; n];
        seen[0] = true;
        let mut stack = vec![0];
        let mut count = 1;
        while let Some(u) = stack.pop() {
            for &w in &adj[u] {
                if !seen[w] {
                    seen[w] = true;
                    parent[w] = u;
                    count += 1;
                    stack.push(w);
                }
            }
        }
        if count != n {
            return Err(Error::Disconnected);
        }
        Ok(SpanningTree::from_parents(
            (0..n).collect(),
            g.pops().to_vec(),
            parent,
            0,
        ))
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    /// Host id of every local node.
    pub fn nodes(&self) -> &[NodeId] {
        &self.nodes
    }

    pub fn root(&self) -> usize {
        self.order[0]
    }

    pub fn parent(&self, v: usize) -> Option<usize> {
        (self.parent[v] != NONE).then_some(self.parent[v])
    }

    pub fn total_pop(&self) -> u64 {
        self.below[self.root()]
    }

    /// Population of the subtree hanging from `child` (the far side of its
    /// parent edge, seen from the root).
    pub fn below_pop(&self, child: usize) -> u64 {
        self.below[child]
    }

    /// Local indices of all edge children, in preorder.
    pub fn edge_children(&self) -> impl Iterator<Item = usize> + '_ {
        self.order[1..].iter().copied()
    }

    /// Tree edges as `(child, parent)` host-id pairs.
    pub fn edges(&self) -> impl Iterator<Item = (NodeId, NodeId)> + '_ {
        self.edge_children()
            .map(move |c| (self.nodes[c], self.nodes[self.parent[c]]))
    }

    /// Edges as sorted `(min, max)` host-id pairs, sorted.
    pub fn canonical_edges(&self) -> Vec<(NodeId, NodeId)> {
        let mut e: Vec<_> = self.edges().map(|(a, b)| (a.min(b), a.max(b))).collect();
        e.sort_unstable();
        e
    }

    /// The local child identifying the tree edge between host nodes `u`, `v`.
    pub fn edge_child(&self, u: NodeId, v: NodeId) -> Option<usize> {
        let lu = self.nodes.iter().position(|&x| x == u)?;
        let lv = self.nodes.iter().position(|&x| x == v)?;
        if self.parent[lu] == lv {
            Some(lu)
        } else if self.parent[lv] == lu {
            Some(lv)
        } else {
            None
        }
    }

    /// Maps host ids through `map` (e.g. subgraph ids to parent-graph ids).
    pub fn relabel(mut self, map: &[NodeId]) -> SpanningTree {
        for v in &mut self.nodes {
            *v = map[*v];
        }
        self
    }

    /// Local indices of the subtree below `child`, `child` first.
    fn subtree(&self, child: usize) -> Vec<usize> {
        let mut inside = vec![false; self.len()];
        inside[child] = true;
        let mut out = vec![child];
        let pos = self.order.iter().position(|&v| v == child).unwrap();
        for &v in &self.order[pos + 1..] {
            // preorder subtrees are contiguous
            if !inside[self.parent[v]] {
                break;
            }
            inside[v] = true;
            out.push(v);
        }
        out
    }

    /// Restriction to `locals` (a connected subset containing `root`, listed
    /// in preorder), rooted at `root`.
    fn restrict(&self, locals: &[usize], root: usize) -> SpanningTree {
        let mut index = vec![NONE; self.len()];
        for (i, &v) in locals.iter().enumerate() {
            index[v] = i;
        }
        let parent = locals
            .iter()
            .map(|&v| {
                if v == root {
                    NONE
                } else {
                    index[self.parent[v]]
                }
            })
            .collect();
        let nodes = locals.iter().map(|&v| self.nodes[v]).collect();
        let pops = locals.iter().map(|&v| self.pops[v]).collect();
        SpanningTree::from_parents(nodes, pops, parent, index[root])
    }

    /// Removes the edge above `child`, returning the trees on the far side
    /// (rooted at `child`) and the near side (rooted at the current root).
    pub fn split_at(&self, child: usize) -> (SpanningTree, SpanningTree) {
        assert!(
            child < self.len() && self.parent[child] != NONE,
            "not an edge child"
        );
        let below = self.subtree(child);
        let mut inside = vec![false; self.len()];
        for &v in &below {
            inside[v] = true;
        }
        let above: Vec<usize> = self.order.iter().copied().filter(|&v| !inside[v]).collect();
        (
            self.restrict(&below, child),
            self.restrict(&above, self.root()),
        )
    }

    /// Host-id node sets of the components left after removing the edges
    /// above every child in `cut`, each sorted, ordered by smallest node.
    pub fn components_after_cutting(&self, cut: &[usize]) -> Vec<Vec<NodeId>> {
        let mut is_cut = vec![false; self.len()];
        for &c in cut {
            is_cut[c] = true;
        }
        let mut comp = vec![0usize; self.len()];
        let mut count = 1;
        for &v in &self.order[1..] {
            comp[v] = if is_cut[v] {
                count += 1;
                count - 1
            } else {
                comp[self.parent[v]]
            };
        }
        let mut out = vec![Vec::new(); count];
        for (v, &c) in comp.iter().enumerate() {
            out[c].push(self.nodes[v]);
        }
        for part in &mut out {
            part.sort_unstable();
        }
        out.sort_unstable_by_key(|p| p[0]);
        out
    }

    /// Checks structural invariants (used in tests).
    pub fn check_invariants(&self) -> bool {
        let n = self.len();
        let root = self.root();
        let mut expect = self.pops.clone();
        for &v in self.order.iter().rev() {
            if v != root {
                expect[self.parent[v]] += expect[v];
            }
        }
        let below_ok = self
            .edge_children()
            .all(|c| self.below[c] > 0 && self.below[c] < self.total_pop());
        self.order.len() == n && expect == self.below && below_ok
    }
}

/// Splits `t` at the tree edge `{u, v}` (host ids).
pub fn split_tree(t: &SpanningTree, u: NodeId, v: NodeId) -> Result<(SpanningTree, SpanningTree)> {
    let child = t.edge_child(u, v).ok_or(Error::NotTreeEdge(u, v))?;
    Ok(t.split_at(child))
}

/// Edges whose far side holds a positive multiple of `ideal` strictly less
/// than the tree's population (exact balance). Returns edge children.
pub fn valid_cut_edges_exact(t: &SpanningTree, ideal: Ratio<u64>) -> Vec<usize> {
    let (num, den) = (*ideal.numer() as u128, *ideal.denom() as u128);
    let total = t.total_pop();
    t.edge_children()
        .filter(|&c| {
            let b = t.below_pop(c);
            b < total && (b as u128 * den).is_multiple_of(num)
        })
        .collect()
}

/// A candidate split: removing `edge` leaves `below_pop` on the far side,
/// to hold `k1` districts, and the rest for `k2`.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct CutTriple {
    pub child: usize,
    pub edge: (NodeId, NodeId),
    pub below_pop: u64,
    pub k1: usize,
    pub k2: usize,
    pub delta1: Ratio<u128>,
    pub delta2: Ratio<u128>,
}

impl CutTriple {
    pub fn imbalance(&self) -> usize {
        self.k1.abs_diff(self.k2)
    }

    pub fn max_delta(&self) -> Ratio<u128> {
        self.delta1.max(self.delta2)
    }
}

/// All `(edge, k1, k2)` with `k1 + k2 = k`, both positive, where each side
/// deviates from `k_i` ideal populations by at most `phi(k_i) * eps`.
pub fn valid_cut_triples(
    t: &SpanningTree,
    balance: &Balance,
    k: usize,
    phi: Phi,
) -> Vec<CutTriple> {
    let mut out = Vec::new();
    if k < 2 {
        return out;
    }
    let total = t.total_pop();
    let eps = balance.epsilon().to_f64();
    let ideal = balance.total() as f64 / balance.k() as f64;
    for c in t.edge_children() {
        let b = t.below_pop(c);
        let a = total - b;
        // |b/I - k1| <= k1 * eps bounds k1 to [x / (1 + eps), x / (1 - eps)]
        let x = b as f64 / ideal;
        let lo = ((x / (1.0 + eps)).floor() as usize)
            .saturating_sub(1)
            .max(1);
        let hi = if eps < 1.0 {
            (((x / (1.0 - eps)).ceil()) as usize + 1).min(k - 1)
        } else {
            k - 1
        };
        for k1 in lo..=hi {
            let k2 = k - k1;
            if balance.piece_ok(b, k1, phi.multiplier(k1))
                && balance.piece_ok(a, k2, phi.multiplier(k2))
            {
                out.push(CutTriple {
                    child: c,
                    edge: (t.nodes[c], t.nodes[t.parent[c]]),
                    below_pop: b,
                    k1,
                    k2,
                    delta1: balance.deviation(b, k1),
                    delta2: balance.deviation(a, k2),
                });
            }
        }
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::graph::build_grid;
    use crate::plan::Epsilon;

    fn path_tree(pops: &[u64]) -> SpanningTree {
        let n = pops.len();
        let parent = (0..n).map(|v| if v == 0 { NONE } else { v - 1 }).collect();
        SpanningTree::from_parents((0..n).collect(), pops.to_vec(), parent, 0)
    }

    /// Pops of the constructed 20-node path: 11, ten 9s, nine 11s.
    pub(crate) fn figure_three_pops() -> Vec<u64> {
        let mut p = vec![11];
        p.extend(std::iter::repeat_n(9, 10));
        p.extend(std::iter::repeat_n(11, 9));
        p
    }

    #[test]
    fn exact_cuts_on_path() {
        let t = path_tree(&[1, 1, 1, 1]);
        // edge child c separates nodes c.. from the root side
        assert_eq!(valid_cut_edges_exact(&t, Ratio::new(2, 1)), vec![2]);
        assert_eq!(valid_cut_edges_exact(&t, Ratio::new(1, 1)), vec![1, 2, 3]);
    }

    #[test]
    fn triples_on_unit_path() {
        let t = path_tree(&[1, 1, 1, 1]);
        let b = Balance::exact(4, 2).unwrap();
        let triples = valid_cut_triples(&t, &b, 2, Phi::One);
        assert_eq!(triples.len(), 1);
        let tr = &triples[0];
        assert_eq!((tr.edge, tr.k1, tr.k2), ((2, 1), 1, 1));
        assert_eq!((tr.delta1, tr.delta2), (Ratio::new(0, 1), Ratio::new(0, 1)));
    }

    #[test]
    fn figure_three_triples() {
        let pops = figure_three_pops();
        assert_eq!(pops.iter().take(11).sum::<u64>(), 101);
        // root at the right end so the far side of each edge is the left part
        let n = pops.len();
        let parent = (0..n)
            .map(|v| if v == n - 1 { NONE } else { v + 1 })
            .collect();
        let t = SpanningTree::from_parents((0..n).collect(), pops.clone(), parent, n - 1);
        let b = Balance::new(200, 20, "0.1".parse().unwrap()).unwrap();
        let strict = valid_cut_triples(&t, &b, 20, Phi::One);
        let e2 = strict
            .iter()
            .find(|tr| tr.below_pop == 101)
            .expect("101/99 split present");
        assert_eq!((e2.k1, e2.k2), (10, 10));
        assert_eq!(
            (e2.delta1, e2.delta2),
            (Ratio::new(1, 10), Ratio::new(1, 10))
        );
        let mut shapes: Vec<_> = strict.iter().map(|tr| (tr.below_pop, tr.k1)).collect();
        shapes.sort();
        assert_eq!(
            shapes,
            vec![(11, 1), (20, 2), (29, 3), (101, 10), (189, 19)]
        );

        let loose = valid_cut_triples(&t, &b, 20, Phi::Identity);
        assert!(loose.len() > strict.len());
        assert!(strict.iter().all(|s| loose.contains(s)));
        // the 92/108 split carrying 9 + 11 districts is only valid when loosened
        assert!(loose.iter().any(|tr| tr.below_pop == 92 && tr.k1 == 9));
        assert!(!strict.iter().any(|tr| tr.below_pop == 92));
    }

    #[test]
    fn zero_epsilon_triples_match_exact_cuts() {
        let g = build_grid(3, 4, 1).unwrap();
        let trees = crate::graph::enumerate_spanning_trees(&g, 10_000).unwrap();
        let b = Balance::exact(12, 4).unwrap();
        for edges in trees.iter().step_by(37) {
            let t = SpanningTree::from_edges(&g, edges).unwrap();
            let exact = valid_cut_edges_exact(&t, b.ideal());
            for phi in [Phi::One, Phi::Identity] {
                let triples = valid_cut_triples(&t, &b, 4, phi);
                let got: Vec<(usize, usize, usize)> =
                    triples.iter().map(|tr| (tr.child, tr.k1, tr.k2)).collect();
                let want: Vec<(usize, usize, usize)> = exact
                    .iter()
                    .map(|&c| {
                        let k1 = (t.below_pop(c) / 3) as usize;
                        (c, k1, 4 - k1)
                    })
                    .collect();
                assert_eq!(got, want);
            }
        }
    }

    #[test]
    fn strict_phi_rounds() {
        // eps < 0.25 and phi = 1: at most one triple per edge, k_i = round
        let pops: Vec<u64> = (0..40).map(|i| 20 + (i * 7 % 11)).collect();
        let b = Balance::new(pops.iter().sum(), 10, Epsilon::new(1, 5).unwrap()).unwrap();
        let t = path_tree(&pops);
        let triples = valid_cut_triples(&t, &b, 10, Phi::One);
        assert!(!triples.is_empty());
        let mut seen = std::collections::HashSet::new();
        for tr in &triples {
            assert!(seen.insert(tr.child));
            assert_eq!(tr.k1, b.rounded_parts(tr.below_pop));
            assert_eq!(tr.k2, b.rounded_parts(t.total_pop() - tr.below_pop));
        }
    }

    #[test]
    fn splitting() {
        let t = path_tree(&[1, 1, 1, 1]);
        let (below, above) = split_tree(&t, 1, 2).unwrap();
        assert_eq!(below.nodes(), &[2, 3]);
        assert_eq!(above.nodes(), &[0, 1]);
        assert!(below.check_invariants() && above.check_invariants());
        assert!(matches!(
            split_tree(&t, 0, 2),
            Err(Error::NotTreeEdge(0, 2))
        ));

        // star centered at 0
        let star =
            SpanningTree::from_parents(vec![0, 1, 2, 3], vec![1, 2, 3, 4], vec![NONE, 0, 0, 0], 0);
        for leaf in 1..4 {
            let (b, a) = star.split_at(leaf);
            assert_eq!(b.len(), 1);
            assert_eq!(a.len(), 3);
            assert_eq!(b.total_pop() + a.total_pop(), star.total_pop());
        }
    }
}
