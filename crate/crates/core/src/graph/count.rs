use num_bigint::BigInt;
use num_traits::{Signed, ToPrimitive, Zero};

use super::{Graph, MultiGraph};
use crate::dsu::Dsu;
use crate::error::{Error, Result};

/// Anything with an integer Laplacian (simple graphs and multigraphs).
pub trait Laplacian {
    fn order(&self) -> usize;
    /// Number of parallel edges between distinct nodes `x` and `y`.
    fn weight(&self, x: usize, y: usize) -> u64;

    fn laplacian(&self) -> Vec<Vec<BigInt>> {
        let n = self.order();
        let mut l = vec![vec![BigInt::zero(); n]; n];
        for (x, row) in l.iter_mut().enumerate() {
            for y in (0..n).filter(|&y| y != x) {
                let w = self.weight(x, y);
                if w > 0 {
                    row[y] -= w;
                    row[x] += w;
                }
            }
        }
        l
    }
}

impl Laplacian for Graph {
    fn order(&self) -> usize {
        self.node_count()
    }
    fn weight(&self, x: usize, y: usize) -> u64 {
        u64::from(self.edge_index(x, y).is_some())
    }
    fn laplacian(&self) -> Vec<Vec<BigInt>> {
        let n = self.node_count();
        let mut l = vec![vec![BigInt::zero(); n]; n];
        for &(u, v) in self.edges() {
            l[u][v] -= 1;
            l[v][u] -= 1;
            l[u][u] += 1;
            l[v][v] += 1;
        }
        l
    }
}

impl Laplacian for MultiGraph {
    fn order(&self) -> usize {
        self.node_count()
    }
    fn weight(&self, x: usize, y: usize) -> u64 {
        self.multiplicity(x, y)
    }
}

/// Exact number of spanning trees (matrix-tree theorem). A single node has
/// one spanning tree; a disconnected input returns 0.
pub fn spanning_tree_count<L: Laplacian + ?Sized>(g: &L) -> BigInt {
    let n = g.order();
    if n <= 1 {
        return BigInt::from(u8::from(n == 1));
    }
    let mut m: Vec<Vec<BigInt>> = g
        .laplacian()
        .into_iter()
        .skip(1)
        .map(|row| row.into_iter().skip(1).collect())
        .collect();
    bareiss_determinant(&mut m).abs()
}

/// Fraction-free Gaussian elimination; every intermediate division is exact.
fn bareiss_determinant(m: &mut [Vec<BigInt>]) -> BigInt {
    let n = m.len();
    let mut sign = 1;
    let mut prev = BigInt::from(1);
    for k in 0..n {
        if m[k][k].is_zero() {
            match (k + 1..n).find(|&i| !m[i][k].is_zero()) {
                Some(i) => {
                    m.swap(i, k);
                    sign = -sign;
                }
                None => return BigInt::zero(),
            }
        }
        for i in k + 1..n {
            for j in k + 1..n {
                let v = (&m[i][j] * &m[k][k] - &m[i][k] * &m[k][j]) / &prev;
                m[i][j] = v;
            }
        }
        prev = m[k][k].clone();
    }
    if n == 0 {
        return BigInt::from(1);
    }
    m[n - 1][n - 1].clone() * sign
}

/// Calls `visit` with the edge indices of every spanning tree of `g`,
/// each exactly once (include/exclude branching on edges, pruning
/// exclusions that would disconnect the graph).
///
/// Fails without visiting anything if the matrix-tree count exceeds `guard`.
pub fn for_each_spanning_tree<F: FnMut(&[usize])>(
    g: &Graph,
    guard: u64,
    mut visit: F,
) -> Result<()> {
    let count = spanning_tree_count(g);
    if count > BigInt::from(guard) {
        return Err(Error::GuardExceeded {
            count: count.to_string(),
            guard,
        });
    }
    if count.is_zero() {
        return Err(Error::Disconnected);
    }
    let n = g.node_count();
    let mut chosen = Vec::with_capacity(n.saturating_sub(1));
    branch(g.edges(), n, 0, &mut chosen, Dsu::new(n), &mut visit);
    Ok(())
}

fn branch<F: FnMut(&[usize])>(
    edges: &[(usize, usize)],
    n: usize,
    i: usize,
    chosen: &mut Vec<usize>,
    mut dsu: Dsu,
    visit: &mut F,
) {
    if chosen.len() + 1 == n || n == 1 {
        visit(chosen);
        return;
    }
    if i == edges.len() {
        return;
    }
    let (u, v) = edges[i];
    if !dsu.same(u, v) {
        let mut with = dsu.clone();
        with.union(u, v);
        chosen.push(i);
        branch(edges, n, i + 1, chosen, with, visit);
        chosen.pop();
    }
    let mut rest = dsu.clone();
    for &(a, b) in &edges[i + 1..] {
        rest.union(a, b);
    }
    if rest.sets() == 1 {
        branch(edges, n, i + 1, chosen, dsu, visit);
    }
}

/// All spanning trees of `g` as sorted edge-index lists.
pub fn enumerate_spanning_trees(g: &Graph, guard: u64) -> Result<Vec<Vec<usize>>> {
    let cap = spanning_tree_count(g)
        .to_usize()
        .unwrap_or(0)
        .min(guard as usize);
    let mut out = Vec::with_capacity(cap);
    for_each_spanning_tree(g, guard, |t| out.push(t.to_vec()))?;
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::graph::build_grid;
    use proptest::prelude::*;
    use std::collections::HashSet;

    #[test]
    fn small_counts() {
        assert_eq!(
            spanning_tree_count(&build_grid(2, 2, 1).unwrap()),
            BigInt::from(4)
        );
        assert_eq!(
            spanning_tree_count(&build_grid(1, 1, 1).unwrap()),
            BigInt::from(1)
        );
        assert_eq!(
            spanning_tree_count(&build_grid(2, 3, 1).unwrap()),
            BigInt::from(15)
        );
        assert_eq!(
            spanning_tree_count(&build_grid(1, 5, 1).unwrap()),
            BigInt::from(1)
        );
        let mut two = MultiGraph::new(2);
        two.add_edges(0, 1, 7);
        assert_eq!(spanning_tree_count(&two), BigInt::from(7));
        let g = Graph::new(vec!["a".into(), "b".into()], vec![1, 1], vec![]).unwrap();
        assert_eq!(spanning_tree_count(&g), BigInt::zero());
    }

    #[test]
    fn three_by_three_matches_enumeration() {
        let g = build_grid(3, 3, 1).unwrap();
        let trees = enumerate_spanning_trees(&g, 1_000).unwrap();
        assert_eq!(trees.len(), 192);
        assert_eq!(spanning_tree_count(&g), BigInt::from(192));
    }

    #[test]
    fn cycle_and_path_enumeration() {
        let cycle = build_grid(2, 2, 1).unwrap();
        let trees = enumerate_spanning_trees(&cycle, 100).unwrap();
        assert_eq!(trees.len(), 4);
        let omitted: HashSet<usize> = trees
            .iter()
            .map(|t| (0..4).find(|e| !t.contains(e)).unwrap())
            .collect();
        assert_eq!(omitted.len(), 4);
        let path = build_grid(1, 6, 1).unwrap();
        assert_eq!(enumerate_spanning_trees(&path, 100).unwrap().len(), 1);
        assert!(matches!(
            enumerate_spanning_trees(&build_grid(3, 3, 1).unwrap(), 100),
            Err(Error::GuardExceeded { .. })
        ));
    }

    #[test]
    fn triangle_quotient_formula() {
        // C(i|j|k) = e_ij e_ik + e_ij e_jk + e_ik e_jk
        let (a, b, c) = (2u64, 3u64, 5u64);
        let mut q = MultiGraph::new(3);
        q.add_edges(0, 1, a);
        q.add_edges(0, 2, b);
        q.add_edges(1, 2, c);
        assert_eq!(spanning_tree_count(&q), BigInt::from(a * b + a * c + b * c));
    }

    fn is_tree(n: usize, edges: &[(usize, usize)], tree: &[usize]) -> bool {
        let mut dsu = Dsu::new(n);
        tree.len() + 1 == n && tree.iter().all(|&e| dsu.union(edges[e].0, edges[e].1))
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(64))]
        #[test]
        fn enumeration_matches_matrix_tree(n in 2usize..=8, extra in proptest::collection::vec((0usize..8, 0usize..8), 0..14)) {
            // a random spanning path keeps the graph connected
            let mut edges: Vec<(usize, usize)> = (1..n).map(|v| (v - 1, v)).collect();
            for (a, b) in extra {
                let (a, b) = (a % n, b % n);
                if a != b && !edges.contains(&(a.min(b), a.max(b))) {
                    edges.push((a.min(b), a.max(b)));
                }
            }
            let labels = (0..n).map(|i| i.to_string()).collect();
            let g = Graph::new(labels, vec![1; n], edges).unwrap();
            let trees = enumerate_spanning_trees(&g, 1_000_000).unwrap();
            let distinct: HashSet<Vec<usize>> = trees.iter().cloned().collect();
            prop_assert_eq!(distinct.len(), trees.len());
            prop_assert!(trees.iter().all(|t| is_tree(n, g.edges(), t)));
            prop_assert_eq!(BigInt::from(trees.len()), spanning_tree_count(&g));
        }
    }
}
