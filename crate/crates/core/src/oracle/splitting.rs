//! Splitting orders and the exact law of the simultaneous-cut sampler under
//! exact balance.

use std::collections::HashMap;

use num_bigint::BigInt;
use num_rational::BigRational;
use num_traits::{One, Zero};

use crate::error::{Error, Result};
use crate::graph::{
    for_each_spanning_tree, quotient_of_assignment, spanning_tree_count, Graph, MultiGraph, NodeId,
};
use crate::plan::{Balance, Epsilon, Plan};
use crate::trees::SpanningTree;

use super::{enumerate_plans, ExactDistribution};

/// Guard on spanning trees enumerated per collection.
pub const DEFAULT_TREE_GUARD: u64 = 2_000_000;

/// Rooted unordered hierarchy over district indices. Children partition the
/// parent's set and are sorted by their smallest index; leaves are
/// singletons.
#[derive(Clone, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct SplittingOrder {
    pub districts: Vec<usize>,
    pub children: Vec<SplittingOrder>,
}

impl SplittingOrder {
    fn leaf(i: usize) -> SplittingOrder {
        SplittingOrder {
            districts: vec![i],
            children: Vec::new(),
        }
    }

    pub fn is_leaf(&self) -> bool {
        self.children.is_empty()
    }

    /// Every split as its list of parts, parents before children.
    pub fn splits(&self) -> Vec<Vec<Vec<usize>>> {
        let mut out = Vec::new();
        self.walk(&mut |node| {
            if !node.is_leaf() {
                out.push(node.children.iter().map(|c| c.districts.clone()).collect());
            }
        });
        out
    }

    /// Every collection (part of some split), excluding the root.
    pub fn collections(&self) -> Vec<Vec<usize>> {
        let mut out = Vec::new();
        self.walk(&mut |node| out.extend(node.children.iter().map(|c| c.districts.clone())));
        out
    }

    /// Sorts children recursively; idempotent.
    pub fn canonicalize(&mut self) {
        self.districts.sort_unstable();
        for c in &mut self.children {
            c.canonicalize();
        }
        self.children
            .sort_by(|a, b| a.districts[0].cmp(&b.districts[0]));
    }

    fn walk<F: FnMut(&SplittingOrder)>(&self, f: &mut F) {
        f(self);
        for c in &self.children {
            c.walk(f);
        }
    }
}

type DMask = u64;

fn mask_of(ids: &[usize]) -> DMask {
    ids.iter().fold(0, |m, &i| m | (1 << i))
}

fn ids_of(mut m: DMask) -> Vec<usize> {
    let mut out = Vec::new();
    while m != 0 {
        out.push(m.trailing_zeros() as usize);
        m &= m - 1;
    }
    out
}

/// A plan seen at district level: boundary multiplicities `e_ij` and cached
/// splittable / un-splittable tree counts for unions of districts.
pub struct DistrictStructure<'a> {
    g: &'a Graph,
    plan: &'a Plan,
    quotient: MultiGraph,
    counts: TreeCounts,
}

/// `(ST_0, ST_+)` per node set, shareable between plans of one graph.
#[derive(Clone, Debug)]
pub struct TreeCounts {
    ideal: u64,
    guard: u64,
    map: HashMap<Vec<NodeId>, (u64, u64)>,
}

impl TreeCounts {
    pub fn new(ideal: u64, guard: u64) -> Result<TreeCounts> {
        if ideal == 0 {
            return Err(Error::InvalidParameter(
                "ideal population must be positive".into(),
            ));
        }
        Ok(TreeCounts {
            ideal,
            guard,
            map: HashMap::new(),
        })
    }

    /// Counts for the sorted node set `nodes`; a single district (`leaf`)
    /// gets `(ST, 0)` from the matrix-tree theorem.
    fn get(&mut self, g: &Graph, nodes: Vec<NodeId>, leaf: bool) -> Result<(u64, u64)> {
        if let Some(&c) = self.map.get(&nodes) {
            return Ok(c);
        }
        let sub = g.induced_subgraph(&nodes)?;
        let c = if leaf {
            let st = spanning_tree_count(&sub.graph);
            let st = u64::try_from(st)
                .map_err(|_| Error::InvalidParameter("tree count overflows u64".into()))?;
            (st, 0)
        } else {
            classify_trees(&sub.graph, self.ideal, self.guard)?
        };
        self.map.insert(nodes, c);
        Ok(c)
    }
}

fn classify_trees(g: &Graph, ideal: u64, guard: u64) -> Result<(u64, u64)> {
    let (mut st0, mut st_plus) = (0u64, 0u64);
    let mut failure = None;
    for_each_spanning_tree(g, guard, |edges| match SpanningTree::from_edges(g, edges) {
        Ok(t) => {
            if t.edge_children().any(|c| t.below_pop(c) % ideal == 0) {
                st_plus += 1;
            } else {
                st0 += 1;
            }
        }
        Err(e) => failure = Some(e),
    })?;
    match failure {
        Some(e) => Err(e),
        None => Ok((st0, st_plus)),
    }
}

impl<'a> DistrictStructure<'a> {
    pub fn new(
        g: &'a Graph,
        plan: &'a Plan,
        ideal: u64,
        guard: u64,
    ) -> Result<DistrictStructure<'a>> {
        DistrictStructure::with_counts(g, plan, TreeCounts::new(ideal, guard)?)
    }

    pub fn with_counts(
        g: &'a Graph,
        plan: &'a Plan,
        counts: TreeCounts,
    ) -> Result<DistrictStructure<'a>> {
        if plan.k() > DMask::BITS as usize {
            return Err(Error::InvalidParameter(format!(
                "at most 64 districts, got {}",
                plan.k()
            )));
        }
        Ok(DistrictStructure {
            g,
            plan,
            quotient: quotient_of_assignment(g, plan.assignment(), plan.k()),
            counts,
        })
    }

    pub fn into_counts(self) -> TreeCounts {
        self.counts
    }

    pub fn k(&self) -> usize {
        self.plan.k()
    }

    /// Boundary edges between districts `i` and `j`.
    pub fn e(&self, i: usize, j: usize) -> u64 {
        self.quotient.multiplicity(i, j)
    }

    fn connected(&self, m: DMask) -> bool {
        if m == 0 {
            return false;
        }
        let mut seen: DMask = m & m.wrapping_neg();
        loop {
            let mut grown = seen;
            for i in ids_of(seen) {
                for j in ids_of(m & !grown) {
                    if self.e(i, j) > 0 {
                        grown |= 1 << j;
                    }
                }
            }
            if grown == seen {
                return seen == m;
            }
            seen = grown;
        }
    }

    /// `C(A)`: spanning trees of the quotient multigraph of the split.
    pub fn split_count(&self, parts: &[Vec<usize>]) -> BigInt {
        let mut q = MultiGraph::new(parts.len());
        for (x, px) in parts.iter().enumerate() {
            for (y, py) in parts.iter().enumerate().skip(x + 1) {
                let m: u64 = px
                    .iter()
                    .flat_map(|&i| py.iter().map(move |&j| self.e(i, j)))
                    .sum();
                if m > 0 {
                    q.add_edges(x, y, m);
                }
            }
        }
        spanning_tree_count(&q)
    }

    /// `(ST_0, ST_+)` for the union of the districts in `collection`.
    pub fn counts(&mut self, collection: &[usize]) -> Result<(u64, u64)> {
        let m = mask_of(collection);
        let nodes: Vec<NodeId> = (0..self.g.node_count())
            .filter(|&v| m >> self.plan.district_of(v) & 1 == 1)
            .collect();
        self.counts.get(self.g, nodes, collection.len() == 1)
    }

    /// Spanning trees of the collection whose full cut leaves it whole:
    /// `ST` for a single district, `ST_0` otherwise.
    fn intact(&mut self, collection: &[usize]) -> Result<u64> {
        let (st0, _) = self.counts(collection)?;
        Ok(st0)
    }

    fn st_plus(&mut self, collection: &[usize]) -> Result<u64> {
        let (_, plus) = self.counts(collection)?;
        if plus == 0 {
            return Err(Error::Unsplittable);
        }
        Ok(plus)
    }

    /// Probability that one simultaneous cut of the union of `parent`
    /// yields exactly `parts`.
    pub fn split_probability(
        &mut self,
        parent: &[usize],
        parts: &[Vec<usize>],
    ) -> Result<BigRational> {
        let mut num = self.split_count(parts);
        for part in parts {
            num *= self.intact(part)?;
        }
        Ok(BigRational::new(num, BigInt::from(self.st_plus(parent)?)))
    }

    /// Partitions of `m` into at least two connected district unions.
    fn splits_of(&self, m: DMask) -> Vec<Vec<DMask>> {
        let mut out = Vec::new();
        self.partitions(m, &mut Vec::new(), &mut out);
        out.retain(|p| p.len() >= 2);
        out
    }

    fn partitions(&self, rest: DMask, current: &mut Vec<DMask>, out: &mut Vec<Vec<DMask>>) {
        if rest == 0 {
            out.push(current.clone());
            return;
        }
        let low = rest & rest.wrapping_neg();
        let others = rest & !low;
        // every submask of `others`, with `low` added
        let mut sub = others;
        loop {
            let block = sub | low;
            if self.connected(block) {
                current.push(block);
                self.partitions(rest & !block, current, out);
                current.pop();
            }
            if sub == 0 {
                break;
            }
            sub = (sub - 1) & others;
        }
    }

    fn orders_of(&self, m: DMask) -> Vec<SplittingOrder> {
        if m.count_ones() == 1 {
            return vec![SplittingOrder::leaf(m.trailing_zeros() as usize)];
        }
        let mut out = Vec::new();
        for split in self.splits_of(m) {
            let mut combos: Vec<Vec<SplittingOrder>> = vec![Vec::new()];
            for &part in &split {
                let sub = self.orders_of(part);
                combos = combos
                    .into_iter()
                    .flat_map(|prefix| {
                        sub.iter().map(move |o| {
                            let mut next = prefix.clone();
                            next.push(o.clone());
                            next
                        })
                    })
                    .collect();
            }
            for children in combos {
                let mut order = SplittingOrder {
                    districts: ids_of(m),
                    children,
                };
                order.canonicalize();
                out.push(order);
            }
        }
        out.sort();
        out
    }

    /// All splitting orders of the plan.
    pub fn splitting_orders(&self) -> Vec<SplittingOrder> {
        let all = if self.k() == 64 {
            DMask::MAX
        } else {
            (1 << self.k()) - 1
        };
        self.orders_of(all)
    }

    /// The closed-form term of one splitting order:
    /// `prod ST({i}) / ST_+(root) * prod_A C(A) * prod_S Omega(S)`, with `S`
    /// over non-root collections of more than one district.
    pub fn formula_term(&mut self, order: &SplittingOrder) -> Result<BigRational> {
        let mut num = BigInt::one();
        for i in 0..self.k() {
            num *= self.intact(&[i])?;
        }
        let mut q = BigRational::new(num, BigInt::from(self.st_plus(&order.districts)?));
        for split in order.splits() {
            q *= BigRational::from_integer(self.split_count(&split));
        }
        for s in order.collections() {
            if s.len() > 1 {
                let (st0, plus) = self.counts(&s)?;
                if plus == 0 {
                    return Err(Error::Unsplittable);
                }
                q *= BigRational::new(BigInt::from(st0), BigInt::from(plus));
            }
        }
        Ok(q)
    }

    /// The same term as a product of per-split probabilities.
    pub fn split_product(&mut self, order: &SplittingOrder) -> Result<BigRational> {
        let mut q = BigRational::one();
        let mut nodes = Vec::new();
        order.walk(&mut |n| nodes.push(n.clone()));
        for node in nodes.iter().filter(|n| !n.is_leaf()) {
            let parts: Vec<Vec<usize>> =
                node.children.iter().map(|c| c.districts.clone()).collect();
            q *= self.split_probability(&node.districts, &parts)?;
        }
        Ok(q)
    }

    /// Probability of the plan by memoized recursion over district unions,
    /// without listing splitting orders.
    pub fn recursive_probability(&mut self) -> Result<BigRational> {
        let all = if self.k() == 64 {
            DMask::MAX
        } else {
            (1 << self.k()) - 1
        };
        let mut memo = HashMap::new();
        self.prob_of(all, &mut memo)
    }

    fn prob_of(&mut self, m: DMask, memo: &mut HashMap<DMask, BigRational>) -> Result<BigRational> {
        if m.count_ones() == 1 {
            return Ok(BigRational::one());
        }
        if let Some(q) = memo.get(&m) {
            return Ok(q.clone());
        }
        let mut total = BigRational::zero();
        for split in self.splits_of(m) {
            let parts: Vec<Vec<usize>> = split.iter().map(|&p| ids_of(p)).collect();
            let mut q = self.split_probability(&ids_of(m), &parts)?;
            if q.is_zero() {
                continue;
            }
            for &p in &split {
                q *= self.prob_of(p, memo)?;
            }
            total += q;
        }
        memo.insert(m, total.clone());
        Ok(total)
    }
}

fn ideal_of(g: &Graph, k: usize) -> Result<u64> {
    let b = Balance::exact(g.total_pop(), k)?;
    Ok(b.total() / k as u64)
}

/// All splitting orders of a plan.
pub fn enumerate_splitting_orders(g: &Graph, plan: &Plan) -> Result<Vec<SplittingOrder>> {
    let ideal = ideal_of(g, plan.k())?;
    Ok(DistrictStructure::new(g, plan, ideal, DEFAULT_TREE_GUARD)?.splitting_orders())
}

/// `C(A)` for a split given as lists of district indices.
pub fn split_tree_count(g: &Graph, plan: &Plan, split: &[Vec<usize>]) -> Result<BigInt> {
    let ideal = ideal_of(g, plan.k())?;
    Ok(DistrictStructure::new(g, plan, ideal, DEFAULT_TREE_GUARD)?.split_count(split))
}

/// `(ST_0, ST_+)` for the union of a collection of districts. A tree is
/// splittable when some edge separates a positive multiple of `ideal`.
pub fn splittability_counts(
    g: &Graph,
    plan: &Plan,
    collection: &[usize],
    ideal: u64,
    guard: u64,
) -> Result<(u64, u64)> {
    let nodes: Vec<NodeId> = (0..g.node_count())
        .filter(|&v| collection.contains(&plan.district_of(v)))
        .collect();
    // a lone district is classified as a piece here, not treated as a leaf
    let (st0, plus) = classify_trees(&g.induced_subgraph(&nodes)?.graph, ideal, guard)?;
    if plus == 0 {
        return Err(Error::Unsplittable);
    }
    Ok((st0, plus))
}

/// One splitting order with its probability computed both ways.
#[derive(Clone, Debug)]
pub struct OrderTerm {
    pub order: SplittingOrder,
    pub formula: BigRational,
    pub split_product: BigRational,
}

/// Every splitting order of `plan` with its closed-form term and its
/// per-split product.
pub fn splitting_order_terms(g: &Graph, plan: &Plan) -> Result<Vec<OrderTerm>> {
    let ideal = ideal_of(g, plan.k())?;
    let mut ds = DistrictStructure::new(g, plan, ideal, DEFAULT_TREE_GUARD)?;
    ds.splitting_orders()
        .into_iter()
        .map(|order| {
            let formula = ds.formula_term(&order)?;
            let split_product = ds.split_product(&order)?;
            Ok(OrderTerm {
                order,
                formula,
                split_product,
            })
        })
        .collect()
}

/// Probability of `plan` under the simultaneous-cut sampler by direct
/// recursion.
pub fn algorithm2_probability_recursive(g: &Graph, plan: &Plan) -> Result<BigRational> {
    let ideal = ideal_of(g, plan.k())?;
    DistrictStructure::new(g, plan, ideal, DEFAULT_TREE_GUARD)?.recursive_probability()
}

/// Exact law of the simultaneous-cut sampler at exact balance: the sum of
/// closed-form splitting-order terms for every plan.
pub fn algorithm2_distribution(g: &Graph, k: usize) -> Result<ExactDistribution> {
    let ideal = ideal_of(g, k)?;
    let plans = enumerate_plans(g, k, Epsilon::ZERO, super::DEFAULT_STATE_CAP)?;
    if plans.is_empty() {
        return Err(Error::NoValidPlans);
    }
    let mut entries = Vec::with_capacity(plans.len());
    let mut counts = TreeCounts::new(ideal, DEFAULT_TREE_GUARD)?;
    for plan in plans {
        let mut ds = DistrictStructure::with_counts(g, &plan, counts)?;
        let mut q = BigRational::zero();
        for order in ds.splitting_orders() {
            q += ds.formula_term(&order)?;
        }
        counts = ds.into_counts();
        if !q.is_zero() {
            entries.push((plan, q));
        }
    }
    Ok(ExactDistribution::from_probabilities(entries))
}
