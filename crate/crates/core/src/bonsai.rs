//! Independent samplers: Complete Cut, simultaneous cutting, and Bonsai
//! (split one edge at a time, keep the induced subtrees, backtrack).

use std::str::FromStr;

use rand::seq::IndexedRandom;
use rand::Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::graph::{Graph, NodeId};
use crate::plan::{Balance, Epsilon, Phi, Plan};
use crate::rng::{plan_rng, SampleRng};
use crate::trees::{
    valid_cut_edges_exact, valid_cut_triples, CutTriple, EdgeBias, SpanningTree, TreeDrawer,
    TreeSource,
};

/// How the "best" triple is picked among the valid ones.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum BestRule {
    /// Minimize `|k1 - k2|`, then `max(delta1, delta2)`; ties at random.
    MostBalanced,
    /// Uniform over all valid triples.
    UniformRandom,
}

impl FromStr for BestRule {
    type Err = Error;
    fn from_str(s: &str) -> Result<BestRule> {
        match s {
            "balanced" | "most_balanced" => Ok(BestRule::MostBalanced),
            "random" | "uniform_random" => Ok(BestRule::UniformRandom),
            _ => Err(Error::InvalidParameter(format!("unknown best rule {s:?}"))),
        }
    }
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct BonsaiParams {
    #[serde(with = "epsilon_serde")]
    pub epsilon: Epsilon,
    pub phi: Phi,
    pub best: BestRule,
    /// Fresh trees drawn on a piece before it reports failure upward.
    pub max_trees: u32,
    /// Downstream failures tolerated per piece before it fails upward.
    pub max_fails: u32,
    pub tree_source: TreeSource,
    /// Total tree draws allowed for one sample.
    pub global_cap: u64,
    #[serde(skip)]
    pub bias: Option<EdgeBias>,
}

impl Default for BonsaiParams {
    fn default() -> BonsaiParams {
        BonsaiParams {
            epsilon: Epsilon::ZERO,
            phi: Phi::One,
            best: BestRule::MostBalanced,
            max_trees: 10,
            max_fails: 3,
            tree_source: TreeSource::Uniform,
            global_cap: 10_000,
            bias: None,
        }
    }
}

impl BonsaiParams {
    pub fn with_epsilon(mut self, epsilon: Epsilon) -> BonsaiParams {
        self.epsilon = epsilon;
        self
    }

    pub fn with_phi(mut self, phi: Phi) -> BonsaiParams {
        self.phi = phi;
        self
    }

    pub fn with_best(mut self, best: BestRule) -> BonsaiParams {
        self.best = best;
        self
    }

    pub fn with_tree_source(mut self, source: TreeSource) -> BonsaiParams {
        self.tree_source = source;
        self
    }

    /// Backtracking caps high enough that pieces simply redraw until they
    /// split, as in the plain recursive algorithms.
    pub fn without_backtracking(mut self) -> BonsaiParams {
        self.max_trees = u32::MAX;
        self.max_fails = u32::MAX;
        self.global_cap = u64::MAX;
        self
    }

    fn drawer(&self) -> TreeDrawer {
        let drawer = TreeDrawer::new(self.tree_source);
        match &self.bias {
            Some(b) => drawer.with_bias(b.clone()),
            None => drawer,
        }
    }

    fn validate(&self) -> Result<()> {
        if self.max_trees == 0 || self.max_fails == 0 || self.global_cap == 0 {
            return Err(Error::InvalidParameter(
                "max_trees, max_fails and global_cap must be positive".into(),
            ));
        }
        Ok(())
    }
}

mod epsilon_serde {
    use super::Epsilon;
    use serde::{Deserialize, Deserializer, Serializer};

    pub fn serialize<S: Serializer>(e: &Epsilon, s: S) -> Result<S::Ok, S::Error> {
        s.serialize_str(&e.to_string())
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> Result<Epsilon, D::Error> {
        let s = String::deserialize(d)?;
        s.parse().map_err(serde::de::Error::custom)
    }
}

/// One split made while sampling (including splits later undone).
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct SplitRecord {
    pub piece_nodes: usize,
    pub piece_pop: u64,
    pub piece_k: usize,
    pub triple: CutTriple,
}

#[derive(Clone, Debug, Default, PartialEq, Eq)]
pub struct SampleTrace {
    pub trees_drawn: u64,
    pub backtracks: u64,
    pub splits: Vec<SplitRecord>,
}

/// Picks the "best" triple per `rule`.
pub fn best_triple<'t, R: Rng + ?Sized>(
    triples: &'t [CutTriple],
    rule: BestRule,
    rng: &mut R,
) -> Result<&'t CutTriple> {
    if triples.is_empty() {
        return Err(Error::InvalidParameter("no triples to choose from".into()));
    }
    let pick = match rule {
        BestRule::UniformRandom => triples.choose(rng),
        BestRule::MostBalanced => {
            let spread = triples.iter().map(|t| t.imbalance()).min().unwrap();
            let tightest = triples
                .iter()
                .filter(|t| t.imbalance() == spread)
                .map(|t| t.max_delta())
                .min()
                .unwrap();
            let ties: Vec<&CutTriple> = triples
                .iter()
                .filter(|t| t.imbalance() == spread && t.max_delta() == tightest)
                .collect();
            ties.choose(rng).copied()
        }
    };
    Ok(pick.unwrap())
}

fn exact_balance(g: &Graph, k: usize) -> Result<Balance> {
    if k == 0 {
        return Err(Error::InvalidParameter("k must be at least 1".into()));
    }
    Balance::exact(g.total_pop(), k)
}

/// Draws uniform spanning trees until one has exactly `k - 1` valid cut
/// edges, then cuts them all.
pub fn complete_cut<R: Rng + ?Sized>(
    g: &Graph,
    k: usize,
    rng: &mut R,
    max_attempts: u64,
) -> Result<Plan> {
    let balance = exact_balance(g, k)?;
    if !g.is_connected() {
        return Err(Error::Disconnected);
    }
    let drawer = TreeDrawer::new(TreeSource::Uniform);
    for _ in 0..max_attempts {
        let tree = drawer.draw(g, rng);
        let cuts = valid_cut_edges_exact(&tree, balance.ideal());
        if cuts.len() + 1 == k {
            return Plan::from_districts(g.node_count(), &tree.components_after_cutting(&cuts));
        }
    }
    Err(Error::NoCuttableTree(max_attempts))
}

/// Statistics over a batch of uniform spanning trees at exact balance.
#[derive(Clone, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct CuttabilityReport {
    pub trees: u64,
    pub completely_cuttable: u64,
    pub max_valid_edges: usize,
    pub trees_at_max: u64,
}

impl CuttabilityReport {
    pub fn pct_cuttable(&self) -> f64 {
        100.0 * self.completely_cuttable as f64 / self.trees.max(1) as f64
    }

    fn record(&mut self, valid: usize, k: usize) {
        self.trees += 1;
        if valid + 1 == k {
            self.completely_cuttable += 1;
        }
        if valid > self.max_valid_edges {
            self.max_valid_edges = valid;
            self.trees_at_max = 0;
        }
        if valid == self.max_valid_edges {
            self.trees_at_max += 1;
        }
    }

    fn merge(mut self, other: CuttabilityReport) -> CuttabilityReport {
        self.trees += other.trees;
        self.completely_cuttable += other.completely_cuttable;
        if other.max_valid_edges > self.max_valid_edges {
            self.max_valid_edges = other.max_valid_edges;
            self.trees_at_max = other.trees_at_max;
        } else if other.max_valid_edges == self.max_valid_edges {
            self.trees_at_max += other.trees_at_max;
        }
        self
    }
}

/// Counts valid cut edges on `num_trees` uniform spanning trees.
pub fn cuttability_experiment<R: Rng + ?Sized>(
    g: &Graph,
    k: usize,
    num_trees: u64,
    rng: &mut R,
) -> Result<CuttabilityReport> {
    let balance = exact_balance(g, k)?;
    if !g.is_connected() {
        return Err(Error::Disconnected);
    }
    let drawer = TreeDrawer::new(TreeSource::Uniform);
    let mut report = CuttabilityReport::default();
    for _ in 0..num_trees {
        let tree = drawer.draw(g, rng);
        report.record(valid_cut_edges_exact(&tree, balance.ideal()).len(), k);
    }
    Ok(report)
}

/// [`cuttability_experiment`] split into fixed batches, batch `i` drawing
/// from stream `(seed, i)`, so the result does not depend on thread count.
pub fn cuttability_parallel(
    g: &Graph,
    k: usize,
    num_trees: u64,
    seed: u64,
) -> Result<CuttabilityReport> {
    const BATCH: u64 = 1_000;
    let batches = num_trees.div_ceil(BATCH);
    let reports: Vec<CuttabilityReport> = (0..batches)
        .into_par_iter()
        .map(|b| {
            let n = BATCH.min(num_trees - b * BATCH);
            cuttability_experiment(g, k, n, &mut plan_rng(seed, b))
        })
        .collect::<Result<_>>()?;
    Ok(reports
        .into_iter()
        .fold(CuttabilityReport::default(), CuttabilityReport::merge))
}

struct Sampler<'a, R: Rng + ?Sized> {
    g: &'a Graph,
    balance: Balance,
    params: &'a BonsaiParams,
    drawer: TreeDrawer,
    rng: &'a mut R,
    trace: SampleTrace,
    scratch: Vec<usize>,
    /// Assert round(pop / ideal) bookkeeping at every split.
    check_rounding: bool,
}

impl<'a, R: Rng + ?Sized> Sampler<'a, R> {
    fn new(
        g: &'a Graph,
        balance: Balance,
        params: &'a BonsaiParams,
        rng: &'a mut R,
    ) -> Sampler<'a, R> {
        let eps = balance.epsilon().ratio();
        Sampler {
            g,
            balance,
            params,
            drawer: params.drawer(),
            rng,
            trace: SampleTrace::default(),
            scratch: vec![usize::MAX; g.node_count()],
            check_rounding: params.phi == Phi::One && 4 * *eps.numer() < *eps.denom(),
        }
    }

    fn draw(&mut self, nodes: &[NodeId], k: usize) -> Result<SpanningTree> {
        if self.trace.trees_drawn >= self.params.global_cap {
            return Err(Error::Stuck {
                cap: self.params.global_cap,
                piece_nodes: nodes.len(),
                piece_k: k,
            });
        }
        self.trace.trees_drawn += 1;
        if nodes.len() == self.g.node_count() {
            return Ok(self.drawer.draw(self.g, self.rng));
        }
        let piece = self.g.subgraph_sorted(nodes.to_vec(), &mut self.scratch);
        Ok(self.drawer.draw_piece(self.g, &piece, self.rng))
    }

    /// One-edge-at-a-time recursion. Returns `Ok(false)` when this piece
    /// gives up and the caller should backtrack.
    fn bonsai(
        &mut self,
        nodes: Vec<NodeId>,
        tree: Option<SpanningTree>,
        k: usize,
        out: &mut Vec<Vec<NodeId>>,
    ) -> Result<bool> {
        if k == 1 {
            out.push(nodes);
            return Ok(true);
        }
        let mark = out.len();
        let mut tree = tree;
        let mut draws = 0u32;
        let mut fails = 0u32;
        loop {
            let t = match tree.take() {
                Some(t) => t,
                None => {
                    if draws >= self.params.max_trees {
                        return Ok(false);
                    }
                    draws += 1;
                    self.draw(&nodes, k)?
                }
            };
            let triples = valid_cut_triples(&t, &self.balance, k, self.params.phi);
            if triples.is_empty() {
                continue;
            }
            let chosen = best_triple(&triples, self.params.best, self.rng)?.clone();
            if self.check_rounding {
                assert_eq!(chosen.k1, self.balance.rounded_parts(chosen.below_pop));
                assert_eq!(
                    chosen.k2,
                    self.balance.rounded_parts(t.total_pop() - chosen.below_pop)
                );
            }
            let (below, above) = t.split_at(chosen.child);
            self.trace.splits.push(SplitRecord {
                piece_nodes: nodes.len(),
                piece_pop: t.total_pop(),
                piece_k: k,
                triple: chosen.clone(),
            });
            draws = 0;
            let mut parts = [(below, chosen.k1), (above, chosen.k2)];
            parts.sort_by_key(|(t, _)| t.nodes().iter().min().copied());
            let mut ok = true;
            for (sub, sub_k) in parts {
                let mut sub_nodes = sub.nodes().to_vec();
                sub_nodes.sort_unstable();
                if !self.bonsai(sub_nodes, Some(sub), sub_k, out)? {
                    ok = false;
                    break;
                }
            }
            if ok {
                return Ok(true);
            }
            out.truncate(mark);
            self.trace.backtracks += 1;
            fails += 1;
            if fails >= self.params.max_fails {
                return Ok(false);
            }
        }
    }

    /// All-cuts-at-once recursion at exact balance.
    fn simultaneous(&mut self, nodes: Vec<NodeId>, out: &mut Vec<Vec<NodeId>>) -> Result<bool> {
        let pop: u64 = nodes.iter().map(|&v| self.g.pop(v)).sum();
        let k = self.balance.rounded_parts(pop);
        if k == 1 {
            out.push(nodes);
            return Ok(true);
        }
        let mark = out.len();
        let mut draws = 0u32;
        let mut fails = 0u32;
        loop {
            if draws >= self.params.max_trees {
                return Ok(false);
            }
            draws += 1;
            let t = self.draw(&nodes, k)?;
            let cuts = valid_cut_edges_exact(&t, self.balance.ideal());
            if cuts.is_empty() {
                continue;
            }
            draws = 0;
            let mut ok = true;
            for piece in t.components_after_cutting(&cuts) {
                if !self.simultaneous(piece, out)? {
                    ok = false;
                    break;
                }
            }
            if ok {
                return Ok(true);
            }
            out.truncate(mark);
            self.trace.backtracks += 1;
            fails += 1;
            if fails >= self.params.max_fails {
                return Ok(false);
            }
        }
    }
}

/// Bonsai: draws a tree of `g`, repeatedly removes the best valid cut edge
/// and recurses on both sides with the induced subtrees, backtracking per
/// `params`. Fails with [`Error::Stuck`] once `global_cap` draws are spent.
pub fn bonsai_sample<R: Rng + ?Sized>(
    g: &Graph,
    k: usize,
    rng: &mut R,
    params: &BonsaiParams,
) -> Result<(Plan, SampleTrace)> {
    params.validate()?;
    let balance = if params.epsilon.is_zero() {
        exact_balance(g, k)?
    } else {
        Balance::for_graph(g, k, params.epsilon)?
    };
    if !g.is_connected() {
        return Err(Error::Disconnected);
    }
    let all: Vec<NodeId> = (0..g.node_count()).collect();
    let mut sampler = Sampler::new(g, balance, params, rng);
    let mut out = Vec::with_capacity(k);
    loop {
        let first = sampler.draw(&all, k)?;
        if sampler.bonsai(all.clone(), Some(first), k, &mut out)? {
            break;
        }
        sampler.trace.backtracks += 1;
    }
    let plan = Plan::from_districts(g.node_count(), &out)?;
    Ok((plan, sampler.trace))
}

/// Cuts every valid edge of each drawn tree at once and recurses on the
/// pieces with fresh trees (exact balance only). Same backtracking as Bonsai.
pub fn simultaneous_cut_sample<R: Rng + ?Sized>(
    g: &Graph,
    k: usize,
    rng: &mut R,
    params: &BonsaiParams,
) -> Result<(Plan, SampleTrace)> {
    params.validate()?;
    if !params.epsilon.is_zero() {
        return Err(Error::InvalidParameter(
            "simultaneous cutting requires epsilon = 0".into(),
        ));
    }
    let balance = exact_balance(g, k)?;
    if !g.is_connected() {
        return Err(Error::Disconnected);
    }
    let all: Vec<NodeId> = (0..g.node_count()).collect();
    let mut sampler = Sampler::new(g, balance, params, rng);
    let mut out = Vec::with_capacity(k);
    while !sampler.simultaneous(all.clone(), &mut out)? {
        sampler.trace.backtracks += 1;
    }
    let plan = Plan::from_districts(g.node_count(), &out)?;
    Ok((plan, sampler.trace))
}

/// Runs `sample` for indices `0..count` in parallel, index `i` drawing from
/// stream `(seed, i)`. Results come back in index order.
pub fn independent_samples<T, F>(count: u64, seed: u64, sample: F) -> Vec<Result<T>>
where
    T: Send,
    F: Fn(&mut SampleRng) -> Result<T> + Sync,
{
    (0..count)
        .into_par_iter()
        .map(|i| sample(&mut plan_rng(seed, i)))
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::graph::build_grid;
    use num_rational::Ratio;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn rng(seed: u64) -> ChaCha8Rng {
        ChaCha8Rng::seed_from_u64(seed)
    }

    fn triple(child: usize, k1: usize, k2: usize, d1: u128, d2: u128) -> CutTriple {
        CutTriple {
            child,
            edge: (child, child + 1),
            below_pop: 0,
            k1,
            k2,
            delta1: Ratio::new(d1, 10),
            delta2: Ratio::new(d2, 10),
        }
    }

    #[test]
    fn best_prefers_even_district_split() {
        let ts = [triple(1, 10, 10, 1, 1), triple(2, 2, 18, 0, 0)];
        let mut r = rng(1);
        assert_eq!(
            best_triple(&ts, BestRule::MostBalanced, &mut r)
                .unwrap()
                .child,
            1
        );
        assert_eq!(
            best_triple(&ts[1..], BestRule::MostBalanced, &mut r)
                .unwrap()
                .child,
            2
        );
        assert!(best_triple(&[], BestRule::UniformRandom, &mut r).is_err());
    }

    #[test]
    fn best_breaks_ties_evenly() {
        let ts = [
            triple(1, 3, 3, 1, 0),
            triple(2, 3, 3, 0, 1),
            triple(3, 3, 3, 2, 0),
        ];
        let mut r = rng(2);
        let n = 10_000;
        let firsts = (0..n)
            .filter(|_| {
                best_triple(&ts, BestRule::MostBalanced, &mut r)
                    .unwrap()
                    .child
                    == 1
            })
            .count();
        assert!((firsts as f64 / n as f64 - 0.5).abs() < 0.02);
    }

    #[test]
    fn unit_path_two_districts() {
        let g = build_grid(1, 4, 1).unwrap();
        let want = Plan::from_assignment(&[0, 0, 1, 1]);
        let mut r = rng(3);
        assert_eq!(complete_cut(&g, 2, &mut r, 1).unwrap(), want);
        let params = BonsaiParams::default();
        let (plan, trace) = bonsai_sample(&g, 2, &mut r, &params).unwrap();
        assert_eq!(plan, want);
        assert_eq!(trace.trees_drawn, 1);
        assert_eq!(
            simultaneous_cut_sample(&g, 2, &mut r, &params).unwrap().0,
            want
        );
    }

    #[test]
    fn single_district_is_whole_graph() {
        let g = build_grid(3, 3, 2).unwrap();
        let (plan, trace) = bonsai_sample(&g, 1, &mut rng(4), &BonsaiParams::default()).unwrap();
        assert_eq!(plan.k(), 1);
        assert!(trace.trees_drawn >= 1);
    }

    #[test]
    fn indivisible_population_is_rejected() {
        let g = build_grid(1, 5, 1).unwrap();
        assert!(matches!(
            complete_cut(&g, 2, &mut rng(5), 10),
            Err(Error::NotDivisible { .. })
        ));
        assert!(matches!(
            bonsai_sample(&g, 2, &mut rng(5), &BonsaiParams::default()),
            Err(Error::NotDivisible { .. })
        ));
    }

    #[test]
    fn complete_cut_gives_exact_districts() {
        let g = build_grid(4, 4, 1).unwrap();
        let b = Balance::exact(16, 4).unwrap();
        let mut r = rng(6);
        for _ in 0..20 {
            let plan = complete_cut(&g, 4, &mut r, 100_000).unwrap();
            assert!(plan.is_valid(&g, &b));
        }
        // every edge of a unit path is a valid cut into singletons
        let g = build_grid(1, 4, 1).unwrap();
        assert!(complete_cut(&g, 4, &mut r, 5).is_ok());
    }

    #[test]
    fn six_by_six_first_cut_pieces_are_district_multiples() {
        let g = build_grid(6, 6, 1).unwrap();
        let b = Balance::exact(36, 6).unwrap();
        let params = BonsaiParams::default();
        let mut r = rng(7);
        for _ in 0..20 {
            let (plan, _) = simultaneous_cut_sample(&g, 6, &mut r, &params).unwrap();
            assert!(plan.is_valid(&g, &b));
        }
        // every piece after cutting all valid edges holds a multiple of 6 cells
        let drawer = TreeDrawer::new(TreeSource::Uniform);
        for _ in 0..200 {
            let t = drawer.draw(&g, &mut r);
            let cuts = valid_cut_edges_exact(&t, b.ideal());
            let pieces = t.components_after_cutting(&cuts);
            assert_eq!(pieces.len(), cuts.len() + 1);
            assert!(pieces.iter().all(|p| p.len() % 6 == 0));
        }
    }

    #[test]
    fn bonsai_plans_are_valid_with_tolerance() {
        let g = build_grid(8, 8, 1).unwrap();
        let eps: Epsilon = "0.1".parse().unwrap();
        let b = Balance::for_graph(&g, 8, eps).unwrap();
        for source in [TreeSource::Uniform, TreeSource::Minimum] {
            let params = BonsaiParams::default()
                .with_epsilon(eps)
                .with_tree_source(source);
            let mut r = rng(8);
            for _ in 0..50 {
                let (plan, trace) = bonsai_sample(&g, 8, &mut r, &params).unwrap();
                assert!(plan.is_valid(&g, &b), "{:?}", plan.violations(&g, &b));
                for s in &trace.splits {
                    assert_eq!(s.triple.k1 + s.triple.k2, s.piece_k);
                }
            }
        }
    }

    #[test]
    fn determinism() {
        let g = build_grid(6, 6, 1).unwrap();
        let params = BonsaiParams::default().with_epsilon("0.05".parse().unwrap());
        let a = bonsai_sample(&g, 6, &mut plan_rng(9, 1), &params).unwrap();
        let b = bonsai_sample(&g, 6, &mut plan_rng(9, 1), &params).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn cuttability_counts() {
        let g = build_grid(1, 4, 1).unwrap();
        let r = cuttability_experiment(&g, 2, 10, &mut rng(10)).unwrap();
        assert_eq!(
            (r.completely_cuttable, r.max_valid_edges, r.trees_at_max),
            (10, 1, 10)
        );
        let g = build_grid(4, 4, 1).unwrap();
        let seq = cuttability_parallel(&g, 4, 2_500, 11).unwrap();
        assert_eq!(seq.trees, 2_500);
        assert!(seq.trees_at_max >= 1);
    }

    #[test]
    fn params_serialize() {
        let p = BonsaiParams::default().with_epsilon("0.01".parse().unwrap());
        let json = serde_json::to_string(&p).unwrap();
        assert!(json.contains("\"epsilon\":\"1/100\""));
        let back: BonsaiParams = serde_json::from_str(&json).unwrap();
        assert_eq!(back.epsilon, p.epsilon);
    }
}
