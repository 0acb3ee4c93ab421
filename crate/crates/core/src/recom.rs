//! ReCom Markov chains: merge two adjacent districts, draw a spanning tree
//! of the union and split it at a balanced edge.

use std::collections::HashSet;
use std::str::FromStr;

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::bonsai::{bonsai_sample, BonsaiParams};
use crate::error::{Error, Result};
use crate::graph::{Graph, NodeId};
use crate::plan::{Balance, Epsilon, Plan};
use crate::rng::chain_rng;
use crate::trees::{EdgeBias, TreeDrawer, TreeSource};

/// How the district pair to merge is chosen.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub enum PairRule {
    /// Uniform plan-wide cut edge; merge the two districts it joins.
    CutEdge,
    /// Uniform over adjacent district pairs.
    DistrictPair,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct RecomVariant {
    pub tree_source: TreeSource,
    pub pair_rule: PairRule,
}

impl RecomVariant {
    pub const A: RecomVariant = RecomVariant::new(TreeSource::Minimum, PairRule::CutEdge);
    pub const B: RecomVariant = RecomVariant::new(TreeSource::Minimum, PairRule::DistrictPair);
    pub const C: RecomVariant = RecomVariant::new(TreeSource::Uniform, PairRule::CutEdge);
    pub const D: RecomVariant = RecomVariant::new(TreeSource::Uniform, PairRule::DistrictPair);

    pub const fn new(tree_source: TreeSource, pair_rule: PairRule) -> RecomVariant {
        RecomVariant {
            tree_source,
            pair_rule,
        }
    }

    pub fn letter(self) -> char {
        match (self.tree_source, self.pair_rule) {
            (TreeSource::Minimum, PairRule::CutEdge) => 'a',
            (TreeSource::Minimum, PairRule::DistrictPair) => 'b',
            (TreeSource::Uniform, PairRule::CutEdge) => 'c',
            (TreeSource::Uniform, PairRule::DistrictPair) => 'd',
        }
    }
}

impl FromStr for RecomVariant {
    type Err = Error;
    fn from_str(s: &str) -> Result<RecomVariant> {
        let s = s.to_ascii_lowercase();
        match s.strip_prefix("recom-").unwrap_or(&s) {
            "a" => Ok(RecomVariant::A),
            "b" => Ok(RecomVariant::B),
            "c" => Ok(RecomVariant::C),
            "d" => Ok(RecomVariant::D),
            _ => Err(Error::InvalidParameter(format!(
                "unknown ReCom variant {s:?}"
            ))),
        }
    }
}

#[derive(Clone, Debug)]
pub struct RecomParams {
    pub variant: RecomVariant,
    pub epsilon: Epsilon,
    /// Tree draws per selected pair before another pair is chosen.
    pub max_retries: u32,
    pub bias: Option<EdgeBias>,
}

impl RecomParams {
    pub fn new(variant: RecomVariant, epsilon: Epsilon) -> RecomParams {
        RecomParams {
            variant,
            epsilon,
            max_retries: 50,
            bias: None,
        }
    }

    fn drawer(&self) -> TreeDrawer {
        let d = TreeDrawer::new(self.variant.tree_source);
        match &self.bias {
            Some(b) => d.with_bias(b.clone()),
            None => d,
        }
    }
}

/// Picks an adjacent district pair `(i, j)`, `i < j`, skipping `excluded`.
/// `None` when no eligible pair remains.
pub fn select_pair<R: Rng + ?Sized>(
    g: &Graph,
    plan: &Plan,
    rule: PairRule,
    excluded: &HashSet<(usize, usize)>,
    rng: &mut R,
) -> Option<(usize, usize)> {
    let a = plan.assignment();
    let pair_of = |&(u, v): &(NodeId, NodeId)| {
        let (x, y) = (a[u], a[v]);
        (x != y).then(|| (x.min(y), x.max(y)))
    };
    match rule {
        PairRule::CutEdge => {
            let cut: Vec<(usize, usize)> = g
                .edges()
                .iter()
                .filter_map(pair_of)
                .filter(|p| !excluded.contains(p))
                .collect();
            if cut.is_empty() {
                None
            } else {
                Some(cut[rng.random_range(0..cut.len())])
            }
        }
        PairRule::DistrictPair => {
            let mut pairs: Vec<(usize, usize)> = g
                .edges()
                .iter()
                .filter_map(pair_of)
                .filter(|p| !excluded.contains(p))
                .collect();
            pairs.sort_unstable();
            pairs.dedup();
            if pairs.is_empty() {
                None
            } else {
                Some(pairs[rng.random_range(0..pairs.len())])
            }
        }
    }
}

/// One ReCom move from a valid plan.
pub fn recom_step<R: Rng + ?Sized>(
    g: &Graph,
    plan: &Plan,
    params: &RecomParams,
    rng: &mut R,
) -> Result<Plan> {
    let balance = Balance::for_graph(g, plan.k(), params.epsilon)?;
    recom_step_with(g, plan, &balance, &params.drawer(), params, rng)
}

fn recom_step_with<R: Rng + ?Sized>(
    g: &Graph,
    plan: &Plan,
    balance: &Balance,
    drawer: &TreeDrawer,
    params: &RecomParams,
    rng: &mut R,
) -> Result<Plan> {
    let mut excluded = HashSet::new();
    let mut scratch = vec![usize::MAX; g.node_count()];
    while let Some((i, j)) = select_pair(g, plan, params.variant.pair_rule, &excluded, rng) {
        let nodes: Vec<NodeId> = (0..g.node_count())
            .filter(|&v| plan.district_of(v) == i || plan.district_of(v) == j)
            .collect();
        let piece = g.subgraph_sorted(nodes, &mut scratch);
        for _ in 0..params.max_retries {
            let t = drawer.draw_piece(g, &piece, rng);
            let total = t.total_pop();
            let valid: Vec<usize> = t
                .edge_children()
                .filter(|&c| {
                    balance.district_ok(t.below_pop(c))
                        && balance.district_ok(total - t.below_pop(c))
                })
                .collect();
            if valid.is_empty() {
                continue;
            }
            let child = valid[rng.random_range(0..valid.len())];
            let (below, _) = t.split_at(child);
            let mut labels = plan.assignment().to_vec();
            for &v in piece.to_parent.iter() {
                labels[v] = j;
            }
            for &v in below.nodes() {
                labels[v] = i;
            }
            return Ok(Plan::from_assignment(&labels));
        }
        excluded.insert((i, j));
    }
    Err(Error::RecomExhausted)
}

/// Chain length, thinning and random stream.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct ChainSpec {
    pub steps: u64,
    /// Record the state after every `subsample`-th step.
    pub subsample: u64,
    pub seed: u64,
    pub chain: u64,
}

impl ChainSpec {
    fn validate(&self) -> Result<()> {
        if self.steps == 0 || self.subsample == 0 {
            return Err(Error::InvalidParameter(
                "steps and subsample must be positive".into(),
            ));
        }
        Ok(())
    }
}

/// Runs a chain from a Bonsai seed plan drawn with the chain's epsilon.
/// Step `s` draws from stream `(seed, chain, s)`; step 0 is the seed plan.
pub fn recom_chain(
    g: &Graph,
    k: usize,
    params: &RecomParams,
    seed_params: &BonsaiParams,
    spec: ChainSpec,
) -> Result<Vec<Plan>> {
    spec.validate()?;
    let seed_params = seed_params.clone().with_epsilon(params.epsilon);
    let (plan, _) = bonsai_sample(g, k, &mut chain_rng(spec.seed, spec.chain, 0), &seed_params)?;
    recom_chain_from(g, plan, params, spec)
}

/// As [`recom_chain`] from a given valid plan.
pub fn recom_chain_from(
    g: &Graph,
    start: Plan,
    params: &RecomParams,
    spec: ChainSpec,
) -> Result<Vec<Plan>> {
    spec.validate()?;
    let balance = Balance::for_graph(g, start.k(), params.epsilon)?;
    if !start.is_valid(g, &balance) {
        return Err(Error::InvalidPartition("starting plan is not valid".into()));
    }
    let drawer = params.drawer();
    let mut plan = start;
    let mut out = Vec::with_capacity((spec.steps / spec.subsample) as usize);
    for step in 1..=spec.steps {
        plan = recom_step_with(
            g,
            &plan,
            &balance,
            &drawer,
            params,
            &mut chain_rng(spec.seed, spec.chain, step),
        )?;
        if step % spec.subsample == 0 {
            out.push(plan.clone());
        }
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::graph::build_grid;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;
    use std::collections::HashMap;

    fn spec(steps: u64, seed: u64) -> ChainSpec {
        ChainSpec {
            steps,
            subsample: 1,
            seed,
            chain: 0,
        }
    }

    #[test]
    fn variants_parse() {
        assert_eq!("recom-a".parse::<RecomVariant>().unwrap(), RecomVariant::A);
        assert_eq!("D".parse::<RecomVariant>().unwrap(), RecomVariant::D);
        assert_eq!(RecomVariant::B.letter(), 'b');
        assert!("e".parse::<RecomVariant>().is_err());
    }

    #[test]
    fn two_by_two_chain_is_symmetric() {
        let g = build_grid(2, 2, 1).unwrap();
        let rows = Plan::from_assignment(&[0, 0, 1, 1]);
        for variant in [RecomVariant::A, RecomVariant::D] {
            let params = RecomParams::new(variant, Epsilon::ZERO);
            let states = recom_chain_from(&g, rows.clone(), &params, spec(20_000, 7)).unwrap();
            let n_rows = states.iter().filter(|p| **p == rows).count();
            let f = n_rows as f64 / states.len() as f64;
            assert!((f - 0.5).abs() < 0.02, "{variant:?}: {f}");
        }
    }

    #[test]
    fn steps_touch_one_pair_and_stay_valid() {
        let g = build_grid(6, 6, 1).unwrap();
        let params = RecomParams::new(RecomVariant::C, "0.1".parse().unwrap());
        let states = recom_chain(&g, 6, &params, &BonsaiParams::default(), spec(200, 3)).unwrap();
        let b = Balance::for_graph(&g, 6, params.epsilon).unwrap();
        for w in states.windows(2) {
            assert!(w[1].is_valid(&g, &b));
            let before: HashSet<Vec<usize>> = w[0].districts().into_iter().collect();
            let changed = w[1]
                .districts()
                .into_iter()
                .filter(|d| !before.contains(d))
                .count();
            assert!(changed <= 2);
        }
        assert_eq!(
            recom_chain(&g, 6, &params, &BonsaiParams::default(), spec(1, 3))
                .unwrap()
                .len(),
            1
        );
    }

    #[test]
    fn cut_edge_rule_weights_pairs_by_boundary() {
        // 0 1 2 / 3 4 5 with districts {0,3}, {1,2}, {4,5}: boundaries 1, 1, 2
        let g = build_grid(2, 3, 1).unwrap();
        let plan = Plan::from_assignment(&[0, 1, 1, 0, 2, 2]);
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let mut counts: HashMap<(usize, usize), u32> = HashMap::new();
        let n = 40_000;
        for _ in 0..n {
            let p = select_pair(&g, &plan, PairRule::CutEdge, &HashSet::new(), &mut rng).unwrap();
            *counts.entry(p).or_default() += 1;
        }
        let f = |p| counts[&p] as f64 / n as f64;
        assert!((f((0, 1)) - 0.25).abs() < 0.01);
        assert!((f((0, 2)) - 0.25).abs() < 0.01);
        assert!((f((1, 2)) - 0.5).abs() < 0.01);
        let pairs = select_pair(
            &g,
            &plan,
            PairRule::DistrictPair,
            &[(0, 1), (1, 2)].into(),
            &mut rng,
        );
        assert_eq!(pairs, Some((0, 2)));
    }

    #[test]
    fn degenerate_instance_exhausts() {
        // path with pops 1-2-1 and k = 2: no edge splits it 2 | 2
        let g = Graph::new(
            vec!["a".into(), "b".into(), "c".into()],
            vec![1, 2, 1],
            vec![(0, 1), (1, 2)],
        )
        .unwrap();
        let plan = Plan::from_assignment(&[0, 0, 1]);
        let params = RecomParams::new(RecomVariant::D, Epsilon::ZERO);
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        assert!(matches!(
            recom_step(&g, &plan, &params, &mut rng),
            Err(Error::RecomExhausted)
        ));
    }
}
