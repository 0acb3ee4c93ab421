//! Exact sampling distributions on small instances and distance measures
//! for checking the samplers against them.

mod splitting;

pub use splitting::{
    algorithm2_distribution, algorithm2_probability_recursive, enumerate_splitting_orders,
    split_tree_count, splittability_counts, splitting_order_terms, DistrictStructure, OrderTerm,
    SplittingOrder, TreeCounts, DEFAULT_TREE_GUARD,
};

use std::collections::{BTreeMap, HashMap};

use num_bigint::BigInt;
use num_rational::BigRational;
use num_traits::{ToPrimitive, Zero};
use serde::Serialize;

use crate::error::{Error, Result};
use crate::graph::{quotient_of_assignment, spanning_tree_count, Graph, NodeId};
use crate::plan::{Balance, Epsilon, Plan};

/// Default cap on recursion states visited by [`enumerate_plans`].
pub const DEFAULT_STATE_CAP: u64 = 10_000_000;

/// Plans with exact probabilities, sorted by plan.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct ExactDistribution {
    entries: Vec<(Plan, BigRational)>,
}

#[derive(Serialize)]
struct JsonEntry {
    plan: BTreeMap<String, usize>,
    prob_num: String,
    prob_den: String,
}

impl ExactDistribution {
    /// Normalizes nonnegative integer weights; zero-weight plans are dropped.
    pub fn from_weights(weights: Vec<(Plan, BigInt)>) -> Result<ExactDistribution> {
        let total: BigInt = weights.iter().map(|(_, w)| w.clone()).sum();
        if total.is_zero() {
            return Err(Error::NoValidPlans);
        }
        let entries = weights
            .into_iter()
            .filter(|(_, w)| !w.is_zero())
            .map(|(p, w)| (p, BigRational::new(w, total.clone())))
            .collect();
        Ok(ExactDistribution::from_probabilities(entries))
    }

    pub(crate) fn from_probabilities(mut entries: Vec<(Plan, BigRational)>) -> ExactDistribution {
        entries.sort_by(|a, b| a.0.cmp(&b.0));
        ExactDistribution { entries }
    }

    pub fn entries(&self) -> &[(Plan, BigRational)] {
        &self.entries
    }

    pub fn support(&self) -> impl Iterator<Item = &Plan> {
        self.entries.iter().map(|(p, _)| p)
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn prob(&self, plan: &Plan) -> BigRational {
        match self.entries.binary_search_by(|(p, _)| p.cmp(plan)) {
            Ok(i) => self.entries[i].1.clone(),
            Err(_) => BigRational::zero(),
        }
    }

    pub fn total(&self) -> BigRational {
        self.entries.iter().map(|(_, q)| q.clone()).sum()
    }

    /// `[{"plan": {node: district}, "prob_num": "..", "prob_den": ".."}]`
    pub fn to_json(&self, g: &Graph) -> serde_json::Value {
        let rows: Vec<JsonEntry> = self
            .entries
            .iter()
            .map(|(plan, q)| JsonEntry {
                plan: plan
                    .assignment()
                    .iter()
                    .enumerate()
                    .map(|(v, &d)| (g.label(v).to_string(), d))
                    .collect(),
                prob_num: q.numer().to_string(),
                prob_den: q.denom().to_string(),
            })
            .collect();
        serde_json::to_value(rows).expect("serializable")
    }
}

/// Total-variation distance `1/2 sum |p_hat - p|` between empirical counts
/// and an exact distribution, over the union of supports.
pub fn tv_distance(empirical: &HashMap<Plan, u64>, exact: &ExactDistribution) -> BigRational {
    let n: u64 = empirical.values().sum();
    let mut sum = BigRational::zero();
    for (plan, q) in exact.entries() {
        let p_hat = if n == 0 {
            BigRational::zero()
        } else {
            BigRational::new(
                BigInt::from(*empirical.get(plan).unwrap_or(&0)),
                BigInt::from(n),
            )
        };
        sum += abs(p_hat - q);
    }
    for (plan, &c) in empirical {
        if exact.prob(plan).is_zero() {
            sum += BigRational::new(BigInt::from(c), BigInt::from(n));
        }
    }
    sum / BigInt::from(2)
}

/// Total-variation distance between two empirical laws.
pub fn tv_between_counts(a: &HashMap<Plan, u64>, b: &HashMap<Plan, u64>) -> f64 {
    let na = a.values().sum::<u64>().max(1) as f64;
    let nb = b.values().sum::<u64>().max(1) as f64;
    let mut sum = 0.0;
    for (plan, &c) in a {
        sum += (c as f64 / na - *b.get(plan).unwrap_or(&0) as f64 / nb).abs();
    }
    for (plan, &c) in b {
        if !a.contains_key(plan) {
            sum += c as f64 / nb;
        }
    }
    sum / 2.0
}

fn abs(q: BigRational) -> BigRational {
    if q < BigRational::zero() {
        -q
    } else {
        q
    }
}

pub fn to_f64(q: &BigRational) -> f64 {
    q.to_f64().unwrap_or(f64::NAN)
}

type Mask = u128;

struct PlanSearch<'a> {
    g: &'a Graph,
    balance: Balance,
    nbr: Vec<Mask>,
    cap: u64,
    states: u64,
    out: Vec<Plan>,
}

impl PlanSearch<'_> {
    fn tick(&mut self) -> Result<()> {
        self.states += 1;
        if self.states > self.cap {
            return Err(Error::CapExceeded(self.cap));
        }
        Ok(())
    }

    fn plans(&mut self, free: Mask, districts: &mut Vec<Mask>) -> Result<()> {
        self.tick()?;
        let k = self.balance.k();
        if free == 0 {
            if districts.len() == k {
                let blocks: Vec<Vec<NodeId>> = districts.iter().map(|&m| bits(m)).collect();
                self.out
                    .push(Plan::from_districts(self.g.node_count(), &blocks)?);
            }
            return Ok(());
        }
        if districts.len() == k {
            return Ok(());
        }
        let v = free.trailing_zeros() as usize;
        let mut sets = Vec::new();
        self.connected_sets(
            1 << v,
            self.g.pop(v),
            self.nbr[v] & free,
            free & !(1 << v),
            0,
            &mut sets,
        )?;
        for s in sets {
            districts.push(s);
            self.plans(free & !s, districts)?;
            districts.pop();
        }
        Ok(())
    }

    /// Connected sets containing `set`, extended from `cand` (frontier nodes
    /// not yet decided), never using `excluded`. Each set is reached by one
    /// include/exclude path.
    fn connected_sets(
        &mut self,
        set: Mask,
        pop: u64,
        cand: Mask,
        allowed: Mask,
        excluded: Mask,
        out: &mut Vec<Mask>,
    ) -> Result<()> {
        self.tick()?;
        if cand == 0 {
            if self.balance.district_ok(pop) {
                out.push(set);
            }
            return Ok(());
        }
        let w = cand.trailing_zeros() as usize;
        let bit = 1 << w;
        self.connected_sets(set, pop, cand & !bit, allowed, excluded | bit, out)?;
        let grown = pop + self.g.pop(w);
        if !self.balance.above_upper(grown) {
            let next_set = set | bit;
            let next_cand = (cand & !bit) | (self.nbr[w] & allowed & !next_set & !excluded);
            self.connected_sets(next_set, grown, next_cand, allowed, excluded, out)?;
        }
        Ok(())
    }
}

fn bits(mut m: Mask) -> Vec<NodeId> {
    let mut out = Vec::with_capacity(m.count_ones() as usize);
    while m != 0 {
        out.push(m.trailing_zeros() as usize);
        m &= m - 1;
    }
    out
}

/// Every plan of `g` into `k` connected districts within the non-strict
/// population bounds, canonical and sorted. Limited to graphs of at most 128
/// nodes and `cap` search states.
pub fn enumerate_plans(g: &Graph, k: usize, epsilon: Epsilon, cap: u64) -> Result<Vec<Plan>> {
    let n = g.node_count();
    if n > Mask::BITS as usize {
        return Err(Error::InvalidParameter(format!(
            "plan enumeration supports at most 128 nodes, got {n}"
        )));
    }
    let balance = Balance::for_graph(g, k, epsilon)?;
    let nbr = (0..n)
        .map(|v| g.neighbors(v).iter().fold(0, |m, &w| m | (1 << w)))
        .collect();
    let mut search = PlanSearch {
        g,
        balance,
        nbr,
        cap,
        states: 0,
        out: Vec::new(),
    };
    let all: Mask = if n == 128 { Mask::MAX } else { (1 << n) - 1 };
    search.plans(all, &mut Vec::with_capacity(k))?;
    let mut plans = search.out;
    plans.sort();
    plans.dedup();
    Ok(plans)
}

/// Spanning-tree count of the district quotient times the product of the
/// districts' own spanning-tree counts.
pub fn complete_cut_weight(g: &Graph, plan: &Plan) -> Result<BigInt> {
    let q = quotient_of_assignment(g, plan.assignment(), plan.k());
    let mut w = spanning_tree_count(&q);
    for district in plan.districts() {
        w *= spanning_tree_count(&g.induced_subgraph(&district)?.graph);
    }
    Ok(w)
}

/// Law of Complete Cut: weights from [`complete_cut_weight`] over all
/// exactly balanced plans.
pub fn complete_cut_distribution(g: &Graph, k: usize) -> Result<ExactDistribution> {
    Balance::exact(g.total_pop(), k)?;
    let plans = enumerate_plans(g, k, Epsilon::ZERO, DEFAULT_STATE_CAP)?;
    if plans.is_empty() {
        return Err(Error::NoValidPlans);
    }
    let weights = plans
        .into_iter()
        .map(|p| {
            let w = complete_cut_weight(g, &p)?;
            Ok((p, w))
        })
        .collect::<Result<Vec<_>>>()?;
    ExactDistribution::from_weights(weights)
}

/// Exact rational `c / n`.
pub fn ratio(c: u64, n: u64) -> BigRational {
    BigRational::new(BigInt::from(c), BigInt::from(n))
}
