// Brute-force references shared by the integration tests. Nothing here
// calls the library's tree, counting or oracle code; plans are only
// converted to `Plan` at the end for comparison.
#![allow(dead_code)]

use std::collections::{BTreeMap, HashMap};

use bonsai::{Graph, Plan};
use num_bigint::BigInt;
use num_rational::BigRational;
use num_traits::{One, Zero};

/// Canonical labeling: districts numbered by first node appearance.
pub fn canonical(labels: &[usize]) -> Vec<usize> {
    let mut map = HashMap::new();
    labels
        .iter()
        .map(|&l| {
            let next = map.len();
            *map.entry(l).or_insert(next)
        })
        .collect()
}

fn find(parent: &mut [usize], mut x: usize) -> usize {
    while parent[x] != x {
        parent[x] = parent[parent[x]];
        x = parent[x];
    }
    x
}

/// Every spanning tree of the subgraph induced on `nodes`, as lists of
/// edges in original ids, by trying all (n-1)-subsets of the edges.
pub fn spanning_trees_of(g: &Graph, nodes: &[usize]) -> Vec<Vec<(usize, usize)>> {
    let pos: HashMap<usize, usize> = nodes.iter().enumerate().map(|(i, &v)| (v, i)).collect();
    let edges: Vec<(usize, usize)> = g
        .edges()
        .iter()
        .copied()
        .filter(|(u, v)| pos.contains_key(u) && pos.contains_key(v))
        .collect();
    let n = nodes.len();
    if n == 1 {
        return vec![Vec::new()];
    }
    let need = n - 1;
    let mut out = Vec::new();
    let mut pick = Vec::with_capacity(need);
    fn rec(
        start: usize,
        edges: &[(usize, usize)],
        need: usize,
        pick: &mut Vec<usize>,
        pos: &HashMap<usize, usize>,
        n: usize,
        out: &mut Vec<Vec<(usize, usize)>>,
    ) {
        if pick.len() == need {
            let mut parent: Vec<usize> = (0..n).collect();
            for &e in pick.iter() {
                let (a, b) = (
                    find(&mut parent, pos[&edges[e].0]),
                    find(&mut parent, pos[&edges[e].1]),
                );
                if a == b {
                    return;
                }
                parent[a] = b;
            }
            out.push(pick.iter().map(|&e| edges[e]).collect());
            return;
        }
        if edges.len() - start < need - pick.len() {
            return;
        }
        for e in start..edges.len() {
            pick.push(e);
            rec(e + 1, edges, need, pick, pos, n, out);
            pick.pop();
        }
    }
    rec(0, &edges, need, &mut pick, &pos, n, &mut out);
    out
}

/// Components of `nodes` under `tree` with the edges in `removed` deleted.
fn components(nodes: &[usize], tree: &[(usize, usize)], removed: &[usize]) -> Vec<Vec<usize>> {
    let pos: HashMap<usize, usize> = nodes.iter().enumerate().map(|(i, &v)| (v, i)).collect();
    let mut parent: Vec<usize> = (0..nodes.len()).collect();
    for (i, &(u, v)) in tree.iter().enumerate() {
        if !removed.contains(&i) {
            let (a, b) = (find(&mut parent, pos[&u]), find(&mut parent, pos[&v]));
            parent[a] = b;
        }
    }
    let mut groups: BTreeMap<usize, Vec<usize>> = BTreeMap::new();
    for (i, &v) in nodes.iter().enumerate() {
        groups.entry(find(&mut parent, i)).or_default().push(v);
    }
    groups.into_values().collect()
}

/// Tree edges whose removal leaves a side with population a multiple of
/// `ideal` (exact balance).
pub fn valid_edges(g: &Graph, nodes: &[usize], tree: &[(usize, usize)], ideal: u64) -> Vec<usize> {
    (0..tree.len())
        .filter(|&i| {
            let side = &components(nodes, tree, &[i])[0];
            let pop: u64 = side.iter().map(|&v| g.pop(v)).sum();
            pop.is_multiple_of(ideal)
        })
        .collect()
}

fn plan_from_groups(n: usize, groups: &[Vec<usize>]) -> Plan {
    let mut labels = vec![usize::MAX; n];
    for (d, grp) in groups.iter().enumerate() {
        for &v in grp {
            labels[v] = d;
        }
    }
    Plan::from_assignment(&canonical(&labels))
}

/// Law of the complete-cut sampler: a uniform tree conditioned on having
/// exactly k-1 valid edges, cut at all of them.
pub fn brute_complete_cut_law(g: &Graph, k: usize) -> HashMap<Plan, BigRational> {
    let n = g.node_count();
    let nodes: Vec<usize> = (0..n).collect();
    let ideal = g.total_pop() / k as u64;
    let mut counts: HashMap<Plan, u64> = HashMap::new();
    let mut total = 0u64;
    for t in spanning_trees_of(g, &nodes) {
        let valid = valid_edges(g, &nodes, &t, ideal);
        if valid.len() + 1 == k {
            *counts
                .entry(plan_from_groups(n, &components(&nodes, &t, &valid)))
                .or_default() += 1;
            total += 1;
        }
    }
    counts
        .into_iter()
        .map(|(p, c)| (p, BigRational::new(BigInt::from(c), BigInt::from(total))))
        .collect()
}

/// Law of the plain simultaneous-cut recursion: draw uniform trees on a
/// piece until one has a valid edge, cut every valid edge, recurse.
pub fn brute_simultaneous_law(g: &Graph, k: usize) -> HashMap<Plan, BigRational> {
    let n = g.node_count();
    let ideal = g.total_pop() / k as u64;
    let mut memo = HashMap::new();
    let nodes: Vec<usize> = (0..n).collect();
    piece_law(g, &nodes, ideal, &mut memo)
        .into_iter()
        .map(|(groups, p)| (plan_from_groups(n, &groups), p))
        .fold(HashMap::new(), |mut acc, (plan, p)| {
            *acc.entry(plan).or_insert_with(BigRational::zero) += p;
            acc
        })
}

type PieceLaw = Vec<(Vec<Vec<usize>>, BigRational)>;

fn piece_law(
    g: &Graph,
    nodes: &[usize],
    ideal: u64,
    memo: &mut HashMap<Vec<usize>, PieceLaw>,
) -> PieceLaw {
    if let Some(l) = memo.get(nodes) {
        return l.clone();
    }
    let pop: u64 = nodes.iter().map(|&v| g.pop(v)).sum();
    let law = if pop == ideal {
        vec![(vec![nodes.to_vec()], BigRational::one())]
    } else {
        let mut splittable = Vec::new();
        for t in spanning_trees_of(g, nodes) {
            let valid = valid_edges(g, nodes, &t, ideal);
            if !valid.is_empty() {
                splittable.push(components(nodes, &t, &valid));
            }
        }
        assert!(
            !splittable.is_empty(),
            "piece {nodes:?} has no splittable tree"
        );
        let each = BigRational::new(BigInt::one(), BigInt::from(splittable.len()));
        let mut acc: HashMap<Vec<Vec<usize>>, BigRational> = HashMap::new();
        for parts in splittable {
            let mut combos: PieceLaw = vec![(Vec::new(), each.clone())];
            for part in &parts {
                let sub = piece_law(g, part, ideal, memo);
                let mut next = Vec::new();
                for (groups, p) in &combos {
                    for (sg, sp) in &sub {
                        let mut gs = groups.clone();
                        gs.extend(sg.iter().cloned());
                        next.push((gs, p * sp));
                    }
                }
                combos = next;
            }
            for (mut groups, p) in combos {
                groups.sort();
                *acc.entry(groups).or_insert_with(BigRational::zero) += p;
            }
        }
        acc.into_iter().collect()
    };
    memo.insert(nodes.to_vec(), law.clone());
    law
}

/// All balanced plans by trying every labeling (tiny graphs only).
pub fn brute_plans(g: &Graph, k: usize, eps_num: u64, eps_den: u64) -> Vec<Plan> {
    let n = g.node_count();
    let mut out = Vec::new();
    let mut labels = vec![0usize; n];
    loop {
        if canonical(&labels) == labels && check_plan(g, &labels, k, eps_num, eps_den).is_ok() {
            out.push(Plan::from_assignment(&labels));
        }
        let mut i = 0;
        loop {
            if i == n {
                out.sort();
                return out;
            }
            labels[i] += 1;
            if labels[i] < k {
                break;
            }
            labels[i] = 0;
            i += 1;
        }
    }
}

/// Independent validity check: exactly k nonempty connected districts,
/// each with `|pop*k - P| * den <= num * P`.
pub fn check_plan(
    g: &Graph,
    labels: &[usize],
    k: usize,
    eps_num: u64,
    eps_den: u64,
) -> Result<(), String> {
    let n = g.node_count();
    if labels.len() != n {
        return Err(format!("{} labels for {} nodes", labels.len(), n));
    }
    let mut adj = vec![Vec::new(); n];
    for &(u, v) in g.edges() {
        adj[u].push(v);
        adj[v].push(u);
    }
    let total = g.total_pop() as u128;
    for d in 0..k {
        let members: Vec<usize> = (0..n).filter(|&v| labels[v] == d).collect();
        let Some(&start) = members.first() else {
            return Err(format!("district {d} is empty"));
        };
        let mut seen = vec![false; n];
        let mut stack = vec![start];
        seen[start] = true;
        let mut reached = 0;
        while let Some(v) = stack.pop() {
            reached += 1;
            for &w in &adj[v] {
                if !seen[w] && labels[w] == d {
                    seen[w] = true;
                    stack.push(w);
                }
            }
        }
        if reached != members.len() {
            return Err(format!("district {d} is disconnected"));
        }
        let pop: u128 = members.iter().map(|&v| g.pop(v) as u128).sum();
        let dev = (pop * k as u128).abs_diff(total);
        if dev * eps_den as u128 > eps_num as u128 * total {
            return Err(format!("district {d} population {pop} out of bounds"));
        }
    }
    if labels.iter().any(|&l| l >= k) {
        return Err("label out of range".into());
    }
    Ok(())
}

pub fn grid(rows: usize, cols: usize, pops: &[u64]) -> Graph {
    let mut edges = Vec::new();
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
    let labels = (0..rows * cols).map(|v| v.to_string()).collect();
    Graph::new(labels, pops.to_vec(), edges).unwrap()
}

pub fn path(pops: &[u64]) -> Graph {
    let labels = (0..pops.len()).map(|v| v.to_string()).collect();
    let edges = (1..pops.len()).map(|v| (v - 1, v)).collect();
    Graph::new(labels, pops.to_vec(), edges).unwrap()
}

pub fn counts_of(plans: impl IntoIterator<Item = Plan>) -> HashMap<Plan, u64> {
    let mut m = HashMap::new();
    for p in plans {
        *m.entry(p).or_insert(0) += 1;
    }
    m
}

/// Total variation between empirical counts and an exact law, in f64.
pub fn tv(counts: &HashMap<Plan, u64>, law: &HashMap<Plan, BigRational>) -> f64 {
    let n: u64 = counts.values().sum();
    let mut keys: Vec<&Plan> = counts.keys().chain(law.keys()).collect();
    keys.sort();
    keys.dedup();
    let f = |r: &BigRational| {
        use num_traits::ToPrimitive;
        r.to_f64().unwrap()
    };
    0.5 * keys
        .into_iter()
        .map(|p| {
            let emp = *counts.get(p).unwrap_or(&0) as f64 / n as f64;
            let ex = law.get(p).map(f).unwrap_or(0.0);
            (emp - ex).abs()
        })
        .sum::<f64>()
}
