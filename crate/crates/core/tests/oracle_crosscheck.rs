mod common;

use bonsai::bonsai::{bonsai_sample, independent_samples, BonsaiParams};
use bonsai::oracle::{
    algorithm2_distribution, complete_cut_distribution, complete_cut_weight, enumerate_plans,
    to_f64, tv_distance, DEFAULT_STATE_CAP,
};
use bonsai::{build_grid, Epsilon, Plan};
use num_bigint::BigInt;
use num_rational::BigRational;
use std::collections::HashMap;

// Weight of a plan = number of completely cuttable trees that produce it.
#[test]
fn prop1_weights_count_cuttable_trees() {
    for (rows, cols, k) in [(2, 3, 3), (3, 3, 3), (2, 4, 4), (2, 4, 2)] {
        let g = build_grid(rows, cols, 1).unwrap();
        let n = g.node_count();
        let nodes: Vec<usize> = (0..n).collect();
        let ideal = g.total_pop() / k as u64;
        let mut trees_per_plan: HashMap<Plan, u64> = HashMap::new();
        for t in common::spanning_trees_of(&g, &nodes) {
            let valid = common::valid_edges(&g, &nodes, &t, ideal);
            if valid.len() + 1 != k {
                continue;
            }
            let kept: Vec<(usize, usize)> = t
                .iter()
                .enumerate()
                .filter(|(i, _)| !valid.contains(i))
                .map(|(_, &e)| e)
                .collect();
            let mut labels = vec![usize::MAX; n];
            let mut next = 0;
            for v in 0..n {
                if labels[v] != usize::MAX {
                    continue;
                }
                let mut stack = vec![v];
                labels[v] = next;
                while let Some(u) = stack.pop() {
                    for &(a, b) in &kept {
                        let w = if a == u {
                            b
                        } else if b == u {
                            a
                        } else {
                            continue;
                        };
                        if labels[w] == usize::MAX {
                            labels[w] = next;
                            stack.push(w);
                        }
                    }
                }
                next += 1;
            }
            *trees_per_plan
                .entry(Plan::from_assignment(&labels))
                .or_default() += 1;
        }
        let plans = enumerate_plans(&g, k, Epsilon::ZERO, DEFAULT_STATE_CAP).unwrap();
        assert_eq!(plans.len(), trees_per_plan.len(), "{rows}x{cols}/k={k}");
        for p in &plans {
            assert_eq!(
                complete_cut_weight(&g, p).unwrap(),
                BigInt::from(trees_per_plan[p]),
                "{rows}x{cols}/k={k}"
            );
        }
        let law = complete_cut_distribution(&g, k).unwrap();
        for (p, q) in law.entries() {
            assert_eq!(q, &common::brute_complete_cut_law(&g, k)[p]);
        }
    }
}

#[test]
fn bonsai_on_2x3_matches_simultaneous_cut_law() {
    let g = build_grid(2, 3, 1).unwrap();
    let exact = algorithm2_distribution(&g, 3).unwrap();
    let params = BonsaiParams::default();
    let counts = common::counts_of(
        independent_samples(50_000, 3, |rng| {
            bonsai_sample(&g, 3, rng, &params).map(|(p, _)| p)
        })
        .into_iter()
        .map(|r| r.unwrap()),
    );
    assert!(to_f64(&tv_distance(&counts, &exact)) < 0.02);
}

#[test]
fn two_by_four_laws_agree_with_brute_force() {
    let g = build_grid(2, 4, 1).unwrap();
    for k in [2, 4] {
        let lib: HashMap<Plan, BigRational> = algorithm2_distribution(&g, k)
            .unwrap()
            .entries()
            .iter()
            .cloned()
            .collect();
        assert_eq!(lib, common::brute_simultaneous_law(&g, k), "k={k}");
    }
}
