//! Per-plan ensemble metrics and their aggregation.

use std::collections::BTreeMap;
use std::fs::File;
use std::path::Path;

use num_rational::Ratio;
use num_traits::ToPrimitive;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::graph::Graph;
use crate::plan::Plan;

/// Number of edges joining different districts.
pub fn cut_edges(g: &Graph, plan: &Plan) -> u64 {
    let a = plan.assignment();
    g.edges().iter().filter(|&&(u, v)| a[u] != a[v]).count() as u64
}

/// Perimeter of each district of a plan on a `rows x cols` grid from
/// `build_grid`, in unit cell sides including the outer boundary.
pub fn district_perimeters(rows: usize, cols: usize, plan: &Plan) -> Result<Vec<u64>> {
    if plan.node_count() != rows * cols {
        return Err(Error::NotGrid { rows, cols });
    }
    let a = plan.assignment();
    let mut cells = vec![0u64; plan.k()];
    let mut inner = vec![0u64; plan.k()];
    for r in 0..rows {
        for c in 0..cols {
            let v = r * cols + c;
            cells[a[v]] += 1;
            if c + 1 < cols && a[v + 1] == a[v] {
                inner[a[v]] += 1;
            }
            if r + 1 < rows && a[v + cols] == a[v] {
                inner[a[v]] += 1;
            }
        }
    }
    Ok(cells
        .iter()
        .zip(&inner)
        .map(|(&n, &i)| 4 * n - 2 * i)
        .collect())
}

/// Two-party Democratic share of each district, ascending.
pub fn ordered_vote_shares(g: &Graph, plan: &Plan, election: &str) -> Result<Vec<Ratio<u64>>> {
    let votes = g
        .votes(election)
        .ok_or_else(|| Error::MissingElection(election.to_string()))?;
    let mut dem = vec![0u64; plan.k()];
    let mut total = vec![0u64; plan.k()];
    for (v, t) in votes.iter().enumerate() {
        let d = plan.district_of(v);
        dem[d] += t.dem;
        total[d] += t.dem + t.rep;
    }
    let mut shares = Vec::with_capacity(plan.k());
    for (d, (&x, &n)) in dem.iter().zip(&total).enumerate() {
        if n == 0 {
            return Err(Error::ZeroVotes(d));
        }
        shares.push(Ratio::new(x, n));
    }
    shares.sort();
    Ok(shares)
}

/// Metrics of one plan, as written to the CSV files.
#[derive(Clone, Debug, PartialEq)]
pub struct PlanMetrics {
    pub plan_id: u64,
    pub cut_edges: u64,
    pub perimeters: Option<Vec<u64>>,
    pub shares: Option<Vec<f64>>,
}

/// Which optional metrics to compute.
#[derive(Clone, Debug, Default)]
pub struct MetricOptions {
    pub grid: Option<(usize, usize)>,
    pub election: Option<String>,
}

pub fn plan_metrics(
    g: &Graph,
    plan_id: u64,
    plan: &Plan,
    opts: &MetricOptions,
) -> Result<PlanMetrics> {
    let perimeters = match opts.grid {
        Some((r, c)) => Some(district_perimeters(r, c, plan)?),
        None => None,
    };
    let shares = match &opts.election {
        Some(e) => Some(
            ordered_vote_shares(g, plan, e)?
                .iter()
                .map(|q| q.to_f64().unwrap_or(f64::NAN))
                .collect(),
        ),
        None => None,
    };
    Ok(PlanMetrics {
        plan_id,
        cut_edges: cut_edges(g, plan),
        perimeters,
        shares,
    })
}

/// Five-number summary (quantiles by linear interpolation).
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Quartiles {
    pub min: f64,
    pub q1: f64,
    pub median: f64,
    pub q3: f64,
    pub max: f64,
}

impl Quartiles {
    pub fn of(values: &[f64]) -> Option<Quartiles> {
        if values.is_empty() {
            return None;
        }
        let mut v = values.to_vec();
        v.sort_by(|a, b| a.total_cmp(b));
        let q = |p: f64| {
            let h = p * (v.len() - 1) as f64;
            let lo = h.floor() as usize;
            let hi = h.ceil() as usize;
            v[lo] + (h - lo as f64) * (v[hi] - v[lo])
        };
        Some(Quartiles {
            min: v[0],
            q1: q(0.25),
            median: q(0.5),
            q3: q(0.75),
            max: v[v.len() - 1],
        })
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct EnsembleSummary {
    pub sample_count: u64,
    pub cut_edge_histogram: BTreeMap<u64, u64>,
    pub cut_edge_mean: f64,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub perimeter_histogram: Option<BTreeMap<u64, u64>>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub perimeter_mean: Option<f64>,
    /// Indexed by rank, rank 1 (least Democratic) first.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub ordered_share_quartiles: Option<Vec<Quartiles>>,
}

/// Mergeable running aggregate of plan metrics.
#[derive(Clone, Debug, Default)]
pub struct EnsembleAccumulator {
    count: u64,
    cut: BTreeMap<u64, u64>,
    perimeters: BTreeMap<u64, u64>,
    shares: Vec<Vec<f64>>,
}

impl EnsembleAccumulator {
    pub fn add(&mut self, m: &PlanMetrics) {
        self.count += 1;
        *self.cut.entry(m.cut_edges).or_default() += 1;
        for &p in m.perimeters.iter().flatten() {
            *self.perimeters.entry(p).or_default() += 1;
        }
        if let Some(s) = &m.shares {
            if self.shares.len() < s.len() {
                self.shares.resize(s.len(), Vec::new());
            }
            for (rank, &x) in s.iter().enumerate() {
                self.shares[rank].push(x);
            }
        }
    }

    pub fn merge(mut self, other: EnsembleAccumulator) -> EnsembleAccumulator {
        self.count += other.count;
        for (k, c) in other.cut {
            *self.cut.entry(k).or_default() += c;
        }
        for (k, c) in other.perimeters {
            *self.perimeters.entry(k).or_default() += c;
        }
        if self.shares.len() < other.shares.len() {
            self.shares.resize(other.shares.len(), Vec::new());
        }
        for (rank, xs) in other.shares.into_iter().enumerate() {
            self.shares[rank].extend(xs);
        }
        self
    }

    pub fn finish(self) -> Result<EnsembleSummary> {
        if self.count == 0 {
            return Err(Error::EmptyEnsemble);
        }
        let mean = |h: &BTreeMap<u64, u64>| {
            let n: u64 = h.values().sum();
            h.iter().map(|(&k, &c)| k as f64 * c as f64).sum::<f64>() / n as f64
        };
        let has_perimeters = !self.perimeters.is_empty();
        Ok(EnsembleSummary {
            sample_count: self.count,
            cut_edge_mean: mean(&self.cut),
            perimeter_mean: has_perimeters.then(|| mean(&self.perimeters)),
            cut_edge_histogram: self.cut,
            perimeter_histogram: has_perimeters.then_some(self.perimeters),
            ordered_share_quartiles: (!self.shares.is_empty()).then(|| {
                self.shares
                    .iter()
                    .filter_map(|xs| Quartiles::of(xs))
                    .collect()
            }),
        })
    }
}

/// Metrics and summary for an ensemble of plans of the same `k`.
pub fn summarize_ensemble(
    g: &Graph,
    plans: &[Plan],
    opts: &MetricOptions,
) -> Result<EnsembleSummary> {
    if let Some(p) = plans.iter().find(|p| p.k() != plans[0].k()) {
        return Err(Error::InvalidParameter(format!(
            "ensemble mixes k = {} and k = {}",
            plans[0].k(),
            p.k()
        )));
    }
    let mut acc = EnsembleAccumulator::default();
    for (i, p) in plans.iter().enumerate() {
        acc.add(&plan_metrics(g, i as u64, p, opts)?);
    }
    acc.finish()
}

fn csv_err(e: csv::Error) -> Error {
    match e.into_kind() {
        csv::ErrorKind::Io(e) => Error::Io(e),
        other => Error::Parse(format!("{other:?}")),
    }
}

/// Streams plan metrics to `cut_edges.csv` and, when enabled,
/// `perimeters.csv` and `shares.csv` in one directory.
pub struct MetricWriter {
    cut: csv::Writer<File>,
    perimeters: Option<csv::Writer<File>>,
    shares: Option<csv::Writer<File>>,
}

impl MetricWriter {
    pub fn create(dir: &Path, perimeters: bool, shares: bool) -> Result<MetricWriter> {
        let open = |name: &str, header: &[&str]| -> Result<csv::Writer<File>> {
            let mut w = csv::Writer::from_path(dir.join(name)).map_err(csv_err)?;
            w.write_record(header).map_err(csv_err)?;
            Ok(w)
        };
        Ok(MetricWriter {
            cut: open("cut_edges.csv", &["plan_id", "value"])?,
            perimeters: if perimeters {
                Some(open("perimeters.csv", &["plan_id", "district", "value"])?)
            } else {
                None
            },
            shares: if shares {
                Some(open("shares.csv", &["plan_id", "rank", "share"])?)
            } else {
                None
            },
        })
    }

    pub fn write(&mut self, m: &PlanMetrics) -> Result<()> {
        let id = m.plan_id.to_string();
        self.cut
            .write_record([&id, &m.cut_edges.to_string()])
            .map_err(csv_err)?;
        if let Some(w) = &mut self.perimeters {
            for (d, p) in m.perimeters.iter().flatten().enumerate() {
                w.write_record([&id, &d.to_string(), &p.to_string()])
                    .map_err(csv_err)?;
            }
        }
        if let Some(w) = &mut self.shares {
            for (r, s) in m.shares.iter().flatten().enumerate() {
                w.write_record([&id, &(r + 1).to_string(), &s.to_string()])
                    .map_err(csv_err)?;
            }
        }
        Ok(())
    }

    pub fn finish(mut self) -> Result<()> {
        self.cut.flush()?;
        for w in [&mut self.perimeters, &mut self.shares]
            .into_iter()
            .flatten()
        {
            w.flush()?;
        }
        Ok(())
    }
}

/// Writes all metric files for `metrics` into `dir` at once.
pub fn write_metric_csvs(dir: &Path, metrics: &[PlanMetrics]) -> Result<()> {
    let mut w = MetricWriter::create(
        dir,
        metrics.iter().any(|m| m.perimeters.is_some()),
        metrics.iter().any(|m| m.shares.is_some()),
    )?;
    for m in metrics {
        w.write(m)?;
    }
    w.finish()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::graph::{build_grid, Tally};
    use proptest::prelude::*;

    #[test]
    fn cut_edge_examples() {
        let g = build_grid(2, 2, 1).unwrap();
        assert_eq!(cut_edges(&g, &Plan::from_assignment(&[0, 0, 1, 1])), 2);
        assert_eq!(cut_edges(&g, &Plan::from_assignment(&[0; 4])), 0);
        let g = build_grid(2, 3, 1).unwrap();
        assert_eq!(
            cut_edges(&g, &Plan::from_assignment(&[0, 1, 2, 0, 1, 2])),
            4
        );
    }

    #[test]
    fn perimeter_examples() {
        let columns: Vec<usize> = (0..49).map(|v| v % 7).collect();
        let p = district_perimeters(7, 7, &Plan::from_assignment(&columns)).unwrap();
        assert_eq!(p, vec![16; 7]);
        let single: Vec<usize> = (0..4).collect();
        assert_eq!(
            district_perimeters(2, 2, &Plan::from_assignment(&single)).unwrap(),
            vec![4; 4]
        );
        assert!(matches!(
            district_perimeters(3, 3, &Plan::from_assignment(&[0, 1])),
            Err(Error::NotGrid { .. })
        ));
    }

    /// Perimeter by walking every cell side and counting those that face
    /// another district or the outside.
    fn perimeters_by_sides(rows: usize, cols: usize, a: &[usize], k: usize) -> Vec<u64> {
        let mut out = vec![0; k];
        for r in 0..rows as isize {
            for c in 0..cols as isize {
                let d = a[(r as usize) * cols + c as usize];
                for (dr, dc) in [(0, 1), (1, 0), (0, -1), (-1, 0)] {
                    let (nr, nc) = (r + dr, c + dc);
                    let inside = nr >= 0 && nc >= 0 && nr < rows as isize && nc < cols as isize;
                    if !inside || a[nr as usize * cols + nc as usize] != d {
                        out[d] += 1;
                    }
                }
            }
        }
        out
    }

    proptest! {
        #[test]
        fn perimeter_formula_matches_side_count(rows in 1usize..6, cols in 1usize..6, labels in prop::collection::vec(0usize..4, 36)) {
            let plan = Plan::from_assignment(&labels[..rows * cols]);
            let got = district_perimeters(rows, cols, &plan).unwrap();
            prop_assert_eq!(got, perimeters_by_sides(rows, cols, plan.assignment(), plan.k()));
        }
    }

    fn voting_path(dem: &[u64], rep: &[u64]) -> Graph {
        let n = dem.len();
        let mut g = Graph::new(
            (0..n).map(|i| i.to_string()).collect(),
            vec![1; n],
            (1..n).map(|v| (v - 1, v)).collect(),
        )
        .unwrap();
        let t = dem
            .iter()
            .zip(rep)
            .map(|(&dem, &rep)| Tally { dem, rep })
            .collect();
        g.set_votes("GOV16", t).unwrap();
        g
    }

    #[test]
    fn vote_share_examples() {
        let g = voting_path(&[60, 30], &[40, 70]);
        let s = ordered_vote_shares(&g, &Plan::from_assignment(&[0, 1]), "GOV16").unwrap();
        assert_eq!(s, vec![Ratio::new(3, 10), Ratio::new(3, 5)]);
        let g = voting_path(&[20, 20, 20], &[60, 60, 60]);
        let s = ordered_vote_shares(&g, &Plan::from_assignment(&[0, 1, 2]), "GOV16").unwrap();
        assert_eq!(s, vec![Ratio::new(1, 4); 3]);
        assert!(matches!(
            ordered_vote_shares(&g, &Plan::from_assignment(&[0, 1, 2]), "SEN16"),
            Err(Error::MissingElection(_))
        ));
        let g = voting_path(&[0, 5], &[0, 5]);
        assert!(matches!(
            ordered_vote_shares(&g, &Plan::from_assignment(&[0, 1]), "GOV16"),
            Err(Error::ZeroVotes(0))
        ));
    }

    #[test]
    fn shares_ignore_district_labels() {
        let g = voting_path(&[1, 5, 9, 2], &[9, 5, 1, 8]);
        let a = ordered_vote_shares(&g, &Plan::from_assignment(&[0, 0, 1, 1]), "GOV16").unwrap();
        let b = ordered_vote_shares(&g, &Plan::from_assignment(&[1, 1, 0, 0]), "GOV16").unwrap();
        assert_eq!(a, b);
        assert!(a.windows(2).all(|w| w[0] <= w[1]));
    }

    #[test]
    fn summary_counts_conserve() {
        let g = build_grid(2, 2, 1).unwrap();
        let rows = Plan::from_assignment(&[0, 0, 1, 1]);
        let cols = Plan::from_assignment(&[0, 1, 0, 1]);
        let opts = MetricOptions {
            grid: Some((2, 2)),
            election: None,
        };
        let one = summarize_ensemble(&g, std::slice::from_ref(&rows), &opts).unwrap();
        assert_eq!(one.cut_edge_histogram, BTreeMap::from([(2, 1)]));
        let s = summarize_ensemble(&g, &[rows.clone(), cols, rows], &opts).unwrap();
        assert_eq!(s.sample_count, 3);
        assert_eq!(s.perimeter_histogram.unwrap().values().sum::<u64>(), 6);
        assert!(summarize_ensemble(&g, &[], &opts).is_err());
    }

    #[test]
    fn quartiles_interpolate() {
        let q = Quartiles::of(&[4.0, 1.0, 3.0, 2.0, 5.0]).unwrap();
        assert_eq!(
            (q.min, q.q1, q.median, q.q3, q.max),
            (1.0, 2.0, 3.0, 4.0, 5.0)
        );
        let q = Quartiles::of(&[0.0, 1.0]).unwrap();
        assert_eq!(q.median, 0.5);
        assert!(Quartiles::of(&[]).is_none());
    }

    #[test]
    fn csv_files() {
        let dir = tempfile::tempdir().unwrap();
        let m = vec![
            PlanMetrics {
                plan_id: 0,
                cut_edges: 2,
                perimeters: Some(vec![6, 6]),
                shares: Some(vec![0.25, 0.5]),
            },
            PlanMetrics {
                plan_id: 1,
                cut_edges: 3,
                perimeters: Some(vec![4, 8]),
                shares: Some(vec![0.4, 0.5]),
            },
        ];
        write_metric_csvs(dir.path(), &m).unwrap();
        let cut = std::fs::read_to_string(dir.path().join("cut_edges.csv")).unwrap();
        assert_eq!(cut, "plan_id,value\n0,2\n1,3\n");
        let per = std::fs::read_to_string(dir.path().join("perimeters.csv")).unwrap();
        assert!(per.starts_with("plan_id,district,value\n0,0,6\n"));
        let sh = std::fs::read_to_string(dir.path().join("shares.csv")).unwrap();
        assert!(sh.contains("1,2,0.5\n"));
    }
}
