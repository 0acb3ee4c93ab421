//! District plans and exact population-balance arithmetic.

use std::fmt;
use std::str::FromStr;

use num_rational::Ratio;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::graph::{Graph, NodeId};

/// Population tolerance as an exact nonnegative fraction.
#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct Epsilon(Ratio<u64>);

impl Epsilon {
    pub const ZERO: Epsilon = Epsilon(Ratio::new_raw(0, 1));

    pub fn new(numer: u64, denom: u64) -> Result<Epsilon> {
        if denom == 0 {
            return Err(Error::InvalidParameter(
                "epsilon denominator is zero".into(),
            ));
        }
        Ok(Epsilon(Ratio::new(numer, denom)))
    }

    /// Closest fraction with denominator at most 10^9.
    pub fn from_f64(x: f64) -> Result<Epsilon> {
        if !(x.is_finite() && x >= 0.0) {
            return Err(Error::InvalidParameter(format!(
                "epsilon {x} must be finite and nonnegative"
            )));
        }
        let denom = 1_000_000_000u64;
        Epsilon::new((x * denom as f64).round() as u64, denom)
    }

    pub fn ratio(&self) -> Ratio<u64> {
        self.0
    }

    pub fn is_zero(&self) -> bool {
        *self.0.numer() == 0
    }

    pub fn to_f64(&self) -> f64 {
        *self.0.numer() as f64 / *self.0.denom() as f64
    }
}

impl FromStr for Epsilon {
    type Err = Error;

    /// Accepts decimals ("0.05") and fractions ("1/20") exactly.
    fn from_str(s: &str) -> Result<Epsilon> {
        let bad = || Error::InvalidParameter(format!("cannot parse epsilon {s:?}"));
        let s = s.trim();
        if let Some((n, d)) = s.split_once('/') {
            return Epsilon::new(
                n.trim().parse().map_err(|_| bad())?,
                d.trim().parse().map_err(|_| bad())?,
            );
        }
        let (int, frac) = s.split_once('.').unwrap_or((s, ""));
        if int.is_empty() && frac.is_empty() || frac.len() > 18 {
            return Err(bad());
        }
        let digits = format!("{int}{frac}");
        if !digits.bytes().all(|b| b.is_ascii_digit()) {
            return Err(bad());
        }
        let numer: u64 = digits.parse().map_err(|_| bad())?;
        Epsilon::new(numer, 10u64.pow(frac.len() as u32))
    }
}

impl fmt::Display for Epsilon {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.0)
    }
}

/// Tolerance multiplier for intermediate pieces: a piece destined for `n`
/// districts may deviate from `n` ideal populations by `multiplier(n) * eps`
/// ideal populations.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Phi {
    One,
    Identity,
}

impl Phi {
    pub fn multiplier(self, n: usize) -> u64 {
        match self {
            Phi::One => 1,
            Phi::Identity => n as u64,
        }
    }
}

impl FromStr for Phi {
    type Err = Error;
    fn from_str(s: &str) -> Result<Phi> {
        match s {
            "one" => Ok(Phi::One),
            "identity" => Ok(Phi::Identity),
            _ => Err(Error::InvalidParameter(format!("unknown phi {s:?}"))),
        }
    }
}

/// Balance constraints for splitting a graph of population `total` into `k`
/// districts with tolerance `eps`. The ideal population is `total / k`,
/// kept exact; bounds are non-strict.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct Balance {
    total: u64,
    k: usize,
    eps: Epsilon,
}

impl Balance {
    pub fn new(total: u64, k: usize, eps: Epsilon) -> Result<Balance> {
        if k == 0 {
            return Err(Error::InvalidParameter("k must be at least 1".into()));
        }
        Ok(Balance { total, k, eps })
    }

    pub fn for_graph(g: &Graph, k: usize, eps: Epsilon) -> Result<Balance> {
        Balance::new(g.total_pop(), k, eps)
    }

    /// Balance with eps = 0, requiring `k | total`.
    pub fn exact(total: u64, k: usize) -> Result<Balance> {
        let b = Balance::new(total, k, Epsilon::ZERO)?;
        if !total.is_multiple_of(k as u64) {
            return Err(Error::NotDivisible { pop: total, k });
        }
        Ok(b)
    }

    pub fn total(&self) -> u64 {
        self.total
    }

    pub fn k(&self) -> usize {
        self.k
    }

    pub fn epsilon(&self) -> Epsilon {
        self.eps
    }

    pub fn ideal(&self) -> Ratio<u64> {
        Ratio::new(self.total, self.k as u64)
    }

    /// `|pop - parts * ideal| * k`, the deviation numerator over `total`.
    /// Dividing by `total` gives the deviation in units of the ideal.
    #[inline]
    pub fn deviation_numer(&self, pop: u64, parts: usize) -> u128 {
        let a = pop as u128 * self.k as u128;
        let b = parts as u128 * self.total as u128;
        a.abs_diff(b)
    }

    /// Deviation `|pop - parts * ideal| / ideal` as an exact fraction.
    pub fn deviation(&self, pop: u64, parts: usize) -> Ratio<u128> {
        Ratio::new(self.deviation_numer(pop, parts), self.total as u128)
    }

    /// Whether a piece of population `pop` can carry `parts` districts
    /// under a tolerance of `multiplier * eps` (in ideal-population units).
    #[inline]
    pub fn piece_ok(&self, pop: u64, parts: usize, multiplier: u64) -> bool {
        let eps = self.eps.ratio();
        self.deviation_numer(pop, parts) * *eps.denom() as u128
            <= multiplier as u128 * *eps.numer() as u128 * self.total as u128
    }

    /// Non-strict district bound `(1-eps) I <= pop <= (1+eps) I`.
    #[inline]
    pub fn district_ok(&self, pop: u64) -> bool {
        self.piece_ok(pop, 1, 1)
    }

    /// Whether `pop` is above the upper district bound `(1+eps) I`.
    #[inline]
    pub fn above_upper(&self, pop: u64) -> bool {
        let eps = self.eps.ratio();
        pop as u128 * self.k as u128 * *eps.denom() as u128
            > self.total as u128 * (*eps.denom() as u128 + *eps.numer() as u128)
    }

    /// Whether `pop` is a positive multiple of the ideal population strictly
    /// below the total.
    #[inline]
    pub fn is_proper_multiple(&self, pop: u64) -> bool {
        let scaled = pop as u128 * self.k as u128;
        pop < self.total && scaled.is_multiple_of(self.total as u128) && pop > 0
    }

    /// Number of districts a piece of population `pop` naturally holds,
    /// `round(pop / ideal)` with halves rounded up.
    pub fn rounded_parts(&self, pop: u64) -> usize {
        let scaled = pop as u128 * self.k as u128;
        let t = self.total as u128;
        ((2 * scaled + t) / (2 * t)) as usize
    }
}

/// Why a plan fails validation.
#[derive(Clone, Debug, PartialEq, Eq, Serialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Violation {
    WrongDistrictCount { expected: usize, found: usize },
    WrongNodeCount { expected: usize, found: usize },
    Disconnected { district: usize },
    Population { district: usize, pop: u64 },
}

impl fmt::Display for Violation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Violation::WrongDistrictCount { expected, found } => {
                write!(f, "expected {expected} districts, found {found}")
            }
            Violation::WrongNodeCount { expected, found } => {
                write!(f, "expected {expected} assigned nodes, found {found}")
            }
            Violation::Disconnected { district } => {
                write!(f, "district {district} is disconnected")
            }
            Violation::Population { district, pop } => {
                write!(f, "district {district} population {pop} out of bounds")
            }
        }
    }
}

/// A node-to-district assignment in canonical form: districts are numbered
/// in increasing order of their smallest node, so equal partitions compare
/// equal.
#[derive(Clone, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub struct Plan {
    assignment: Vec<usize>,
    k: usize,
}

impl Plan {
    /// Canonicalizes an arbitrary labeling.
    pub fn from_assignment(labels: &[usize]) -> Plan {
        let max = labels.iter().copied().max().map_or(0, |m| m + 1);
        let mut relabel = vec![usize::MAX; max];
        let mut next = 0;
        let assignment = labels
            .iter()
            .map(|&l| {
                if relabel[l] == usize::MAX {
                    relabel[l] = next;
                    next += 1;
                }
                relabel[l]
            })
            .collect();
        Plan {
            assignment,
            k: next,
        }
    }

    /// Builds a plan over `n` nodes from district node lists, which must
    /// partition `0..n`.
    pub fn from_districts(n: usize, districts: &[Vec<NodeId>]) -> Result<Plan> {
        let mut labels = vec![usize::MAX; n];
        for (d, nodes) in districts.iter().enumerate() {
            for &v in nodes {
                if v >= n || labels[v] != usize::MAX {
                    return Err(Error::InvalidPartition(format!(
                        "node {v} out of range or repeated"
                    )));
                }
                labels[v] = d;
            }
        }
        if labels.contains(&usize::MAX) {
            return Err(Error::InvalidPartition(
                "districts do not cover every node".into(),
            ));
        }
        Ok(Plan::from_assignment(&labels))
    }

    pub fn assignment(&self) -> &[usize] {
        &self.assignment
    }

    pub fn district_of(&self, v: NodeId) -> usize {
        self.assignment[v]
    }

    pub fn k(&self) -> usize {
        self.k
    }

    pub fn node_count(&self) -> usize {
        self.assignment.len()
    }

    pub fn districts(&self) -> Vec<Vec<NodeId>> {
        let mut out = vec![Vec::new(); self.k];
        for (v, &d) in self.assignment.iter().enumerate() {
            out[d].push(v);
        }
        out
    }

    pub fn district_pops(&self, g: &Graph) -> Vec<u64> {
        let mut pops = vec![0; self.k];
        for (v, &d) in self.assignment.iter().enumerate() {
            pops[d] += g.pop(v);
        }
        pops
    }

    /// Every violation of connectivity, population bounds and district count.
    pub fn violations(&self, g: &Graph, balance: &Balance) -> Vec<Violation> {
        let mut out = Vec::new();
        if self.node_count() != g.node_count() {
            out.push(Violation::WrongNodeCount {
                expected: g.node_count(),
                found: self.node_count(),
            });
            return out;
        }
        if self.k != balance.k() {
            out.push(Violation::WrongDistrictCount {
                expected: balance.k(),
                found: self.k,
            });
        }
        let mut member = vec![false; g.node_count()];
        for (d, nodes) in self.districts().iter().enumerate() {
            for &v in nodes {
                member[v] = true;
            }
            if !g.is_connected_set(&member) {
                out.push(Violation::Disconnected { district: d });
            }
            for &v in nodes {
                member[v] = false;
            }
        }
        for (d, pop) in self.district_pops(g).into_iter().enumerate() {
            if !balance.district_ok(pop) {
                out.push(Violation::Population { district: d, pop });
            }
        }
        out
    }

    pub fn is_valid(&self, g: &Graph, balance: &Balance) -> bool {
        self.violations(g, balance).is_empty()
    }
}
