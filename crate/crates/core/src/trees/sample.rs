use std::path::Path;
use std::str::FromStr;

use rand::Rng;
use serde::{Deserialize, Serialize};

use super::{SpanningTree, NONE};
use crate::dsu::Dsu;
use crate::error::{Error, Result};
use crate::graph::{Graph, Subgraph};

/// Which random spanning trees a sampler draws.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum TreeSource {
    /// Uniform spanning trees (Wilson's algorithm).
    Uniform,
    /// Minimum spanning trees under i.i.d. uniform edge weights (Kruskal).
    Minimum,
}

impl FromStr for TreeSource {
    type Err = Error;
    fn from_str(s: &str) -> Result<TreeSource> {
        match s {
            "uniform" => Ok(TreeSource::Uniform),
            "minimum" => Ok(TreeSource::Minimum),
            _ => Err(Error::InvalidParameter(format!(
                "unknown tree source {s:?}"
            ))),
        }
    }
}

/// Static per-edge offsets added to the random Kruskal weights, indexed by
/// edge of the graph they were loaded for.
#[derive(Clone, Debug, PartialEq)]
pub struct EdgeBias(pub Vec<f64>);

/// Reads `idA,idB,bias` rows (no header). Unlisted edges get bias 0.
pub fn load_edge_bias<P: AsRef<Path>>(g: &Graph, path: P) -> Result<EdgeBias> {
    let mut reader = csv::ReaderBuilder::new()
        .has_headers(false)
        .trim(csv::Trim::All)
        .from_path(path)
        .map_err(|e| Error::Parse(e.to_string()))?;
    let index = g.label_index();
    let mut bias = vec![0.0; g.edge_count()];
    for record in reader.records() {
        let record = record.map_err(|e| Error::Parse(e.to_string()))?;
        if record.len() != 3 {
            return Err(Error::Parse(format!(
                "expected 3 fields, got {}",
                record.len()
            )));
        }
        let lookup = |s: &str| {
            index
                .get(s)
                .copied()
                .ok_or_else(|| Error::UnknownNode(s.to_string()))
        };
        let (u, v) = (lookup(&record[0])?, lookup(&record[1])?);
        let e = g
            .edge_index(u, v)
            .ok_or_else(|| Error::Parse(format!("no edge ({}, {})", &record[0], &record[1])))?;
        bias[e] = record[2]
            .parse()
            .map_err(|_| Error::Parse(format!("bad bias {:?}", &record[2])))?;
    }
    Ok(EdgeBias(bias))
}

/// Wilson's algorithm rooted at node 0; `g` must be connected.
fn wilson_parents<R: Rng + ?Sized>(g: &Graph, rng: &mut R) -> Vec<usize> {
    let n = g.node_count();
    let mut in_tree = vec![false; n];
    let mut next = vec![NONE; n];
    in_tree[0] = true;
    for start in 1..n {
        // random walk until the tree is hit; overwriting `next` erases loops
        let mut u = start;
        while !in_tree[u] {
            let nbrs = g.neighbors(u);
            let w = nbrs[rng.random_range(0..nbrs.len())];
            next[u] = w;
            u = w;
        }
        let mut u = start;
        while !in_tree[u] {
            in_tree[u] = true;
            u = next[u];
        }
    }
    next
}

/// A uniformly random spanning tree of `g`, rooted at its lowest node.
pub fn wilson_ust<R: Rng + ?Sized>(g: &Graph, rng: &mut R) -> Result<SpanningTree> {
    if !g.is_connected() {
        return Err(Error::Disconnected);
    }
    Ok(SpanningTree::from_parents(
        (0..g.node_count()).collect(),
        g.pops().to_vec(),
        wilson_parents(g, rng),
        0,
    ))
}

fn kruskal_parents<R: Rng + ?Sized>(g: &Graph, bias: Option<&[f64]>, rng: &mut R) -> Vec<usize> {
    let n = g.node_count();
    let mut weighted: Vec<(f64, usize)> = (0..g.edge_count())
        .map(|e| (rng.random::<f64>() + bias.map_or(0.0, |b| b[e]), e))
        .collect();
    weighted.sort_unstable_by(|a, b| a.0.total_cmp(&b.0).then(a.1.cmp(&b.1)));
    let mut dsu = Dsu::new(n);
    let mut adj = vec![Vec::new(); n];
    let mut taken = 0;
    for &(_, e) in &weighted {
        let (u, v) = g.edges()[e];
        if dsu.union(u, v) {
            adj[u].push(v);
            adj[v].push(u);
            taken += 1;
            if taken + 1 == n {
                break;
            }
        }
    }
    let mut parent = vec![NONE; n];
    let mut seen = vec![false; n];
    seen[0] = true;
    let mut stack = vec![0];
    while let Some(u) = stack.pop() {
        for &w in &adj[u] {
            if !seen[w] {
                seen[w] = true;
                parent[w] = u;
                stack.push(w);
            }
        }
    }
    parent
}

/// Minimum spanning tree under fresh uniform(0,1) edge weights, optionally
/// shifted by a static per-edge bias. Ties break by edge index.
pub fn random_weight_mst<R: Rng + ?Sized>(
    g: &Graph,
    bias: Option<&EdgeBias>,
    rng: &mut R,
) -> Result<SpanningTree> {
    if !g.is_connected() {
        return Err(Error::Disconnected);
    }
    if let Some(b) = bias {
        if b.0.len() != g.edge_count() {
            return Err(Error::InvalidParameter(
                "bias length differs from edge count".into(),
            ));
        }
    }
    let parent = kruskal_parents(g, bias.map(|b| b.0.as_slice()), rng);
    Ok(SpanningTree::from_parents(
        (0..g.node_count()).collect(),
        g.pops().to_vec(),
        parent,
        0,
    ))
}

/// Draws trees of pieces of a fixed root graph.
#[derive(Clone, Debug)]
pub struct TreeDrawer {
    source: TreeSource,
    bias: Option<EdgeBias>,
}

impl TreeDrawer {
    pub fn new(source: TreeSource) -> TreeDrawer {
        TreeDrawer { source, bias: None }
    }

    /// Bias indexed by edges of the root graph later passed to `draw_piece`.
    pub fn with_bias(mut self, bias: EdgeBias) -> TreeDrawer {
        self.bias = Some(bias);
        self
    }

    pub fn source(&self) -> TreeSource {
        self.source
    }

    /// Tree of the connected graph `g`, without a connectivity check.
    pub fn draw<R: Rng + ?Sized>(&self, g: &Graph, rng: &mut R) -> SpanningTree {
        let parent = match self.source {
            TreeSource::Uniform => wilson_parents(g, rng),
            TreeSource::Minimum => {
                kruskal_parents(g, self.bias.as_ref().map(|b| b.0.as_slice()), rng)
            }
        };
        SpanningTree::from_parents((0..g.node_count()).collect(), g.pops().to_vec(), parent, 0)
    }

    /// Tree of a connected piece of `root`, labeled with `root` node ids.
    pub fn draw_piece<R: Rng + ?Sized>(
        &self,
        root: &Graph,
        piece: &Subgraph,
        rng: &mut R,
    ) -> SpanningTree {
        let parent = match (self.source, &self.bias) {
            (TreeSource::Uniform, _) => wilson_parents(&piece.graph, rng),
            (TreeSource::Minimum, None) => kruskal_parents(&piece.graph, None, rng),
            (TreeSource::Minimum, Some(bias)) => {
                let local: Vec<f64> = piece
                    .edges()
                    .iter()
                    .map(|&(a, b)| {
                        root.edge_index(piece.to_parent[a], piece.to_parent[b])
                            .map_or(0.0, |e| bias.0[e])
                    })
                    .collect();
                kruskal_parents(&piece.graph, Some(&local), rng)
            }
        };
        SpanningTree::from_parents(piece.to_parent.clone(), piece.pops().to_vec(), parent, 0)
    }
}
