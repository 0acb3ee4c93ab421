//! Dual-graph JSON ingestion.
//!
//! ```json
//! {"nodes": [{"id": "a", "pop": 9, "votes": {"PRES16": {"dem": 4, "rep": 5}}}],
//!  "edges": [["a", "b"]]}
//! ```

use std::collections::{BTreeMap, HashMap};
use std::path::Path;

use serde::Deserialize;

use super::{Graph, Tally};
use crate::error::{Error, Result};

#[derive(Deserialize)]
struct RawGraph {
    nodes: Vec<RawNode>,
    edges: Vec<(String, String)>,
}

#[derive(Deserialize)]
struct RawNode {
    id: String,
    pop: i64,
    #[serde(default)]
    votes: BTreeMap<String, Tally>,
}

pub fn load_graph<P: AsRef<Path>>(path: P) -> Result<Graph> {
    let text = std::fs::read_to_string(path)?;
    parse_graph(&text)
}

/// Parses a dual graph and checks that it is connected. Nodes missing a
/// tally for some election count as zero votes there.
pub fn parse_graph(text: &str) -> Result<Graph> {
    let raw: RawGraph = serde_json::from_str(text).map_err(|e| Error::Parse(e.to_string()))?;
    let mut index = HashMap::with_capacity(raw.nodes.len());
    let mut labels = Vec::with_capacity(raw.nodes.len());
    let mut pops = Vec::with_capacity(raw.nodes.len());
    for (i, node) in raw.nodes.iter().enumerate() {
        if index.insert(node.id.as_str(), i).is_some() {
            return Err(Error::DuplicateNode(node.id.clone()));
        }
        if node.pop <= 0 {
            return Err(Error::NonpositivePopulation(node.id.clone()));
        }
        labels.push(node.id.clone());
        pops.push(node.pop as u64);
    }
    let mut edges = Vec::with_capacity(raw.edges.len());
    for (a, b) in &raw.edges {
        let u = *index
            .get(a.as_str())
            .ok_or_else(|| Error::UnknownNode(a.clone()))?;
        let v = *index
            .get(b.as_str())
            .ok_or_else(|| Error::UnknownNode(b.clone()))?;
        edges.push((u, v));
    }
    let mut graph = Graph::new(labels, pops, edges)?;
    if !graph.is_connected() {
        return Err(Error::Disconnected);
    }
    let elections: Vec<String> = {
        let mut names: Vec<String> = raw
            .nodes
            .iter()
            .flat_map(|n| n.votes.keys().cloned())
            .collect();
        names.sort();
        names.dedup();
        names
    };
    for election in elections {
        let tallies = raw
            .nodes
            .iter()
            .map(|n| n.votes.get(&election).copied().unwrap_or_default())
            .collect();
        graph.set_votes(&election, tallies)?;
    }
    Ok(graph)
}
