//! Independent and Markov-chain samplers for connected, population-balanced
//! graph partitions, with exact reference distributions for small graphs.

pub mod analytics;
pub mod bonsai;
pub mod cli;
pub mod dsu;
pub mod error;
pub mod graph;
pub mod oracle;
pub mod plan;
pub mod recom;
pub mod rng;
pub mod trees;

pub use error::{Error, Result};
pub use graph::{build_grid, load_graph, Graph, MultiGraph, NodeId};
pub use plan::{Balance, Epsilon, Phi, Plan};
