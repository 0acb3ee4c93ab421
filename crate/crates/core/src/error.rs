use thiserror::Error;

#[derive(Debug, Error)]
pub enum Error {
    #[error("parse error: {0}")]
    Parse(String),
    #[error("io error: {0}")]
    Io(#[from] std::io::Error),
    #[error("nonpositive population at node {0}")]
    NonpositivePopulation(String),
    #[error("self-loop at node {0}")]
    SelfLoop(String),
    #[error("duplicate node id {0}")]
    DuplicateNode(String),
    #[error("duplicate edge ({0}, {1})")]
    DuplicateEdge(String, String),
    #[error("unknown node {0}")]
    UnknownNode(String),
    #[error("graph is disconnected")]
    Disconnected,
    #[error("invalid partition: {0}")]
    InvalidPartition(String),
    #[error("empty node set")]
    EmptyNodeSet,
    #[error("spanning tree count {count} exceeds enumeration guard {guard}")]
    GuardExceeded { count: String, guard: u64 },
    #[error("state count exceeds cap {0}")]
    CapExceeded(u64),
    #[error("total population {pop} is not divisible by k = {k}")]
    NotDivisible { pop: u64, k: usize },
    #[error("invalid parameter: {0}")]
    InvalidParameter(String),
    #[error("edge ({0}, {1}) is not a tree edge")]
    NotTreeEdge(usize, usize),
    #[error("no completely cuttable tree found in {0} attempts")]
    NoCuttableTree(u64),
    #[error("sampler stuck: global attempt cap of {cap} tree draws exhausted (piece of {piece_nodes} nodes, k = {piece_k})")]
    Stuck {
        cap: u64,
        piece_nodes: usize,
        piece_k: usize,
    },
    #[error("recombination step failed: tree retries exhausted for every adjacent district pair")]
    RecomExhausted,
    #[error("no valid plans")]
    NoValidPlans,
    #[error("election {0} not present")]
    MissingElection(String),
    #[error("district {0} has zero total votes")]
    ZeroVotes(usize),
    #[error("empty ensemble")]
    EmptyEnsemble,
    #[error("plan is not on a {rows}x{cols} grid host")]
    NotGrid { rows: usize, cols: usize },
    #[error("invalid collection: no splittable spanning tree")]
    Unsplittable,
}

pub type Result<T> = std::result::Result<T, Error>;
