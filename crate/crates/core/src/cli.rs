//! Command-line front end: build or load a graph, run a sampler, chain,
//! oracle or cuttability experiment, and write the results to a directory.

use std::fs::{self, File};
use std::io::{BufRead, BufReader, BufWriter, Write};
use std::path::{Path, PathBuf};
use std::str::FromStr;

use clap::{ArgGroup, Args, Parser, Subcommand, ValueEnum};
use rayon::prelude::*;
use serde::Serialize;

use crate::analytics::{
    plan_metrics, EnsembleAccumulator, MetricOptions, MetricWriter, PlanMetrics,
};
use crate::bonsai::{
    bonsai_sample, complete_cut, cuttability_parallel, simultaneous_cut_sample, BestRule,
    BonsaiParams,
};
use crate::error::{Error, Result};
use crate::graph::{build_grid, load_graph, Graph};
use crate::oracle::{algorithm2_distribution, complete_cut_distribution, ExactDistribution};
use crate::plan::{Balance, Epsilon, Phi, Plan};
use crate::recom::{recom_chain, ChainSpec, RecomParams, RecomVariant};
use crate::rng::plan_rng;
use crate::trees::{load_edge_bias, TreeSource};

/// Samples drawn in parallel before their results are written out.
const CHUNK: u64 = 2048;

#[derive(Parser, Debug)]
#[command(
    name = "bonsai",
    version,
    about = "Sample population-balanced graph partitions"
)]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

impl Cli {
    /// Parses arguments, treating a command line without a subcommand as
    /// `run`.
    pub fn parse_args<I, T>(args: I) -> std::result::Result<Cli, clap::Error>
    where
        I: IntoIterator<Item = T>,
        T: Into<std::ffi::OsString> + Clone,
    {
        let mut args: Vec<std::ffi::OsString> = args.into_iter().map(Into::into).collect();
        let explicit = args.get(1).and_then(|a| a.to_str()).is_some_and(|a| {
            matches!(
                a,
                "run" | "validate" | "help" | "-h" | "--help" | "-V" | "--version"
            )
        });
        if !explicit && !args.is_empty() {
            args.insert(1, "run".into());
        }
        Cli::try_parse_from(args)
    }
}

#[derive(Subcommand, Debug)]
#[allow(clippy::large_enum_variant)]
pub enum Command {
    /// Run a sampler, chain, oracle or experiment (the default).
    Run(RunArgs),
    /// Check every plan in a plans.jsonl file.
    Validate(ValidateArgs),
}

/// `R x C` grid dimensions, written `RxC`.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
pub struct GridDims {
    pub rows: usize,
    pub cols: usize,
}

impl FromStr for GridDims {
    type Err = Error;
    fn from_str(s: &str) -> Result<GridDims> {
        let bad = || Error::InvalidParameter(format!("grid must look like 7x7, got {s:?}"));
        let (r, c) = s
            .to_ascii_lowercase()
            .split_once('x')
            .map(|(r, c)| (r.to_string(), c.to_string()))
            .ok_or_else(bad)?;
        let rows = r.trim().parse().map_err(|_| bad())?;
        let cols = c.trim().parse().map_err(|_| bad())?;
        if rows == 0 || cols == 0 {
            return Err(bad());
        }
        Ok(GridDims { rows, cols })
    }
}

#[derive(Args, Debug, Clone)]
#[command(group(ArgGroup::new("source").required(true).args(["grid", "graph"])))]
pub struct GraphArgs {
    /// Grid graph with R rows and C columns.
    #[arg(long, value_name = "RxC", env = "BONSAI_GRID")]
    pub grid: Option<GridDims>,
    /// Dual graph JSON file.
    #[arg(long, value_name = "FILE", env = "BONSAI_GRAPH")]
    pub graph: Option<PathBuf>,
    /// Population of every grid cell.
    #[arg(
        long,
        value_name = "N",
        default_value_t = 1,
        env = "BONSAI_POP_PER_NODE"
    )]
    pub pop_per_node: u64,
}

impl GraphArgs {
    pub fn build(&self) -> Result<Graph> {
        match (&self.grid, &self.graph) {
            (Some(d), _) => build_grid(d.rows, d.cols, self.pop_per_node),
            (None, Some(path)) => load_graph(path),
            (None, None) => Err(Error::InvalidParameter(
                "either --grid or --graph is required".into(),
            )),
        }
    }

    fn source(&self) -> GraphSource {
        match (&self.grid, &self.graph) {
            (Some(d), _) => GraphSource::Grid {
                rows: d.rows,
                cols: d.cols,
                pop_per_node: self.pop_per_node,
            },
            (None, Some(p)) => GraphSource::File { path: p.clone() },
            (None, None) => unreachable!("clap enforces a graph source"),
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum Method {
    #[value(name = "complete-cut")]
    CompleteCut,
    Bonsai,
    Alg2,
    #[value(name = "recom-a")]
    RecomA,
    #[value(name = "recom-b")]
    RecomB,
    #[value(name = "recom-c")]
    RecomC,
    #[value(name = "recom-d")]
    RecomD,
    #[value(name = "oracle-prop1")]
    OracleProp1,
    #[value(name = "oracle-prop2")]
    OracleProp2,
    Cuttability,
}

impl Method {
    fn recom_variant(self) -> Option<RecomVariant> {
        match self {
            Method::RecomA => Some(RecomVariant::A),
            Method::RecomB => Some(RecomVariant::B),
            Method::RecomC => Some(RecomVariant::C),
            Method::RecomD => Some(RecomVariant::D),
            _ => None,
        }
    }

    fn is_independent_sampler(self) -> bool {
        matches!(self, Method::CompleteCut | Method::Bonsai | Method::Alg2)
    }
}

#[derive(Args, Debug, Clone)]
pub struct RunArgs {
    #[command(flatten)]
    pub graph: GraphArgs,
    #[arg(long, value_enum, env = "BONSAI_METHOD")]
    pub method: Method,
    /// Number of districts.
    #[arg(short = 'k', long = "districts", value_name = "K", env = "BONSAI_K")]
    pub k: usize,
    /// Population tolerance, as a decimal or a fraction like 1/100.
    #[arg(long, default_value = "0", env = "BONSAI_EPSILON")]
    pub epsilon: Epsilon,
    #[arg(long, default_value = "one", value_parser = ["one", "identity"], env = "BONSAI_PHI")]
    pub phi: String,
    #[arg(long, default_value = "balanced", value_parser = ["balanced", "random"], env = "BONSAI_BEST")]
    pub best: String,
    #[arg(long, value_name = "N", env = "BONSAI_MAX_TREES")]
    pub max_trees: Option<u32>,
    #[arg(long, value_name = "N", env = "BONSAI_MAX_FAILS")]
    pub max_fails: Option<u32>,
    #[arg(long, value_name = "N", env = "BONSAI_GLOBAL_CAP")]
    pub global_cap: Option<u64>,
    #[arg(long, default_value = "uniform", value_parser = ["uniform", "minimum"], env = "BONSAI_TREES")]
    pub trees: String,
    /// Per-edge weight offsets (idA,idB,bias rows) for minimum spanning trees.
    #[arg(long, value_name = "FILE", env = "BONSAI_EDGE_BIAS")]
    pub edge_bias: Option<PathBuf>,
    /// Plans to draw; for cuttability, trees to draw.
    #[arg(
        long,
        value_name = "N",
        alias = "num-trees",
        conflicts_with = "steps",
        env = "BONSAI_NUM_PLANS"
    )]
    pub num_plans: Option<u64>,
    /// Chain length for the ReCom methods.
    #[arg(long, value_name = "N", env = "BONSAI_STEPS")]
    pub steps: Option<u64>,
    /// Record every N-th chain state.
    #[arg(long, value_name = "N", requires = "steps", env = "BONSAI_SUBSAMPLE")]
    pub subsample: Option<u64>,
    /// Independent chains, run concurrently.
    #[arg(long, value_name = "N", default_value_t = 1, env = "BONSAI_CHAINS")]
    pub chains: u64,
    /// Vote field for ordered district shares.
    #[arg(long, value_name = "NAME", env = "BONSAI_ELECTION")]
    pub election: Option<String>,
    #[arg(long, default_value_t = 0, env = "BONSAI_SEED")]
    pub seed: u64,
    /// Worker threads (default: all cores).
    #[arg(long, value_name = "W", env = "BONSAI_WORKERS")]
    pub workers: Option<usize>,
    #[arg(long, value_name = "DIR", default_value = "out", env = "BONSAI_OUT")]
    pub out: PathBuf,
}

#[derive(Args, Debug, Clone)]
pub struct ValidateArgs {
    #[command(flatten)]
    pub graph: GraphArgs,
    #[arg(short = 'k', long = "districts", value_name = "K", env = "BONSAI_K")]
    pub k: usize,
    #[arg(long, default_value = "0", env = "BONSAI_EPSILON")]
    pub epsilon: Epsilon,
    /// plans.jsonl file to check.
    #[arg(long, value_name = "FILE")]
    pub plans: PathBuf,
    /// Also write the report as JSON lines here.
    #[arg(long, value_name = "FILE")]
    pub report: Option<PathBuf>,
}

#[derive(Clone, Debug, Serialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum GraphSource {
    Grid {
        rows: usize,
        cols: usize,
        pop_per_node: u64,
    },
    File {
        path: PathBuf,
    },
}

/// A checked run configuration; recorded verbatim in the manifest.
#[derive(Clone, Debug, Serialize)]
pub struct RunConfig {
    pub graph: GraphSource,
    pub method: Method,
    pub k: usize,
    pub epsilon: String,
    pub sampler: BonsaiParams,
    pub edge_bias: Option<PathBuf>,
    pub num_plans: Option<u64>,
    pub steps: Option<u64>,
    pub subsample: Option<u64>,
    pub chains: u64,
    pub election: Option<String>,
    pub seed: u64,
    pub workers: Option<usize>,
    pub out: PathBuf,
}

impl RunConfig {
    /// Checks that the method has every parameter it needs.
    pub fn from_args(a: &RunArgs) -> Result<RunConfig> {
        let bad = |m: &str| Err(Error::InvalidParameter(m.to_string()));
        if a.k == 0 {
            return bad("k must be positive");
        }
        let mut sampler = BonsaiParams::default()
            .with_epsilon(a.epsilon)
            .with_phi(a.phi.parse::<Phi>()?)
            .with_best(a.best.parse::<BestRule>()?)
            .with_tree_source(a.trees.parse::<TreeSource>()?);
        if let Some(n) = a.max_trees {
            sampler.max_trees = n;
        }
        if let Some(n) = a.max_fails {
            sampler.max_fails = n;
        }
        if let Some(n) = a.global_cap {
            sampler.global_cap = n;
        }
        if sampler.max_trees == 0 || sampler.max_fails == 0 || sampler.global_cap == 0 {
            return bad("--max-trees, --max-fails and --global-cap must be positive");
        }
        let m = a.method;
        if m.is_independent_sampler() || m == Method::Cuttability {
            match a.num_plans {
                None => return bad("this method needs --num-plans"),
                Some(0) => return bad("--num-plans must be positive"),
                Some(_) => {}
            }
        }
        if m.recom_variant().is_some() {
            match a.steps {
                None => return bad("ReCom methods need --steps"),
                Some(0) => return bad("--steps must be positive"),
                Some(_) => {}
            }
            if a.subsample == Some(0) || a.chains == 0 {
                return bad("--subsample and --chains must be positive");
            }
        } else if a.steps.is_some() {
            return bad("--steps only applies to ReCom methods");
        }
        let exact_only = matches!(
            m,
            Method::CompleteCut
                | Method::Alg2
                | Method::OracleProp1
                | Method::OracleProp2
                | Method::Cuttability
        );
        if exact_only && !a.epsilon.is_zero() {
            return bad("this method requires --epsilon 0");
        }
        if a.workers == Some(0) {
            return bad("--workers must be positive");
        }
        Ok(RunConfig {
            graph: a.graph.source(),
            method: m,
            k: a.k,
            epsilon: a.epsilon.to_string(),
            sampler,
            edge_bias: a.edge_bias.clone(),
            num_plans: a.num_plans,
            steps: a.steps,
            subsample: a.steps.map(|_| a.subsample.unwrap_or(1)),
            chains: a.chains,
            election: a.election.clone(),
            seed: a.seed,
            workers: a.workers,
            out: a.out.clone(),
        })
    }

    fn grid(&self) -> Option<(usize, usize)> {
        match self.graph {
            GraphSource::Grid { rows, cols, .. } => Some((rows, cols)),
            GraphSource::File { .. } => None,
        }
    }
}

#[derive(Serialize)]
struct Manifest<'a> {
    tool: &'static str,
    version: &'static str,
    config: &'a RunConfig,
    graph_nodes: usize,
    graph_edges: usize,
    total_pop: u64,
    outputs: Vec<String>,
    results: serde_json::Value,
}

/// What a run produced, for callers and the manifest.
#[derive(Clone, Debug, Default, Serialize)]
pub struct RunOutcome {
    pub outputs: Vec<String>,
    pub results: serde_json::Value,
}

fn json_file<T: Serialize + ?Sized>(path: &Path, value: &T) -> Result<()> {
    let mut w = BufWriter::new(File::create(path)?);
    serde_json::to_writer_pretty(&mut w, value).map_err(|e| Error::Parse(e.to_string()))?;
    w.write_all(b"\n")?;
    w.flush()?;
    Ok(())
}

/// One line of plans.jsonl, with node ids in graph order.
pub fn plan_line(g: &Graph, plan_id: u64, plan: &Plan) -> String {
    let mut s = format!("{{\"plan_id\":{plan_id},\"assignment\":{{");
    for (v, &d) in plan.assignment().iter().enumerate() {
        if v > 0 {
            s.push(',');
        }
        s.push_str(&serde_json::to_string(g.label(v)).expect("string"));
        s.push(':');
        s.push_str(&d.to_string());
    }
    s.push_str("}}");
    s
}

/// Runs a configuration, writing its files into `cfg.out`.
pub fn run(cfg: &RunConfig) -> Result<RunOutcome> {
    let g = match &cfg.graph {
        GraphSource::Grid {
            rows,
            cols,
            pop_per_node,
        } => build_grid(*rows, *cols, *pop_per_node)?,
        GraphSource::File { path } => load_graph(path)?,
    };
    if let Some(e) = &cfg.election {
        if g.votes(e).is_none() {
            return Err(Error::MissingElection(e.clone()));
        }
    }
    let mut sampler = cfg.sampler.clone();
    if let Some(path) = &cfg.edge_bias {
        sampler.bias = Some(load_edge_bias(&g, path)?);
    }
    fs::create_dir_all(&cfg.out)?;
    let mut builder = rayon::ThreadPoolBuilder::new();
    if let Some(w) = cfg.workers {
        builder = builder.num_threads(w);
    }
    let pool = builder
        .build()
        .map_err(|e| Error::InvalidParameter(e.to_string()))?;
    let outcome = pool.install(|| match cfg.method {
        Method::CompleteCut | Method::Bonsai | Method::Alg2 => run_independent(cfg, &g, &sampler),
        Method::RecomA | Method::RecomB | Method::RecomC | Method::RecomD => {
            run_chains(cfg, &g, &sampler)
        }
        Method::OracleProp1 => run_oracle(cfg, &g, complete_cut_distribution(&g, cfg.k)?),
        Method::OracleProp2 => run_oracle(cfg, &g, algorithm2_distribution(&g, cfg.k)?),
        Method::Cuttability => run_cuttability(cfg, &g),
    })?;
    let mut outputs = outcome.outputs.clone();
    outputs.push("manifest.json".into());
    json_file(
        &cfg.out.join("manifest.json"),
        &Manifest {
            tool: "bonsai",
            version: env!("CARGO_PKG_VERSION"),
            config: cfg,
            graph_nodes: g.node_count(),
            graph_edges: g.edge_count(),
            total_pop: g.total_pop(),
            outputs,
            results: outcome.results.clone(),
        },
    )?;
    Ok(outcome)
}

/// Writes plans.jsonl, the metric CSVs and summary.json for an ensemble
/// delivered in order.
struct EnsembleSink<'a> {
    g: &'a Graph,
    opts: MetricOptions,
    plans: BufWriter<File>,
    metrics: MetricWriter,
    acc: EnsembleAccumulator,
    out: &'a Path,
}

impl<'a> EnsembleSink<'a> {
    fn create(cfg: &'a RunConfig, g: &'a Graph) -> Result<EnsembleSink<'a>> {
        let opts = MetricOptions {
            grid: cfg.grid(),
            election: cfg.election.clone(),
        };
        Ok(EnsembleSink {
            g,
            plans: BufWriter::new(File::create(cfg.out.join("plans.jsonl"))?),
            metrics: MetricWriter::create(&cfg.out, opts.grid.is_some(), opts.election.is_some())?,
            opts,
            acc: EnsembleAccumulator::default(),
            out: &cfg.out,
        })
    }

    fn metrics(&self, id: u64, plan: &Plan) -> Result<PlanMetrics> {
        plan_metrics(self.g, id, plan, &self.opts)
    }

    fn push(&mut self, id: u64, plan: &Plan, m: PlanMetrics) -> Result<()> {
        writeln!(self.plans, "{}", plan_line(self.g, id, plan))?;
        self.metrics.write(&m)?;
        self.acc.add(&m);
        Ok(())
    }

    fn finish(mut self) -> Result<Vec<String>> {
        self.plans.flush()?;
        self.metrics.finish()?;
        let summary = self.acc.finish()?;
        json_file(&self.out.join("summary.json"), &summary)?;
        let mut files = vec!["plans.jsonl".to_string(), "cut_edges.csv".into()];
        if self.opts.grid.is_some() {
            files.push("perimeters.csv".into());
        }
        if self.opts.election.is_some() {
            files.push("shares.csv".into());
        }
        files.push("summary.json".into());
        Ok(files)
    }
}

fn run_independent(cfg: &RunConfig, g: &Graph, params: &BonsaiParams) -> Result<RunOutcome> {
    let n = cfg.num_plans.expect("checked in from_args");
    let mut sink = EnsembleSink::create(cfg, g)?;
    let (mut trees, mut backtracks) = (0u64, 0u64);
    let mut start = 0;
    while start < n {
        let end = (start + CHUNK).min(n);
        let batch: Vec<Result<(Plan, u64, u64, PlanMetrics)>> = (start..end)
            .into_par_iter()
            .map(|i| {
                let mut rng = plan_rng(cfg.seed, i);
                let (plan, t, b) = match cfg.method {
                    Method::CompleteCut => {
                        (complete_cut(g, cfg.k, &mut rng, params.global_cap)?, 0, 0)
                    }
                    Method::Bonsai => {
                        let (p, tr) = bonsai_sample(g, cfg.k, &mut rng, params)?;
                        (p, tr.trees_drawn, tr.backtracks)
                    }
                    _ => {
                        let (p, tr) = simultaneous_cut_sample(g, cfg.k, &mut rng, params)?;
                        (p, tr.trees_drawn, tr.backtracks)
                    }
                };
                let m = sink.metrics(i, &plan)?;
                Ok((plan, t, b, m))
            })
            .collect();
        for (i, r) in (start..end).zip(batch) {
            let (plan, t, b, m) =
                r.map_err(|e| Error::InvalidParameter(format!("plan {i}: {e}")))?;
            trees += t;
            backtracks += b;
            sink.push(i, &plan, m)?;
        }
        start = end;
    }
    Ok(RunOutcome {
        outputs: sink.finish()?,
        results: serde_json::json!({
            "plans": n,
            "trees_drawn": trees,
            "backtracks": backtracks,
        }),
    })
}

fn run_chains(cfg: &RunConfig, g: &Graph, params: &BonsaiParams) -> Result<RunOutcome> {
    let variant = cfg.method.recom_variant().expect("recom method");
    let mut recom = RecomParams::new(variant, params.epsilon);
    recom.bias = params.bias.clone();
    let steps = cfg.steps.expect("checked in from_args");
    let subsample = cfg.subsample.unwrap_or(1);
    let chains: Vec<Result<Vec<Plan>>> = (0..cfg.chains)
        .into_par_iter()
        .map(|chain| {
            let spec = ChainSpec {
                steps,
                subsample,
                seed: cfg.seed,
                chain,
            };
            recom_chain(g, cfg.k, &recom, params, spec)
        })
        .collect();
    let mut sink = EnsembleSink::create(cfg, g)?;
    let mut id = 0u64;
    for (c, states) in chains.into_iter().enumerate() {
        let states = states.map_err(|e| Error::InvalidParameter(format!("chain {c}: {e}")))?;
        for plan in &states {
            let m = sink.metrics(id, plan)?;
            sink.push(id, plan, m)?;
            id += 1;
        }
    }
    Ok(RunOutcome {
        outputs: sink.finish()?,
        results: serde_json::json!({ "chains": cfg.chains, "plans": id }),
    })
}

fn run_oracle(cfg: &RunConfig, g: &Graph, d: ExactDistribution) -> Result<RunOutcome> {
    json_file(&cfg.out.join("distribution.json"), &d.to_json(g))?;
    Ok(RunOutcome {
        outputs: vec!["distribution.json".into()],
        results: serde_json::json!({ "support": d.len() }),
    })
}

fn run_cuttability(cfg: &RunConfig, g: &Graph) -> Result<RunOutcome> {
    let n = cfg.num_plans.expect("checked in from_args");
    let report = cuttability_parallel(g, cfg.k, n, cfg.seed)?;
    let value = serde_json::json!({
        "trees": report.trees,
        "completely_cuttable": report.completely_cuttable,
        "pct_cuttable": report.pct_cuttable(),
        "max_valid_edges": report.max_valid_edges,
        "trees_at_max": report.trees_at_max,
    });
    json_file(&cfg.out.join("cuttability.json"), &value)?;
    Ok(RunOutcome {
        outputs: vec!["cuttability.json".into()],
        results: value,
    })
}

/// Outcome of checking one plan.
#[derive(Clone, Debug, PartialEq, Eq, Serialize)]
pub struct PlanCheck {
    pub plan_id: u64,
    pub valid: bool,
    pub problems: Vec<String>,
}

/// Checks every plan in a plans.jsonl file for district count, connectivity
/// and population bounds. Lines that are not JSON plan objects are errors;
/// plans naming unknown nodes or missing nodes are flagged.
pub fn validate_plans(g: &Graph, balance: &Balance, path: &Path) -> Result<Vec<PlanCheck>> {
    #[derive(serde::Deserialize)]
    struct Line {
        plan_id: u64,
        assignment: serde_json::Map<String, serde_json::Value>,
    }
    let index = g.label_index();
    let mut out = Vec::new();
    for (lineno, line) in BufReader::new(File::open(path)?).lines().enumerate() {
        let line = line?;
        if line.trim().is_empty() {
            continue;
        }
        let parsed: Line = serde_json::from_str(&line)
            .map_err(|e| Error::Parse(format!("line {}: {e}", lineno + 1)))?;
        let mut problems = Vec::new();
        let mut labels = vec![usize::MAX; g.node_count()];
        for (node, d) in &parsed.assignment {
            let d = d.as_u64().ok_or_else(|| {
                Error::Parse(format!(
                    "line {}: district of {node} is not an integer",
                    lineno + 1
                ))
            })?;
            match index.get(node.as_str()) {
                Some(&v) => labels[v] = d as usize,
                None => problems.push(format!("unknown node {node}")),
            }
        }
        let missing = labels.iter().filter(|&&l| l == usize::MAX).count();
        if missing > 0 {
            problems.push(format!("{missing} nodes unassigned"));
        } else {
            let plan = Plan::from_assignment(&labels);
            problems.extend(plan.violations(g, balance).iter().map(|v| v.to_string()));
        }
        out.push(PlanCheck {
            plan_id: parsed.plan_id,
            valid: problems.is_empty(),
            problems,
        });
    }
    Ok(out)
}

fn run_validate(a: &ValidateArgs) -> Result<bool> {
    let g = a.graph.build()?;
    let balance = Balance::for_graph(&g, a.k, a.epsilon)?;
    let checks = validate_plans(&g, &balance, &a.plans)?;
    let mut report = match &a.report {
        Some(p) => Some(BufWriter::new(File::create(p)?)),
        None => None,
    };
    let mut failed = 0;
    for c in &checks {
        if c.valid {
            println!("plan {}: ok", c.plan_id);
        } else {
            failed += 1;
            println!("plan {}: FAIL: {}", c.plan_id, c.problems.join("; "));
        }
        if let Some(w) = &mut report {
            writeln!(w, "{}", serde_json::to_string(c).expect("serializable"))?;
        }
    }
    if let Some(w) = &mut report {
        w.flush()?;
    }
    println!("{} plans checked, {} failed", checks.len(), failed);
    Ok(failed == 0)
}

/// Parses arguments and runs; returns the process exit code (0 success,
/// 1 validation failures, 2 errors).
pub fn main_with_args<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<std::ffi::OsString> + Clone,
{
    let cli = match Cli::parse_args(args) {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { 2 } else { 0 };
        }
    };
    let result = match cli.command {
        Command::Validate(a) => run_validate(&a).map(|ok| if ok { 0 } else { 1 }),
        Command::Run(a) => RunConfig::from_args(&a).and_then(|cfg| {
            let outcome = run(&cfg)?;
            println!(
                "{}",
                serde_json::to_string(&outcome.results).expect("serializable")
            );
            Ok(0)
        }),
    };
    match result {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error: {e}");
            2
        }
    }
}
