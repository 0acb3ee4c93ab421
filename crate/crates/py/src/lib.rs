//! Python bindings: graphs, plans, the samplers and the exact oracles.

use std::path::PathBuf;

use bonsai::bonsai::{self as sampler, BestRule, BonsaiParams};
use bonsai::oracle::{self, ExactDistribution};
use bonsai::recom::{self, ChainSpec, RecomParams, RecomVariant};
use bonsai::rng::plan_rng;
use bonsai::trees::TreeSource;
use bonsai::{analytics, Balance, Epsilon, Error, Phi};
use num_bigint::BigInt;
use pyo3::exceptions::{PyRuntimeError, PyValueError};
use pyo3::prelude::*;
use pyo3::types::PyDict;

fn py_err(e: Error) -> PyErr {
    match e {
        Error::Stuck { .. } | Error::NoCuttableTree(_) | Error::RecomExhausted => {
            PyRuntimeError::new_err(e.to_string())
        }
        _ => PyValueError::new_err(e.to_string()),
    }
}

fn epsilon(x: f64) -> PyResult<Epsilon> {
    Epsilon::from_f64(x).map_err(py_err)
}

#[pyclass(name = "Graph", module = "bonsai_py", frozen)]
struct PyGraph {
    inner: bonsai::Graph,
}

#[pymethods]
impl PyGraph {
    /// Graph from node labels, populations and edges given as label pairs.
    #[new]
    fn new(labels: Vec<String>, pops: Vec<u64>, edges: Vec<(String, String)>) -> PyResult<PyGraph> {
        let index: std::collections::HashMap<&str, usize> = labels
            .iter()
            .enumerate()
            .map(|(i, l)| (l.as_str(), i))
            .collect();
        let lookup = |l: &str| {
            index
                .get(l)
                .copied()
                .ok_or_else(|| py_err(Error::UnknownNode(l.to_string())))
        };
        let edges = edges
            .iter()
            .map(|(u, v)| Ok((lookup(u)?, lookup(v)?)))
            .collect::<PyResult<Vec<_>>>()?;
        let inner = bonsai::Graph::new(labels, pops, edges).map_err(py_err)?;
        Ok(PyGraph { inner })
    }

    #[staticmethod]
    #[pyo3(signature = (rows, cols, pop=1))]
    fn grid(rows: usize, cols: usize, pop: u64) -> PyResult<PyGraph> {
        Ok(PyGraph {
            inner: bonsai::build_grid(rows, cols, pop).map_err(py_err)?,
        })
    }

    #[staticmethod]
    fn load(path: PathBuf) -> PyResult<PyGraph> {
        Ok(PyGraph {
            inner: bonsai::load_graph(path).map_err(py_err)?,
        })
    }

    #[getter]
    fn node_count(&self) -> usize {
        self.inner.node_count()
    }

    #[getter]
    fn edge_count(&self) -> usize {
        self.inner.edge_count()
    }

    #[getter]
    fn total_pop(&self) -> u64 {
        self.inner.total_pop()
    }

    #[getter]
    fn labels(&self) -> Vec<String> {
        self.inner.labels().to_vec()
    }

    #[getter]
    fn pops(&self) -> Vec<u64> {
        self.inner.pops().to_vec()
    }

    #[getter]
    fn edges(&self) -> Vec<(usize, usize)> {
        self.inner.edges().to_vec()
    }

    fn __repr__(&self) -> String {
        format!(
            "Graph(nodes={}, edges={})",
            self.inner.node_count(),
            self.inner.edge_count()
        )
    }
}

#[pyclass(
    name = "Plan",
    module = "bonsai_py",
    frozen,
    eq,
    hash,
    skip_from_py_object
)]
#[derive(Clone, PartialEq, Eq, Hash)]
struct PyPlan {
    inner: bonsai::Plan,
}

#[pymethods]
impl PyPlan {
    /// Plan from a district label per node; labels are renumbered
    /// canonically.
    #[new]
    fn new(assignment: Vec<usize>) -> PyPlan {
        PyPlan {
            inner: bonsai::Plan::from_assignment(&assignment),
        }
    }

    #[getter]
    fn assignment(&self) -> Vec<usize> {
        self.inner.assignment().to_vec()
    }

    #[getter]
    fn k(&self) -> usize {
        self.inner.k()
    }

    fn districts(&self) -> Vec<Vec<usize>> {
        self.inner.districts()
    }

    fn district_pops(&self, graph: &PyGraph) -> Vec<u64> {
        self.inner.district_pops(&graph.inner)
    }

    fn cut_edges(&self, graph: &PyGraph) -> u64 {
        analytics::cut_edges(&graph.inner, &self.inner)
    }

    /// Connectivity, district count and population bounds at tolerance
    /// `epsilon`.
    #[pyo3(signature = (graph, epsilon=0.0))]
    fn is_valid(&self, graph: &PyGraph, epsilon: f64) -> PyResult<bool> {
        let eps = self::epsilon(epsilon)?;
        let balance = Balance::for_graph(&graph.inner, self.inner.k(), eps).map_err(py_err)?;
        Ok(self.inner.is_valid(&graph.inner, &balance))
    }

    fn __repr__(&self) -> String {
        format!("Plan({:?})", self.inner.assignment())
    }
}

fn wrap(plans: Vec<bonsai::Plan>) -> Vec<PyPlan> {
    plans.into_iter().map(|inner| PyPlan { inner }).collect()
}

#[allow(clippy::too_many_arguments)]
fn params(
    eps: f64,
    phi: &str,
    best: &str,
    trees: &str,
    max_trees: u32,
    max_fails: u32,
    global_cap: u64,
) -> PyResult<BonsaiParams> {
    let mut p = BonsaiParams::default()
        .with_epsilon(epsilon(eps)?)
        .with_phi(phi.parse::<Phi>().map_err(py_err)?)
        .with_best(best.parse::<BestRule>().map_err(py_err)?)
        .with_tree_source(trees.parse::<TreeSource>().map_err(py_err)?);
    p.max_trees = max_trees;
    p.max_fails = max_fails;
    p.global_cap = global_cap;
    Ok(p)
}

/// `count` independent Bonsai plans; plan `i` uses stream `(seed, i)`, the
/// same as the command-line tool.
#[pyfunction]
#[pyo3(signature = (graph, k, count, seed=0, epsilon=0.0, phi="one", best="balanced", trees="uniform",
                    max_trees=10, max_fails=3, global_cap=10_000))]
#[allow(clippy::too_many_arguments)]
fn bonsai_sample(
    py: Python<'_>,
    graph: &PyGraph,
    k: usize,
    count: u64,
    seed: u64,
    epsilon: f64,
    phi: &str,
    best: &str,
    trees: &str,
    max_trees: u32,
    max_fails: u32,
    global_cap: u64,
) -> PyResult<Vec<PyPlan>> {
    let p = params(epsilon, phi, best, trees, max_trees, max_fails, global_cap)?;
    let g = &graph.inner;
    let plans = py.detach(|| {
        sampler::independent_samples(count, seed, |rng| {
            sampler::bonsai_sample(g, k, rng, &p).map(|(plan, _)| plan)
        })
        .into_iter()
        .collect::<bonsai::Result<Vec<_>>>()
    });
    Ok(wrap(plans.map_err(py_err)?))
}

/// `count` plans from the simultaneous-cut sampler at exact balance.
#[pyfunction]
#[pyo3(signature = (graph, k, count, seed=0))]
fn simultaneous_cut_sample(
    py: Python<'_>,
    graph: &PyGraph,
    k: usize,
    count: u64,
    seed: u64,
) -> PyResult<Vec<PyPlan>> {
    let p = BonsaiParams::default();
    let g = &graph.inner;
    let plans = py.detach(|| {
        sampler::independent_samples(count, seed, |rng| {
            sampler::simultaneous_cut_sample(g, k, rng, &p).map(|(plan, _)| plan)
        })
        .into_iter()
        .collect::<bonsai::Result<Vec<_>>>()
    });
    Ok(wrap(plans.map_err(py_err)?))
}

/// `count` plans from Complete Cut (rejection on completely cuttable trees).
#[pyfunction]
#[pyo3(signature = (graph, k, count, seed=0, max_attempts=1_000_000))]
fn complete_cut(
    py: Python<'_>,
    graph: &PyGraph,
    k: usize,
    count: u64,
    seed: u64,
    max_attempts: u64,
) -> PyResult<Vec<PyPlan>> {
    let g = &graph.inner;
    let plans = py.detach(|| {
        sampler::independent_samples(count, seed, |rng| {
            sampler::complete_cut(g, k, rng, max_attempts)
        })
        .into_iter()
        .collect::<bonsai::Result<Vec<_>>>()
    });
    Ok(wrap(plans.map_err(py_err)?))
}

/// Uniform-tree cuttability statistics at exact balance.
#[pyfunction]
#[pyo3(signature = (graph, k, num_trees, seed=0))]
fn cuttability<'py>(
    py: Python<'py>,
    graph: &PyGraph,
    k: usize,
    num_trees: u64,
    seed: u64,
) -> PyResult<Bound<'py, PyDict>> {
    let g = &graph.inner;
    let r = py
        .detach(|| sampler::cuttability_parallel(g, k, num_trees, seed))
        .map_err(py_err)?;
    let d = PyDict::new(py);
    d.set_item("trees", r.trees)?;
    d.set_item("completely_cuttable", r.completely_cuttable)?;
    d.set_item("pct_cuttable", r.pct_cuttable())?;
    d.set_item("max_valid_edges", r.max_valid_edges)?;
    d.set_item("trees_at_max", r.trees_at_max)?;
    Ok(d)
}

/// One ReCom chain seeded by a Bonsai plan; returns every
/// `subsample`-th state.
#[pyfunction]
#[pyo3(signature = (graph, k, variant, steps, subsample=1, seed=0, chain=0, epsilon=0.0))]
#[allow(clippy::too_many_arguments)]
fn recom_chain(
    py: Python<'_>,
    graph: &PyGraph,
    k: usize,
    variant: &str,
    steps: u64,
    subsample: u64,
    seed: u64,
    chain: u64,
    epsilon: f64,
) -> PyResult<Vec<PyPlan>> {
    let v = variant.parse::<RecomVariant>().map_err(py_err)?;
    let rp = RecomParams::new(v, self::epsilon(epsilon)?);
    let spec = ChainSpec {
        steps,
        subsample,
        seed,
        chain,
    };
    let g = &graph.inner;
    let plans = py.detach(|| recom::recom_chain(g, k, &rp, &BonsaiParams::default(), spec));
    Ok(wrap(plans.map_err(py_err)?))
}

/// Every valid plan with `k` districts at tolerance `epsilon`.
#[pyfunction]
#[pyo3(signature = (graph, k, epsilon=0.0))]
fn enumerate_plans(graph: &PyGraph, k: usize, epsilon: f64) -> PyResult<Vec<PyPlan>> {
    let plans = oracle::enumerate_plans(
        &graph.inner,
        k,
        self::epsilon(epsilon)?,
        oracle::DEFAULT_STATE_CAP,
    )
    .map_err(py_err)?;
    Ok(wrap(plans))
}

fn big_int<'py>(py: Python<'py>, x: &BigInt) -> PyResult<Bound<'py, PyAny>> {
    py.import("builtins")?
        .getattr("int")?
        .call1((x.to_string(),))
}

/// `[(plan, Fraction)]` for an exact law.
fn distribution<'py>(
    py: Python<'py>,
    d: ExactDistribution,
) -> PyResult<Vec<(PyPlan, Bound<'py, PyAny>)>> {
    let fraction = py.import("fractions")?.getattr("Fraction")?;
    d.entries()
        .iter()
        .map(|(plan, q)| {
            let f = fraction.call1((big_int(py, q.numer())?, big_int(py, q.denom())?))?;
            Ok((
                PyPlan {
                    inner: plan.clone(),
                },
                f,
            ))
        })
        .collect()
}

/// Exact law of Complete Cut as `[(plan, Fraction)]`.
#[pyfunction]
fn complete_cut_distribution<'py>(
    py: Python<'py>,
    graph: &PyGraph,
    k: usize,
) -> PyResult<Vec<(PyPlan, Bound<'py, PyAny>)>> {
    distribution(
        py,
        oracle::complete_cut_distribution(&graph.inner, k).map_err(py_err)?,
    )
}

/// Exact law of the simultaneous-cut sampler as `[(plan, Fraction)]`.
#[pyfunction]
fn algorithm2_distribution<'py>(
    py: Python<'py>,
    graph: &PyGraph,
    k: usize,
) -> PyResult<Vec<(PyPlan, Bound<'py, PyAny>)>> {
    distribution(
        py,
        oracle::algorithm2_distribution(&graph.inner, k).map_err(py_err)?,
    )
}

/// A single Bonsai plan drawn from stream `(seed, 0)`.
#[pyfunction]
#[pyo3(signature = (graph, k, seed=0, epsilon=0.0))]
fn bonsai_plan(graph: &PyGraph, k: usize, seed: u64, epsilon: f64) -> PyResult<PyPlan> {
    let p = BonsaiParams::default().with_epsilon(self::epsilon(epsilon)?);
    let (inner, _) =
        sampler::bonsai_sample(&graph.inner, k, &mut plan_rng(seed, 0), &p).map_err(py_err)?;
    Ok(PyPlan { inner })
}

#[pymodule]
fn bonsai_py(m: &Bound<'_, PyModule>) -> PyResult<()> {
    m.add_class::<PyGraph>()?;
    m.add_class::<PyPlan>()?;
    m.add_function(wrap_pyfunction!(bonsai_plan, m)?)?;
    m.add_function(wrap_pyfunction!(bonsai_sample, m)?)?;
    m.add_function(wrap_pyfunction!(simultaneous_cut_sample, m)?)?;
    m.add_function(wrap_pyfunction!(complete_cut, m)?)?;
    m.add_function(wrap_pyfunction!(cuttability, m)?)?;
    m.add_function(wrap_pyfunction!(recom_chain, m)?)?;
    m.add_function(wrap_pyfunction!(enumerate_plans, m)?)?;
    m.add_function(wrap_pyfunction!(complete_cut_distribution, m)?)?;
    m.add_function(wrap_pyfunction!(algorithm2_distribution, m)?)?;
    Ok(())
}
