//! Python bindings: instances, the solve pipeline, audits, sampling, and
//! the generators. Structured results cross the boundary as Python
//! dicts decoded from the library's JSON.

use pyo3::create_exception;
use pyo3::exceptions::PyException;
use pyo3::prelude::*;
use pyo3::types::PyDict;
use serde_json::Value;

use fairmatch::datagen::{self, ColumnMap, SyntheticConfig, DEFAULT_RANK_PERCENTS};
use fairmatch::decomp::MatchingDistribution;
use fairmatch::ext::{self, Algorithm, FairnessObjective, RunOptions, Variant};
use fairmatch::greedy::ScanOrder;
use fairmatch::instance::compute_stats;
use fairmatch::verify;

create_exception!(_fairmatch, FairmatchError, PyException);
create_exception!(_fairmatch, InfeasibleError, FairmatchError);

fn to_py(err: fairmatch::Error) -> PyErr {
    if err.is_infeasible() {
        InfeasibleError::new_err(err.to_string())
    } else {
        FairmatchError::new_err(err.to_string())
    }
}

fn json_to_py<'py>(py: Python<'py>, text: &str) -> PyResult<Bound<'py, PyAny>> {
    py.import("json")?.call_method1("loads", (text,))
}

fn py_to_json(py: Python<'_>, obj: &Bound<'_, PyAny>) -> PyResult<Value> {
    let text: String = py.import("json")?.call_method1("dumps", (obj,))?.extract()?;
    serde_json::from_str(&text).map_err(|e| FairmatchError::new_err(e.to_string()))
}

/// An immutable matching instance.
#[pyclass(frozen, module = "fairmatch._fairmatch")]
struct Instance {
    inner: fairmatch::instance::Instance,
}

#[pymethods]
impl Instance {
    #[staticmethod]
    fn from_json(text: &str) -> PyResult<Self> {
        fairmatch::instance::Instance::from_json(text)
            .map(|inner| Self { inner })
            .map_err(to_py)
    }

    fn to_json(&self) -> String {
        self.inner.to_json()
    }

    #[getter]
    fn num_items(&self) -> usize {
        self.inner.num_items()
    }

    #[getter]
    fn num_platforms(&self) -> usize {
        self.inner.num_platforms()
    }

    #[getter]
    fn num_edges(&self) -> usize {
        self.inner.num_edges()
    }

    #[getter]
    fn num_groups(&self) -> usize {
        self.inner.num_groups()
    }

    /// `(item, platform)` pairs in edge-index order.
    #[getter]
    fn edges(&self) -> Vec<(usize, usize)> {
        self.inner.edges().to_vec()
    }

    /// Most groups any edge counts toward.
    #[getter]
    fn delta(&self) -> usize {
        compute_stats(&self.inner).delta
    }

    /// Most groups meeting any platform's neighbourhood.
    #[getter]
    fn g(&self) -> usize {
        compute_stats(&self.inner).g
    }

    fn __eq__(&self, other: &Self) -> bool {
        self.inner == other.inner
    }

    fn __repr__(&self) -> String {
        format!(
            "Instance(items={}, platforms={}, edges={}, groups={})",
            self.inner.num_items(),
            self.inner.num_platforms(),
            self.inner.num_edges(),
            self.inner.num_groups()
        )
    }
}

/// A distribution over matchings plus the quantities needed to audit it.
#[pyclass(frozen, module = "fairmatch._fairmatch")]
struct Solution {
    inner: ext::Solution<f64>,
}

#[pymethods]
impl Solution {
    #[getter]
    fn algorithm(&self) -> &'static str {
        self.inner.algorithm.name()
    }

    #[getter]
    fn weights(&self) -> Vec<f64> {
        self.inner.distribution.weights_f64()
    }

    /// Edge indices of each support matching.
    #[getter]
    fn matchings(&self) -> Vec<Vec<usize>> {
        self.inner.distribution.entries.iter().map(|(m, _)| m.edges.clone()).collect()
    }

    #[getter]
    fn lp_value(&self) -> f64 {
        self.inner.lp_value
    }

    #[getter]
    fn mu(&self) -> Option<f64> {
        self.inner.mu
    }

    #[getter]
    fn t_star(&self) -> f64 {
        self.inner.t_star
    }

    #[getter]
    fn t(&self) -> f64 {
        self.inner.t
    }

    #[getter]
    fn delta(&self) -> f64 {
        self.inner.delta
    }

    #[getter]
    fn expected_size(&self) -> f64 {
        self.inner.report.expected_size
    }

    #[getter]
    fn audit_pass(&self) -> bool {
        self.inner.report.all_pass()
    }

    #[getter]
    fn warnings(&self) -> Vec<String> {
        self.inner.warnings.clone()
    }

    /// The instance the distribution was audited against.
    #[getter]
    fn audit_instance(&self) -> Instance {
        Instance {
            inner: self.inner.audit_instance.clone(),
        }
    }

    /// `{weights, matchings, trace_ref}` as a dict.
    fn distribution<'py>(&self, py: Python<'py>) -> PyResult<Bound<'py, PyAny>> {
        json_to_py(py, &self.inner.distribution.to_json(None).to_string())
    }

    fn report<'py>(&self, py: Python<'py>) -> PyResult<Bound<'py, PyAny>> {
        json_to_py(py, &self.inner.report.to_json())
    }

    fn trace<'py>(&self, py: Python<'py>) -> PyResult<Bound<'py, PyAny>> {
        json_to_py(py, &self.inner.trace_json().to_string())
    }

    fn __len__(&self) -> usize {
        self.inner.distribution.len()
    }
}

fn distribution_arg(py: Python<'_>, instance: &Instance, dist: &Bound<'_, PyAny>) -> PyResult<MatchingDistribution<f64>> {
    if let Ok(sol) = dist.cast::<Solution>() {
        return Ok(sol.get().inner.distribution.clone());
    }
    MatchingDistribution::from_json(&instance.inner, &py_to_json(py, dist)?).map_err(to_py)
}

/// Solve with `algorithm` in {exact, greedy, two_g, g}.
#[pyfunction]
#[pyo3(signature = (instance, algorithm, objective = "standard", epsilon = 1e-3, zeta = 0.0, seed = None, scale = false))]
fn solve(
    instance: &Instance,
    algorithm: &str,
    objective: &str,
    epsilon: f64,
    zeta: f64,
    seed: Option<u64>,
    scale: bool,
) -> PyResult<Solution> {
    let algorithm = Algorithm::parse(algorithm).map_err(to_py)?;
    let objective = FairnessObjective {
        variant: Variant::parse(objective).map_err(to_py)?,
        zeta,
    };
    let opts = RunOptions {
        epsilon,
        order: seed.map_or(ScanOrder::PreferenceRank, ScanOrder::Shuffled),
        scale,
        ..RunOptions::default()
    };
    ext::solve_extended::<f64>(&instance.inner, objective, algorithm, &opts)
        .map(|inner| Solution { inner })
        .map_err(to_py)
}

/// Audit a `Solution` or a distribution dict.
#[pyfunction]
#[pyo3(signature = (instance, distribution, t = 1.0, delta = 0.0, tol = 1e-9))]
fn audit<'py>(
    py: Python<'py>,
    instance: &Instance,
    distribution: &Bound<'py, PyAny>,
    t: f64,
    delta: f64,
    tol: f64,
) -> PyResult<Bound<'py, PyAny>> {
    let dist = distribution_arg(py, instance, distribution)?;
    let report = verify::audit(&instance.inner, &dist, &t, &delta, tol);
    let out = json_to_py(py, &report.to_json())?;
    out.cast::<PyDict>()?.set_item("all_pass", report.all_pass())?;
    Ok(out)
}

/// Frequency table of `draws` seeded samples.
#[pyfunction]
#[pyo3(signature = (instance, distribution, seed = 0, draws = 100_000))]
fn sample<'py>(
    py: Python<'py>,
    instance: &Instance,
    distribution: &Bound<'py, PyAny>,
    seed: u64,
    draws: usize,
) -> PyResult<Bound<'py, PyAny>> {
    let dist = distribution_arg(py, instance, distribution)?;
    let table = verify::sample(&instance.inner, &dist, seed, draws).map_err(to_py)?;
    json_to_py(py, &table.to_json())
}

/// Every group-fair matching, as lists of edge indices.
#[pyfunction]
#[pyo3(signature = (instance, strong = false))]
fn enumerate_group_fair(instance: &Instance, strong: bool) -> PyResult<Vec<Vec<usize>>> {
    let res = verify::enumerate_group_fair(&instance.inner, strong).map_err(to_py)?;
    Ok(res.matchings.into_iter().map(|m| m.edges).collect())
}

#[pyfunction]
#[pyo3(signature = (path, item_col = "item", platform_col = "platform", group_col = "group"))]
fn ingest(path: &str, item_col: &str, platform_col: &str, group_col: &str) -> PyResult<Instance> {
    let cols = ColumnMap {
        item: item_col.into(),
        platform: platform_col.into(),
        group: group_col.into(),
    };
    datagen::ingest(std::path::Path::new(path), &cols)
        .map(|inner| Instance { inner })
        .map_err(to_py)
}

#[pyfunction]
fn generate_bounds(instance: &Instance) -> PyResult<Instance> {
    datagen::generate_bounds(&instance.inner)
        .map(|inner| Instance { inner })
        .map_err(to_py)
}

#[pyfunction]
#[pyo3(signature = (instance, seed = 0, rank_percents = None))]
fn generate_if(instance: &Instance, seed: u64, rank_percents: Option<Vec<f64>>) -> PyResult<Instance> {
    let r = rank_percents.unwrap_or_else(|| DEFAULT_RANK_PERCENTS.to_vec());
    datagen::generate_if(&instance.inner, seed, &r)
        .map(|inner| Instance { inner })
        .map_err(to_py)
}

#[pyfunction]
#[pyo3(signature = (items, platforms, groups, max_groups_per_item, degree, seed = 0))]
fn synthetic(
    items: usize,
    platforms: usize,
    groups: usize,
    max_groups_per_item: usize,
    degree: usize,
    seed: u64,
) -> PyResult<Instance> {
    datagen::synthetic(&SyntheticConfig {
        items,
        platforms,
        groups,
        max_groups_per_item,
        degree,
        seed,
    })
    .map(|inner| Instance { inner })
    .map_err(to_py)
}

#[pymodule]
pub fn _fairmatch(m: &Bound<'_, PyModule>) -> PyResult<()> {
    m.add("FairmatchError", m.py().get_type::<FairmatchError>())?;
    m.add("InfeasibleError", m.py().get_type::<InfeasibleError>())?;
    m.add_class::<Instance>()?;
    m.add_class::<Solution>()?;
    m.add_function(wrap_pyfunction!(solve, m)?)?;
    m.add_function(wrap_pyfunction!(audit, m)?)?;
    m.add_function(wrap_pyfunction!(sample, m)?)?;
    m.add_function(wrap_pyfunction!(enumerate_group_fair, m)?)?;
    m.add_function(wrap_pyfunction!(ingest, m)?)?;
    m.add_function(wrap_pyfunction!(generate_bounds, m)?)?;
    m.add_function(wrap_pyfunction!(generate_if, m)?)?;
    m.add_function(wrap_pyfunction!(synthetic, m)?)?;
    Ok(())
}
