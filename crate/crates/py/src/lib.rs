//! Python bindings exposing the simulator's main types and operations.
//!
//! Build with `cargo build -p workex-py --release --features extension-module`
//! and import the resulting shared library as `workex_py`.

use pyo3::exceptions::{PyRuntimeError, PyValueError};
use pyo3::prelude::*;
use pyo3::types::PyDict;
use workex::analytic;
use workex::engine;
use workex::error::Error;
use workex::metrics;
use workex::model;
use workex::stochastic;

fn to_py_err(e: Error) -> PyErr {
    match e {
        Error::Io(_) => PyRuntimeError::new_err(e.to_string()),
        _ => PyValueError::new_err(e.to_string()),
    }
}

/// Seedable, splittable random stream; identical (seed, stream_id) pairs
/// reproduce identical variates.
#[pyclass(name = "RandomStream")]
struct PyRandomStream {
    inner: stochastic::RandomStream,
}

#[pymethods]
impl PyRandomStream {
    #[new]
    #[pyo3(signature = (seed, stream_id = 0))]
    fn new(seed: u64, stream_id: u64) -> Self {
        Self {
            inner: stochastic::RandomStream::new(seed, stream_id),
        }
    }

    #[getter]
    fn seed(&self) -> u64 {
        self.inner.seed()
    }

    #[getter]
    fn stream_id(&self) -> u64 {
        self.inner.stream_id()
    }

    fn __repr__(&self) -> String {
        format!(
            "RandomStream(seed={}, stream_id={})",
            self.inner.seed(),
            self.inner.stream_id()
        )
    }
}

/// Per-worker processing rates (points/second).
#[pyclass(name = "HeterogeneityProfile", frozen)]
struct PyProfile {
    inner: model::HeterogeneityProfile,
}

#[pymethods]
impl PyProfile {
    #[new]
    fn new(rates: Vec<f64>) -> PyResult<Self> {
        Ok(Self {
            inner: model::HeterogeneityProfile::new(rates).map_err(to_py_err)?,
        })
    }

    #[getter]
    fn rates(&self) -> Vec<f64> {
        self.inner.rates().to_vec()
    }

    #[getter]
    fn rate_sum(&self) -> f64 {
        self.inner.rate_sum()
    }

    #[getter]
    fn worker_count(&self) -> usize {
        self.inner.worker_count()
    }

    fn __repr__(&self) -> String {
        format!("HeterogeneityProfile({:?})", self.inner.rates())
    }
}

/// Completion instants of one worker processing an assignment.
#[pyclass(name = "WorkerTrace", frozen)]
struct PyWorkerTrace {
    inner: stochastic::WorkerTrace,
}

#[pymethods]
impl PyWorkerTrace {
    #[getter]
    fn assignment(&self) -> u64 {
        self.inner.assignment()
    }

    #[getter]
    fn rate(&self) -> f64 {
        self.inner.rate()
    }

    #[getter]
    fn instants(&self) -> Vec<f64> {
        self.inner.instants().to_vec()
    }

    fn completion_time(&self) -> f64 {
        self.inner.completion_time()
    }

    fn count_done_by(&self, t: f64) -> PyResult<u64> {
        self.inner.count_done_by(t).map_err(to_py_err)
    }
}

/// Metrics of one simulated run.
#[pyclass(name = "RunMetrics", frozen, from_py_object)]
#[derive(Clone)]
struct PyRunMetrics {
    inner: engine::RunMetrics,
}

#[pymethods]
impl PyRunMetrics {
    #[getter]
    fn scheme(&self) -> &'static str {
        self.inner.scheme.id()
    }

    #[getter]
    fn n_points(&self) -> u64 {
        self.inner.n_points
    }

    #[getter]
    fn t_comp(&self) -> f64 {
        self.inner.t_comp
    }

    #[getter]
    fn n_comm(&self) -> u64 {
        self.inner.n_comm
    }

    #[getter]
    fn iterations(&self) -> u64 {
        self.inner.iterations
    }

    #[getter]
    fn seed(&self) -> u64 {
        self.inner.seed
    }

    #[getter]
    fn stream_id(&self) -> u64 {
        self.inner.stream_id
    }

    #[getter]
    fn generator(&self) -> &'static str {
        self.inner.generator
    }

    #[getter]
    fn done_per_worker(&self) -> Vec<u64> {
        self.inner.done_per_worker.clone()
    }

    #[getter]
    fn busy_time_per_worker(&self) -> Vec<f64> {
        self.inner.busy_time_per_worker.clone()
    }

    #[getter]
    fn estimated_rates(&self) -> Option<Vec<f64>> {
        self.inner.estimated_rates.clone()
    }

    #[getter]
    fn wasted_points(&self) -> u64 {
        self.inner.wasted_points
    }

    /// The per-epoch trace as a list of dicts.
    fn trace<'py>(&self, py: Python<'py>) -> PyResult<Vec<Bound<'py, PyDict>>> {
        self.inner
            .trace
            .iter()
            .map(|record| {
                let d = PyDict::new(py);
                d.set_item("epoch", record.epoch)?;
                d.set_item("is_reassignment", record.is_reassignment)?;
                d.set_item("assignments", record.assignments.clone())?;
                d.set_item("shipped", record.shipped.clone())?;
                d.set_item("epoch_duration", record.epoch_duration)?;
                d.set_item("done", record.done.clone())?;
                d.set_item("remaining_after", record.remaining_after)?;
                Ok(d)
            })
            .collect()
    }

    fn __repr__(&self) -> String {
        format!(
            "RunMetrics(scheme={}, t_comp={:.6}, n_comm={}, iterations={})",
            self.inner.scheme.id(),
            self.inner.t_comp,
            self.inner.n_comm,
            self.inner.iterations
        )
    }
}

/// Optimized code dimension for the coded baseline.
#[pyclass(name = "MdsPlan", frozen)]
struct PyMdsPlan {
    inner: analytic::MdsPlan,
}

#[pymethods]
impl PyMdsPlan {
    #[getter]
    fn code_dimension(&self) -> usize {
        self.inner.code_dimension
    }

    #[getter]
    fn chunk(&self) -> u64 {
        self.inner.chunk
    }

    #[getter]
    fn expected_mean(&self) -> f64 {
        self.inner.expected_mean
    }

    fn __repr__(&self) -> String {
        format!(
            "MdsPlan(code_dimension={}, chunk={}, expected_mean={:.6})",
            self.inner.code_dimension, self.inner.chunk, self.inner.expected_mean
        )
    }
}

#[pyfunction]
fn proportional_split(total: u64, weights: Vec<f64>) -> PyResult<Vec<u64>> {
    model::proportional_split(total, &weights).map_err(to_py_err)
}

#[pyfunction]
fn sample_profile(
    workers: usize,
    mu: f64,
    sigma2: f64,
    stream: &mut PyRandomStream,
) -> PyResult<PyProfile> {
    Ok(PyProfile {
        inner: model::sample_profile(workers, mu, sigma2, &mut stream.inner)
            .map_err(to_py_err)?,
    })
}

#[pyfunction]
fn sample_exponential(rate: f64, stream: &mut PyRandomStream) -> PyResult<f64> {
    stochastic::sample_exponential(rate, &mut stream.inner).map_err(to_py_err)
}

#[pyfunction]
fn sample_erlang(shape: u64, rate: f64, stream: &mut PyRandomStream) -> PyResult<f64> {
    stochastic::sample_erlang(shape, rate, &mut stream.inner).map_err(to_py_err)
}

#[pyfunction]
fn generate_trace(
    assignment: u64,
    rate: f64,
    stream: &mut PyRandomStream,
) -> PyResult<PyWorkerTrace> {
    Ok(PyWorkerTrace {
        inner: stochastic::generate_trace(assignment, rate, &mut stream.inner)
            .map_err(to_py_err)?,
    })
}

#[pyfunction]
fn oracle_mean(n_points: u64, profile: &PyProfile) -> f64 {
    analytic::oracle_mean(n_points, &profile.inner)
}

#[pyfunction]
fn expected_done(n_points: u64, profile: &PyProfile) -> Vec<f64> {
    analytic::expected_done(n_points, &profile.inner)
}

#[pyfunction]
#[pyo3(signature = (subset_size, shape, profile, max_terms = 1e8))]
fn p_term(subset_size: usize, shape: u64, profile: &PyProfile, max_terms: f64) -> PyResult<f64> {
    analytic::p_term(
        subset_size,
        shape,
        &profile.inner,
        analytic::TermBudget { max_terms },
    )
    .map_err(to_py_err)
}

#[pyfunction]
#[pyo3(signature = (order, shape, profile, max_terms = 1e8))]
fn orderstat_mean(order: usize, shape: u64, profile: &PyProfile, max_terms: f64) -> PyResult<f64> {
    let spec = analytic::OrderStatSpec::new(order, shape, &profile.inner).map_err(to_py_err)?;
    analytic::orderstat_mean(spec, analytic::TermBudget { max_terms }).map_err(to_py_err)
}

#[pyfunction]
fn orderstat_mean_mc(
    order: usize,
    shape: u64,
    profile: &PyProfile,
    trials: u64,
    stream: &mut PyRandomStream,
) -> PyResult<(f64, f64)> {
    analytic::orderstat_mean_mc(order, shape, &profile.inner, trials, &mut stream.inner)
        .map_err(to_py_err)
}

#[pyfunction]
#[pyo3(signature = (code_dimension, n_points, profile, max_terms = 1e8))]
fn mds_mean(
    code_dimension: usize,
    n_points: u64,
    profile: &PyProfile,
    max_terms: f64,
) -> PyResult<f64> {
    analytic::mds_mean(
        code_dimension,
        n_points,
        &profile.inner,
        analytic::TermBudget { max_terms },
    )
    .map_err(to_py_err)
}

#[pyfunction]
#[pyo3(signature = (n_points, profile, stream, trials = 10_000, exact = false))]
fn optimize_mds(
    n_points: u64,
    profile: &PyProfile,
    stream: &mut PyRandomStream,
    trials: u64,
    exact: bool,
) -> PyResult<PyMdsPlan> {
    let estimator = if exact {
        analytic::MeanEstimator::Exact(analytic::TermBudget::default())
    } else {
        analytic::MeanEstimator::MonteCarlo { trials }
    };
    Ok(PyMdsPlan {
        inner: analytic::optimize_mds(n_points, &profile.inner, estimator, &mut stream.inner)
            .map_err(to_py_err)?,
    })
}

#[pyfunction]
fn expected_comm_unknown(n_points: u64, workers: usize, profile: &PyProfile) -> PyResult<f64> {
    analytic::expected_comm_unknown(n_points, workers, &profile.inner).map_err(to_py_err)
}

#[pyfunction]
fn run_oracle(
    n_points: u64,
    profile: &PyProfile,
    stream: &mut PyRandomStream,
) -> PyResult<PyRunMetrics> {
    Ok(PyRunMetrics {
        inner: engine::run_oracle(n_points, &profile.inner, &mut stream.inner)
            .map_err(to_py_err)?,
    })
}

#[pyfunction]
fn run_fixed(
    n_points: u64,
    profile: &PyProfile,
    stream: &mut PyRandomStream,
) -> PyResult<PyRunMetrics> {
    Ok(PyRunMetrics {
        inner: engine::run_fixed(n_points, &profile.inner, &mut stream.inner)
            .map_err(to_py_err)?,
    })
}

#[pyfunction]
fn run_mds(
    n_points: u64,
    code_dimension: usize,
    profile: &PyProfile,
    stream: &mut PyRandomStream,
) -> PyResult<PyRunMetrics> {
    Ok(PyRunMetrics {
        inner: engine::run_mds(n_points, code_dimension, &profile.inner, &mut stream.inner)
            .map_err(to_py_err)?,
    })
}

#[pyfunction]
fn run_exchange_known(
    n_points: u64,
    profile: &PyProfile,
    threshold: u64,
    stream: &mut PyRandomStream,
) -> PyResult<PyRunMetrics> {
    Ok(PyRunMetrics {
        inner: engine::run_exchange_known(
            n_points,
            &profile.inner,
            threshold,
            &mut stream.inner,
        )
        .map_err(to_py_err)?,
    })
}

#[pyfunction]
fn run_exchange_unknown(
    n_points: u64,
    profile: &PyProfile,
    threshold: u64,
    stream: &mut PyRandomStream,
) -> PyResult<PyRunMetrics> {
    Ok(PyRunMetrics {
        inner: engine::run_exchange_unknown(
            n_points,
            &profile.inner,
            threshold,
            &mut stream.inner,
        )
        .map_err(to_py_err)?,
    })
}

/// Averages a batch of runs of one scheme into a dict of means and
/// standard errors; reference values are attached verbatim when given.
#[pyfunction]
#[pyo3(signature = (runs, oracle_mean = None, mds_optimum = None, expected_comm_norm = None))]
fn summarize<'py>(
    py: Python<'py>,
    runs: Vec<PyRunMetrics>,
    oracle_mean: Option<f64>,
    mds_optimum: Option<f64>,
    expected_comm_norm: Option<f64>,
) -> PyResult<Bound<'py, PyDict>> {
    let inner: Vec<engine::RunMetrics> = runs.into_iter().map(|r| r.inner).collect();
    let references = metrics::ReferenceValues {
        oracle_mean,
        mds_optimum,
        expected_comm_norm,
    };
    let summary = metrics::summarize(&inner, references).map_err(to_py_err)?;
    let d = PyDict::new(py);
    d.set_item("scheme", summary.scheme.id())?;
    d.set_item("trials", summary.trials)?;
    d.set_item("mean_t_comp", summary.t_comp.mean)?;
    d.set_item("se_t_comp", summary.t_comp.se)?;
    d.set_item("mean_comm_norm", summary.comm_norm.mean)?;
    d.set_item("se_comm_norm", summary.comm_norm.se)?;
    d.set_item("mean_comm_raw", summary.comm_raw.mean)?;
    d.set_item("se_comm_raw", summary.comm_raw.se)?;
    d.set_item("mean_iterations", summary.iterations.mean)?;
    d.set_item("se_iterations", summary.iterations.se)?;
    if let Some(wasted) = summary.wasted_norm {
        d.set_item("mean_wasted_norm", wasted.mean)?;
        d.set_item("se_wasted_norm", wasted.se)?;
    }
    d.set_item("degenerate_se", summary.degenerate_se)?;
    d.set_item("oracle_ref", summary.references.oracle_mean)?;
    d.set_item("mds_ref", summary.references.mds_optimum)?;
    d.set_item("expected_comm_norm_ref", summary.references.expected_comm_norm)?;
    Ok(d)
}

#[pymodule]
fn workex_py(m: &Bound<'_, PyModule>) -> PyResult<()> {
    m.add_class::<PyRandomStream>()?;
    m.add_class::<PyProfile>()?;
    m.add_class::<PyWorkerTrace>()?;
    m.add_class::<PyRunMetrics>()?;
    m.add_class::<PyMdsPlan>()?;
    m.add_function(wrap_pyfunction!(proportional_split, m)?)?;
    m.add_function(wrap_pyfunction!(sample_profile, m)?)?;
    m.add_function(wrap_pyfunction!(sample_exponential, m)?)?;
    m.add_function(wrap_pyfunction!(sample_erlang, m)?)?;
    m.add_function(wrap_pyfunction!(generate_trace, m)?)?;
    m.add_function(wrap_pyfunction!(oracle_mean, m)?)?;
    m.add_function(wrap_pyfunction!(expected_done, m)?)?;
    m.add_function(wrap_pyfunction!(p_term, m)?)?;
    m.add_function(wrap_pyfunction!(orderstat_mean, m)?)?;
    m.add_function(wrap_pyfunction!(orderstat_mean_mc, m)?)?;
    m.add_function(wrap_pyfunction!(mds_mean, m)?)?;
    m.add_function(wrap_pyfunction!(optimize_mds, m)?)?;
    m.add_function(wrap_pyfunction!(expected_comm_unknown, m)?)?;
    m.add_function(wrap_pyfunction!(run_oracle, m)?)?;
    m.add_function(wrap_pyfunction!(run_fixed, m)?)?;
    m.add_function(wrap_pyfunction!(run_mds, m)?)?;
    m.add_function(wrap_pyfunction!(run_exchange_known, m)?)?;
    m.add_function(wrap_pyfunction!(run_exchange_unknown, m)?)?;
    m.add_function(wrap_pyfunction!(summarize, m)?)?;
    m.add("GENERATOR_ID", stochastic::GENERATOR_ID)?;
    m.add("VERSION", env!("CARGO_PKG_VERSION"))?;
    Ok(())
}
