//! Python bindings. Structured reports come back as plain dicts and lists.

use cuspforge_core::assembly::{self, AssemblyMode, AssemblyOptions, ManifoldAssembly};
use cuspforge_core::entropy;
use cuspforge_core::lattice::{self, FlatLattice, SwapForm};
use cuspforge_core::warp::{self, CurvatureBounds, CutoffProfile, WarpProfile, DEFAULT_GRID_STEP, PINCHING_TOL};
use pyo3::exceptions::{PyRuntimeError, PyValueError};
use pyo3::prelude::*;
use pyo3::types::{PyDict, PyList};
use serde::Serialize;
use serde_json::Value;

fn err(e: cuspforge_core::Error) -> PyErr {
    match e {
        cuspforge_core::Error::InvalidArgument(_)
        | cuspforge_core::Error::DegenerateLattice(_)
        | cuspforge_core::Error::LatticeParse { .. } => PyValueError::new_err(e.to_string()),
        _ => PyRuntimeError::new_err(e.to_string()),
    }
}

fn to_py(py: Python<'_>, v: &Value) -> PyResult<Py<PyAny>> {
    Ok(match v {
        Value::Null => py.None(),
        Value::Bool(b) => b.into_pyobject(py)?.to_owned().into_any().unbind(),
        Value::Number(n) => match (n.as_i64(), n.as_f64()) {
            (Some(i), _) => i.into_pyobject(py)?.into_any().unbind(),
            (None, Some(f)) => f.into_pyobject(py)?.into_any().unbind(),
            _ => py.None(),
        },
        Value::String(s) => s.into_pyobject(py)?.into_any().unbind(),
        Value::Array(a) => {
            let items = a.iter().map(|x| to_py(py, x)).collect::<PyResult<Vec<_>>>()?;
            PyList::new(py, items)?.into_any().unbind()
        }
        Value::Object(o) => {
            let d = PyDict::new(py);
            for (k, x) in o {
                d.set_item(k, to_py(py, x)?)?;
            }
            d.into_any().unbind()
        }
    })
}

fn report<T: Serialize>(py: Python<'_>, x: &T) -> PyResult<Py<PyAny>> {
    let v = serde_json::to_value(x).map_err(|e| PyRuntimeError::new_err(e.to_string()))?;
    to_py(py, &v)
}

/// Cutoff `phi_eps` with its transition end `r_eps`.
#[pyclass(name = "Cutoff", frozen, skip_from_py_object)]
#[derive(Clone)]
struct PyCutoff(CutoffProfile);

#[pymethods]
impl PyCutoff {
    #[new]
    fn new(r_eps: f64, eps_budget: f64) -> PyResult<Self> {
        CutoffProfile::new(r_eps, eps_budget).map(Self).map_err(err)
    }

    #[getter]
    fn r_eps(&self) -> f64 {
        self.0.r_eps
    }

    #[getter]
    fn eps(&self) -> f64 {
        self.0.eps_budget
    }

    /// `(phi, phi', phi'')` at `t`.
    fn jet(&self, t: f64) -> (f64, f64, f64) {
        self.0.jet(t)
    }

    fn __call__(&self, t: f64) -> f64 {
        self.0.eval(t)
    }

    fn derivative_bounds(&self) -> (f64, f64) {
        self.0.derivative_bounds()
    }

    fn __repr__(&self) -> String {
        format!("Cutoff(r_eps={}, eps={})", self.0.r_eps, self.0.eps_budget)
    }
}

#[pyfunction]
fn make_cutoff(eps: f64) -> PyResult<PyCutoff> {
    warp::make_cutoff(eps).map(PyCutoff).map_err(err)
}

/// A warped metric profile (tube, channel, or one of the model profiles).
#[pyclass(name = "Profile", frozen, skip_from_py_object)]
#[derive(Clone)]
struct PyProfile(WarpProfile);

#[pymethods]
impl PyProfile {
    #[staticmethod]
    fn tube(cutoff: &PyCutoff) -> Self {
        Self(warp::tube_profile(&cutoff.0))
    }

    #[staticmethod]
    fn channel(cutoff: &PyCutoff, beta: f64) -> PyResult<Self> {
        warp::channel_profile(&cutoff.0, beta).map(Self).map_err(err)
    }

    #[staticmethod]
    fn hyperbolic(t_max: f64) -> Self {
        Self(WarpProfile::hyperbolic(t_max))
    }

    #[staticmethod]
    fn exponential(t_max: f64) -> Self {
        Self(WarpProfile::exponential(t_max))
    }

    #[staticmethod]
    fn euclidean(t_max: f64) -> Self {
        Self(WarpProfile::euclidean(t_max))
    }

    #[getter]
    fn domain(&self) -> (f64, f64) {
        self.0.domain
    }

    /// Warp functions and derivatives at `t` as a dict.
    fn values(&self, py: Python<'_>, t: f64) -> PyResult<Py<PyAny>> {
        report(py, &self.0.values(t).map_err(err)?)
    }

    /// Sectional curvatures of the coordinate planes at `t`; absent planes are `None`.
    fn curvatures(&self, py: Python<'_>, t: f64, n: usize) -> PyResult<Py<PyAny>> {
        report(py, &warp::sectional_curvatures(&self.0, t, n).map_err(err)?)
    }

    #[pyo3(signature = (n, lo, hi, k_lo, k_hi, grid_step = DEFAULT_GRID_STEP, tol = PINCHING_TOL))]
    #[allow(clippy::too_many_arguments)]
    fn certify_pinching(
        &self,
        py: Python<'_>,
        n: usize,
        lo: f64,
        hi: f64,
        k_lo: f64,
        k_hi: f64,
        grid_step: f64,
        tol: f64,
    ) -> PyResult<Py<PyAny>> {
        let cert = py
            .detach(|| {
                warp::certify_pinching(&self.0, n, (lo, hi), CurvatureBounds::new(k_lo, k_hi, tol), grid_step)
            })
            .map_err(err)?;
        report(py, &cert)
    }
}

/// A lattice in `R^m` given by basis rows.
#[pyclass(name = "Lattice", frozen, from_py_object)]
#[derive(Clone)]
struct PyLattice(FlatLattice);

#[pymethods]
impl PyLattice {
    #[new]
    fn new(rows: Vec<Vec<f64>>) -> PyResult<Self> {
        FlatLattice::from_rows(rows).map(Self).map_err(err)
    }

    #[staticmethod]
    fn from_file(path: std::path::PathBuf) -> PyResult<Self> {
        FlatLattice::from_file(&path).map(Self).map_err(err)
    }

    #[getter]
    fn rank(&self) -> usize {
        self.0.rank()
    }

    #[getter]
    fn basis(&self) -> Vec<Vec<f64>> {
        self.0.basis_vectors()
    }

    fn covolume(&self) -> f64 {
        self.0.covolume()
    }

    fn gram(&self) -> Vec<Vec<f64>> {
        let g = self.0.gram();
        (0..g.nrows()).map(|i| (0..g.ncols()).map(|j| g[(i, j)]).collect()).collect()
    }

    fn rescale(&self, lam: f64) -> PyResult<Self> {
        self.0.rescale(lam).map(Self).map_err(err)
    }

    /// `(coefficients, vector, norm)` of a shortest nonzero vector.
    fn shortest_vector(&self) -> PyResult<(Vec<i64>, Vec<f64>, f64)> {
        let p = lattice::shortest_vector(&self.0).map_err(err)?;
        Ok((p.coeffs, p.vector, p.norm))
    }

    fn greedy_generators(&self, py: Python<'_>) -> PyResult<Py<PyAny>> {
        report(py, &lattice::greedy_generators(&self.0).map_err(err)?)
    }

    fn __repr__(&self) -> String {
        format!("Lattice({:?})", self.0.basis_vectors())
    }
}

/// A certified assembly. `report()` returns the full structured report.
#[pyclass(name = "Assembly", frozen)]
struct PyAssembly(ManifoldAssembly);

#[pymethods]
impl PyAssembly {
    #[getter]
    fn verdict(&self) -> bool {
        self.0.verdict == warp::Verdict::Pass
    }

    #[getter]
    fn total_volume(&self) -> f64 {
        self.0.total_volume
    }

    #[getter]
    fn w_fraction(&self) -> f64 {
        self.0.w_fraction
    }

    #[getter]
    fn witness_rank(&self) -> usize {
        self.0.max_witness_rank()
    }

    fn report(&self, py: Python<'_>) -> PyResult<Py<PyAny>> {
        report(py, &self.0)
    }

    /// Monte Carlo entropy certificate, rescaled to `K in [-1, 0]`.
    #[pyo3(signature = (samples = entropy::DEFAULT_SAMPLES, seed = entropy::DEFAULT_SEED))]
    fn entropy(&self, py: Python<'_>, samples: usize, seed: u64) -> PyResult<Py<PyAny>> {
        let cert = py
            .detach(|| {
                let raw = entropy::bw_bound(&self.0, samples, seed)?;
                entropy::rescale_bound(&raw, entropy::rescale_eps_for(&self.0))
            })
            .map_err(err)?;
        report(py, &cert)
    }

    #[pyo3(signature = (samples = entropy::DEFAULT_SAMPLES, seed = entropy::DEFAULT_SEED))]
    fn entropy_chain(&self, py: Python<'_>, samples: usize, seed: u64) -> PyResult<String> {
        let cert = py.detach(|| {
            entropy::bw_bound(&self.0, samples, seed)
                .and_then(|raw| entropy::rescale_bound(&raw, entropy::rescale_eps_for(&self.0)))
                .ok()
        });
        Ok(entropy::entropy_chain_report(cert.as_ref(), &self.0))
    }
}

#[pyfunction]
#[pyo3(signature = (core_volume, cusps, eps, n, mode = "close", allow_dim3 = false, paper_generator_swap = false, cut_budget = None, volume_bound = None))]
#[allow(clippy::too_many_arguments)]
fn assemble(
    py: Python<'_>,
    core_volume: f64,
    cusps: Vec<PyLattice>,
    eps: f64,
    n: usize,
    mode: &str,
    allow_dim3: bool,
    paper_generator_swap: bool,
    cut_budget: Option<f64>,
    volume_bound: Option<f64>,
) -> PyResult<PyAssembly> {
    let mode = match mode {
        "close" => AssemblyMode::Close,
        "double" => AssemblyMode::Double,
        other => return Err(PyValueError::new_err(format!("mode must be 'close' or 'double', got {other:?}"))),
    };
    let opts = AssemblyOptions {
        allow_dim3,
        swap_form: if paper_generator_swap { SwapForm::Literal } else { SwapForm::Unimodular },
        cut_budget,
        volume_bound,
        ..AssemblyOptions::default()
    };
    let lattices: Vec<FlatLattice> = cusps.into_iter().map(|l| l.0).collect();
    py.detach(|| assembly::assemble(core_volume, &lattices, eps, n, mode, &opts)).map(PyAssembly).map_err(err)
}

#[pyfunction]
fn model_volume_entropy(n: usize, r_max: f64) -> PyResult<f64> {
    entropy::model_volume_entropy(n, r_max).map_err(err)
}

#[pyfunction]
fn eps_bar(n: usize, eps: f64) -> f64 {
    entropy::eps_bar(n, eps)
}

#[pyfunction]
fn tube_volume_constant(n: usize) -> f64 {
    assembly::tube_volume_constant(n)
}

#[pymodule]
fn cuspforge(m: &Bound<'_, PyModule>) -> PyResult<()> {
    m.add_class::<PyCutoff>()?;
    m.add_class::<PyProfile>()?;
    m.add_class::<PyLattice>()?;
    m.add_class::<PyAssembly>()?;
    m.add_function(wrap_pyfunction!(make_cutoff, m)?)?;
    m.add_function(wrap_pyfunction!(assemble, m)?)?;
    m.add_function(wrap_pyfunction!(model_volume_entropy, m)?)?;
    m.add_function(wrap_pyfunction!(eps_bar, m)?)?;
    m.add_function(wrap_pyfunction!(tube_volume_constant, m)?)?;
    Ok(())
}
