//! Python module `vemflux_py`.

use pyo3::exceptions::{PyRuntimeError, PyValueError};
use pyo3::prelude::*;
use pyo3::types::PyDict;
use vemflux::adapt::{run_adaptive, solve_and_estimate, AdaptConfig, HistoryRow, HpParams, StepOptions};
use vemflux::mesh::PolygonalMesh;
use vemflux::problem::Problem;
use vemflux::VemError;

fn to_py(e: VemError) -> PyErr {
    match e.exit_code() {
        3 => PyRuntimeError::new_err(e.to_string()),
        _ => PyValueError::new_err(e.to_string()),
    }
}

#[pyclass(name = "Mesh", module = "vemflux_py", from_py_object)]
#[derive(Clone)]
pub struct PyMesh {
    inner: PolygonalMesh,
}

#[pymethods]
impl PyMesh {
    /// `square(n)`, `lshape(n)` or a JSON document.
    #[new]
    fn new(spec: &str) -> PyResult<Self> {
        let inner = if spec.trim_start().starts_with('{') {
            PolygonalMesh::from_json(spec)
        } else {
            PolygonalMesh::builtin(spec)
        };
        inner.map(|inner| Self { inner }).map_err(to_py)
    }

    #[staticmethod]
    fn square(n: usize) -> Self {
        Self {
            inner: PolygonalMesh::square(n),
        }
    }

    #[staticmethod]
    fn lshape(n: usize) -> Self {
        Self {
            inner: PolygonalMesh::lshape(n),
        }
    }

    #[getter]
    fn n_cells(&self) -> usize {
        self.inner.n_cells()
    }

    #[getter]
    fn n_vertices(&self) -> usize {
        self.inner.n_vertices()
    }

    fn cell_area(&self, k: usize) -> PyResult<f64> {
        if k >= self.inner.n_cells() {
            return Err(PyValueError::new_err(format!("cell {k} out of range")));
        }
        Ok(self.inner.cell_area(k))
    }

    fn total_area(&self) -> f64 {
        self.inner.total_area()
    }

    fn refine(&self, marked: Vec<usize>) -> PyResult<Self> {
        self.inner.refine(&marked).map(|(inner, _)| Self { inner }).map_err(to_py)
    }

    fn to_json(&self) -> String {
        self.inner.to_json()
    }

    fn __repr__(&self) -> String {
        format!("Mesh(cells={}, vertices={})", self.inner.n_cells(), self.inner.n_vertices())
    }
}

fn row_dict<'py>(py: Python<'py>, r: &HistoryRow) -> PyResult<Bound<'py, PyDict>> {
    let d = PyDict::new(py);
    d.set_item("iter", r.iter)?;
    d.set_item("ncells", r.ncells)?;
    d.set_item("ndofs", r.ndofs)?;
    d.set_item("pmin", r.pmin)?;
    d.set_item("pmax", r.pmax)?;
    d.set_item("error", r.error)?;
    d.set_item("eta", r.eta)?;
    d.set_item("eta_loc", r.eta_loc)?;
    d.set_item("I", r.index)?;
    d.set_item("I_loc", r.index_loc)?;
    d.set_item("t_solve", r.t_solve)?;
    d.set_item("t_estimate", r.t_estimate)?;
    Ok(d)
}

/// Solve at uniform degree `p` and estimate; returns the history row plus `eta_k`.
#[pyfunction]
#[pyo3(signature = (problem, p, mesh=None, estimator="both", stabilization="dofi-dofi"))]
fn solve<'py>(
    py: Python<'py>,
    problem: &str,
    p: usize,
    mesh: Option<PyMesh>,
    estimator: &str,
    stabilization: &str,
) -> PyResult<Bound<'py, PyDict>> {
    let problem = Problem::builtin(problem).map_err(to_py)?;
    let mesh = mesh.map_or_else(|| problem.mesh.clone(), |m| m.inner);
    if !(1..=10).contains(&p) {
        return Err(PyValueError::new_err(format!("p = {p} outside 1..=10")));
    }
    let opts = StepOptions {
        estimator: estimator.parse().map_err(to_py)?,
        stabilization: stabilization.parse().map_err(to_py)?,
        ..Default::default()
    };
    let degrees = vec![p; mesh.n_cells()];
    let step = py.detach(|| solve_and_estimate(&mesh, &degrees, &problem, &opts)).map_err(to_py)?;
    let d = row_dict(py, &step.row)?;
    d.set_item("eta_k", step.report.eta_k())?;
    Ok(d)
}

/// Adaptive loop; returns the history as a list of dicts and the final mesh.
#[pyfunction]
#[pyo3(signature = (problem, mode="hp-adaptive", p=1, mesh=None, theta=0.75, dof_budget=50_000, max_iterations=100, p_max=8, estimator="both"))]
#[allow(clippy::too_many_arguments)]
fn run<'py>(
    py: Python<'py>,
    problem: &str,
    mode: &str,
    p: usize,
    mesh: Option<PyMesh>,
    theta: f64,
    dof_budget: usize,
    max_iterations: usize,
    p_max: usize,
    estimator: &str,
) -> PyResult<(Vec<Bound<'py, PyDict>>, PyMesh)> {
    let problem = Problem::builtin(problem).map_err(to_py)?;
    let mesh = mesh.map_or_else(|| problem.mesh.clone(), |m| m.inner);
    if !(1 <= p && p <= p_max && p_max <= 10) || !(theta > 0.0) || dof_budget < 1 {
        return Err(PyValueError::new_err("require 1 <= p <= p_max <= 10, theta > 0, dof_budget >= 1"));
    }
    let cfg = AdaptConfig {
        p,
        mode: mode.parse().map_err(to_py)?,
        estimator: estimator.parse().map_err(to_py)?,
        theta,
        hp: HpParams {
            p_max,
            ..Default::default()
        },
        dof_budget,
        max_iterations,
        ..Default::default()
    };
    let out = py.detach(|| run_adaptive(&problem, mesh, &cfg));
    if let Some(e) = out.error {
        return Err(to_py(e));
    }
    let rows = out.history.iter().map(|r| row_dict(py, r)).collect::<PyResult<_>>()?;
    Ok((
        rows,
        PyMesh {
            inner: out.final_state.mesh,
        },
    ))
}

/// Run a verification suite; returns `(passed, table)`.
#[pyfunction]
#[pyo3(signature = (suite, seed=20240))]
fn verify(py: Python<'_>, suite: &str, seed: u64) -> PyResult<(bool, String)> {
    let r = py.detach(|| vemflux::verify::run_suite(suite, seed)).map_err(to_py)?;
    Ok((r.passed(), r.table()))
}

#[pymodule]
pub fn vemflux_py(m: &Bound<'_, PyModule>) -> PyResult<()> {
    m.add("__version__", env!("CARGO_PKG_VERSION"))?;
    m.add_class::<PyMesh>()?;
    m.add_function(wrap_pyfunction!(solve, m)?)?;
    m.add_function(wrap_pyfunction!(run, m)?)?;
    m.add_function(wrap_pyfunction!(verify, m)?)?;
    Ok(())
}
