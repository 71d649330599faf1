//! Python bindings for `specpts_core`.
//!
//! Kernels and objectives are passed as the short strings the command line
//! uses (`"exp:2"`, `"1/lambda2"`, `"interval(0.82,0.88)"`).

use pyo3::exceptions::PyValueError;
use pyo3::prelude::*;

use specpts_core::geometry::{self, ManifoldSpec, TorusCell};
use specpts_core::kernel::WeightFunction;
use specpts_core::lattice::{self, LatticeParams, SweepGrid};
use specpts_core::optimize::{self, OptimizeSettings, RunResult};
use specpts_core::spectral::{Invariant, Objective};
use specpts_core::{gradients, spectral};

fn err(e: specpts_core::Error) -> PyErr {
    PyValueError::new_err(e.to_string())
}

fn kernel(f: &str) -> PyResult<WeightFunction> {
    f.parse().map_err(err)
}

fn parse_objective(s: &str) -> PyResult<Objective> {
    s.parse().map_err(err)
}

fn lattice_params(a: f64, b: f64) -> PyResult<LatticeParams> {
    LatticeParams::new(a, b).map_err(err)
}

/// Points on a sphere (chordal metric) or a flat torus (minimum image).
#[pyclass(name = "PointConfig", module = "specpts", skip_from_py_object)]
#[derive(Clone)]
struct PyPointConfig {
    inner: geometry::PointConfig,
}

#[pymethods]
impl PyPointConfig {
    /// Unit vectors in R^d, one row per point.
    #[staticmethod]
    fn sphere(points: Vec<Vec<f64>>) -> PyResult<Self> {
        let dim = points.first().map_or(0, Vec::len);
        let m = ManifoldSpec::sphere(dim).map_err(err)?;
        Ok(PyPointConfig { inner: geometry::PointConfig::new(m, points).map_err(err)? })
    }

    /// Points on the torus with period vectors `p1`, `p2`.
    #[staticmethod]
    fn torus(points: Vec<Vec<f64>>, p1: [f64; 2], p2: [f64; 2]) -> PyResult<Self> {
        let cell = TorusCell::new(p1, p2).map_err(err)?;
        Ok(PyPointConfig { inner: geometry::PointConfig::new(ManifoldSpec::flat_torus(cell), points).map_err(err)? })
    }

    /// Points on the unit-density `W × H` canvas with `H = W √3 / 2`.
    #[staticmethod]
    fn canvas(points: Vec<Vec<f64>>) -> PyResult<Self> {
        let m = ManifoldSpec::unit_density_canvas(points.len());
        Ok(PyPointConfig { inner: geometry::PointConfig::new(m, points).map_err(err)? })
    }

    /// `n` uniform random points on the sphere in R^dim.
    #[staticmethod]
    fn random_sphere(n: usize, dim: usize, seed: u64) -> PyResult<Self> {
        let m = ManifoldSpec::sphere(dim).map_err(err)?;
        Ok(PyPointConfig { inner: geometry::random_config(&m, n, seed).map_err(err)? })
    }

    /// `n` uniform random points on the unit-density canvas.
    #[staticmethod]
    fn random_canvas(n: usize, seed: u64) -> PyResult<Self> {
        let m = ManifoldSpec::unit_density_canvas(n);
        Ok(PyPointConfig { inner: geometry::random_config(&m, n, seed).map_err(err)? })
    }

    /// Perfect triangular lattice of `rows × rows` points on the canvas.
    #[staticmethod]
    fn triangular(rows: usize) -> PyResult<Self> {
        Ok(PyPointConfig { inner: geometry::triangular_canvas_config(rows).map_err(err)? })
    }

    #[staticmethod]
    fn from_json(s: &str) -> PyResult<Self> {
        Ok(PyPointConfig { inner: geometry::PointConfig::from_json(s).map_err(err)? })
    }

    fn to_json(&self) -> String {
        self.inner.to_json()
    }

    #[getter]
    fn n(&self) -> usize {
        self.inner.n()
    }

    #[getter]
    fn dim(&self) -> usize {
        self.inner.dim()
    }

    #[getter]
    fn points(&self) -> Vec<Vec<f64>> {
        (0..self.inner.n()).map(|i| self.inner.point(i).to_vec()).collect()
    }

    /// Squared distances in edge order `(0,1), (0,2), ..., (n-2,n-1)`.
    fn pair_distances_sq(&self) -> Vec<f64> {
        geometry::all_pair_distances_sq(&self.inner)
    }

    fn d_min(&self) -> Option<f64> {
        optimize::d_min(&self.inner)
    }

    fn __len__(&self) -> usize {
        self.inner.n()
    }

    fn __repr__(&self) -> String {
        format!("PointConfig(n={}, dim={}, sphere={})", self.inner.n(), self.inner.dim(), self.inner.manifold().is_sphere())
    }
}

/// Outcome of one optimization run.
#[pyclass(name = "RunResult", module = "specpts", get_all)]
struct PyRunResult {
    config: Py<PyPointConfig>,
    value: f64,
    invariant_value: f64,
    initial_value: f64,
    d_min: Option<f64>,
    iterations: usize,
    converged: bool,
    stop: String,
    history: Vec<f64>,
}

#[pymethods]
impl PyRunResult {
    fn __repr__(&self) -> String {
        format!("RunResult(value={}, iterations={}, stop={})", self.value, self.iterations, self.stop)
    }
}

fn wrap_run(py: Python<'_>, r: RunResult) -> PyResult<PyRunResult> {
    let stop = format!("{:?}", r.stop);
    Ok(PyRunResult {
        config: Py::new(py, PyPointConfig { inner: r.config })?,
        value: r.value,
        invariant_value: r.invariant_value,
        initial_value: r.initial_value,
        d_min: r.d_min,
        iterations: r.iterations,
        converged: r.converged,
        stop,
        history: r.history,
    })
}

fn settings(max_iter: usize, grad_tol: f64, restarts: usize, seed: u64) -> PyResult<OptimizeSettings> {
    let s = OptimizeSettings { max_iter, grad_tol, restarts, seed, ..Default::default() };
    s.validate().map_err(err)?;
    Ok(s)
}

/// Value of a spectral invariant (`trace`, `frob2`, `lambda2`, `lambdamax`,
/// `rtot`, `cond`, `var`, `interval(lo,hi)`).
#[pyfunction]
fn evaluate(config: PyRef<'_, PyPointConfig>, f: &str, invariant: &str) -> PyResult<f64> {
    let id: Invariant = invariant.parse().map_err(err)?;
    spectral::evaluate(&config.inner, &kernel(f)?, &id).map_err(err)
}

/// Laplacian eigenvalues in ascending order.
#[pyfunction]
fn laplacian_spectrum(config: PyRef<'_, PyPointConfig>, f: &str) -> PyResult<Vec<f64>> {
    let g = specpts_core::kernel::assemble(&config.inner, &kernel(f)?).map_err(err)?;
    Ok(spectral::sym_eigenvalues(&g.laplacian).map_err(err)?.values().to_vec())
}

/// Objective value and its tangent gradient, one row per point.
#[pyfunction]
fn value_and_gradient(config: PyRef<'_, PyPointConfig>, f: &str, objective: &str) -> PyResult<(f64, Vec<Vec<f64>>)> {
    let (v, g) = gradients::value_and_gradient(&config.inner, &kernel(f)?, &parse_objective(objective)?).map_err(err)?;
    let dim = config.inner.dim();
    Ok((v, g.tangent.chunks(dim).map(<[f64]>::to_vec).collect()))
}

/// Largest relative deviation between the analytic gradient and central
/// differences with step `h`.
#[pyfunction]
#[pyo3(signature = (config, f, objective, h = 1e-5))]
fn fd_check(config: PyRef<'_, PyPointConfig>, f: &str, objective: &str, h: f64) -> PyResult<f64> {
    Ok(gradients::fd_check(&config.inner, &kernel(f)?, &parse_objective(objective)?, h).map_err(err)?.max_rel_error)
}

/// BFGS from the given configuration.
#[pyfunction]
#[pyo3(signature = (config, f, objective, max_iter = 2000, grad_tol = 1e-8))]
fn minimize(py: Python<'_>, config: PyRef<'_, PyPointConfig>, f: &str, objective: &str, max_iter: usize, grad_tol: f64) -> PyResult<PyRunResult> {
    let s = settings(max_iter, grad_tol, 1, 0)?;
    let start = config.inner.clone();
    let (f, obj) = (kernel(f)?, parse_objective(objective)?);
    let r = py.detach(|| optimize::bfgs_minimize(&start, &f, &obj, &s)).map_err(err)?;
    wrap_run(py, r)
}

/// Best of `restarts` random starts on the unit-density canvas (`sphere_dim`
/// unset) or on the sphere in R^sphere_dim.
#[pyfunction]
#[pyo3(signature = (n, f, objective, restarts = 10, seed = 0, sphere_dim = None, max_iter = 2000))]
fn multi_start(
    py: Python<'_>,
    n: usize,
    f: &str,
    objective: &str,
    restarts: usize,
    seed: u64,
    sphere_dim: Option<usize>,
    max_iter: usize,
) -> PyResult<PyRunResult> {
    let s = settings(max_iter, 1e-8, restarts, seed)?;
    let m = match sphere_dim {
        Some(d) => ManifoldSpec::sphere(d).map_err(err)?,
        None => ManifoldSpec::unit_density_canvas(n),
    };
    let (f, obj) = (kernel(f)?, parse_objective(objective)?);
    let ms = py.detach(|| optimize::multi_start(&m, n, &f, &obj, &s)).map_err(err)?;
    let best = ms.runs.into_iter().nth(ms.best).expect("at least one restart");
    wrap_run(py, best)
}

/// `ω(ξ)` for the lattice with parameters `(a, b)`.
#[pyfunction]
fn dispersion(a: f64, b: f64, f: &str, xi: [f64; 2]) -> PyResult<f64> {
    lattice::dispersion(&lattice_params(a, b)?, &kernel(f)?, xi, None).map_err(err)
}

#[pyfunction]
fn operator_norm(a: f64, b: f64, f: &str) -> PyResult<f64> {
    lattice::operator_norm(&lattice_params(a, b)?, &kernel(f)?).map_err(err)
}

/// Density of states as `(bin_centers, mass)`.
#[pyfunction]
#[pyo3(signature = (a, b, f, samples = 256, bins = 200))]
fn dos(a: f64, b: f64, f: &str, samples: usize, bins: usize) -> PyResult<(Vec<f64>, Vec<f64>)> {
    let h = lattice::dos(&lattice_params(a, b)?, &kernel(f)?, samples, bins).map_err(err)?;
    Ok((h.centers(), h.mass()))
}

#[pyfunction]
#[pyo3(signature = (a, b, f, samples = 256, bins = 200))]
fn van_hove_peak(a: f64, b: f64, f: &str, samples: usize, bins: usize) -> PyResult<f64> {
    Ok(lattice::dos(&lattice_params(a, b)?, &kernel(f)?, samples, bins).map_err(err)?.van_hove_peak())
}

/// Closed-form adjacency moment, `p ∈ {0, 1, 2}`.
#[pyfunction]
fn moment_w(a: f64, b: f64, f: &str, p: u32) -> PyResult<f64> {
    lattice::moment_w(&lattice_params(a, b)?, &kernel(f)?, p).map_err(err)
}

#[pyfunction]
fn moment_l1(a: f64, b: f64, f: &str) -> PyResult<f64> {
    lattice::moment_l1(&lattice_params(a, b)?, &kernel(f)?).map_err(err)
}

/// Sites of the periodic lattice graph `Λ^N` as a configuration.
#[pyfunction]
fn torus_graph(a: f64, b: f64, side: usize) -> PyResult<PyPointConfig> {
    Ok(PyPointConfig { inner: lattice::torus_graph(&lattice_params(a, b)?, side).map_err(err)?.config })
}

/// `(a, b, value)` over a grid on the fundamental domain.
#[pyfunction]
#[pyo3(signature = (objective, f, side = 10, na = 41, nb = 41, b_max = lattice::SWEEP_B_MAX))]
fn sweep(py: Python<'_>, objective: &str, f: &str, side: usize, na: usize, nb: usize, b_max: f64) -> PyResult<Vec<(f64, f64, f64)>> {
    let (f, obj) = (kernel(f)?, parse_objective(objective)?);
    let grid = SweepGrid::over_u(na, nb, b_max);
    let field = py.detach(|| lattice::sweep_fundamental_domain(&obj, &f, side, &grid)).map_err(err)?;
    Ok(field.into_iter().map(|p| (p.a, p.b, p.value)).collect())
}

#[pymodule]
pub fn specpts(m: &Bound<'_, PyModule>) -> PyResult<()> {
    m.add("__version__", env!("CARGO_PKG_VERSION"))?;
    m.add_class::<PyPointConfig>()?;
    m.add_class::<PyRunResult>()?;
    m.add_function(wrap_pyfunction!(evaluate, m)?)?;
    m.add_function(wrap_pyfunction!(laplacian_spectrum, m)?)?;
    m.add_function(wrap_pyfunction!(value_and_gradient, m)?)?;
    m.add_function(wrap_pyfunction!(fd_check, m)?)?;
    m.add_function(wrap_pyfunction!(minimize, m)?)?;
    m.add_function(wrap_pyfunction!(multi_start, m)?)?;
    m.add_function(wrap_pyfunction!(dispersion, m)?)?;
    m.add_function(wrap_pyfunction!(operator_norm, m)?)?;
    m.add_function(wrap_pyfunction!(dos, m)?)?;
    m.add_function(wrap_pyfunction!(van_hove_peak, m)?)?;
    m.add_function(wrap_pyfunction!(moment_w, m)?)?;
    m.add_function(wrap_pyfunction!(moment_l1, m)?)?;
    m.add_function(wrap_pyfunction!(torus_graph, m)?)?;
    m.add_function(wrap_pyfunction!(sweep, m)?)?;
    Ok(())
}
