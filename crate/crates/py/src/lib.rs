//! Python module `breather`: ground states, breather solves, finite-element
//! checks and period integration on top of `dnls-breather`.

use dnls_breather as core;
use dnls_breather::{BreatherError, Dim, ModeLabel, ModeSpec, SolverOptions, Splitting};
use pyo3::exceptions::{PyRuntimeError, PyValueError};
use pyo3::prelude::*;

fn to_py(e: BreatherError) -> PyErr {
    match e {
        BreatherError::MaxIterations { .. }
        | BreatherError::BasinFailure { .. }
        | BreatherError::SingularJacobian { .. }
        | BreatherError::BisectionFailed { .. }
        | BreatherError::NonBracketing { .. }
        | BreatherError::Io(_) => PyRuntimeError::new_err(e.to_string()),
        _ => PyValueError::new_err(e.to_string()),
    }
}

fn dim(n: usize) -> PyResult<Dim> {
    Dim::new(n).map_err(to_py)
}

fn mode(dim: Dim, label: &str) -> PyResult<ModeSpec> {
    let label: ModeLabel = label.parse().map_err(to_py)?;
    ModeSpec::new(dim, label).map_err(to_py)
}

fn json_to_py<T: serde::Serialize>(py: Python<'_>, value: &T) -> PyResult<PyObject> {
    let text = serde_json::to_string(value).map_err(|e| PyRuntimeError::new_err(e.to_string()))?;
    Ok(py.import("json")?.call_method1("loads", (text,))?.unbind())
}

/// Radial NLS ground state.
#[pyclass(name = "Profile", frozen)]
#[derive(Clone)]
struct PyProfile(core::ContinuumProfile);

#[pymethods]
impl PyProfile {
    #[getter]
    fn dim(&self) -> usize {
        self.0.dim().n()
    }

    #[getter]
    fn p(&self) -> f64 {
        self.0.p()
    }

    #[getter]
    fn lambda_c(&self) -> f64 {
        self.0.lambda_c()
    }

    #[getter]
    fn amplitude(&self) -> f64 {
        self.0.amplitude()
    }

    #[getter]
    fn decay_rate(&self) -> f64 {
        self.0.decay_rate()
    }

    /// Profile value at radius `r`.
    fn value(&self, r: f64) -> f64 {
        self.0.value_radial(r)
    }

    /// Squared L2 norm of the profile.
    fn mass(&self) -> f64 {
        self.0.summary().mass
    }

    fn __repr__(&self) -> String {
        format!("Profile(dim={}, p={}, lambda_c={:.12e})", self.0.dim().n(), self.0.p(), self.0.lambda_c())
    }
}

/// Real field on the lattice box `{-K..K}^n` with mesh `mu`.
#[pyclass(name = "Field", frozen)]
#[derive(Clone)]
struct PyField(core::LatticeField);

#[pymethods]
impl PyField {
    /// Values in row-major order over the box, last axis fastest.
    #[new]
    fn new(dim: usize, mesh: f64, radius: usize, values: Vec<f64>) -> PyResult<Self> {
        core::LatticeField::from_values(self::dim(dim)?, mesh, radius, values).map(Self).map_err(to_py)
    }

    #[getter]
    fn dim(&self) -> usize {
        self.0.dim().n()
    }

    #[getter]
    fn mesh(&self) -> f64 {
        self.0.mesh()
    }

    #[getter]
    fn radius(&self) -> usize {
        self.0.radius()
    }

    #[getter]
    fn values(&self) -> Vec<f64> {
        self.0.values().to_vec()
    }

    /// Value at a multi-index; zero outside the box.
    #[pyo3(signature = (i, j=0))]
    fn get(&self, i: i64, j: i64) -> f64 {
        self.0.get([i, j])
    }

    fn norm(&self) -> f64 {
        core::norm_d(&self.0)
    }

    fn hamiltonian(&self, p: f64) -> PyResult<f64> {
        core::hamiltonian_d(&self.0, p).map_err(to_py)
    }

    fn qmu_norm(&self) -> f64 {
        core::qmu_norm(&self.0)
    }

    /// `(max|f|, bound)` for the discrete sup bound.
    fn sup_bound(&self) -> (f64, f64) {
        core::sup_bound_check(&self.0)
    }

    /// Relative errors of the gradient and mass identities for the P1 interpolant.
    #[pyo3(signature = (mode="ST"))]
    fn fem_identities(&self, mode: &str) -> PyResult<(f64, f64)> {
        let m = self::mode(self.0.dim(), mode)?;
        let fem = core::FemFunction::new(self.0.clone(), m).map_err(to_py)?;
        Ok((fem.gradient_identity_report().rel_err, fem.mass_identity_report().rel_err))
    }

    fn __len__(&self) -> usize {
        self.0.len()
    }

    fn __repr__(&self) -> String {
        format!("Field(dim={}, mesh={}, radius={})", self.0.dim().n(), self.0.mesh(), self.0.radius())
    }
}

/// Converged breather.
#[pyclass(name = "Breather", frozen)]
struct PyBreather(core::BreatherResult);

#[pymethods]
impl PyBreather {
    #[getter]
    fn field(&self) -> PyField {
        PyField(self.0.field.clone())
    }

    #[getter]
    fn mode(&self) -> String {
        self.0.mode.label().to_string()
    }

    #[getter]
    fn p(&self) -> f64 {
        self.0.p
    }

    #[getter]
    fn lambda_(&self) -> f64 {
        self.0.lambda
    }

    #[getter]
    fn residual_inf(&self) -> f64 {
        self.0.residual_inf
    }

    #[getter]
    fn iterations(&self) -> usize {
        self.0.iterations
    }

    #[getter]
    fn trace(&self) -> Vec<f64> {
        self.0.trace.clone()
    }

    #[getter]
    fn period(&self) -> f64 {
        self.0.period()
    }

    /// Lowest eigenvalue of the constrained Hessian on the mode's symmetry class.
    fn coercivity_margin(&self) -> PyResult<f64> {
        core::coercivity_check(&self.0).map_err(to_py)
    }

    /// Same, without the symmetry restriction.
    fn unrestricted_eigenvalue(&self) -> PyResult<f64> {
        core::hessian_lowest_eigenvalue(&self.0, false).map_err(to_py)
    }

    /// Integrates one period with `steps` steps; returns `T`, `dt`, `dN`, `dH`, `return_defect`.
    #[pyo3(signature = (steps, splitting="strang"))]
    fn period_check(&self, py: Python<'_>, steps: usize, splitting: &str) -> PyResult<PyObject> {
        let s = match splitting {
            "strang" => Splitting::Strang,
            "yoshida4" => Splitting::Yoshida4,
            other => return Err(PyValueError::new_err(format!("unknown splitting {other:?}"))),
        };
        let (summary, _) = py.allow_threads(|| core::breather_period_check_with(&self.0, steps, s)).map_err(to_py)?;
        json_to_py(py, &summary)
    }

    fn summary(&self, py: Python<'_>) -> PyResult<PyObject> {
        json_to_py(py, &self.0.summary())
    }

    fn __repr__(&self) -> String {
        format!(
            "Breather(mode={}, mu={}, lambda={:.12e}, residual_inf={:.2e})",
            self.0.mode.label(),
            self.0.field.mesh(),
            self.0.lambda,
            self.0.residual_inf
        )
    }
}

/// Unit-mass ground state of the continuum NLS in `dim` dimensions.
#[pyfunction]
#[pyo3(signature = (dim, p=1.0))]
fn ground_state(py: Python<'_>, dim: usize, p: f64) -> PyResult<PyProfile> {
    let d = self::dim(dim)?;
    py.allow_threads(|| core::unit_mass_ground_state(d, p)).map(PyProfile).map_err(to_py)
}

/// Newton continuation from the ground state to a breather on mesh `mu`.
#[pyfunction]
#[pyo3(signature = (dim, mu, mode="ST", p=1.0, radius=None, tol=1e-12, max_iter=50))]
fn solve(
    py: Python<'_>,
    dim: usize,
    mu: f64,
    mode: &str,
    p: f64,
    radius: Option<usize>,
    tol: f64,
    max_iter: usize,
) -> PyResult<PyBreather> {
    let d = self::dim(dim)?;
    let m = self::mode(d, mode)?;
    let opts = SolverOptions { tol, max_iter, ..SolverOptions::default() };
    py.allow_threads(|| {
        let prof = core::unit_mass_ground_state(d, p)?;
        let k = match radius {
            Some(k) => k,
            None => core::auto_radius(&prof, mu)?,
        };
        core::solve_from_profile(&prof, &m, mu, k, &opts)
    })
    .map(PyBreather)
    .map_err(to_py)
}

/// Mesh-refinement study; returns the report as a dict.
#[pyfunction]
#[pyo3(signature = (dim, mus, mode="ST", p=1.0, tol=1e-12))]
fn convergence(py: Python<'_>, dim: usize, mus: Vec<f64>, mode: &str, p: f64, tol: f64) -> PyResult<PyObject> {
    let m = self::mode(self::dim(dim)?, mode)?;
    let rep = py.allow_threads(|| core::convergence_study(&m, p, &mus, tol)).map_err(to_py)?;
    json_to_py(py, &rep)
}

/// Mode labels available in `dim` dimensions.
#[pyfunction]
fn modes(dim: usize) -> PyResult<Vec<String>> {
    Ok(ModeSpec::all(self::dim(dim)?).iter().map(|m| m.label().to_string()).collect())
}

#[pymodule]
fn breather(m: &Bound<'_, PyModule>) -> PyResult<()> {
    m.add("__version__", core::VERSION)?;
    m.add_class::<PyProfile>()?;
    m.add_class::<PyField>()?;
    m.add_class::<PyBreather>()?;
    m.add_function(wrap_pyfunction!(ground_state, m)?)?;
    m.add_function(wrap_pyfunction!(solve, m)?)?;
    m.add_function(wrap_pyfunction!(convergence, m)?)?;
    m.add_function(wrap_pyfunction!(modes, m)?)?;
    Ok(())
}
