//! Python bindings: uncertainty sets, payoffs and the three pricing engines.

use std::path::PathBuf;

use gexp_core::gpde;
use gexp_core::harness::{csv_string, run_convergence, validate_law, ExperimentConfig, ValidationConfig, ValidationReport};
use gexp_core::strong_walk::{strong_dp_value, StrongConfig, StrongLaw};
use gexp_core::weak_dp::{self, extract_optimal_law, BoundMode, WeakDpConfig};
use gexp_core::{DiscretePath, PathPayoff, PayoffFn, PayoffKind, SymMatrix};
use pyo3::exceptions::PyValueError;
use pyo3::prelude::*;
use pyo3::types::PyDict;

fn err(e: gexp_core::Error) -> PyErr {
    PyValueError::new_err(e.to_string())
}

fn bound_mode(name: &str) -> PyResult<BoundMode> {
    name.parse::<BoundMode>().map_err(err)
}

/// Convex compact set of covariance matrices.
#[pyclass(name = "UncertaintySet", frozen)]
struct PySet {
    inner: gexp_core::UncertaintySet,
}

fn matrix(rows: Vec<Vec<f64>>) -> PyResult<SymMatrix> {
    let d = rows.len();
    if rows.iter().any(|r| r.len() != d) {
        return Err(PyValueError::new_err("matrices must be square"));
    }
    SymMatrix::from_row_major(d, &rows.concat()).map_err(err)
}

fn rows(m: &SymMatrix) -> Vec<Vec<f64>> {
    m.to_row_major().chunks(m.dim()).map(|c| c.to_vec()).collect()
}

#[pymethods]
impl PySet {
    /// Scalar variances in `[r, R]`.
    #[staticmethod]
    fn interval(r: f64, big_r: f64) -> PyResult<Self> {
        Ok(Self {
            inner: gexp_core::UncertaintySet::interval(r, big_r).map_err(err)?,
        })
    }

    /// Convex hull of symmetric positive semidefinite matrices.
    #[staticmethod]
    fn hull(vertices: Vec<Vec<Vec<f64>>>) -> PyResult<Self> {
        let verts = vertices.into_iter().map(matrix).collect::<PyResult<Vec<_>>>()?;
        Ok(Self {
            inner: gexp_core::UncertaintySet::hull(verts).map_err(err)?,
        })
    }

    #[getter]
    fn dim(&self) -> usize {
        self.inner.dim()
    }

    /// Smallest and largest eigenvalue over the set.
    fn spectrum_bounds(&self) -> (f64, f64) {
        self.inner.spectrum_bounds()
    }

    /// `sup_{A in D} tr(gamma A) / 2`.
    fn support_function(&self, gamma: Vec<Vec<f64>>) -> PyResult<f64> {
        self.inner.support_function(&matrix(gamma)?).map_err(err)
    }

    /// Frobenius-nearest member of the set.
    fn project(&self, gamma: Vec<Vec<f64>>) -> PyResult<Vec<Vec<f64>>> {
        Ok(rows(&self.inner.project(&matrix(gamma)?).map_err(err)?))
    }

    #[pyo3(signature = (gamma, tol = 1e-9))]
    fn contains(&self, gamma: Vec<Vec<f64>>, tol: f64) -> PyResult<bool> {
        self.inner.contains(&matrix(gamma)?, tol).map_err(err)
    }

    fn vertices(&self) -> Vec<Vec<Vec<f64>>> {
        self.inner.vertices().iter().map(rows).collect()
    }

    fn __repr__(&self) -> String {
        let (r, big_r) = self.inner.spectrum_bounds();
        format!("UncertaintySet(dim={}, spectrum=[{r}, {big_r}])", self.inner.dim())
    }
}

/// Path payoff: a built-in function applied to the terminal value, the running
/// maximum or the time average of the path.
#[pyclass(name = "Payoff", frozen)]
struct PyPayoff {
    inner: PathPayoff,
}

#[pymethods]
impl PyPayoff {
    #[new]
    #[pyo3(signature = (function, kind = "terminal", strike = None, value = None, dim = 1))]
    fn new(function: &str, kind: &str, strike: Option<f64>, value: Option<f64>, dim: usize) -> PyResult<Self> {
        let need = |x: Option<f64>, what: &str| x.ok_or_else(|| PyValueError::new_err(format!("`{function}` needs `{what}`")));
        let f = match function {
            "square" => PayoffFn::Square,
            "neg_square" => PayoffFn::NegSquare,
            "abs" => PayoffFn::Abs,
            "identity" => PayoffFn::Identity,
            "call" => PayoffFn::Call {
                strike: need(strike, "strike")?,
            },
            "put" => PayoffFn::Put {
                strike: need(strike, "strike")?,
            },
            "constant" => PayoffFn::Constant(need(value, "value")?),
            other => return Err(PyValueError::new_err(format!("unknown payoff function `{other}`"))),
        };
        let kind = match kind {
            "terminal" => PayoffKind::Terminal,
            "lookback" => PayoffKind::Lookback,
            "average" => PayoffKind::Average,
            other => return Err(PyValueError::new_err(format!("unknown payoff kind `{other}`"))),
        };
        if dim == 0 {
            return Err(PyValueError::new_err("dim must be positive"));
        }
        Ok(Self {
            inner: PathPayoff::new(dim, kind, f),
        })
    }

    /// Payoff of a discrete path given as a list of points starting at the origin.
    #[pyo3(signature = (points, horizon = 1.0))]
    fn evaluate(&self, points: Vec<Vec<f64>>, horizon: f64) -> PyResult<f64> {
        let path = DiscretePath::new(horizon, points).map_err(err)?;
        self.inner.evaluate_on_discrete(&path).map_err(err)
    }

    fn __repr__(&self) -> String {
        format!(
            "Payoff({:?}, kind={:?}, dim={})",
            self.inner.function(),
            self.inner.kind(),
            self.inner.dim()
        )
    }
}

/// Weak discrete-time value over all admissible martingale laws.
#[pyfunction]
#[pyo3(signature = (payoff, set, n, horizon = 1.0, bound_mode = "relaxed"))]
fn weak_value(py: Python<'_>, payoff: &PyPayoff, set: &PySet, n: usize, horizon: f64, bound_mode: &str) -> PyResult<f64> {
    let cfg = WeakDpConfig {
        bound_mode: self::bound_mode(bound_mode)?,
        ..Default::default()
    };
    py.detach(|| weak_dp::evaluate(&payoff.inner, &set.inner, n, horizon, &cfg))
        .map(|r| r.value)
        .map_err(err)
}

/// Strong discrete-time value over volatility-controlled random walks.
#[pyfunction]
#[pyo3(signature = (payoff, set, n, horizon = 1.0, refinement = 1))]
fn strong_value(py: Python<'_>, payoff: &PyPayoff, set: &PySet, n: usize, horizon: f64, refinement: u32) -> PyResult<f64> {
    let cfg = StrongConfig {
        refinement,
        ..Default::default()
    };
    py.detach(|| strong_dp_value(&payoff.inner, &set.inner, n, horizon, &cfg))
        .map(|r| r.value)
        .map_err(err)
}

/// Continuous-time value from the G-heat equation (terminal payoffs, d = 1 or
/// diagonal d = 2).
#[pyfunction]
#[pyo3(signature = (payoff, set, horizon = 1.0, points_per_sd = 100.0))]
fn pde_value(py: Python<'_>, payoff: &PyPayoff, set: &PySet, horizon: f64, points_per_sd: f64) -> PyResult<f64> {
    py.detach(|| gexp_core::harness::pde_reference(&payoff.inner, &set.inner, horizon, points_per_sd))
        .map_err(err)?
        .ok_or_else(|| PyValueError::new_err("no PDE solver for this payoff and set"))
}

/// `E[f(sigma W_T)]` for a scalar terminal payoff.
#[pyfunction]
#[pyo3(signature = (payoff, sigma, horizon = 1.0))]
fn gaussian_value(payoff: &PyPayoff, sigma: f64, horizon: f64) -> PyResult<f64> {
    gpde::gaussian_oracle(payoff.inner.function(), sigma, horizon).map_err(err)
}

fn report_dict<'py>(py: Python<'py>, report: &ValidationReport) -> PyResult<Bound<'py, PyDict>> {
    let out = PyDict::new(py);
    out.set_item("passed", report.passed())?;
    for check in report.checks() {
        out.set_item(check.name, check.passed)?;
    }
    out.set_item("fitted_exponent", report.fitted_exponent)?;
    out.set_item("warnings", report.warnings.clone())?;
    Ok(out)
}

/// Builds the optimal weak and strong laws and runs the pathwise and moment
/// checks on both. Returns `{"weak": {...}, "strong": {...}}`.
#[pyfunction]
#[pyo3(signature = (payoff, set, n, horizon = 1.0, paths = 10_000, seed = 0, bound_mode = "relaxed"))]
#[allow(clippy::too_many_arguments)]
fn validate<'py>(
    py: Python<'py>,
    payoff: &PyPayoff,
    set: &PySet,
    n: usize,
    horizon: f64,
    paths: usize,
    seed: u64,
    bound_mode: &str,
) -> PyResult<Bound<'py, PyDict>> {
    let mode = self::bound_mode(bound_mode)?;
    let vcfg = ValidationConfig {
        paths,
        seed,
        bound_mode: mode,
        ..Default::default()
    };
    let (weak, strong) = py
        .detach(|| -> gexp_core::Result<_> {
            let wcfg = WeakDpConfig {
                bound_mode: mode,
                store_policy: true,
                ..Default::default()
            };
            let wres = weak_dp::evaluate(&payoff.inner, &set.inner, n, horizon, &wcfg)?;
            let weak = validate_law(&extract_optimal_law(&wres)?, &set.inner, &vcfg)?;
            let scfg = StrongConfig {
                store_policy: true,
                ..Default::default()
            };
            let sres = strong_dp_value(&payoff.inner, &set.inner, n, horizon, &scfg)?;
            let policy = sres.policy.expect("policy was stored");
            let strong = validate_law(&StrongLaw::new(policy, n, horizon)?, &set.inner, &vcfg)?;
            Ok((weak, strong))
        })
        .map_err(err)?;
    let out = PyDict::new(py);
    out.set_item("weak", report_dict(py, &weak)?)?;
    out.set_item("strong", report_dict(py, &strong)?)?;
    Ok(out)
}

/// Runs the convergence table of an experiment file and returns it as CSV.
#[pyfunction]
fn converge(py: Python<'_>, config_path: PathBuf) -> PyResult<String> {
    let cfg = ExperimentConfig::load(&config_path).map_err(err)?;
    py.detach(|| run_convergence(&cfg)).map(|r| csv_string(&r)).map_err(err)
}

#[pymodule]
fn gexp(m: &Bound<'_, PyModule>) -> PyResult<()> {
    m.add_class::<PySet>()?;
    m.add_class::<PyPayoff>()?;
    m.add_function(wrap_pyfunction!(weak_value, m)?)?;
    m.add_function(wrap_pyfunction!(strong_value, m)?)?;
    m.add_function(wrap_pyfunction!(pde_value, m)?)?;
    m.add_function(wrap_pyfunction!(gaussian_value, m)?)?;
    m.add_function(wrap_pyfunction!(validate, m)?)?;
    m.add_function(wrap_pyfunction!(converge, m)?)?;
    Ok(())
}
