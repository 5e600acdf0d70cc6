//! Python bindings for `blindinv`.
//!
//! Bases are named by string (`"sine"`, `"trig"`, `"sine-dyadic"`), θ is a
//! float or a list of floats, and coefficient vectors cross the boundary as
//! [`Coefficients`] objects.

use pyo3::exceptions::{PyIOError, PyValueError};
use pyo3::prelude::*;
use pyo3::types::PyDict;

use blindinv::bench::{self, ExperimentConfig, ModelSetup};
use blindinv::{
    BasisKind, BasisSpec, ChainConfig, CoefficientVector, CutoffBranch, GalerkinConfig,
    LepskiConfig, LepskiGrid, LevelScaling, OperatorModel, PriorConfig, ThetaDim, ThetaParam,
    ThetaUpdate,
};

fn py_err(e: blindinv::Error) -> PyErr {
    match e {
        blindinv::Error::Io { .. } => PyIOError::new_err(e.to_string()),
        _ => PyValueError::new_err(e.to_string()),
    }
}

fn parse_basis(name: &str) -> PyResult<BasisSpec> {
    name.parse().map_err(py_err)
}

fn basis_name(b: BasisSpec) -> String {
    let kind = match b.kind {
        BasisKind::SinePeriodic => "sine",
        BasisKind::Trigonometric => "trig",
    };
    match b.level_scaling {
        LevelScaling::Linear => kind.to_string(),
        LevelScaling::Dyadic => format!("{kind}-dyadic"),
    }
}

fn theta_from(obj: &Bound<'_, PyAny>) -> PyResult<ThetaParam> {
    if let Ok(v) = obj.extract::<f64>() {
        return Ok(ThetaParam::Scalar(v));
    }
    Ok(ThetaParam::Sequence(obj.extract::<Vec<f64>>()?))
}

fn theta_to(py: Python<'_>, t: &ThetaParam) -> PyResult<Py<PyAny>> {
    Ok(match t {
        ThetaParam::Scalar(v) => v.into_pyobject(py)?.into_any().unbind(),
        ThetaParam::Sequence(v) => v.clone().into_pyobject(py)?.into_any().unbind(),
    })
}

/// Basis coefficients of a function on `[0, 1]`.
#[pyclass(name = "Coefficients", module = "blindinv_py", from_py_object)]
#[derive(Clone)]
pub struct PyCoefficients {
    inner: CoefficientVector,
}

#[pymethods]
impl PyCoefficients {
    #[new]
    #[pyo3(signature = (basis, level, coeffs))]
    fn new(basis: &str, level: usize, coeffs: Vec<f64>) -> PyResult<Self> {
        let inner = CoefficientVector::new(parse_basis(basis)?, level, coeffs).map_err(py_err)?;
        Ok(PyCoefficients { inner })
    }

    #[getter]
    fn basis(&self) -> String {
        basis_name(self.inner.basis())
    }

    #[getter]
    fn level(&self) -> usize {
        self.inner.level()
    }

    #[getter]
    fn coeffs(&self) -> Vec<f64> {
        self.inner.coeffs().to_vec()
    }

    fn __len__(&self) -> usize {
        self.inner.len()
    }

    fn project(&self, level: usize) -> Self {
        PyCoefficients {
            inner: self.inner.project(level),
        }
    }

    fn l2_norm(&self) -> f64 {
        self.inner.l2_norm()
    }

    fn sobolev_norm(&self, s: f64) -> f64 {
        self.inner.sobolev_norm(s)
    }

    fn distance(&self, other: &PyCoefficients) -> f64 {
        self.inner.distance(&other.inner)
    }

    fn eval(&self, x: f64) -> f64 {
        self.inner.eval(x)
    }

    /// `(xs, values)` on `n_points` equispaced points of `[0, 1]`.
    fn evaluate_on_grid(&self, n_points: usize) -> PyResult<(Vec<f64>, Vec<f64>)> {
        let pts = self.inner.evaluate_on_grid(n_points).map_err(py_err)?;
        Ok(pts.into_iter().unzip())
    }

    fn __repr__(&self) -> String {
        format!(
            "Coefficients(basis='{}', level={}, len={})",
            basis_name(self.inner.basis()),
            self.inner.level(),
            self.inner.len()
        )
    }
}

/// Forward operator `K_θ`: `"heat"` (sine basis, `t` required) or a
/// diagonal operator on the named basis.
#[pyclass(name = "Operator", module = "blindinv_py", from_py_object)]
#[derive(Clone)]
pub struct PyOperator {
    inner: OperatorModel,
}

#[pymethods]
impl PyOperator {
    #[staticmethod]
    #[pyo3(signature = (t = 0.1))]
    fn heat(t: f64) -> PyResult<Self> {
        Ok(PyOperator {
            inner: OperatorModel::heat(t).map_err(py_err)?,
        })
    }

    #[staticmethod]
    #[pyo3(signature = (basis = "trig"))]
    fn diagonal(basis: &str) -> PyResult<Self> {
        Ok(PyOperator {
            inner: OperatorModel::svd_diagonal(parse_basis(basis)?),
        })
    }

    #[getter]
    fn basis(&self) -> String {
        basis_name(self.inner.basis())
    }

    fn apply(&self, theta: &Bound<'_, PyAny>, f: &PyCoefficients) -> PyResult<PyCoefficients> {
        let inner = self
            .inner
            .apply(&theta_from(theta)?, &f.inner)
            .map_err(py_err)?;
        Ok(PyCoefficients { inner })
    }

    fn singular_values(&self, theta: &Bound<'_, PyAny>, level: usize) -> PyResult<Vec<f64>> {
        self.inner
            .singular_values(&theta_from(theta)?, level)
            .map_err(py_err)
    }

    fn inverse_opnorm(&self, theta: &Bound<'_, PyAny>, level: usize) -> PyResult<f64> {
        self.inner
            .inverse_opnorm(&theta_from(theta)?, level)
            .map_err(py_err)
    }
}

/// A simulated pair `(Y, T)`.
#[pyclass(name = "Observation", module = "blindinv_py", from_py_object)]
#[derive(Clone)]
pub struct PyObservation {
    inner: blindinv::Observation,
}

#[pymethods]
impl PyObservation {
    #[getter]
    fn y(&self) -> PyCoefficients {
        PyCoefficients {
            inner: self.inner.y.clone(),
        }
    }

    #[getter]
    fn t(&self, py: Python<'_>) -> PyResult<Py<PyAny>> {
        theta_to(py, &self.inner.t)
    }

    #[getter]
    fn eps(&self) -> f64 {
        self.inner.eps
    }

    #[getter]
    fn delta(&self) -> f64 {
        self.inner.delta
    }

    #[getter]
    fn seed(&self) -> u64 {
        self.inner.seed
    }
}

#[pyfunction]
#[pyo3(signature = (op, f0, theta0, eps, delta, n_sim, seed))]
fn simulate(
    op: &PyOperator,
    f0: &PyCoefficients,
    theta0: &Bound<'_, PyAny>,
    eps: f64,
    delta: f64,
    n_sim: usize,
    seed: u64,
) -> PyResult<PyObservation> {
    let inner = blindinv::simulate(
        &op.inner,
        &f0.inner,
        &theta_from(theta0)?,
        eps,
        delta,
        n_sim,
        seed,
    )
    .map_err(py_err)?;
    Ok(PyObservation { inner })
}

#[pyfunction]
#[pyo3(signature = (op, f0, theta0, n_sim))]
fn simulate_noiseless(
    op: &PyOperator,
    f0: &PyCoefficients,
    theta0: &Bound<'_, PyAny>,
    n_sim: usize,
) -> PyResult<PyObservation> {
    let inner = blindinv::simulate_noiseless(&op.inner, &f0.inner, &theta_from(theta0)?, n_sim)
        .map_err(py_err)?;
    Ok(PyObservation { inner })
}

/// Returns `(estimate, zeroed)`; `zeroed` is true when the cutoff fired.
#[pyfunction]
#[pyo3(signature = (obs, level, tau = 2.0))]
fn galerkin_estimate(
    obs: &PyObservation,
    level: usize,
    tau: f64,
) -> PyResult<(PyCoefficients, bool)> {
    let cfg = GalerkinConfig {
        tau,
        ..GalerkinConfig::default()
    };
    let est = blindinv::galerkin_estimate(&obs.inner, level, &cfg).map_err(py_err)?;
    Ok((
        PyCoefficients { inner: est.f },
        est.branch == CutoffBranch::Zeroed,
    ))
}

/// Lepski level for the deconvolution defaults, with optional overrides.
/// Returns `(level, candidates)`.
#[pyfunction]
#[pyo3(signature = (obs, delta_tune = None, b = None, dyadic = false, tau = 2.0))]
fn lepski_select(
    obs: &PyObservation,
    delta_tune: Option<f64>,
    b: Option<f64>,
    dyadic: bool,
    tau: f64,
) -> PyResult<(usize, Vec<usize>)> {
    let mut cfg = LepskiConfig::deconvolution_default();
    if let Some(d) = delta_tune {
        cfg.delta_tune = d;
    }
    if let Some(b) = b {
        cfg.b = b;
    }
    if dyadic {
        cfg.grid = LepskiGrid::Dyadic;
    }
    let gcfg = GalerkinConfig {
        tau,
        ..GalerkinConfig::default()
    };
    let (level, diag) = blindinv::lepski_select(&obs.inner, &cfg, &gcfg).map_err(py_err)?;
    Ok((level, diag.candidates))
}

/// Runs the Gibbs sampler at `level` and returns a dict with the posterior
/// mean of `f`, the mean of θ, the acceptance rate and the kept draws of `f`.
#[allow(clippy::too_many_arguments)]
#[pyfunction]
#[pyo3(signature = (
    obs, level, tau_sq = 1.0, sigma_theta_sq = 1.0, burn_in = 1000, n_keep = 500,
    thin = 5, seed = 0, exact_theta = false, scalar_theta = None
))]
fn gibbs_run<'py>(
    py: Python<'py>,
    obs: &PyObservation,
    level: usize,
    tau_sq: f64,
    sigma_theta_sq: f64,
    burn_in: usize,
    n_keep: usize,
    thin: usize,
    seed: u64,
    exact_theta: bool,
    scalar_theta: Option<bool>,
) -> PyResult<Bound<'py, PyDict>> {
    let o = &obs.inner;
    let scalar = scalar_theta.unwrap_or_else(|| o.model.is_heat());
    let dim = if scalar {
        ThetaDim::Scalar
    } else {
        ThetaDim::Sequence
    };
    let prior =
        PriorConfig::new(o.model.basis(), level, tau_sq, sigma_theta_sq, dim).map_err(py_err)?;
    let chain = ChainConfig {
        burn_in,
        n_keep,
        thin,
        ..ChainConfig::for_delta(o.delta, seed)
    };
    let policy = if exact_theta {
        ThetaUpdate::ExactGaussian
    } else {
        ThetaUpdate::MetropolisHastings
    };
    let s = py
        .detach(|| blindinv::gibbs_run(o, &prior, &chain, policy))
        .map_err(py_err)?;
    let d = PyDict::new(py);
    d.set_item("mean_f", PyCoefficients { inner: s.mean_f })?;
    d.set_item(
        "draw_mean_f",
        PyCoefficients {
            inner: s.draw_mean_f,
        },
    )?;
    d.set_item("mean_theta", theta_to(py, &s.mean_theta)?)?;
    d.set_item("acceptance_rate", s.acceptance_rate)?;
    d.set_item("posterior_var", s.posterior_var)?;
    let draws: Vec<PyCoefficients> = s
        .draws_f
        .into_iter()
        .map(|inner| PyCoefficients { inner })
        .collect();
    d.set_item("draws_f", draws)?;
    Ok(d)
}

/// Sine coefficients of the test function `4x(1-x)(8x-5)` up to level `n`.
#[pyfunction]
fn f0_coefficients(n: usize) -> PyCoefficients {
    PyCoefficients {
        inner: bench::f0_coefficients(n),
    }
}

/// Trigonometric coefficients of the same test function.
#[pyfunction]
fn f0_trig_coefficients(n: usize) -> PyCoefficients {
    PyCoefficients {
        inner: bench::f0_trig_coefficients(n),
    }
}

#[pyfunction]
fn laplace_singular_values(h: f64, levels: usize) -> PyResult<Vec<f64>> {
    Ok(blindinv::laplace_singular_values(h, levels)
        .map_err(py_err)?
        .as_slice()
        .to_vec())
}

/// Runs the `"heat"` or `"deconv"` preset over the given grids and returns
/// one dict per `(eps, delta)` cell.
#[pyfunction]
#[pyo3(signature = (preset, eps, delta, n_mc, seed = None, zero_noise = false))]
fn run_experiment<'py>(
    py: Python<'py>,
    preset: &str,
    eps: Vec<f64>,
    delta: Vec<f64>,
    n_mc: usize,
    seed: Option<u64>,
    zero_noise: bool,
) -> PyResult<Vec<Bound<'py, PyDict>>> {
    let mut cfg = match preset {
        "heat" => ExperimentConfig::heat_preset(),
        "deconv" => ExperimentConfig::deconv_preset(),
        other => return Err(PyValueError::new_err(format!("unknown preset `{other}`"))),
    };
    cfg.eps_grid = eps;
    cfg.delta_grid = delta;
    cfg.n_mc = n_mc;
    cfg.zero_noise = zero_noise;
    cfg.n_plot_draws = 0;
    if let Some(s) = seed {
        cfg.base_seed = s;
    }
    cfg.validate().map_err(py_err)?;
    let report = py.detach(|| bench::run_experiment(&cfg)).map_err(py_err)?;
    let heat = matches!(cfg.model, ModelSetup::Heat { .. });
    report
        .cells
        .into_iter()
        .map(|c| {
            let d = PyDict::new(py);
            d.set_item("eps", c.eps)?;
            d.set_item("delta", c.delta)?;
            d.set_item("n_mc", c.n_mc)?;
            d.set_item("rmise_post", c.rmise_post)?;
            d.set_item("rmise_galerkin", c.rmise_galerkin)?;
            d.set_item("rmse_theta", c.rmse_theta)?;
            d.set_item("level_hist", c.level_hist)?;
            d.set_item(
                "reference_rmise",
                if heat { c.reference_rmise } else { None },
            )?;
            Ok(d)
        })
        .collect()
}

#[pymodule]
pub fn blindinv_py(m: &Bound<'_, PyModule>) -> PyResult<()> {
    m.add_class::<PyCoefficients>()?;
    m.add_class::<PyOperator>()?;
    m.add_class::<PyObservation>()?;
    m.add_function(wrap_pyfunction!(simulate, m)?)?;
    m.add_function(wrap_pyfunction!(simulate_noiseless, m)?)?;
    m.add_function(wrap_pyfunction!(galerkin_estimate, m)?)?;
    m.add_function(wrap_pyfunction!(lepski_select, m)?)?;
    m.add_function(wrap_pyfunction!(gibbs_run, m)?)?;
    m.add_function(wrap_pyfunction!(f0_coefficients, m)?)?;
    m.add_function(wrap_pyfunction!(f0_trig_coefficients, m)?)?;
    m.add_function(wrap_pyfunction!(laplace_singular_values, m)?)?;
    m.add_function(wrap_pyfunction!(run_experiment, m)?)?;
    Ok(())
}
