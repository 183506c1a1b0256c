//! Python bindings: systems, resonances, small-divisor functions, averaging,
//! orbit integration, and drift experiments. Reports come back as plain
//! dicts/lists mirroring the JSON the CLI writes.

use pyo3::exceptions::{PyIOError, PyRuntimeError, PyValueError};
use pyo3::prelude::*;
use pyo3::types::{PyDict, PyList};

use microdrift_core::averaging::AveragedPerturbation;
use microdrift_core::divisors::SmallDivisorProfile;
use microdrift_core::drift::{
    auto_qmax, epsilon_sweep, micro_drift_run, AdaptedLab, DriftConfig,
};
use microdrift_core::hamiltonian::{Actions, Angles, NearIntegrableSystem};
use microdrift_core::integrator::{default_step, integrate, PhaseState};
use microdrift_core::io::SystemDef;
use microdrift_core::normal_form::verify_lemma_estimates;
use microdrift_core::resonance::{adapt_system, Rational, ResonanceData};
use microdrift_core::{Error as CoreError, ErrorClass};

fn to_py_err(err: CoreError) -> PyErr {
    let msg = err.to_string();
    match err.class() {
        ErrorClass::Validation => PyValueError::new_err(msg),
        ErrorClass::Numeric => PyRuntimeError::new_err(msg),
        ErrorClass::Io => PyIOError::new_err(msg),
    }
}

fn json_to_py(py: Python<'_>, value: &serde_json::Value) -> PyResult<Py<PyAny>> {
    Ok(match value {
        serde_json::Value::Null => py.None(),
        serde_json::Value::Bool(b) => b.into_pyobject(py)?.to_owned().unbind().into_any(),
        serde_json::Value::Number(n) => {
            if let Some(i) = n.as_i64() {
                i.into_pyobject(py)?.unbind().into_any()
            } else {
                n.as_f64().unwrap_or(f64::NAN).into_pyobject(py)?.unbind().into_any()
            }
        }
        serde_json::Value::String(s) => s.into_pyobject(py)?.unbind().into_any(),
        serde_json::Value::Array(items) => {
            let list = PyList::empty(py);
            for item in items {
                list.append(json_to_py(py, item)?)?;
            }
            list.unbind().into_any()
        }
        serde_json::Value::Object(map) => {
            let dict = PyDict::new(py);
            for (k, v) in map {
                dict.set_item(k, json_to_py(py, v)?)?;
            }
            dict.unbind().into_any()
        }
    })
}

fn report_to_py<T: serde::Serialize>(py: Python<'_>, report: &T) -> PyResult<Py<PyAny>> {
    let value = serde_json::to_value(report)
        .map_err(|e| PyRuntimeError::new_err(format!("serialization failed: {e}")))?;
    json_to_py(py, &value)
}

/// Near-integrable Hamiltonian `h(I) + eps f(theta, I)`.
#[pyclass(name = "System", skip_from_py_object)]
#[derive(Clone)]
struct PySystem {
    inner: NearIntegrableSystem,
}

#[pymethods]
impl PySystem {
    /// Build from the JSON schema used by system definition files.
    #[staticmethod]
    fn from_json(text: &str) -> PyResult<Self> {
        let def: SystemDef =
            serde_json::from_str(text).map_err(|e| PyValueError::new_err(e.to_string()))?;
        Ok(PySystem { inner: def.to_system().map_err(to_py_err)? })
    }

    #[staticmethod]
    fn from_file(path: &str) -> PyResult<Self> {
        microdrift_core::io::load_system(std::path::Path::new(path))
            .map(|inner| PySystem { inner })
            .map_err(to_py_err)
    }

    fn to_json(&self) -> PyResult<String> {
        serde_json::to_string_pretty(&SystemDef::from_system(&self.inner))
            .map_err(|e| PyRuntimeError::new_err(e.to_string()))
    }

    #[getter]
    fn n(&self) -> usize {
        self.inner.dim()
    }

    #[getter]
    fn epsilon(&self) -> f64 {
        self.inner.epsilon()
    }

    #[getter]
    fn domain_radius(&self) -> f64 {
        self.inner.domain_radius()
    }

    fn with_epsilon(&self, eps: f64) -> PyResult<Self> {
        Ok(PySystem { inner: self.inner.with_epsilon(eps).map_err(to_py_err)? })
    }

    fn eval_h(&self, actions: Vec<f64>) -> PyResult<f64> {
        self.inner.eval_h(&actions).map_err(to_py_err)
    }

    fn grad_h(&self, actions: Vec<f64>) -> PyResult<Vec<f64>> {
        self.inner.grad_h(&actions).map_err(to_py_err)
    }

    fn hess_h(&self, actions: Vec<f64>) -> PyResult<Vec<Vec<f64>>> {
        self.inner.hess_h(&actions).map_err(to_py_err)
    }

    fn eval_f(&self, theta: Vec<f64>, actions: Vec<f64>) -> PyResult<f64> {
        self.inner.eval_f(&theta, &actions).map_err(to_py_err)
    }

    fn grad_theta_f(&self, theta: Vec<f64>, actions: Vec<f64>) -> PyResult<Vec<f64>> {
        self.inner.grad_theta_f(&theta, &actions).map_err(to_py_err)
    }

    fn grad_actions_f(&self, theta: Vec<f64>, actions: Vec<f64>) -> PyResult<Vec<f64>> {
        self.inner.grad_actions_f(&theta, &actions).map_err(to_py_err)
    }

    fn energy(&self, theta: Vec<f64>, actions: Vec<f64>) -> PyResult<f64> {
        self.inner.energy(&theta, &actions).map_err(to_py_err)
    }

    /// Sampled sup norms of `|h|_{C^2}` and `|f|_{C^3}`.
    #[pyo3(signature = (grid_per_dim = 8))]
    fn sup_norms(&self, py: Python<'_>, grid_per_dim: usize) -> PyResult<Py<PyAny>> {
        let report = self.inner.sup_norm_estimates(grid_per_dim).map_err(to_py_err)?;
        report_to_py(py, &report)
    }

    fn __repr__(&self) -> String {
        format!(
            "System(n={}, epsilon={:.3e}, modes={})",
            self.inner.dim(),
            self.inner.epsilon(),
            self.inner.f().mode_count()
        )
    }
}

/// Resonant point plus lattice data and adapted coordinates.
#[pyclass(name = "Resonance", skip_from_py_object)]
#[derive(Clone)]
struct PyResonance {
    inner: ResonanceData,
}

#[pymethods]
impl PyResonance {
    /// Exact resonance of a rational frequency; `nums[i] / dens[i]`.
    #[staticmethod]
    fn rational(i_star: Vec<f64>, nums: Vec<i64>, dens: Vec<i64>) -> PyResult<Self> {
        if nums.len() != dens.len() {
            return Err(PyValueError::new_err("nums and dens must have equal length"));
        }
        let omega: Vec<Rational> = nums
            .iter()
            .zip(&dens)
            .map(|(&num, &den)| Rational::new(num, den))
            .collect::<Result<_, _>>()
            .map_err(to_py_err)?;
        Ok(PyResonance {
            inner: ResonanceData::from_rational(i_star, &omega).map_err(to_py_err)?,
        })
    }

    /// Frequency already in adapted form `omega = (0, omega_tilde)`.
    #[staticmethod]
    fn adapted(i_star: Vec<f64>, d: usize, omega_tilde: Vec<f64>) -> PyResult<Self> {
        Ok(PyResonance {
            inner: ResonanceData::from_adapted(i_star, d, omega_tilde).map_err(to_py_err)?,
        })
    }

    #[staticmethod]
    fn from_file(path: &str) -> PyResult<Self> {
        microdrift_core::io::load_resonance(std::path::Path::new(path))
            .map(|inner| PyResonance { inner })
            .map_err(to_py_err)
    }

    #[getter]
    fn d(&self) -> usize {
        self.inner.d
    }

    #[getter]
    fn omega(&self) -> Vec<f64> {
        self.inner.omega.clone()
    }

    #[getter]
    fn omega_tilde(&self) -> Vec<f64> {
        self.inner.omega_tilde.clone()
    }

    #[getter]
    fn i_star(&self) -> Vec<f64> {
        self.inner.i_star.clone()
    }

    #[getter]
    fn lambda_basis(&self) -> Vec<Vec<i64>> {
        self.inner.lambda_basis.to_rows()
    }

    #[getter]
    fn adaptation(&self) -> Vec<Vec<i64>> {
        self.inner.adaptation.to_rows()
    }

    fn __repr__(&self) -> String {
        format!("Resonance(d={}, omega={:?})", self.inner.d, self.inner.omega)
    }
}

/// `[(Q, min_divisor, Psi(Q))]` for `Q = 1..=q_max` by exhaustive search.
#[pyfunction]
#[pyo3(signature = (omega_tilde, q_max, kappa = 1.0))]
fn psi_table(omega_tilde: Vec<f64>, q_max: u32, kappa: f64) -> PyResult<Vec<(u32, f64, f64)>> {
    let profile = SmallDivisorProfile::build(&omega_tilde, q_max, kappa).map_err(to_py_err)?;
    Ok(profile.table())
}

/// `Delta(x) = sup { Q >= 1 : Q Psi(Q) <= x }`.
#[pyfunction]
#[pyo3(signature = (omega_tilde, x, q_max))]
fn delta(omega_tilde: Vec<f64>, x: f64, q_max: u32) -> PyResult<f64> {
    let profile = SmallDivisorProfile::build(&omega_tilde, q_max, 1.0).map_err(to_py_err)?;
    profile.delta(x).map_err(to_py_err)
}

/// `mu(sqrt(eps)) = Delta(kappa / sqrt(eps))^{-1}`.
#[pyfunction]
#[pyo3(signature = (omega_tilde, eps, kappa = 1.0, q_max = None))]
fn mu(omega_tilde: Vec<f64>, eps: f64, kappa: f64, q_max: Option<u32>) -> PyResult<f64> {
    let q_max = match q_max {
        Some(q) => q,
        None => auto_qmax(&omega_tilde, kappa, eps).map_err(to_py_err)?,
    };
    let profile = SmallDivisorProfile::build(&omega_tilde, q_max, kappa).map_err(to_py_err)?;
    profile.mu_of_eps(eps).map_err(to_py_err)
}

/// Resonant average of a system: critical angle, gradient size, and the
/// derived constants `delta`, `c`.
#[pyfunction]
fn average(py: Python<'_>, system: &PySystem, resonance: &PyResonance) -> PyResult<Py<PyAny>> {
    resonance.inner.validate_against(&system.inner).map_err(to_py_err)?;
    let adapted = adapt_system(&system.inner, &resonance.inner).map_err(to_py_err)?;
    let averaged =
        AveragedPerturbation::from_adapted(&adapted.system, adapted.d).map_err(to_py_err)?;
    let payload = serde_json::json!({
        "d": averaged.d,
        "theta_star": averaged.theta_star,
        "lambda": averaged.constants.lambda,
        "lipschitz": averaged.constants.lipschitz,
        "delta": averaged.constants.delta,
        "c": averaged.constants.c,
        "mode_count": averaged.f_omega.mode_count(),
    });
    json_to_py(py, &payload)
}

/// Integrate one orbit with the implicit midpoint scheme; returns time,
/// angle, action, and energy series.
#[pyfunction]
#[pyo3(signature = (system, theta0, i0, t, step = None, stride = None))]
#[allow(clippy::too_many_arguments)]
fn integrate_orbit(
    py: Python<'_>,
    system: &PySystem,
    theta0: Vec<f64>,
    i0: Vec<f64>,
    t: f64,
    step: Option<f64>,
    stride: Option<f64>,
) -> PyResult<Py<PyAny>> {
    let h = step.unwrap_or_else(|| default_step(system.inner.epsilon(), 0.0));
    let dt_out = stride.unwrap_or(t / 1000.0);
    let state = PhaseState::new(Angles::new(theta0), Actions::new(i0), 0.0);
    let traj = integrate(&system.inner, &state, t, h, dt_out).map_err(to_py_err)?;
    let payload = serde_json::json!({
        "t": traj.samples.iter().map(|s| s.t).collect::<Vec<_>>(),
        "theta": traj.samples.iter().map(|s| s.theta.clone()).collect::<Vec<_>>(),
        "actions": traj.samples.iter().map(|s| s.actions.clone()).collect::<Vec<_>>(),
        "energy": traj.energies,
        "energy_rel_drift": traj.energy_rel_drift,
        "step": traj.step,
        "method": traj.method,
    });
    json_to_py(py, &payload)
}

/// One micro-drift experiment; returns the full report as a dict.
#[pyfunction]
#[pyo3(signature = (system, resonance, eps, kappa = 1.0, mu0 = 0.1, phase_sweep = 1, q_max = None))]
#[allow(clippy::too_many_arguments)]
fn drift_run(
    py: Python<'_>,
    system: &PySystem,
    resonance: &PyResonance,
    eps: f64,
    kappa: f64,
    mu0: f64,
    phase_sweep: u32,
    q_max: Option<u32>,
) -> PyResult<Py<PyAny>> {
    let q_max = match q_max {
        Some(q) => q,
        None => auto_qmax(&resonance.inner.omega_tilde, kappa, eps).map_err(to_py_err)?,
    };
    let lab = AdaptedLab::new(&system.inner, &resonance.inner, kappa, q_max).map_err(to_py_err)?;
    let config = DriftConfig { eps, kappa, mu0, phase_sweep, ..DriftConfig::new(eps) };
    let report = micro_drift_run(&lab, &config).map_err(to_py_err)?;
    report_to_py(py, &report)
}

/// Drift sweep with scaling fits; `eps_list` needs 5 points or 4 decades.
#[pyfunction]
#[pyo3(signature = (system, resonance, eps_list, kappa = 1.0, mu0 = 0.1, phase_sweep = 1, q_max = None))]
#[allow(clippy::too_many_arguments)]
fn sweep(
    py: Python<'_>,
    system: &PySystem,
    resonance: &PyResonance,
    eps_list: Vec<f64>,
    kappa: f64,
    mu0: f64,
    phase_sweep: u32,
    q_max: Option<u32>,
) -> PyResult<Py<PyAny>> {
    let eps_min = eps_list.iter().copied().fold(f64::MAX, f64::min);
    let q_max = match q_max {
        Some(q) => q,
        None => auto_qmax(&resonance.inner.omega_tilde, kappa, eps_min).map_err(to_py_err)?,
    };
    let lab = AdaptedLab::new(&system.inner, &resonance.inner, kappa, q_max).map_err(to_py_err)?;
    let base = DriftConfig { kappa, mu0, phase_sweep, ..DriftConfig::new(eps_min) };
    let result = epsilon_sweep(&lab, &base, &eps_list).map_err(to_py_err)?;
    report_to_py(py, &result)
}

/// Normal-form remainder sweep against the `mu`-scaled bounds.
#[pyfunction]
#[pyo3(signature = (system, resonance, eps_list, samples = 500, kappa = 1.0, q_max = None, seed = 0))]
#[allow(clippy::too_many_arguments)]
fn normal_form_check(
    py: Python<'_>,
    system: &PySystem,
    resonance: &PyResonance,
    eps_list: Vec<f64>,
    samples: usize,
    kappa: f64,
    q_max: Option<u32>,
    seed: u64,
) -> PyResult<Py<PyAny>> {
    let adapted = adapt_system(&system.inner, &resonance.inner).map_err(to_py_err)?;
    let eps_min = eps_list.iter().copied().fold(f64::MAX, f64::min);
    let q_max = match q_max {
        Some(q) => q,
        None => auto_qmax(&adapted.omega_tilde, kappa, eps_min).map_err(to_py_err)?,
    };
    let profile =
        SmallDivisorProfile::build(&adapted.omega_tilde, q_max, kappa).map_err(to_py_err)?;
    let mut omega = vec![0.0; adapted.d];
    omega.extend_from_slice(&adapted.omega_tilde);
    let table = verify_lemma_estimates(
        &adapted.system,
        &omega,
        adapted.d,
        &profile,
        &eps_list,
        samples,
        seed,
    )
    .map_err(to_py_err)?;
    report_to_py(py, &table)
}

#[pyfunction]
fn version() -> &'static str {
    env!("CARGO_PKG_VERSION")
}

#[pymodule]
fn microdrift_py(m: &Bound<'_, PyModule>) -> PyResult<()> {
    m.add_class::<PySystem>()?;
    m.add_class::<PyResonance>()?;
    m.add_function(wrap_pyfunction!(psi_table, m)?)?;
    m.add_function(wrap_pyfunction!(delta, m)?)?;
    m.add_function(wrap_pyfunction!(mu, m)?)?;
    m.add_function(wrap_pyfunction!(average, m)?)?;
    m.add_function(wrap_pyfunction!(integrate_orbit, m)?)?;
    m.add_function(wrap_pyfunction!(drift_run, m)?)?;
    m.add_function(wrap_pyfunction!(sweep, m)?)?;
    m.add_function(wrap_pyfunction!(normal_form_check, m)?)?;
    m.add_function(wrap_pyfunction!(version, m)?)?;
    Ok(())
}
