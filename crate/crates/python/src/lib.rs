//! Python bindings for the `bdsampler` crate.

use std::collections::BTreeMap;
use std::path::PathBuf;
use std::sync::Arc;

use pyo3::exceptions::{PyIOError, PyRuntimeError, PyValueError};
use pyo3::prelude::*;

use bdsampler::kernels::KernelSpec;
use bdsampler::meanfield::{self, MeanFieldState, Scheme};
use bdsampler::metrics::{self, GridDensity, Topology};
use bdsampler::particles::{self, Algorithm, ParticleEnsemble, SamplerRng, SamplerSpec};
use bdsampler::runner::{self, ExperimentConfig, Preset};
use bdsampler::targets::{self, TorusPotential};
use bdsampler::Error;

fn to_py(e: Error) -> PyErr {
    match e {
        Error::Io { .. } => PyIOError::new_err(e.to_string()),
        Error::SolverAbort(_) => PyRuntimeError::new_err(e.to_string()),
        _ => PyValueError::new_err(e.to_string()),
    }
}

fn parse_name<T: serde::de::DeserializeOwned>(what: &str, name: &str) -> PyResult<T> {
    serde_json::from_value(serde_json::Value::String(name.to_string()))
        .map_err(|_| PyValueError::new_err(format!("unknown {what} {name:?}")))
}

fn ensemble(positions: Vec<Vec<f64>>) -> PyResult<ParticleEnsemble> {
    ParticleEnsemble::from_rows(&positions).map_err(to_py)
}

fn density(values: Vec<f64>, period: f64) -> PyResult<GridDensity> {
    GridDensity::normalized(values, period).map_err(to_py)
}

/// Gibbs measure `exp(-V)` on a uniform periodic grid over `[0, 2π)`.
#[pyclass(module = "bdsampler_py", frozen)]
struct TorusTarget {
    inner: Arc<targets::TorusTarget>,
}

#[pymethods]
impl TorusTarget {
    /// `V(x) = Σ_k a_k sin(k x) + b_k cos(k x)`; defaults to `sin x + 2 sin 2x`.
    #[new]
    #[pyo3(signature = (n_grid, sin_coefficients = None, cos_coefficients = None))]
    fn new(n_grid: usize, sin_coefficients: Option<Vec<f64>>, cos_coefficients: Option<Vec<f64>>) -> PyResult<Self> {
        let potential = match (sin_coefficients, cos_coefficients) {
            (None, None) => TorusPotential::bimodal(),
            (s, c) => TorusPotential {
                sin: s.unwrap_or_default(),
                cos: c.unwrap_or_default(),
            },
        };
        let inner = targets::TorusTarget::new(potential, n_grid).map_err(to_py)?;
        Ok(Self { inner: Arc::new(inner) })
    }

    #[getter]
    fn n_grid(&self) -> usize {
        self.inner.len()
    }

    #[getter]
    fn nodes(&self) -> Vec<f64> {
        self.inner.density().nodes()
    }

    /// Normalized density values at the grid nodes.
    #[getter]
    fn density(&self) -> Vec<f64> {
        self.inner.density().values().to_vec()
    }

    fn bd_exact(&self, rho0: Vec<f64>, t: f64) -> PyResult<Vec<f64>> {
        let rho0 = density(rho0, self.inner.period())?;
        Ok(meanfield::bd_exact(&rho0, &self.inner, t).map_err(to_py)?.into_values())
    }

    fn kl(&self, rho: Vec<f64>) -> PyResult<f64> {
        metrics::kl_grid(&density(rho, self.inner.period())?, self.inner.density()).map_err(to_py)
    }

    fn chi2(&self, rho: Vec<f64>) -> PyResult<f64> {
        metrics::chi2_grid(&density(rho, self.inner.period())?, self.inner.density()).map_err(to_py)
    }
}

/// Grid density evolving under one of the mean-field schemes.
#[pyclass(module = "bdsampler_py")]
struct MeanField {
    state: MeanFieldState,
    scheme: Scheme,
}

#[pymethods]
impl MeanField {
    /// `scheme` is one of `bd`, `bd2`, `bde`, `bdls`, `fokker_planck`; `rho0` defaults to uniform.
    #[new]
    #[pyo3(signature = (target, scheme, epsilon = None, rho0 = None))]
    fn new(target: &TorusTarget, scheme: &str, epsilon: Option<f64>, rho0: Option<Vec<f64>>) -> PyResult<Self> {
        let scheme: Scheme = parse_name("scheme", scheme)?;
        let t = target.inner.clone();
        let rho0 = match rho0 {
            Some(v) => density(v, t.period())?,
            None => GridDensity::uniform(t.len(), t.period()).map_err(to_py)?,
        };
        let kernel = epsilon.map(|e| KernelSpec::new(e, 1)).transpose().map_err(to_py)?;
        let state = MeanFieldState::new(rho0, t, kernel).map_err(to_py)?;
        Ok(Self { state, scheme })
    }

    #[pyo3(signature = (dt, steps = 1))]
    fn step(&mut self, dt: f64, steps: usize) -> PyResult<()> {
        for _ in 0..steps {
            self.state.step(self.scheme, dt).map_err(to_py)?;
        }
        Ok(())
    }

    #[getter]
    fn t(&self) -> f64 {
        self.state.t()
    }

    #[getter]
    fn rho(&self) -> Vec<f64> {
        self.state.rho_values().to_vec()
    }

    fn kl(&self) -> PyResult<f64> {
        metrics::kl_grid(&self.state.rho(), self.state.target().density()).map_err(to_py)
    }

    fn chi2(&self) -> PyResult<f64> {
        metrics::chi2_grid(&self.state.rho(), self.state.target().density()).map_err(to_py)
    }

    /// Regularized energy; needs a bandwidth.
    fn energy_feps(&self) -> PyResult<f64> {
        self.state.energy_feps().map_err(to_py)
    }
}

/// Gaussian mixture target with row-major covariance matrices.
#[pyclass(module = "bdsampler_py", frozen, skip_from_py_object)]
#[derive(Clone)]
struct GaussianMixture {
    inner: targets::GaussianMixture,
}

#[pymethods]
impl GaussianMixture {
    #[new]
    fn new(weights: Vec<f64>, means: Vec<Vec<f64>>, covariances: Vec<Vec<f64>>) -> PyResult<Self> {
        let inner = targets::GaussianMixture::new(weights, means, covariances).map_err(to_py)?;
        Ok(Self { inner })
    }

    /// The four-mode planar target of the mixture experiment.
    #[staticmethod]
    fn four_mode() -> Self {
        Self {
            inner: targets::GaussianMixture::four_mode_example(),
        }
    }

    /// Initial distribution of the mixture experiment.
    #[staticmethod]
    fn four_mode_initial() -> Self {
        Self {
            inner: targets::GaussianMixture::four_mode_initial(),
        }
    }

    #[getter]
    fn dim(&self) -> usize {
        self.inner.dim()
    }

    /// Normalized log density.
    fn log_density(&self, x: Vec<f64>) -> PyResult<f64> {
        targets::log_density_normalized(&self.inner, &x).map_err(to_py)
    }

    fn grad_log_density(&self, x: Vec<f64>) -> PyResult<Vec<f64>> {
        targets::grad_log_density(&self.inner, &x).map_err(to_py)
    }

    fn sample(&self, n: usize, seed: u64) -> PyResult<Vec<Vec<f64>>> {
        Ok(self.inner.sample_seeded(n, seed).map_err(to_py)?.rows())
    }

    /// `E[Σ_k c_k X_k²]`.
    fn quadratic_moment(&self, coefficients: Vec<f64>) -> PyResult<f64> {
        self.inner.quadratic_moment(&coefficients).map_err(to_py)
    }
}

#[pyfunction]
fn bd_rates_kl(positions: Vec<Vec<f64>>, target: &GaussianMixture, epsilon: f64) -> PyResult<Vec<f64>> {
    let e = ensemble(positions)?;
    let k = KernelSpec::new(epsilon, e.dim()).map_err(to_py)?;
    Ok(particles::bd_rates_kl(&e, &target.inner, &k).map_err(to_py)?.lambda)
}

#[pyfunction]
fn bd_rates_chi2(positions: Vec<Vec<f64>>, target: &GaussianMixture, epsilon: f64) -> PyResult<Vec<f64>> {
    let e = ensemble(positions)?;
    let k = KernelSpec::new(epsilon, e.dim()).map_err(to_py)?;
    Ok(particles::bd_rates_chi2(&e, &target.inner, &k, None).map_err(to_py)?.lambda)
}

#[pyfunction]
fn median_bandwidth_sq(positions: Vec<Vec<f64>>) -> PyResult<f64> {
    Ok(particles::median_bandwidth_sq(&ensemble(positions)?))
}

/// Runs `algorithm` from `positions`; returns the final positions and the diagnostics.
#[pyfunction]
#[pyo3(signature = (algorithm, positions, target, dt, t_final, epsilon = 0.2, seed = 0, stream = 0))]
#[allow(clippy::too_many_arguments)]
fn run_sampler(
    py: Python<'_>,
    algorithm: &str,
    positions: Vec<Vec<f64>>,
    target: &GaussianMixture,
    dt: f64,
    t_final: f64,
    epsilon: f64,
    seed: u64,
    stream: u64,
) -> PyResult<(Vec<Vec<f64>>, String)> {
    let spec = SamplerSpec {
        algorithm: parse_name::<Algorithm>("algorithm", algorithm)?,
        dt,
        t_final,
        epsilon,
        record_interval: t_final,
        log_normalizer: None,
    };
    let mut e = ensemble(positions)?;
    let pi = target.inner.clone();
    let diag = py
        .detach(|| {
            let mut rng = SamplerRng::new(seed, stream);
            particles::run_sampler(&spec, &pi, &mut e, &mut rng, |_, _| Ok(()))
        })
        .map_err(to_py)?;
    Ok((e.rows(), serde_json::to_string(&diag).expect("diagnostics serialize")))
}

/// Squared MMD between an equal-weight ensemble and a mixture, Gaussian kernel of bandwidth `epsilon`.
#[pyfunction]
fn mmd2_to_mixture(positions: Vec<Vec<f64>>, target: &GaussianMixture, epsilon: f64) -> PyResult<f64> {
    let e = ensemble(positions)?;
    let k = KernelSpec::new(epsilon, e.dim()).map_err(to_py)?;
    metrics::mmd2((&e).into(), (&target.inner).into(), &k).map_err(to_py)
}

#[pyfunction]
#[pyo3(signature = (rho0, rho1, period = std::f64::consts::TAU))]
fn hellinger(rho0: Vec<f64>, rho1: Vec<f64>, period: f64) -> PyResult<f64> {
    metrics::hellinger(&density(rho0, period)?, &density(rho1, period)?).map_err(to_py)
}

#[pyfunction]
#[pyo3(signature = (rho0, rho1, period = std::f64::consts::TAU))]
fn spherical_hellinger(rho0: Vec<f64>, rho1: Vec<f64>, period: f64) -> PyResult<f64> {
    metrics::spherical_hellinger(&density(rho0, period)?, &density(rho1, period)?).map_err(to_py)
}

#[pyfunction]
#[pyo3(signature = (rho0, rho1, period = std::f64::consts::TAU))]
fn w2_circle(rho0: Vec<f64>, rho1: Vec<f64>, period: f64) -> PyResult<f64> {
    metrics::w2_1d(&density(rho0, period)?, &density(rho1, period)?, Topology::Circle).map_err(to_py)
}

/// `[(name, anchor)]` for every preset.
#[pyfunction]
fn presets() -> Vec<(String, String)> {
    Preset::ALL
        .iter()
        .map(|p| (p.name().to_string(), p.anchor().to_string()))
        .collect()
}

/// Validated config with defaults filled in, as JSON.
#[pyfunction]
fn resolve_config(config_json: &str) -> PyResult<String> {
    Ok(ExperimentConfig::from_json(config_json).map_err(to_py)?.to_json())
}

/// Runs a JSON experiment config and writes its files to `out_dir` (or the config's
/// output directory). Returns the summary scalars.
#[pyfunction]
#[pyo3(signature = (config_json, out_dir = None))]
fn run_experiment(py: Python<'_>, config_json: &str, out_dir: Option<PathBuf>) -> PyResult<BTreeMap<String, f64>> {
    let config = ExperimentConfig::from_json(config_json).map_err(to_py)?;
    let dir = out_dir.unwrap_or_else(|| config.output_dir.clone());
    let rec = py
        .detach(|| {
            let rec = runner::run(&config)?;
            runner::emit(&rec, &dir)?;
            Ok::<_, Error>(rec)
        })
        .map_err(to_py)?;
    if let Some(e) = &rec.error {
        return Err(PyRuntimeError::new_err(e.clone()));
    }
    Ok(rec.summary)
}

#[pymodule]
fn bdsampler_py(m: &Bound<'_, PyModule>) -> PyResult<()> {
    m.add("__version__", runner::VERSION)?;
    m.add_class::<TorusTarget>()?;
    m.add_class::<MeanField>()?;
    m.add_class::<GaussianMixture>()?;
    m.add_function(wrap_pyfunction!(bd_rates_kl, m)?)?;
    m.add_function(wrap_pyfunction!(bd_rates_chi2, m)?)?;
    m.add_function(wrap_pyfunction!(median_bandwidth_sq, m)?)?;
    m.add_function(wrap_pyfunction!(run_sampler, m)?)?;
    m.add_function(wrap_pyfunction!(mmd2_to_mixture, m)?)?;
    m.add_function(wrap_pyfunction!(hellinger, m)?)?;
    m.add_function(wrap_pyfunction!(spherical_hellinger, m)?)?;
    m.add_function(wrap_pyfunction!(w2_circle, m)?)?;
    m.add_function(wrap_pyfunction!(presets, m)?)?;
    m.add_function(wrap_pyfunction!(resolve_config, m)?)?;
    m.add_function(wrap_pyfunction!(run_experiment, m)?)?;
    Ok(())
}
