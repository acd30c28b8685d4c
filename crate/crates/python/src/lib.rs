//! Python bindings. Arrays cross the boundary as flat lists of floats in
//! the same layout as the Rust types (particle-major, grid axis 0 fastest).

use pyo3::exceptions::{PyRuntimeError, PyValueError};
use pyo3::prelude::*;
use pyo3::types::PyDict;

use vpme_core::diagnostics;
use vpme_core::dynamics::SimState;
use vpme_core::experiments::ExperimentConfig;
use vpme_core::grid::{self, ScalarField, TorusGrid};
use vpme_core::particles::ParticleEnsemble;
use vpme_core::poisson::{self, SolverSettings};
use vpme_core::sampling::{self, Scenario};
use vpme_core::transport::{self, DiscreteMeasure};
use vpme_core::VpmeError;

fn to_py(e: VpmeError) -> PyErr {
    if e.is_input_error() {
        PyValueError::new_err(e.to_string())
    } else {
        PyRuntimeError::new_err(e.to_string())
    }
}

fn field(dim: usize, n: usize, values: Vec<f64>) -> PyResult<ScalarField> {
    let g = TorusGrid::new(dim, n).map_err(to_py)?;
    ScalarField::new(&g, values).map_err(to_py)
}

#[pyclass(name = "Ensemble", module = "vpme")]
struct PyEnsemble {
    inner: ParticleEnsemble,
}

#[pymethods]
impl PyEnsemble {
    #[new]
    #[pyo3(signature = (dim, positions, velocities, weights=None))]
    fn new(dim: usize, positions: Vec<f64>, velocities: Vec<f64>, weights: Option<Vec<f64>>) -> PyResult<Self> {
        let inner = match weights {
            Some(w) => ParticleEnsemble::new(dim, positions, velocities, w),
            None => ParticleEnsemble::with_uniform_weights(dim, positions, velocities),
        }
        .map_err(to_py)?;
        Ok(Self { inner })
    }

    #[getter]
    fn dim(&self) -> usize {
        self.inner.dim()
    }

    #[getter]
    fn positions(&self) -> Vec<f64> {
        self.inner.positions().to_vec()
    }

    #[getter]
    fn velocities(&self) -> Vec<f64> {
        self.inner.velocities().to_vec()
    }

    #[getter]
    fn weights(&self) -> Vec<f64> {
        self.inner.weights().to_vec()
    }

    fn total_momentum(&self) -> Vec<f64> {
        self.inner.total_momentum()
    }

    fn moment(&self, m: f64) -> f64 {
        diagnostics::moment(&self.inner, m)
    }

    fn __len__(&self) -> usize {
        self.inner.len()
    }

    fn __repr__(&self) -> String {
        format!("Ensemble(dim={}, n={})", self.inner.dim(), self.inner.len())
    }
}

/// Solution of the nonlinear field equation on a grid.
#[pyclass(name = "FieldSolution", module = "vpme", get_all)]
struct PyFieldSolution {
    u_bar: Vec<f64>,
    u_hat: Vec<f64>,
    potential: Vec<f64>,
    /// One list per component.
    field: Vec<Vec<f64>>,
    residual: f64,
    iters: usize,
    electron_mass: f64,
}

#[pyfunction]
#[pyo3(signature = (rho, dim, n, newton_tol=1e-10, max_iters=50))]
fn vpme_field(rho: Vec<f64>, dim: usize, n: usize, newton_tol: f64, max_iters: usize) -> PyResult<PyFieldSolution> {
    let rho = field(dim, n, rho)?;
    let settings = SolverSettings {
        newton_tol,
        max_iters,
        ..SolverSettings::default()
    };
    let split = poisson::vpme_field(&rho, &settings).map_err(to_py)?;
    Ok(PyFieldSolution {
        u_bar: split.u_bar.values().to_vec(),
        u_hat: split.u_hat.values().to_vec(),
        potential: split.potential().into_values(),
        field: split
            .field()
            .components()
            .iter()
            .map(|c| c.values().to_vec())
            .collect(),
        residual: split.newton_residual,
        iters: split.newton_iters,
        electron_mass: split.electron_mass(),
    })
}

#[pyfunction]
fn laplacian(values: Vec<f64>, dim: usize, n: usize) -> PyResult<Vec<f64>> {
    Ok(grid::laplacian(&field(dim, n, values)?).map_err(to_py)?.into_values())
}

#[pyfunction]
fn mollify(values: Vec<f64>, dim: usize, n: usize, r: f64) -> PyResult<Vec<f64>> {
    Ok(grid::convolve_mollifier(&field(dim, n, values)?, r)
        .map_err(to_py)?
        .into_values())
}

#[pyfunction]
#[pyo3(signature = (scenario, dim=1, n_grid=64, n_particles=100_000, seed=0))]
fn sample_initial(scenario: &str, dim: usize, n_grid: usize, n_particles: usize, seed: u64) -> PyResult<PyEnsemble> {
    let sc = Scenario::from_name(scenario).map_err(to_py)?;
    let g = TorusGrid::new(dim, n_grid).map_err(to_py)?;
    let inner = sampling::sample_initial(&sc, &g, n_particles, seed).map_err(to_py)?;
    Ok(PyEnsemble { inner })
}

/// Exact W2 between two equal-size point clouds with uniform weights; the
/// first `periodic_dims` coordinates live on the unit torus.
#[pyfunction]
#[pyo3(signature = (a, b, dims, periodic_dims=0))]
fn w2_exact(a: Vec<f64>, b: Vec<f64>, dims: usize, periodic_dims: usize) -> PyResult<f64> {
    let mu = DiscreteMeasure::uniform(periodic_dims, dims, a).map_err(to_py)?;
    let nu = DiscreteMeasure::uniform(periodic_dims, dims, b).map_err(to_py)?;
    transport::w2_exact(&mu, &nu).map_err(to_py)
}

#[pyfunction]
fn w2_1d(a: Vec<f64>, b: Vec<f64>) -> PyResult<f64> {
    let mu = DiscreteMeasure::on_line(&a).map_err(to_py)?;
    let nu = DiscreteMeasure::on_line(&b).map_err(to_py)?;
    transport::w2_1d(&mu, &nu).map_err(to_py)
}

/// Returns `(w2, floor, exact)`.
#[pyfunction]
#[pyo3(signature = (a, b, cap=transport::EXACT_CAP))]
fn ensemble_w2(a: &PyEnsemble, b: &PyEnsemble, cap: usize) -> PyResult<(f64, f64, bool)> {
    let est = transport::ensemble_w2(&a.inner, &b.inner, cap).map_err(to_py)?;
    Ok((est.w2, est.floor, est.exact))
}

#[pyfunction]
fn interpolation_constant(dim: usize) -> PyResult<f64> {
    if !(1..=3).contains(&dim) {
        return Err(PyValueError::new_err(format!("dimension {dim} not in 1..=3")));
    }
    Ok(diagnostics::interpolation_constant(dim))
}

/// Particle simulation built from configuration keys, e.g.
/// `Simulation(n_particles=1000, scenario="two_stream")`.
#[pyclass(name = "Simulation", module = "vpme")]
struct PySimulation {
    state: SimState,
    moment_order: f64,
}

#[pymethods]
impl PySimulation {
    #[new]
    #[pyo3(signature = (config="", **overrides))]
    fn new(config: &str, overrides: Option<&Bound<'_, PyDict>>) -> PyResult<Self> {
        let mut text = config.to_string();
        if let Some(kw) = overrides {
            for (k, v) in kw.iter() {
                text.push_str(&format!("\n{} = {}", k.str()?, v.str()?));
            }
        }
        let cfg = ExperimentConfig::parse(&text).map_err(to_py)?;
        let ens = cfg.initial_ensemble().map_err(to_py)?;
        let state = cfg.initial_state(ens).map_err(to_py)?;
        Ok(Self {
            state,
            moment_order: cfg.moment_order,
        })
    }

    #[getter]
    fn time(&self) -> f64 {
        self.state.time()
    }

    fn suggest_dt(&self) -> PyResult<f64> {
        self.state.suggest_dt().map_err(to_py)
    }

    /// Advances `steps` leapfrog steps of size `dt`.
    #[pyo3(signature = (dt, steps=1))]
    fn step(&mut self, py: Python<'_>, dt: f64, steps: usize) -> PyResult<()> {
        let state = &mut self.state;
        py.detach(|| {
            for _ in 0..steps {
                state.step(dt)?;
            }
            Ok(())
        })
        .map_err(to_py)
    }

    /// `(kinetic, field, thermal, total)`.
    fn energy(&self) -> PyResult<(f64, f64, f64, f64)> {
        let e = diagnostics::energy(&self.state).map_err(to_py)?;
        Ok((e.kinetic, e.field_energy, e.thermal, e.total))
    }

    fn diagnostics<'py>(&self, py: Python<'py>) -> PyResult<Bound<'py, PyDict>> {
        let r = diagnostics::record(&self.state, self.moment_order).map_err(to_py)?;
        let d = PyDict::new(py);
        for (name, value) in diagnostics::CSV_HEADER.iter().zip([
            r.time,
            r.kinetic,
            r.field_energy,
            r.thermal,
            r.total,
            r.m2,
            r.m4,
            r.m_cfg,
            r.rho_linf,
            r.rho_lp,
            r.support_v,
            r.hat_tail,
        ]) {
            d.set_item(*name, value)?;
        }
        Ok(d)
    }

    fn ensemble(&self) -> PyEnsemble {
        PyEnsemble {
            inner: self.state.ensemble().clone(),
        }
    }

    fn rho(&self) -> Vec<f64> {
        self.state.rho().values().to_vec()
    }
}

#[pymodule]
fn vpme(m: &Bound<'_, PyModule>) -> PyResult<()> {
    m.add_class::<PyEnsemble>()?;
    m.add_class::<PyFieldSolution>()?;
    m.add_class::<PySimulation>()?;
    m.add_function(wrap_pyfunction!(vpme_field, m)?)?;
    m.add_function(wrap_pyfunction!(laplacian, m)?)?;
    m.add_function(wrap_pyfunction!(mollify, m)?)?;
    m.add_function(wrap_pyfunction!(sample_initial, m)?)?;
    m.add_function(wrap_pyfunction!(w2_exact, m)?)?;
    m.add_function(wrap_pyfunction!(w2_1d, m)?)?;
    m.add_function(wrap_pyfunction!(ensemble_w2, m)?)?;
    m.add_function(wrap_pyfunction!(interpolation_constant, m)?)?;
    m.add("SCENARIOS", sampling::SCENARIO_NAMES.to_vec())?;
    Ok(())
}
