//! Python bindings. Reports come back as plain dicts decoded from the same
//! JSON the command-line tool writes.

use std::path::PathBuf;

use classicality::commands::{execute, Command, RunOptions};
use classicality::config::parse_config;
use classicality::criteria::{self, ClassicalityOptions};
use classicality::evolution::{split_step_evolve, verify_consistency_over_time, EvolutionOptions};
use classicality::kets::spread_probability_guarantee_check;
use classicality::{classical, selftest, ClassicalData, GaussianPacket, GridAxis, GridState, System};
use pyo3::exceptions::{PyMemoryError, PyRuntimeError, PyValueError};
use pyo3::prelude::*;
use serde::Serialize;

fn to_py(e: classicality::Error) -> PyErr {
    use classicality::Error as E;
    match e {
        E::Resource(_) => PyMemoryError::new_err(e.to_string()),
        E::Io(_) | E::Csv(_) => PyRuntimeError::new_err(e.to_string()),
        _ => PyValueError::new_err(e.to_string()),
    }
}

fn to_dict<'py>(py: Python<'py>, value: &impl Serialize) -> PyResult<Bound<'py, PyAny>> {
    let text = serde_json::to_string(value).map_err(|e| PyRuntimeError::new_err(e.to_string()))?;
    py.import("json")?.call_method1("loads", (text,))
}

#[pyclass(name = "System", module = "pyclassicality")]
struct PySystem(System);

#[pymethods]
impl PySystem {
    #[staticmethod]
    #[pyo3(signature = (mass=1.0, omega=1.0))]
    fn harmonic_oscillator(mass: f64, omega: f64) -> PyResult<Self> {
        System::builtin("harmonic_oscillator", Some(mass), None, None, Some(omega)).map(Self).map_err(to_py)
    }

    #[staticmethod]
    #[pyo3(signature = (mass=1.0, heavy_mass=2.0, coupling=0.1))]
    fn coupled(mass: f64, heavy_mass: f64, coupling: f64) -> PyResult<Self> {
        System::builtin("coupled_qp2", Some(mass), Some(heavy_mass), Some(coupling), None).map(Self).map_err(to_py)
    }

    #[staticmethod]
    #[pyo3(signature = (mass=1.0))]
    fn free_particle(mass: f64) -> PyResult<Self> {
        System::builtin("free_particle", Some(mass), None, None, None).map(Self).map_err(to_py)
    }

    #[getter]
    fn id(&self) -> &'static str {
        self.0.id()
    }

    #[getter]
    fn variables(&self) -> Vec<String> {
        let space = self.0.phase_space();
        space.labels().to_vec()
    }

    /// Flow components as polynomials in the initial data.
    fn trajectory(&self, t: f64) -> PyResult<Vec<String>> {
        let traj = self.0.trajectory(t).map_err(to_py)?;
        Ok(traj.components.iter().map(|c| c.to_string()).collect())
    }

    fn flow(&self, values: Vec<f64>, t: f64) -> PyResult<Vec<f64>> {
        Ok(self.0.trajectory(t).map_err(to_py)?.eval(&values))
    }

    /// Propagated margins `δ_j(t)`.
    fn margins(&self, data: &PyClassicalData, t: f64) -> PyResult<Vec<f64>> {
        Ok(self.0.trajectory(t).map_err(to_py)?.margins(&data.0))
    }

    fn fundamental_sequences(&self, times: Vec<f64>) -> PyResult<Vec<String>> {
        let space = self.0.phase_space();
        let set = criteria::fundamental_sequences(&self.0, &times).map_err(to_py)?;
        Ok(set.iter().map(|s| s.label(&space)).collect())
    }

    #[pyo3(signature = (data, t, samples=10_000, seed=0))]
    fn margin_containment<'py>(&self, py: Python<'py>, data: &PyClassicalData, t: f64, samples: usize, seed: u64) -> PyResult<Bound<'py, PyAny>> {
        let r = classical::monte_carlo_margin_check(&self.0, &data.0, t, samples, seed).map_err(to_py)?;
        to_dict(py, &serde_json::json!({"samples": r.samples, "violations": r.violations, "worst_ratio": r.worst_ratio}))
    }

    fn __repr__(&self) -> String {
        format!("System({})", self.0)
    }
}

#[pyclass(name = "ClassicalData", module = "pyclassicality")]
struct PyClassicalData(ClassicalData);

#[pymethods]
impl PyClassicalData {
    #[new]
    fn new(values: Vec<f64>, margins: Vec<f64>) -> PyResult<Self> {
        ClassicalData::new(values, margins).map(Self).map_err(to_py)
    }

    #[getter]
    fn values(&self) -> Vec<f64> {
        self.0.values().to_vec()
    }

    #[getter]
    fn margins(&self) -> Vec<f64> {
        self.0.margins().to_vec()
    }
}

#[pyclass(name = "GridState", module = "pyclassicality")]
struct PyGridState(GridState);

#[pymethods]
impl PyGridState {
    #[staticmethod]
    #[pyo3(signature = (center_q, center_p, width, points, lower, upper, hbar=1.0))]
    fn gaussian(center_q: f64, center_p: f64, width: f64, points: usize, lower: f64, upper: f64, hbar: f64) -> PyResult<Self> {
        let axis = GridAxis::new(0, points, lower, upper).map_err(to_py)?;
        classicality::make_gaussian(center_q, center_p, width, axis, hbar).map(Self).map_err(to_py)
    }

    /// Tensor product; the i-th factor becomes degree of freedom i.
    #[staticmethod]
    fn product(factors: Vec<PyRef<'_, PyGridState>>) -> PyResult<Self> {
        let parts: Vec<GridState> = factors.iter().map(|f| f.0.clone()).collect();
        GridState::product(&parts).map(Self).map_err(to_py)
    }

    #[getter]
    fn shape(&self) -> Vec<usize> {
        self.0.shape()
    }

    fn norm(&self) -> f64 {
        self.0.norm_sq().sqrt()
    }

    fn mean(&self, variable: usize) -> PyResult<f64> {
        self.0.mean(variable).map_err(to_py)
    }

    fn variance(&self, variable: usize) -> PyResult<f64> {
        self.0.variance(variable).map_err(to_py)
    }

    fn moment(&self, variable: usize, center: f64, order: u32) -> PyResult<f64> {
        Ok(self.0.quadrature_moment(variable, center, order).map_err(to_py)?.value)
    }

    fn interval_probability(&self, variable: usize, lo: f64, hi: f64) -> PyResult<f64> {
        Ok(self.0.interval_probability(variable, lo, hi).map_err(to_py)?.value)
    }

    fn overlap(&self, other: &PyGridState) -> PyResult<f64> {
        Ok(self.0.inner(&other.0).map_err(to_py)?.norm_sqr())
    }

    fn evolve(&self, system: &PySystem, dt: f64, steps: usize) -> PyResult<Self> {
        split_step_evolve(&self.0, &system.0, dt, steps).map(Self).map_err(to_py)
    }

    /// `(spread, probability, holds)` for the n-th order spread about `center`.
    fn spread_guarantee(&self, variable: usize, center: f64, n: u32, p: f64) -> PyResult<(f64, f64, bool)> {
        let g = spread_probability_guarantee_check(&self.0, variable, center, n, p).map_err(to_py)?;
        Ok((g.spread, g.probability, g.holds))
    }
}

#[pyfunction]
#[pyo3(signature = (state, data, p0=0.0))]
fn consistency_first<'py>(py: Python<'py>, state: &PyGridState, data: &PyClassicalData, p0: f64) -> PyResult<Bound<'py, PyAny>> {
    to_dict(py, &criteria::consistency_first(&state.0, &data.0, p0).map_err(to_py)?)
}

#[pyfunction]
#[pyo3(signature = (state, data, order=1, p_samples=None))]
fn consistency_second<'py>(
    py: Python<'py>,
    state: &PyGridState,
    data: &PyClassicalData,
    order: u32,
    p_samples: Option<Vec<f64>>,
) -> PyResult<Bound<'py, PyAny>> {
    let ps = p_samples.unwrap_or_else(criteria::default_p_samples);
    to_dict(py, &criteria::consistency_second(&state.0, &data.0, order, &ps).map_err(to_py)?)
}

#[pyfunction]
fn classicality_first<'py>(
    py: Python<'py>,
    state: &PyGridState,
    data: &PyClassicalData,
    system: &PySystem,
    order: u32,
    times: Vec<f64>,
) -> PyResult<Bound<'py, PyAny>> {
    let r = criteria::classicality_first(&state.0, &data.0, &system.0, order, &times, &ClassicalityOptions::default());
    to_dict(py, &r.map_err(to_py)?)
}

#[pyfunction]
fn classicality_second<'py>(
    py: Python<'py>,
    state: &PyGridState,
    data: &PyClassicalData,
    system: &PySystem,
    p0: f64,
    times: Vec<f64>,
) -> PyResult<Bound<'py, PyAny>> {
    to_dict(py, &criteria::classicality_second(&state.0, &data.0, &system.0, p0, &times).map_err(to_py)?)
}

/// Closed-form first criterion; `packets` holds one `(center_q, center_p, width)` per degree of freedom.
#[pyfunction]
#[pyo3(signature = (packets, data, system, order, times, hbar=1.0))]
fn gaussian_classicality<'py>(
    py: Python<'py>,
    packets: Vec<(f64, f64, f64)>,
    data: &PyClassicalData,
    system: &PySystem,
    order: u32,
    times: Vec<f64>,
    hbar: f64,
) -> PyResult<Bound<'py, PyAny>> {
    let g: Vec<GaussianPacket> = packets
        .into_iter()
        .map(|(q, p, w)| GaussianPacket::new(q, p, w))
        .collect::<Result<_, _>>()
        .map_err(to_py)?;
    to_dict(py, &criteria::gaussian_fastpath(&g, &data.0, &system.0, order, &times, hbar).map_err(to_py)?)
}

#[pyfunction]
#[pyo3(signature = (state, data, system, times, p_list, order=1))]
fn evolve_consistency<'py>(
    py: Python<'py>,
    state: &PyGridState,
    data: &PyClassicalData,
    system: &PySystem,
    times: Vec<f64>,
    p_list: Vec<f64>,
    order: u32,
) -> PyResult<Bound<'py, PyAny>> {
    let options = EvolutionOptions::default();
    let rec = py
        .detach(|| verify_consistency_over_time(&state.0, &data.0, &system.0, &times, &p_list, order, &options))
        .map_err(to_py)?;
    to_dict(py, &rec)
}

/// Runs one command on a JSON config, as the command-line tool would.
#[pyfunction]
#[pyo3(signature = (command, config, out_dir=None, seed=None, workers=None))]
fn run<'py>(
    py: Python<'py>,
    command: &str,
    config: &str,
    out_dir: Option<PathBuf>,
    seed: Option<u64>,
    workers: Option<usize>,
) -> PyResult<Bound<'py, PyAny>> {
    let command = match command {
        "check" => Command::Check,
        "classicality" => Command::Classicality,
        "evolve" => Command::Evolve,
        "scan" => Command::Scan,
        "selftest" => Command::Selftest,
        other => return Err(PyValueError::new_err(format!("unknown command {other:?}"))),
    };
    let cfg = parse_config(config).map_err(to_py)?;
    let opts = RunOptions { out_dir, seed, workers, ..RunOptions::default() };
    let outcome = py.detach(|| execute(command, &cfg, &opts));
    let written: Vec<String> = outcome.written.iter().map(|p| p.display().to_string()).collect();
    to_dict(py, &serde_json::json!({"exit_code": outcome.exit_code, "summary": outcome.summary, "written": written}))
}

#[pyfunction]
#[pyo3(signature = (seed=0))]
fn run_selftest<'py>(py: Python<'py>, seed: u64) -> PyResult<Bound<'py, PyAny>> {
    to_dict(py, &selftest::run_selftest(seed).map_err(to_py)?)
}

#[pymodule]
fn pyclassicality(m: &Bound<'_, PyModule>) -> PyResult<()> {
    m.add_class::<PySystem>()?;
    m.add_class::<PyClassicalData>()?;
    m.add_class::<PyGridState>()?;
    m.add_function(wrap_pyfunction!(consistency_first, m)?)?;
    m.add_function(wrap_pyfunction!(consistency_second, m)?)?;
    m.add_function(wrap_pyfunction!(classicality_first, m)?)?;
    m.add_function(wrap_pyfunction!(classicality_second, m)?)?;
    m.add_function(wrap_pyfunction!(gaussian_classicality, m)?)?;
    m.add_function(wrap_pyfunction!(evolve_consistency, m)?)?;
    m.add_function(wrap_pyfunction!(run, m)?)?;
    m.add_function(wrap_pyfunction!(run_selftest, m)?)?;
    Ok(())
}
