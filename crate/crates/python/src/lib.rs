//! Python bindings: configs, runs, sweeps, the scheduler, clock and junta
//! primitives, and the acceptance suite.

use popsim::analysis;
use popsim::engine::{self, RunReport, SimConfig, Variant};
use popsim::junta::{self, JuntaState};
use popsim::phase_clock;
use popsim::verify;
use pyo3::exceptions::PyValueError;
use pyo3::prelude::*;

fn value_error(e: impl ToString) -> PyErr {
    PyValueError::new_err(e.to_string())
}

/// Simulation settings; mirrors the Rust `SimConfig`.
#[pyclass(name = "SimConfig", module = "popsim_py", from_py_object)]
#[derive(Clone)]
pub struct PySimConfig {
    inner: SimConfig,
}

#[pymethods]
impl PySimConfig {
    #[new]
    #[pyo3(signature = (variant, n, seed=0, m=16, k=2, level_cap=None, max_interactions=None,
                        snapshot_every=None, clock_passes=20, audit_states=false))]
    #[allow(clippy::too_many_arguments)]
    fn new(
        variant: &str,
        n: usize,
        seed: u64,
        m: u32,
        k: u32,
        level_cap: Option<u32>,
        max_interactions: Option<u64>,
        snapshot_every: Option<u64>,
        clock_passes: u32,
        audit_states: bool,
    ) -> PyResult<Self> {
        let inner = SimConfig {
            n,
            m,
            k,
            level_cap,
            variant: variant.parse::<Variant>().map_err(value_error)?,
            seed,
            max_interactions,
            snapshot_every,
            clock_passes,
            audit_states,
        };
        inner.validate().map_err(value_error)?;
        Ok(PySimConfig { inner })
    }

    #[getter]
    fn variant(&self) -> &'static str {
        self.inner.variant.as_str()
    }
    #[getter]
    fn n(&self) -> usize {
        self.inner.n
    }
    #[getter]
    fn seed(&self) -> u64 {
        self.inner.seed
    }
    #[getter]
    fn m(&self) -> u32 {
        self.inner.m
    }
    #[getter]
    fn k(&self) -> u32 {
        self.inner.k
    }
    #[getter]
    fn epsilon(&self) -> f64 {
        self.inner.epsilon()
    }
    #[getter]
    fn level_cap(&self) -> u32 {
        self.inner.effective_level_cap()
    }
    #[getter]
    fn max_interactions(&self) -> u64 {
        self.inner.effective_max_interactions()
    }

    /// Copy with a different seed.
    fn with_seed(&self, seed: u64) -> Self {
        PySimConfig { inner: SimConfig { seed, ..self.inner.clone() } }
    }

    fn __repr__(&self) -> String {
        format!("SimConfig(variant='{}', n={}, seed={}, m={})", self.inner.variant, self.inner.n, self.inner.seed, self.inner.m)
    }
}

/// Outcome of one run.
#[pyclass(name = "RunReport", module = "popsim_py", frozen)]
pub struct PyRunReport {
    inner: RunReport,
}

#[pymethods]
impl PyRunReport {
    #[getter]
    fn seed(&self) -> u64 {
        self.inner.seed
    }
    #[getter]
    fn n(&self) -> usize {
        self.inner.n
    }
    #[getter]
    fn variant(&self) -> &'static str {
        self.inner.variant.as_str()
    }
    #[getter]
    fn interactions_total(&self) -> u64 {
        self.inner.interactions_total
    }
    #[getter]
    fn parallel_time(&self) -> f64 {
        self.inner.parallel_time
    }
    #[getter]
    fn stabilized(&self) -> bool {
        self.inner.stabilized
    }
    #[getter]
    fn leader_count_final(&self) -> usize {
        self.inner.leader_count_final
    }
    #[getter]
    fn junta_size(&self) -> Option<usize> {
        self.inner.junta_size
    }
    #[getter]
    fn max_level(&self) -> Option<u32> {
        self.inner.max_level
    }
    #[getter]
    fn epidemic_completion(&self) -> Option<u64> {
        self.inner.epidemic_completion
    }
    #[getter]
    fn distinct_states_observed(&self) -> Option<u64> {
        self.inner.distinct_states_observed
    }
    #[getter]
    fn leader_trajectory(&self) -> Vec<(u64, usize)> {
        self.inner.leader_trajectory.clone()
    }
    #[getter]
    fn violations(&self) -> Vec<String> {
        self.inner.violations.clone()
    }

    fn to_json(&self) -> String {
        self.inner.to_json()
    }

    fn csv_row(&self) -> String {
        self.inner.csv_row()
    }

    #[staticmethod]
    fn csv_header() -> String {
        RunReport::csv_header()
    }

    fn __repr__(&self) -> String {
        format!(
            "RunReport(variant='{}', n={}, interactions={}, stabilized={}, leaders={})",
            self.inner.variant, self.inner.n, self.inner.interactions_total, self.inner.stabilized, self.inner.leader_count_final
        )
    }
}

/// The seeded uniform pair scheduler.
#[pyclass(name = "Scheduler", module = "popsim_py")]
pub struct PyScheduler {
    inner: engine::Scheduler,
}

#[pymethods]
impl PyScheduler {
    #[new]
    fn new(n: usize, seed: u64) -> PyResult<Self> {
        if n < 2 {
            return Err(PyValueError::new_err("scheduler needs at least two agents"));
        }
        Ok(PyScheduler { inner: engine::Scheduler::new(n, seed) })
    }

    /// Next `(responder, initiator)` pair.
    fn draw(&mut self) -> (usize, usize) {
        let it = self.inner.draw();
        (it.responder, it.initiator)
    }
}

/// Run one simulation to stabilization or the interaction cap.
#[pyfunction]
fn run(py: Python<'_>, config: &PySimConfig) -> PyResult<PyRunReport> {
    let c = config.inner.clone();
    let inner = py.detach(move || engine::run(&c)).map_err(value_error)?;
    Ok(PyRunReport { inner })
}

/// Trials `0..trials` seeded from `config.seed`, in trial order.
#[pyfunction]
#[pyo3(signature = (config, trials, threads=None))]
fn sweep(py: Python<'_>, config: &PySimConfig, trials: usize, threads: Option<usize>) -> Vec<PyRunReport> {
    let c = config.inner.clone();
    let threads = threads.unwrap_or_else(verify::threads_from_env);
    py.detach(move || verify::run_trials(&verify::block_configs(&c, c.seed, 0, trials), threads))
        .into_iter()
        .map(|inner| PyRunReport { inner })
        .collect()
}

/// Seed of trial `i` in a sweep with base seed `base`.
#[pyfunction]
fn trial_seed(base: u64, i: u64) -> u64 {
    engine::trial_seed(base, i)
}

fn check_phases(m: u32, phases: &[u8]) -> PyResult<()> {
    if !(2..=255).contains(&m) || phases.iter().any(|&p| p as u32 >= m) {
        return Err(PyValueError::new_err("phases must lie in [0, m) with 2 <= m <= 255"));
    }
    Ok(())
}

/// `max_m{x, y}`.
#[pyfunction]
fn max_mod(x: u8, y: u8, m: u32) -> PyResult<u8> {
    check_phases(m, &[x, y])?;
    Ok(phase_clock::max_mod(x, y, m))
}

/// Width of the smallest arc covering `phases`.
#[pyfunction]
fn clock_window(phases: Vec<u8>, m: u32) -> PyResult<u32> {
    check_phases(m, &phases)?;
    if phases.is_empty() {
        return Err(PyValueError::new_err("phases must not be empty"));
    }
    Ok(analysis::clock_window(&phases, m))
}

/// One Forming_junta transition on `(level, active)` pairs.
#[pyfunction]
#[pyo3(signature = (responder, initiator, cap=None))]
fn junta_step(responder: (u8, bool), initiator: (u8, bool), cap: Option<u8>) -> ((u8, bool), (u8, bool)) {
    let (r, i) = junta::junta_step_capped(
        JuntaState::new(responder.0, responder.1),
        JuntaState::new(initiator.0, initiator.1),
        cap,
    );
    ((r.level, r.active), (i.level, i.active))
}

/// Expected completion time of the one-way epidemic.
#[pyfunction]
fn epidemic_expected(n: usize) -> f64 {
    popsim::epidemic::expected_completion(n)
}

/// Run acceptance criteria; returns `(id, name, passed, detail)` tuples.
#[pyfunction]
#[pyo3(signature = (suite="all", threads=None))]
fn run_verify(py: Python<'_>, suite: &str, threads: Option<usize>) -> PyResult<Vec<(u8, String, bool, String)>> {
    let ids = verify::suite_ids(suite).ok_or_else(|| PyValueError::new_err(format!("unknown suite `{suite}`")))?;
    let threads = threads.unwrap_or_else(verify::threads_from_env);
    Ok(py.detach(move || {
        let mut v = verify::Verifier::new(threads);
        v.run_all(&ids)
            .into_iter()
            .map(|r| (r.id, r.name.to_string(), r.passed, r.detail))
            .collect()
    }))
}

#[pymodule]
fn popsim_py(m: &Bound<'_, PyModule>) -> PyResult<()> {
    m.add_class::<PySimConfig>()?;
    m.add_class::<PyRunReport>()?;
    m.add_class::<PyScheduler>()?;
    m.add_function(wrap_pyfunction!(run, m)?)?;
    m.add_function(wrap_pyfunction!(sweep, m)?)?;
    m.add_function(wrap_pyfunction!(trial_seed, m)?)?;
    m.add_function(wrap_pyfunction!(max_mod, m)?)?;
    m.add_function(wrap_pyfunction!(clock_window, m)?)?;
    m.add_function(wrap_pyfunction!(junta_step, m)?)?;
    m.add_function(wrap_pyfunction!(epidemic_expected, m)?)?;
    m.add_function(wrap_pyfunction!(run_verify, m)?)?;
    m.add("VARIANTS", Variant::ALL.map(Variant::as_str).to_vec())?;
    m.add("SCHEDULER_ALGORITHM", engine::Scheduler::ALGORITHM)?;
    Ok(())
}
