use memsim::harness::config::{parse_config, ExperimentConfig};
use memsim::harness::metrics::format_milli;
use memsim::harness::run::{run_experiment, write_outputs};
use memsim::harness::validate::validate_all;
use memsim::memory::decay_weight;
use memsim::world::orders::{gn, GeneratorParams};
use memsim::World;
use pyo3::exceptions::{PyRuntimeError, PyValueError};
use pyo3::prelude::*;
use std::path::PathBuf;

#[pyclass(name = "Config", from_py_object)]
#[derive(Clone)]
struct PyConfig {
    inner: ExperimentConfig,
}

#[pymethods]
impl PyConfig {
    /// Parses TOML; missing keys take their defaults.
    #[new]
    #[pyo3(signature = (toml = ""))]
    fn new(toml: &str) -> PyResult<Self> {
        parse_config(toml).map(|inner| PyConfig { inner }).map_err(|e| PyValueError::new_err(e.to_string()))
    }

    #[staticmethod]
    fn desk() -> Self {
        PyConfig { inner: ExperimentConfig::desk() }
    }

    #[getter]
    fn seed(&self) -> u64 {
        self.inner.seed
    }

    #[setter]
    fn set_seed(&mut self, v: u64) {
        self.inner.seed = v;
    }

    #[getter]
    fn n_agents(&self) -> u32 {
        self.inner.n_agents
    }

    #[setter]
    fn set_n_agents(&mut self, v: u32) {
        self.inner.n_agents = v;
    }

    #[getter]
    fn steps(&self) -> u64 {
        self.inner.steps
    }

    #[setter]
    fn set_steps(&mut self, v: u64) {
        self.inner.steps = v;
    }

    #[getter]
    fn learning(&self) -> &'static str {
        self.inner.learning.as_str()
    }

    #[setter]
    fn set_learning(&mut self, v: &str) -> PyResult<()> {
        self.inner.learning = memsim::model::LearningType::parse(v)
            .ok_or_else(|| PyValueError::new_err(format!("unknown learning type {v}")))?;
        Ok(())
    }

    #[getter]
    fn memory_model(&self) -> &'static str {
        self.inner.memory_model.as_str()
    }

    #[setter]
    fn set_memory_model(&mut self, v: &str) -> PyResult<()> {
        self.inner.memory_model = memsim::model::MemoryModel::parse(v)
            .ok_or_else(|| PyValueError::new_err(format!("unknown memory model {v}")))?;
        Ok(())
    }

    fn to_toml(&self) -> String {
        self.inner.to_toml()
    }
}

#[pyclass(name = "Simulation")]
struct PySimulation {
    world: World,
}

#[pymethods]
impl PySimulation {
    #[new]
    fn new(config: PyConfig) -> PyResult<Self> {
        config.inner.validate().map_err(|e| PyValueError::new_err(e.to_string()))?;
        Ok(PySimulation { world: World::new(config.inner) })
    }

    /// Advances up to `n` steps; returns the number taken.
    #[pyo3(signature = (n = 1))]
    fn step(&mut self, py: Python<'_>, n: u64) -> u64 {
        let world = &mut self.world;
        py.detach(|| {
            let mut taken = 0;
            while taken < n && !world.is_done() {
                world.step();
                taken += 1;
            }
            taken
        })
    }

    fn run(&mut self, py: Python<'_>) {
        let world = &mut self.world;
        py.detach(|| world.run_to_end());
    }

    #[getter]
    fn current_step(&self) -> u64 {
        self.world.step
    }

    #[getter]
    fn done(&self) -> bool {
        self.world.is_done()
    }

    fn earnings(&self) -> Vec<f64> {
        self.world.agents.iter().map(|a| a.state.dynamics.earning as f64 / 1000.0).collect()
    }

    fn locations(&self) -> Vec<(i32, i32)> {
        self.world.agents.iter().map(|a| (a.state.location().x, a.state.location().y)).collect()
    }

    fn orders_generated(&self) -> usize {
        self.world.orders.len()
    }

    fn collective_size(&self) -> usize {
        self.world.collective.items.len()
    }

    /// Agent-day rows as tuples in CSV column order.
    fn agent_rows(&self) -> Vec<(u64, u32, &'static str, &'static str, String, u32, u32, u32, u32)> {
        self.world
            .rows
            .iter()
            .map(|r| {
                (
                    r.day,
                    r.agent_id,
                    r.learning.as_str(),
                    r.memory_model.as_str(),
                    format_milli(r.profit_milli),
                    r.orders_completed,
                    r.effective_steps,
                    r.decisions_memory,
                    r.decisions_learning,
                )
            })
            .collect()
    }

    fn write(&self, out: PathBuf) -> PyResult<usize> {
        std::fs::create_dir_all(&out).map_err(|e| PyRuntimeError::new_err(e.to_string()))?;
        write_outputs(&self.world, &out).map(|r| r.agent_rows).map_err(|e| PyRuntimeError::new_err(e.to_string()))
    }
}

/// Runs one experiment to completion and writes its outputs.
#[pyfunction]
#[pyo3(name = "run_experiment")]
fn py_run_experiment(py: Python<'_>, config: PyConfig, out: PathBuf) -> PyResult<usize> {
    py.detach(|| run_experiment(&config.inner, &out, None))
        .map(|r| r.agent_rows)
        .map_err(|e| PyRuntimeError::new_err(e.to_string()))
}

#[pyfunction]
#[pyo3(name = "gn")]
fn py_gn(x: f64) -> f64 {
    gn(x, &GeneratorParams::default())
}

#[pyfunction]
#[pyo3(name = "decay_weight", signature = (now, t0, lam = 0.9, steps_per_day = 360))]
fn py_decay_weight(now: u64, t0: u64, lam: f64, steps_per_day: u32) -> f64 {
    decay_weight(now, t0, lam, steps_per_day)
}

#[pyfunction]
fn validate(py: Python<'_>) -> Vec<(String, bool, String)> {
    py.detach(validate_all).into_iter().map(|c| (c.name.to_string(), c.passed, c.detail)).collect()
}

#[pymodule]
fn pymemsim(m: &Bound<'_, PyModule>) -> PyResult<()> {
    m.add_class::<PyConfig>()?;
    m.add_class::<PySimulation>()?;
    m.add_function(wrap_pyfunction!(py_run_experiment, m)?)?;
    m.add_function(wrap_pyfunction!(py_gn, m)?)?;
    m.add_function(wrap_pyfunction!(py_decay_weight, m)?)?;
    m.add_function(wrap_pyfunction!(validate, m)?)?;
    Ok(())
}
