//! Python module `tilegen`: build tiling tables and draw variates.

use std::sync::Arc;

use pyo3::exceptions::{PyIOError, PyRuntimeError, PyValueError};
use pyo3::prelude::*;
use pyo3::types::PyDict;
use tilegen::density::catalog;
use tilegen::{DensityModel, Error, RefinementStats, RngAlgorithm, SamplerState, StopRule, TilingTable, UniformSource};

fn to_py(e: Error) -> PyErr {
    let message = format!("{}: {e}", e.code());
    match e {
        Error::Parameter(_) | Error::Domain(_) | Error::InsufficientSamples { .. } => PyValueError::new_err(message),
        Error::Format(_) | Error::Io(_) | Error::InvalidTable(_) => PyIOError::new_err(message),
        _ => PyRuntimeError::new_err(message),
    }
}

fn load_model(density: &str, mass_points: &[(f64, f64)]) -> Result<DensityModel, Error> {
    let mut model = catalog::parse_density(density)?;
    for &(c, eps) in mass_points {
        model = model.declare_mass_point(c, eps)?;
    }
    Ok(model)
}

fn stats_dict<'py>(py: Python<'py>, s: &RefinementStats) -> PyResult<Bound<'py, PyDict>> {
    let d = PyDict::new(py);
    d.set_item("level", s.level)?;
    d.set_item("N", s.n_tiles)?;
    d.set_item("R", s.rejection_rate)?;
    d.set_item("E", s.evaluation_rate)?;
    d.set_item("bytes", s.memory_bytes)?;
    Ok(d)
}

/// A tiling of a density.
#[pyclass(name = "Table", module = "tilegen", frozen)]
struct PyTable {
    table: Arc<TilingTable>,
    history: Vec<RefinementStats>,
}

#[pymethods]
impl PyTable {
    /// Tiles `density` until the first of the given bounds is met.
    #[staticmethod]
    #[pyo3(signature = (density, target_r=None, target_e=None, level=None, mass_points=Vec::new()))]
    fn build(
        py: Python<'_>,
        density: &str,
        target_r: Option<f64>,
        target_e: Option<f64>,
        level: Option<u32>,
        mass_points: Vec<(f64, f64)>,
    ) -> PyResult<Self> {
        let model = load_model(density, &mass_points).map_err(to_py)?;
        let rule = match (level, target_r, target_e) {
            (Some(l), None, None) => StopRule::to_level(l),
            (Some(_), _, _) => return Err(PyValueError::new_err("E_PARAMETER: level excludes target_r and target_e")),
            (None, None, None) => StopRule::default(),
            (None, r, e) => StopRule { target_r: r, target_e: e, ..StopRule::default() },
        };
        let (table, history) = py.detach(|| tilegen::build(&model, rule)).map_err(to_py)?;
        Ok(PyTable { table: Arc::new(table), history })
    }

    #[staticmethod]
    fn load(path: &str) -> PyResult<Self> {
        let table = TilingTable::load(path).map_err(to_py)?;
        let history = vec![table.stats()];
        Ok(PyTable { table: Arc::new(table), history })
    }

    fn save(&self, path: &str) -> PyResult<()> {
        self.table.save(path).map_err(to_py)
    }

    fn to_bytes<'py>(&self, py: Python<'py>) -> Bound<'py, pyo3::types::PyBytes> {
        pyo3::types::PyBytes::new(py, &self.table.to_bytes())
    }

    #[getter]
    fn support(&self) -> (f64, f64) {
        self.table.support()
    }

    #[getter]
    fn level(&self) -> u32 {
        self.table.level()
    }

    #[getter]
    fn n_tiles(&self) -> usize {
        self.table.n_tiles()
    }

    #[getter]
    fn rejection_rate(&self) -> f64 {
        self.table.stats().rejection_rate
    }

    #[getter]
    fn evaluation_rate(&self) -> f64 {
        self.table.stats().evaluation_rate
    }

    /// Per-level statistics as dicts with keys level, N, R, E, bytes.
    fn history<'py>(&self, py: Python<'py>) -> PyResult<Vec<Bound<'py, PyDict>>> {
        self.history.iter().map(|s| stats_dict(py, s)).collect()
    }

    fn __len__(&self) -> usize {
        self.table.n_tiles()
    }

    fn __repr__(&self) -> String {
        let (a, b) = self.table.support();
        format!("Table(support=[{a}, {b}], level={}, n_tiles={})", self.table.level(), self.table.n_tiles())
    }
}

/// One sampling stream over a table.
#[pyclass(name = "Sampler", module = "tilegen")]
struct PySampler {
    state: SamplerState,
}

#[pymethods]
impl PySampler {
    #[new]
    #[pyo3(signature = (table, density, mass_points=Vec::new(), seed=0, rng="xoshiro256pp"))]
    fn new(table: &PyTable, density: &str, mass_points: Vec<(f64, f64)>, seed: u64, rng: &str) -> PyResult<Self> {
        let algorithm: RngAlgorithm = rng.parse().map_err(to_py)?;
        let model = load_model(density, &mass_points).map_err(to_py)?;
        let state = SamplerState::new(table.table.clone(), Arc::new(model), UniformSource::new(algorithm, seed)).map_err(to_py)?;
        Ok(PySampler { state })
    }

    fn draw(&mut self) -> PyResult<f64> {
        self.state.draw().map_err(to_py)
    }

    fn draw_batch(&mut self, py: Python<'_>, n: usize) -> PyResult<Vec<f64>> {
        let state = &mut self.state;
        py.detach(|| state.draw_batch(n)).map_err(to_py)
    }

    /// attempts, accepts, rejections and density_evals so far.
    fn counters<'py>(&self, py: Python<'py>) -> PyResult<Bound<'py, PyDict>> {
        let c = self.state.counters();
        let d = PyDict::new(py);
        d.set_item("attempts", c.attempts)?;
        d.set_item("accepts", c.accepts)?;
        d.set_item("rejections", c.rejections)?;
        d.set_item("density_evals", c.density_evals)?;
        Ok(d)
    }
}

/// First `n` raw 64-bit outputs of a uniform source.
#[pyfunction]
#[pyo3(signature = (seed, n, rng="xoshiro256pp"))]
fn raw_outputs(seed: u64, n: usize, rng: &str) -> PyResult<Vec<u64>> {
    let algorithm: RngAlgorithm = rng.parse().map_err(to_py)?;
    let mut source = UniformSource::new(algorithm, seed);
    Ok((0..n).map(|_| source.next_raw()).collect())
}

#[pymodule]
#[pyo3(name = "tilegen")]
fn tilegen_module(m: &Bound<'_, PyModule>) -> PyResult<()> {
    m.add_class::<PyTable>()?;
    m.add_class::<PySampler>()?;
    m.add_function(wrap_pyfunction!(raw_outputs, m)?)?;
    m.add("__version__", env!("CARGO_PKG_VERSION"))?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn mass_points_are_applied() {
        let m = load_model("builtin:bessel-k0", &[(0.0, 1e-5)]).unwrap();
        assert_eq!(m.mass_points().len(), 1);
        assert!(load_model("builtin:nope", &[]).is_err());
    }
}
