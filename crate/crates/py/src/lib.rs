//! Python bindings. Grids cross the boundary as nested lists of complex
//! numbers: symbol grids as `[mode][subcarrier]` with modes in ascending
//! order, sample frames as `[element][sample]`.

use hodm_core::blockchannel::{self, BlockChannel as CoreBlock, GainOptions};
use hodm_core::capacity;
use hodm_core::detection::{self, CeeModel, MonteCarlo};
use hodm_core::geometry::{self as geo, DelayIndexing};
use hodm_core::modem::{self, ModeSet, ReceivedFrame, SymbolGrid};
use hodm_sim::{Experiment, ExperimentConfig};
use num_complex::Complex64;
use pyo3::exceptions::PyValueError;
use pyo3::prelude::*;

fn err(e: impl std::fmt::Display) -> PyErr {
    PyValueError::new_err(e.to_string())
}

fn indexing(name: &str) -> PyResult<DelayIndexing> {
    match name {
        "literal" => Ok(DelayIndexing::Literal),
        "physical" => Ok(DelayIndexing::Physical),
        _ => Err(PyValueError::new_err(format!("indexing must be 'literal' or 'physical', got {name:?}"))),
    }
}

fn rectangular(rows: &[Vec<Complex64>], what: &str) -> PyResult<(usize, usize, Vec<Complex64>)> {
    let cols = rows.first().map_or(0, Vec::len);
    if rows.is_empty() || cols == 0 || rows.iter().any(|r| r.len() != cols) {
        return Err(PyValueError::new_err(format!("{what} must be a non-empty rectangular list of lists")));
    }
    Ok((rows.len(), cols, rows.concat()))
}

fn grid_from(rows: &[Vec<Complex64>]) -> PyResult<SymbolGrid> {
    let (nn, mm, flat) = rectangular(rows, "symbols")?;
    let modes = ModeSet::new(nn);
    Ok(SymbolGrid::from_fn(nn, mm, |l, m| flat[modes.index_of(l).expect("in range") * mm + m]))
}

fn grid_to(g: &SymbolGrid) -> Vec<Vec<Complex64>> {
    g.values().chunks(g.num_subcarriers()).map(<[Complex64]>::to_vec).collect()
}

#[pyclass(frozen, name = "UcaGeometry")]
struct UcaGeometry(geo::UcaGeometry);

#[pymethods]
impl UcaGeometry {
    #[new]
    #[pyo3(signature = (num_elements, radius_tx, radius_rx, axial_distance, attenuation = 1.0))]
    fn new(
        num_elements: usize,
        radius_tx: f64,
        radius_rx: f64,
        axial_distance: f64,
        attenuation: f64,
    ) -> PyResult<Self> {
        geo::UcaGeometry::new(num_elements, radius_tx, radius_rx, axial_distance, attenuation).map(Self).map_err(err)
    }

    #[getter]
    fn num_elements(&self) -> usize {
        self.0.num_elements()
    }

    #[getter]
    fn axial_distance(&self) -> f64 {
        self.0.axial_distance()
    }

    fn __repr__(&self) -> String {
        format!(
            "UcaGeometry(num_elements={}, radius_tx={}, radius_rx={}, axial_distance={}, attenuation={})",
            self.0.num_elements(),
            self.0.radius_tx(),
            self.0.radius_rx(),
            self.0.axial_distance(),
            self.0.attenuation()
        )
    }
}

#[pyclass(frozen, name = "FrameTiming")]
struct FrameTiming(geo::FrameTiming);

#[pymethods]
impl FrameTiming {
    #[new]
    fn new(num_subcarriers: usize, first_frequency: f64, subcarrier_spacing: f64, cp_length: usize) -> PyResult<Self> {
        geo::FrameTiming::new(num_subcarriers, first_frequency, subcarrier_spacing, cp_length).map(Self).map_err(err)
    }

    fn wavelength(&self, m: usize) -> f64 {
        self.0.wavelength(m)
    }
}

#[pyclass(frozen, name = "PathSet")]
struct PathSet(geo::PathSet);

#[pymethods]
impl PathSet {
    /// Each reflection is a pair (bounce distances, permittivities).
    #[new]
    #[pyo3(signature = (reflections, include_los = true))]
    fn new(reflections: Vec<(Vec<f64>, Vec<f64>)>, include_los: bool) -> PyResult<Self> {
        let reflections = reflections
            .into_iter()
            .map(|(d, e)| geo::ReflectionPath::new(d, e))
            .collect::<Result<Vec<_>, _>>()
            .map_err(err)?;
        Ok(Self(geo::PathSet { include_los, reflections }))
    }

    #[staticmethod]
    fn los_only() -> Self {
        Self(geo::PathSet::los_only())
    }

    /// LoS plus `total_paths - 1` reflections cycling through orders 1..3.
    #[staticmethod]
    #[pyo3(signature = (total_paths, base = 0.3, step = 0.05, permittivity = 15.0))]
    fn preset(total_paths: usize, base: f64, step: f64, permittivity: f64) -> PyResult<Self> {
        geo::PathSet::preset_with_total(total_paths, base, step, permittivity).map(Self).map_err(err)
    }

    #[getter]
    fn path_count(&self) -> usize {
        self.0.path_count()
    }

    fn __len__(&self) -> usize {
        self.0.path_count()
    }
}

#[pyclass(frozen, name = "BlockChannel")]
struct BlockChannel(CoreBlock);

#[pymethods]
impl BlockChannel {
    #[new]
    #[pyo3(signature = (geometry, paths, timing, indexing = "literal", include_4pi = true))]
    fn new(
        geometry: &UcaGeometry,
        paths: &PathSet,
        timing: &FrameTiming,
        indexing: &str,
        include_4pi: bool,
    ) -> PyResult<Self> {
        let ix = self::indexing(indexing)?;
        CoreBlock::compute(&geometry.0, &paths.0, &timing.0, ix, GainOptions { include_4pi }).map(Self).map_err(err)
    }

    #[getter]
    fn modes(&self) -> Vec<i64> {
        self.0.modes().modes().collect()
    }

    #[getter]
    fn num_subcarriers(&self) -> usize {
        self.0.num_subcarriers()
    }

    fn gain(&self, l: i64, m: usize) -> PyResult<Complex64> {
        self.check(l, m)?;
        Ok(self.0.gain(l, m))
    }

    fn los(&self, l: i64, m: usize) -> PyResult<Complex64> {
        self.check(l, m)?;
        Ok(self.0.los(l, m))
    }

    fn reflection(&self, l: i64, m: usize) -> PyResult<Complex64> {
        self.check(l, m)?;
        Ok(self.0.reflection(l, m))
    }

    fn row(&self, l: i64) -> PyResult<Vec<Complex64>> {
        self.check(l, 0)?;
        Ok(self.0.row(l))
    }

    /// All gains as `[mode][subcarrier]`.
    fn gains(&self) -> Vec<Vec<Complex64>> {
        self.0.gains().chunks(self.0.num_subcarriers()).map(<[Complex64]>::to_vec).collect()
    }
}

impl BlockChannel {
    fn check(&self, l: i64, m: usize) -> PyResult<()> {
        if !self.0.modes().contains(l) || m >= self.0.num_subcarriers() {
            return Err(PyValueError::new_err(format!("block ({l}, {m}) outside the grid")));
        }
        Ok(())
    }
}

/// 2D inverse transform of a `[mode][subcarrier]` grid to `[element][sample]`.
#[pyfunction]
fn modulate(symbols: Vec<Vec<Complex64>>) -> PyResult<Vec<Vec<Complex64>>> {
    let frame = modem::hodm_modulate(&grid_from(&symbols)?);
    Ok(frame.body_samples().chunks(frame.body_len()).map(<[Complex64]>::to_vec).collect())
}

#[pyfunction]
fn demodulate(samples: Vec<Vec<Complex64>>) -> PyResult<Vec<Vec<Complex64>>> {
    let (nn, mm, flat) = rectangular(&samples, "samples")?;
    let rx = ReceivedFrame::new(nn, mm, flat, 0.0).map_err(err)?;
    Ok(grid_to(&modem::hodm_demodulate(&rx)))
}

/// Sends one frame through the element channel and returns the
/// demodulated grid. `compensate` applies the per-path phase correction
/// sized for the farthest reflector.
#[pyfunction]
#[pyo3(signature = (geometry, paths, timing, symbols, compensate = true, noise_variance = 0.0, seed = 0, indexing = "literal"))]
#[allow(clippy::too_many_arguments)]
fn transmit(
    geometry: &UcaGeometry,
    paths: &PathSet,
    timing: &FrameTiming,
    symbols: Vec<Vec<Complex64>>,
    compensate: bool,
    noise_variance: f64,
    seed: u64,
    indexing: &str,
) -> PyResult<Vec<Vec<Complex64>>> {
    let grid = grid_from(&symbols)?;
    if grid.num_modes() != geometry.0.num_elements() || grid.num_subcarriers() != timing.0.num_subcarriers {
        return Err(PyValueError::new_err("symbol grid must be num_elements x num_subcarriers"));
    }
    let ix = self::indexing(indexing)?;
    let mut ch = geo::build_element_channel(&geometry.0, &paths.0, &timing.0, ix).map_err(err)?;
    if compensate {
        if let Some(d_max) = paths.0.max_path_distance() {
            ch = modem::compensate_per_path(&ch, &geometry.0, d_max, &timing.0);
        }
    }
    let tx = modem::add_cyclic_prefix(&modem::hodm_modulate(&grid), timing.0.cp_length).map_err(err)?;
    let rx = modem::apply_channel(&ch, &tx, noise_variance, seed).map_err(err)?;
    Ok(grid_to(&modem::hodm_demodulate(&rx)))
}

#[pyfunction]
fn bessel_j(order: i32, z: f64) -> PyResult<f64> {
    blockchannel::bessel_j(order, z).map_err(err)
}

/// Water-filling with total power `budget`: (powers, capacity in bits, level).
#[pyfunction]
fn waterfill(gains: Vec<Complex64>, noise: Vec<f64>, budget: f64) -> PyResult<(Vec<f64>, f64, f64)> {
    let level = capacity::find_instantaneous_level(&gains, &noise, budget).map_err(err)?;
    let a = capacity::waterfill(&gains, &noise, level).map_err(err)?;
    Ok((a.powers, a.capacity, level))
}

/// Zero-forcing SNR loss under estimation error ρ; returns
/// (loss in dB, its standard error, linear ratio).
#[pyfunction]
#[pyo3(signature = (h, rho, signal_power, noise_power = 1.0, draws = 10_000, seed = 1))]
fn snr_loss(
    h: Vec<Complex64>,
    rho: f64,
    signal_power: f64,
    noise_power: f64,
    draws: usize,
    seed: u64,
) -> PyResult<(f64, f64, f64)> {
    let cee = CeeModel::new(rho).map_err(err)?;
    let l = detection::snr_loss(&h, &cee, signal_power, noise_power, &MonteCarlo { draws, seed }).map_err(err)?;
    Ok((l.db, l.db_stderr, l.linear))
}

/// Runs one experiment from a TOML config; rows are (x, series, y, stderr).
#[pyfunction]
fn run_experiment(py: Python<'_>, name: &str, config_toml: &str) -> PyResult<Vec<(f64, String, f64, f64)>> {
    let exp =
        Experiment::from_name(name).ok_or_else(|| PyValueError::new_err(format!("unknown experiment {name:?}")))?;
    let cfg = ExperimentConfig::from_toml(config_toml).map_err(err)?;
    let curve = py.detach(|| exp.run(&cfg)).map_err(err)?;
    Ok(curve.rows().iter().map(|r| (r.x, r.series.clone(), r.y, r.stderr)).collect())
}

#[pymodule]
fn hodm(m: &Bound<'_, PyModule>) -> PyResult<()> {
    m.add_class::<UcaGeometry>()?;
    m.add_class::<FrameTiming>()?;
    m.add_class::<PathSet>()?;
    m.add_class::<BlockChannel>()?;
    m.add_function(wrap_pyfunction!(modulate, m)?)?;
    m.add_function(wrap_pyfunction!(demodulate, m)?)?;
    m.add_function(wrap_pyfunction!(transmit, m)?)?;
    m.add_function(wrap_pyfunction!(bessel_j, m)?)?;
    m.add_function(wrap_pyfunction!(waterfill, m)?)?;
    m.add_function(wrap_pyfunction!(snr_loss, m)?)?;
    m.add_function(wrap_pyfunction!(run_experiment, m)?)?;
    m.add("EXPERIMENTS", hodm_sim::experiments::ALL.map(|e| e.name()).to_vec())?;
    Ok(())
}
