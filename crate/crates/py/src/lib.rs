//! Python bindings: grids, exponents, weights, norms, square functions and the experiment runner.
//!
//! Grid functions cross the boundary as flat lists of samples in row-major node order.

use std::path::PathBuf;

use herzlab::conv::ConvBackend;
use herzlab::error::HerzError;
use herzlab::exponent::{ExponentPreset, VariableExponent};
use herzlab::fit::FitReport;
use herzlab::grid::{build_grid, GridFunction, GridSpec};
use herzlab::norms::{self, HerzParams, ModularQuery};
use herzlab::sqfn::{self, build_dictionary, ConeQuadrature};
use herzlab::verify;
use herzlab::weights::{self, BallFamily, PairSampling, WeightPreset};
use pyo3::exceptions::PyValueError;
use pyo3::prelude::*;
use pyo3::types::PyDict;

fn err(e: HerzError) -> PyErr {
    PyValueError::new_err(e.to_string())
}

#[pyclass(module = "herzlab_py", frozen)]
struct Grid {
    inner: herzlab::grid::Grid,
}

#[pymethods]
impl Grid {
    #[new]
    #[pyo3(signature = (dim, k_min, k_max, points_per_unit))]
    fn new(dim: usize, k_min: i32, k_max: i32, points_per_unit: u32) -> PyResult<Self> {
        Ok(Self { inner: build_grid(GridSpec::new(dim, k_min, k_max, points_per_unit)).map_err(err)? })
    }

    #[getter]
    fn dim(&self) -> usize {
        self.inner.dim()
    }

    #[getter]
    fn spacing(&self) -> f64 {
        self.inner.spacing()
    }

    fn __len__(&self) -> usize {
        self.inner.len()
    }

    fn points(&self) -> Vec<Vec<f64>> {
        (0..self.inner.len()).map(|i| self.inner.point(i)[..self.inner.dim()].to_vec()).collect()
    }

    fn radii(&self) -> Vec<f64> {
        self.inner.radii().to_vec()
    }

    fn shells(&self) -> Vec<i32> {
        (0..self.inner.len()).map(|i| self.inner.shell_of(i)).collect()
    }

    fn __repr__(&self) -> String {
        let s = self.inner.spec();
        format!("Grid(dim={}, k_min={}, k_max={}, points_per_unit={})", s.dim, s.k_min, s.k_max, s.points_per_unit)
    }
}

impl Grid {
    fn function(&self, samples: Vec<f64>) -> PyResult<GridFunction> {
        GridFunction::from_samples(&self.inner, samples).map_err(err)
    }
}

/// Variable exponent sampled on a grid, from a preset string such as `"ramp:2,3"` or explicit values.
#[pyclass(module = "herzlab_py", frozen)]
struct Exponent {
    inner: VariableExponent,
}

#[pymethods]
impl Exponent {
    #[new]
    #[pyo3(signature = (grid, preset, p_infinity=None))]
    fn new(grid: &Grid, preset: &str, p_infinity: Option<f64>) -> PyResult<Self> {
        let preset: ExponentPreset = preset.parse().map_err(err)?;
        let mut inner = VariableExponent::from_preset(&grid.inner, &preset).map_err(err)?;
        if let Some(p) = p_infinity {
            inner = inner.with_p_infinity(p);
        }
        Ok(Self { inner })
    }

    #[staticmethod]
    fn from_values(grid: &Grid, values: Vec<f64>) -> PyResult<Self> {
        Ok(Self { inner: VariableExponent::from_values(&grid.inner, values).map_err(err)? })
    }

    #[getter]
    fn p_minus(&self) -> f64 {
        self.inner.p_minus()
    }

    #[getter]
    fn p_plus(&self) -> f64 {
        self.inner.p_plus()
    }

    fn values(&self) -> Vec<f64> {
        self.inner.values().to_vec()
    }

    fn conjugate(&self) -> Self {
        Self { inner: herzlab::exponent::conjugate(&self.inner) }
    }
}

#[pyclass(module = "herzlab_py", frozen)]
struct Weight {
    inner: weights::Weight,
}

#[pymethods]
impl Weight {
    /// `exponent` is needed only by presets built from it.
    #[new]
    #[pyo3(signature = (grid, preset, exponent=None))]
    fn new(grid: &Grid, preset: &str, exponent: Option<&Exponent>) -> PyResult<Self> {
        let preset: WeightPreset = preset.parse().map_err(err)?;
        let inner = weights::Weight::from_preset(&grid.inner, &preset, exponent.map(|e| &e.inner)).map_err(err)?;
        Ok(Self { inner })
    }

    #[staticmethod]
    fn from_values(grid: &Grid, values: Vec<f64>) -> PyResult<Self> {
        Ok(Self { inner: weights::Weight::from_values(&grid.inner, values).map_err(err)? })
    }

    fn values(&self) -> Vec<f64> {
        self.inner.values().to_vec()
    }

    /// Grid surrogate of the A_1 constant over the default ball ladder.
    fn a1_constant(&self, grid: &Grid) -> PyResult<f64> {
        weights::a1_constant(&self.inner, &BallFamily::ladder(&grid.inner, 1), &grid.inner).map_err(err)
    }

    fn ap_constant(&self, grid: &Grid, p: f64) -> PyResult<f64> {
        weights::ap_constant(&self.inner, p, &BallFamily::ladder(&grid.inner, 1), &grid.inner).map_err(err)
    }
}

fn weight_or_unit(grid: &Grid, w: Option<&Weight>) -> weights::Weight {
    w.map_or_else(|| weights::Weight::unit(&grid.inner), |w| w.inner.clone())
}

fn fit_dict<'py>(py: Python<'py>, fit: &FitReport) -> PyResult<Bound<'py, PyDict>> {
    let d = PyDict::new(py);
    d.set_item("C", fit.c)?;
    d.set_item("delta", fit.delta)?;
    d.set_item("residual", fit.residual)?;
    d.set_item("samples", fit.sample_count)?;
    d.set_item("violations", fit.envelope_violations)?;
    Ok(d)
}

fn backend(name: &str) -> PyResult<ConvBackend> {
    match name {
        "auto" => Ok(ConvBackend::Auto),
        "direct" => Ok(ConvBackend::Direct),
        "fft" => Ok(ConvBackend::Fft),
        _ => Err(PyValueError::new_err(format!("unknown backend {name:?}"))),
    }
}

#[pyfunction]
#[pyo3(signature = (grid, f, p, w=None))]
fn luxemburg_norm(grid: &Grid, f: Vec<f64>, p: &Exponent, w: Option<&Weight>) -> PyResult<f64> {
    let f = grid.function(f)?;
    norms::weighted_norm(&f, &p.inner, &weight_or_unit(grid, w)).map_err(err)
}

#[pyfunction]
#[pyo3(signature = (grid, f, p, lam, w=None))]
fn modular(grid: &Grid, f: Vec<f64>, p: &Exponent, lam: f64, w: Option<&Weight>) -> PyResult<f64> {
    let f = grid.function(f)?;
    let w = weight_or_unit(grid, w);
    norms::modular(&ModularQuery::weighted(&f, &p.inner, &w), lam).map_err(err)
}

#[pyfunction]
#[pyo3(signature = (grid, f, p, w=None))]
fn associate_norm(grid: &Grid, f: Vec<f64>, p: &Exponent, w: Option<&Weight>) -> PyResult<f64> {
    let f = grid.function(f)?;
    norms::associate_norm(&f, &p.inner, &weight_or_unit(grid, w)).map_err(err)
}

/// Returns `(value, [(k, shell_norm), ...])`.
#[pyfunction]
#[pyo3(signature = (grid, f, alpha, q, p, r, delta, w=None, homogeneous=true))]
#[allow(clippy::too_many_arguments)]
fn herz_norm(
    grid: &Grid,
    f: Vec<f64>,
    alpha: f64,
    q: f64,
    p: &Exponent,
    r: f64,
    delta: f64,
    w: Option<&Weight>,
    homogeneous: bool,
) -> PyResult<(f64, Vec<(i32, f64)>)> {
    let f = grid.function(f)?;
    let params = HerzParams::new(alpha, q, p.inner.clone(), weight_or_unit(grid, w), r, delta).map_err(err)?;
    let h = norms::herz_norm(&f, &params, homogeneous, &grid.inner).map_err(err)?;
    Ok((h.value, h.shell_norms))
}

/// Centered maximal function over the grid's dyadic radius ladder.
#[pyfunction]
fn maximal(grid: &Grid, f: Vec<f64>) -> PyResult<Vec<f64>> {
    let f = grid.function(f)?;
    let radii = weights::radius_ladder(&grid.inner);
    Ok(sqfn::maximal(&f, &radii, &grid.inner).map_err(err)?.into_samples())
}

/// Intrinsic square function over a seeded dictionary of `dict_size` kernels.
#[pyfunction]
#[pyo3(signature = (grid, f, beta=1.0, dict_size=8, seed=0, backend="auto"))]
fn s_beta(grid: &Grid, f: Vec<f64>, beta: f64, dict_size: usize, seed: u64, backend: &str) -> PyResult<Vec<f64>> {
    let f = grid.function(f)?;
    let dict = build_dictionary(beta, dict_size, seed, grid.inner.dim()).map_err(err)?;
    let cone = ConeQuadrature::new(&grid.inner);
    let out = sqfn::s_beta(&f, &dict, &cone, &grid.inner, self::backend(backend)?).map_err(err)?;
    Ok(out.into_samples())
}

/// Envelope fit of the ball-pair measure comparison; `mode` is `"concentric"` or `"random"`.
#[pyfunction]
#[pyo3(signature = (grid, w, mode="concentric", trials=500, seed=0))]
fn measure_comparison<'py>(
    py: Python<'py>,
    grid: &Grid,
    w: &Weight,
    mode: &str,
    trials: usize,
    seed: u64,
) -> PyResult<Bound<'py, PyDict>> {
    let mode = match mode {
        "concentric" => PairSampling::Concentric,
        "random" => PairSampling::Random,
        _ => return Err(PyValueError::new_err(format!("unknown pair sampling {mode:?}"))),
    };
    let rep = weights::a1_measure_comparison(&w.inner, &grid.inner, mode, trials, seed).map_err(err)?;
    fit_dict(py, &rep.fit)
}

#[pyfunction]
#[pyo3(signature = (grid, p, w=None, trials=500, seed=0))]
fn check_lemma1<'py>(
    py: Python<'py>,
    grid: &Grid,
    p: &Exponent,
    w: Option<&Weight>,
    trials: usize,
    seed: u64,
) -> PyResult<Bound<'py, PyDict>> {
    let fit = verify::check_lemma1(&p.inner, &weight_or_unit(grid, w), &grid.inner, trials, seed).map_err(err)?;
    fit_dict(py, &fit)
}

#[pyfunction]
#[pyo3(signature = (grid, p, w=None, trials=500, seed=0))]
fn check_lemma2<'py>(
    py: Python<'py>,
    grid: &Grid,
    p: &Exponent,
    w: Option<&Weight>,
    trials: usize,
    seed: u64,
) -> PyResult<Bound<'py, PyDict>> {
    let fit = verify::check_lemma2(&p.inner, &weight_or_unit(grid, w), &grid.inner, trials, seed).map_err(err)?;
    fit_dict(py, &fit)
}

#[pyfunction]
#[pyo3(signature = (grid, p, w=None))]
fn norm_growth_delta<'py>(py: Python<'py>, grid: &Grid, p: &Exponent, w: Option<&Weight>) -> PyResult<Bound<'py, PyDict>> {
    let fit = verify::estimate_norm_growth_delta(&p.inner, &weight_or_unit(grid, w), &grid.inner).map_err(err)?;
    fit_dict(py, &fit)
}

/// Runs an experiment config like `herzlab run`; returns the process exit code the CLI would use.
#[pyfunction]
#[pyo3(signature = (config, jobs=1, probe=false, seed=None))]
fn run_config(py: Python<'_>, config: PathBuf, jobs: usize, probe: bool, seed: Option<u64>) -> PyResult<u8> {
    let opts = herzlab::cli::RunOptions { jobs, probe, seed_override: seed };
    py.detach(|| herzlab::cli::run(&config, &opts))
        .map(|s| s.exit_code)
        .map_err(|e| PyValueError::new_err(e.to_string()))
}

#[pymodule]
fn herzlab_py(m: &Bound<'_, PyModule>) -> PyResult<()> {
    m.add_class::<Grid>()?;
    m.add_class::<Exponent>()?;
    m.add_class::<Weight>()?;
    m.add_function(wrap_pyfunction!(luxemburg_norm, m)?)?;
    m.add_function(wrap_pyfunction!(modular, m)?)?;
    m.add_function(wrap_pyfunction!(associate_norm, m)?)?;
    m.add_function(wrap_pyfunction!(herz_norm, m)?)?;
    m.add_function(wrap_pyfunction!(maximal, m)?)?;
    m.add_function(wrap_pyfunction!(s_beta, m)?)?;
    m.add_function(wrap_pyfunction!(measure_comparison, m)?)?;
    m.add_function(wrap_pyfunction!(check_lemma1, m)?)?;
    m.add_function(wrap_pyfunction!(check_lemma2, m)?)?;
    m.add_function(wrap_pyfunction!(norm_growth_delta, m)?)?;
    m.add_function(wrap_pyfunction!(run_config, m)?)?;
    Ok(())
}
