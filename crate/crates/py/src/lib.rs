//! Python bindings: rasters, geometry, risk functions, the ensemble model
//! and the pipeline stages.

use std::path::PathBuf;

use floodline::ensemble::cv::kfold_partition;
use floodline::ensemble::metrics as fl_metrics;
use floodline::ensemble::persist::{model_from_json, model_to_json, parse_outlier_label};
use floodline::ensemble::rng::SeedPath;
use floodline::ensemble::{Algo, Dataset, EnsembleModel, Hyperparams, MaxFeatures, OutlierConfig};
use floodline::features::FEATURE_NAMES;
use floodline::geo::{self, GeoPoint};
use floodline::pipeline::{self, synth, RunConfig, Stage};
use floodline::raster::{neighborhood_mean, parse_grid, point_sample, RasterGrid};
use floodline::risk;
use pyo3::create_exception;
use pyo3::exceptions::{PyRuntimeError, PyValueError};
use pyo3::prelude::*;

create_exception!(floodline, StageError, PyRuntimeError, "A pipeline stage could not complete.");

fn to_py(e: floodline::Error) -> PyErr {
    if e.is_input_error() {
        PyValueError::new_err(e.to_string())
    } else {
        StageError::new_err(e.to_string())
    }
}

fn point(lat: f64, lon: f64) -> PyResult<GeoPoint> {
    GeoPoint::new(lat, lon).map_err(to_py)
}

/// Initial great-circle bearing from the camera to the house, degrees.
#[pyfunction]
fn bearing(camera_lat: f64, camera_lon: f64, house_lat: f64, house_lon: f64) -> PyResult<f64> {
    Ok(geo::bearing(point(camera_lat, camera_lon)?, point(house_lat, house_lon)?))
}

#[pyfunction]
fn pitch_angle(p_y: f64, height_px: u32) -> f64 {
    geo::pitch_angle(p_y, height_px)
}

#[pyfunction]
fn vertical_offset(depth_m: f64, pitch_deg: f64) -> PyResult<f64> {
    geo::vertical_offset(depth_m, pitch_deg).map_err(to_py)
}

/// Damage fraction for a flood depth inside the structure, meters.
#[pyfunction]
fn ddf(fdis_m: f64) -> f64 {
    risk::ddf(fdis_m)
}

#[pyfunction]
fn fdis(fathom_elev_m: f64, street_elev_m: f64, hdsl_m: f64) -> f64 {
    risk::fdis(fathom_elev_m, street_elev_m, hdsl_m)
}

#[pyfunction]
fn loss(value_usd: f64, fdis_m: f64) -> f64 {
    risk::loss(value_usd, fdis_m)
}

/// Keep flags for the P1..P99 assessed-value filter.
#[pyfunction]
fn value_filter(values: Vec<f64>) -> Vec<bool> {
    if values.is_empty() {
        Vec::new()
    } else {
        risk::value_filter(&values)
    }
}

#[pyfunction]
fn kfold(n: usize, k: usize, seed: u64) -> PyResult<Vec<Vec<usize>>> {
    if k < 2 || n < k {
        return Err(PyValueError::new_err(format!("need 2 <= k <= n, got n={n}, k={k}")));
    }
    Ok(kfold_partition(n, k, SeedPath::new(seed)))
}

/// RMSE, RMSE as a percentage of the observed mean, and R² (None when the
/// observations are constant).
#[pyfunction]
fn metrics(observed: Vec<f64>, predicted: Vec<f64>) -> PyResult<(f64, f64, Option<f64>)> {
    if observed.len() != predicted.len() || observed.is_empty() {
        return Err(PyValueError::new_err("observed and predicted must be non-empty and equally long"));
    }
    let m = fl_metrics::metrics(&predicted, &observed);
    Ok((m.rmse, m.rmse_pct, m.r2))
}

#[pyclass(name = "Raster", frozen)]
struct PyRaster {
    grid: RasterGrid,
}

#[pymethods]
impl PyRaster {
    /// Parses ESRI ASCII grid text.
    #[staticmethod]
    fn parse(text: &str) -> PyResult<Self> {
        Ok(PyRaster {
            grid: parse_grid(text).map_err(to_py)?,
        })
    }

    fn to_ascii(&self) -> String {
        self.grid.to_ascii()
    }

    #[getter]
    fn shape(&self) -> (usize, usize) {
        (self.grid.nrows, self.grid.ncols)
    }

    fn point_sample(&self, x: f64, y: f64) -> Option<f64> {
        point_sample(&self.grid, x, y).value
    }

    /// Mean of the six nearest valid cells and how many cells were used.
    fn neighborhood_mean(&self, x: f64, y: f64) -> (Option<f64>, usize) {
        let s = neighborhood_mean(&self.grid, x, y);
        (s.value, s.valid_pixel_count)
    }
}

#[pyclass(name = "EnsembleModel", frozen)]
struct PyModel {
    model: EnsembleModel,
}

#[pymethods]
impl PyModel {
    /// Fits a model; `algo` is `random_forest` or `gradient_boost` and
    /// `outlier` is `none`, `percentile_clip_1_99` or `iqr_filter_<k>`.
    #[staticmethod]
    #[pyo3(signature = (features, targets, algo="random_forest", n_trees=100, max_depth=None, min_samples_leaf=1, max_features=None, learning_rate=0.1, outlier="none", seed=0))]
    #[allow(clippy::too_many_arguments)]
    fn fit(
        features: Vec<Vec<f64>>,
        targets: Vec<f64>,
        algo: &str,
        n_trees: usize,
        max_depth: Option<usize>,
        min_samples_leaf: usize,
        max_features: Option<usize>,
        learning_rate: f64,
        outlier: &str,
        seed: u64,
    ) -> PyResult<Self> {
        let algo = Algo::parse(algo).ok_or_else(|| PyValueError::new_err(format!("unknown algo {algo:?}")))?;
        let outlier: OutlierConfig = parse_outlier_label(outlier)
            .ok_or_else(|| PyValueError::new_err(format!("unknown outlier config {outlier:?}")))?;
        let hyper = match algo {
            Algo::RandomForest => Hyperparams::random_forest(
                n_trees,
                max_depth,
                min_samples_leaf,
                max_features.map_or(MaxFeatures::All, MaxFeatures::Count),
            ),
            Algo::GradientBoost => Hyperparams::gradient_boost(n_trees, learning_rate, max_depth, min_samples_leaf),
        };
        let data = Dataset::new(features, targets).map_err(PyValueError::new_err)?;
        let model = EnsembleModel::fit(&data, &hyper, outlier, SeedPath::new(seed)).map_err(PyValueError::new_err)?;
        Ok(PyModel { model })
    }

    fn predict(&self, rows: Vec<Vec<f64>>) -> PyResult<Vec<f64>> {
        let n = self.model.n_features();
        if let Some(r) = rows.iter().find(|r| r.len() != n) {
            return Err(PyValueError::new_err(format!("expected {n} features per row, got {}", r.len())));
        }
        Ok(self.model.predict_many(&rows))
    }

    #[getter]
    fn importances(&self) -> Vec<f64> {
        self.model.importances.clone()
    }

    #[getter]
    fn n_trees(&self) -> usize {
        self.model.trees.len()
    }

    fn to_json(&self) -> String {
        let names: Vec<String> = if self.model.n_features() == FEATURE_NAMES.len() {
            FEATURE_NAMES.iter().map(|s| s.to_string()).collect()
        } else {
            (0..self.model.n_features()).map(|i| format!("x{i}")).collect()
        };
        let refs: Vec<&str> = names.iter().map(String::as_str).collect();
        model_to_json(&self.model, &refs, None)
    }

    #[staticmethod]
    fn from_json(text: &str) -> PyResult<Self> {
        Ok(PyModel {
            model: model_from_json(text).map_err(PyValueError::new_err)?,
        })
    }
}

/// Runs one pipeline stage (`extract`, `impute`, `assess` or `report`).
#[pyfunction]
#[pyo3(signature = (stage, config, seed=None, aois=None))]
fn run_stage(py: Python<'_>, stage: &str, config: PathBuf, seed: Option<u64>, aois: Option<Vec<String>>) -> PyResult<()> {
    let stage = Stage::parse(stage).ok_or_else(|| PyValueError::new_err(format!("unknown stage {stage:?}")))?;
    let mut cfg = RunConfig::load(&config).map_err(to_py)?;
    if let Some(s) = seed {
        cfg = cfg.with_seed(s);
    }
    let aois = aois.unwrap_or_default();
    py.detach(|| pipeline::run(stage, &cfg, &aois)).map_err(to_py)
}

/// Generates a synthetic fixture from a parameter file and returns the path
/// of the run config it wrote.
#[pyfunction]
#[pyo3(signature = (params, seed=None))]
fn generate_synth(py: Python<'_>, params: PathBuf, seed: Option<u64>) -> PyResult<PathBuf> {
    let out = py.detach(|| synth::generate_from_file(&params, seed)).map_err(to_py)?;
    Ok(out.config_path)
}

#[pymodule(name = "floodline")]
fn floodline_module(m: &Bound<'_, PyModule>) -> PyResult<()> {
    m.add("StageError", m.py().get_type::<StageError>())?;
    m.add("FEATURE_NAMES", FEATURE_NAMES.to_vec())?;
    m.add_class::<PyRaster>()?;
    m.add_class::<PyModel>()?;
    for f in [
        wrap_pyfunction!(bearing, m)?,
        wrap_pyfunction!(pitch_angle, m)?,
        wrap_pyfunction!(vertical_offset, m)?,
        wrap_pyfunction!(ddf, m)?,
        wrap_pyfunction!(fdis, m)?,
        wrap_pyfunction!(loss, m)?,
        wrap_pyfunction!(value_filter, m)?,
        wrap_pyfunction!(kfold, m)?,
        wrap_pyfunction!(metrics, m)?,
        wrap_pyfunction!(run_stage, m)?,
        wrap_pyfunction!(generate_synth, m)?,
    ] {
        m.add_function(f)?;
    }
    Ok(())
}
