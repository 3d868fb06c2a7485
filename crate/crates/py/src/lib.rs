//! Python bindings for `bintemp`.

use std::path::PathBuf;

use bintemp::augment::{self, AugmentKind, AugmentOp, RasterImage};
use bintemp::binning::{bins_by_count_with_threshold, DEFAULT_HIGH_CONF_THRESHOLD};
use bintemp::btsfit::DEFAULT_AUG_CUTOFF;
use bintemp::io::{self, MapFile, Provenance};
use bintemp::metrics::{self, DEFAULT_ECE_BINS};
use bintemp::tempfit::DEFAULT_MIN_BIN_SAMPLES;
use bintemp::{BinSpec, CalibError, FitConfig, LogitDataset, SynthConfig, TemperatureProfile};
use pyo3::exceptions::{PyIOError, PyValueError};
use pyo3::prelude::*;
use pyo3::types::PyBytes;

fn to_py(e: CalibError) -> PyErr {
    match e {
        CalibError::Io(e) => PyIOError::new_err(e.to_string()),
        other => PyValueError::new_err(other.to_string()),
    }
}

trait OrPy<T> {
    fn py(self) -> PyResult<T>;
}

impl<T> OrPy<T> for bintemp::Result<T> {
    fn py(self) -> PyResult<T> {
        self.map_err(to_py)
    }
}

/// Softmax probabilities of one logit vector.
#[pyfunction]
fn softmax(logits: Vec<f64>) -> PyResult<Vec<f64>> {
    bintemp::softmax(&logits).py()
}

/// Softmax of `logits / temperature`.
#[pyfunction]
fn scaled_softmax(logits: Vec<f64>, temperature: f64) -> PyResult<Vec<f64>> {
    bintemp::scaled_softmax(&logits, temperature).py()
}

/// `(predicted_class, confidence)` at the given temperature.
#[pyfunction]
#[pyo3(signature = (logits, temperature = 1.0))]
fn predict(logits: Vec<f64>, temperature: f64) -> PyResult<(usize, f64)> {
    let p = bintemp::predict(&logits, temperature).py()?;
    Ok((p.predicted_class, p.confidence))
}

/// Labelled logits, optionally with sample IDs.
#[pyclass(name = "Dataset", module = "bintemp", frozen)]
struct PyDataset {
    inner: LogitDataset,
}

#[pymethods]
impl PyDataset {
    #[new]
    #[pyo3(signature = (logits, labels, ids = None))]
    fn new(logits: Vec<Vec<f64>>, labels: Vec<usize>, ids: Option<Vec<String>>) -> PyResult<Self> {
        let classes = logits.first().map_or(0, Vec::len);
        if logits.iter().any(|row| row.len() != classes) {
            return Err(PyValueError::new_err("every logit row must have the same length"));
        }
        let inner = LogitDataset::new(classes, logits.concat(), labels, ids).py()?;
        Ok(PyDataset { inner })
    }

    #[staticmethod]
    fn load(path: PathBuf) -> PyResult<Self> {
        Ok(PyDataset {
            inner: io::load_logits(&path).py()?,
        })
    }

    fn save(&self, path: PathBuf) -> PyResult<()> {
        io::save_logits(&path, &self.inner).py()
    }

    fn __len__(&self) -> usize {
        self.inner.len()
    }

    fn __repr__(&self) -> String {
        format!("Dataset(samples={}, classes={})", self.inner.len(), self.inner.num_classes())
    }

    #[getter]
    fn num_classes(&self) -> usize {
        self.inner.num_classes()
    }

    #[getter]
    fn labels(&self) -> Vec<usize> {
        self.inner.labels().to_vec()
    }

    #[getter]
    fn ids(&self) -> Option<Vec<String>> {
        self.inner.ids().map(<[String]>::to_vec)
    }

    fn logits(&self, i: usize) -> PyResult<Vec<f64>> {
        if i >= self.inner.len() {
            return Err(PyValueError::new_err(format!("index {i} out of range")));
        }
        Ok(self.inner.logits(i).to_vec())
    }

    fn raw_confidences(&self) -> Vec<f64> {
        self.inner.raw_confidences()
    }

    fn raw_predictions(&self) -> Vec<(usize, f64)> {
        self.inner
            .raw_predictions()
            .into_iter()
            .map(|p| (p.predicted_class, p.confidence))
            .collect()
    }

    /// Mean negative log-likelihood at a single temperature.
    #[pyo3(signature = (temperature = 1.0))]
    fn nll(&self, temperature: f64) -> PyResult<f64> {
        metrics::nll(&self.inner, temperature, None).py()
    }

    fn accuracy(&self) -> PyResult<f64> {
        metrics::accuracy(&self.inner).py()
    }

    fn concat(&self, other: &PyDataset) -> PyResult<Self> {
        Ok(PyDataset {
            inner: self.inner.concat(&other.inner).py()?,
        })
    }
}

/// Fitted temperatures per confidence bin.
#[pyclass(name = "CalibrationMap", module = "bintemp", frozen)]
struct PyCalibrationMap {
    file: MapFile,
}

impl PyCalibrationMap {
    fn wrap(map: bintemp::CalibrationMap, num_classes: usize) -> Self {
        PyCalibrationMap {
            file: MapFile {
                map,
                provenance: Provenance {
                    num_classes,
                    inputs: vec![],
                    seed: None,
                },
            },
        }
    }

    fn check(&self, data: &LogitDataset) -> PyResult<()> {
        let expected = self.file.provenance.num_classes;
        if expected != 0 && expected != data.num_classes() {
            return Err(PyValueError::new_err(format!(
                "class-count mismatch: map was fitted on {expected} classes, input has {}",
                data.num_classes()
            )));
        }
        Ok(())
    }
}

#[pymethods]
impl PyCalibrationMap {
    /// A single-bin map applying one temperature everywhere.
    #[staticmethod]
    #[pyo3(signature = (temperature, num_classes = 0))]
    fn identity(temperature: f64, num_classes: usize) -> PyResult<Self> {
        let map = bintemp::CalibrationMap::identity_with_temperature(temperature, FitConfig::default()).py()?;
        Ok(Self::wrap(map, num_classes))
    }

    #[staticmethod]
    fn from_json(text: &str) -> PyResult<Self> {
        Ok(PyCalibrationMap {
            file: MapFile::from_json(text).py()?,
        })
    }

    fn to_json(&self) -> PyResult<String> {
        self.file.to_json().py()
    }

    #[staticmethod]
    fn load(path: PathBuf) -> PyResult<Self> {
        Ok(PyCalibrationMap {
            file: MapFile::load(&path).py()?,
        })
    }

    fn save(&self, path: PathBuf) -> PyResult<()> {
        self.file.save(&path).py()
    }

    fn __repr__(&self) -> String {
        let map = &self.file.map;
        format!("CalibrationMap(method={}, bins={})", map.method, map.n_bins())
    }

    #[getter]
    fn method(&self) -> String {
        self.file.map.method.to_string()
    }

    #[getter]
    fn edges(&self) -> Vec<f64> {
        self.file.map.spec.edges().to_vec()
    }

    #[getter]
    fn temperatures(&self) -> Vec<f64> {
        self.file.map.temperatures.clone()
    }

    #[getter]
    fn fallback_temperature(&self) -> f64 {
        self.file.map.fallback_temperature
    }

    #[getter]
    fn per_bin_counts(&self) -> Vec<usize> {
        self.file.map.per_bin_counts.clone()
    }

    fn is_fallback(&self, bin: usize) -> PyResult<bool> {
        if bin >= self.file.map.n_bins() {
            return Err(PyValueError::new_err(format!("bin {bin} out of range")));
        }
        Ok(self.file.map.is_fallback(bin))
    }

    /// `(bin_index, temperature)` for a raw confidence.
    fn lookup(&self, raw_confidence: f64) -> PyResult<(usize, f64)> {
        self.file.map.lookup(raw_confidence).py()
    }

    /// Calibrated `(predicted_class, confidence)` for every sample.
    fn apply(&self, data: &PyDataset) -> PyResult<Vec<(usize, f64)>> {
        self.check(&data.inner)?;
        Ok(self
            .file
            .map
            .apply(&data.inner)
            .into_iter()
            .map(|p| (p.predicted_class, p.confidence))
            .collect())
    }

    /// Rows of `(predicted, confidence_raw, confidence_calibrated, bin_index)`.
    fn apply_detailed(&self, data: &PyDataset) -> PyResult<Vec<(usize, f64, f64, usize)>> {
        self.check(&data.inner)?;
        Ok(self
            .file
            .map
            .apply_detailed(&data.inner)
            .into_iter()
            .map(|a| (a.raw.predicted_class, a.raw.confidence, a.calibrated.confidence, a.bin))
            .collect())
    }
}

fn fit_config(
    t_min: f64,
    t_max: f64,
    tolerance: f64,
    max_iterations: usize,
    min_bin_samples: usize,
) -> PyResult<FitConfig> {
    let config = FitConfig {
        t_min,
        t_max,
        tolerance,
        max_iterations,
        min_bin_samples,
    };
    config.validate().py()?;
    Ok(config)
}

fn bin_spec(data: &LogitDataset, binning: &str, bins: usize, threshold: f64) -> PyResult<BinSpec> {
    match binning {
        "interval" => bintemp::bins_confidence_interval(bins).py(),
        "count" => bins_by_count_with_threshold(&data.raw_confidences(), bins, threshold).py(),
        other => Err(PyValueError::new_err(format!(
            "binning must be \"interval\" or \"count\", got {other:?}"
        ))),
    }
}

/// Global temperature scaling.
#[pyfunction]
#[pyo3(signature = (validation, *, t_min = 0.05, t_max = 20.0, tolerance = 1e-6, max_iterations = 200))]
fn fit_ts(
    validation: &PyDataset,
    t_min: f64,
    t_max: f64,
    tolerance: f64,
    max_iterations: usize,
) -> PyResult<PyCalibrationMap> {
    let config = fit_config(t_min, t_max, tolerance, max_iterations, DEFAULT_MIN_BIN_SAMPLES)?;
    let map = bintemp::fit_ts(&validation.inner, &config).py()?;
    Ok(PyCalibrationMap::wrap(map, validation.inner.num_classes()))
}

/// Bin-wise temperature scaling.
#[pyfunction]
#[pyo3(signature = (
    validation, *, binning = "count", bins = 50, threshold = DEFAULT_HIGH_CONF_THRESHOLD,
    t_min = 0.05, t_max = 20.0, tolerance = 1e-6, max_iterations = 200, min_bin_samples = DEFAULT_MIN_BIN_SAMPLES,
))]
#[allow(clippy::too_many_arguments)]
fn fit_bts(
    validation: &PyDataset,
    binning: &str,
    bins: usize,
    threshold: f64,
    t_min: f64,
    t_max: f64,
    tolerance: f64,
    max_iterations: usize,
    min_bin_samples: usize,
) -> PyResult<PyCalibrationMap> {
    let config = fit_config(t_min, t_max, tolerance, max_iterations, min_bin_samples)?;
    let spec = bin_spec(&validation.inner, binning, bins, threshold)?;
    let map = bintemp::fit_bts(&validation.inner, &spec, &config).py()?;
    Ok(PyCalibrationMap::wrap(map, validation.inner.num_classes()))
}

/// BTS on the validation set joined with augmented copies of its
/// low-confidence samples (IDs `<source>__aug<k>`).
#[pyfunction]
#[pyo3(signature = (
    validation, augmented, *, cutoff = DEFAULT_AUG_CUTOFF, binning = "count", bins = 50,
    threshold = DEFAULT_HIGH_CONF_THRESHOLD, t_min = 0.05, t_max = 20.0, tolerance = 1e-6,
    max_iterations = 200, min_bin_samples = DEFAULT_MIN_BIN_SAMPLES,
))]
#[allow(clippy::too_many_arguments)]
fn fit_abts(
    validation: &PyDataset,
    augmented: &PyDataset,
    cutoff: f64,
    binning: &str,
    bins: usize,
    threshold: f64,
    t_min: f64,
    t_max: f64,
    tolerance: f64,
    max_iterations: usize,
    min_bin_samples: usize,
) -> PyResult<PyCalibrationMap> {
    let config = fit_config(t_min, t_max, tolerance, max_iterations, min_bin_samples)?;
    let selection = bintemp::select_for_augmentation(&validation.inner, cutoff).py()?;
    let spec = bin_spec(&validation.inner, binning, bins, threshold)?;
    let map = bintemp::fit_abts(&validation.inner, &augmented.inner, &selection, &spec, &config).py()?;
    Ok(PyCalibrationMap::wrap(map, validation.inner.num_classes()))
}

/// IDs of validation samples with raw confidence strictly below `cutoff`.
#[pyfunction]
#[pyo3(signature = (validation, cutoff = DEFAULT_AUG_CUTOFF))]
fn select_for_augmentation(validation: &PyDataset, cutoff: f64) -> PyResult<Vec<String>> {
    Ok(bintemp::select_for_augmentation(&validation.inner, cutoff).py()?.selected_ids)
}

/// Equal-width bin edges over [0, 1].
#[pyfunction]
fn bins_confidence_interval(n_bins: usize) -> PyResult<Vec<f64>> {
    Ok(bintemp::bins_confidence_interval(n_bins).py()?.edges().to_vec())
}

/// Equal-count bin edges, with a dedicated bin above `threshold`.
#[pyfunction]
#[pyo3(signature = (confidences, n_bins, threshold = DEFAULT_HIGH_CONF_THRESHOLD))]
fn bins_by_count(confidences: Vec<f64>, n_bins: usize, threshold: f64) -> PyResult<Vec<f64>> {
    Ok(bins_by_count_with_threshold(&confidences, n_bins, threshold).py()?.edges().to_vec())
}

fn pairs(confidences: &[f64], correct: &[bool]) -> PyResult<Vec<(f64, bool)>> {
    if confidences.len() != correct.len() {
        return Err(PyValueError::new_err("confidences and correct differ in length"));
    }
    Ok(confidences.iter().copied().zip(correct.iter().copied()).collect())
}

/// Per-bin `(lower, upper, count, accuracy, avg_confidence)`; empty bins carry `None`.
#[pyfunction]
#[pyo3(signature = (confidences, correct, n_bins = DEFAULT_ECE_BINS))]
#[allow(clippy::type_complexity)]
fn reliability(
    confidences: Vec<f64>,
    correct: Vec<bool>,
    n_bins: usize,
) -> PyResult<Vec<(f64, f64, usize, Option<f64>, Option<f64>)>> {
    let report = bintemp::reliability(&pairs(&confidences, &correct)?, n_bins).py()?;
    Ok(report
        .bins
        .iter()
        .map(|b| (b.lower, b.upper, b.count, b.accuracy, b.avg_confidence))
        .collect())
}

/// Expected calibration error over equal-width bins.
#[pyfunction]
#[pyo3(signature = (confidences, correct, n_bins = DEFAULT_ECE_BINS))]
fn ece(confidences: Vec<f64>, correct: Vec<bool>, n_bins: usize) -> PyResult<f64> {
    bintemp::reliability(&pairs(&confidences, &correct)?, n_bins).py()?.ece().py()
}

/// Synthetic logits whose true miscalibration follows `profile`
/// (`"const:T"` or `"piecewise:CUTOFF,T_LOW,T_HIGH"`).
#[pyfunction]
#[pyo3(signature = (n_samples, profile, *, n_classes = 10, logit_scale = SynthConfig::DEFAULT_LOGIT_SCALE, seed = 0))]
fn generate(n_samples: usize, profile: &str, n_classes: usize, logit_scale: f64, seed: u64) -> PyResult<PyDataset> {
    let profile: TemperatureProfile = profile.parse().py()?;
    let config = SynthConfig {
        n_samples,
        n_classes,
        logit_scale,
        profile,
        seed,
    };
    Ok(PyDataset {
        inner: bintemp::generate(&config).py()?,
    })
}

/// An 8-bit raster image, row-major with interleaved channels.
#[pyclass(name = "Image", module = "bintemp", frozen)]
struct PyImage {
    inner: RasterImage,
}

#[pymethods]
impl PyImage {
    #[new]
    fn new(width: usize, height: usize, channels: usize, pixels: Vec<u8>) -> PyResult<Self> {
        Ok(PyImage {
            inner: RasterImage::new(width, height, channels, pixels).py()?,
        })
    }

    #[staticmethod]
    fn filled(width: usize, height: usize, channels: usize, value: u8) -> PyResult<Self> {
        Ok(PyImage {
            inner: RasterImage::filled(width, height, channels, value).py()?,
        })
    }

    /// Reads a binary PPM or PGM file.
    #[staticmethod]
    fn read(path: PathBuf) -> PyResult<Self> {
        Ok(PyImage {
            inner: bintemp::pnm::read(&path).py()?,
        })
    }

    fn write(&self, path: PathBuf) -> PyResult<()> {
        bintemp::pnm::write(&path, &self.inner).py()
    }

    #[getter]
    fn width(&self) -> usize {
        self.inner.width()
    }

    #[getter]
    fn height(&self) -> usize {
        self.inner.height()
    }

    #[getter]
    fn channels(&self) -> usize {
        self.inner.channels()
    }

    #[getter]
    fn pixels<'py>(&self, py: Python<'py>) -> Bound<'py, PyBytes> {
        PyBytes::new(py, self.inner.pixels())
    }

    fn __eq__(&self, other: &PyImage) -> bool {
        self.inner == other.inner
    }

    fn __repr__(&self) -> String {
        format!(
            "Image({}x{}, channels={})",
            self.inner.width(),
            self.inner.height(),
            self.inner.channels()
        )
    }

    fn shift_x(&self, dx: i64) -> PyResult<Self> {
        Ok(PyImage {
            inner: augment::shift_x(&self.inner, dx).py()?,
        })
    }

    fn brightness(&self, delta: i64) -> Self {
        PyImage {
            inner: augment::brightness(&self.inner, delta),
        }
    }

    fn linear_contrast(&self, alpha: f64) -> PyResult<Self> {
        Ok(PyImage {
            inner: augment::linear_contrast(&self.inner, alpha).py()?,
        })
    }

    fn gaussian_blur(&self, sigma: f64) -> PyResult<Self> {
        Ok(PyImage {
            inner: augment::gaussian_blur(&self.inner, sigma).py()?,
        })
    }

    /// Applies `op` (`"shift:LO,HI"`, `"bright:LO,HI"`, `"contrast:ALPHA"` or
    /// `"blur:LO,HI"`) with a parameter drawn from `(seed, draw_index)`.
    #[pyo3(signature = (op, seed = 0, draw_index = 0))]
    fn augment(&self, op: &str, seed: u64, draw_index: u64) -> PyResult<Self> {
        let op = AugmentOp {
            kind: op.parse::<AugmentKind>().py()?,
            seed,
        };
        Ok(PyImage {
            inner: augment::apply_random(&self.inner, &op, draw_index).py()?,
        })
    }
}

#[pymodule]
#[pyo3(name = "bintemp")]
fn bintemp_module(m: &Bound<'_, PyModule>) -> PyResult<()> {
    m.add_class::<PyDataset>()?;
    m.add_class::<PyCalibrationMap>()?;
    m.add_class::<PyImage>()?;
    m.add_function(wrap_pyfunction!(softmax, m)?)?;
    m.add_function(wrap_pyfunction!(scaled_softmax, m)?)?;
    m.add_function(wrap_pyfunction!(predict, m)?)?;
    m.add_function(wrap_pyfunction!(fit_ts, m)?)?;
    m.add_function(wrap_pyfunction!(fit_bts, m)?)?;
    m.add_function(wrap_pyfunction!(fit_abts, m)?)?;
    m.add_function(wrap_pyfunction!(select_for_augmentation, m)?)?;
    m.add_function(wrap_pyfunction!(bins_confidence_interval, m)?)?;
    m.add_function(wrap_pyfunction!(bins_by_count, m)?)?;
    m.add_function(wrap_pyfunction!(reliability, m)?)?;
    m.add_function(wrap_pyfunction!(ece, m)?)?;
    m.add_function(wrap_pyfunction!(generate, m)?)?;
    m.add("__version__", env!("CARGO_PKG_VERSION"))?;
    Ok(())
}
