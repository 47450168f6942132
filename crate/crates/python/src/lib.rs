//! Python bindings: `import mcfse`.

use std::path::PathBuf;

use pyo3::exceptions::{PyIOError, PyValueError};
use pyo3::prelude::*;
use pyo3::types::{PyBytes, PyDict, PyList, PyTuple};

use mcfse::conceal::{conceal_sequence, Algorithm, ConcealConfig};
use mcfse::harness::{self, ExperimentConfig, SynthSpec};
use mcfse::loss::{self, IsolatedPattern, LossBlock};
use mcfse::video_io::{self, ChromaMode, VideoIoError};

fn value_err(e: impl std::fmt::Display) -> PyErr {
    PyValueError::new_err(e.to_string())
}

fn video_err(e: VideoIoError) -> PyErr {
    match e {
        VideoIoError::Io(io) => PyIOError::new_err(io.to_string()),
        other => value_err(other),
    }
}

/// Luma-only video sequence of 8-bit samples.
#[pyclass(name = "Sequence", module = "mcfse", from_py_object)]
#[derive(Clone)]
struct PySequence {
    inner: video_io::Sequence,
}

#[pymethods]
impl PySequence {
    /// `frames` is a list of `width * height` byte strings.
    #[new]
    fn new(width: usize, height: usize, frames: Vec<Vec<u8>>) -> PyResult<Self> {
        let inner = video_io::Sequence::from_frames(width, height, frames).map_err(value_err)?;
        Ok(PySequence { inner })
    }

    #[staticmethod]
    fn filled(width: usize, height: usize, count: usize, value: u8) -> Self {
        PySequence {
            inner: video_io::Sequence::filled(width, height, count, value),
        }
    }

    /// Synthetic sequence from a spec such as `"translate:dx=8,frames=9"`.
    #[staticmethod]
    fn synth(spec: &str) -> PyResult<Self> {
        let spec: SynthSpec = spec.parse().map_err(value_err)?;
        Ok(PySequence {
            inner: spec.generate(),
        })
    }

    #[staticmethod]
    fn load_y4m(path: PathBuf) -> PyResult<Self> {
        Ok(PySequence {
            inner: video_io::load_y4m(path).map_err(video_err)?,
        })
    }

    #[staticmethod]
    #[pyo3(signature = (path, width, height, chroma = "420"))]
    fn load_yuv(path: PathBuf, width: usize, height: usize, chroma: &str) -> PyResult<Self> {
        let mode: ChromaMode = chroma.parse().map_err(value_err)?;
        Ok(PySequence {
            inner: video_io::load_raw_yuv(path, width, height, mode).map_err(video_err)?,
        })
    }

    fn write_y4m(&self, path: PathBuf) -> PyResult<()> {
        video_io::write_y4m(&self.inner, path).map_err(video_err)
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
    fn frame_count(&self) -> usize {
        self.inner.frame_count()
    }

    fn frame<'py>(&self, py: Python<'py>, t: usize) -> PyResult<Bound<'py, PyBytes>> {
        if t >= self.inner.frame_count() {
            return Err(value_err(format!("frame {t} out of range")));
        }
        Ok(PyBytes::new(py, self.inner.frame(t)))
    }

    fn sample(&self, x: usize, y: usize, t: usize) -> PyResult<u8> {
        self.inner
            .get(x as i64, y as i64, t)
            .filter(|_| t < self.inner.frame_count())
            .ok_or_else(|| value_err(format!("({x}, {y}, {t}) out of range")))
    }

    fn __len__(&self) -> usize {
        self.inner.frame_count()
    }

    fn __eq__(&self, other: &Self) -> bool {
        self.inner == other.inner
    }

    fn __repr__(&self) -> String {
        format!(
            "Sequence({}x{}, {} frames)",
            self.inner.width(),
            self.inner.height(),
            self.inner.frame_count()
        )
    }
}

/// Lost blocks of a sequence, as `(frame, x0, y0, size)` tuples.
#[pyclass(name = "LossMask", module = "mcfse", from_py_object)]
#[derive(Clone)]
struct PyLossMask {
    inner: loss::LossMask,
}

#[pymethods]
impl PyLossMask {
    #[new]
    #[pyo3(signature = (width, height, frame_count, blocks = Vec::new()))]
    fn new(
        width: usize,
        height: usize,
        frame_count: usize,
        blocks: Vec<(usize, usize, usize, usize)>,
    ) -> PyResult<Self> {
        let blocks = blocks
            .into_iter()
            .map(|(f, x, y, s)| LossBlock::new(f, x, y, s));
        Ok(PyLossMask {
            inner: loss::LossMask::from_blocks(width, height, frame_count, blocks)
                .map_err(value_err)?,
        })
    }

    /// Regular grid of isolated blocks in each listed frame (0-based).
    #[staticmethod]
    #[pyo3(signature = (width, height, frame_count, frames, block_size = 16, stride = 64, offset = 16))]
    fn isolated(
        width: usize,
        height: usize,
        frame_count: usize,
        frames: Vec<usize>,
        block_size: usize,
        stride: usize,
        offset: usize,
    ) -> PyResult<Self> {
        let pattern = IsolatedPattern {
            frames,
            block_size,
            stride_x: stride,
            stride_y: stride,
            offset,
        };
        Ok(PyLossMask {
            inner: loss::build_isolated_pattern(width, height, frame_count, &pattern)
                .map_err(value_err)?,
        })
    }

    #[staticmethod]
    fn load(path: PathBuf, width: usize, height: usize, frame_count: usize) -> PyResult<Self> {
        Ok(PyLossMask {
            inner: loss::load_pattern(path, width, height, frame_count).map_err(value_err)?,
        })
    }

    #[getter]
    fn blocks(&self) -> Vec<(usize, usize, usize, usize)> {
        self.inner
            .blocks()
            .iter()
            .map(|b| (b.frame, b.x0, b.y0, b.size))
            .collect()
    }

    fn is_available(&self, x: usize, y: usize, t: usize) -> bool {
        self.inner.available_at(x as i64, y as i64, t)
    }

    fn lost_count(&self) -> usize {
        self.inner.lost_count()
    }

    fn to_text(&self) -> String {
        loss::format_pattern(&self.inner)
    }

    fn __repr__(&self) -> String {
        format!("LossMask({} blocks)", self.inner.blocks().len())
    }
}

fn setting_text(value: &Bound<'_, PyAny>) -> PyResult<String> {
    if value.is_instance_of::<PyList>() || value.is_instance_of::<PyTuple>() {
        let parts: Vec<String> = value
            .try_iter()?
            .map(|v| v.and_then(|v| setting_text(&v)))
            .collect::<PyResult<_>>()?;
        return Ok(parts.join(","));
    }
    Ok(value.str()?.to_string())
}

/// Concealment settings. Keyword names follow the experiment config keys
/// (`n_prev`, `n_next`, `border`, `band_width`, `d_max`, `t_abs`, `t_rel`,
/// `ebma_boundary`, `fft`, `rho`, `gamma`, `iterations`).
#[pyclass(name = "ConcealConfig", module = "mcfse", from_py_object)]
#[derive(Clone)]
struct PyConcealConfig {
    inner: ConcealConfig,
}

#[pymethods]
impl PyConcealConfig {
    #[new]
    #[pyo3(signature = (algorithm = "mcfse", **settings))]
    fn new(algorithm: &str, settings: Option<&Bound<'_, PyDict>>) -> PyResult<Self> {
        let mut cfg = ExperimentConfig::default();
        if let Some(settings) = settings {
            for (k, v) in settings.iter() {
                cfg.set(&k.str()?.to_string(), &setting_text(&v)?)
                    .map_err(value_err)?;
            }
        }
        let algorithm: Algorithm = algorithm.parse().map_err(value_err)?;
        let inner = cfg.conceal.with_algorithm(algorithm);
        inner.validate().map_err(value_err)?;
        Ok(PyConcealConfig { inner })
    }

    #[getter]
    fn algorithm(&self) -> &'static str {
        self.inner.algorithm.name()
    }

    #[getter]
    fn n_prev(&self) -> usize {
        self.inner.n_prev
    }

    #[getter]
    fn n_next(&self) -> usize {
        self.inner.n_next
    }

    #[getter]
    fn iterations(&self) -> usize {
        self.inner.fse.max_iterations
    }

    fn __repr__(&self) -> String {
        format!("{:?}", self.inner)
    }
}

#[pyfunction]
fn apply_loss(seq: &PySequence, mask: &PyLossMask) -> PyResult<PySequence> {
    Ok(PySequence {
        inner: loss::apply_loss(&seq.inner, &mask.inner).map_err(value_err)?,
    })
}

/// Conceals every lost block. Returns the concealed sequence and one dict
/// per block.
#[pyfunction]
#[pyo3(signature = (seq, mask, config = None))]
fn conceal<'py>(
    py: Python<'py>,
    seq: &PySequence,
    mask: &PyLossMask,
    config: Option<&PyConcealConfig>,
) -> PyResult<(PySequence, Vec<Bound<'py, PyDict>>)> {
    let config = config.map(|c| c.inner.clone()).unwrap_or_default();
    let run = py
        .detach(|| conceal_sequence(&seq.inner, &mask.inner, &config))
        .map_err(value_err)?;
    let mut blocks = Vec::with_capacity(run.blocks.len());
    for b in &run.blocks {
        let d = PyDict::new(py);
        d.set_item("frame", b.block.frame)?;
        d.set_item("x0", b.block.x0)?;
        d.set_item("y0", b.block.y0)?;
        d.set_item("size", b.block.size)?;
        d.set_item("error", b.error.clone())?;
        d.set_item("aligned", b.aligned)?;
        d.set_item("fallback", b.fallback.clone())?;
        d.set_item("energy_non_increasing", b.energy_non_increasing)?;
        d.set_item("iterations", b.iterations)?;
        blocks.push(d);
    }
    Ok((
        PySequence {
            inner: run.sequence,
        },
        blocks,
    ))
}

/// PSNR in dB pooled over all lost pixels; `inf` when they match exactly.
#[pyfunction]
fn psnr(original: &PySequence, concealed: &PySequence, mask: &PyLossMask) -> PyResult<f64> {
    harness::psnr_lost_pixels(&original.inner, &concealed.inner, &mask.inner)
        .map(|p| p.db())
        .map_err(value_err)
}

/// Runs an experiment from an optional config file plus `key=value`
/// overrides and returns one dict per (sequence, algorithm).
#[pyfunction]
#[pyo3(signature = (config = None, **overrides))]
fn run_experiment<'py>(
    py: Python<'py>,
    config: Option<PathBuf>,
    overrides: Option<&Bound<'py, PyDict>>,
) -> PyResult<Vec<Bound<'py, PyDict>>> {
    let mut cfg = match config {
        Some(p) => ExperimentConfig::load(p).map_err(value_err)?,
        None => ExperimentConfig::default(),
    };
    if let Some(o) = overrides {
        for (k, v) in o.iter() {
            let key = k.str()?.to_string();
            let text = if key == "sequences" && v.is_instance_of::<PyList>() {
                v.try_iter()?
                    .map(|s| s.and_then(|s| Ok(s.str()?.to_string())))
                    .collect::<PyResult<Vec<_>>>()?
                    .join(";")
            } else {
                setting_text(&v)?
            };
            cfg.set(&key, &text).map_err(value_err)?;
        }
    }
    let report = py
        .detach(|| harness::run_experiment(&cfg))
        .map_err(value_err)?;
    let mut rows = Vec::new();
    for c in &report.cells {
        let d = PyDict::new(py);
        d.set_item("sequence", &c.sequence)?;
        d.set_item("algorithm", c.algorithm.name())?;
        d.set_item("psnr_db", c.psnr.db())?;
        d.set_item("mse", c.psnr.mse())?;
        d.set_item("lost_pixels", c.psnr.count)?;
        d.set_item("blocks", c.blocks.len())?;
        d.set_item("failed_blocks", c.failed_blocks())?;
        d.set_item("seconds", c.seconds)?;
        rows.push(d);
    }
    Ok(rows)
}

#[pymodule]
#[pyo3(name = "mcfse")]
fn mcfse_module(m: &Bound<'_, PyModule>) -> PyResult<()> {
    m.add_class::<PySequence>()?;
    m.add_class::<PyLossMask>()?;
    m.add_class::<PyConcealConfig>()?;
    m.add_function(wrap_pyfunction!(apply_loss, m)?)?;
    m.add_function(wrap_pyfunction!(conceal, m)?)?;
    m.add_function(wrap_pyfunction!(psnr, m)?)?;
    m.add_function(wrap_pyfunction!(run_experiment, m)?)?;
    m.add("ALGORITHMS", Algorithm::ALL.map(|a| a.key()).to_vec())?;
    Ok(())
}
