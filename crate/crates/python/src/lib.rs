//! Python bindings. Matrices cross the boundary as lists of rows; reports come
//! back as dicts built from their canonical JSON.

use pyo3::create_exception;
use pyo3::exceptions::PyValueError;
use pyo3::prelude::*;
use repalign_core::concentration;
use repalign_core::io;
use repalign_core::metrics::{self, AlignOptions, Metric};
use repalign_core::stitching::{self, Containment, RiskBasis, StitchMethod};
use repalign_core::synth;
use repalign_core::task;
use repalign_core::{
    kernels, AlignError, DMatrix, DVector, GramMatrix, KernelSpec, PairedDataset, Targets,
};
use serde::Serialize;

create_exception!(repalign, AlignmentError, PyValueError);

fn err(e: AlignError) -> PyErr {
    AlignmentError::new_err(format!("{}: {e}", e.code()))
}

fn matrix(rows: &[Vec<f64>]) -> PyResult<DMatrix<f64>> {
    let d = rows.first().map_or(0, Vec::len);
    if let Some(i) = rows.iter().position(|r| r.len() != d) {
        return Err(err(AlignError::RaggedRows {
            line: i + 1,
            expected: d,
            found: rows[i].len(),
        }));
    }
    Ok(DMatrix::from_row_slice(rows.len(), d, &rows.concat()))
}

fn to_rows(m: &DMatrix<f64>) -> Vec<Vec<f64>> {
    m.row_iter().map(|r| r.iter().copied().collect()).collect()
}

fn to_dict<'py, T: Serialize>(py: Python<'py>, report: &T) -> PyResult<Bound<'py, PyAny>> {
    let text = io::to_canonical_json(report).map_err(err)?;
    py.import("json")?.call_method1("loads", (text,))
}

/// Samples of one representation, `n x d`.
#[pyclass(name = "RepresentationSet", module = "repalign", from_py_object)]
#[derive(Clone)]
struct PyRepresentationSet {
    inner: repalign_core::RepresentationSet,
}

#[pymethods]
impl PyRepresentationSet {
    #[new]
    #[pyo3(signature = (rows, label = String::new()))]
    fn new(rows: Vec<Vec<f64>>, label: String) -> PyResult<Self> {
        let inner = repalign_core::RepresentationSet::new(label, matrix(&rows)?).map_err(err)?;
        Ok(Self { inner })
    }

    /// Reads a RALN file, or CSV when the name ends in `.csv`.
    #[staticmethod]
    fn load(path: &str) -> PyResult<Self> {
        Ok(Self {
            inner: io::read_repr_auto(path).map_err(err)?,
        })
    }

    fn save(&self, path: &str) -> PyResult<()> {
        if path.to_ascii_lowercase().ends_with(".csv") {
            io::write_csv_repr(&self.inner, path).map_err(err)
        } else {
            io::write_repr(&self.inner, path).map_err(err)
        }
    }

    #[getter]
    fn n(&self) -> usize {
        self.inner.sample_count()
    }

    #[getter]
    fn dim(&self) -> usize {
        self.inner.dim()
    }

    #[getter]
    fn label(&self) -> String {
        self.inner.label().to_string()
    }

    fn to_rows(&self) -> Vec<Vec<f64>> {
        to_rows(self.inner.data())
    }

    fn __repr__(&self) -> String {
        format!(
            "RepresentationSet(label={:?}, n={}, dim={})",
            self.inner.label(),
            self.n(),
            self.dim()
        )
    }
}

/// Synthetic paired Gaussian representations with known population metrics.
#[pyclass(name = "SyntheticSpec", module = "repalign", from_py_object)]
#[derive(Clone)]
struct PySyntheticSpec {
    inner: synth::SyntheticSpec,
}

#[pymethods]
impl PySyntheticSpec {
    #[new]
    #[pyo3(signature = (ambient_dim, eta1, eta2, overlap, noise_level = 0.0, seed = 0))]
    fn new(
        ambient_dim: usize,
        eta1: Vec<f64>,
        eta2: Vec<f64>,
        overlap: Vec<Vec<f64>>,
        noise_level: f64,
        seed: u64,
    ) -> PyResult<Self> {
        let cfg = io::SyntheticConfig {
            ambient_dim,
            eta1,
            eta2,
            overlap,
            noise_level,
            seed,
        };
        Ok(Self {
            inner: cfg.into_spec().map_err(err)?,
        })
    }

    /// Parses a JSON or `key = value` spec file.
    #[staticmethod]
    fn from_config(path: &str) -> PyResult<Self> {
        Ok(Self {
            inner: io::read_synthetic_config(path).map_err(err)?,
        })
    }

    fn oracle<'py>(&self, py: Python<'py>) -> PyResult<Bound<'py, PyAny>> {
        to_dict(py, &self.inner.oracle().map_err(err)?)
    }

    /// Draw number `index` of `n` samples; index 0 is the canonical draw.
    #[pyo3(signature = (n, index = 0))]
    fn generate(
        &self,
        n: usize,
        index: u64,
    ) -> PyResult<(PyRepresentationSet, PyRepresentationSet)> {
        let (p, _) = synth::generate_indexed(&self.inner, n, index).map_err(err)?;
        Ok((
            PyRepresentationSet {
                inner: p.left().clone(),
            },
            PyRepresentationSet {
                inner: p.right().clone(),
            },
        ))
    }

    #[getter]
    fn seed(&self) -> u64 {
        self.inner.seed
    }
}

fn paired(left: &PyRepresentationSet, right: &PyRepresentationSet) -> PyResult<PairedDataset> {
    PairedDataset::new(left.inner.clone(), right.inner.clone()).map_err(err)
}

fn kernel(s: &str) -> PyResult<KernelSpec> {
    s.parse().map_err(err)
}

/// Alignment report for the requested metrics (comma-separated or "all").
#[pyfunction]
#[pyo3(signature = (left, right, metrics = "all", kernel_left = "linear", kernel_right = None, center = false, skip_failures = false))]
#[allow(clippy::too_many_arguments)]
fn align<'py>(
    py: Python<'py>,
    left: &PyRepresentationSet,
    right: &PyRepresentationSet,
    metrics: &str,
    kernel_left: &str,
    kernel_right: Option<&str>,
    center: bool,
    skip_failures: bool,
) -> PyResult<Bound<'py, PyAny>> {
    let p = paired(left, right)?;
    let opts = AlignOptions {
        metrics: Metric::parse_list(metrics).map_err(err)?,
        kernel_left: kernel(kernel_left)?,
        kernel_right: kernel(kernel_right.unwrap_or(kernel_left))?,
        center,
        skip_failures,
        ..AlignOptions::default()
    };
    let report = py.detach(|| metrics::align(&p, &opts)).map_err(err)?;
    to_dict(py, &report)
}

fn gram_of(k: Vec<Vec<f64>>) -> PyResult<GramMatrix> {
    GramMatrix::from_precomputed(matrix(&k)?).map_err(err)
}

/// Kernel target alignment of a Gram matrix with targets `y`.
#[pyfunction]
fn kta(gram: Vec<Vec<f64>>, y: Vec<f64>) -> PyResult<f64> {
    task::kta(&gram_of(gram)?, &DVector::from_vec(y)).map_err(err)
}

/// KARE over a ridge grid.
#[pyfunction]
fn kare(gram: Vec<Vec<f64>>, y: Vec<f64>, lambdas: Vec<f64>) -> PyResult<Vec<f64>> {
    let solver = task::KareSolver::new(&gram_of(gram)?, &DVector::from_vec(y)).map_err(err)?;
    solver.sweep(&lambdas).map_err(err)
}

/// Gram matrix of a representation as a list of rows.
#[pyfunction]
#[pyo3(signature = (repr, kernel_spec = "linear"))]
fn gram(repr: &PyRepresentationSet, kernel_spec: &str) -> PyResult<Vec<Vec<f64>>> {
    let g = kernels::gram(&repr.inner, &kernel(kernel_spec)?).map_err(err)?;
    Ok(to_rows(g.entries()))
}

fn parse_method(method: &str) -> PyResult<StitchMethod> {
    match method {
        "ols" => Ok(StitchMethod::Ols),
        m => m
            .strip_prefix("ridge:")
            .and_then(|l| l.parse().ok())
            .map(StitchMethod::Ridge)
            .ok_or_else(|| PyValueError::new_err(format!("unknown method '{m}'"))),
    }
}

/// Stitching report. `mode` is one of fit-only, lemma2, thm2 (least-squares
/// linear right head), lower, sandwich.
#[pyfunction]
#[pyo3(signature = (left, right, targets = None, mode = "fit-only", method = "ols", certified = false))]
fn stitch<'py>(
    py: Python<'py>,
    left: &PyRepresentationSet,
    right: &PyRepresentationSet,
    targets: Option<Vec<Vec<f64>>>,
    mode: &str,
    method: &str,
    certified: bool,
) -> PyResult<Bound<'py, PyAny>> {
    let mut p = paired(left, right)?;
    if let Some(t) = targets {
        p = p.with_targets(Targets::Real(matrix(&t)?)).map_err(err)?;
    }
    let method = parse_method(method)?;
    let containment = if certified {
        Containment::Certified
    } else {
        Containment::Unknown
    };
    let basis = RiskBasis::InSample;
    let report = py
        .detach(|| match mode {
            "fit-only" => stitching::fit_only(&p, method, basis),
            "lemma2" => stitching::check_lemma_linear_heads(&p, None),
            "thm2" => {
                let y = p
                    .targets()
                    .ok_or_else(|| AlignError::InvalidParameter("thm2 needs targets".into()))?
                    .to_matrix();
                let (w, _, _) = stitching::fit_linear_map(p.right().data(), &y, StitchMethod::Ols)?;
                stitching::check_theorem2_bound(&p, &stitching::HeadFunction::linear(w)?, basis)
            }
            "lower" => stitching::check_lower_bound(
                &p,
                None,
                containment,
                &stitching::LowerBoundOptions::default(),
            ),
            "sandwich" => stitching::check_theorem3_sandwich(&p, containment, basis),
            other => Err(AlignError::InvalidParameter(format!(
                "unknown mode '{other}'"
            ))),
        })
        .map_err(err)?;
    to_dict(py, &report)
}

/// Concentration sweep over sample sizes on a synthetic spec.
#[pyfunction]
#[pyo3(signature = (spec, ns, trials = 1000, delta = 0.05))]
fn concentrate<'py>(
    py: Python<'py>,
    spec: &PySyntheticSpec,
    ns: Vec<usize>,
    trials: usize,
    delta: f64,
) -> PyResult<Bound<'py, PyAny>> {
    let sweep = py
        .detach(|| concentration::run_sweep(&spec.inner, &ns, trials, delta))
        .map_err(err)?;
    to_dict(py, &sweep)
}

#[pymodule]
fn repalign(m: &Bound<'_, PyModule>) -> PyResult<()> {
    m.add("AlignmentError", m.py().get_type::<AlignmentError>())?;
    m.add_class::<PyRepresentationSet>()?;
    m.add_class::<PySyntheticSpec>()?;
    m.add_function(wrap_pyfunction!(align, m)?)?;
    m.add_function(wrap_pyfunction!(gram, m)?)?;
    m.add_function(wrap_pyfunction!(kta, m)?)?;
    m.add_function(wrap_pyfunction!(kare, m)?)?;
    m.add_function(wrap_pyfunction!(stitch, m)?)?;
    m.add_function(wrap_pyfunction!(concentrate, m)?)?;
    Ok(())
}
