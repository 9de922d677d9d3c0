//! Kernel evaluation, Gram assembly, double centering and symmetric
//! eigendecomposition.
//!
//! Every Gram entry is computed by a fixed sequential loop over feature
//! coordinates, and only the upper triangle is evaluated before mirroring, so
//! results are exactly symmetric and independent of the rayon thread count.

use std::fmt;
use std::str::FromStr;

use nalgebra::DMatrix;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{AlignError, Result};
use crate::linalg;
use crate::types::{GramMatrix, RepresentationSet, Spectrum};

/// RBF bandwidth: explicit `gamma` in `exp(-gamma * |x - x'|^2)` or the median heuristic.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Bandwidth {
    Gamma(f64),
    Median,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum KernelKind {
    Linear,
    Rbf(Bandwidth),
    /// The representation data already is the `n x n` kernel matrix.
    Precomputed,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct KernelSpec {
    pub kind: KernelKind,
    /// Rescale so that `K(x, x) = 1`.
    pub normalize_diagonal: bool,
}

impl KernelSpec {
    pub fn linear() -> Self {
        Self {
            kind: KernelKind::Linear,
            normalize_diagonal: false,
        }
    }

    pub fn rbf(gamma: f64) -> Self {
        Self {
            kind: KernelKind::Rbf(Bandwidth::Gamma(gamma)),
            normalize_diagonal: false,
        }
    }

    pub fn rbf_median() -> Self {
        Self {
            kind: KernelKind::Rbf(Bandwidth::Median),
            normalize_diagonal: false,
        }
    }

    pub fn precomputed() -> Self {
        Self {
            kind: KernelKind::Precomputed,
            normalize_diagonal: false,
        }
    }

    pub fn normalized(mut self) -> Self {
        self.normalize_diagonal = true;
        self
    }

    pub fn validate(&self) -> Result<()> {
        if let KernelKind::Rbf(Bandwidth::Gamma(g)) = self.kind {
            if !(g.is_finite() && g > 0.0) {
                return Err(AlignError::InvalidParameter(format!(
                    "rbf gamma must be positive and finite, got {g}"
                )));
            }
        }
        Ok(())
    }
}

impl fmt::Display for KernelSpec {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self.kind {
            KernelKind::Linear => write!(f, "linear")?,
            KernelKind::Rbf(Bandwidth::Gamma(g)) => write!(f, "rbf:{g}")?,
            KernelKind::Rbf(Bandwidth::Median) => write!(f, "rbf:median")?,
            KernelKind::Precomputed => write!(f, "precomputed")?,
        }
        if self.normalize_diagonal {
            write!(f, "+normalized")?;
        }
        Ok(())
    }
}

impl FromStr for KernelSpec {
    type Err = AlignError;

    /// Accepts `linear`, `rbf:<gamma>`, `rbf:median`, `precomputed`, each
    /// optionally followed by `+normalized`.
    fn from_str(s: &str) -> Result<Self> {
        let s = s.trim();
        let (body, normalize_diagonal) = match s.strip_suffix("+normalized") {
            Some(b) => (b, true),
            None => (s, false),
        };
        let kind = match body {
            "linear" => KernelKind::Linear,
            "precomputed" => KernelKind::Precomputed,
            "rbf:median" | "rbf" => KernelKind::Rbf(Bandwidth::Median),
            other => match other.strip_prefix("rbf:") {
                Some(g) => KernelKind::Rbf(Bandwidth::Gamma(
                    g.parse()
                        .map_err(|_| AlignError::ParseError(format!("bad rbf gamma '{g}'")))?,
                )),
                None => {
                    return Err(AlignError::ParseError(format!("unknown kernel '{other}'")));
                }
            },
        };
        let spec = KernelSpec {
            kind,
            normalize_diagonal,
        };
        spec.validate()?;
        Ok(spec)
    }
}

/// A kernel with its bandwidth fixed, ready for pointwise evaluation.
#[derive(Debug, Clone, Copy, PartialEq)]
pub(crate) enum ResolvedKernel {
    Linear,
    Rbf { gamma: f64 },
}

impl ResolvedKernel {
    fn eval(&self, a: &[f64], b: &[f64]) -> f64 {
        match *self {
            ResolvedKernel::Linear => a.iter().zip(b).map(|(x, y)| x * y).sum(),
            ResolvedKernel::Rbf { gamma } => {
                let sq: f64 = a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum();
                (-gamma * sq).exp()
            }
        }
    }
}

fn rows_of(m: &DMatrix<f64>) -> Vec<Vec<f64>> {
    m.row_iter().map(|r| r.iter().copied().collect()).collect()
}

fn unit_rows(m: &DMatrix<f64>) -> Result<DMatrix<f64>> {
    let mut out = m.clone();
    for (i, mut row) in out.row_iter_mut().enumerate() {
        let norm = row.norm();
        if norm == 0.0 {
            return Err(AlignError::ZeroRowNormalization { row: i });
        }
        row /= norm;
    }
    Ok(out)
}

/// Resolves bandwidth and row normalization for vector-valued data.
pub(crate) fn resolve(
    data: &DMatrix<f64>,
    spec: &KernelSpec,
) -> Result<(ResolvedKernel, DMatrix<f64>)> {
    spec.validate()?;
    match spec.kind {
        KernelKind::Linear => {
            let rows = if spec.normalize_diagonal {
                unit_rows(data)?
            } else {
                data.clone()
            };
            Ok((ResolvedKernel::Linear, rows))
        }
        KernelKind::Rbf(bw) => {
            let gamma = match bw {
                Bandwidth::Gamma(g) => g,
                Bandwidth::Median => median_gamma_of(data)?,
            };
            Ok((ResolvedKernel::Rbf { gamma }, data.clone()))
        }
        KernelKind::Precomputed => Err(AlignError::InvalidParameter(
            "precomputed kernels cannot be evaluated on feature vectors".into(),
        )),
    }
}

/// Symmetric kernel matrix of one sample under a resolved kernel.
pub(crate) fn assemble(data: &DMatrix<f64>, kernel: ResolvedKernel) -> DMatrix<f64> {
    let rows = rows_of(data);
    let n = rows.len();
    let upper: Vec<Vec<f64>> = (0..n)
        .into_par_iter()
        .map(|i| (i..n).map(|j| kernel.eval(&rows[i], &rows[j])).collect())
        .collect();
    let mut k = DMatrix::zeros(n, n);
    for (i, row) in upper.iter().enumerate() {
        for (off, &v) in row.iter().enumerate() {
            k[(i, i + off)] = v;
            k[(i + off, i)] = v;
        }
    }
    k
}

/// Rectangular kernel matrix between two samples.
pub(crate) fn assemble_cross(
    a: &DMatrix<f64>,
    b: &DMatrix<f64>,
    kernel: ResolvedKernel,
) -> DMatrix<f64> {
    let ra = rows_of(a);
    let rb = rows_of(b);
    let rows: Vec<Vec<f64>> = ra
        .par_iter()
        .map(|x| rb.iter().map(|y| kernel.eval(x, y)).collect())
        .collect();
    DMatrix::from_fn(ra.len(), rb.len(), |i, j| rows[i][j])
}

/// Gram matrix `K[i][j] = k(f_i, f_j)` of a representation set.
pub fn gram(f: &RepresentationSet, spec: &KernelSpec) -> Result<GramMatrix> {
    if spec.kind == KernelKind::Precomputed {
        let mut g = GramMatrix::from_precomputed(f.data().clone())?;
        if spec.normalize_diagonal {
            g = normalize_precomputed(&g)?;
        }
        return Ok(g);
    }
    let (kernel, rows) = resolve(f.data(), spec)?;
    Ok(GramMatrix::from_trusted(assemble(&rows, kernel), false))
}

fn normalize_precomputed(g: &GramMatrix) -> Result<GramMatrix> {
    let k = g.entries();
    let n = k.nrows();
    let diag: Vec<f64> = (0..n).map(|i| k[(i, i)]).collect();
    if let Some(i) = diag.iter().position(|&d| d <= 0.0) {
        return Err(AlignError::ZeroRowNormalization { row: i });
    }
    let mut out = DMatrix::from_fn(n, n, |i, j| k[(i, j)] / (diag[i] * diag[j]).sqrt());
    for i in 0..n {
        out[(i, i)] = 1.0;
    }
    Ok(GramMatrix::from_trusted(out, false))
}

/// Double centering `H K H` with `H = I - 11ᵀ/n`.
pub fn center(k: &GramMatrix) -> GramMatrix {
    GramMatrix::from_trusted(center_matrix(k.entries()), true)
}

/// `H K H` for a symmetric matrix, computed entrywise as
/// `K_ij - mean_i - mean_j + grand_mean`, which keeps exact symmetry.
pub(crate) fn center_matrix(k: &DMatrix<f64>) -> DMatrix<f64> {
    let n = k.nrows();
    let nf = n as f64;
    let row_means: Vec<f64> = (0..n).map(|i| k.row(i).sum() / nf).collect();
    let grand = row_means.iter().sum::<f64>() / nf;
    DMatrix::from_fn(n, n, |i, j| k[(i, j)] - row_means[i] - row_means[j] + grand)
}

/// Descending, clipped eigendecomposition of a (near-)symmetric matrix.
pub fn spectrum(k: &DMatrix<f64>) -> Result<Spectrum> {
    let sym = linalg::symmetrized(k)?;
    let (mut values, vectors) = linalg::sym_eigen_desc(&sym);
    linalg::clip_eigenvalues(&mut values);
    Ok(Spectrum {
        eigenvalues: values,
        eigenvectors: vectors,
    })
}

/// `1 / (2 * median squared pairwise distance)` over distinct pairs.
pub fn median_heuristic_gamma(f: &RepresentationSet) -> Result<f64> {
    median_gamma_of(f.data())
}

pub(crate) fn median_gamma_of(data: &DMatrix<f64>) -> Result<f64> {
    let rows = rows_of(data);
    let n = rows.len();
    if n < 2 {
        return Err(AlignError::TooFewSamples { got: n, min: 2 });
    }
    let mut dists = Vec::with_capacity(n * (n - 1) / 2);
    for i in 0..n {
        for j in (i + 1)..n {
            dists.push(
                rows[i]
                    .iter()
                    .zip(&rows[j])
                    .map(|(a, b)| (a - b) * (a - b))
                    .sum::<f64>(),
            );
        }
    }
    dists.sort_by(f64::total_cmp);
    let m = dists.len();
    let median = if m % 2 == 1 {
        dists[m / 2]
    } else {
        0.5 * (dists[m / 2 - 1] + dists[m / 2])
    };
    if median <= 0.0 {
        return Err(AlignError::DegenerateData(
            "median pairwise squared distance is zero".into(),
        ));
    }
    Ok(1.0 / (2.0 * median))
}

/// Second-moment matrix `fᵀf / n`.
pub fn second_moment(f: &DMatrix<f64>) -> DMatrix<f64> {
    f.transpose() * f / f.nrows() as f64
}
