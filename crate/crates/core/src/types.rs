//! Domain types shared by every module, plus the sample-pairing contract.
//!
//! All types are immutable once constructed. Pairing between the two sides of
//! a [`PairedDataset`] is positional: row `i` of the left set and row `i` of
//! the right set are two views of the same underlying sample.

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::error::{AlignError, Result};
use crate::linalg;

/// `n x d` matrix of per-sample feature vectors produced by one representation.
#[derive(Debug, Clone, PartialEq)]
pub struct RepresentationSet {
    data: DMatrix<f64>,
    label: String,
}

impl RepresentationSet {
    pub fn new(label: impl Into<String>, data: DMatrix<f64>) -> Result<Self> {
        let label = label.into();
        check_finite(&data, &label)?;
        if data.nrows() < 2 {
            return Err(AlignError::TooFewSamples {
                got: data.nrows(),
                min: 2,
            });
        }
        if data.ncols() == 0 {
            return Err(AlignError::DimensionMismatch(format!(
                "representation '{label}' has zero feature dimensions"
            )));
        }
        Ok(Self { data, label })
    }

    /// Builds from row vectors.
    pub fn from_rows(label: impl Into<String>, rows: &[Vec<f64>]) -> Result<Self> {
        let data = matrix_from_rows(rows)?;
        Self::new(label, data)
    }

    pub fn data(&self) -> &DMatrix<f64> {
        &self.data
    }

    pub fn sample_count(&self) -> usize {
        self.data.nrows()
    }

    pub fn dim(&self) -> usize {
        self.data.ncols()
    }

    pub fn label(&self) -> &str {
        &self.label
    }

    /// Keeps only the listed rows, in the given order.
    pub fn select_rows(&self, rows: &[usize]) -> Result<Self> {
        let data = DMatrix::from_fn(rows.len(), self.dim(), |i, j| self.data[(rows[i], j)]);
        Self::new(self.label.clone(), data)
    }

    pub fn into_data(self) -> DMatrix<f64> {
        self.data
    }
}

/// Task outputs attached to a paired dataset.
#[derive(Debug, Clone, PartialEq)]
pub enum Targets {
    /// `n x t` real targets.
    Real(DMatrix<f64>),
    /// Integer class labels, one per sample.
    Labels(Vec<i64>),
}

impl Targets {
    pub fn len(&self) -> usize {
        match self {
            Targets::Real(m) => m.nrows(),
            Targets::Labels(l) => l.len(),
        }
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    /// Output dimension `t` (1 for labels).
    pub fn dim(&self) -> usize {
        match self {
            Targets::Real(m) => m.ncols(),
            Targets::Labels(_) => 1,
        }
    }

    /// Targets as an `n x t` real matrix.
    pub fn to_matrix(&self) -> DMatrix<f64> {
        match self {
            Targets::Real(m) => m.clone(),
            Targets::Labels(l) => DMatrix::from_iterator(l.len(), 1, l.iter().map(|&v| v as f64)),
        }
    }

    /// First target column as a vector.
    pub fn first_column(&self) -> DVector<f64> {
        self.to_matrix().column(0).into_owned()
    }

    fn select_rows(&self, rows: &[usize]) -> Self {
        match self {
            Targets::Real(m) => Targets::Real(DMatrix::from_fn(rows.len(), m.ncols(), |i, j| {
                m[(rows[i], j)]
            })),
            Targets::Labels(l) => Targets::Labels(rows.iter().map(|&r| l[r]).collect()),
        }
    }
}

/// Samples drawn from the joint distribution of two representations.
#[derive(Debug, Clone, PartialEq)]
pub struct PairedDataset {
    left: RepresentationSet,
    right: RepresentationSet,
    targets: Option<Targets>,
}

impl PairedDataset {
    pub fn new(left: RepresentationSet, right: RepresentationSet) -> Result<Self> {
        validate_paired(left.data(), right.data(), None)?;
        Ok(Self {
            left,
            right,
            targets: None,
        })
    }

    pub fn with_targets(mut self, targets: Targets) -> Result<Self> {
        validate_paired(self.left.data(), self.right.data(), Some(&targets))?;
        self.targets = Some(targets);
        Ok(self)
    }

    pub fn left(&self) -> &RepresentationSet {
        &self.left
    }

    pub fn right(&self) -> &RepresentationSet {
        &self.right
    }

    pub fn targets(&self) -> Option<&Targets> {
        self.targets.as_ref()
    }

    pub fn sample_count(&self) -> usize {
        self.left.sample_count()
    }

    /// Row subset applied to both sides and the targets.
    pub fn select_rows(&self, rows: &[usize]) -> Result<Self> {
        let mut out = Self::new(self.left.select_rows(rows)?, self.right.select_rows(rows)?)?;
        if let Some(t) = &self.targets {
            out = out.with_targets(t.select_rows(rows))?;
        }
        Ok(out)
    }

    /// Same samples with left and right exchanged.
    pub fn swapped(&self) -> Self {
        Self {
            left: self.right.clone(),
            right: self.left.clone(),
            targets: self.targets.clone(),
        }
    }
}

/// Checks every invariant of a paired dataset on raw matrices.
pub fn validate_paired(
    left: &DMatrix<f64>,
    right: &DMatrix<f64>,
    targets: Option<&Targets>,
) -> Result<()> {
    check_finite(left, "left")?;
    check_finite(right, "right")?;
    if left.nrows() != right.nrows() {
        return Err(AlignError::MismatchedSampleCount {
            left: left.nrows(),
            right: right.nrows(),
        });
    }
    if left.nrows() < 2 {
        return Err(AlignError::TooFewSamples {
            got: left.nrows(),
            min: 2,
        });
    }
    if left.ncols() == 0 || right.ncols() == 0 {
        return Err(AlignError::DimensionMismatch(
            "feature dimension must be at least 1".into(),
        ));
    }
    if let Some(t) = targets {
        if t.len() != left.nrows() {
            return Err(AlignError::MismatchedSampleCount {
                left: left.nrows(),
                right: t.len(),
            });
        }
        if let Targets::Real(m) = t {
            check_finite(m, "targets")?;
        }
    }
    Ok(())
}

fn check_finite(m: &DMatrix<f64>, what: &str) -> Result<()> {
    for i in 0..m.nrows() {
        for j in 0..m.ncols() {
            if !m[(i, j)].is_finite() {
                return Err(AlignError::NonFiniteEntry {
                    what: what.to_string(),
                    row: i,
                    col: j,
                });
            }
        }
    }
    Ok(())
}

pub(crate) fn matrix_from_rows(rows: &[Vec<f64>]) -> Result<DMatrix<f64>> {
    let ncols = rows.first().map_or(0, Vec::len);
    for (i, r) in rows.iter().enumerate() {
        if r.len() != ncols {
            return Err(AlignError::RaggedRows {
                line: i + 1,
                expected: ncols,
                found: r.len(),
            });
        }
    }
    Ok(DMatrix::from_fn(rows.len(), ncols, |i, j| rows[i][j]))
}

/// `n x n` kernel matrix over one sample.
#[derive(Debug, Clone, PartialEq)]
pub struct GramMatrix {
    entries: DMatrix<f64>,
    centered: bool,
}

impl GramMatrix {
    /// Wraps a matrix produced by trusted kernel code; only symmetry is enforced.
    pub(crate) fn from_trusted(entries: DMatrix<f64>, centered: bool) -> Self {
        debug_assert_eq!(entries.nrows(), entries.ncols());
        Self { entries, centered }
    }

    /// Validates a user-supplied kernel matrix: square, finite, symmetric and PSD.
    /// Small asymmetries are symmetrized away. Costs one eigendecomposition.
    pub fn from_precomputed(entries: DMatrix<f64>) -> Result<Self> {
        check_finite(&entries, "kernel")?;
        let sym = linalg::symmetrized(&entries)?;
        let (values, _) = linalg::sym_eigen_desc(&sym);
        let top = values.iter().copied().fold(0.0_f64, f64::max);
        let bottom = values.iter().copied().fold(f64::INFINITY, f64::min);
        if bottom < -1e-10 * top.max(f64::MIN_POSITIVE) {
            return Err(AlignError::NonPsdPrecomputed {
                min_eigenvalue: bottom,
            });
        }
        Ok(Self {
            entries: sym,
            centered: false,
        })
    }

    pub fn entries(&self) -> &DMatrix<f64> {
        &self.entries
    }

    pub fn is_centered(&self) -> bool {
        self.centered
    }

    pub fn n(&self) -> usize {
        self.entries.nrows()
    }

    pub fn frobenius_norm(&self) -> f64 {
        linalg::frobenius_inner(&self.entries, &self.entries).sqrt()
    }

    pub fn scaled(&self, c: f64) -> Self {
        Self {
            entries: &self.entries * c,
            centered: self.centered,
        }
    }

    /// Checks the documented invariants (symmetry, PSD, centering).
    pub fn check_invariants(&self) -> std::result::Result<(), String> {
        let scale = linalg::max_abs(&self.entries);
        let asym = linalg::asymmetry(&self.entries);
        if asym > 1e-12 * scale.max(f64::MIN_POSITIVE) {
            return Err(format!("asymmetry {asym:e}"));
        }
        let (values, _) = linalg::sym_eigen_desc(&self.entries);
        let top = values.iter().copied().fold(0.0_f64, f64::max);
        let bottom = values.iter().copied().fold(f64::INFINITY, f64::min);
        if bottom < -1e-10 * top {
            return Err(format!("min eigenvalue {bottom:e} vs max {top:e}"));
        }
        if self.centered {
            let n = self.n() as f64;
            for (i, row) in self.entries.row_iter().enumerate() {
                if row.sum().abs() > 1e-8 * n * scale {
                    return Err(format!("row {i} sums to {:e}", row.sum()));
                }
            }
        }
        Ok(())
    }
}

/// Descending eigenvalues (clipped at zero) with orthonormal eigenvectors as columns.
#[derive(Debug, Clone, PartialEq)]
pub struct Spectrum {
    pub(crate) eigenvalues: DVector<f64>,
    pub(crate) eigenvectors: DMatrix<f64>,
}

impl Spectrum {
    pub fn eigenvalues(&self) -> &DVector<f64> {
        &self.eigenvalues
    }

    pub fn eigenvectors(&self) -> &DMatrix<f64> {
        &self.eigenvectors
    }

    /// Count of eigenvalues that survived clipping.
    pub fn rank(&self) -> usize {
        self.eigenvalues.iter().filter(|&&v| v > 0.0).count()
    }

    /// Eigenvalues scaled to unit Euclidean norm.
    pub fn normalized_eigenvalues(&self) -> Result<DVector<f64>> {
        let norm = self.eigenvalues.norm();
        if norm == 0.0 || self.eigenvalues.is_empty() {
            return Err(AlignError::EmptySpectrum);
        }
        Ok(&self.eigenvalues / norm)
    }

    /// `V diag(eigenvalues) Vᵀ`.
    pub fn reconstruct(&self) -> DMatrix<f64> {
        let scaled = &self.eigenvectors * DMatrix::from_diagonal(&self.eigenvalues);
        scaled * self.eigenvectors.transpose()
    }

    /// Spectrum built directly from eigenvalues with an identity basis; useful
    /// when only the eigenvalues matter.
    pub fn from_eigenvalues(values: &[f64]) -> Result<Self> {
        if values.iter().any(|v| !v.is_finite() || *v < 0.0) {
            return Err(AlignError::InvalidParameter(
                "eigenvalues must be finite and nonnegative".into(),
            ));
        }
        if values.windows(2).any(|w| w[0] < w[1]) {
            return Err(AlignError::InvalidParameter(
                "eigenvalues must be sorted descending".into(),
            ));
        }
        let n = values.len();
        Ok(Self {
            eigenvalues: DVector::from_column_slice(values),
            eigenvectors: DMatrix::identity(n, n),
        })
    }
}

/// Inner products between the eigenvectors of two spectra that share a sample index.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OverlapMatrix {
    pub(crate) entries: DMatrix<f64>,
    /// Index ranges `[start, end)` of eigenvalue clusters on the left side.
    pub(crate) left_clusters: Vec<(usize, usize)>,
    pub(crate) right_clusters: Vec<(usize, usize)>,
    pub(crate) convention: String,
}

impl OverlapMatrix {
    /// Overlap with singleton clusters.
    pub fn new(entries: DMatrix<f64>, convention: impl Into<String>) -> Self {
        let left_clusters = (0..entries.nrows()).map(|i| (i, i + 1)).collect();
        let right_clusters = (0..entries.ncols()).map(|i| (i, i + 1)).collect();
        Self {
            entries,
            left_clusters,
            right_clusters,
            convention: convention.into(),
        }
    }

    pub fn entries(&self) -> &DMatrix<f64> {
        &self.entries
    }

    pub fn left_clusters(&self) -> &[(usize, usize)] {
        &self.left_clusters
    }

    pub fn right_clusters(&self) -> &[(usize, usize)] {
        &self.right_clusters
    }

    pub fn convention(&self) -> &str {
        &self.convention
    }
}
