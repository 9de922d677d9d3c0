//! Dense linear-algebra helpers shared across modules.
//!
//! Everything here works on `nalgebra` dynamic matrices in `f64`. Eigenvalues
//! below [`RANK_TOL`] times the largest eigenvalue are treated as zero
//! wherever a rank or pseudo-inverse is needed.

use nalgebra::{DMatrix, DVector};

use crate::error::{AlignError, Result};

/// Relative eigenvalue threshold for numerical rank.
pub const RANK_TOL: f64 = 1e-10;

/// Relative asymmetry accepted before a matrix is symmetrized.
pub const SYMMETRY_TOL: f64 = 1e-12;

/// Frobenius inner product `sum_ij a_ij b_ij`, summed in row-major order.
pub fn frobenius_inner(a: &DMatrix<f64>, b: &DMatrix<f64>) -> f64 {
    debug_assert_eq!(a.shape(), b.shape());
    let mut acc = 0.0;
    for i in 0..a.nrows() {
        for j in 0..a.ncols() {
            acc += a[(i, j)] * b[(i, j)];
        }
    }
    acc
}

pub fn max_abs(m: &DMatrix<f64>) -> f64 {
    m.iter().fold(0.0_f64, |acc, v| acc.max(v.abs()))
}

/// Largest absolute difference between `m` and its transpose.
pub fn asymmetry(m: &DMatrix<f64>) -> f64 {
    let n = m.nrows();
    let mut worst = 0.0_f64;
    for i in 0..n {
        for j in (i + 1)..n {
            worst = worst.max((m[(i, j)] - m[(j, i)]).abs());
        }
    }
    worst
}

/// Checks near-symmetry and returns `(m + mᵀ)/2`.
pub fn symmetrized(m: &DMatrix<f64>) -> Result<DMatrix<f64>> {
    if m.nrows() != m.ncols() {
        return Err(AlignError::DimensionMismatch(format!(
            "expected a square matrix, got {}x{}",
            m.nrows(),
            m.ncols()
        )));
    }
    let asym = asymmetry(m);
    if asym > SYMMETRY_TOL * max_abs(m).max(f64::MIN_POSITIVE) {
        return Err(AlignError::NotSymmetric { asymmetry: asym });
    }
    Ok((m + m.transpose()) * 0.5)
}

/// Raw symmetric eigendecomposition, eigenvalues sorted descending.
///
/// The input must already be exactly symmetric.
pub fn sym_eigen_desc(m: &DMatrix<f64>) -> (DVector<f64>, DMatrix<f64>) {
    let n = m.nrows();
    if n == 0 {
        return (DVector::zeros(0), DMatrix::zeros(0, 0));
    }
    let eig = m.clone().symmetric_eigen();
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&a, &b| eig.eigenvalues[b].total_cmp(&eig.eigenvalues[a]));
    let values = DVector::from_iterator(n, order.iter().map(|&k| eig.eigenvalues[k]));
    let mut vectors = DMatrix::zeros(n, n);
    for (dst, &src) in order.iter().enumerate() {
        let mut col = eig.eigenvectors.column(src).into_owned();
        // largest-magnitude entry positive
        let pivot = col.iter().copied().fold(
            0.0_f64,
            |best, v| if v.abs() > best.abs() { v } else { best },
        );
        if pivot < 0.0 {
            col.neg_mut();
        }
        vectors.set_column(dst, &col);
    }
    (values, vectors)
}

/// Zeroes eigenvalues below `RANK_TOL * max` (and all negatives).
pub fn clip_eigenvalues(values: &mut DVector<f64>) {
    let top = values.iter().copied().fold(0.0_f64, f64::max);
    let floor = RANK_TOL * top;
    for v in values.iter_mut() {
        if *v <= floor {
            *v = 0.0;
        }
    }
}

/// Number of eigenvalues strictly above the relative clipping floor.
pub fn numerical_rank(values: &DVector<f64>) -> usize {
    let top = values.iter().copied().fold(0.0_f64, f64::max);
    if top <= 0.0 {
        return 0;
    }
    values.iter().filter(|&&v| v > RANK_TOL * top).count()
}

/// Pseudo-inverse of a symmetric PSD matrix with relative eigenvalue clipping.
/// Returns the inverse and the retained rank.
pub fn psd_pinv(m: &DMatrix<f64>) -> (DMatrix<f64>, usize) {
    psd_spectral_map(m, |v| 1.0 / v)
}

/// `m^{-1/2}` on the retained spectrum of a symmetric PSD matrix.
pub fn psd_inv_sqrt(m: &DMatrix<f64>) -> (DMatrix<f64>, usize) {
    psd_spectral_map(m, |v| 1.0 / v.sqrt())
}

pub fn psd_sqrt(m: &DMatrix<f64>) -> DMatrix<f64> {
    psd_spectral_map(m, f64::sqrt).0
}

fn psd_spectral_map(m: &DMatrix<f64>, f: impl Fn(f64) -> f64) -> (DMatrix<f64>, usize) {
    let (values, basis) = retained_eigenpairs(m);
    let rank = values.len();
    let scaled = DMatrix::from_fn(m.nrows(), rank, |i, k| basis[(i, k)] * f(values[k]));
    (scaled * basis.transpose(), rank)
}

/// Eigenpairs of the symmetrized input that survive relative clipping.
fn retained_eigenpairs(m: &DMatrix<f64>) -> (Vec<f64>, DMatrix<f64>) {
    let sym = (m + m.transpose()) * 0.5;
    let (mut values, vectors) = sym_eigen_desc(&sym);
    clip_eigenvalues(&mut values);
    let rank = values.iter().filter(|&&v| v > 0.0).count();
    (
        values.iter().take(rank).copied().collect(),
        vectors.columns(0, rank).into_owned(),
    )
}

/// Largest singular value.
pub fn operator_norm(m: &DMatrix<f64>) -> f64 {
    if m.is_empty() {
        return 0.0;
    }
    m.clone()
        .singular_values()
        .iter()
        .copied()
        .fold(0.0_f64, f64::max)
}

/// Singular values sorted descending.
pub fn singular_values_desc(m: &DMatrix<f64>) -> Vec<f64> {
    if m.is_empty() {
        return Vec::new();
    }
    let mut s: Vec<f64> = m.clone().singular_values().iter().copied().collect();
    s.sort_by(|a, b| b.total_cmp(a));
    s
}

/// Eigenvalues (descending, clipped at zero) of the product `A B` of two
/// symmetric PSD matrices, computed as the spectrum of `A^{1/2} B A^{1/2}`
/// restricted to the retained range of `A`. Padded with zeros to length `n`.
pub fn psd_product_eigenvalues(a: &DMatrix<f64>, b: &DMatrix<f64>) -> Vec<f64> {
    let n = a.nrows();
    let (values, basis) = retained_eigenpairs(a);
    let root = DMatrix::from_fn(n, values.len(), |i, k| basis[(i, k)] * values[k].sqrt());
    let m = root.transpose() * b * &root;
    let sym = (&m + m.transpose()) * 0.5;
    let (ev, _) = sym_eigen_desc(&sym);
    let mut out: Vec<f64> = ev.iter().map(|&v| v.max(0.0)).collect();
    out.resize(n, 0.0);
    out
}

/// Per-column demeaned copy.
pub fn demean_columns(m: &DMatrix<f64>) -> DMatrix<f64> {
    let n = m.nrows() as f64;
    let mut out = m.clone();
    for mut col in out.column_iter_mut() {
        let mean = col.sum() / n;
        col.add_scalar_mut(-mean);
    }
    out
}

/// Moore–Penrose pseudo-inverse of a general matrix via `(AᵀA)^+ Aᵀ`.
pub fn pinv(m: &DMatrix<f64>) -> DMatrix<f64> {
    let (gram_inv, _) = psd_pinv(&(m.transpose() * m));
    gram_inv * m.transpose()
}

/// Numerical rank of a general matrix from its singular values.
pub fn matrix_rank(m: &DMatrix<f64>) -> usize {
    let s = singular_values_desc(m);
    match s.first() {
        Some(&top) if top > 0.0 => s.iter().filter(|&&v| v > 1e-10 * top).count(),
        _ => 0,
    }
}
