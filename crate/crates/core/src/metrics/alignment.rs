//! Kernel alignment in its Gram, feature-space and spectral forms, plus
//! distance alignment.

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use crate::error::{AlignError, Result};
use crate::kernels::{self, KernelSpec};
use crate::linalg::{self, frobenius_inner};
use crate::types::{GramMatrix, OverlapMatrix, PairedDataset, RepresentationSet, Spectrum};

/// Relative norm below which a centered kernel counts as identically zero.
const ZERO_KERNEL_TOL: f64 = 1e-12;

/// Relative eigenvalue gap under which neighbouring eigenvectors are grouped.
pub const CLUSTER_GAP: f64 = 1e-8;

pub(crate) fn same_n(k1: &GramMatrix, k2: &GramMatrix) -> Result<()> {
    if k1.n() != k2.n() {
        return Err(AlignError::MismatchedSampleCount {
            left: k1.n(),
            right: k2.n(),
        });
    }
    Ok(())
}

fn cosine(k1: &DMatrix<f64>, k2: &DMatrix<f64>) -> Result<f64> {
    let n1 = frobenius_inner(k1, k1);
    let n2 = frobenius_inner(k2, k2);
    if n1 == 0.0 || n2 == 0.0 {
        return Err(AlignError::ZeroKernel);
    }
    Ok(frobenius_inner(k1, k2) / (n1 * n2).sqrt())
}

/// Kernel alignment `<K1,K2>_F / sqrt(<K1,K1>_F <K2,K2>_F)`.
pub fn ka(k1: &GramMatrix, k2: &GramMatrix) -> Result<f64> {
    same_n(k1, k2)?;
    cosine(k1.entries(), k2.entries())
}

/// Kernel alignment with coincident-index terms (`i == j`) removed from every sum.
pub fn ka_offdiagonal(k1: &GramMatrix, k2: &GramMatrix) -> Result<f64> {
    same_n(k1, k2)?;
    let mut a = k1.entries().clone();
    let mut b = k2.entries().clone();
    a.fill_diagonal(0.0);
    b.fill_diagonal(0.0);
    cosine(&a, &b)
}

/// Double-centered copy of `k`, failing if centering annihilates it.
pub(crate) fn centered_nonzero(k: &GramMatrix) -> Result<DMatrix<f64>> {
    let c = if k.is_centered() {
        k.entries().clone()
    } else {
        kernels::center_matrix(k.entries())
    };
    let before = k.frobenius_norm();
    let after = frobenius_inner(&c, &c).sqrt();
    if after == 0.0 || after <= ZERO_KERNEL_TOL * before {
        return Err(AlignError::ZeroKernel);
    }
    Ok(c)
}

/// Centered kernel alignment: [`ka`] of `HK1H` and `HK2H`.
pub fn cka(k1: &GramMatrix, k2: &GramMatrix) -> Result<f64> {
    same_n(k1, k2)?;
    cosine(&centered_nonzero(k1)?, &centered_nonzero(k2)?)
}

fn demeaned_nonzero(f: &DMatrix<f64>) -> Result<DMatrix<f64>> {
    let c = linalg::demean_columns(f);
    if c.norm() == 0.0 || c.norm() <= ZERO_KERNEL_TOL * f.norm() {
        return Err(AlignError::ZeroKernel);
    }
    Ok(c)
}

/// Linear-kernel CKA computed in feature space in `O(n d1 d2)`.
///
/// Algebraically identical to `cka(gram(f1, linear), gram(f2, linear))`.
pub fn cka_linear(p: &PairedDataset) -> Result<f64> {
    let f1 = demeaned_nonzero(p.left().data())?;
    let f2 = demeaned_nonzero(p.right().data())?;
    feature_alignment(&f1, &f2)
}

fn feature_alignment(f1: &DMatrix<f64>, f2: &DMatrix<f64>) -> Result<f64> {
    let n = f1.nrows() as f64;
    let s12 = f1.transpose() * f2 / n;
    let s11 = f1.transpose() * f1 / n;
    let s22 = f2.transpose() * f2 / n;
    let d1 = s11.norm();
    let d2 = s22.norm();
    if d1 == 0.0 || d2 == 0.0 {
        return Err(AlignError::ZeroKernel);
    }
    Ok(s12.norm_squared() / (d1 * d2))
}

/// Kernel alignment of linear kernels via second moments:
/// `|Σ12|_F^2 / (|Σ11|_F |Σ22|_F)` with uncentered `Σ = E_n[f fᵀ]`.
pub fn ka_feature_form(p: &PairedDataset) -> Result<f64> {
    feature_alignment(p.left().data(), p.right().data())
}

/// Spectral form of kernel alignment, `<η̂1, (C ⊙ C) η̂2>`.
///
/// Only the leading `C.nrows()` / `C.ncols()` eigenvalues enter the sum; the
/// normalization uses the whole eigenvalue vector. Sums run over eigenvalue
/// clusters recorded in the overlap, which makes the value independent of the
/// basis chosen inside a degenerate eigenspace.
pub fn spectral_ka(s1: &Spectrum, s2: &Spectrum, c: &OverlapMatrix) -> Result<f64> {
    let e1 = s1.normalized_eigenvalues()?;
    let e2 = s2.normalized_eigenvalues()?;
    let (r1, r2) = c.entries().shape();
    if r1 == 0 || r2 == 0 {
        return Err(AlignError::EmptySpectrum);
    }
    if r1 > e1.len() || r2 > e2.len() {
        return Err(AlignError::DimensionMismatch(format!(
            "overlap is {r1}x{r2} but spectra have {} and {} eigenvalues",
            e1.len(),
            e2.len()
        )));
    }
    let block_mean = |e: &nalgebra::DVector<f64>, (a, b): (usize, usize)| {
        e.rows(a, b - a).sum() / (b - a) as f64
    };
    for &(a, b) in c.left_clusters().iter() {
        if b > r1 || a >= b {
            return Err(AlignError::DimensionMismatch("bad left cluster".into()));
        }
    }
    for &(a, b) in c.right_clusters().iter() {
        if b > r2 || a >= b {
            return Err(AlignError::DimensionMismatch("bad right cluster".into()));
        }
    }
    let m = c.entries();
    let mut acc = 0.0;
    for &lc in c.left_clusters() {
        let w1 = block_mean(&e1, lc);
        for &rc in c.right_clusters() {
            let w2 = block_mean(&e2, rc);
            let mut mass = 0.0;
            for i in lc.0..lc.1 {
                for j in rc.0..rc.1 {
                    mass += m[(i, j)] * m[(i, j)];
                }
            }
            acc += w1 * w2 * mass;
        }
    }
    Ok(acc)
}

fn clusters(values: &[f64]) -> Vec<(usize, usize)> {
    let mut out = Vec::new();
    let mut start = 0;
    for k in 1..=values.len() {
        let split = k == values.len() || (values[k - 1] - values[k]) > CLUSTER_GAP * values[k - 1];
        if split {
            out.push((start, k));
            start = k;
        }
    }
    out
}

/// Spectra of the centered linear Gram matrices of both sides and the overlap
/// between their eigenvectors on the retained (nonzero) spectrum.
pub fn overlap_matrix(
    f1: &RepresentationSet,
    f2: &RepresentationSet,
) -> Result<(Spectrum, Spectrum, OverlapMatrix)> {
    overlap_matrix_with(f1, f2, &KernelSpec::linear(), &KernelSpec::linear())
}

/// [`overlap_matrix`] for arbitrary kernels.
pub fn overlap_matrix_with(
    f1: &RepresentationSet,
    f2: &RepresentationSet,
    spec1: &KernelSpec,
    spec2: &KernelSpec,
) -> Result<(Spectrum, Spectrum, OverlapMatrix)> {
    if f1.sample_count() != f2.sample_count() {
        return Err(AlignError::MismatchedSampleCount {
            left: f1.sample_count(),
            right: f2.sample_count(),
        });
    }
    let k1 = kernels::center(&kernels::gram(f1, spec1)?);
    let k2 = kernels::center(&kernels::gram(f2, spec2)?);
    overlap_from_grams(&k1, &k2)
}

/// Overlap between the eigenvectors of two (already centered or not) Gram matrices.
pub fn overlap_from_grams(
    k1: &GramMatrix,
    k2: &GramMatrix,
) -> Result<(Spectrum, Spectrum, OverlapMatrix)> {
    same_n(k1, k2)?;
    let s1 = kernels::spectrum(k1.entries())?;
    let s2 = kernels::spectrum(k2.entries())?;
    let r1 = s1.rank();
    let r2 = s2.rank();
    if r1 == 0 || r2 == 0 {
        return Err(AlignError::EmptySpectrum);
    }
    let v1 = s1.eigenvectors().columns(0, r1);
    let v2 = s2.eigenvectors().columns(0, r2);
    let entries = v1.transpose() * v2;
    let left: Vec<f64> = s1.eigenvalues().rows(0, r1).iter().copied().collect();
    let right: Vec<f64> = s2.eigenvalues().rows(0, r2).iter().copied().collect();
    let overlap = OverlapMatrix {
        entries,
        left_clusters: clusters(&left),
        right_clusters: clusters(&right),
        convention: format!(
            "Gram eigenvectors (unit norm), retained ranks {r1}x{r2}, centered={}/{}",
            k1.is_centered(),
            k2.is_centered()
        ),
    };
    Ok((s1, s2, overlap))
}

fn squared_distances(f: &DMatrix<f64>) -> DMatrix<f64> {
    let n = f.nrows();
    let mut d = DMatrix::zeros(n, n);
    for i in 0..n {
        for j in (i + 1)..n {
            let mut acc = 0.0;
            for k in 0..f.ncols() {
                let t = f[(i, k)] - f[(j, k)];
                acc += t * t;
            }
            d[(i, j)] = acc;
            d[(j, i)] = acc;
        }
    }
    d
}

/// Distance alignment `(1/n^2) sum_ij (d1^2(i,j) - d2^2(i,j))^2` with
/// Euclidean distances in each representation space.
pub fn distance_alignment(p: &PairedDataset) -> f64 {
    let d1 = squared_distances(p.left().data());
    let d2 = squared_distances(p.right().data());
    let n = p.sample_count() as f64;
    let diff = d1 - d2;
    frobenius_inner(&diff, &diff) / (n * n)
}

/// Distance alignment rewritten in terms of kernel alignment, for unit-norm
/// features with linear kernels.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DistanceKaForms {
    /// `4(|K1|^2 + |K2|^2 - 2<K1,K2>) / n^2`; equals the direct distance alignment.
    pub frobenius_form: f64,
    /// Uncentered kernel alignment of the two Grams.
    pub alignment: f64,
    /// Normalized Hilbert–Schmidt norms `|K_q|_F / n`.
    pub hs_norms: (f64, f64),
    /// `8 c (1 - A)` with `c` the geometric mean of the two HS norms.
    pub linear_in_norm: f64,
    /// `8 c^2 (1 - A)`; matches `frobenius_form` when both norms are equal.
    pub quadratic_in_norm: f64,
}

pub fn distance_ka_forms(k1: &GramMatrix, k2: &GramMatrix) -> Result<DistanceKaForms> {
    same_n(k1, k2)?;
    let n = k1.n() as f64;
    let a = k1.entries();
    let b = k2.entries();
    let aa = frobenius_inner(a, a);
    let bb = frobenius_inner(b, b);
    let ab = frobenius_inner(a, b);
    let alignment = ka(k1, k2)?;
    let hs = (aa.sqrt() / n, bb.sqrt() / n);
    let c = (hs.0 * hs.1).sqrt();
    Ok(DistanceKaForms {
        frobenius_form: 4.0 * (aa + bb - 2.0 * ab) / (n * n),
        alignment,
        hs_norms: hs,
        linear_in_norm: 8.0 * c * (1.0 - alignment),
        quadratic_in_norm: 8.0 * c * c * (1.0 - alignment),
    })
}
