//! Kernel independence criteria: HSIC, COCO, KCC, KMI, and MMD (two-sample
//! and joint-versus-product).

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use super::alignment::same_n;
use crate::error::{AlignError, Result};
use crate::kernels::{self, KernelKind, KernelSpec};
use crate::linalg::{self, frobenius_inner, RANK_TOL};
use crate::types::{GramMatrix, PairedDataset, RepresentationSet};

fn centered(k: &GramMatrix) -> DMatrix<f64> {
    if k.is_centered() {
        k.entries().clone()
    } else {
        kernels::center_matrix(k.entries())
    }
}

/// Biased HSIC estimator `<HK1H, HK2H>_F / (n-1)^2`.
pub fn hsic(k1: &GramMatrix, k2: &GramMatrix) -> Result<f64> {
    same_n(k1, k2)?;
    let n = k1.n() as f64;
    Ok(frobenius_inner(&centered(k1), &centered(k2)) / ((n - 1.0) * (n - 1.0)))
}

/// Constrained covariance: `(1/n) sqrt(λ_max(HK1H · HK2H))`.
pub fn coco(k1: &GramMatrix, k2: &GramMatrix) -> Result<f64> {
    same_n(k1, k2)?;
    let n = k1.n() as f64;
    let ev = linalg::psd_product_eigenvalues(&centered(k1), &centered(k2));
    Ok(ev.first().copied().unwrap_or(0.0).max(0.0).sqrt() / n)
}

/// Default KCC regularizer.
pub const DEFAULT_KCC_KAPPA: f64 = 1e-3;

/// Regularized kernel canonical correlation on centered Grams.
///
/// With `μ` the eigenvalues of `HKH/n` and `C` the overlap of the retained
/// eigenvectors, the value is the top singular value of
/// `diag(sqrt(μ1/(μ1+κ))) C diag(sqrt(μ2/(μ2+κ)))`. This is the closed form of
/// `sup cov(h1,h2) / sqrt((var h1 + κ|h1|^2)(var h2 + κ|h2|^2))` over the span
/// of the sample.
pub fn kcc_gram(k1: &GramMatrix, k2: &GramMatrix, kappa: f64) -> Result<f64> {
    same_n(k1, k2)?;
    if !(kappa.is_finite() && kappa > 0.0) {
        return Err(AlignError::InvalidParameter(format!(
            "kcc regularizer must be positive, got {kappa}"
        )));
    }
    let n = k1.n() as f64;
    let s1 = kernels::spectrum(&(centered(k1) / n))?;
    let s2 = kernels::spectrum(&(centered(k2) / n))?;
    let (r1, r2) = (s1.rank(), s2.rank());
    if r1 == 0 || r2 == 0 {
        return Ok(0.0);
    }
    let top = s1.eigenvalues()[0].max(s2.eigenvalues()[0]);
    if kappa < RANK_TOL * top {
        return Err(AlignError::SingularSystem(format!(
            "kappa {kappa:e} is below the numerical rank floor {:e}",
            RANK_TOL * top
        )));
    }
    let w = |mu: f64| (mu / (mu + kappa)).sqrt();
    let v1 = s1.eigenvectors().columns(0, r1);
    let v2 = s2.eigenvectors().columns(0, r2);
    let mut m = v1.transpose() * v2;
    for i in 0..r1 {
        for j in 0..r2 {
            m[(i, j)] *= w(s1.eigenvalues()[i]) * w(s2.eigenvalues()[j]);
        }
    }
    Ok(linalg::operator_norm(&m))
}

/// [`kcc_gram`] from paired features and kernel choices.
pub fn kcc(p: &PairedDataset, spec1: &KernelSpec, spec2: &KernelSpec, kappa: f64) -> Result<f64> {
    let k1 = kernels::gram(p.left(), spec1)?;
    let k2 = kernels::gram(p.right(), spec2)?;
    kcc_gram(&k1, &k2, kappa)
}

/// `-1/2 sum log(1 - σ_i)`; every `σ_i` must lie in `[0, 1)`.
pub fn kmi_from_eigenvalues(sigma: &[f64]) -> Result<f64> {
    let radius = sigma.iter().copied().fold(0.0_f64, f64::max);
    if radius >= 1.0 {
        return Err(AlignError::SpectralRadiusExceeded { radius });
    }
    Ok(-0.5 * sigma.iter().map(|&s| (-s.max(0.0)).ln_1p()).sum::<f64>())
}

/// Kernel mutual information `-1/2 log|I - κ1 κ2 K̃1 K̃2|` on centered Grams.
/// Both scale factors default to `1/n`.
pub fn kmi(
    k1: &GramMatrix,
    k2: &GramMatrix,
    kappa1: Option<f64>,
    kappa2: Option<f64>,
) -> Result<f64> {
    same_n(k1, k2)?;
    let n = k1.n() as f64;
    let scale = kappa1.unwrap_or(1.0 / n) * kappa2.unwrap_or(1.0 / n);
    let sigma: Vec<f64> = linalg::psd_product_eigenvalues(&centered(k1), &centered(k2))
        .into_iter()
        .map(|v| v * scale)
        .collect();
    kmi_from_eigenvalues(&sigma)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum MmdEstimator {
    /// V-statistic, all index pairs.
    #[default]
    Biased,
    /// U-statistic, coincident indices excluded within each sample.
    Unbiased,
}

/// Squared MMD between two samples of the same space.
pub fn mmd2(
    x1: &RepresentationSet,
    x2: &RepresentationSet,
    spec: &KernelSpec,
    estimator: MmdEstimator,
) -> Result<f64> {
    mmd2_samples(x1.data(), x2.data(), spec, estimator)
}

/// [`mmd2`] on raw matrices; each sample may have a single row for the biased estimator.
pub fn mmd2_samples(
    x1: &DMatrix<f64>,
    x2: &DMatrix<f64>,
    spec: &KernelSpec,
    estimator: MmdEstimator,
) -> Result<f64> {
    if x1.ncols() != x2.ncols() {
        return Err(AlignError::DimensionMismatch(format!(
            "samples live in R^{} and R^{}",
            x1.ncols(),
            x2.ncols()
        )));
    }
    if spec.kind == KernelKind::Precomputed {
        return Err(AlignError::InvalidParameter(
            "mmd2 needs a feature-space kernel".into(),
        ));
    }
    let (m, n) = (x1.nrows(), x2.nrows());
    let min = match estimator {
        MmdEstimator::Biased => 1,
        MmdEstimator::Unbiased => 2,
    };
    if m < min || n < min {
        return Err(AlignError::TooFewSamples { got: m.min(n), min });
    }
    // Bandwidth and row normalization are resolved on the pooled sample.
    let pooled = DMatrix::from_fn(m + n, x1.ncols(), |i, j| {
        if i < m {
            x1[(i, j)]
        } else {
            x2[(i - m, j)]
        }
    });
    let (kernel, rows) = kernels::resolve(&pooled, spec)?;
    let a = rows.rows(0, m).into_owned();
    let b = rows.rows(m, n).into_owned();
    let kaa = kernels::assemble(&a, kernel);
    let kbb = kernels::assemble(&b, kernel);
    let kab = kernels::assemble_cross(&a, &b, kernel);
    let (mf, nf) = (m as f64, n as f64);
    let cross = kab.sum() / (mf * nf);
    Ok(match estimator {
        MmdEstimator::Biased => kaa.sum() / (mf * mf) + kbb.sum() / (nf * nf) - 2.0 * cross,
        MmdEstimator::Unbiased => {
            let off = |k: &DMatrix<f64>| k.sum() - k.trace();
            off(&kaa) / (mf * (mf - 1.0)) + off(&kbb) / (nf * (nf - 1.0)) - 2.0 * cross
        }
    })
}

/// Biased squared MMD between the empirical joint distribution and the product
/// of its marginals under the product kernel `k1 ⊗ k2`, expanded as
/// `(1/n^2) sum K1∘K2 + (1/n^4) (sum K1)(sum K2) - (2/n^3) sum_i r1_i r2_i`
/// with `r_q` the row sums of `K_q`.
pub fn joint_product_mmd2(k1: &GramMatrix, k2: &GramMatrix) -> Result<f64> {
    same_n(k1, k2)?;
    let n = k1.n() as f64;
    let (a, b) = (k1.entries(), k2.entries());
    let r1: DVector<f64> = a.column_sum();
    let r2: DVector<f64> = b.column_sum();
    let joint = frobenius_inner(a, b) / (n * n);
    let product = a.sum() * b.sum() / (n * n * n * n);
    let mixed = r1.dot(&r2) / (n * n * n);
    Ok(joint + product - 2.0 * mixed)
}

/// Independence MMD rescaled by `n^2/(n-1)^2` so that it is on the same scale
/// as [`hsic`].
pub fn mmd2_independence_gram(k1: &GramMatrix, k2: &GramMatrix) -> Result<f64> {
    let n = k1.n() as f64;
    Ok(joint_product_mmd2(k1, k2)? * (n * n) / ((n - 1.0) * (n - 1.0)))
}

pub fn mmd2_independence(p: &PairedDataset, spec1: &KernelSpec, spec2: &KernelSpec) -> Result<f64> {
    let k1 = kernels::gram(p.left(), spec1)?;
    let k2 = kernels::gram(p.right(), spec2)?;
    mmd2_independence_gram(&k1, &k2)
}
