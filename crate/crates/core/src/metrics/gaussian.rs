//! Cross-covariances and the Gaussian closed forms driven by canonical
//! correlations: mutual information and Wasserstein-2 distance between the
//! joint law and the product of its marginals.

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use crate::error::{AlignError, Result};
use crate::linalg;
use crate::types::PairedDataset;

/// Empirical second-moment blocks, all normalized by `1/n`.
#[derive(Debug, Clone, PartialEq)]
pub struct CrossCovariance {
    pub matrix: DMatrix<f64>,
    pub centered: bool,
    pub self_left: DMatrix<f64>,
    pub self_right: DMatrix<f64>,
}

impl CrossCovariance {
    pub fn estimate(p: &PairedDataset, centered: bool) -> Self {
        let (f1, f2) = if centered {
            (
                linalg::demean_columns(p.left().data()),
                linalg::demean_columns(p.right().data()),
            )
        } else {
            (p.left().data().clone(), p.right().data().clone())
        };
        let n = f1.nrows() as f64;
        Self {
            matrix: f1.transpose() * &f2 / n,
            centered,
            self_left: f1.transpose() * &f1 / n,
            self_right: f2.transpose() * &f2 / n,
        }
    }
}

/// Diagonal loading applied to each covariance block before whitening.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum Ridge {
    /// `1e-8 * trace(Σ) / d` per side.
    #[default]
    Default,
    Absolute(f64),
}

impl Ridge {
    fn amount(&self, cov: &DMatrix<f64>) -> Result<f64> {
        match *self {
            Ridge::Default => Ok(1e-8 * cov.trace() / cov.nrows() as f64),
            Ridge::Absolute(r) if r.is_finite() && r >= 0.0 => Ok(r),
            Ridge::Absolute(r) => Err(AlignError::InvalidParameter(format!(
                "ridge must be nonnegative, got {r}"
            ))),
        }
    }
}

fn whitener(cov: &DMatrix<f64>, ridge: Ridge, side: &str) -> Result<DMatrix<f64>> {
    let d = cov.nrows();
    let loaded = cov + DMatrix::identity(d, d) * ridge.amount(cov)?;
    let (w, rank) = linalg::psd_inv_sqrt(&loaded);
    if rank < d {
        return Err(AlignError::SingularCovariance(format!(
            "{side} covariance has rank {rank} < {d}"
        )));
    }
    Ok(w)
}

/// Canonical correlations (descending): singular values of
/// `Σ11^{-1/2} Σ12 Σ22^{-1/2}` with demeaned `1/n` covariances.
pub fn canonical_correlations(p: &PairedDataset, ridge: Ridge) -> Result<Vec<f64>> {
    let cov = CrossCovariance::estimate(p, true);
    let w1 = whitener(&cov.self_left, ridge, "left")?;
    let w2 = whitener(&cov.self_right, ridge, "right")?;
    Ok(linalg::singular_values_desc(&(w1 * &cov.matrix * w2)))
}

/// `-1/2 sum log(1 - ρ_i^2)`.
pub fn gaussian_mi_from_correlations(rho: &[f64]) -> Result<f64> {
    let mut acc = 0.0;
    for &r in rho {
        let gap = 1.0 - r * r;
        if gap < 1e-12 {
            return Err(AlignError::SingularCovariance(format!(
                "canonical correlation {r} is numerically perfect"
            )));
        }
        acc += gap.ln();
    }
    Ok(-0.5 * acc)
}

/// `2 sum (1 - sqrt(1 - ρ_i^2))`.
pub fn gaussian_w2_from_correlations(rho: &[f64]) -> f64 {
    2.0 * rho
        .iter()
        .map(|&r| 1.0 - (1.0 - (r * r).min(1.0)).sqrt())
        .sum::<f64>()
}

/// Mutual information of the Gaussian with the empirical (whitened) covariance.
pub fn gaussian_mi(p: &PairedDataset, ridge: Ridge) -> Result<f64> {
    gaussian_mi_from_correlations(&canonical_correlations(p, ridge)?)
}

/// Wasserstein-2 independence measure of the whitened Gaussian model.
pub fn gaussian_w2_independence(p: &PairedDataset, ridge: Ridge) -> Result<f64> {
    Ok(gaussian_w2_from_correlations(&canonical_correlations(
        p, ridge,
    )?))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::types::RepresentationSet;
    use approx::assert_relative_eq;

    fn paired(l: DMatrix<f64>, r: DMatrix<f64>) -> PairedDataset {
        PairedDataset::new(
            RepresentationSet::new("l", l).unwrap(),
            RepresentationSet::new("r", r).unwrap(),
        )
        .unwrap()
    }

    /// Columns with zero mean, unit variance and sample correlation exactly 0.6:
    /// x = a, y = 0.6 a + 0.8 b with a ⟂ b, |a| = |b|.
    fn correlated_pair() -> PairedDataset {
        let a = [1.0, -1.0, 1.0, -1.0];
        let b = [1.0, 1.0, -1.0, -1.0];
        let x = DMatrix::from_column_slice(4, 1, &a);
        let y = DMatrix::from_iterator(4, 1, a.iter().zip(&b).map(|(u, v)| 0.6 * u + 0.8 * v));
        paired(x, y)
    }

    #[test]
    fn single_correlation_closed_forms() {
        let p = correlated_pair();
        let rho = canonical_correlations(&p, Ridge::Absolute(0.0)).unwrap();
        assert_relative_eq!(rho[0], 0.6, epsilon = 1e-12);
        assert_relative_eq!(
            gaussian_mi(&p, Ridge::Absolute(0.0)).unwrap(),
            0.223_143_551_314_209_7,
            epsilon = 1e-10
        );
        assert_relative_eq!(
            gaussian_w2_independence(&p, Ridge::Absolute(0.0)).unwrap(),
            0.4,
            epsilon = 1e-10
        );
    }

    #[test]
    fn orthogonal_halves_are_independent() {
        let x = DMatrix::from_column_slice(4, 1, &[1.0, -1.0, 1.0, -1.0]);
        let y = DMatrix::from_column_slice(4, 1, &[1.0, 1.0, -1.0, -1.0]);
        let p = paired(x, y);
        assert!(gaussian_mi(&p, Ridge::Default).unwrap().abs() < 1e-12);
        assert!(gaussian_w2_independence(&p, Ridge::Default).unwrap().abs() < 1e-12);
    }

    #[test]
    fn perfect_correlation_is_rejected() {
        let x = DMatrix::from_column_slice(4, 1, &[1.0, 2.0, -0.5, 3.0]);
        let p = paired(x.clone(), x * 2.0);
        assert!(matches!(
            gaussian_mi(&p, Ridge::Absolute(0.0)),
            Err(AlignError::SingularCovariance(_))
        ));
    }

    #[test]
    fn rank_deficient_without_ridge() {
        let x = DMatrix::from_row_slice(3, 2, &[1.0, 2.0, 2.0, 4.0, -1.0, -2.0]);
        let y = DMatrix::from_column_slice(3, 1, &[0.5, 1.0, 0.2]);
        let p = paired(x, y);
        assert!(matches!(
            gaussian_mi(&p, Ridge::Absolute(0.0)),
            Err(AlignError::SingularCovariance(_))
        ));
        assert!(gaussian_mi(&p, Ridge::Absolute(1e-3)).is_ok());
    }

    #[test]
    fn w2_bounded_by_pair_count() {
        assert!(gaussian_w2_from_correlations(&[1.0, 1.0]) <= 4.0);
        assert_eq!(gaussian_w2_from_correlations(&[]), 0.0);
    }

    #[test]
    fn monotone_in_correlation() {
        let mut prev_mi = -1.0;
        let mut prev_w2 = -1.0;
        for k in 0..20 {
            let r = k as f64 / 20.0;
            let mi = gaussian_mi_from_correlations(&[r, 0.3]).unwrap();
            let w2 = gaussian_w2_from_correlations(&[r, 0.3]);
            assert!(mi > prev_mi && w2 > prev_w2);
            prev_mi = mi;
            prev_w2 = w2;
        }
    }
}
