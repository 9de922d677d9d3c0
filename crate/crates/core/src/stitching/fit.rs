use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use crate::error::{AlignError, Result};
use crate::kernels;
use crate::linalg;
use crate::types::PairedDataset;

/// Sample count above which the Gram-eigenbasis cross-check is skipped.
pub const OVERLAP_CHECK_MAX_N: usize = 2000;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", tag = "method", content = "lambda")]
pub enum StitchMethod {
    Ols,
    Ridge(f64),
}

/// Linear map `S: R^{d1} → R^{d2}` fitted by regressing right features on left features.
#[derive(Debug, Clone, PartialEq)]
pub struct LinearStitcher {
    s: DMatrix<f64>,
    method: StitchMethod,
    a_tilde: f64,
    rank: usize,
}

impl LinearStitcher {
    /// Wraps an externally chosen map; `a_tilde` is computed on `p`.
    pub fn from_matrix(s: DMatrix<f64>, p: &PairedDataset) -> Result<Self> {
        let (f1, f2) = (p.left().data(), p.right().data());
        if s.ncols() != f1.ncols() || s.nrows() != f2.ncols() {
            return Err(AlignError::DimensionMismatch(format!(
                "stitcher is {}x{}, features are {} -> {}",
                s.nrows(),
                s.ncols(),
                f1.ncols(),
                f2.ncols()
            )));
        }
        let a_tilde = mean_sq_residual(f1, f2, &s);
        let rank = linalg::matrix_rank(&s);
        Ok(Self {
            s,
            method: StitchMethod::Ols,
            a_tilde,
            rank,
        })
    }

    pub fn matrix(&self) -> &DMatrix<f64> {
        &self.s
    }

    pub fn method(&self) -> StitchMethod {
        self.method
    }

    /// Mean squared residual `mean ‖S f1 − f2‖²` on the fitting sample (no penalty term).
    pub fn a_tilde(&self) -> f64 {
        self.a_tilde
    }

    /// Rank of the left second-moment matrix kept after clipping.
    pub fn rank(&self) -> usize {
        self.rank
    }

    /// Row-wise application: `n x d1 → n x d2`.
    pub fn apply_rows(&self, f1: &DMatrix<f64>) -> Result<DMatrix<f64>> {
        if f1.ncols() != self.s.ncols() {
            return Err(AlignError::DimensionMismatch(format!(
                "stitcher expects dimension {}, got {}",
                self.s.ncols(),
                f1.ncols()
            )));
        }
        Ok(f1 * self.s.transpose())
    }

    /// Mean squared residual of this map on another sample.
    pub fn residual_on(&self, p: &PairedDataset) -> Result<f64> {
        let pred = self.apply_rows(p.left().data())?;
        if pred.ncols() != p.right().dim() {
            return Err(AlignError::DimensionMismatch(
                "stitcher output does not match right features".into(),
            ));
        }
        Ok(mean_sq(&(pred - p.right().data())))
    }
}

pub(crate) fn mean_sq(m: &DMatrix<f64>) -> f64 {
    m.norm_squared() / m.nrows() as f64
}

fn mean_sq_residual(x: &DMatrix<f64>, y: &DMatrix<f64>, map: &DMatrix<f64>) -> f64 {
    mean_sq(&(x * map.transpose() - y))
}

/// Least-squares map `W` (`t x d`) of `y` (`n x t`) on `x` (`n x d`), uncentered
/// moments, with its mean squared residual and retained rank.
pub fn fit_linear_map(
    x: &DMatrix<f64>,
    y: &DMatrix<f64>,
    method: StitchMethod,
) -> Result<(DMatrix<f64>, f64, usize)> {
    if x.nrows() != y.nrows() {
        return Err(AlignError::MismatchedSampleCount {
            left: x.nrows(),
            right: y.nrows(),
        });
    }
    let n = x.nrows() as f64;
    let sxx = x.transpose() * x / n;
    let syx = y.transpose() * x / n;
    let (inv, rank) = match method {
        StitchMethod::Ols | StitchMethod::Ridge(0.0) => linalg::psd_pinv(&sxx),
        StitchMethod::Ridge(l) if l > 0.0 && l.is_finite() => {
            let d = sxx.nrows();
            let loaded = &sxx + DMatrix::identity(d, d) * l;
            let inv = loaded
                .cholesky()
                .map(|c| c.inverse())
                .ok_or_else(|| AlignError::SingularSystem("ridge-loaded second moment".into()))?;
            (inv, d)
        }
        StitchMethod::Ridge(l) => {
            return Err(AlignError::InvalidParameter(format!(
                "ridge lambda must be nonnegative, got {l}"
            )))
        }
    };
    let w = syx * inv;
    let res = mean_sq_residual(x, y, &w);
    Ok((w, res, rank))
}

/// Regresses right features on left features.
pub fn fit_stitcher(p: &PairedDataset, method: StitchMethod) -> Result<LinearStitcher> {
    let (s, a_tilde, rank) = fit_linear_map(p.left().data(), p.right().data(), method)?;
    Ok(LinearStitcher {
        s,
        method,
        a_tilde,
        rank,
    })
}

/// OLS residual from the eigenbasis of the left second moment:
/// `tr Σ22 − Σ_i ‖Σ21 u_i‖² / η1_i` over retained modes.
pub fn a_tilde_spectral(p: &PairedDataset) -> f64 {
    let (f1, f2) = (p.left().data(), p.right().data());
    let n = f1.nrows() as f64;
    let s11 = kernels::second_moment(f1);
    let s21 = f2.transpose() * f1 / n;
    let tr22 = f2.norm_squared() / n;
    let (mut vals, vecs) = linalg::sym_eigen_desc(&s11);
    linalg::clip_eigenvalues(&mut vals);
    let explained: f64 = vals
        .iter()
        .enumerate()
        .filter(|(_, &v)| v > 0.0)
        .map(|(i, &v)| (&s21 * vecs.column(i)).norm_squared() / v)
        .sum();
    tr22 - explained
}

/// OLS residual from the Gram eigenbases: `Σ_j η2_j (1 − Σ_i C_ij²)` with
/// `η = λ/n` and `C` the overlap of retained eigenvectors. `None` above
/// [`OVERLAP_CHECK_MAX_N`] samples.
pub fn a_tilde_overlap(p: &PairedDataset) -> Result<Option<f64>> {
    let n = p.sample_count();
    if n > OVERLAP_CHECK_MAX_N {
        return Ok(None);
    }
    let k1 = p.left().data() * p.left().data().transpose();
    let k2 = p.right().data() * p.right().data().transpose();
    let s1 = kernels::spectrum(&k1)?;
    let s2 = kernels::spectrum(&k2)?;
    let (r1, r2) = (s1.rank(), s2.rank());
    let v1 = s1.eigenvectors().columns(0, r1);
    let v2 = s2.eigenvectors().columns(0, r2);
    let c = v1.transpose() * v2;
    let total: f64 = (0..r2)
        .map(|j| s2.eigenvalues()[j] / n as f64 * (1.0 - c.column(j).norm_squared()))
        .sum();
    Ok(Some(total))
}
