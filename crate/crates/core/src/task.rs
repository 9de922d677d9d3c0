//! Alignment between a kernel and a task: kernel-target alignment, the Parzen
//! window risk bound, KARE, and spectral task profiles.

use nalgebra::{DMatrix, DVector};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{AlignError, Result};
use crate::kernels::{self, KernelSpec};
use crate::linalg;
use crate::types::{GramMatrix, PairedDataset, Targets};

fn check_target_len(k: &GramMatrix, y: &DVector<f64>) -> Result<()> {
    if y.len() != k.n() {
        return Err(AlignError::DimensionMismatch(format!(
            "kernel is {0}x{0} but target has length {1}",
            k.n(),
            y.len()
        )));
    }
    Ok(())
}

/// Kernel-target alignment `ka(K, y yᵀ)`.
pub fn kta(k: &GramMatrix, y: &DVector<f64>) -> Result<f64> {
    check_target_len(k, y)?;
    let yy = y.norm_squared();
    if yy == 0.0 {
        return Err(AlignError::ZeroTarget);
    }
    let kn = k.frobenius_norm();
    if kn == 0.0 {
        return Err(AlignError::ZeroKernel);
    }
    let kyy = (k.entries() * y).dot(y);
    Ok(kyy / (kn * yy))
}

/// KTA restricted to off-diagonal index pairs.
pub fn kta_offdiagonal(k: &GramMatrix, y: &DVector<f64>) -> Result<f64> {
    check_target_len(k, y)?;
    let n = k.n();
    let (mut cross, mut kk, mut tt) = (0.0, 0.0, 0.0);
    for i in 0..n {
        for j in 0..n {
            if i != j {
                let kij = k.entries()[(i, j)];
                let t = y[i] * y[j];
                cross += kij * t;
                kk += kij * kij;
                tt += t * t;
            }
        }
    }
    if tt == 0.0 {
        return Err(AlignError::ZeroTarget);
    }
    if kk == 0.0 {
        return Err(AlignError::ZeroKernel);
    }
    Ok(cross / (kk.sqrt() * tt.sqrt()))
}

/// Outcome of the Parzen window evaluation.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ParzenReport {
    /// Squared risk with the `E[K²]^{1/2}` normalization.
    pub risk: f64,
    /// Squared risk with the literal `E[K²]` normalization.
    pub risk_second_moment: f64,
    /// `2 (1 - KTA)` with the V-statistic KTA.
    pub bound: f64,
    /// `2 (1 - KTA)` with the off-diagonal KTA.
    pub bound_offdiagonal: f64,
    pub kta: f64,
    pub kta_offdiagonal: f64,
    /// `max_i mean_{j≠i} K_ij² / mean_{i≠j} K_ij²`.
    pub normalization_ratio: f64,
    /// Set when the ratio leaves `[0.5, 2]`; the bound is then not expected to hold.
    pub normalization_flag: bool,
    pub bound_holds: bool,
}

fn binary_targets(y: &DVector<f64>) -> Result<()> {
    for (row, &value) in y.iter().enumerate() {
        if value != 1.0 && value != -1.0 {
            return Err(AlignError::NonBinaryTargets { row, value });
        }
    }
    Ok(())
}

/// Leave-one-out Parzen predictor `h(x_i) = mean_{j≠i} K_ij y_j / norm` on a Gram matrix.
pub fn parzen_from_gram(k: &GramMatrix, y: &DVector<f64>) -> Result<ParzenReport> {
    check_target_len(k, y)?;
    binary_targets(y)?;
    let n = k.n();
    let e = k.entries();
    let mut row_sq = vec![0.0; n];
    let mut loo = vec![0.0; n];
    for i in 0..n {
        for j in 0..n {
            if i != j {
                row_sq[i] += e[(i, j)] * e[(i, j)];
                loo[i] += e[(i, j)] * y[j];
            }
        }
    }
    let m = (n - 1) as f64;
    let second_moment = row_sq.iter().sum::<f64>() / (n as f64 * m);
    if second_moment == 0.0 {
        return Err(AlignError::ZeroKernel);
    }
    let risk_with = |norm: f64| {
        (0..n)
            .map(|i| (loo[i] / m / norm - y[i]).powi(2))
            .sum::<f64>()
            / n as f64
    };
    let risk = risk_with(second_moment.sqrt());
    let risk_second_moment = risk_with(second_moment);
    let ratio = row_sq.iter().fold(0.0f64, |a, &s| a.max(s / m)) / second_moment;
    let a = kta(k, y)?;
    let a_off = kta_offdiagonal(k, y)?;
    let bound = 2.0 * (1.0 - a);
    Ok(ParzenReport {
        risk,
        risk_second_moment,
        bound,
        bound_offdiagonal: 2.0 * (1.0 - a_off),
        kta: a,
        kta_offdiagonal: a_off,
        normalization_ratio: ratio,
        normalization_flag: !(0.5..=2.0).contains(&ratio),
        bound_holds: risk <= bound,
    })
}

/// Parzen evaluation with the kernel applied to the left representation.
pub fn parzen_predictor_risk(p: &PairedDataset, spec: &KernelSpec) -> Result<ParzenReport> {
    let y = binary_target_vector(p)?;
    let k = kernels::gram(p.left(), spec)?;
    parzen_from_gram(&k, &y)
}

fn binary_target_vector(p: &PairedDataset) -> Result<DVector<f64>> {
    p.targets()
        .map(Targets::first_column)
        .ok_or_else(|| AlignError::InvalidParameter("dataset has no targets".into()))
}

/// Eigendecomposition of `K` projected onto a target, reusable across ridge values.
#[derive(Debug, Clone)]
pub struct KareSolver {
    n: usize,
    eigenvalues: Vec<f64>,
    projections_sq: Vec<f64>,
}

impl KareSolver {
    pub fn new(k: &GramMatrix, y: &DVector<f64>) -> Result<Self> {
        check_target_len(k, y)?;
        let (vals, vecs) = linalg::sym_eigen_desc(k.entries());
        let proj = vecs.transpose() * y;
        Ok(Self {
            n: k.n(),
            eigenvalues: vals.iter().map(|v| v.max(0.0)).collect(),
            projections_sq: proj.iter().map(|p| p * p).collect(),
        })
    }

    /// `(1/n) yᵀ(K/n+λ)⁻² y / ((1/n) tr (K/n+λ)⁻¹)²`.
    pub fn evaluate(&self, lambda: f64) -> Result<f64> {
        if !(lambda > 0.0 && lambda.is_finite()) {
            return Err(AlignError::InvalidParameter(format!(
                "lambda must be positive, got {lambda}"
            )));
        }
        let n = self.n as f64;
        let (mut num, mut tr) = (0.0, 0.0);
        for (&l, &p2) in self.eigenvalues.iter().zip(&self.projections_sq) {
            let s = l / n + lambda;
            num += p2 / (s * s);
            tr += 1.0 / s;
        }
        let den = tr / n;
        Ok(num / n / (den * den))
    }

    /// Evaluates a grid of ridge values in parallel, preserving order.
    pub fn sweep(&self, lambdas: &[f64]) -> Result<Vec<f64>> {
        lambdas.par_iter().map(|&l| self.evaluate(l)).collect()
    }
}

/// Kernel alignment risk estimator at a single ridge value.
pub fn kare(k: &GramMatrix, y: &DVector<f64>, lambda: f64) -> Result<f64> {
    KareSolver::new(k, y)?.evaluate(lambda)
}

/// Kernel eigenvalues with the target's coefficients in the matching feature basis.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TaskSpectrumProfile {
    eta: Vec<f64>,
    w: Vec<f64>,
}

impl TaskSpectrumProfile {
    pub fn new(eta: Vec<f64>, w: Vec<f64>) -> Result<Self> {
        if eta.len() != w.len() {
            return Err(AlignError::DimensionMismatch(format!(
                "eta has {} entries, w has {}",
                eta.len(),
                w.len()
            )));
        }
        if eta.iter().chain(&w).any(|v| !v.is_finite()) || eta.iter().any(|&v| v < 0.0) {
            return Err(AlignError::InvalidParameter(
                "eta must be finite and nonnegative, w finite".into(),
            ));
        }
        if eta.windows(2).any(|p| p[0] < p[1]) {
            return Err(AlignError::InvalidParameter(
                "eta must be sorted descending".into(),
            ));
        }
        Ok(Self { eta, w })
    }

    /// Empirical profile: `η_i = λ_i/n` and `w_i = v_iᵀy / √λ_i`, so that
    /// `y ≈ Σ w_i √η_i φ_i` with `φ_i = √n v_i`. Null modes are dropped.
    pub fn from_data(k: &GramMatrix, y: &DVector<f64>) -> Result<Self> {
        check_target_len(k, y)?;
        let s = kernels::spectrum(k.entries())?;
        let n = k.n() as f64;
        let proj = s.eigenvectors().transpose() * y;
        let (mut eta, mut w) = (Vec::new(), Vec::new());
        for (i, &l) in s.eigenvalues().iter().enumerate() {
            if l > 0.0 {
                eta.push(l / n);
                w.push(proj[i] / l.sqrt());
            }
        }
        Self::new(eta, w)
    }

    pub fn eta(&self) -> &[f64] {
        &self.eta
    }

    pub fn w(&self) -> &[f64] {
        &self.w
    }

    /// Per-mode power `η_i w_i²`.
    pub fn power(&self) -> Vec<f64> {
        self.eta
            .iter()
            .zip(&self.w)
            .map(|(e, w)| e * w * w)
            .collect()
    }
}

/// Cumulative power distribution `C(k) = Σ_{i≤k} η_i w_i² / Σ_i η_i w_i²`.
pub fn cumulative_power(profile: &TaskSpectrumProfile) -> Result<Vec<f64>> {
    let power = profile.power();
    let total: f64 = power.iter().sum();
    if total.is_nan() || total <= 0.0 {
        return Err(AlignError::ZeroPower);
    }
    let mut acc = 0.0;
    let mut out: Vec<f64> = power
        .iter()
        .map(|p| {
            acc += p;
            (acc / total).min(1.0)
        })
        .collect();
    if let Some(last) = out.last_mut() {
        *last = 1.0;
    }
    Ok(out)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SourceConditionDiagnostic {
    /// `Σ_i η_i^{1-2r} w_i²` over the available modes; `+inf` if a null mode carries weight.
    pub partial_sum: f64,
    /// Log-log slope of the terms against the mode index over the last half of the modes.
    pub tail_slope: Option<f64>,
    /// Terms decay no faster than `1/i`, so the full series is not expected to converge.
    pub divergent: bool,
}

pub fn source_condition_diagnostic(
    profile: &TaskSpectrumProfile,
    r: f64,
) -> Result<SourceConditionDiagnostic> {
    if !(r > 0.0 && r.is_finite()) {
        return Err(AlignError::InvalidParameter(format!(
            "r must be positive, got {r}"
        )));
    }
    let terms: Vec<f64> = profile
        .eta
        .iter()
        .zip(&profile.w)
        .map(|(&e, &w)| {
            if w == 0.0 {
                0.0
            } else if e == 0.0 {
                f64::INFINITY
            } else {
                e.powf(1.0 - 2.0 * r) * w * w
            }
        })
        .collect();
    let partial_sum: f64 = terms.iter().sum();
    let m = terms.len();
    let tail: Vec<(f64, f64)> = (m / 2..m)
        .filter(|&i| terms[i] > 0.0 && terms[i].is_finite())
        .map(|i| (((i + 1) as f64).ln(), terms[i].ln()))
        .collect();
    let tail_slope = (tail.len() >= 2).then(|| {
        let k = tail.len() as f64;
        let mx = tail.iter().map(|t| t.0).sum::<f64>() / k;
        let my = tail.iter().map(|t| t.1).sum::<f64>() / k;
        let sxy: f64 = tail.iter().map(|t| (t.0 - mx) * (t.1 - my)).sum();
        let sxx: f64 = tail.iter().map(|t| (t.0 - mx).powi(2)).sum();
        sxy / sxx
    });
    Ok(SourceConditionDiagnostic {
        partial_sum,
        tail_slope,
        divergent: partial_sum.is_infinite() || tail_slope.is_some_and(|s| s > -1.0),
    })
}

/// KARE evaluated by dense inversion; used to cross-check the spectral path.
pub fn kare_dense(k: &GramMatrix, y: &DVector<f64>, lambda: f64) -> Result<f64> {
    check_target_len(k, y)?;
    let n = k.n();
    let a = k.entries() / n as f64 + DMatrix::identity(n, n) * lambda;
    let inv = a
        .try_inverse()
        .ok_or_else(|| AlignError::SingularSystem("K/n + λI".into()))?;
    let iy = &inv * y;
    let num = iy.norm_squared() / n as f64;
    let den = inv.trace() / n as f64;
    Ok(num / (den * den))
}
