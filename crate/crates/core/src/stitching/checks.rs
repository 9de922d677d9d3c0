use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use super::fit::{
    a_tilde_overlap, a_tilde_spectral, fit_linear_map, fit_stitcher, mean_sq, LinearStitcher,
    StitchMethod,
};
use super::head::HeadFunction;
use super::report::{
    DepthSummary, InequalityCheck, ReferenceRisks, RiskBasis, StitchMode, StitchReport,
    StitcherInfo,
};
use crate::error::{AlignError, Result};
use crate::linalg;
use crate::rng;
use crate::types::PairedDataset;

/// Whether `{g2 ∘ s}` is known to lie inside the left head class.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Containment {
    /// Holds by construction, e.g. linear heads with linear stitchers and all
    /// linear maps as the left class.
    Certified,
    Unknown,
}

fn targets_of(p: &PairedDataset) -> Result<DMatrix<f64>> {
    p.targets()
        .map(|t| t.to_matrix())
        .ok_or_else(|| AlignError::InvalidParameter("stitching checks need targets".into()))
}

fn rows(m: &DMatrix<f64>, idx: &[usize]) -> DMatrix<f64> {
    DMatrix::from_fn(idx.len(), m.ncols(), |i, j| m[(idx[i], j)])
}

/// Fit and evaluation row indices for a risk basis.
pub fn split_indices(n: usize, basis: RiskBasis) -> Result<(Vec<usize>, Vec<usize>)> {
    match basis {
        RiskBasis::InSample => Ok(((0..n).collect(), (0..n).collect())),
        RiskBasis::HeldOut { fit_fraction, seed } => {
            if !(fit_fraction > 0.0 && fit_fraction < 1.0) {
                return Err(AlignError::InvalidParameter(format!(
                    "fit fraction must lie in (0, 1), got {fit_fraction}"
                )));
            }
            let n_fit = (fit_fraction * n as f64).round() as usize;
            if n_fit < 2 || n - n_fit < 2 {
                return Err(AlignError::TooFewSamples { got: n, min: 4 });
            }
            let perm = rng::permutation(&mut rng::chacha(seed, 0), n);
            let (mut fit, mut eval) = (perm[..n_fit].to_vec(), perm[n_fit..].to_vec());
            fit.sort_unstable();
            eval.sort_unstable();
            Ok((fit, eval))
        }
        RiskBasis::Analytic => Err(AlignError::InvalidParameter(
            "analytic risks are supplied directly, not measured on data".into(),
        )),
    }
}

/// `(1/n) Σ ‖g(f_i) − y_i‖²`.
pub fn head_risk(g: &HeadFunction, f: &DMatrix<f64>, y: &DMatrix<f64>) -> Result<f64> {
    let pred = g.apply_rows(f)?;
    if pred.shape() != y.shape() {
        return Err(AlignError::DimensionMismatch(format!(
            "head produces {} outputs for {} rows, targets are {}x{}",
            pred.ncols(),
            pred.nrows(),
            y.nrows(),
            y.ncols()
        )));
    }
    Ok(mean_sq(&(pred - y)))
}

/// `(1/n) Σ ‖g2(S f1_i) − y_i‖²` on raw matrices.
pub fn stitch_risk_rows(
    g2: &HeadFunction,
    s: &DMatrix<f64>,
    f1: &DMatrix<f64>,
    y: &DMatrix<f64>,
) -> Result<f64> {
    if s.ncols() != f1.ncols() {
        return Err(AlignError::DimensionMismatch(format!(
            "stitcher expects dimension {}, got {}",
            s.ncols(),
            f1.ncols()
        )));
    }
    head_risk(g2, &(f1 * s.transpose()), y)
}

/// Stitching risk of `g2 ∘ S` on the left features and targets of `p`.
pub fn stitch_risk(g2: &HeadFunction, s: &LinearStitcher, p: &PairedDataset) -> Result<f64> {
    stitch_risk_rows(g2, s.matrix(), p.left().data(), &targets_of(p)?)
}

/// `κ²Ã + 2κ√(Ã R2)`.
pub fn excess_bound(r2: f64, a_tilde: f64, kappa: f64) -> f64 {
    let a = a_tilde.max(0.0);
    kappa * kappa * a + 2.0 * kappa * (a * r2.max(0.0)).sqrt()
}

/// Right-hand side of the stitching upper bound, `R2 + κ²Ã + 2κ√(Ã R2)`.
pub fn theorem2_bound(r2: f64, a_tilde: f64, kappa: f64) -> f64 {
    r2 + excess_bound(r2, a_tilde, kappa)
}

fn stitcher_info(s: &LinearStitcher, fit: &PairedDataset) -> Result<StitcherInfo> {
    let ols = s.method() == StitchMethod::Ols;
    Ok(StitcherInfo {
        method: s.method(),
        left_dim: fit.left().dim(),
        right_dim: fit.right().dim(),
        retained_rank: s.rank(),
        a_tilde_spectral: ols.then(|| a_tilde_spectral(fit)),
        a_tilde_overlap: if ols { a_tilde_overlap(fit)? } else { None },
    })
}

/// Fits a stitcher and reports its residual on the evaluation split.
pub fn fit_only(p: &PairedDataset, method: StitchMethod, basis: RiskBasis) -> Result<StitchReport> {
    let (fit_idx, eval_idx) = split_indices(p.sample_count(), basis)?;
    let fit = p.select_rows(&fit_idx)?;
    let eval = p.select_rows(&eval_idx)?;
    let s = fit_stitcher(&fit, method)?;
    let mut r = StitchReport::new(StitchMode::FitOnly, basis, fit_idx.len(), eval_idx.len());
    r.a_tilde = s.residual_on(&eval)?;
    r.stitcher = Some(stitcher_info(&s, &fit)?);
    if s.rank() < fit.left().dim() {
        r.notes.push(format!(
            "left second moment clipped to rank {} of {}",
            s.rank(),
            fit.left().dim()
        ));
    }
    Ok(r)
}

/// With linear heads and `rank(W2) = t`, the best composite stitcher attains the
/// best linear risk on the left features. `w2` defaults to the least-squares
/// head on the right features.
pub fn check_lemma_linear_heads(
    p: &PairedDataset,
    w2: Option<&DMatrix<f64>>,
) -> Result<StitchReport> {
    let y = targets_of(p)?;
    let f1 = p.left().data();
    let (w1, r1, _) = fit_linear_map(f1, &y, StitchMethod::Ols)?;
    let w2 = match w2 {
        Some(w) => w.clone(),
        None => fit_linear_map(p.right().data(), &y, StitchMethod::Ols)?.0,
    };
    if w2.nrows() != y.ncols() || w2.ncols() != p.right().dim() {
        return Err(AlignError::DimensionMismatch(format!(
            "head is {}x{}, expected {}x{}",
            w2.nrows(),
            w2.ncols(),
            y.ncols(),
            p.right().dim()
        )));
    }
    let t = y.ncols();
    let w2_pinv = linalg::pinv(&w2);
    let s_star = &w2_pinv * &w1;
    let head = HeadFunction::linear(w2.clone())?;
    let risk = stitch_risk_rows(&head, &s_star, f1, &y)?;
    let rank = linalg::matrix_rank(&w2);
    if rank < t {
        let proj = &w2 * &w2_pinv;
        let sqrt11 = linalg::psd_sqrt(&crate::kernels::second_moment(f1));
        let residual = ((DMatrix::identity(t, t) - proj) * &w1 * sqrt11).norm_squared();
        return Err(AlignError::RankDeficientHead {
            rank,
            output_dim: t,
            stitch_risk: risk,
            r1,
            residual,
        });
    }
    let n = p.sample_count();
    let mut r = StitchReport::new(StitchMode::Lemma2, RiskBasis::InSample, n, n);
    r.stitch_risk = Some(risk);
    r.reference_risks.r1 = Some(r1);
    r.a_tilde = fit_stitcher(p, StitchMethod::Ols)?.a_tilde();
    r.kappa = head.kappa();
    r.inequalities.push(InequalityCheck::eq(
        "min_stitch_risk_equals_r1",
        risk,
        r1,
        true,
    ));
    r.notes
        .push("stitcher minimizes the composite objective: S = W2⁺ W1*".into());
    Ok(r)
}

struct Thm2Parts {
    stitcher: LinearStitcher,
    a_tilde: f64,
    r2: f64,
    stitch: f64,
    kappa: f64,
}

fn theorem2_parts(
    f1_fit: &PairedDataset,
    f1_eval: &DMatrix<f64>,
    f2_eval: &DMatrix<f64>,
    y_eval: &DMatrix<f64>,
    g2: &HeadFunction,
) -> Result<Thm2Parts> {
    let kappa = g2.kappa().ok_or(AlignError::UncertifiedLipschitz)?;
    let stitcher = fit_stitcher(f1_fit, StitchMethod::Ols)?;
    let a_tilde = mean_sq(&(stitcher.apply_rows(f1_eval)? - f2_eval));
    let r2 = head_risk(g2, f2_eval, y_eval)?;
    let stitch = stitch_risk_rows(g2, stitcher.matrix(), f1_eval, y_eval)?;
    Ok(Thm2Parts {
        stitcher,
        a_tilde,
        r2,
        stitch,
        kappa,
    })
}

/// Upper bound on the stitching risk of the OLS stitcher through a
/// `κ`-Lipschitz head, against the reference model `g2 ∘ f2`.
pub fn check_theorem2_bound(
    p: &PairedDataset,
    g2: &HeadFunction,
    basis: RiskBasis,
) -> Result<StitchReport> {
    let y = targets_of(p)?;
    let (fit_idx, eval_idx) = split_indices(p.sample_count(), basis)?;
    let fit = p.select_rows(&fit_idx)?;
    let parts = theorem2_parts(
        &fit,
        &rows(p.left().data(), &eval_idx),
        &rows(p.right().data(), &eval_idx),
        &rows(&y, &eval_idx),
        g2,
    )?;
    let mut r = StitchReport::new(StitchMode::Thm2, basis, fit_idx.len(), eval_idx.len());
    let bound = excess_bound(parts.r2, parts.a_tilde, parts.kappa);
    r.stitch_risk = Some(parts.stitch);
    r.reference_risks.r2 = Some(parts.r2);
    r.excess_stitch_risk = Some(parts.stitch - parts.r2);
    r.a_tilde = parts.a_tilde;
    r.kappa = Some(parts.kappa);
    r.bound_value = Some(bound);
    r.inequalities.push(InequalityCheck::le(
        "stitch_risk_upper_bound",
        parts.stitch,
        parts.r2 + bound,
        true,
    ));
    r.stitcher = Some(stitcher_info(&parts.stitcher, &fit)?);
    r.notes.push(format!(
        "reference risk is that of the supplied {} head on the right features",
        g2.kind_name()
    ));
    Ok(r)
}

/// Bound check from externally supplied quantities, e.g. population values or
/// the residual of a nonlinear stitcher.
pub fn check_theorem2_analytic(
    stitch_risk: f64,
    r2: f64,
    a_tilde: f64,
    kappa: f64,
) -> Result<StitchReport> {
    for (name, v) in [
        ("stitch_risk", stitch_risk),
        ("r2", r2),
        ("a_tilde", a_tilde),
        ("kappa", kappa),
    ] {
        if !v.is_finite() || v < 0.0 {
            return Err(AlignError::InvalidParameter(format!(
                "{name} must be finite and nonnegative, got {v}"
            )));
        }
    }
    let mut r = StitchReport::new(StitchMode::Thm2, RiskBasis::Analytic, 0, 0);
    let bound = excess_bound(r2, a_tilde, kappa);
    r.stitch_risk = Some(stitch_risk);
    r.reference_risks.r2 = Some(r2);
    r.excess_stitch_risk = Some(stitch_risk - r2);
    r.a_tilde = a_tilde;
    r.kappa = Some(kappa);
    r.bound_value = Some(bound);
    r.inequalities.push(InequalityCheck::le(
        "stitch_risk_upper_bound",
        stitch_risk,
        r2 + bound,
        true,
    ));
    Ok(r)
}

#[derive(Debug, Clone, PartialEq)]
pub struct LowerBoundOptions {
    pub ridge_grid: Vec<f64>,
    pub random_candidates: usize,
    pub seed: u64,
}

impl Default for LowerBoundOptions {
    fn default() -> Self {
        Self {
            ridge_grid: vec![1e-3, 1e-1, 10.0],
            random_candidates: 3,
            seed: 0,
        }
    }
}

/// Every stitcher through a linear head is at least as risky as the best
/// linear map on the left features.
pub fn check_lower_bound(
    p: &PairedDataset,
    w2: Option<&DMatrix<f64>>,
    containment: Containment,
    opts: &LowerBoundOptions,
) -> Result<StitchReport> {
    if containment != Containment::Certified {
        return Err(AlignError::ContainmentNotEstablished);
    }
    let y = targets_of(p)?;
    let f1 = p.left().data();
    let (w1, r1, _) = fit_linear_map(f1, &y, StitchMethod::Ols)?;
    let w2 = match w2 {
        Some(w) => w.clone(),
        None => fit_linear_map(p.right().data(), &y, StitchMethod::Ols)?.0,
    };
    let head = HeadFunction::linear(w2.clone())?;
    let ols = fit_stitcher(p, StitchMethod::Ols)?;

    let mut candidates: Vec<(String, DMatrix<f64>)> = vec![
        ("composite_optimum".into(), linalg::pinv(&w2) * &w1),
        ("ols".into(), ols.matrix().clone()),
    ];
    for &l in &opts.ridge_grid {
        candidates.push((
            format!("ridge_{l:e}"),
            fit_stitcher(p, StitchMethod::Ridge(l))?.matrix().clone(),
        ));
    }
    let mut gen = rng::chacha(opts.seed, 1);
    for k in 0..opts.random_candidates {
        candidates.push((
            format!("random_{k}"),
            rng::normal_matrix(&mut gen, p.right().dim(), p.left().dim()),
        ));
    }

    let n = p.sample_count();
    let mut r = StitchReport::new(StitchMode::Lower, RiskBasis::InSample, n, n);
    let mut best = f64::INFINITY;
    for (name, s) in &candidates {
        let risk = stitch_risk_rows(&head, s, f1, &y)?;
        best = best.min(risk);
        r.inequalities.push(InequalityCheck::le(
            &format!("r1_le_stitch_risk[{name}]"),
            r1,
            risk,
            true,
        ));
    }
    r.stitch_risk = Some(best);
    r.reference_risks.r1 = Some(r1);
    r.a_tilde = ols.a_tilde();
    r.kappa = head.kappa();
    r.stitcher = Some(stitcher_info(&ols, p)?);
    r.notes.push(
        "stitch_risk is the minimum over candidate stitchers; the left class is all linear maps"
            .into(),
    );
    Ok(r)
}

/// `R1 − R2 ≤ R^stitch − R2 ≤ κ²Ã + 2κ√(Ã R2)` with least-squares linear heads
/// on both sides.
pub fn check_theorem3_sandwich(
    p: &PairedDataset,
    containment: Containment,
    basis: RiskBasis,
) -> Result<StitchReport> {
    if containment != Containment::Certified {
        return Err(AlignError::ContainmentNotEstablished);
    }
    let y = targets_of(p)?;
    let (fit_idx, eval_idx) = split_indices(p.sample_count(), basis)?;
    let fit = p.select_rows(&fit_idx)?;
    let f1_eval = rows(p.left().data(), &eval_idx);
    let f2_eval = rows(p.right().data(), &eval_idx);
    let y_eval = rows(&y, &eval_idx);
    let (_, r1, _) = fit_linear_map(&f1_eval, &y_eval, StitchMethod::Ols)?;
    let (w2, _, _) = fit_linear_map(&f2_eval, &y_eval, StitchMethod::Ols)?;
    let head = HeadFunction::linear(w2)?;
    let parts = theorem2_parts(&fit, &f1_eval, &f2_eval, &y_eval, &head)?;
    let bound = excess_bound(parts.r2, parts.a_tilde, parts.kappa);
    let excess = parts.stitch - parts.r2;

    let mut r = StitchReport::new(StitchMode::Sandwich, basis, fit_idx.len(), eval_idx.len());
    r.stitch_risk = Some(parts.stitch);
    r.reference_risks = ReferenceRisks {
        r1: Some(r1),
        r2: Some(parts.r2),
    };
    r.excess_stitch_risk = Some(excess);
    r.a_tilde = parts.a_tilde;
    r.kappa = Some(parts.kappa);
    r.bound_value = Some(bound);
    r.inequalities.push(InequalityCheck::le(
        "sandwich_lower",
        r1 - parts.r2,
        excess,
        true,
    ));
    r.inequalities
        .push(InequalityCheck::le("sandwich_upper", excess, bound, true));
    r.stitcher = Some(stitcher_info(&parts.stitcher, &fit)?);
    r.notes
        .push("heads are least-squares linear maps fitted on the evaluation sample".into());
    Ok(r)
}

/// Features of both models at one depth with the right model's head above it.
#[derive(Debug, Clone)]
pub struct DepthLayer {
    pub f1: DMatrix<f64>,
    pub f2: DMatrix<f64>,
    pub g2: HeadFunction,
}

/// Bound check at every depth and `R(H1) − R(H2) ≤ min_j bound_j`; the latter
/// is asserted only with a containment certificate.
pub fn check_multi_depth(
    layers: &[DepthLayer],
    y: &DMatrix<f64>,
    risk_h1: f64,
    containment: Containment,
    basis: RiskBasis,
) -> Result<StitchReport> {
    if layers.is_empty() {
        return Err(AlignError::InvalidParameter("no depths supplied".into()));
    }
    let n = y.nrows();
    let (fit_idx, eval_idx) = split_indices(n, basis)?;
    let y_eval = rows(y, &eval_idx);
    let mut r = StitchReport::new(StitchMode::MultiDepth, basis, fit_idx.len(), eval_idx.len());
    let mut best: Option<(usize, f64, f64)> = None;
    for (j, layer) in layers.iter().enumerate() {
        if layer.f1.nrows() != n || layer.f2.nrows() != n {
            return Err(AlignError::MismatchedSampleCount {
                left: layer.f1.nrows(),
                right: layer.f2.nrows().max(n),
            });
        }
        let depth = j + 1;
        let fit = PairedDataset::new(
            crate::types::RepresentationSet::new(format!("f1@{depth}"), rows(&layer.f1, &fit_idx))?,
            crate::types::RepresentationSet::new(format!("f2@{depth}"), rows(&layer.f2, &fit_idx))?,
        )?;
        let parts = theorem2_parts(
            &fit,
            &rows(&layer.f1, &eval_idx),
            &rows(&layer.f2, &eval_idx),
            &y_eval,
            &layer.g2,
        )?;
        let bound = excess_bound(parts.r2, parts.a_tilde, parts.kappa);
        r.inequalities.push(InequalityCheck::le(
            &format!("stitch_risk_upper_bound[depth {depth}]"),
            parts.stitch,
            parts.r2 + bound,
            true,
        ));
        r.inequalities.push(InequalityCheck::le(
            &format!("r_h1_le_stitch_risk[depth {depth}]"),
            risk_h1,
            parts.stitch,
            containment == Containment::Certified,
        ));
        r.depths.push(DepthSummary {
            depth,
            a_tilde: parts.a_tilde,
            kappa: parts.kappa,
            reference_risk: parts.r2,
            stitch_risk: parts.stitch,
            bound_value: bound,
        });
        if best.is_none_or(|(_, b, _)| bound < b) {
            best = Some((depth, bound, parts.r2));
        }
    }
    let (depth, bound, r2) = best.expect("at least one depth");
    let chosen = &r.depths[depth - 1];
    r.stitch_risk = Some(chosen.stitch_risk);
    r.a_tilde = chosen.a_tilde;
    r.kappa = Some(chosen.kappa);
    r.reference_risks = ReferenceRisks {
        r1: Some(risk_h1),
        r2: Some(r2),
    };
    r.excess_stitch_risk = Some(chosen.stitch_risk - r2);
    r.bound_value = Some(bound);
    r.depth_argmin = Some(depth);
    r.inequalities.push(InequalityCheck::le(
        "risk_gap_le_min_depth_bound",
        risk_h1 - r2,
        bound,
        containment == Containment::Certified,
    ));
    if containment != Containment::Certified {
        r.notes
            .push("containment not certified: lower-side checks are reported, not asserted".into());
    }
    Ok(r)
}
