//! Monte Carlo checks of kernel-alignment concentration.
//!
//! Each trial draws `n` samples, row-normalizes both feature sets (linear
//! kernels with unit diagonal, so both kernels are bounded by one) and computes
//! the unnormalized statistic `Â = (1/n²) ⟨K1, K2⟩_F`. Its expectation is
//! `1/n + (1 − 1/n) A∞`, where `A∞ = E[k1(x,x') k2(x,x')]` over independent
//! pairs is estimated without bias from a single large reference draw.
//!
//! Trial `i` at size `n` uses draw index `(n << 32) | i`, so results do not
//! depend on scheduling or thread count.

use nalgebra::DMatrix;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{AlignError, Result};
use crate::synth::{self, SyntheticSpec};
use crate::types::PairedDataset;

/// Reference sample size as a multiple of the largest trial size.
pub const REFERENCE_MULTIPLIER: usize = 64;
const REFERENCE_INDEX: u64 = u64::MAX >> 2;
/// Medians below this are rounding noise and excluded from the rate fit.
const RATE_FLOOR: f64 = 1e-12;
const QUANTILE_LEVELS: [f64; 5] = [0.5, 0.9, 0.95, 0.99, 1.0];

/// `√((32/n) ln(2/δ))`.
pub fn bound_value(n: usize, delta: f64) -> Result<f64> {
    if !(delta > 0.0 && delta < 1.0) {
        return Err(AlignError::InvalidDelta(delta));
    }
    if n == 0 {
        return Err(AlignError::TooFewSamples { got: 0, min: 1 });
    }
    Ok((32.0 / n as f64 * (2.0 / delta).ln()).sqrt())
}

/// Largest violation rate compatible with `δ` up to three binomial standard errors.
pub fn violation_ceiling(delta: f64, trials: usize) -> f64 {
    delta + 3.0 * (delta * (1.0 - delta) / trials as f64).sqrt()
}

fn row_normalized(m: &DMatrix<f64>) -> Result<DMatrix<f64>> {
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

/// Per-sample statistics of one draw.
#[derive(Debug, Clone, Copy, PartialEq)]
struct DrawStats {
    /// `(1/n²) ⟨K1, K2⟩` with unit-diagonal linear kernels.
    unnormalized: f64,
    /// `⟨K1, K2⟩ / (‖K1‖ ‖K2‖)`.
    ka: f64,
}

fn draw_stats(p: &PairedDataset) -> Result<DrawStats> {
    let f1 = row_normalized(p.left().data())?;
    let f2 = row_normalized(p.right().data())?;
    let n = f1.nrows() as f64;
    let cross = (f1.transpose() * &f2).norm_squared();
    let self1 = (f1.transpose() * &f1).norm_squared();
    let self2 = (f2.transpose() * &f2).norm_squared();
    Ok(DrawStats {
        unnormalized: cross / (n * n),
        ka: cross / (self1.sqrt() * self2.sqrt()),
    })
}

/// Long-run values the trials are compared against.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Reference {
    pub n_ref: usize,
    /// Unbiased estimate of `E[k1(x,x') k2(x,x')]` over independent pairs.
    pub pair_mean: f64,
    /// Normalized KA on the reference draw.
    pub ka: f64,
}

impl Reference {
    /// Expectation of the unnormalized statistic at sample size `n`.
    pub fn expected_statistic(&self, n: usize) -> f64 {
        let n = n as f64;
        1.0 / n + (1.0 - 1.0 / n) * self.pair_mean
    }
}

/// Draws trial and reference samples.
pub trait Sampler: Sync {
    fn sample(&self, n: usize, index: u64) -> Result<PairedDataset>;
}

impl Sampler for SyntheticSpec {
    fn sample(&self, n: usize, index: u64) -> Result<PairedDataset> {
        synth::generate_indexed(self, n, index).map(|(p, _)| p)
    }
}

impl<F> Sampler for F
where
    F: Fn(usize, u64) -> Result<PairedDataset> + Sync,
{
    fn sample(&self, n: usize, index: u64) -> Result<PairedDataset> {
        self(n, index)
    }
}

pub fn reference<S: Sampler + ?Sized>(sampler: &S, n_ref: usize) -> Result<Reference> {
    let p = sampler.sample(n_ref, REFERENCE_INDEX)?;
    let s = draw_stats(&p)?;
    let m = n_ref as f64;
    Ok(Reference {
        n_ref,
        pair_mean: (m * m * s.unnormalized - m) / (m * (m - 1.0)),
        ka: s.ka,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ConcentrationResult {
    pub n: usize,
    pub delta: f64,
    pub bound: f64,
    pub trials: usize,
    /// Fraction of trials whose unnormalized deviation exceeds `bound`.
    pub violation_rate: f64,
    pub violation_ceiling: f64,
    pub within_ceiling: bool,
    pub expected_statistic: f64,
    /// Quantiles at levels 0.5, 0.9, 0.95, 0.99 and 1.0 of `|Â − E Â|`.
    pub deviation_quantiles: Vec<f64>,
    pub median_deviation: f64,
    /// Same levels for `|KA − KA_ref|`; reported only.
    pub normalized_deviation_quantiles: Vec<f64>,
    /// Per-trial unnormalized deviations in trial order.
    pub deviations: Vec<f64>,
}

fn quantiles(values: &[f64]) -> Vec<f64> {
    let mut v = values.to_vec();
    v.sort_by(f64::total_cmp);
    QUANTILE_LEVELS
        .iter()
        .map(|&q| {
            if v.is_empty() {
                return 0.0;
            }
            let pos = q * (v.len() - 1) as f64;
            let (lo, hi) = (pos.floor() as usize, pos.ceil() as usize);
            v[lo] + (v[hi] - v[lo]) * (pos - lo as f64)
        })
        .collect()
}

/// Runs `trials` independent draws at size `n` against a precomputed reference.
pub fn run_trials_with<S: Sampler + ?Sized>(
    sampler: &S,
    reference: &Reference,
    n: usize,
    trials: usize,
    delta: f64,
) -> Result<ConcentrationResult> {
    let bound = bound_value(n, delta)?;
    if trials == 0 {
        return Err(AlignError::InvalidParameter(
            "trials must be positive".into(),
        ));
    }
    if n < 2 {
        return Err(AlignError::TooFewSamples { got: n, min: 2 });
    }
    let expected = reference.expected_statistic(n);
    let stats: Vec<DrawStats> = (0..trials as u64)
        .into_par_iter()
        .map(|t| draw_stats(&sampler.sample(n, ((n as u64) << 32) | t)?))
        .collect::<Result<_>>()?;
    let deviations: Vec<f64> = stats
        .iter()
        .map(|s| (s.unnormalized - expected).abs())
        .collect();
    let normalized: Vec<f64> = stats.iter().map(|s| (s.ka - reference.ka).abs()).collect();
    let violations = deviations.iter().filter(|&&d| d > bound).count();
    let violation_rate = violations as f64 / trials as f64;
    let ceiling = violation_ceiling(delta, trials);
    let dq = quantiles(&deviations);
    Ok(ConcentrationResult {
        n,
        delta,
        bound,
        trials,
        violation_rate,
        violation_ceiling: ceiling,
        within_ceiling: violation_rate <= ceiling,
        expected_statistic: expected,
        median_deviation: dq[0],
        deviation_quantiles: dq,
        normalized_deviation_quantiles: quantiles(&normalized),
        deviations,
    })
}

/// Trials at a single size with a reference drawn at `64 n`.
pub fn run_trials(
    spec: &SyntheticSpec,
    n: usize,
    trials: usize,
    delta: f64,
) -> Result<ConcentrationResult> {
    bound_value(n, delta)?;
    let r = reference(spec, REFERENCE_MULTIPLIER * n)?;
    run_trials_with(spec, &r, n, trials, delta)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ConcentrationSweep {
    pub reference: Reference,
    pub results: Vec<ConcentrationResult>,
    /// Slope of `ln(median deviation)` against `ln n`; `None` with fewer than
    /// two sizes with a nonzero median.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub rate_exponent: Option<f64>,
}

/// Trials over a grid of sizes sharing one reference drawn at `64 · max(ns)`.
pub fn run_sweep<S: Sampler + ?Sized>(
    sampler: &S,
    ns: &[usize],
    trials: usize,
    delta: f64,
) -> Result<ConcentrationSweep> {
    let n_max = *ns
        .iter()
        .max()
        .ok_or_else(|| AlignError::InvalidParameter("empty sample-size grid".into()))?;
    bound_value(n_max, delta)?;
    let r = reference(sampler, REFERENCE_MULTIPLIER * n_max)?;
    let results = ns
        .iter()
        .map(|&n| run_trials_with(sampler, &r, n, trials, delta))
        .collect::<Result<Vec<_>>>()?;
    Ok(ConcentrationSweep {
        rate_exponent: rate_exponent(&results),
        reference: r,
        results,
    })
}

fn rate_exponent(results: &[ConcentrationResult]) -> Option<f64> {
    let pts: Vec<(f64, f64)> = results
        .iter()
        .filter(|r| r.median_deviation > RATE_FLOOR)
        .map(|r| ((r.n as f64).ln(), r.median_deviation.ln()))
        .collect();
    if pts.len() < 2 {
        return None;
    }
    let k = pts.len() as f64;
    let mx = pts.iter().map(|p| p.0).sum::<f64>() / k;
    let my = pts.iter().map(|p| p.1).sum::<f64>() / k;
    let sxy: f64 = pts.iter().map(|p| (p.0 - mx) * (p.1 - my)).sum();
    let sxx: f64 = pts.iter().map(|p| (p.0 - mx).powi(2)).sum();
    (sxx > 0.0).then(|| sxy / sxx)
}
