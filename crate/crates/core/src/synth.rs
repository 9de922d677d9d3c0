//! Synthetic paired Gaussian representations with prescribed spectra and
//! overlap, and their population values.
//!
//! With `φ ~ N(0, I_D)` and frames `U1 = [I; 0]`, `U2 = [C; B; 0]` where
//! `BᵀB = I − CᵀC`, the features `f_q = diag(η_q)^{1/2} U_qᵀ φ` have
//! `E[f1 f2ᵀ] = diag(η1)^{1/2} C diag(η2)^{1/2}` exactly.
//!
//! Draws use ChaCha8 seeded from a `u64`, with Gaussian variates from the
//! ziggurat sampler of `rand_distr`; sample `i` of a batch uses stream `2i`
//! for features and `2i + 1` for target noise.

use nalgebra::{DMatrix, DVector};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{AlignError, Result};
use crate::linalg;
use crate::rng;
use crate::stitching::{DepthLayer, HeadFunction};
use crate::types::{PairedDataset, RepresentationSet, Targets};

/// Tolerance on `‖C‖_op − 1` before an overlap is rejected.
pub const OVERLAP_NORM_TOL: f64 = 1e-10;

#[derive(Debug, Clone, PartialEq)]
pub struct SyntheticSpec {
    pub ambient_dim: usize,
    pub eta1: Vec<f64>,
    pub eta2: Vec<f64>,
    /// `d1 x d2` overlap `U1ᵀU2`.
    pub overlap: DMatrix<f64>,
    pub noise_level: f64,
    pub seed: u64,
}

/// Population values of the metrics for a [`SyntheticSpec`] with linear kernels.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OracleValues {
    pub ka: f64,
    pub cka: f64,
    pub hsic: f64,
    pub coco: f64,
    pub canonical_correlations: Vec<f64>,
    /// `None` when a canonical correlation equals one.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub gaussian_mi: Option<f64>,
    pub gaussian_w2: f64,
    /// Population OLS residual of `f2` on `f1`.
    pub a_tilde: f64,
    /// `tr Σ22`.
    pub right_power: f64,
}

impl OracleValues {
    /// `κ²Ã + 2κ√(Ã R2)` at the population residual.
    pub fn excess_bound(&self, r2: f64, kappa: f64) -> f64 {
        crate::stitching::excess_bound(r2, self.a_tilde, kappa)
    }
}

struct Frames {
    /// Rows of `U2` below the identity block of `U1`, `r x d2`.
    b: DMatrix<f64>,
}

impl SyntheticSpec {
    pub fn left_dim(&self) -> usize {
        self.eta1.len()
    }

    pub fn right_dim(&self) -> usize {
        self.eta2.len()
    }

    fn validate(&self) -> Result<()> {
        let (d1, d2) = (self.left_dim(), self.right_dim());
        if d1 == 0 || d2 == 0 {
            return Err(AlignError::InvalidParameter(
                "spectra must be nonempty".into(),
            ));
        }
        if self
            .eta1
            .iter()
            .chain(&self.eta2)
            .any(|&e| !(e > 0.0 && e.is_finite()))
        {
            return Err(AlignError::InvalidParameter(
                "spectrum entries must be positive and finite".into(),
            ));
        }
        if self.overlap.shape() != (d1, d2) {
            return Err(AlignError::DimensionMismatch(format!(
                "overlap is {}x{}, spectra need {d1}x{d2}",
                self.overlap.nrows(),
                self.overlap.ncols()
            )));
        }
        if self.overlap.iter().any(|v| !v.is_finite()) {
            return Err(AlignError::InvalidParameter(
                "overlap must be finite".into(),
            ));
        }
        if !(self.noise_level >= 0.0 && self.noise_level.is_finite()) {
            return Err(AlignError::InvalidParameter(format!(
                "noise level must be nonnegative, got {}",
                self.noise_level
            )));
        }
        let norm = linalg::operator_norm(&self.overlap);
        if norm > 1.0 + OVERLAP_NORM_TOL {
            return Err(AlignError::UnrealizableOverlap { norm });
        }
        Ok(())
    }

    fn frames(&self) -> Result<Frames> {
        self.validate()?;
        let d2 = self.right_dim();
        let c = &self.overlap;
        let gap = DMatrix::identity(d2, d2) - c.transpose() * c;
        let (vals, vecs) = linalg::sym_eigen_desc(&linalg::symmetrized(&gap)?);
        let keep: Vec<usize> = (0..d2).filter(|&i| vals[i] > OVERLAP_NORM_TOL).collect();
        let b = DMatrix::from_fn(keep.len(), d2, |r, j| {
            vals[keep[r]].sqrt() * vecs[(j, keep[r])]
        });
        let required = self.left_dim() + b.nrows();
        if self.ambient_dim < required.max(d2) {
            return Err(AlignError::AmbientTooSmall {
                ambient: self.ambient_dim,
                required: required.max(d2),
            });
        }
        Ok(Frames { b })
    }

    /// Closed-form population values.
    pub fn oracle(&self) -> Result<OracleValues> {
        self.validate()?;
        let c = &self.overlap;
        let e1 = DVector::from_column_slice(&self.eta1);
        let e2 = DVector::from_column_slice(&self.eta2);
        let s1 = DMatrix::from_diagonal(&e1.map(f64::sqrt));
        let s2 = DMatrix::from_diagonal(&e2.map(f64::sqrt));
        let cross = &s1 * c * &s2;
        let hsic = cross.norm_squared();
        let ka = hsic / (e1.norm() * e2.norm());
        let rho = linalg::singular_values_desc(c);
        let rho: Vec<f64> = rho.into_iter().map(|r| r.min(1.0)).collect();
        let gaussian_mi = crate::metrics::gaussian_mi_from_correlations(&rho).ok();
        let ctc = c.transpose() * c;
        let right_power = e2.sum();
        let explained: f64 = (0..e2.len()).map(|j| e2[j] * ctc[(j, j)]).sum();
        Ok(OracleValues {
            ka,
            cka: ka,
            hsic,
            coco: linalg::operator_norm(&cross),
            gaussian_w2: crate::metrics::gaussian_w2_from_correlations(&rho),
            canonical_correlations: rho,
            gaussian_mi,
            a_tilde: right_power - explained,
            right_power,
        })
    }

    /// Population OLS stitcher `Σ21 Σ11⁻¹ = diag(η2)^{1/2} Cᵀ diag(η1)^{-1/2}`.
    pub fn population_stitcher(&self) -> Result<DMatrix<f64>> {
        self.validate()?;
        Ok(DMatrix::from_fn(
            self.right_dim(),
            self.left_dim(),
            |j, i| self.eta2[j].sqrt() * self.overlap[(i, j)] / self.eta1[i].sqrt(),
        ))
    }

    fn features(&self, frames: &Frames, n: usize, index: u64) -> (DMatrix<f64>, DMatrix<f64>) {
        let (d1, d2, r) = (self.left_dim(), self.right_dim(), frames.b.nrows());
        // coordinates of φ beyond d1 + r never reach either side
        let phi = rng::normal_matrix(&mut rng::chacha(self.seed, 2 * index), n, d1 + r);
        let mut u2t = DMatrix::zeros(d1 + r, d2);
        u2t.rows_mut(0, d1).copy_from(&self.overlap);
        u2t.rows_mut(d1, r).copy_from(&frames.b);
        let mut f1 = phi.columns(0, d1).into_owned();
        let mut f2 = &phi * u2t;
        for (j, e) in self.eta1.iter().enumerate() {
            f1.column_mut(j).scale_mut(e.sqrt());
        }
        for (j, e) in self.eta2.iter().enumerate() {
            f2.column_mut(j).scale_mut(e.sqrt());
        }
        (f1, f2)
    }
}

fn paired(f1: DMatrix<f64>, f2: DMatrix<f64>) -> Result<PairedDataset> {
    PairedDataset::new(
        RepresentationSet::new("synthetic_left", f1)?,
        RepresentationSet::new("synthetic_right", f2)?,
    )
}

/// Draws `n` samples with the seed of `spec`.
pub fn generate(spec: &SyntheticSpec, n: usize) -> Result<(PairedDataset, OracleValues)> {
    generate_indexed(spec, n, 0)
}

/// Draw number `index` for the seed of `spec`; index 0 matches [`generate`].
pub fn generate_indexed(
    spec: &SyntheticSpec,
    n: usize,
    index: u64,
) -> Result<(PairedDataset, OracleValues)> {
    if n < 2 {
        return Err(AlignError::TooFewSamples { got: n, min: 2 });
    }
    let frames = spec.frames()?;
    let (f1, f2) = spec.features(&frames, n, index);
    Ok((paired(f1, f2)?, spec.oracle()?))
}

/// Independent draws for indices `0..count`, generated in parallel.
pub fn generate_batch(spec: &SyntheticSpec, n: usize, count: usize) -> Result<Vec<PairedDataset>> {
    (0..count as u64)
        .into_par_iter()
        .map(|i| generate_indexed(spec, n, i).map(|(p, _)| p))
        .collect()
}

/// Samples with targets `y = g(f2) + noise · N(0, I_t)`; returns the dataset and the
/// population reference risk `noise² · t` of `g ∘ f2`.
pub fn generate_task(
    spec: &SyntheticSpec,
    head: &HeadFunction,
    noise: f64,
    n: usize,
) -> Result<(PairedDataset, f64)> {
    if head.input_dim() != spec.right_dim() {
        return Err(AlignError::DimensionMismatch(format!(
            "head takes inputs of dimension {}, right features have {}",
            head.input_dim(),
            spec.right_dim()
        )));
    }
    if !(noise >= 0.0 && noise.is_finite()) {
        return Err(AlignError::InvalidParameter(format!(
            "noise must be nonnegative, got {noise}"
        )));
    }
    let (p, _) = generate(spec, n)?;
    let t = head.output_dim();
    let eps = rng::normal_matrix(&mut rng::chacha(spec.seed, 1), n, t);
    let y = head.apply_rows(p.right().data())? + eps * noise;
    Ok((p.with_targets(Targets::Real(y))?, noise * noise * t as f64))
}

/// Two networks `h_q(x) = W tanh(B A_q x)` sharing `B` and `W`, with
/// `A2 = A1 + N` and `B N = 0`, so their second-layer features coincide.
#[derive(Debug, Clone)]
pub struct TwoLayerInstance {
    /// Depth 1 (`A_q x`, head `W tanh(B ·)`) and depth 2 (`tanh(B A_q x)`, head `W ·`).
    pub layers: Vec<DepthLayer>,
    pub targets: DMatrix<f64>,
    pub risk_h1: f64,
    pub risk_h2: f64,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TwoLayerSpec {
    pub input_dim: usize,
    pub hidden_dim: usize,
    /// Rows of `B`; must be below `hidden_dim` so that `B` has a null space.
    pub bottleneck_dim: usize,
    pub output_dim: usize,
    pub noise: f64,
    pub seed: u64,
}

pub fn two_layer_instance(spec: &TwoLayerSpec, n: usize) -> Result<TwoLayerInstance> {
    let TwoLayerSpec {
        input_dim: p,
        hidden_dim: k,
        bottleneck_dim: m,
        output_dim: t,
        noise,
        seed,
    } = *spec;
    if m == 0 || m >= k || p == 0 || t == 0 {
        return Err(AlignError::InvalidParameter(
            "need 0 < bottleneck_dim < hidden_dim and positive input/output dims".into(),
        ));
    }
    if n < 2 {
        return Err(AlignError::TooFewSamples { got: n, min: 2 });
    }
    let mut g = rng::chacha(seed, 0);
    let scale = |d: usize| 1.0 / (d as f64).sqrt();
    let a1 = rng::normal_matrix(&mut g, k, p) * scale(p);
    let b = rng::normal_matrix(&mut g, m, k) * scale(k);
    let w = rng::normal_matrix(&mut g, t, m) * scale(m);
    // projector onto null(B)
    let (bpinv_b, _) = linalg::psd_pinv(&(b.transpose() * &b));
    let null_proj = DMatrix::identity(k, k) - bpinv_b * (b.transpose() * &b);
    let n_mat = null_proj * rng::normal_matrix(&mut g, k, p) * scale(p);
    let a2 = &a1 + n_mat;

    let x = rng::normal_matrix(&mut rng::chacha(seed, 1), n, p);
    let z1 = &x * a1.transpose();
    let z2 = &x * a2.transpose();
    let h1 = (&z1 * b.transpose()).map(f64::tanh);
    let h2 = (&z2 * b.transpose()).map(f64::tanh);
    let eps = rng::normal_matrix(&mut rng::chacha(seed, 2), n, t);
    let y = &h1 * w.transpose() + eps * noise;

    let deep_head = HeadFunction::tanh_linear(w.clone(), b)?;
    let top_head = HeadFunction::linear(w)?;
    let risk_h1 = crate::stitching::head_risk(&top_head, &h1, &y)?;
    let risk_h2 = crate::stitching::head_risk(&top_head, &h2, &y)?;
    Ok(TwoLayerInstance {
        layers: vec![
            DepthLayer {
                f1: z1,
                f2: z2,
                g2: deep_head,
            },
            DepthLayer {
                f1: h1,
                f2: h2,
                g2: top_head,
            },
        ],
        targets: y,
        risk_h1,
        risk_h2,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    fn spec(eta1: Vec<f64>, eta2: Vec<f64>, c: DMatrix<f64>, ambient: usize) -> SyntheticSpec {
        SyntheticSpec {
            ambient_dim: ambient,
            eta1,
            eta2,
            overlap: c,
            noise_level: 0.0,
            seed: 42,
        }
    }

    #[test]
    fn identity_overlap_is_fully_aligned() {
        let s = spec(vec![2.0, 1.0], vec![2.0, 1.0], DMatrix::identity(2, 2), 2);
        let o = s.oracle().unwrap();
        assert_relative_eq!(o.ka, 1.0, epsilon = 1e-14);
        assert!(o.a_tilde.abs() < 1e-14);
        assert!(o.gaussian_mi.is_none());
        let (p, _) = generate(&s, 10).unwrap();
        assert!((p.left().data() - p.right().data()).amax() < 1e-12);
    }

    #[test]
    fn zero_overlap_is_independent() {
        let s = spec(vec![1.0, 0.5], vec![3.0, 2.0, 1.0], DMatrix::zeros(2, 3), 5);
        let o = s.oracle().unwrap();
        assert_eq!(o.ka, 0.0);
        assert_eq!(o.a_tilde, 6.0);
        assert_eq!(o.gaussian_mi, Some(0.0));
        assert_eq!(o.gaussian_w2, 0.0);
    }

    #[test]
    fn scalar_closed_forms() {
        let s = spec(vec![1.0], vec![1.0], DMatrix::from_element(1, 1, 0.6), 2);
        let o = s.oracle().unwrap();
        assert_relative_eq!(o.canonical_correlations[0], 0.6, epsilon = 1e-15);
        assert_relative_eq!(
            o.gaussian_mi.unwrap(),
            0.223_143_551_314_209_7,
            epsilon = 1e-12
        );
        assert_relative_eq!(o.gaussian_w2, 0.4, epsilon = 1e-12);
        assert_relative_eq!(o.ka, 0.36, epsilon = 1e-15);
        assert_relative_eq!(o.a_tilde, 0.64, epsilon = 1e-15);
    }

    #[test]
    fn rejects_bad_specs() {
        let s = spec(vec![1.0], vec![1.0], DMatrix::from_element(1, 1, 1.5), 4);
        assert!(matches!(
            s.oracle(),
            Err(AlignError::UnrealizableOverlap { .. })
        ));
        let s = spec(vec![1.0], vec![1.0], DMatrix::from_element(1, 1, 0.5), 1);
        assert!(matches!(
            generate(&s, 4),
            Err(AlignError::AmbientTooSmall { required: 2, .. })
        ));
        let s = spec(vec![1.0, -1.0], vec![1.0], DMatrix::zeros(2, 1), 4);
        assert!(s.oracle().is_err());
    }

    #[test]
    fn generation_is_deterministic() {
        let s = spec(
            vec![1.0, 0.3],
            vec![0.7],
            DMatrix::from_column_slice(2, 1, &[0.5, 0.2]),
            4,
        );
        let (a, _) = generate(&s, 16).unwrap();
        let (b, _) = generate(&s, 16).unwrap();
        assert_eq!(a, b);
        let batch = generate_batch(&s, 16, 3).unwrap();
        assert_eq!(batch[0], a);
        assert_ne!(batch[1], a);
    }

    #[test]
    fn task_reference_risk() {
        let s = spec(
            vec![1.0],
            vec![1.0, 0.5],
            DMatrix::from_row_slice(1, 2, &[0.3, 0.1]),
            3,
        );
        let head = HeadFunction::linear(DMatrix::from_row_slice(1, 2, &[1.0, -1.0])).unwrap();
        let (_, risk) = generate_task(&s, &head, 0.0, 8).unwrap();
        assert_eq!(risk, 0.0);
        let (p, risk) = generate_task(&s, &head, 0.1, 8).unwrap();
        assert_relative_eq!(risk, 0.01, epsilon = 1e-15);
        assert_eq!(p.targets().unwrap().dim(), 1);
        let bad = HeadFunction::linear(DMatrix::zeros(1, 3)).unwrap();
        assert!(matches!(
            generate_task(&s, &bad, 0.1, 8),
            Err(AlignError::DimensionMismatch(_))
        ));
    }

    #[test]
    fn two_layer_second_depth_is_aligned() {
        let spec = TwoLayerSpec {
            input_dim: 8,
            hidden_dim: 5,
            bottleneck_dim: 3,
            output_dim: 1,
            noise: 0.1,
            seed: 1,
        };
        let inst = two_layer_instance(&spec, 64).unwrap();
        let deep = &inst.layers[1];
        assert!((&deep.f1 - &deep.f2).amax() < 1e-12);
        assert!((inst.risk_h1 - inst.risk_h2).abs() < 1e-12);
        let shallow = &inst.layers[0];
        assert!((&shallow.f1 - &shallow.f2).amax() > 1e-3);
    }
}
