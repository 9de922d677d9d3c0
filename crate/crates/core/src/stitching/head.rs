use std::fmt;
use std::sync::Arc;

use nalgebra::{DMatrix, DVector};

use crate::error::{AlignError, Result};
use crate::linalg;

type Evaluator = Arc<dyn Fn(&DVector<f64>) -> DVector<f64> + Send + Sync>;

#[derive(Clone)]
enum HeadKind {
    Linear(DMatrix<f64>),
    Constant(DVector<f64>),
    /// `z ↦ W tanh(V z)`.
    TanhLinear {
        w: DMatrix<f64>,
        v: DMatrix<f64>,
    },
    BlackBox {
        eval: Evaluator,
        kappa: Option<f64>,
    },
}

/// Readout map `g: R^{d_z} → R^t` with an optional certified Lipschitz constant.
#[derive(Clone)]
pub struct HeadFunction {
    kind: HeadKind,
    input_dim: usize,
    output_dim: usize,
}

impl fmt::Debug for HeadFunction {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let kind = match &self.kind {
            HeadKind::Linear(_) => "linear",
            HeadKind::Constant(_) => "constant",
            HeadKind::TanhLinear { .. } => "tanh_linear",
            HeadKind::BlackBox { .. } => "black_box",
        };
        f.debug_struct("HeadFunction")
            .field("kind", &kind)
            .field("input_dim", &self.input_dim)
            .field("output_dim", &self.output_dim)
            .field("kappa", &self.kappa())
            .finish()
    }
}

fn check_finite(m: &DMatrix<f64>, what: &str) -> Result<()> {
    if let Some(pos) = m.iter().position(|v| !v.is_finite()) {
        return Err(AlignError::NonFiniteEntry {
            what: what.into(),
            row: pos % m.nrows(),
            col: pos / m.nrows(),
        });
    }
    Ok(())
}

impl HeadFunction {
    /// `z ↦ W z` with `W` of shape `t x d_z`.
    pub fn linear(w: DMatrix<f64>) -> Result<Self> {
        check_finite(&w, "linear head")?;
        Ok(Self {
            input_dim: w.ncols(),
            output_dim: w.nrows(),
            kind: HeadKind::Linear(w),
        })
    }

    /// The constant map `z ↦ c`; its Lipschitz constant is zero.
    pub fn constant(c: DVector<f64>, input_dim: usize) -> Self {
        Self {
            output_dim: c.len(),
            input_dim,
            kind: HeadKind::Constant(c),
        }
    }

    /// `z ↦ W tanh(V z)`, certified with `‖W‖_op ‖V‖_op`.
    pub fn tanh_linear(w: DMatrix<f64>, v: DMatrix<f64>) -> Result<Self> {
        check_finite(&w, "head output layer")?;
        check_finite(&v, "head input layer")?;
        if w.ncols() != v.nrows() {
            return Err(AlignError::DimensionMismatch(format!(
                "W has {} columns but V has {} rows",
                w.ncols(),
                v.nrows()
            )));
        }
        Ok(Self {
            input_dim: v.ncols(),
            output_dim: w.nrows(),
            kind: HeadKind::TanhLinear { w, v },
        })
    }

    /// Arbitrary map; bound checks need `kappa`.
    pub fn black_box<F>(input_dim: usize, output_dim: usize, kappa: Option<f64>, eval: F) -> Self
    where
        F: Fn(&DVector<f64>) -> DVector<f64> + Send + Sync + 'static,
    {
        Self {
            input_dim,
            output_dim,
            kind: HeadKind::BlackBox {
                eval: Arc::new(eval),
                kappa,
            },
        }
    }

    pub fn input_dim(&self) -> usize {
        self.input_dim
    }

    pub fn output_dim(&self) -> usize {
        self.output_dim
    }

    /// Weight matrix of a linear head.
    pub fn linear_weights(&self) -> Option<&DMatrix<f64>> {
        match &self.kind {
            HeadKind::Linear(w) => Some(w),
            _ => None,
        }
    }

    pub fn kappa(&self) -> Option<f64> {
        match &self.kind {
            HeadKind::Linear(w) => Some(linalg::operator_norm(w)),
            HeadKind::Constant(_) => Some(0.0),
            HeadKind::TanhLinear { w, v } => {
                Some(linalg::operator_norm(w) * linalg::operator_norm(v))
            }
            HeadKind::BlackBox { kappa, .. } => *kappa,
        }
    }

    pub fn kind_name(&self) -> &'static str {
        match &self.kind {
            HeadKind::Linear(_) => "linear",
            HeadKind::Constant(_) => "constant",
            HeadKind::TanhLinear { .. } => "tanh_linear",
            HeadKind::BlackBox { .. } => "black_box",
        }
    }

    /// Applies the head to every row of `z` (`n x d_z`), returning `n x t`.
    pub fn apply_rows(&self, z: &DMatrix<f64>) -> Result<DMatrix<f64>> {
        if z.ncols() != self.input_dim {
            return Err(AlignError::DimensionMismatch(format!(
                "head expects inputs of dimension {}, got {}",
                self.input_dim,
                z.ncols()
            )));
        }
        let n = z.nrows();
        Ok(match &self.kind {
            HeadKind::Linear(w) => z * w.transpose(),
            HeadKind::Constant(c) => DMatrix::from_fn(n, c.len(), |_, j| c[j]),
            HeadKind::TanhLinear { w, v } => (z * v.transpose()).map(f64::tanh) * w.transpose(),
            HeadKind::BlackBox { eval, .. } => {
                let mut out = DMatrix::zeros(n, self.output_dim);
                for i in 0..n {
                    let y = eval(&z.row(i).transpose());
                    if y.len() != self.output_dim {
                        return Err(AlignError::DimensionMismatch(format!(
                            "black-box head returned {} outputs, declared {}",
                            y.len(),
                            self.output_dim
                        )));
                    }
                    out.row_mut(i).copy_from(&y.transpose());
                }
                out
            }
        })
    }
}
