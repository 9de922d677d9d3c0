//! Representation alignment toolkit.
//!
//! Kernel alignment and its centered, feature-space and spectral forms,
//! distance alignment, kernel independence criteria (HSIC, COCO, KCC, KMI),
//! measure-based criteria (MMD, Gaussian mutual information, Gaussian
//! Wasserstein independence), kernel/task alignment estimators, and a linear
//! stitching engine that evaluates stitching risks and checks the associated
//! risk bounds on concrete instances.
//!
//! Supporting modules generate synthetic paired representations with known
//! population values, run concentration experiments, and read/write the
//! on-disk formats used by the `repalign` command-line tool.

pub mod concentration;
pub mod error;
pub mod io;
pub mod kernels;
pub mod linalg;
pub mod metrics;
mod rng;
pub mod stitching;
pub mod synth;
pub mod task;
pub mod types;

pub use error::{AlignError, Result};
pub use kernels::{Bandwidth, KernelKind, KernelSpec};
pub use types::{
    validate_paired, GramMatrix, OverlapMatrix, PairedDataset, RepresentationSet, Spectrum, Targets,
};

pub use nalgebra::{DMatrix, DVector};
