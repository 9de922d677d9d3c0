//! Pairwise representation-alignment metrics.
//!
//! Estimator conventions:
//! - KA and CKA are normalization free; both use V-statistics (all index pairs),
//!   with [`ka_offdiagonal`] as the variant excluding coincident indices.
//! - HSIC is the biased estimator `<HK1H, HK2H>_F / (n-1)^2`.
//! - Gaussian MI / W2 use demeaned `1/n` covariances with a small ridge.

mod alignment;
mod gaussian;
mod independence;
mod report;

pub use alignment::{
    cka, cka_linear, distance_alignment, distance_ka_forms, ka, ka_feature_form, ka_offdiagonal,
    overlap_from_grams, overlap_matrix, overlap_matrix_with, spectral_ka, DistanceKaForms,
    CLUSTER_GAP,
};
pub use gaussian::{
    canonical_correlations, gaussian_mi, gaussian_mi_from_correlations,
    gaussian_w2_from_correlations, gaussian_w2_independence, CrossCovariance, Ridge,
};
pub use independence::{
    coco, hsic, joint_product_mmd2, kcc, kcc_gram, kmi, kmi_from_eigenvalues, mmd2,
    mmd2_independence, mmd2_independence_gram, mmd2_samples, MmdEstimator, DEFAULT_KCC_KAPPA,
};
pub use report::{align, AlignOptions, AlignmentReport, Metric, REPORT_SCHEMA_VERSION};
