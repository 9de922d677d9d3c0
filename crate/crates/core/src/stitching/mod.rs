//! Linear stitching between two representations: fit `S: Z1 → Z2`, measure the
//! risk of `g2 ∘ S ∘ f1`, and evaluate the stitching risk bounds on concrete
//! instances.
//!
//! Right features are regressed on left features with uncentered `1/n`
//! moments. Every check records `lhs`, `rhs` and `slack = rhs − lhs`; checks
//! pass when `slack ≥ −1e-8 · max(1, |rhs|)`.

mod checks;
mod fit;
mod head;
mod report;

pub use checks::{
    check_lemma_linear_heads, check_lower_bound, check_multi_depth, check_theorem2_analytic,
    check_theorem2_bound, check_theorem3_sandwich, excess_bound, fit_only, head_risk,
    split_indices, stitch_risk, stitch_risk_rows, theorem2_bound, Containment, DepthLayer,
    LowerBoundOptions,
};
pub use fit::{
    a_tilde_overlap, a_tilde_spectral, fit_linear_map, fit_stitcher, LinearStitcher, StitchMethod,
    OVERLAP_CHECK_MAX_N,
};
pub use head::HeadFunction;
pub use report::{
    DepthSummary, InequalityCheck, ReferenceRisks, Relation, RiskBasis, StitchMode, StitchReport,
    StitcherInfo, CHECK_TOL,
};
