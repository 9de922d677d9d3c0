use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use super::fit::StitchMethod;
use crate::metrics::REPORT_SCHEMA_VERSION;

/// Relative slack floor used for every asserted check.
pub const CHECK_TOL: f64 = 1e-8;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum StitchMode {
    FitOnly,
    Lemma2,
    Thm2,
    Lower,
    Sandwich,
    MultiDepth,
}

/// Where risks and residuals were measured.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", tag = "kind")]
pub enum RiskBasis {
    InSample,
    /// Stitcher fitted on a seeded fraction, everything else measured on the rest.
    HeldOut {
        fit_fraction: f64,
        seed: u64,
    },
    /// Exact population values supplied by the caller.
    Analytic,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Relation {
    #[serde(rename = "<=")]
    Le,
    #[serde(rename = "==")]
    Eq,
}

impl Relation {
    pub fn symbol(self) -> &'static str {
        match self {
            Relation::Le => "<=",
            Relation::Eq => "==",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct InequalityCheck {
    pub name: String,
    pub relation: Relation,
    pub lhs: f64,
    pub rhs: f64,
    pub satisfied: bool,
    /// `rhs − lhs`.
    pub slack: f64,
    /// False for checks that are reported only because a precondition is unverified.
    pub asserted: bool,
}

impl InequalityCheck {
    pub fn le(name: &str, lhs: f64, rhs: f64, asserted: bool) -> Self {
        let slack = rhs - lhs;
        Self {
            name: name.into(),
            relation: Relation::Le,
            lhs,
            rhs,
            satisfied: slack >= -CHECK_TOL * rhs.abs().max(1.0),
            slack,
            asserted,
        }
    }

    pub fn eq(name: &str, lhs: f64, rhs: f64, asserted: bool) -> Self {
        let slack = rhs - lhs;
        Self {
            name: name.into(),
            relation: Relation::Eq,
            lhs,
            rhs,
            satisfied: slack.abs() <= CHECK_TOL * rhs.abs().max(1.0),
            slack,
            asserted,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize, Default)]
pub struct ReferenceRisks {
    #[serde(skip_serializing_if = "Option::is_none")]
    pub r1: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub r2: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StitcherInfo {
    pub method: StitchMethod,
    pub left_dim: usize,
    pub right_dim: usize,
    pub retained_rank: usize,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub a_tilde_spectral: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub a_tilde_overlap: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DepthSummary {
    pub depth: usize,
    pub a_tilde: f64,
    pub kappa: f64,
    pub reference_risk: f64,
    pub stitch_risk: f64,
    pub bound_value: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StitchReport {
    pub schema_version: u32,
    pub mode: StitchMode,
    pub risk_basis: RiskBasis,
    pub n_fit: usize,
    pub n_eval: usize,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub stitch_risk: Option<f64>,
    pub reference_risks: ReferenceRisks,
    /// `stitch_risk − r2`.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub excess_stitch_risk: Option<f64>,
    pub a_tilde: f64,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub kappa: Option<f64>,
    /// `κ²Ã + 2κ√(Ã R2)`, the excess-risk bound.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub bound_value: Option<f64>,
    pub inequalities: Vec<InequalityCheck>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub stitcher: Option<StitcherInfo>,
    #[serde(skip_serializing_if = "Vec::is_empty", default)]
    pub depths: Vec<DepthSummary>,
    /// 1-based depth minimizing the bound.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub depth_argmin: Option<usize>,
    pub notes: Vec<String>,
    /// Echo of the run configuration.
    #[serde(skip_serializing_if = "BTreeMap::is_empty", default)]
    pub config: BTreeMap<String, String>,
}

impl StitchReport {
    pub(crate) fn new(
        mode: StitchMode,
        risk_basis: RiskBasis,
        n_fit: usize,
        n_eval: usize,
    ) -> Self {
        Self {
            schema_version: REPORT_SCHEMA_VERSION,
            mode,
            risk_basis,
            n_fit,
            n_eval,
            stitch_risk: None,
            reference_risks: ReferenceRisks::default(),
            excess_stitch_risk: None,
            a_tilde: 0.0,
            kappa: None,
            bound_value: None,
            inequalities: Vec::new(),
            stitcher: None,
            depths: Vec::new(),
            depth_argmin: None,
            notes: Vec::new(),
            config: BTreeMap::new(),
        }
    }

    /// True when every asserted check is satisfied.
    pub fn all_asserted_hold(&self) -> bool {
        self.inequalities
            .iter()
            .filter(|c| c.asserted)
            .all(|c| c.satisfied)
    }

    /// Asserted checks that failed.
    pub fn violations(&self) -> Vec<&InequalityCheck> {
        self.inequalities
            .iter()
            .filter(|c| c.asserted && !c.satisfied)
            .collect()
    }
}
