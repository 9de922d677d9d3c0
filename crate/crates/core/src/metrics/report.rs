use std::collections::BTreeMap;
use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use super::{alignment, gaussian, independence, Ridge};
use crate::error::{AlignError, Result};
use crate::kernels::{self, KernelSpec};
use crate::types::{GramMatrix, PairedDataset};

pub const REPORT_SCHEMA_VERSION: u32 = 1;

/// Named metric values with the estimator conventions that produced them.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize, Default)]
pub struct AlignmentReport {
    pub schema_version: u32,
    pub n: usize,
    pub kernels: BTreeMap<String, String>,
    pub conventions: BTreeMap<String, String>,
    pub metrics: BTreeMap<String, f64>,
    /// Curves such as KARE over a lambda grid, as `(x, value)` pairs.
    pub series: BTreeMap<String, Vec<(f64, f64)>>,
    /// Metrics that were requested but could not be computed, with error codes.
    pub skipped: BTreeMap<String, String>,
    /// Echo of the run configuration.
    pub config: BTreeMap<String, String>,
}

impl AlignmentReport {
    pub fn new(n: usize) -> Self {
        Self {
            schema_version: REPORT_SCHEMA_VERSION,
            n,
            ..Default::default()
        }
    }

    pub fn set(&mut self, name: &str, value: f64) {
        self.metrics.insert(name.to_string(), value);
    }

    pub fn convention(&mut self, key: &str, value: impl ToString) {
        self.conventions.insert(key.to_string(), value.to_string());
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Metric {
    Ka,
    Cka,
    KaFeatureForm,
    Hsic,
    Coco,
    Kcc,
    Kmi,
    Mmd2Independence,
    GaussianMi,
    GaussianW2,
    DistanceAlignment,
    SpectralKa,
}

impl Metric {
    pub const ALL: [Metric; 12] = [
        Metric::Ka,
        Metric::Cka,
        Metric::KaFeatureForm,
        Metric::Hsic,
        Metric::Coco,
        Metric::Kcc,
        Metric::Kmi,
        Metric::Mmd2Independence,
        Metric::GaussianMi,
        Metric::GaussianW2,
        Metric::DistanceAlignment,
        Metric::SpectralKa,
    ];

    pub fn name(&self) -> &'static str {
        match self {
            Metric::Ka => "ka",
            Metric::Cka => "cka",
            Metric::KaFeatureForm => "ka_feature_form",
            Metric::Hsic => "hsic",
            Metric::Coco => "coco",
            Metric::Kcc => "kcc",
            Metric::Kmi => "kmi",
            Metric::Mmd2Independence => "mmd2_independence",
            Metric::GaussianMi => "gaussian_mi",
            Metric::GaussianW2 => "gaussian_w2",
            Metric::DistanceAlignment => "distance_alignment",
            Metric::SpectralKa => "spectral_ka",
        }
    }

    /// Parses a comma-separated list; `all` expands to every metric.
    pub fn parse_list(s: &str) -> Result<Vec<Metric>> {
        let mut out = Vec::new();
        for item in s.split(',').map(str::trim).filter(|t| !t.is_empty()) {
            if item == "all" {
                out.extend(Metric::ALL);
            } else {
                out.push(item.parse()?);
            }
        }
        out.sort();
        out.dedup();
        Ok(out)
    }
}

impl fmt::Display for Metric {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Metric {
    type Err = AlignError;

    fn from_str(s: &str) -> Result<Self> {
        Metric::ALL
            .iter()
            .copied()
            .find(|m| m.name() == s)
            .ok_or_else(|| AlignError::ParseError(format!("unknown metric '{s}'")))
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct AlignOptions {
    pub metrics: Vec<Metric>,
    pub kernel_left: KernelSpec,
    pub kernel_right: KernelSpec,
    /// Apply `ka` to double-centered Grams.
    pub center: bool,
    /// Also report the off-diagonal (U-statistic) variant of KA.
    pub unbiased: bool,
    pub ridge: Ridge,
    pub kcc_kappa: f64,
    /// KMI scale factor; `None` means `1/n`.
    pub kmi_kappa: Option<f64>,
    /// Record failing metrics under `skipped` instead of aborting.
    pub skip_failures: bool,
}

impl Default for AlignOptions {
    fn default() -> Self {
        Self {
            metrics: Metric::ALL.to_vec(),
            kernel_left: KernelSpec::linear(),
            kernel_right: KernelSpec::linear(),
            center: false,
            unbiased: false,
            ridge: Ridge::Default,
            kcc_kappa: independence::DEFAULT_KCC_KAPPA,
            kmi_kappa: None,
            skip_failures: false,
        }
    }
}

fn unit_norm_rows(m: &nalgebra::DMatrix<f64>) -> bool {
    m.row_iter().all(|r| (r.norm() - 1.0).abs() < 1e-10)
}

/// Computes the requested metric set on one paired dataset.
pub fn align(p: &PairedDataset, opts: &AlignOptions) -> Result<AlignmentReport> {
    let mut report = AlignmentReport::new(p.sample_count());
    report
        .kernels
        .insert("left".into(), opts.kernel_left.to_string());
    report
        .kernels
        .insert("right".into(), opts.kernel_right.to_string());
    report.convention("ka_centered", opts.center);
    report.convention("statistic", "V-statistic (all index pairs)");
    report.convention("hsic_normalization", "1/(n-1)^2");
    report.convention(
        "mmd2_independence_scale",
        "n^2/(n-1)^2 times the biased joint-vs-product MMD^2",
    );
    report.convention("gaussian_covariance", "demeaned, 1/n");
    report.convention(
        "ridge",
        match opts.ridge {
            Ridge::Default => "1e-8*trace/d".to_string(),
            Ridge::Absolute(r) => r.to_string(),
        },
    );
    report.convention("kcc_kappa", opts.kcc_kappa);
    report.convention(
        "kmi_kappa",
        opts.kmi_kappa.map_or("1/n".to_string(), |k| k.to_string()),
    );

    let needs_grams = opts.metrics.iter().any(|m| {
        !matches!(
            m,
            Metric::KaFeatureForm
                | Metric::GaussianMi
                | Metric::GaussianW2
                | Metric::DistanceAlignment
        )
    });
    let grams: Option<(GramMatrix, GramMatrix)> = if needs_grams {
        Some((
            kernels::gram(p.left(), &opts.kernel_left)?,
            kernels::gram(p.right(), &opts.kernel_right)?,
        ))
    } else {
        None
    };

    for &metric in &opts.metrics {
        let outcome = compute_one(metric, p, grams.as_ref(), opts, &mut report);
        match outcome {
            Ok(()) => {}
            Err(e) if opts.skip_failures => {
                report.skipped.insert(metric.name().into(), e.code().into());
            }
            Err(e) => return Err(e),
        }
    }
    Ok(report)
}

fn compute_one(
    metric: Metric,
    p: &PairedDataset,
    grams: Option<&(GramMatrix, GramMatrix)>,
    opts: &AlignOptions,
    report: &mut AlignmentReport,
) -> Result<()> {
    let g = || grams.expect("grams computed for gram-based metrics");
    match metric {
        Metric::Ka => {
            let (k1, k2) = g();
            let v = if opts.center {
                alignment::ka(&kernels::center(k1), &kernels::center(k2))?
            } else {
                alignment::ka(k1, k2)?
            };
            report.set("ka", v);
            if opts.unbiased {
                let v = if opts.center {
                    alignment::ka_offdiagonal(&kernels::center(k1), &kernels::center(k2))?
                } else {
                    alignment::ka_offdiagonal(k1, k2)?
                };
                report.set("ka_offdiagonal", v);
            }
        }
        Metric::Cka => {
            let (k1, k2) = g();
            report.set("cka", alignment::cka(k1, k2)?);
        }
        Metric::KaFeatureForm => report.set("ka_feature_form", alignment::ka_feature_form(p)?),
        Metric::Hsic => {
            let (k1, k2) = g();
            report.set("hsic", independence::hsic(k1, k2)?);
        }
        Metric::Coco => {
            let (k1, k2) = g();
            report.set("coco", independence::coco(k1, k2)?);
        }
        Metric::Kcc => {
            let (k1, k2) = g();
            report.set("kcc", independence::kcc_gram(k1, k2, opts.kcc_kappa)?);
        }
        Metric::Kmi => {
            let (k1, k2) = g();
            report.set(
                "kmi",
                independence::kmi(k1, k2, opts.kmi_kappa, opts.kmi_kappa)?,
            );
        }
        Metric::Mmd2Independence => {
            let (k1, k2) = g();
            report.set(
                "mmd2_independence",
                independence::mmd2_independence_gram(k1, k2)?,
            );
        }
        Metric::GaussianMi => report.set("gaussian_mi", gaussian::gaussian_mi(p, opts.ridge)?),
        Metric::GaussianW2 => report.set(
            "gaussian_w2",
            gaussian::gaussian_w2_independence(p, opts.ridge)?,
        ),
        Metric::DistanceAlignment => {
            report.set("distance_alignment", alignment::distance_alignment(p));
            if unit_norm_rows(p.left().data()) && unit_norm_rows(p.right().data()) {
                let k1 = kernels::gram(p.left(), &KernelSpec::linear())?;
                let k2 = kernels::gram(p.right(), &KernelSpec::linear())?;
                let forms = alignment::distance_ka_forms(&k1, &k2)?;
                report.set("distance_alignment_frobenius_form", forms.frobenius_form);
                report.set("distance_alignment_8c_one_minus_ka", forms.linear_in_norm);
                report.set(
                    "distance_alignment_8c2_one_minus_ka",
                    forms.quadratic_in_norm,
                );
            }
        }
        Metric::SpectralKa => {
            let (k1, k2) = g();
            let (s1, s2, c) =
                alignment::overlap_from_grams(&kernels::center(k1), &kernels::center(k2))?;
            report.set("spectral_ka", alignment::spectral_ka(&s1, &s2, &c)?);
        }
    }
    Ok(())
}
