use std::path::PathBuf;

use clap::{Args, Parser, Subcommand, ValueEnum};
use repalign_core::stitching::{Containment, RiskBasis, StitchMethod, StitchMode};
use repalign_core::{AlignError, KernelSpec};

#[derive(Debug, Parser)]
#[command(
    name = "repalign",
    version,
    about = "Representation alignment metrics and stitching bounds"
)]
pub struct Cli {
    #[command(flatten)]
    pub common: Common,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Args)]
pub struct Common {
    /// Seed for every random choice in the run; printed in the config echo.
    #[arg(long, global = true)]
    pub seed: Option<u64>,
    /// Worker threads (default: all cores). Results do not depend on it.
    #[arg(long, global = true)]
    pub threads: Option<usize>,
    /// Report destination; stdout always gets a table.
    #[arg(long, global = true)]
    pub out: Option<PathBuf>,
    #[arg(long, global = true, value_enum, default_value_t = Format::Json)]
    pub format: Format,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum Format {
    Json,
    Csv,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Alignment and independence metrics between two representations.
    Align(AlignArgs),
    /// Fit a linear stitcher and check the stitching risk bounds.
    Stitch(StitchArgs),
    /// Kernel/task alignment estimators for one representation and its targets.
    Task(TaskArgs),
    /// Draw a synthetic paired dataset from a spec file.
    Synth(SynthArgs),
    /// Monte Carlo concentration experiment on a synthetic spec.
    Concentrate(ConcentrateArgs),
}

fn kernel(s: &str) -> Result<KernelSpec, String> {
    s.parse().map_err(|e: AlignError| e.to_string())
}

#[derive(Debug, Args)]
pub struct AlignArgs {
    /// Left representation (`.csv` or RALN).
    #[arg(long)]
    pub left: PathBuf,
    #[arg(long)]
    pub right: PathBuf,
    /// linear | rbf:<gamma> | rbf:median | precomputed, optionally `+normalized`.
    #[arg(long, default_value = "linear", value_parser = kernel)]
    pub kernel: KernelSpec,
    /// Kernel for the right side if different.
    #[arg(long, value_parser = kernel)]
    pub kernel_right: Option<KernelSpec>,
    /// Report `ka` on double-centered Grams.
    #[arg(long)]
    pub center: bool,
    /// Also report the off-diagonal KA.
    #[arg(long)]
    pub unbiased: bool,
    /// Comma-separated metric names or `all`.
    #[arg(long, default_value = "all")]
    pub metric: String,
    /// Absolute covariance ridge for the Gaussian metrics.
    #[arg(long)]
    pub ridge: Option<f64>,
    #[arg(long)]
    pub kcc_kappa: Option<f64>,
    #[arg(long)]
    pub kmi_kappa: Option<f64>,
    /// Record failing metrics as skipped instead of stopping.
    #[arg(long)]
    pub skip_failures: bool,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum ModeArg {
    FitOnly,
    Lemma2,
    Thm2,
    Lower,
    Sandwich,
}

impl From<ModeArg> for StitchMode {
    fn from(m: ModeArg) -> Self {
        match m {
            ModeArg::FitOnly => StitchMode::FitOnly,
            ModeArg::Lemma2 => StitchMode::Lemma2,
            ModeArg::Thm2 => StitchMode::Thm2,
            ModeArg::Lower => StitchMode::Lower,
            ModeArg::Sandwich => StitchMode::Sandwich,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum ContainmentArg {
    Certified,
    Unknown,
}

impl From<ContainmentArg> for Containment {
    fn from(c: ContainmentArg) -> Self {
        match c {
            ContainmentArg::Certified => Containment::Certified,
            ContainmentArg::Unknown => Containment::Unknown,
        }
    }
}

/// `ols` or `ridge:<lambda>`.
pub fn parse_method(s: &str) -> Result<StitchMethod, String> {
    match s {
        "ols" => Ok(StitchMethod::Ols),
        _ => s
            .strip_prefix("ridge:")
            .and_then(|l| l.parse().ok())
            .map(StitchMethod::Ridge)
            .ok_or_else(|| format!("expected 'ols' or 'ridge:<lambda>', got '{s}'")),
    }
}

/// Risk basis before the seed is known.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum BasisArg {
    InSample,
    HeldOut(f64),
}

impl BasisArg {
    pub fn with_seed(self, seed: u64) -> RiskBasis {
        match self {
            BasisArg::InSample => RiskBasis::InSample,
            BasisArg::HeldOut(fit_fraction) => RiskBasis::HeldOut { fit_fraction, seed },
        }
    }
}

/// `in-sample` or `held-out:<fit fraction>`.
pub fn parse_basis(s: &str) -> Result<BasisArg, String> {
    match s {
        "in-sample" => Ok(BasisArg::InSample),
        _ => s
            .strip_prefix("held-out:")
            .and_then(|f| f.parse().ok())
            .map(BasisArg::HeldOut)
            .ok_or_else(|| format!("expected 'in-sample' or 'held-out:<fraction>', got '{s}'")),
    }
}

#[derive(Debug, Args)]
pub struct StitchArgs {
    #[arg(long)]
    pub left: PathBuf,
    #[arg(long)]
    pub right: PathBuf,
    /// `n x t` targets, CSV without header. Required except in fit-only mode.
    #[arg(long)]
    pub targets: Option<PathBuf>,
    #[arg(long, value_enum, default_value_t = ModeArg::FitOnly)]
    pub mode: ModeArg,
    #[arg(long, default_value = "ols", value_parser = parse_method)]
    pub method: StitchMethod,
    #[arg(long, default_value = "in-sample", value_parser = parse_basis)]
    pub basis: BasisArg,
    /// Whether the stitched head class is known to lie in the left head class.
    #[arg(long, value_enum, default_value_t = ContainmentArg::Unknown)]
    pub containment: ContainmentArg,
    /// Right head output weights `W` (`t` rows). Without `--head-inner` the
    /// head is `z ↦ W z`; default is a least-squares linear head.
    #[arg(long)]
    pub head_weights: Option<PathBuf>,
    /// Inner weights `V`, making the head `z ↦ W tanh(V z)`.
    #[arg(long, requires = "head_weights")]
    pub head_inner: Option<PathBuf>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, ValueEnum)]
pub enum TaskMetric {
    Kta,
    KtaOffdiagonal,
    Kare,
    CumulativePower,
    SourceCondition,
    Parzen,
}

impl TaskMetric {
    pub const ALL: [TaskMetric; 6] = [
        TaskMetric::Kta,
        TaskMetric::KtaOffdiagonal,
        TaskMetric::Kare,
        TaskMetric::CumulativePower,
        TaskMetric::SourceCondition,
        TaskMetric::Parzen,
    ];

    pub fn name(self) -> &'static str {
        match self {
            TaskMetric::Kta => "kta",
            TaskMetric::KtaOffdiagonal => "kta_offdiagonal",
            TaskMetric::Kare => "kare",
            TaskMetric::CumulativePower => "cumulative_power",
            TaskMetric::SourceCondition => "source_condition",
            TaskMetric::Parzen => "parzen",
        }
    }

    pub fn parse_list(s: &str) -> Result<Vec<TaskMetric>, String> {
        if s.trim() == "all" {
            return Ok(Self::ALL.to_vec());
        }
        let mut out: Vec<TaskMetric> = s
            .split(',')
            .map(|m| {
                let m = m.trim();
                Self::ALL
                    .into_iter()
                    .find(|t| t.name() == m)
                    .ok_or_else(|| format!("unknown task metric '{m}'"))
            })
            .collect::<Result<_, _>>()?;
        out.sort();
        out.dedup();
        Ok(out)
    }
}

pub fn parse_f64_list(s: &str) -> Result<Vec<f64>, String> {
    s.split(',')
        .map(|v| {
            v.trim()
                .parse()
                .map_err(|_| format!("'{v}' is not a number"))
        })
        .collect()
}

pub fn parse_usize_list(s: &str) -> Result<Vec<usize>, String> {
    s.split(',')
        .map(|v| {
            v.trim()
                .parse()
                .map_err(|_| format!("'{v}' is not a count"))
        })
        .collect()
}

#[derive(Debug, Args)]
pub struct TaskArgs {
    /// Representation, or an `n x n` Gram matrix with `--kernel precomputed`.
    #[arg(long)]
    pub repr: PathBuf,
    /// Targets CSV; the first column is used.
    #[arg(long)]
    pub targets: PathBuf,
    #[arg(long, default_value = "linear", value_parser = kernel)]
    pub kernel: KernelSpec,
    /// Double-center the Gram matrix first.
    #[arg(long)]
    pub center: bool,
    /// Comma-separated: kta, kta_offdiagonal, kare, cumulative_power,
    /// source_condition, parzen; or `all`.
    #[arg(long, default_value = "all", value_parser = TaskMetric::parse_list)]
    pub metric: ::std::vec::Vec<TaskMetric>,
    /// KARE ridge grid.
    #[arg(long, default_value = "1e-4,1e-2,1,100", value_parser = parse_f64_list)]
    pub lambdas: ::std::vec::Vec<f64>,
    /// Source-condition exponent `r`.
    #[arg(long, default_value_t = 0.5)]
    pub source_r: f64,
    #[arg(long)]
    pub skip_failures: bool,
}

#[derive(Debug, Args)]
pub struct SynthArgs {
    /// Spec file, JSON or `key = value` lines.
    #[arg(long)]
    pub config: PathBuf,
    #[arg(long)]
    pub n: usize,
    /// Destination of the left features (`.csv` for CSV, otherwise RALN).
    #[arg(long)]
    pub out_left: PathBuf,
    #[arg(long)]
    pub out_right: PathBuf,
}

#[derive(Debug, Args)]
pub struct ConcentrateArgs {
    #[arg(long)]
    pub config: PathBuf,
    /// Comma-separated sample sizes.
    #[arg(long, default_value = "64,256,1024", value_parser = parse_usize_list)]
    pub n_grid: ::std::vec::Vec<usize>,
    #[arg(long, default_value_t = 1000)]
    pub trials: usize,
    #[arg(long, default_value_t = 0.05)]
    pub delta: f64,
    /// Per-trial deviations as CSV (`n,trial,deviation`).
    #[arg(long)]
    pub deviations: Option<PathBuf>,
}
