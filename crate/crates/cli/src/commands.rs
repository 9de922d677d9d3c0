use std::collections::BTreeMap;
use std::fs::File;
use std::path::Path;

use repalign_core::concentration::{self, ConcentrationSweep};
use repalign_core::io::{self, SyntheticConfig};
use repalign_core::metrics::{self, AlignOptions, AlignmentReport, Metric, Ridge};
use repalign_core::stitching::{
    self, check_lemma_linear_heads, check_lower_bound, check_theorem2_bound,
    check_theorem3_sandwich, fit_linear_map, fit_only, HeadFunction, LowerBoundOptions,
    StitchMethod, StitchReport,
};
use repalign_core::synth::{self, OracleValues};
use repalign_core::task::{self, KareSolver, TaskSpectrumProfile};
use repalign_core::{kernels, AlignError, DMatrix, PairedDataset, Result, Targets};
use serde::Serialize;

use crate::args::*;
use crate::output::{self, num};

/// How a successful run ended.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Outcome {
    Clean,
    /// An asserted bound failed; the report was still written.
    BoundViolation,
}

fn path_str(p: &Path) -> String {
    p.display().to_string()
}

fn read_matrix(path: &Path) -> Result<DMatrix<f64>> {
    io::read_csv_matrix(File::open(path)?, false)
}

fn read_pair(left: &Path, right: &Path) -> Result<PairedDataset> {
    PairedDataset::new(io::read_repr_auto(left)?, io::read_repr_auto(right)?)
}

fn write_repr_auto(rs: &repalign_core::RepresentationSet, path: &Path) -> Result<()> {
    match path.extension().and_then(|e| e.to_str()) {
        Some(ext) if ext.eq_ignore_ascii_case("csv") => io::write_csv_repr(rs, path),
        _ => io::write_repr(rs, path),
    }
}

pub fn align(a: &AlignArgs, c: &Common) -> Result<Outcome> {
    let p = read_pair(&a.left, &a.right)?;
    let opts = AlignOptions {
        metrics: Metric::parse_list(&a.metric)?,
        kernel_left: a.kernel,
        kernel_right: a.kernel_right.unwrap_or(a.kernel),
        center: a.center,
        unbiased: a.unbiased,
        ridge: a.ridge.map_or(Ridge::Default, Ridge::Absolute),
        kcc_kappa: a.kcc_kappa.unwrap_or(AlignOptions::default().kcc_kappa),
        kmi_kappa: a.kmi_kappa,
        skip_failures: a.skip_failures,
    };
    let mut r = metrics::align(&p, &opts)?;
    let echo = [
        ("command", "align".to_string()),
        ("left", path_str(&a.left)),
        ("right", path_str(&a.right)),
        ("metric", a.metric.clone()),
    ];
    r.config.extend(echo.map(|(k, v)| (k.to_string(), v)));
    output::print_alignment(&r);
    output::emit(
        &r,
        c.out.as_deref(),
        c.format,
        &output::ALIGN_HEADER,
        || output::alignment_rows(&r),
    )?;
    Ok(Outcome::Clean)
}

fn head_from_files(w: &Path, v: Option<&Path>) -> Result<HeadFunction> {
    let w = read_matrix(w)?;
    match v {
        Some(v) => HeadFunction::tanh_linear(w, read_matrix(v)?),
        None => HeadFunction::linear(w),
    }
}

pub fn stitch(a: &StitchArgs, c: &Common) -> Result<Outcome> {
    let seed = c.seed.unwrap_or(0);
    let basis = a.basis.with_seed(seed);
    let mut p = read_pair(&a.left, &a.right)?;
    if let Some(t) = &a.targets {
        p = p.with_targets(Targets::Real(read_matrix(t)?))?;
    } else if a.mode != ModeArg::FitOnly {
        return Err(AlignError::InvalidParameter(
            "--targets is required outside fit-only mode".into(),
        ));
    }
    let given_head = a
        .head_weights
        .as_deref()
        .map(|w| head_from_files(w, a.head_inner.as_deref()))
        .transpose()?;
    let linear_head = || -> Result<Option<DMatrix<f64>>> {
        match &given_head {
            None => Ok(None),
            Some(h) => h.linear_weights().cloned().map(Some).ok_or_else(|| {
                AlignError::InvalidParameter(
                    "this mode needs a linear head (omit --head-inner)".into(),
                )
            }),
        }
    };
    let containment = a.containment.into();
    let mut r: StitchReport = match a.mode {
        ModeArg::FitOnly => fit_only(&p, a.method, basis)?,
        ModeArg::Lemma2 => check_lemma_linear_heads(&p, linear_head()?.as_ref())?,
        ModeArg::Thm2 => {
            let head = match given_head.clone() {
                Some(h) => h,
                None => {
                    let y = p.targets().expect("checked above").to_matrix();
                    HeadFunction::linear(
                        fit_linear_map(p.right().data(), &y, StitchMethod::Ols)?.0,
                    )?
                }
            };
            check_theorem2_bound(&p, &head, basis)?
        }
        ModeArg::Lower => {
            let opts = LowerBoundOptions {
                seed,
                ..LowerBoundOptions::default()
            };
            check_lower_bound(&p, linear_head()?.as_ref(), containment, &opts)?
        }
        ModeArg::Sandwich => check_theorem3_sandwich(&p, containment, basis)?,
    };
    if a.mode == ModeArg::Thm2 && given_head.is_none() {
        r.notes
            .push("right head is the least-squares linear map fitted on all samples".into());
    }
    let mut echo = vec![
        ("command", "stitch".to_string()),
        ("left", path_str(&a.left)),
        ("right", path_str(&a.right)),
        ("mode", format!("{:?}", stitching::StitchMode::from(a.mode))),
        ("method", format!("{:?}", a.method)),
        ("basis", format!("{basis:?}")),
        ("containment", format!("{:?}", a.containment).to_lowercase()),
        ("seed", seed.to_string()),
    ];
    if let Some(t) = &a.targets {
        echo.push(("targets", path_str(t)));
    }
    if let Some(w) = &a.head_weights {
        echo.push(("head_weights", path_str(w)));
    }
    if let Some(v) = &a.head_inner {
        echo.push(("head_inner", path_str(v)));
    }
    r.config
        .extend(echo.into_iter().map(|(k, v)| (k.to_string(), v)));
    output::print_stitch(&r);
    output::emit(
        &r,
        c.out.as_deref(),
        c.format,
        &output::STITCH_HEADER,
        || output::stitch_rows(&r),
    )?;
    Ok(if r.all_asserted_hold() {
        Outcome::Clean
    } else {
        Outcome::BoundViolation
    })
}

fn task_metric(
    r: &mut AlignmentReport,
    m: TaskMetric,
    k: &repalign_core::GramMatrix,
    y: &repalign_core::DVector<f64>,
    a: &TaskArgs,
) -> Result<()> {
    match m {
        TaskMetric::Kta => r.set("kta", task::kta(k, y)?),
        TaskMetric::KtaOffdiagonal => r.set("kta_offdiagonal", task::kta_offdiagonal(k, y)?),
        TaskMetric::Kare => {
            let values = KareSolver::new(k, y)?.sweep(&a.lambdas)?;
            r.series.insert(
                "kare".into(),
                a.lambdas.iter().copied().zip(values).collect(),
            );
        }
        TaskMetric::CumulativePower => {
            let profile = TaskSpectrumProfile::from_data(k, y)?;
            let cdf = task::cumulative_power(&profile)?;
            r.series.insert(
                "cumulative_power".into(),
                cdf.into_iter()
                    .enumerate()
                    .map(|(i, v)| ((i + 1) as f64, v))
                    .collect(),
            );
        }
        TaskMetric::SourceCondition => {
            let profile = TaskSpectrumProfile::from_data(k, y)?;
            let d = task::source_condition_diagnostic(&profile, a.source_r)?;
            if d.partial_sum.is_finite() {
                r.set("source_partial_sum", d.partial_sum);
            }
            if let Some(s) = d.tail_slope {
                r.set("source_tail_slope", s);
            }
            r.set("source_divergent", if d.divergent { 1.0 } else { 0.0 });
            r.convention("source_r", a.source_r);
        }
        TaskMetric::Parzen => {
            let pr = task::parzen_from_gram(k, y)?;
            r.set("parzen_risk", pr.risk);
            r.set("parzen_risk_second_moment", pr.risk_second_moment);
            r.set("parzen_bound", pr.bound);
            r.set("parzen_bound_offdiagonal", pr.bound_offdiagonal);
            r.set("parzen_normalization_ratio", pr.normalization_ratio);
            r.set(
                "parzen_normalization_flag",
                if pr.normalization_flag { 1.0 } else { 0.0 },
            );
            r.set("parzen_bound_holds", if pr.bound_holds { 1.0 } else { 0.0 });
        }
    }
    Ok(())
}

pub fn task(a: &TaskArgs, c: &Common) -> Result<Outcome> {
    let rs = io::read_repr_auto(&a.repr)?;
    let y_all = read_matrix(&a.targets)?;
    if y_all.nrows() != rs.sample_count() {
        return Err(AlignError::MismatchedSampleCount {
            left: rs.sample_count(),
            right: y_all.nrows(),
        });
    }
    let y = y_all.column(0).into_owned();
    let mut k = kernels::gram(&rs, &a.kernel)?;
    if a.center {
        k = kernels::center(&k);
    }
    let mut r = AlignmentReport::new(rs.sample_count());
    r.kernels.insert("repr".into(), a.kernel.to_string());
    r.convention("centered", a.center);
    for &m in &a.metric {
        if let Err(e) = task_metric(&mut r, m, &k, &y, a) {
            if !a.skip_failures {
                return Err(e);
            }
            r.skipped.insert(m.name().into(), e.code().into());
        }
    }
    let names: Vec<&str> = a.metric.iter().map(|m| m.name()).collect();
    let echo = [
        ("command", "task".to_string()),
        ("repr", path_str(&a.repr)),
        ("targets", path_str(&a.targets)),
        ("metric", names.join(",")),
        (
            "lambdas",
            a.lambdas
                .iter()
                .map(|l| num(*l))
                .collect::<Vec<_>>()
                .join(","),
        ),
    ];
    r.config.extend(echo.map(|(k, v)| (k.to_string(), v)));
    output::print_alignment(&r);
    output::emit(
        &r,
        c.out.as_deref(),
        c.format,
        &output::ALIGN_HEADER,
        || output::alignment_rows(&r),
    )?;
    Ok(Outcome::Clean)
}

fn load_spec(path: &Path, seed: Option<u64>) -> Result<synth::SyntheticSpec> {
    let mut spec = io::read_synthetic_config(path)?;
    if let Some(s) = seed {
        spec.seed = s;
    }
    Ok(spec)
}

#[derive(Serialize)]
struct SynthReport {
    schema_version: u32,
    n: usize,
    config: SyntheticConfig,
    oracle: OracleValues,
    outputs: BTreeMap<String, String>,
}

pub fn synth(a: &SynthArgs, c: &Common) -> Result<Outcome> {
    let spec = load_spec(&a.config, c.seed)?;
    let (p, oracle) = synth::generate(&spec, a.n)?;
    write_repr_auto(p.left(), &a.out_left)?;
    write_repr_auto(p.right(), &a.out_right)?;
    let report = SynthReport {
        schema_version: metrics::REPORT_SCHEMA_VERSION,
        n: a.n,
        config: SyntheticConfig::from_spec(&spec),
        oracle,
        outputs: BTreeMap::from([
            ("left".to_string(), path_str(&a.out_left)),
            ("right".to_string(), path_str(&a.out_right)),
        ]),
    };
    println!("seed = {}", spec.seed);
    println!("n = {}", a.n);
    let o = &report.oracle;
    for (k, v) in [
        ("ka", o.ka),
        ("cka", o.cka),
        ("hsic", o.hsic),
        ("coco", o.coco),
        ("a_tilde", o.a_tilde),
    ] {
        println!("oracle {k}  {}", num(v));
    }
    output::emit(
        &report,
        c.out.as_deref(),
        c.format,
        &["name", "value"],
        || {
            vec![
                vec!["ka".into(), num(o.ka)],
                vec!["cka".into(), num(o.cka)],
                vec!["hsic".into(), num(o.hsic)],
                vec!["coco".into(), num(o.coco)],
                vec!["gaussian_w2".into(), num(o.gaussian_w2)],
                vec!["a_tilde".into(), num(o.a_tilde)],
            ]
        },
    )?;
    Ok(Outcome::Clean)
}

#[derive(Serialize)]
struct ConcentrateReport {
    schema_version: u32,
    config: SyntheticConfig,
    delta: f64,
    trials: usize,
    #[serde(flatten)]
    sweep: ConcentrationSweep,
}

pub fn concentrate(a: &ConcentrateArgs, c: &Common) -> Result<Outcome> {
    let spec = load_spec(&a.config, c.seed)?;
    let sweep = concentration::run_sweep(&spec, &a.n_grid, a.trials, a.delta)?;
    println!("seed = {}", spec.seed);
    println!("reference n = {}", sweep.reference.n_ref);
    for r in &sweep.results {
        println!(
            "n = {:>6}  bound {}  violation rate {} (ceiling {})  median deviation {}{}",
            r.n,
            num(r.bound),
            num(r.violation_rate),
            num(r.violation_ceiling),
            num(r.median_deviation),
            if r.within_ceiling { "" } else { "  VIOLATED" }
        );
    }
    if let Some(s) = sweep.rate_exponent {
        println!("rate exponent {}", num(s));
    }
    if let Some(path) = &a.deviations {
        let rows: Vec<Vec<String>> = sweep
            .results
            .iter()
            .flat_map(|r| {
                r.deviations
                    .iter()
                    .enumerate()
                    .map(move |(t, d)| vec![r.n.to_string(), t.to_string(), num(*d)])
            })
            .collect();
        output::write_rows(path, &["n", "trial", "deviation"], &rows)?;
    }
    let violated = sweep.results.iter().any(|r| !r.within_ceiling);
    let report = ConcentrateReport {
        schema_version: metrics::REPORT_SCHEMA_VERSION,
        config: SyntheticConfig::from_spec(&spec),
        delta: a.delta,
        trials: a.trials,
        sweep,
    };
    output::emit(
        &report,
        c.out.as_deref(),
        c.format,
        &[
            "n",
            "bound",
            "violation_rate",
            "violation_ceiling",
            "median_deviation",
        ],
        || {
            report
                .sweep
                .results
                .iter()
                .map(|r| {
                    vec![
                        r.n.to_string(),
                        num(r.bound),
                        num(r.violation_rate),
                        num(r.violation_ceiling),
                        num(r.median_deviation),
                    ]
                })
                .collect()
        },
    )?;
    Ok(if violated {
        Outcome::BoundViolation
    } else {
        Outcome::Clean
    })
}
