use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use serde_json::Value;
use tempfile::TempDir;

fn repalign(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_repalign"))
        .args(args)
        .output()
        .expect("binary runs")
}

fn code(o: &Output) -> i32 {
    o.status.code().expect("exit code")
}

fn stderr_code(o: &Output) -> String {
    let v: Value = serde_json::from_slice(&o.stderr).expect("stderr is JSON");
    v["error"]["code"].as_str().unwrap().to_string()
}

fn json(path: &Path) -> Value {
    serde_json::from_slice(&std::fs::read(path).unwrap()).unwrap()
}

fn p(dir: &TempDir, name: &str) -> PathBuf {
    dir.path().join(name)
}

fn s(p: &Path) -> &str {
    p.to_str().unwrap()
}

const SPEC: &str = "ambient_dim = 8\neta1 = 1, 0.5, 0.25\neta2 = 0.8, 0.4\n\
                    overlap = 0.7, 0.1; 0.2, 0.5; 0, 0.3\nseed = 3\n";

fn synth(dir: &TempDir, n: usize, ext: &str) -> (PathBuf, PathBuf) {
    let cfg = p(dir, "spec.cfg");
    std::fs::write(&cfg, SPEC).unwrap();
    let (l, r) = (p(dir, &format!("l.{ext}")), p(dir, &format!("r.{ext}")));
    let o = repalign(&[
        "synth",
        "--config",
        s(&cfg),
        "--n",
        &n.to_string(),
        "--out-left",
        s(&l),
        "--out-right",
        s(&r),
        "--out",
        s(&p(dir, "synth.json")),
    ]);
    assert_eq!(code(&o), 0, "{}", String::from_utf8_lossy(&o.stderr));
    (l, r)
}

fn write_csv(path: &Path, rows: &[Vec<f64>]) {
    let text: String = rows
        .iter()
        .map(|r| r.iter().map(f64::to_string).collect::<Vec<_>>().join(",") + "\n")
        .collect();
    std::fs::write(path, text).unwrap();
}

#[test]
fn align_with_itself_gives_unit_cka() {
    let dir = TempDir::new().unwrap();
    let (l, _) = synth(&dir, 64, "raln");
    let out = p(&dir, "a.json");
    let o = repalign(&[
        "align",
        "--left",
        s(&l),
        "--right",
        s(&l),
        "--metric",
        "cka",
        "--out",
        s(&out),
    ]);
    assert_eq!(code(&o), 0);
    let v = json(&out);
    assert!((v["metrics"]["cka"].as_f64().unwrap() - 1.0).abs() < 1e-12);
    assert_eq!(v["schema_version"], 1);
    assert_eq!(v["config"]["metric"], "cka");
}

#[test]
fn mismatched_sample_counts_exit_2() {
    let dir = TempDir::new().unwrap();
    let a = p(&dir, "a.csv");
    let b = p(&dir, "b.csv");
    write_csv(&a, &[vec![1.0, 2.0], vec![3.0, 4.0], vec![5.0, 7.0]]);
    write_csv(&b, &[vec![1.0], vec![2.0]]);
    let o = repalign(&["align", "--left", s(&a), "--right", s(&b)]);
    assert_eq!(code(&o), 2);
    assert_eq!(stderr_code(&o), "MismatchedSampleCount");
}

#[test]
fn align_all_matches_oracles() {
    let dir = TempDir::new().unwrap();
    let (l, r) = synth(&dir, 800, "raln");
    let out = p(&dir, "a.json");
    let o = repalign(&[
        "align",
        "--left",
        s(&l),
        "--right",
        s(&r),
        "--metric",
        "all",
        "--out",
        s(&out),
    ]);
    assert_eq!(code(&o), 0, "{}", String::from_utf8_lossy(&o.stderr));
    let v = json(&out);
    let oracle = json(&p(&dir, "synth.json"))["oracle"].clone();
    for (metric, key, band) in [
        ("cka", "cka", 0.06),
        ("hsic", "hsic", 0.06),
        ("coco", "coco", 0.1),
        ("gaussian_mi", "gaussian_mi", 0.06),
        ("gaussian_w2", "gaussian_w2", 0.06),
    ] {
        let got = v["metrics"][metric].as_f64().unwrap();
        let want = oracle[key].as_f64().unwrap();
        assert!((got - want).abs() < band, "{metric}: {got} vs {want}");
    }
    assert!(v["skipped"].as_object().unwrap().is_empty());
    let (ka, ff) = (
        v["metrics"]["ka"].as_f64().unwrap(),
        v["metrics"]["ka_feature_form"].as_f64().unwrap(),
    );
    assert!((ka - ff).abs() < 1e-10 * ka);
}

#[test]
fn unrealizable_overlap_exit_2() {
    let dir = TempDir::new().unwrap();
    let cfg = p(&dir, "bad.cfg");
    std::fs::write(&cfg, "ambient_dim = 4\neta1 = 1\neta2 = 1\noverlap = 1.5\n").unwrap();
    let o = repalign(&[
        "synth",
        "--config",
        s(&cfg),
        "--n",
        "10",
        "--out-left",
        s(&p(&dir, "l")),
        "--out-right",
        s(&p(&dir, "r")),
    ]);
    assert_eq!(code(&o), 2);
    assert_eq!(stderr_code(&o), "UnrealizableOverlap");
}

#[test]
fn synth_is_reproducible_and_seed_overridable() {
    let dir = TempDir::new().unwrap();
    let (l, r) = synth(&dir, 50, "raln");
    let first = (
        std::fs::read(&l).unwrap(),
        std::fs::read(&r).unwrap(),
        std::fs::read(p(&dir, "synth.json")).unwrap(),
    );
    synth(&dir, 50, "raln");
    assert_eq!(first.0, std::fs::read(&l).unwrap());
    assert_eq!(first.1, std::fs::read(&r).unwrap());
    assert_eq!(first.2, std::fs::read(p(&dir, "synth.json")).unwrap());
    let o = repalign(&[
        "--seed",
        "99",
        "synth",
        "--config",
        s(&p(&dir, "spec.cfg")),
        "--n",
        "50",
        "--out-left",
        s(&l),
        "--out-right",
        s(&r),
        "--out",
        s(&p(&dir, "synth.json")),
    ]);
    assert_eq!(code(&o), 0);
    assert_ne!(first.0, std::fs::read(&l).unwrap());
    assert_eq!(json(&p(&dir, "synth.json"))["config"]["seed"], 99);
}

#[test]
fn stitch_fit_only_reports_a_tilde_without_assertions() {
    let dir = TempDir::new().unwrap();
    let (l, r) = synth(&dir, 500, "csv");
    let out = p(&dir, "s.json");
    let o = repalign(&[
        "stitch",
        "--left",
        s(&l),
        "--right",
        s(&r),
        "--mode",
        "fit-only",
        "--out",
        s(&out),
    ]);
    assert_eq!(code(&o), 0, "{}", String::from_utf8_lossy(&o.stderr));
    let v = json(&out);
    assert!(v["a_tilde"].as_f64().unwrap() > 0.0);
    assert!(v["inequalities"]
        .as_array()
        .unwrap()
        .iter()
        .all(|c| c["asserted"] == false));
    assert_eq!(v["mode"], "fit-only");
}

fn linear_targets(dir: &TempDir, left: &Path, w: &[f64]) -> PathBuf {
    let f = repalign_core::io::read_repr_auto(left).unwrap();
    let rows: Vec<Vec<f64>> = f
        .data()
        .row_iter()
        .map(|row| vec![row.iter().zip(w).map(|(a, b)| a * b).sum::<f64>()])
        .collect();
    let path = p(dir, "y.csv");
    write_csv(&path, &rows);
    path
}

#[test]
fn stitch_lemma2_equality() {
    let dir = TempDir::new().unwrap();
    let (l, r) = synth(&dir, 300, "raln");
    let y = linear_targets(&dir, &r, &[1.0, -2.0]);
    let out = p(&dir, "s.json");
    let o = repalign(&[
        "stitch",
        "--left",
        s(&l),
        "--right",
        s(&r),
        "--targets",
        s(&y),
        "--mode",
        "lemma2",
        "--out",
        s(&out),
    ]);
    assert_eq!(code(&o), 0, "{}", String::from_utf8_lossy(&o.stderr));
    let v = json(&out);
    let eq = &v["inequalities"][0];
    assert_eq!(eq["relation"], "==");
    assert!(eq["slack"].as_f64().unwrap().abs() < 1e-8);
}

#[test]
fn stitch_thm2_with_tanh_head() {
    let dir = TempDir::new().unwrap();
    let (l, r) = synth(&dir, 400, "raln");
    let w = p(&dir, "w.csv");
    let v = p(&dir, "v.csv");
    write_csv(&w, &[vec![0.7, -1.1, 0.4]]);
    write_csv(&v, &[vec![1.0, 0.5], vec![-0.3, 1.2], vec![0.8, 0.8]]);
    let right = repalign_core::io::read_repr_auto(&r).unwrap();
    let rows: Vec<Vec<f64>> = right
        .data()
        .row_iter()
        .map(|z| {
            let h = [
                z[0] + 0.5 * z[1],
                -0.3 * z[0] + 1.2 * z[1],
                0.8 * z[0] + 0.8 * z[1],
            ];
            vec![0.7 * h[0].tanh() - 1.1 * h[1].tanh() + 0.4 * h[2].tanh() + 0.05]
        })
        .collect();
    let y = p(&dir, "y.csv");
    write_csv(&y, &rows);
    let out = p(&dir, "s.json");
    let o = repalign(&[
        "stitch",
        "--left",
        s(&l),
        "--right",
        s(&r),
        "--targets",
        s(&y),
        "--mode",
        "thm2",
        "--head-weights",
        s(&w),
        "--head-inner",
        s(&v),
        "--basis",
        "held-out:0.5",
        "--seed",
        "4",
        "--out",
        s(&out),
    ]);
    assert_eq!(code(&o), 0, "{}", String::from_utf8_lossy(&o.stderr));
    let rep = json(&out);
    assert!(rep["inequalities"]
        .as_array()
        .unwrap()
        .iter()
        .all(|c| c["satisfied"] == true));
    assert_eq!(rep["config"]["seed"], "4");
    assert!(rep["kappa"].as_f64().unwrap() > 0.0);
}

#[test]
fn stitch_without_targets_is_a_validation_error() {
    let dir = TempDir::new().unwrap();
    let (l, r) = synth(&dir, 40, "raln");
    let o = repalign(&[
        "stitch",
        "--left",
        s(&l),
        "--right",
        s(&r),
        "--mode",
        "thm2",
    ]);
    assert_eq!(code(&o), 2);
}

#[test]
fn stitch_lower_needs_containment() {
    let dir = TempDir::new().unwrap();
    let (l, r) = synth(&dir, 200, "raln");
    let y = linear_targets(&dir, &r, &[0.5, 1.0]);
    let args = [
        "stitch",
        "--left",
        s(&l),
        "--right",
        s(&r),
        "--targets",
        s(&y),
        "--mode",
        "lower",
    ];
    let o = repalign(&args);
    assert_eq!(code(&o), 2);
    assert_eq!(stderr_code(&o), "ContainmentNotEstablished");
    let mut certified = args.to_vec();
    certified.extend(["--containment", "certified"]);
    assert_eq!(code(&repalign(&certified)), 0);
}

#[test]
fn task_oracle_kernel_and_identity_kare() {
    let dir = TempDir::new().unwrap();
    let y: Vec<f64> = (0..12)
        .map(|i| if i % 3 == 0 { 1.0 } else { -1.0 })
        .collect();
    let gram: Vec<Vec<f64>> = y
        .iter()
        .map(|a| y.iter().map(|b| a * b).collect())
        .collect();
    let ident: Vec<Vec<f64>> = (0..12)
        .map(|i| (0..12).map(|j| if i == j { 1.0 } else { 0.0 }).collect())
        .collect();
    let (k, kid, t) = (p(&dir, "k.csv"), p(&dir, "i.csv"), p(&dir, "y.csv"));
    write_csv(&k, &gram);
    write_csv(&kid, &ident);
    write_csv(&t, &y.iter().map(|v| vec![*v]).collect::<Vec<_>>());
    let out = p(&dir, "t.json");
    let o = repalign(&[
        "task",
        "--repr",
        s(&k),
        "--targets",
        s(&t),
        "--kernel",
        "precomputed",
        "--metric",
        "kta,parzen,cumulative_power",
        "--out",
        s(&out),
    ]);
    assert_eq!(code(&o), 0, "{}", String::from_utf8_lossy(&o.stderr));
    let v = json(&out);
    assert!((v["metrics"]["kta"].as_f64().unwrap() - 1.0).abs() < 1e-12);
    assert!(v["metrics"]["parzen_bound"].as_f64().unwrap().abs() < 1e-12);
    let cdf: Vec<f64> = v["series"]["cumulative_power"]
        .as_array()
        .unwrap()
        .iter()
        .map(|p| p[1].as_f64().unwrap())
        .collect();
    assert!(cdf.windows(2).all(|w| w[0] <= w[1]));

    let o = repalign(&[
        "task",
        "--repr",
        s(&kid),
        "--targets",
        s(&t),
        "--kernel",
        "precomputed",
        "--metric",
        "kare",
        "--lambdas",
        "1e-4,1,1e6",
        "--out",
        s(&out),
    ]);
    assert_eq!(code(&o), 0, "{}", String::from_utf8_lossy(&o.stderr));
    let v = json(&out);
    for pt in v["series"]["kare"].as_array().unwrap() {
        assert!((pt[1].as_f64().unwrap() - 1.0).abs() < 1e-8);
    }
}

#[test]
fn concentrate_writes_deviations_and_rate() {
    let dir = TempDir::new().unwrap();
    let cfg = p(&dir, "spec.cfg");
    std::fs::write(&cfg, SPEC).unwrap();
    let (out, dev) = (p(&dir, "c.json"), p(&dir, "d.csv"));
    let o = repalign(&[
        "concentrate",
        "--config",
        s(&cfg),
        "--n-grid",
        "64,256,1024",
        "--trials",
        "100",
        "--out",
        s(&out),
        "--deviations",
        s(&dev),
    ]);
    assert_eq!(code(&o), 0, "{}", String::from_utf8_lossy(&o.stderr));
    let v = json(&out);
    let slope = v["rate_exponent"].as_f64().unwrap();
    assert!((-0.8..=-0.2).contains(&slope), "{slope}");
    assert_eq!(v["results"].as_array().unwrap().len(), 3);
    assert_eq!(v["config"]["seed"], 3);
    let text = std::fs::read_to_string(&dev).unwrap();
    assert_eq!(text.lines().count(), 1 + 300);
    assert!(text.starts_with("n,trial,deviation\n"));
}

#[test]
fn thread_count_does_not_change_reports() {
    let dir = TempDir::new().unwrap();
    let (l, r) = synth(&dir, 300, "raln");
    let run = |threads: &str, name: &str| {
        let out = p(&dir, name);
        let o = repalign(&[
            "--threads",
            threads,
            "align",
            "--left",
            s(&l),
            "--right",
            s(&r),
            "--kernel",
            "rbf:median",
            "--metric",
            "all",
            "--skip-failures",
            "--out",
            s(&out),
        ]);
        assert_eq!(code(&o), 0, "{}", String::from_utf8_lossy(&o.stderr));
        std::fs::read(out).unwrap()
    };
    assert_eq!(run("1", "a1.json"), run("4", "a4.json"));
}

#[test]
fn csv_format_and_usage_errors() {
    let dir = TempDir::new().unwrap();
    let (l, r) = synth(&dir, 40, "raln");
    let out = p(&dir, "a.csv");
    let o = repalign(&[
        "align",
        "--left",
        s(&l),
        "--right",
        s(&r),
        "--metric",
        "ka,cka",
        "--format",
        "csv",
        "--out",
        s(&out),
    ]);
    assert_eq!(code(&o), 0);
    let text = std::fs::read_to_string(&out).unwrap();
    assert!(text.starts_with("name,x,value\ncka,,"));
    let o = repalign(&["align", "--left", s(&l)]);
    assert_eq!(code(&o), 2);
    assert_eq!(stderr_code(&o), "UsageError");
    let o = repalign(&[
        "align",
        "--left",
        s(&l),
        "--right",
        s(&r),
        "--metric",
        "nope",
    ]);
    assert_eq!(code(&o), 2);
    assert_eq!(stderr_code(&o), "ParseError");
}
