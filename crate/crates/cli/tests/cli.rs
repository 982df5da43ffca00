use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use nmtune::data::{make_mixture, read_features, write_features, Dataset, FeatureFile, MixtureSpec};
use nmtune::heads::{default_config, HeadKind};
use nmtune::report::{
    emit_report, run_once, run_sweep, to_json, AnalyzeReport, DatasetSummary, F1Average, Overrides, ReportFormat,
    SplitSpec, SweepSpec, TrainReport,
};
use nmtune::rng::Rng;
use nmtune::spectral::spectrum_report;
use nmtune::tensor::Matrix;

fn nmtune<I, S>(args: I) -> Output
where
    I: IntoIterator<Item = S>,
    S: AsRef<std::ffi::OsStr>,
{
    Command::new(env!("CARGO_BIN_EXE_nmtune")).args(args).output().expect("binary runs")
}

fn code(out: &Output) -> i32 {
    out.status.code().expect("exit code")
}

fn p(path: &Path) -> &str {
    path.to_str().unwrap()
}

fn mixture(dir: &Path, per_class: usize) -> PathBuf {
    let path = dir.join("mix.nmft");
    let ds = make_mixture(&MixtureSpec {
        num_classes: 3,
        dim: 16,
        per_class,
        center_scale: 5.0,
        noise_sigma: 1.0,
        seed: 0,
    })
    .unwrap();
    write_features(&path, &ds.to_file().unwrap()).unwrap();
    path
}

fn unlabeled(dir: &Path, name: &str, m: &Matrix) -> PathBuf {
    let path = dir.join(name);
    let values = m.as_slice().iter().map(|&v| v as f32).collect();
    write_features(&path, &FeatureFile::new(m.rows(), m.cols(), values, None).unwrap()).unwrap();
    path
}

fn json(bytes: &[u8]) -> serde_json::Value {
    serde_json::from_slice(bytes).unwrap()
}

#[test]
fn analyze_matches_library_call() {
    let dir = tempfile::tempdir().unwrap();
    let mut rng = Rng::new(64);
    let m = Matrix::from_fn(64, 16, |_, _| rng.normal() as f32 as f64);
    let path = unlabeled(dir.path(), "r.nmft", &m);
    let out = nmtune(["analyze", "--features", p(&path)]);
    assert_eq!(code(&out), 0);
    let expected = to_json(&AnalyzeReport::new(spectrum_report(&m).unwrap())).unwrap();
    assert_eq!(out.stdout, expected);
}

#[test]
fn analyze_identity_and_rank_one() {
    let dir = tempfile::tempdir().unwrap();
    let eye = unlabeled(dir.path(), "eye.nmft", &Matrix::identity(4));
    let v = json(&nmtune(["analyze", "--features", p(&eye)]).stdout);
    let ln4 = 4f64.ln();
    assert!((v["spectrum"]["sve"].as_f64().unwrap() - ln4).abs() < 1e-12);
    assert!((v["spectrum"]["lsvr"].as_f64().unwrap() - ln4).abs() < 1e-12);

    let rank1 = Matrix::from_fn(6, 3, |i, j| (i + 1) as f64 * [1.0, 2.0, -1.0][j]);
    let r1 = unlabeled(dir.path(), "r1.nmft", &rank1);
    let v = json(&nmtune(["analyze", "--features", p(&r1)]).stdout);
    assert!(v["spectrum"]["sve"].as_f64().unwrap().abs() < 1e-12);
    assert!(v["spectrum"]["lsvr"].as_f64().unwrap().abs() < 1e-12);
}

#[test]
fn analyze_subsample_and_csv() {
    let dir = tempfile::tempdir().unwrap();
    let path = mixture(dir.path(), 20);
    let out_path = dir.path().join("spec.csv");
    let out = nmtune(["analyze", "--features", p(&path), "--subsample", "30", "--seed", "3", "--format", "csv", "--out", p(&out_path)]);
    assert_eq!(code(&out), 0);
    let text = std::fs::read_to_string(&out_path).unwrap();
    assert_eq!(text.lines().next(), Some("rank,sigma,group"));
    assert_eq!(text.lines().count(), 17);
    let v = json(&nmtune(["analyze", "--features", p(&path), "--subsample", "30", "--seed", "3"]).stdout);
    assert_eq!(v["spectrum"]["scope"], "subsample");
    assert_eq!(v["spectrum"]["sample_count"], 30);
}

#[test]
fn train_defaults_follow_protocol() {
    let dir = tempfile::tempdir().unwrap();
    let path = mixture(dir.path(), 40);
    for (head, lr, wd, lambda) in [("lp", 0.1, 0.0, 0.0), ("mlp", 0.001, 1e-4, 0.0), ("nmtune", 0.001, 1e-4, 0.01)] {
        let out = nmtune(["train", "--features", p(&path), "--head", head]);
        assert_eq!(code(&out), 0, "{}", String::from_utf8_lossy(&out.stderr));
        let c = &json(&out.stdout)["report"]["config"];
        assert_eq!(c["lr"].as_f64(), Some(lr));
        assert_eq!(c["weight_decay"].as_f64(), Some(wd));
        assert_eq!(c["epochs"], 30);
        assert_eq!(c["schedule"], "cosine");
        for term in ["lambda_mse", "lambda_cov", "lambda_svd"] {
            assert_eq!(c["loss_weights"][term].as_f64(), Some(lambda));
        }
    }
}

#[test]
fn train_matches_library_and_writes_checkpoint() {
    let dir = tempfile::tempdir().unwrap();
    let path = mixture(dir.path(), 30);
    let out_dir = dir.path().join("run");
    let out = nmtune([
        "train", "--features", p(&path), "--head", "nmtune", "--epochs", "4", "--batch", "16", "--seed", "5",
        "--noise-ratio", "0.1", "--out", p(&out_dir),
    ]);
    assert_eq!(code(&out), 0, "{}", String::from_utf8_lossy(&out.stderr));

    let data = Dataset::from_file(&read_features(&path).unwrap()).unwrap();
    let split = SplitSpec::default();
    let (tr, ev) = split.apply(&data).unwrap();
    let config = Overrides { epochs: Some(4), batch_size: Some(16), ..Default::default() }.resolve(HeadKind::Nmtune, 5);
    let (trained, report) = run_once(&tr, &ev, HeadKind::Nmtune, 0.1, &config, F1Average::Macro).unwrap();
    let expected = to_json(&TrainReport::new(DatasetSummary::of(&data), split, report)).unwrap();
    assert_eq!(std::fs::read(out_dir.join("report.json")).unwrap(), expected);
    let head = nmtune::heads::checkpoint::load(&out_dir.join("head.nmck")).unwrap();
    assert_eq!(head, trained.head);
}

#[test]
fn nmtune_without_regularizers_reports_like_mlp() {
    let dir = tempfile::tempdir().unwrap();
    let path = mixture(dir.path(), 30);
    let base = ["train", "--features", p(&path), "--epochs", "5", "--batch", "16", "--seed", "2"];
    let mlp = nmtune(base.iter().copied().chain(["--head", "mlp"]));
    let nm = nmtune(base.iter().copied().chain([
        "--head", "nmtune", "--lambda-mse", "0", "--lambda-cov", "0", "--lambda-svd", "0",
    ]));
    let mut a = json(&mlp.stdout);
    let mut b = json(&nm.stdout);
    assert_eq!(a["report"]["head"], "mlp");
    assert_eq!(b["report"]["head"], "nmtune");
    a["report"]["head"] = serde_json::Value::Null;
    b["report"]["head"] = serde_json::Value::Null;
    assert_eq!(a, b);
}

#[test]
fn single_cell_sweep_equals_train() {
    let dir = tempfile::tempdir().unwrap();
    let path = mixture(dir.path(), 30);
    let train = json(&nmtune(["train", "--features", p(&path), "--head", "lp", "--epochs", "3"]).stdout);
    let sweep = json(&nmtune(["sweep", "--features", p(&path), "--ratios", "0", "--heads", "lp", "--seeds", "1", "--epochs", "3"]).stdout);
    assert_eq!(sweep["cells"].as_array().unwrap().len(), 1);
    assert_eq!(sweep["cells"][0]["report"], train["report"]);
}

#[test]
fn sweep_matches_library_and_counts_cells() {
    let dir = tempfile::tempdir().unwrap();
    let path = mixture(dir.path(), 20);
    let out = nmtune([
        "sweep", "--features", p(&path), "--ratios", "0,0.05,0.1,0.2,0.3", "--heads", "lp,mlp", "--seeds", "2",
        "--epochs", "2", "--batch", "16", "--format", "csv",
    ]);
    assert_eq!(code(&out), 0, "{}", String::from_utf8_lossy(&out.stderr));
    assert_eq!(String::from_utf8(out.stdout.clone()).unwrap().lines().count(), 5 * 2 * 2 + 1);

    let data = Dataset::from_file(&read_features(&path).unwrap()).unwrap();
    let spec = SweepSpec {
        ratios: vec![0.0, 0.05, 0.1, 0.2, 0.3],
        heads: vec![HeadKind::LinearProbe, HeadKind::Mlp],
        seeds: vec![0, 1],
        split: SplitSpec::default(),
        overrides: Overrides { epochs: Some(2), batch_size: Some(16), ..Default::default() },
        f1_average: F1Average::Macro,
    };
    let lib = run_sweep(&data, &spec, 1, None).unwrap();
    assert_eq!(out.stdout, emit_report(&lib, ReportFormat::Csv).unwrap());
}

#[test]
fn sweep_is_deterministic_and_resumable() {
    let dir = tempfile::tempdir().unwrap();
    let path = mixture(dir.path(), 20);
    let run = |name: &str, jobs: &str| {
        let out_dir = dir.path().join(name);
        let out = nmtune([
            "sweep", "--features", p(&path), "--ratios", "0,0.2", "--heads", "lp,nmtune", "--seeds", "2", "--epochs",
            "2", "--batch", "16", "--jobs", jobs, "--out", p(&out_dir),
        ]);
        assert_eq!(code(&out), 0, "{}", String::from_utf8_lossy(&out.stderr));
        out_dir
    };
    let a = run("a", "1");
    let b = run("b", "3");
    for f in ["sweep.json", "sweep.csv"] {
        assert_eq!(std::fs::read(a.join(f)).unwrap(), std::fs::read(b.join(f)).unwrap());
    }
    assert_eq!(std::fs::read_dir(a.join("cells")).unwrap().count(), 8);

    // Interrupted run: report and one cell missing.
    let before = std::fs::read(a.join("sweep.json")).unwrap();
    std::fs::remove_file(a.join("sweep.json")).unwrap();
    std::fs::remove_file(a.join("cells/cell-0005.json")).unwrap();
    run("a", "2");
    assert_eq!(std::fs::read(a.join("sweep.json")).unwrap(), before);
}

#[test]
fn synth_is_deterministic_and_learnable() {
    let dir = tempfile::tempdir().unwrap();
    let args = |out: &str| {
        vec![
            "synth".to_string(), "--classes".into(), "3".into(), "--dim".into(), "16".into(), "--per-class".into(),
            "200".into(), "--sigma".into(), "1".into(), "--seed".into(), "0".into(), "--out".into(),
            p(&dir.path().join(out)).to_string(),
        ]
    };
    assert_eq!(code(&nmtune(args("a.nmft"))), 0);
    assert_eq!(code(&nmtune(args("b.nmft"))), 0);
    let a = std::fs::read(dir.path().join("a.nmft")).unwrap();
    assert_eq!(a, std::fs::read(dir.path().join("b.nmft")).unwrap());
    assert_eq!(code(&nmtune(["validate", "--features", p(&dir.path().join("a.nmft"))])), 0);
    let v = json(&nmtune(["train", "--features", p(&dir.path().join("a.nmft")), "--head", "lp"]).stdout);
    assert!(v["report"]["metrics"]["accuracy"].as_f64().unwrap() >= 0.95);
}

#[test]
fn inject_noise_counts_and_identity() {
    let dir = tempfile::tempdir().unwrap();
    let src = dir.path().join("src.nmft");
    let out = nmtune(["synth", "--classes", "10", "--dim", "4", "--per-class", "100", "--seed", "7", "--out", p(&src)]);
    assert_eq!(code(&out), 0);

    let same = dir.path().join("same.nmft");
    assert_eq!(code(&nmtune(["inject-noise", "--features", p(&src), "--ratio", "0", "--out", p(&same)])), 0);
    assert_eq!(std::fs::read(&src).unwrap(), std::fs::read(&same).unwrap());

    let noisy = dir.path().join("noisy.nmft");
    assert_eq!(code(&nmtune(["inject-noise", "--features", p(&src), "--ratio", "0.2", "--seed", "7", "--out", p(&noisy)])), 0);
    let sidecar = json(&std::fs::read(dir.path().join("noisy.nmft.flips.json")).unwrap());
    assert_eq!(sidecar["flipped"], 200);
    let before = read_features(&src).unwrap().labels.unwrap();
    let after = read_features(&noisy).unwrap().labels.unwrap();
    let idx: Vec<usize> = sidecar["indices"].as_array().unwrap().iter().map(|v| v.as_u64().unwrap() as usize).collect();
    assert_eq!(idx.len(), 200);
    let changed: Vec<usize> = (0..before.len()).filter(|&i| before[i] != after[i]).collect();
    assert_eq!(changed, idx);
    for (k, &i) in idx.iter().enumerate() {
        assert_eq!(sidecar["original"][k].as_u64(), Some(u64::from(before[i])));
    }
}

#[test]
fn train_config_matches_default_config_snapshot() {
    let dir = tempfile::tempdir().unwrap();
    let path = mixture(dir.path(), 20);
    let v = json(&nmtune(["train", "--features", p(&path), "--head", "nmtune", "--seed", "9"]).stdout);
    let mut expected = default_config(HeadKind::Nmtune);
    expected.seed = 9;
    assert_eq!(v["report"]["config"], serde_json::to_value(&expected).unwrap());
}

/// Exit status for every error class the CLI can hit.
#[test]
fn exit_codes() {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path();
    let good = mixture(d, 20);
    let bytes = std::fs::read(&good).unwrap();
    let truncated = d.join("trunc.nmft");
    std::fs::write(&truncated, &bytes[..bytes.len() - 7]).unwrap();
    let bad_magic = d.join("magic.nmft");
    let mut b = bytes.clone();
    b[..4].copy_from_slice(b"XXXX");
    std::fs::write(&bad_magic, b).unwrap();
    let no_labels = unlabeled(d, "nolab.nmft", &Matrix::identity(4));
    let zeros = unlabeled(d, "zeros.nmft", &Matrix::zeros(5, 3));
    let one_class = d.join("one.nmft");
    assert_eq!(code(&nmtune(["synth", "--classes", "1", "--dim", "3", "--per-class", "10", "--out", p(&one_class)])), 0);
    let missing = d.join("missing.nmft");
    let out = d.join("o.nmft");

    let g = p(&good);
    let cases: Vec<(Vec<&str>, i32)> = vec![
        (vec!["validate", "--features", g], 0),
        (vec![], 1),
        (vec!["frobnicate"], 1),
        (vec!["train", "--features", g], 1),
        (vec!["train", "--features", g, "--head", "resnet"], 1),
        (vec!["train", "--features", g, "--head", "lp", "--epochs", "0"], 1),
        (vec!["train", "--features", g, "--head", "lp", "--train-fraction", "1"], 1),
        (vec!["analyze", "--features", g, "--format", "xml"], 1),
        (vec!["analyze", "--features", g, "--subsample", "0"], 1),
        (vec!["sweep", "--features", g, "--ratios", "0", "--heads", "lp", "--seeds", "0"], 1),
        (vec!["sweep", "--features", g, "--ratios", "0,1.5", "--heads", "lp", "--seeds", "1"], 1),
        (vec!["sweep", "--features", g, "--ratios", "abc", "--heads", "lp", "--seeds", "1"], 1),
        (vec!["sweep", "--features", g, "--ratios", "0,0", "--heads", "lp", "--seeds", "1"], 1),
        (vec!["synth", "--classes", "0", "--dim", "3", "--per-class", "5", "--out", p(&out)], 1),
        (vec!["synth", "--classes", "2", "--dim", "3", "--per-class", "5", "--sigma", "0", "--out", p(&out)], 1),
        (vec!["inject-noise", "--features", g, "--ratio", "2", "--out", p(&out)], 1),
        (vec!["validate", "--features", p(&truncated)], 2),
        (vec!["validate", "--features", p(&bad_magic)], 2),
        (vec!["validate", "--features", p(&missing)], 2),
        (vec!["analyze", "--features", p(&truncated)], 2),
        (vec!["analyze", "--features", p(&bad_magic)], 2),
        (vec!["train", "--features", p(&no_labels), "--head", "lp"], 2),
        (vec!["train", "--features", p(&bad_magic), "--head", "lp"], 2),
        (vec!["sweep", "--features", p(&truncated), "--ratios", "0", "--heads", "lp", "--seeds", "1"], 2),
        (vec!["inject-noise", "--features", p(&no_labels), "--ratio", "0.1", "--out", p(&out)], 2),
        (vec!["inject-noise", "--features", p(&one_class), "--ratio", "0.2", "--out", p(&out)], 2),
        (vec!["analyze", "--features", p(&zeros)], 3),
        (vec!["train", "--features", g, "--head", "mlp", "--lr", "1e300", "--epochs", "2"], 3),
    ];
    for (args, expected) in cases {
        let out = nmtune(&args);
        assert_eq!(code(&out), expected, "{args:?}: {}", String::from_utf8_lossy(&out.stderr));
        if expected != 0 && !args.is_empty() {
            let err = String::from_utf8(out.stderr).unwrap();
            assert_eq!(err.trim_end().lines().count(), 1, "{args:?}: {err}");
        }
    }
}

#[test]
fn truncation_message_names_the_offset() {
    let dir = tempfile::tempdir().unwrap();
    let good = mixture(dir.path(), 5);
    let bytes = std::fs::read(&good).unwrap();
    let t = dir.path().join("t.nmft");
    std::fs::write(&t, &bytes[..100]).unwrap();
    let out = nmtune(["validate", "--features", p(&t)]);
    assert_eq!(code(&out), 2);
    assert!(String::from_utf8(out.stderr).unwrap().contains("byte offset 100"));
}
