use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use hqnn_cli::metrics::{parse_metrics, without_wall_seconds, HEADER};

fn bin() -> Command {
    Command::new(env!("CARGO_BIN_EXE_hqnn"))
}

fn configs() -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("../../configs")
}

fn run(args: &[&str]) -> Output {
    bin().args(args).output().expect("binary runs")
}

fn ok(args: &[&str]) -> String {
    let out = run(args);
    assert!(out.status.success(), "{args:?} failed: {}", String::from_utf8_lossy(&out.stderr));
    String::from_utf8(out.stdout).unwrap()
}

fn read(path: &Path) -> String {
    std::fs::read_to_string(path).unwrap()
}

fn write_config(dir: &Path, name: &str, body: &str) -> PathBuf {
    let p = dir.join(name);
    std::fs::write(&p, body).unwrap();
    p
}

fn s(p: &Path) -> &str {
    p.to_str().unwrap()
}

#[test]
fn train_twice_is_deterministic_and_manifest_reproduces() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = configs().join("smoke_cnn_qnn.toml");
    let (a, b, c) = (tmp.path().join("a"), tmp.path().join("b"), tmp.path().join("c"));
    ok(&["train", s(&cfg), "--out", s(&a)]);
    ok(&["train", s(&cfg), "--out", s(&b)]);
    let metrics = read(&a.join("metrics.csv"));
    assert_eq!(without_wall_seconds(&metrics), without_wall_seconds(&read(&b.join("metrics.csv"))));
    let rows = parse_metrics(&metrics).unwrap();
    assert_eq!(rows.len(), 2);

    ok(&["train", s(&a.join("manifest.toml")), "--out", s(&c)]);
    assert_eq!(without_wall_seconds(&metrics), without_wall_seconds(&read(&c.join("metrics.csv"))));
    assert_eq!(read(&a.join("model.json")), read(&c.join("model.json")));

    let manifest = read(&a.join("manifest.toml"));
    assert!(manifest.contains("relabel_map = [0, 1, 2]"), "{manifest}");
    assert!(manifest.contains(&format!("library_version = \"{}\"", hqnn_core::VERSION)));
    assert!(manifest.contains("ansatz = \"proposed\""));
}

#[test]
fn eval_reproduces_last_test_row() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = configs().join("smoke_pca.toml");
    let out = tmp.path().join("run");
    ok(&["train", s(&cfg), "--out", s(&out)]);
    let last = read(&out.join("metrics.csv")).lines().last().unwrap().to_string();
    let fields: Vec<&str> = last.split(',').collect();
    let printed = ok(&["eval", s(&out.join("model.json")), s(&cfg)]);
    assert_eq!(printed, format!("test_loss {}\ntest_acc {}\n", fields[3], fields[4]));
}

#[test]
fn zero_epochs_writes_header_only() {
    let tmp = tempfile::tempdir().unwrap();
    let body = read(&configs().join("smoke_pca.toml")).replace("epochs = 2", "epochs = 0");
    let cfg = write_config(tmp.path(), "zero.toml", &body);
    let out = tmp.path().join("run");
    ok(&["train", s(&cfg), "--out", s(&out)]);
    assert_eq!(read(&out.join("metrics.csv")), format!("{HEADER}\n"));
}

#[test]
fn transfer_run_writes_pretraining_history() {
    let tmp = tempfile::tempdir().unwrap();
    let out = tmp.path().join("run");
    ok(&["train", s(&configs().join("smoke_transfer.toml")), "--out", s(&out)]);
    assert_eq!(parse_metrics(&read(&out.join("pretrain_metrics.csv"))).unwrap().len(), 1);
    assert_eq!(parse_metrics(&read(&out.join("metrics.csv"))).unwrap().len(), 1);
    let model = read(&out.join("model.json"));
    assert!(model.contains("\"frozen_conv\":true"));
}

#[test]
fn gradvar_is_deterministic_with_zero_control() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = configs().join("smoke_pca.toml");
    let (a, b) = (tmp.path().join("a"), tmp.path().join("b"));
    ok(&["gradvar", s(&cfg), "--inits", "20", "--out", s(&a)]);
    ok(&["gradvar", s(&cfg), "--inits", "20", "--out", s(&b)]);
    let text = read(&a.join("gradvar.csv"));
    assert_eq!(text, read(&b.join("gradvar.csv")));
    let controls: Vec<&str> = text.lines().filter(|l| l.contains("zero_readout_control")).collect();
    assert!(!controls.is_empty());
    for line in controls {
        assert!(line.ends_with(",0.000000e0"), "{line}");
    }

    let out = run(&["gradvar", s(&cfg), "--inits", "5", "--out", s(&a)]);
    assert_eq!(out.status.code(), Some(2));
}

#[test]
fn plot_is_deterministic_and_overlays_two_models() {
    let tmp = tempfile::tempdir().unwrap();
    let a = tmp.path().join("a.csv");
    let b = tmp.path().join("b.csv");
    std::fs::write(&a, format!("{HEADER}\n1,0.9,0.5,0.8,0.6,1.0\n2,0.7,0.6,0.6,0.7,1.0\n")).unwrap();
    std::fs::write(&b, format!("{HEADER}\n1,1.2,0.3,1.1,0.4,1.0\n")).unwrap();
    let (p1, p2) = (tmp.path().join("p1.svg"), tmp.path().join("p2.svg"));
    ok(&["plot", s(&a), "--compare", s(&b), "--out", s(&p1)]);
    ok(&["plot", s(&a), "--compare", s(&b), "--out", s(&p2)]);
    let svg = read(&p1);
    assert_eq!(svg, read(&p2));
    assert!(svg.starts_with("<svg") && svg.contains(">epoch<") && svg.contains(">value<"));

    std::fs::write(&b, format!("{HEADER}\n1,0.5,0.5,0.5,0.5,1.0\n2,x,0.5,0.5,0.5,1.0\n")).unwrap();
    let out = run(&["plot", s(&b)]);
    assert_eq!(out.status.code(), Some(3));
    assert!(String::from_utf8_lossy(&out.stderr).contains("line 3"));
}

#[test]
fn error_exit_codes() {
    let tmp = tempfile::tempdir().unwrap();
    let base = read(&configs().join("smoke_pca.toml"));

    let typo = write_config(tmp.path(), "typo.toml", &format!("{base}lerning_rate = 0.1\n"));
    let out = run(&["train", s(&typo), "--out", s(&tmp.path().join("x"))]);
    assert_eq!(out.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&out.stderr).contains("lerning_rate"));

    let empty = write_config(tmp.path(), "empty.toml", &base.replace("classes = [0, 1]", "classes = []"));
    assert_eq!(run(&["train", s(&empty)]).status.code(), Some(2));

    let missing = write_config(
        tmp.path(),
        "missing.toml",
        &base.replace("dataset = \"mnist\"", "dataset = \"mnist\"\ndata_dir = \"/nonexistent/hqnn\""),
    );
    let out = run(&["train", s(&missing), "--out", s(&tmp.path().join("y"))]);
    assert_eq!(out.status.code(), Some(3));

    // a model file from another architecture is refused
    let run_dir = tmp.path().join("pca");
    ok(&["train", s(&configs().join("smoke_pca.toml")), "--out", s(&run_dir)]);
    let out = run(&["eval", s(&run_dir.join("model.json")), s(&configs().join("smoke_cnn_qnn.toml"))]);
    assert_eq!(out.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&out.stderr).contains("architecture"));

    let json = read(&run_dir.join("model.json")).replacen("\"format_version\":1", "\"format_version\":99", 1);
    let bad = tmp.path().join("bad.json");
    std::fs::write(&bad, json).unwrap();
    let out = run(&["eval", s(&bad), s(&configs().join("smoke_pca.toml"))]);
    assert_eq!(out.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&out.stderr).contains("version"));
}

#[test]
fn shipped_configs_parse() {
    let mut n = 0;
    for entry in std::fs::read_dir(configs()).unwrap() {
        let path = entry.unwrap().path();
        if path.extension().is_some_and(|e| e == "toml") {
            hqnn_cli::ExperimentConfig::load(&path).unwrap_or_else(|e| panic!("{}: {e}", path.display()));
            n += 1;
        }
    }
    assert!(n >= 10);
}

#[test]
fn training_errors_map_to_exit_code_four() {
    let e: hqnn_cli::CliError = hqnn_core::HqnnError::Training("nan".into()).into();
    assert_eq!(e.exit_code(), hqnn_cli::EXIT_TRAINING);
    let e: hqnn_cli::CliError = hqnn_core::HqnnError::Encoding("zero bridge".into()).into();
    assert_eq!(e.exit_code(), hqnn_cli::EXIT_TRAINING);
}

#[test]
fn pca_on_a_small_many_class_subset_stays_finite() {
    // a 64-image pixel covariance is rank-deficient; its decomposition must not produce NaN
    let tmp = tempfile::tempdir().unwrap();
    let body = read(&configs().join("pca_8class_dim10.toml"))
        .replace("epochs = 20", "epochs = 1")
        .replace("train_per_class = 250", "train_per_class = 8")
        .replace("test_per_class = 100", "test_per_class = 4");
    let cfg = write_config(tmp.path(), "small.toml", &body);
    let out = tmp.path().join("run");
    ok(&["train", s(&cfg), "--out", s(&out)]);
    assert_eq!(parse_metrics(&read(&out.join("metrics.csv"))).unwrap().len(), 1);
}
