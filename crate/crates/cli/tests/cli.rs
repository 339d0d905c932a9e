use std::collections::BTreeMap;
use std::fs;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use csi_har_cli::archive::{decode, encode, FORMAT_MAJOR};
use csi_har_cli::eval::EvalReport;
use csi_har_cli::{load_model, ArchiveError};
use csi_har_core::metrics::MeanStd;

const BIN: &str = env!("CARGO_BIN_EXE_csi-har");

fn run(args: &[&str]) -> Output {
    Command::new(BIN).args(args).output().expect("binary runs")
}

fn ok(args: &[&str]) -> String {
    let out = run(args);
    assert!(
        out.status.success(),
        "{args:?} failed: {}",
        String::from_utf8_lossy(&out.stderr)
    );
    String::from_utf8(out.stdout).unwrap()
}

fn p(path: &Path) -> &str {
    path.to_str().unwrap()
}

/// Small two-AP dataset: 4 x 48 samples, 192 logical samples.
fn small_dataset(dir: &Path) -> PathBuf {
    let data = dir.join("data");
    ok(&[
        "synth", "--out", p(&data), "--seed", "3", "--subcarriers", "4", "--length", "48", "--aps", "2",
        "--users", "2", "--samples-per-cell", "6", "--noise", "1.5",
    ]);
    data
}

const FAST: [&str; 4] = ["--features", "336", "--folds", "3"];

fn train(data: &Path, out: &Path, topology: &str, aps: &str) -> String {
    let mut args = vec!["train", "--data", p(data), "--topology", topology, "--ap", aps, "--seed", "4", "--out", p(out)];
    args.extend(FAST);
    ok(&args)
}

fn files_under(dir: &Path) -> BTreeMap<PathBuf, Vec<u8>> {
    let mut out = BTreeMap::new();
    let mut stack = vec![dir.to_path_buf()];
    while let Some(d) = stack.pop() {
        for entry in fs::read_dir(&d).unwrap() {
            let path = entry.unwrap().path();
            if path.is_dir() {
                stack.push(path);
            } else {
                out.insert(path.strip_prefix(dir).unwrap().to_path_buf(), fs::read(&path).unwrap());
            }
        }
    }
    out
}

#[test]
fn synth_is_reproducible_and_validates() {
    let tmp = tempfile::tempdir().unwrap();
    let a = small_dataset(tmp.path());
    let b = tmp.path().join("again");
    ok(&[
        "synth", "--out", p(&b), "--seed", "3", "--subcarriers", "4", "--length", "48", "--aps", "2",
        "--users", "2", "--samples-per-cell", "6", "--noise", "1.5",
    ]);
    let (fa, fb) = (files_under(&a), files_under(&b));
    assert_eq!(fa.len(), 1 + 2 * 192);
    assert_eq!(fa, fb);

    let bad = run(&["synth", "--out", p(&tmp.path().join("bad")), "--samples-per-cell", "0"]);
    assert!(!bad.status.success());
    assert!(String::from_utf8_lossy(&bad.stderr).contains("samples_per_cell"));
}

#[test]
fn train_archives_have_topology_arity() {
    let tmp = tempfile::tempdir().unwrap();
    let data = small_dataset(tmp.path());

    let sap = tmp.path().join("sap.model");
    let text = train(&data, &sap, "sap", "1");
    assert!(text.contains("alpha"));
    let m = load_model(&sap).unwrap().model;
    assert_eq!((m.banks.len(), m.activity_heads.len(), m.orientation_heads.len()), (1, 1, 1));

    let cmap = tmp.path().join("cmap.model");
    train(&data, &cmap, "cmap", "1,2");
    let m = load_model(&cmap).unwrap().model;
    assert_eq!(m.activity_heads[0].num_features(), 2 * 336);

    let amap = tmp.path().join("amap.model");
    train(&data, &amap, "amap", "1,2");
    let m = load_model(&amap).unwrap().model;
    assert_eq!((m.banks.len(), m.activity_heads.len()), (2, 2));

    // SAP needs one AP and train needs one topology
    let out = run(&["train", "--data", p(&data), "--topology", "sap", "--out", p(&sap)]);
    assert_eq!(out.status.code(), Some(2));
    let out = run(&["train", "--data", p(&data), "--ap", "1", "--out", p(&sap)]);
    assert_eq!(out.status.code(), Some(2));
}

#[test]
fn single_ap_amap_behaves_as_sap() {
    let tmp = tempfile::tempdir().unwrap();
    let data = small_dataset(tmp.path());
    let sap = tmp.path().join("sap.model");
    let amap = tmp.path().join("amap.model");
    train(&data, &sap, "sap", "2");
    train(&data, &amap, "amap", "2");
    for id in [0, 17, 101, 190] {
        let file = data.join(format!("ap2/s{id:06}.txt"));
        let a = ok(&["predict", "--model", p(&sap), p(&file)]);
        let b = ok(&["predict", "--model", p(&amap), p(&file)]);
        let labels = |s: &str| s.lines().take(2).collect::<Vec<_>>().join("\n");
        assert_eq!(labels(&a), labels(&b));
    }
}

#[test]
fn show_config_round_trips() {
    let tmp = tempfile::tempdir().unwrap();
    let data = small_dataset(tmp.path());
    let model = tmp.path().join("m.model");
    train(&data, &model, "sap", "1");
    let shown = ok(&["predict", "--model", p(&model), "--show-config"]);
    let cfg: csi_har_cli::RunConfig = serde_json::from_str(&shown).unwrap();
    assert_eq!(cfg, load_model(&model).unwrap().config);
    assert_eq!(cfg.bank.total_features, 336);

    // the shown config reproduces the model through --config
    let cfg_file = tmp.path().join("cfg.json");
    fs::write(&cfg_file, shown).unwrap();
    let again = tmp.path().join("again.model");
    ok(&["train", "--config", p(&cfg_file), "--out", p(&again)]);
    assert_eq!(load_model(&model).unwrap().model, load_model(&again).unwrap().model);
}

fn eval(data: &Path, out: &Path, runs: &str) -> String {
    let mut args = vec!["eval", "--data", p(data), "--runs", runs, "--seed", "4", "--out", p(out)];
    args.extend(FAST);
    ok(&args)
}

#[test]
fn eval_reports_are_deterministic_and_consistent() {
    let tmp = tempfile::tempdir().unwrap();
    let data = small_dataset(tmp.path());
    let (a, b) = (tmp.path().join("a"), tmp.path().join("b"));
    let text = eval(&data, &a, "3");
    eval(&data, &b, "3");
    for name in ["report.txt", "report.json", "predictions.csv"] {
        let same = fs::read(a.join(name)).unwrap() == fs::read(b.join(name)).unwrap();
        assert!(same, "{name} differs between identical runs");
    }
    assert_eq!(text, fs::read_to_string(a.join("report.txt")).unwrap());
    for row in ["SAP (AP 1)", "SAP (AP 2)", "CMAP", "AMAP"] {
        assert!(text.contains(row), "{row} missing");
    }

    // every mean re-aggregated from the per-run records
    let report: EvalReport = serde_json::from_str(&fs::read_to_string(a.join("report.json")).unwrap()).unwrap();
    assert_eq!(report.rows.len(), 4);
    for row in &report.rows {
        assert_eq!(row.runs.len(), 3);
        let accs: Vec<f64> = row.runs.iter().map(|r| r.activity.acc).collect();
        let mean = accs.iter().sum::<f64>() / 3.0;
        assert!((mean - row.summary.activity.acc.mean).abs() < 1e-9);
        let mccs: Vec<f64> = row.runs.iter().map(|r| r.orientation.mcc).collect();
        let m = mccs.iter().sum::<f64>() / 3.0;
        let sd = (mccs.iter().map(|v| (v - m).powi(2)).sum::<f64>() / 3.0).sqrt();
        assert!((m - row.summary.orientation.mcc.mean).abs() < 1e-9);
        assert!((sd - row.summary.orientation.mcc.std).abs() < 1e-9);
        assert!(text.contains(&MeanStd { mean, std: row.summary.activity.acc.std }.percent()));
        let seeds: Vec<u64> = row.runs.iter().map(|r| r.run_seed).collect();
        assert_eq!(seeds, vec![4, 5, 6]);
    }
    let csv = fs::read_to_string(a.join("predictions.csv")).unwrap();
    // 3 runs x 4 rows x 32 test samples (12 per cell, 10 of them train)
    assert_eq!(csv.lines().count(), 1 + 3 * 4 * 32);
}

#[test]
fn single_run_has_zero_std() {
    let tmp = tempfile::tempdir().unwrap();
    let data = small_dataset(tmp.path());
    let out = tmp.path().join("r");
    let mut args = vec!["eval", "--data", p(&data), "--runs", "1", "--topology", "cmap", "--out", p(&out)];
    args.extend(FAST);
    let text = ok(&args);
    let row = text.lines().find(|l| l.starts_with("CMAP")).unwrap();
    let cells: Vec<&str> = row.split_whitespace().skip(1).collect();
    assert_eq!(cells.len(), 8);
    assert!(cells.iter().all(|c| c.ends_with("±0.0")), "{row}");
}

#[test]
fn predict_matches_eval_log() {
    let tmp = tempfile::tempdir().unwrap();
    let data = small_dataset(tmp.path());
    let model = tmp.path().join("sap.model");
    train(&data, &model, "sap", "1");
    let out = tmp.path().join("r");
    let mut args = vec!["eval", "--data", p(&data), "--runs", "1", "--seed", "4", "--topology", "sap", "--ap", "1", "--out", p(&out)];
    args.extend(FAST);
    ok(&args);
    let names = ["Circle", "Left-Right", "Push-Pull", "Up-Down"];
    let orients = ["0°", "45°", "90°", "180°"];
    let csv = fs::read_to_string(out.join("predictions.csv")).unwrap();
    for line in csv.lines().skip(1).step_by(5) {
        let f: Vec<&str> = line.split(',').collect();
        let id: u64 = f[2].parse().unwrap();
        let file = data.join(format!("ap1/s{id:06}.txt"));
        let text = ok(&["predict", "--model", p(&model), &format!("1={}", p(&file))]);
        let act: usize = f[4].parse().unwrap();
        let ori: usize = f[6].parse().unwrap();
        assert!(text.contains(&format!("activity: {}\n", names[act])), "{line}\n{text}");
        assert!(text.contains(&format!("orientation: {}\n", orients[ori])), "{line}\n{text}");
    }
}

#[test]
fn damaged_archives_are_rejected() {
    let tmp = tempfile::tempdir().unwrap();
    let data = small_dataset(tmp.path());
    let model = tmp.path().join("m.model");
    train(&data, &model, "sap", "1");
    let bytes = fs::read(&model).unwrap();
    let sample = data.join("ap1/s000000.txt");

    let truncated = tmp.path().join("t.model");
    fs::write(&truncated, &bytes[..bytes.len() - 10]).unwrap();
    let out = run(&["predict", "--model", p(&truncated), p(&sample)]);
    assert_eq!(out.status.code(), Some(1));
    assert!(String::from_utf8_lossy(&out.stderr).contains("archive error"));

    let mut flipped = bytes.clone();
    let last = flipped.len() - 3;
    flipped[last] ^= 0x01;
    assert!(matches!(decode(&flipped, &model), Err(ArchiveError::Checksum { .. })));

    let mut newer = bytes.clone();
    newer[8..10].copy_from_slice(&(FORMAT_MAJOR + 1).to_le_bytes());
    assert!(matches!(decode(&newer, &model), Err(ArchiveError::Version { .. })));

    let archive = decode(&bytes, &model).unwrap();
    assert_eq!(encode(&archive), bytes);
}

#[test]
fn predict_checks_ap_arity() {
    let tmp = tempfile::tempdir().unwrap();
    let data = small_dataset(tmp.path());
    let model = tmp.path().join("cmap.model");
    train(&data, &model, "cmap", "1,2");
    let s1 = format!("1={}", p(&data.join("ap1/s000004.txt")));
    let s2 = format!("2={}", p(&data.join("ap2/s000004.txt")));

    let out = run(&["predict", "--model", p(&model), &s1]);
    assert_eq!(out.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&out.stderr).contains("missing input for AP 2"));

    let text = ok(&["predict", "--model", p(&model), &s2, &s1]);
    assert!(text.starts_with("activity: "));
    assert!(text.contains("APs [1, 2]"));

    let wrong_shape = tmp.path().join("wide.txt");
    fs::write(&wrong_shape, "1 2 3\n").unwrap();
    let out = run(&["predict", "--model", p(&model), &s1, &format!("2={}", p(&wrong_shape))]);
    assert_eq!(out.status.code(), Some(1));
}
