use std::fs;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use tempfile::TempDir;

fn relnet(args: &[&str]) -> Output {
    relnet_env(args, None)
}

fn relnet_env(args: &[&str], seed_env: Option<&str>) -> Output {
    let mut cmd = Command::new(env!("CARGO_BIN_EXE_relnet"));
    cmd.args(args).env_remove("RELNET_SEED").env("RUST_LOG", "warn");
    if let Some(s) = seed_env {
        cmd.env("RELNET_SEED", s);
    }
    cmd.output().expect("binary runs")
}

fn ok(out: &Output) {
    assert!(
        out.status.success(),
        "exit {:?}\nstdout: {}\nstderr: {}",
        out.status.code(),
        String::from_utf8_lossy(&out.stdout),
        String::from_utf8_lossy(&out.stderr)
    );
}

fn stderr(out: &Output) -> String {
    String::from_utf8_lossy(&out.stderr).into_owned()
}

fn p(dir: &Path, name: &str) -> String {
    dir.join(name).to_string_lossy().into_owned()
}

const SMALL: &str = r#"{
  "encode": {"seq_len": 24, "clip": 10, "max_word_len": 8},
  "features": {"word_dim": 8, "position_dim": 3, "postag_dim": 0, "chars": null, "fine_tune_words": true},
  "topology": {"kind": "cnn", "filters": 8, "windows": [2, 3]},
  "train": {"epochs": 2, "batch_size": 16},
  "svm_grid": {"c_exponents": [-1, 0, 1], "gamma_exponents": [-2, -1]},
  "nn_grid": {"topology": "cnn", "filters": [4, 8], "windows": [[2]], "dropout": [0.25], "postag_dim": [0]}
}"#;

fn small_setup() -> (TempDir, String) {
    let dir = TempDir::new().unwrap();
    let cfg = p(dir.path(), "small.json");
    fs::write(&cfg, SMALL).unwrap();
    (dir, cfg)
}

fn synth(dir: &Path, name: &str, n: &str, seed: &str) -> String {
    let out = p(dir, name);
    ok(&relnet(&["synth", "--sentences", n, "--out", &out, "--seed", seed]));
    out
}

#[test]
fn perfect_predictions_report_weighted_f1_of_one() {
    let dir = TempDir::new().unwrap();
    let preds = p(dir.path(), "preds.jsonl");
    let rows = ["TRUE", "FALSE", "TRUE", "TRUE", "FALSE"]
        .iter()
        .map(|l| format!("{{\"pred\": \"{l}\", \"gold\": \"{l}\"}}\n"))
        .collect::<String>();
    fs::write(&preds, rows).unwrap();
    let report = p(dir.path(), "report.json");
    let out = relnet(&["eval", "--predictions", &preds, "--out", &report]);
    ok(&out);
    let v: serde_json::Value = serde_json::from_str(&fs::read_to_string(&report).unwrap()).unwrap();
    assert_eq!(v["weighted_f1"], 1.0);
    assert_eq!(v["support_true"], 3);
    assert_eq!(v["support_false"], 2);
    assert!(String::from_utf8_lossy(&out.stdout).contains("weighted F1"));
}

#[test]
fn unknown_subcommand_is_a_usage_error() {
    let out = relnet(&["frobnicate"]);
    assert_eq!(out.status.code(), Some(1));
    assert!(stderr(&out).contains("Usage"), "{}", stderr(&out));
}

#[test]
fn missing_required_flag_is_a_usage_error() {
    let out = relnet(&["train", "--out", "x.ck"]);
    assert_eq!(out.status.code(), Some(1));
    assert!(stderr(&out).contains("--corpus"));
}

#[test]
fn missing_corpus_is_a_data_error_naming_the_path() {
    let dir = TempDir::new().unwrap();
    let missing = p(dir.path(), "nowhere.jsonl");
    let out = relnet(&["train", "--corpus", &missing, "--out", &p(dir.path(), "m.ck")]);
    assert_eq!(out.status.code(), Some(2));
    assert!(stderr(&out).contains("nowhere.jsonl"), "{}", stderr(&out));
}

#[test]
fn unknown_config_key_is_rejected() {
    let dir = TempDir::new().unwrap();
    let cfg = p(dir.path(), "bad.json");
    fs::write(&cfg, r#"{"train": {"epoch": 3}}"#).unwrap();
    let corpus = synth(dir.path(), "c.jsonl", "20", "1");
    let out = relnet(&["train", "--config", &cfg, "--corpus", &corpus, "--out", &p(dir.path(), "m.ck")]);
    assert_eq!(out.status.code(), Some(2));
    assert!(stderr(&out).contains("epoch"), "{}", stderr(&out));
}

#[test]
fn invalid_parameter_is_a_usage_error() {
    let (dir, cfg) = small_setup();
    let corpus = synth(dir.path(), "c.jsonl", "20", "1");
    let out =
        relnet(&["train", "--config", &cfg, "--corpus", &corpus, "--out", &p(dir.path(), "m.ck"), "--dropout", "1.5"]);
    assert_eq!(out.status.code(), Some(1), "{}", stderr(&out));
    let out =
        relnet(&["train", "--config", &cfg, "--corpus", &corpus, "--out", &p(dir.path(), "m.ck"), "--workers", "0"]);
    assert_eq!(out.status.code(), Some(1), "{}", stderr(&out));
}

#[test]
fn help_lists_a_default_for_every_flag() {
    let subs = ["prepare", "train", "extract", "svm-train", "eval", "grid-nn", "grid-svm", "heatmap", "synth"];
    for sub in subs {
        let out = relnet(&[sub, "--help"]);
        ok(&out);
        let text = String::from_utf8_lossy(&out.stdout).into_owned();
        let mut flags = 0;
        let lines: Vec<&str> = text.lines().collect();
        for (i, line) in lines.iter().enumerate() {
            let t = line.trim_start();
            if !t.starts_with("--") || t.starts_with("--help") || t.starts_with("--version") {
                continue;
            }
            flags += 1;
            let block: String = lines[i..].iter().take_while(|l| !l.trim().is_empty()).copied().collect();
            let eval_alt = sub == "eval"
                && ["--predictions", "--checkpoint", "--corpus", "--svm", "--features"]
                    .iter()
                    .any(|f| t.starts_with(f));
            assert!(
                eval_alt || block.contains("[default") || block.contains("[required]"),
                "{sub}: `{t}` has no default"
            );
        }
        assert!(flags >= 4, "{sub}: {text}");
    }
}

#[test]
fn synth_honours_seed_flag_and_env() {
    let dir = TempDir::new().unwrap();
    let a = synth(dir.path(), "a.jsonl", "30", "5");
    let b = p(dir.path(), "b.jsonl");
    ok(&relnet_env(&["synth", "--sentences", "30", "--out", &b], Some("5")));
    let c = p(dir.path(), "c.jsonl");
    ok(&relnet_env(&["synth", "--sentences", "30", "--out", &c, "--seed", "6"], Some("5")));
    assert_eq!(fs::read(&a).unwrap(), fs::read(&b).unwrap());
    assert_ne!(fs::read(&a).unwrap(), fs::read(&c).unwrap());
}

fn train(cfg: &str, corpus: &str, out: &str, seed: &str) {
    ok(&relnet(&["train", "--config", cfg, "--corpus", corpus, "--out", out, "--seed", seed]));
}

#[test]
fn pipeline_from_synthetic_corpus_to_svm_report() {
    let (dir, cfg) = small_setup();
    let d = dir.path();
    let train_c = synth(d, "train.jsonl", "160", "1");
    let test_c = synth(d, "test.jsonl", "60", "2");

    let ck = p(d, "model.ck");
    train(&cfg, &train_c, &ck, "3");
    let ck2 = p(d, "model2.ck");
    train(&cfg, &train_c, &ck2, "3");
    assert_eq!(fs::read(&ck).unwrap(), fs::read(&ck2).unwrap(), "identical runs must give identical checkpoints");
    let ck3 = p(d, "model3.ck");
    train(&cfg, &train_c, &ck3, "4");
    assert_ne!(fs::read(&ck).unwrap(), fs::read(&ck3).unwrap());

    let nn_report = p(d, "nn.json");
    ok(&relnet(&["eval", "--checkpoint", &ck, "--corpus", &test_c, "--out", &nn_report]));

    let ftrain = p(d, "ftrain.jsonl");
    let ftest = p(d, "ftest.jsonl");
    ok(&relnet(&["extract", "--checkpoint", &ck, "--corpus", &train_c, "--out", &ftrain]));
    ok(&relnet(&["extract", "--checkpoint", &ck, "--corpus", &test_c, "--out", &ftest]));
    let first: serde_json::Value =
        serde_json::from_str(fs::read_to_string(&ftrain).unwrap().lines().next().unwrap()).unwrap();
    assert_eq!(first["x"].as_array().unwrap().len(), 16);

    let svm = p(d, "svm.json");
    ok(&relnet(&["svm-train", "--features", &ftrain, "--out", &svm, "--c", "1", "--gamma", "0.1"]));
    let report = p(d, "svm_report.json");
    ok(&relnet(&["eval", "--svm", &svm, "--features", &ftest, "--out", &report]));
    let v: serde_json::Value = serde_json::from_str(&fs::read_to_string(&report).unwrap()).unwrap();
    let w = v["weighted_f1"].as_f64().unwrap();
    assert!((0.0..=1.0).contains(&w));
    let n_test = fs::read_to_string(&ftest).unwrap().lines().count() as u64;
    assert_eq!(v["support_true"].as_u64().unwrap() + v["support_false"].as_u64().unwrap(), n_test);

    let results = p(d, "svm_grid.jsonl");
    let heat = p(d, "heat.csv");
    let best = p(d, "best_svm.json");
    let out = relnet(&[
        "grid-svm",
        "--config",
        &cfg,
        "--train",
        &ftrain,
        "--test",
        &ftest,
        "--out",
        &results,
        "--heatmap",
        &heat,
        "--best-svm",
        &best,
    ]);
    ok(&out);
    assert!(String::from_utf8_lossy(&out.stdout).contains("best:"));
    assert_eq!(fs::read_to_string(&results).unwrap().lines().count(), 6);
    let csv = fs::read_to_string(&heat).unwrap();
    let rows: Vec<&str> = csv.lines().collect();
    assert_eq!(rows.len(), 3);
    assert_eq!(rows[0], "gamma\\C,-1,0,1");
    assert!(Path::new(&best).exists());

    let heat2 = p(d, "heat2.csv");
    ok(&relnet(&["heatmap", "--results", &results, "--out", &heat2]));
    assert_eq!(csv, fs::read_to_string(&heat2).unwrap());
}

#[test]
fn corrupted_checkpoint_is_a_data_error() {
    let (dir, cfg) = small_setup();
    let d = dir.path();
    let corpus = synth(d, "c.jsonl", "40", "1");
    let ck = p(d, "m.ck");
    train(&cfg, &corpus, &ck, "0");
    let mut bytes = fs::read(&ck).unwrap();
    let mid = bytes.len() / 2;
    bytes[mid] ^= 0x40;
    fs::write(&ck, bytes).unwrap();
    let out = relnet(&["extract", "--checkpoint", &ck, "--corpus", &corpus, "--out", &p(d, "f.jsonl")]);
    assert_eq!(out.status.code(), Some(2));
    assert!(stderr(&out).contains("checksum"), "{}", stderr(&out));
}

#[test]
fn heatmap_with_missing_cell_fails() {
    let dir = TempDir::new().unwrap();
    let d = dir.path();
    let ftrain = PathBuf::from(p(d, "f.jsonl"));
    let rows: String = (0..24)
        .map(|i| {
            let label = if i % 2 == 0 { "TRUE" } else { "FALSE" };
            let x = if i % 2 == 0 { 1.0 } else { -1.0 } + (i as f64) * 0.01;
            format!("{{\"label\": \"{label}\", \"x\": [{x}, {}]}}\n", -x)
        })
        .collect();
    fs::write(&ftrain, rows).unwrap();
    let cfg = p(d, "g.json");
    fs::write(&cfg, r#"{"svm_grid": {"c_exponents": [0, 1], "gamma_exponents": [-1, 0]}}"#).unwrap();
    let f = ftrain.to_string_lossy().into_owned();
    let results = p(d, "r.jsonl");
    ok(&relnet(&["grid-svm", "--config", &cfg, "--train", &f, "--test", &f, "--dev", &f, "--out", &results]));
    let text = fs::read_to_string(&results).unwrap();
    let kept: String = text.lines().skip(1).map(|l| format!("{l}\n")).collect();
    fs::write(&results, kept).unwrap();
    let out = relnet(&["heatmap", "--results", &results, "--out", &p(d, "h.csv")]);
    assert_eq!(out.status.code(), Some(2));
    assert!(stderr(&out).contains("missing cell"), "{}", stderr(&out));
}

#[test]
fn grid_nn_sweeps_configured_grid_and_saves_best() {
    let (dir, cfg) = small_setup();
    let d = dir.path();
    let train_c = synth(d, "train.jsonl", "120", "1");
    let test_c = synth(d, "test.jsonl", "40", "2");
    let results = p(d, "nn.jsonl");
    let best = p(d, "best.ck");
    let out = relnet(&[
        "grid-nn",
        "--config",
        &cfg,
        "--train",
        &train_c,
        "--test",
        &test_c,
        "--out",
        &results,
        "--epochs",
        "1",
        "--workers",
        "2",
        "--best-checkpoint",
        &best,
    ]);
    ok(&out);
    let stdout = String::from_utf8_lossy(&out.stdout);
    assert!(stdout.contains("best: CNN (Filter="), "{stdout}");
    assert_eq!(fs::read_to_string(&results).unwrap().lines().count(), 2);
    assert!(Path::new(&best).exists());
}
