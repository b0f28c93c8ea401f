mod common;

use std::path::Path;
use std::process::{Command, Output};

use tlnas::harness::RunRecord;
use tlnas::report::{read_jsonl, read_summary_csv, RUN_SCHEMA};

use common::{synthetic_dataset, synthetic_search_inputs};

fn tlnas(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_tlnas"))
        .args(args)
        .env("TLNAS_DATA_DIR", "/nonexistent/tlnas-data")
        .output()
        .unwrap()
}

fn s(p: &Path) -> &str {
    p.to_str().unwrap()
}

fn stderr(o: &Output) -> String {
    String::from_utf8_lossy(&o.stderr).into_owned()
}

#[test]
fn score_prints_json_and_resolved_config() {
    let dir = tempfile::tempdir().unwrap();
    let (data, _) = synthetic_search_inputs(dir.path(), 3);
    let args = [
        "score", "--mlp", "8,8", "--data", s(&data), "--dataset", "synthetic", "--n-init", "5", "--batch-size", "16",
        "--seed", "9",
    ];
    let out = tlnas(&args);
    assert!(out.status.success(), "{}", stderr(&out));
    let json: serde_json::Value = serde_json::from_slice(&out.stdout).unwrap();
    assert_eq!(json["accuracies"].as_array().unwrap().len(), 5);
    assert_eq!(json["batch_seed"].as_u64().unwrap(), tlnas::rng::seed_hash(&[9, 0]));
    assert!(json["cv_u"].as_f64().unwrap() >= 0.0);
    let err = stderr(&out);
    assert!(err.contains("[score]") && err.contains("# batch_seed = "), "{err}");
    assert!(err.contains("timing:"));

    let again = tlnas(&args);
    assert_eq!(out.stdout, again.stdout);
}

#[test]
fn score_with_mellor_on_cell() {
    let dir = tempfile::tempdir().unwrap();
    let (data, _) = synthetic_search_inputs(dir.path(), 3);
    let out = tlnas(&[
        "score",
        "--arch",
        "|nor_conv_3x3~0|+|skip_connect~0|nor_conv_1x1~1|+|none~0|avg_pool_3x3~1|nor_conv_3x3~2|",
        "--data",
        s(&data),
        "--dataset",
        "synthetic",
        "--n-init",
        "3",
        "--batch-size",
        "8",
        "--skeleton",
        "desk",
        "--mellor",
    ]);
    assert!(out.status.success(), "{}", stderr(&out));
    let json: serde_json::Value = serde_json::from_slice(&out.stdout).unwrap();
    assert_eq!(json["mellor"]["eigenvalues"].as_array().unwrap().len(), 8);
}

#[test]
fn usage_errors_exit_2() {
    assert_eq!(tlnas(&["search", "--n-runs", "many"]).status.code(), Some(2));
    assert_eq!(tlnas(&["score"]).status.code(), Some(2));
    let dir = tempfile::tempdir().unwrap();
    let (data, fixture) = synthetic_search_inputs(dir.path(), 10);
    let out = tlnas(&[
        "search", "--dataset", "synthetic", "--data", s(&data), "--fixture", s(&fixture), "--n-a", "0",
    ]);
    assert_eq!(out.status.code(), Some(2), "{}", stderr(&out));
    assert_eq!(tlnas(&["--threads", "0", "baseline"]).status.code(), Some(2));
}

#[test]
fn missing_data_exits_3() {
    let out = tlnas(&["baseline"]);
    assert_eq!(out.status.code(), Some(3));
    assert!(stderr(&out).contains("nasbench201.jsonl"));
    let out = tlnas(&["score", "--mlp", "8,8"]);
    assert_eq!(out.status.code(), Some(3), "{}", stderr(&out));
}

#[test]
fn search_with_baselines_writes_outputs() {
    let dir = tempfile::tempdir().unwrap();
    let (data, fixture) = synthetic_search_inputs(dir.path(), 40);
    let out_dir = dir.path().join("out");
    let out = tlnas(&[
        "search", "--dataset", "synthetic", "--data", s(&data), "--fixture", s(&fixture), "--n-runs", "4", "--n-a", "6",
        "--n-init", "4", "--batch-size", "16", "--stem-channels", "4", "--cells-per-stack", "1", "--with-baselines",
        "--out", s(&out_dir),
    ]);
    assert!(out.status.success(), "{}", stderr(&out));
    let stdout = String::from_utf8_lossy(&out.stdout);
    for method in ["cv_u", "random", "optimal"] {
        assert!(stdout.contains(method), "{stdout}");
    }
    let runs: Vec<RunRecord> = read_jsonl(RUN_SCHEMA, out_dir.join("runs.jsonl")).unwrap();
    assert_eq!(runs.len(), 4);
    assert!(runs.iter().all(|r| r.candidates.len() == 6));
    let baselines: Vec<RunRecord> = read_jsonl(RUN_SCHEMA, out_dir.join("baselines.jsonl")).unwrap();
    assert_eq!(baselines.len(), 8);
    let rows = read_summary_csv(out_dir.join("summary.csv")).unwrap();
    assert!(rows.iter().any(|r| r.method == "optimal"));
}

#[test]
fn config_file_sections_and_precedence() {
    let dir = tempfile::tempdir().unwrap();
    let (_, fixture) = synthetic_search_inputs(dir.path(), 20);
    let cfg = dir.path().join("run.toml");
    std::fs::write(
        &cfg,
        format!("[baseline]\nkind = \"optimal\"\ndataset = \"synthetic\"\nn_runs = 7\nn_a = 5\nfixture = {:?}\n", s(&fixture)),
    )
    .unwrap();
    let out = tlnas(&["--config", s(&cfg), "baseline", "--n-runs", "3"]);
    assert!(out.status.success(), "{}", stderr(&out));
    let err = stderr(&out);
    assert!(err.contains("n_runs = 3") && err.contains("kind = \"optimal\""), "{err}");
    assert!(String::from_utf8_lossy(&out.stdout).contains("runs 3"));

    std::fs::write(&cfg, "[baseline]\nn_rnus = 7\n").unwrap();
    assert_eq!(tlnas(&["--config", s(&cfg), "baseline"]).status.code(), Some(2));
}

#[test]
fn resolved_config_replays() {
    let dir = tempfile::tempdir().unwrap();
    let (_, fixture) = synthetic_search_inputs(dir.path(), 20);
    let first = tlnas(&["baseline", "--dataset", "synthetic", "--fixture", s(&fixture), "--n-runs", "5"]);
    assert!(first.status.success(), "{}", stderr(&first));
    let cfg = dir.path().join("resolved.toml");
    std::fs::write(&cfg, stderr(&first)).unwrap();
    let replay = tlnas(&["--config", s(&cfg), "baseline"]);
    assert!(replay.status.success(), "{}", stderr(&replay));
    assert_eq!(first.stdout, replay.stdout);
}

fn write_idx(dir: &Path, prefix: &str, n: usize, seed: u64) {
    let ds = synthetic_dataset("mnist", n, 6, 10, seed);
    let mut images = vec![0, 0, 8, 3];
    for d in [n as u32, 6, 6] {
        images.extend(d.to_be_bytes());
    }
    // One channel: the first of the three synthetic channels.
    images.extend(ds.images.chunks(3).map(|px| px[0]));
    let mut labels = vec![0, 0, 8, 1];
    labels.extend((n as u32).to_be_bytes());
    labels.extend(ds.labels.iter().map(|&l| l as u8));
    std::fs::write(dir.join(format!("{prefix}-images-idx3-ubyte")), images).unwrap();
    std::fs::write(dir.join(format!("{prefix}-labels-idx1-ubyte")), labels).unwrap();
}

#[test]
fn study_on_small_idx_set() {
    let dir = tempfile::tempdir().unwrap();
    let mnist = dir.path().join("mnist");
    std::fs::create_dir(&mnist).unwrap();
    write_idx(&mnist, "train", 300, 1);
    write_idx(&mnist, "t10k", 80, 2);
    let out_dir = dir.path().join("study");
    let out = tlnas(&[
        "study", "--mnist", s(&mnist), "--archs", "8,8;16,8;8,16;16,16", "--seeds", "2", "--lrs", "0.01", "--epochs",
        "3", "--burn-in", "1", "--per-class", "5", "--batch-size", "10", "--out", s(&out_dir),
    ]);
    assert!(out.status.success(), "{}", stderr(&out));
    let stdout = String::from_utf8_lossy(&out.stdout);
    assert!(stdout.contains("spearman rho(cv_u, mu_t)"), "{stdout}");
    for file in ["study.jsonl", "study_scatter.svg", "study_analysis.json"] {
        assert!(out_dir.join(file).is_file(), "missing {file}");
    }
    let svg = std::fs::read_to_string(out_dir.join("study_scatter.svg")).unwrap();
    assert_eq!(svg.matches("<circle").count() + skipped(&svg), 4);
}

fn skipped(svg: &str) -> usize {
    let tail = svg.split("<!-- skipped ").nth(1).unwrap();
    tail.split(' ').next().unwrap().parse().unwrap()
}
