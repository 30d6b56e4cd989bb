use std::path::Path;
use std::process::{Command, Output};

use mvnrec::dataset::synthetic_interactions;
use mvnrec::report::metric_body;

fn mvnrec(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_mvnrec"))
        .args(args)
        .env_remove("MVNREC_THREADS")
        .output()
        .expect("binary runs")
}

fn stdout(o: &Output) -> String {
    String::from_utf8_lossy(&o.stdout).into_owned()
}

fn stderr(o: &Output) -> String {
    String::from_utf8_lossy(&o.stderr).into_owned()
}

fn synthetic(dir: &Path) -> String {
    let ds = synthetic_interactions(120, 30, 3, 0.15, 4.0, 9);
    let path = dir.join("toy.tsv");
    ds.write_tsv(std::fs::File::create(&path).unwrap()).unwrap();
    path.to_str().unwrap().to_string()
}

#[test]
fn ingest_prints_counts() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("three.tsv");
    std::fs::write(&path, "u1\ti1\nu1\ti2\nu2\ti2\n").unwrap();
    let o = mvnrec(&["ingest", "--dataset", path.to_str().unwrap()]);
    assert!(o.status.success());
    assert_eq!(stdout(&o).trim(), "2 users, 2 items, 3 interactions");
}

#[test]
fn ingest_empty_file_is_zero_counts() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("empty.tsv");
    std::fs::write(&path, "").unwrap();
    let o = mvnrec(&["ingest", "--dataset", path.to_str().unwrap()]);
    assert!(o.status.success());
    assert_eq!(stdout(&o).trim(), "0 users, 0 items, 0 interactions");
}

#[test]
fn bad_path_fails_with_message() {
    let o = mvnrec(&["ingest", "--dataset", "/definitely/not/here.tsv"]);
    assert!(!o.status.success());
    assert!(stderr(&o).contains("/definitely/not/here.tsv"));
}

#[test]
fn verify_passes() {
    let dir = tempfile::tempdir().unwrap();
    let o = mvnrec(&["verify", "--out", dir.path().to_str().unwrap()]);
    assert!(o.status.success(), "{}", stdout(&o));
    assert_eq!(stdout(&o).lines().filter(|l| l.starts_with("PASS")).count(), 5);
}

#[test]
fn evaluate_writes_results_config_and_manifest() {
    let dir = tempfile::tempdir().unwrap();
    let data = synthetic(dir.path());
    let out = dir.path().join("run");
    let o = mvnrec(&[
        "evaluate",
        "--dataset",
        &data,
        "--model",
        "mvn:lambda=1",
        "--model",
        "popularity",
        "--folds",
        "3",
        "--rng-seed",
        "4",
        "--threads",
        "1",
        "--out",
        out.to_str().unwrap(),
    ]);
    assert!(o.status.success(), "{}", stderr(&o));
    let csv = std::fs::read_to_string(out.join("evaluate.csv")).unwrap();
    // header, 3 folds + mean per model
    assert_eq!(csv.lines().count(), 1 + 2 * 4);
    let manifest = std::fs::read_to_string(out.join("evaluate.manifest")).unwrap();
    assert!(manifest.contains("rng_seed: 4"));
    assert!(manifest.lines().any(|l| l.starts_with("dataset_sha256: ")));

    // the resolved config reproduces the run
    let again = dir.path().join("again");
    let config = out.join("evaluate.config");
    let o = mvnrec(&[
        "evaluate",
        "--config",
        config.to_str().unwrap(),
        "--out",
        again.to_str().unwrap(),
    ]);
    assert!(o.status.success(), "{}", stderr(&o));
    let csv2 = std::fs::read_to_string(again.join("evaluate.csv")).unwrap();
    assert_eq!(metric_body(&csv), metric_body(&csv2));
}

#[test]
fn thread_budget_comes_from_the_environment() {
    let dir = tempfile::tempdir().unwrap();
    let data = synthetic(dir.path());
    let out = dir.path().join("env");
    let o = Command::new(env!("CARGO_BIN_EXE_mvnrec"))
        .args([
            "evaluate",
            "--dataset",
            &data,
            "--model",
            "popularity",
            "--out",
            out.to_str().unwrap(),
        ])
        .env("MVNREC_THREADS", "2")
        .output()
        .unwrap();
    assert!(o.status.success());
    let config = std::fs::read_to_string(out.join("evaluate.config")).unwrap();
    assert!(config.contains("threads = 2"));
}

#[test]
fn capacity_error_names_model_and_dataset() {
    let dir = tempfile::tempdir().unwrap();
    let data = synthetic(dir.path());
    let o = mvnrec(&[
        "evaluate",
        "--dataset",
        &data,
        "--model",
        "knn:cap=10",
        "--out",
        dir.path().join("cap").to_str().unwrap(),
    ]);
    assert!(!o.status.success());
    let err = stderr(&o);
    assert!(err.contains("knn") && err.contains("toy"), "{err}");
}

#[test]
fn seed_study_has_one_row_per_seed_size() {
    let dir = tempfile::tempdir().unwrap();
    let data = synthetic(dir.path());
    let out = dir.path().join("study");
    let o = mvnrec(&[
        "seed-study",
        "--dataset",
        &data,
        "--model",
        "mvn",
        "--model",
        "popularity",
        "--out",
        out.to_str().unwrap(),
    ]);
    assert!(o.status.success(), "{}", stderr(&o));
    let csv = std::fs::read_to_string(out.join("seed-study.csv")).unwrap();
    let rows: Vec<&str> = csv.lines().skip(1).collect();
    assert_eq!(rows.len(), 22);
    assert_eq!(rows.iter().filter(|r| r.contains(",mvn,")).count(), 11);
}

#[test]
fn sweep_and_bench_write_tables() {
    let dir = tempfile::tempdir().unwrap();
    let data = synthetic(dir.path());
    let out = dir.path().join("sw");
    let o = mvnrec(&[
        "sweep",
        "--dataset",
        &data,
        "--model",
        "mvn",
        "--set",
        "grid.lambda=0 10",
        "--out",
        out.to_str().unwrap(),
    ]);
    assert!(o.status.success(), "{}", stderr(&o));
    let csv = std::fs::read_to_string(out.join("sweep.csv")).unwrap();
    assert_eq!(csv.lines().count(), 7);
    assert!(std::fs::read_to_string(out.join("sweep.manifest"))
        .unwrap()
        .contains("grid: "));

    let o = mvnrec(&[
        "bench",
        "--dataset",
        &data,
        "--model",
        "mvn",
        "--set",
        "user_counts=30 60 120",
        "--out",
        out.to_str().unwrap(),
    ]);
    assert!(o.status.success(), "{}", stderr(&o));
    let csv = std::fs::read_to_string(out.join("bench.csv")).unwrap();
    assert_eq!(csv.lines().count(), 4);
}

#[test]
fn recommend_lists_labels_and_rejects_unknown_ones() {
    let dir = tempfile::tempdir().unwrap();
    let data = dir.path().join("movies.tsv");
    std::fs::write(
        &data,
        "a\tAlien\na\tAliens\nb\tAlien\nb\tAliens\nb\tHeat\nc\tHeat\nc\tToy Story\n",
    )
    .unwrap();
    let data = data.to_str().unwrap();
    let out = dir.path().join("rec");
    let o = mvnrec(&[
        "recommend",
        "--dataset",
        data,
        "--item",
        "Alien",
        "--top",
        "2",
        "--out",
        out.to_str().unwrap(),
    ]);
    assert!(o.status.success(), "{}", stderr(&o));
    let text = stdout(&o);
    assert!(text.contains("1. Aliens"), "{text}");

    let o = mvnrec(&[
        "recommend",
        "--dataset",
        data,
        "--item",
        "Alein",
        "--out",
        out.to_str().unwrap(),
    ]);
    assert!(!o.status.success());
    assert!(stderr(&o).contains("Alien"));
}
