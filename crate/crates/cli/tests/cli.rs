use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use gw_bounds::rng::seeded_rng;
use gw_bounds::spaces::{euclidean_distances, matrix_to_csv, parse_csv_matrix};
use ndarray::Array2;
use rand::Rng;
use serde_json::Value;
use tempfile::TempDir;

fn gwb(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_gwb")).args(args).output().expect("binary runs")
}

fn ok(args: &[&str]) -> Output {
    let out = gwb(args);
    assert!(
        out.status.success(),
        "{args:?} failed: {}",
        String::from_utf8_lossy(&out.stderr)
    );
    out
}

fn points(n: usize, seed: u64) -> Array2<f64> {
    let mut rng = seeded_rng(seed);
    Array2::from_shape_fn((n, 2), |_| rng.random_range(-1.0..1.0))
}

fn write_space(dir: &Path, name: &str, n: usize, seed: u64) -> PathBuf {
    let p = dir.join(name);
    std::fs::write(&p, matrix_to_csv(&euclidean_distances(&points(n, seed)))).unwrap();
    p
}

fn read_matrix(p: &Path) -> Vec<Vec<f64>> {
    parse_csv_matrix(&std::fs::read_to_string(p).unwrap()).unwrap()
}

fn read_json(p: &Path) -> Value {
    serde_json::from_str(&std::fs::read_to_string(p).unwrap()).unwrap()
}

fn s(p: &Path) -> &str {
    p.to_str().unwrap()
}

#[test]
fn dist_of_identical_files_is_zero() {
    let t = TempDir::new().unwrap();
    let a = write_space(t.path(), "a.csv", 12, 1);
    let out = t.path().join("out");
    ok(&["--out", s(&out), "dist", "--bound", "stlb", s(&a), s(&a)]);
    let m = read_matrix(&out.join("dist_stlb.csv"));
    assert_eq!(m, vec![vec![0.0, 0.0], vec![0.0, 0.0]]);
}

#[test]
fn dist_matrix_is_symmetric_and_referenced() {
    let t = TempDir::new().unwrap();
    let files: Vec<PathBuf> = (0..3).map(|i| write_space(t.path(), &format!("s{i}.csv"), 8 + i, i as u64)).collect();
    let out = t.path().join("out");
    let mut args = vec!["--out", s(&out), "dist", "--bound", "tlb"];
    args.extend(files.iter().map(|f| s(f)));
    ok(&args);
    let m = read_matrix(&out.join("dist_tlb.csv"));
    assert_eq!(m.len(), 3);
    for i in 0..3 {
        assert_eq!(m[i][i], 0.0);
        for j in 0..3 {
            assert_eq!(m[i][j], m[j][i]);
        }
    }
    let meta = read_json(&out.join("dist_tlb.meta.json"));
    assert_eq!(meta["manifest"], "manifest.json");
    let manifest = read_json(&out.join("manifest.json"));
    let outputs: Vec<&str> = manifest["outputs"].as_array().unwrap().iter().map(|v| v.as_str().unwrap()).collect();
    assert!(outputs.contains(&"dist_tlb.csv"));
    assert_eq!(manifest["subcommand"], "dist");
}

#[test]
fn sliced_matrices_satisfy_triangle_inequality() {
    let t = TempDir::new().unwrap();
    let files: Vec<PathBuf> = (0..5).map(|i| write_space(t.path(), &format!("s{i}.csv"), 6 + 2 * i, 10 + i as u64)).collect();
    let out = t.path().join("out");
    let mut args = vec!["--out", s(&out), "dist", "--bound", "stlb", "--L", "30"];
    args.extend(files.iter().map(|f| s(f)));
    ok(&args);
    let m = read_matrix(&out.join("dist_stlb.csv"));
    for i in 0..5 {
        for j in 0..5 {
            for k in 0..5 {
                assert!(m[i][k] <= m[i][j] + m[j][k] + 1e-12);
            }
        }
    }
}

#[test]
fn sinkhorn_is_not_below_exact() {
    let t = TempDir::new().unwrap();
    let a = write_space(t.path(), "a.csv", 10, 3);
    let b = write_space(t.path(), "b.csv", 10, 4);
    let run = |solver: &str| {
        let out = t.path().join(solver);
        ok(&["--out", s(&out), "dist", "--bound", "tlb", "--solver", solver, "--epsilon", "1e-3", s(&a), s(&b)]);
        read_matrix(&out.join("dist_tlb.csv"))[0][1]
    };
    let exact = run("exact");
    let entropic = run("sinkhorn");
    assert!(entropic >= exact - 1e-7, "{entropic} < {exact}");
}

#[test]
fn unconverged_sinkhorn_exits_3() {
    let t = TempDir::new().unwrap();
    let a = write_space(t.path(), "a.csv", 10, 3);
    let b = write_space(t.path(), "b.csv", 10, 4);
    let out = t.path().join("out");
    let r = gwb(&["--out", s(&out), "dist", "--bound", "tlb", "--solver", "sinkhorn", "--sinkhorn-iters", "1", s(&a), s(&b)]);
    assert_eq!(r.status.code(), Some(3));
    assert!(out.join("dist_tlb.csv").exists());
    assert_eq!(read_json(&out.join("manifest.json"))["converged"], false);
}

#[test]
fn load_errors_name_the_file() {
    let t = TempDir::new().unwrap();
    let a = write_space(t.path(), "a.csv", 5, 1);
    let missing = t.path().join("missing.csv");
    let r = gwb(&["dist", "--bound", "flb", s(&a), s(&missing)]);
    assert_eq!(r.status.code(), Some(4));
    assert!(String::from_utf8_lossy(&r.stderr).contains("missing.csv"));

    let bad = t.path().join("bad.csv");
    std::fs::write(&bad, "0,1\n2,0\n").unwrap();
    let r = gwb(&["dist", "--bound", "flb", s(&a), s(&bad)]);
    assert_eq!(r.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&r.stderr).contains("bad.csv"));
}

#[test]
fn validation_errors_exit_2() {
    let t = TempDir::new().unwrap();
    let a = write_space(t.path(), "a.csv", 5, 1);
    assert_eq!(gwb(&["dist", "--bound", "stlb", "--p", "1", s(&a), s(&a)]).status.code(), Some(2));
    assert_eq!(gwb(&["dist", "--bound", "tlb", s(&a)]).status.code(), Some(2));
    assert_eq!(gwb(&["dist", "--bound", "nope", s(&a), s(&a)]).status.code(), Some(2));
    assert_eq!(gwb(&["isotest", "--model", "rr", "--pairs", "7"]).status.code(), Some(2));
}

#[test]
fn reruns_are_byte_identical() {
    let t = TempDir::new().unwrap();
    let files: Vec<PathBuf> = (0..3).map(|i| write_space(t.path(), &format!("s{i}.csv"), 9, 20 + i as u64)).collect();
    let run = |tag: &str, threads: &str| {
        let out = t.path().join(tag);
        let mut args = vec!["--seed", "7", "--threads", threads, "--out", s(&out), "dist", "--bound", "sftlb"];
        args.extend(files.iter().map(|f| s(f)));
        ok(&args);
        std::fs::read(out.join("dist_sftlb.csv")).unwrap()
    };
    assert_eq!(run("a", "1"), run("b", "2"));

    let iso = |tag: &str| {
        let out = t.path().join(tag);
        ok(&["--seed", "3", "--out", s(&out), "isotest", "--model", "ws", "--pairs", "20", "--repeats", "2", "--bound", "stlb,wl-d"]);
        std::fs::read(out.join("isotest.csv")).unwrap()
    };
    assert_eq!(iso("i1"), iso("i2"));
}

#[test]
fn knn_on_separated_clusters() {
    let t = TempDir::new().unwrap();
    let n = 80;
    let d = Array2::from_shape_fn((n, n), |(i, j)| if i % 2 == j % 2 { 0.0 } else { 1.0 });
    let m = t.path().join("d.csv");
    std::fs::write(&m, matrix_to_csv(&d)).unwrap();
    let l = t.path().join("labels.csv");
    std::fs::write(&l, (0..n).map(|i| format!("{}\n", if i % 2 == 0 { "a" } else { "b" })).collect::<String>()).unwrap();
    let out = t.path().join("out");
    ok(&["--out", s(&out), "--format", "json", "knn", "--matrix", s(&m), "--labels", s(&l), "--splits", "10"]);
    let report = read_json(&out.join("knn.json"));
    assert_eq!(report["mean"], 1.0);
    assert_eq!(report["classes"], serde_json::json!(["a", "b"]));

    let r = gwb(&["knn", "--matrix", s(&m), "--labels", s(&l), "--k", "21"]);
    assert_eq!(r.status.code(), Some(2));
}

#[test]
fn isotest_sanity_mode() {
    let t = TempDir::new().unwrap();
    let out = t.path().join("out");
    ok(&[
        "--out", s(&out), "--format", "json", "isotest", "--model", "ba", "--m", "2", "--pairs", "20", "--repeats", "2",
        "--all-isomorphic", "--bound", "stlb,sftlb,tlb,wl-d",
    ]);
    let doc = read_json(&out.join("isotest.json"));
    for row in doc["rows"].as_array().unwrap() {
        assert_eq!(row["mean"], 1.0, "{row}");
    }
}

#[test]
fn bench_timing_grows_with_size() {
    let t = TempDir::new().unwrap();
    let out = t.path().join("out");
    ok(&["--out", s(&out), "--format", "json", "bench", "--sizes", "20,100", "--repeats", "3"]);
    let doc = read_json(&out.join("bench.json"));
    let rows = doc["rows"].as_array().unwrap();
    assert_eq!(rows.len(), 4);
    for bound in ["ftlb", "sftlb"] {
        let med: Vec<f64> = rows
            .iter()
            .filter(|r| r["bound"] == bound)
            .map(|r| r["median"].as_f64().unwrap())
            .collect();
        assert!(med[0] <= med[1], "{bound}: {med:?}");
        assert!(med[1] < 5.0);
    }
}

#[test]
fn bary_recovers_a_self_target() {
    let t = TempDir::new().unwrap();
    let pts = points(8, 5);
    let target = t.path().join("target.csv");
    std::fs::write(&target, matrix_to_csv(&pts)).unwrap();
    let out = t.path().join("out");
    ok(&["--out", s(&out), "bary", "--point-clouds", "--warm-start", s(&target), s(&target)]);
    let trace = std::fs::read_to_string(out.join("loss_trace.csv")).unwrap();
    let last: f64 = trace.lines().last().unwrap().split(',').nth(1).unwrap().parse().unwrap();
    assert!(last < 1e-6, "{last}");
    assert_eq!(trace.lines().count(), 1 + 1001);
    let manifest = read_json(&out.join("manifest.json"));
    assert_eq!(manifest["config"]["steps"], 1000);
    assert_eq!(manifest["config"]["width"], 0.1);
    assert_eq!(manifest["config"]["restarts"], 3);
    let p = read_matrix(&out.join("points.csv"));
    assert_eq!((p.len(), p[0].len()), (8, 2));
}

#[test]
fn bary_accepts_large_sliced_settings() {
    let t = TempDir::new().unwrap();
    let a = write_space(t.path(), "a.csv", 10, 1);
    let b = write_space(t.path(), "b.csv", 12, 2);
    let out = t.path().join("out");
    ok(&[
        "--out", s(&out), "bary", "--distance", "stlb", "--r", "500", "--L", "500", "--steps", "3", "--restarts", "1", s(&a), s(&b),
    ]);
    assert!(out.join("points.csv").exists());
}
