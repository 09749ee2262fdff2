use std::path::Path;
use std::process::{Command, Output};

use serde_json::Value;

fn dbal(dir: &Path, args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_dbal"))
        .args(args)
        .current_dir(dir)
        .output()
        .expect("spawn dbal")
}

fn write(dir: &Path, name: &str, text: &str) {
    std::fs::write(dir.join(name), text).unwrap();
}

fn stdout(o: &Output) -> String {
    assert!(o.status.success(), "stderr: {}", String::from_utf8_lossy(&o.stderr));
    String::from_utf8(o.stdout.clone()).unwrap()
}

fn line_fixture(dir: &Path) {
    write(dir, "source.csv", "100\n");
    write(dir, "target.csv", "0\n1\n2\n10\n11\n12\n");
}

/// Plain greedy over the 1-D fixture: each step takes the candidate with the
/// smallest total of min(d0, |x - medoid|), lowest index on ties.
fn greedy_line(xs: &[f64], src: f64, k: usize) -> Vec<usize> {
    let mut chosen: Vec<usize> = Vec::new();
    for _ in 0..k {
        let mut best = (f64::INFINITY, 0);
        for c in 0..xs.len() {
            if chosen.contains(&c) {
                continue;
            }
            let cost: f64 = xs
                .iter()
                .map(|x| {
                    chosen
                        .iter()
                        .chain([c].iter())
                        .map(|&j| (x - xs[j]).abs())
                        .fold((x - src).abs(), f64::min)
                })
                .sum();
            if cost < best.0 {
                best = (cost, c);
            }
        }
        chosen.push(best.1);
    }
    chosen
}

#[test]
fn query_writes_indices_and_full_report() {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path();
    line_fixture(d);
    let o = dbal(
        d,
        &[
            "query", "--strategy", "kmedoids-greedy", "--source", "source.csv", "--target", "target.csv",
            "--budget", "2", "--indices", "idx.txt", "--report", "report.json",
        ],
    );
    stdout(&o);
    let want: String = greedy_line(&[0.0, 1.0, 2.0, 10.0, 11.0, 12.0], 100.0, 2)
        .iter()
        .map(|i| format!("{i}\n"))
        .collect();
    let got = std::fs::read_to_string(d.join("idx.txt")).unwrap();
    assert_eq!(got, want);
    assert_eq!(got, "2\n4\n");

    let report: Value = serde_json::from_str(&std::fs::read_to_string(d.join("report.json")).unwrap()).unwrap();
    for key in [
        "strategy",
        "metric",
        "budget",
        "seed",
        "indices",
        "criterion_trace",
        "mean_min_dist",
        "max_min_dist",
        "envelope_gap_mean",
        "wall_ms",
    ] {
        assert!(report.get(key).is_some(), "missing {key}");
    }
    assert_eq!(report["strategy"], "kmedoids-greedy");
    assert_eq!(report["indices"], serde_json::json!([2, 4]));
    assert!(report["envelope_gap_mean"].is_null());
    assert!(report["wall_ms"].is_number());
    // remaining distances 2,1,0,1,0,1 to the picked points 2 and 11
    assert!((report["mean_min_dist"].as_f64().unwrap() - 5.0 / 6.0).abs() < 1e-12);
}

#[test]
fn zero_budget_gives_empty_outputs() {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path();
    line_fixture(d);
    let o = dbal(
        d,
        &[
            "query", "--strategy", "kcenter", "--source", "source.csv", "--target", "target.csv", "--budget", "0",
            "--indices", "idx.txt", "--report", "r.json",
        ],
    );
    stdout(&o);
    assert_eq!(std::fs::read(d.join("idx.txt")).unwrap(), b"");
    let r: Value = serde_json::from_slice(&std::fs::read(d.join("r.json")).unwrap()).unwrap();
    assert_eq!(r["criterion_trace"], serde_json::json!([]));
}

#[test]
fn missing_target_is_a_data_error_without_outputs() {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path();
    write(d, "source.csv", "100\n");
    let o = dbal(
        d,
        &[
            "query", "--strategy", "random", "--source", "source.csv", "--target", "nope.csv", "--budget", "1",
            "--indices", "idx.txt", "--report", "r.json",
        ],
    );
    assert_eq!(o.status.code(), Some(1));
    assert!(!o.stderr.is_empty());
    let names: Vec<_> = std::fs::read_dir(d).unwrap().map(|e| e.unwrap().file_name()).collect();
    assert_eq!(names, vec![std::ffi::OsString::from("source.csv")]);
}

#[test]
fn usage_errors_exit_two() {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path();
    line_fixture(d);
    let base = [
        "query", "--source", "source.csv", "--target", "target.csv", "--budget", "1", "--indices", "i", "--report",
        "r",
    ];
    let mut bad_strategy = base.to_vec();
    bad_strategy.extend(["--strategy", "kmedians"]);
    assert_eq!(dbal(d, &bad_strategy).status.code(), Some(2));
    let mut bad_flag = base.to_vec();
    bad_flag.extend(["--strategy", "random", "--frobnicate"]);
    assert_eq!(dbal(d, &bad_flag).status.code(), Some(2));
    let mut pldm_unlabeled = base.to_vec();
    pldm_unlabeled.extend(["--strategy", "pldm"]);
    assert_eq!(dbal(d, &pldm_unlabeled).status.code(), Some(2));
    assert_eq!(dbal(d, &["bound", "bb", "--nc", "10", "--p", "3", "--batch", "0", "--eps", "0.1"]).status.code(), Some(2));
    assert_eq!(dbal(d, &["bound", "conf", "--M", "1", "--delta", "abc", "--n", "3"]).status.code(), Some(2));
    assert!(!d.join("i").exists() && !d.join("r").exists());
}

#[test]
fn eval_scores_the_unqueried_targets() {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path();
    write(d, "source.csv", "0,0\n10,10\n");
    write(d, "target.csv", "1,1\n9,9\n");
    write(d, "none.txt", "");
    write(d, "first.txt", "0\n");
    write(d, "both.txt", "0\n1\n");
    write(d, "far.txt", "5\n");
    let run = |sel: &str| {
        dbal(
            d,
            &["eval", "--source", "source.csv", "--target", "target.csv", "--indices", sel, "--metric", "l1"],
        )
    };
    // 1-NN predicts 0 and 10 for labels 1 and 9
    let r: Value = serde_json::from_str(&stdout(&run("none.txt"))).unwrap();
    assert_eq!((r["score"].as_f64(), r["n_eval"].as_u64()), (Some(1.0), Some(2)));
    let r: Value = serde_json::from_str(&stdout(&run("first.txt"))).unwrap();
    assert_eq!((r["score"].as_f64(), r["n_eval"].as_u64()), (Some(1.0), Some(1)));
    assert_eq!(run("both.txt").status.code(), Some(1));
    assert_eq!(run("far.txt").status.code(), Some(1));
}

#[test]
fn eval_accuracy_on_separable_classes() {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path();
    write(d, "source.csv", "0,0,0\n0,1,0\n5,5,1\n5,6,1\n");
    write(d, "target.csv", "0.5,0.5,0\n0.2,0.9,0\n5.5,5.2,1\n4.8,6.1,1\n");
    write(d, "none.txt", "");
    let o = dbal(
        d,
        &[
            "eval", "--source", "source.csv", "--target", "target.csv", "--indices", "none.txt", "--task",
            "accuracy", "--knn", "3", "--out", "e.json",
        ],
    );
    let r: Value = serde_json::from_str(&stdout(&o)).unwrap();
    assert_eq!(r["score"].as_f64(), Some(1.0));
    assert_eq!(std::fs::read_to_string(d.join("e.json")).unwrap(), String::from_utf8(o.stdout).unwrap());
}

#[test]
fn split_writes_sorted_parts_without_the_feature() {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path();
    let rows: Vec<String> = [7, 3, 0, 5, 1, 6, 2, 4].iter().map(|v| format!("{v},{}", v * 10)).collect();
    write(d, "data.csv", &(rows.join("\n") + "\n"));
    let out = stdout(&dbal(d, &["split", "--input", "data.csv", "--feature", "0", "--parts", "4"]));
    assert_eq!(out.lines().count(), 4);
    let mut all = Vec::new();
    for i in 0..4 {
        let text = std::fs::read_to_string(d.join(format!("data_part{i}.csv"))).unwrap();
        let vals: Vec<f64> = text.lines().map(|l| l.parse().unwrap()).collect();
        assert_eq!(vals.len(), 2);
        all.extend(vals);
    }
    // sorted by the dropped feature, so the kept column comes out ascending
    assert_eq!(all, (0..8).map(|v| v as f64 * 10.0).collect::<Vec<_>>());
    assert_eq!(dbal(d, &["split", "--input", "data.csv", "--feature", "2", "--parts", "2"]).status.code(), Some(1));
    assert_eq!(dbal(d, &["split", "--input", "data.csv", "--feature", "0", "--parts", "9"]).status.code(), Some(1));
}

#[test]
fn bound_prints_six_significant_digits() {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path();
    let out = stdout(&dbal(d, &["bound", "bb", "--nc", "100000", "--p", "100", "--batch", "316", "--eps", "0.05"]));
    let get = |k: &str| -> f64 {
        out.lines()
            .find_map(|l| l.strip_prefix(&format!("{k} ")))
            .unwrap()
            .parse()
            .unwrap()
    };
    assert!((3.2e-8..4.0e-8).contains(&get("delta")));
    assert!((7.0e-5..8.5e-5).contains(&get("gamma")));
    assert!(out.contains("clipped false"));
    assert_eq!(stdout(&dbal(d, &["bound", "conf", "--M", "1", "--delta", "1", "--n", "10"])), "conf 0\n");
    let c = stdout(&dbal(d, &["bound", "conf", "--M", "1", "--delta", "0.135335", "--n", "1"]));
    let v: f64 = c.trim().strip_prefix("conf ").unwrap().parse().unwrap();
    assert!((v - 1.0).abs() < 1e-5);
}

#[test]
fn experiment_report_and_csv() {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path();
    let o = dbal(
        d,
        &[
            "experiment", "--strategies", "kcenter,random", "--budgets", "3", "--seeds", "1,2", "--n-source", "50",
            "--n-target", "60", "--dim", "2", "--report", "exp.json", "--csv", "exp.csv",
        ],
    );
    stdout(&o);
    let r: Value = serde_json::from_slice(&std::fs::read(d.join("exp.json")).unwrap()).unwrap();
    let records = r["records"].as_array().unwrap();
    assert_eq!(records.len(), 4);
    // kcenter ignores the seed
    assert_eq!(records[0]["indices"], records[1]["indices"]);
    let csv = std::fs::read_to_string(d.join("exp.csv")).unwrap();
    assert_eq!(csv.lines().count(), 5);
    assert!(csv.starts_with("strategy,K,seed,score,"));
}
