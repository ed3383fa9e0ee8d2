use std::fs;
use std::path::Path;
use std::process::{Command, Output};

fn ising(args: &[&str], cwd: &Path) -> Output {
    Command::new(env!("CARGO_BIN_EXE_ising-meta")).args(args).current_dir(cwd).output().unwrap()
}

fn stderr(out: &Output) -> String {
    String::from_utf8_lossy(&out.stderr).into_owned()
}

#[test]
fn generate_sample_recover_score() {
    let dir = tempfile::tempdir().unwrap();
    let cwd = dir.path();
    let out = ising(&["generate", "--p", "5", "--d", "2", "--k", "3", "--mask-q", "1", "--seed", "4", "--out-dir", "fam"], cwd);
    assert!(out.status.success(), "{}", stderr(&out));
    let mut files = Vec::new();
    for k in 1..=3 {
        let csv = format!("s{k}.csv");
        let theta = format!("fam/task_{k}.txt");
        let out = ising(&["sample", "--theta", &theta, "--n", "3000", "--seed", &k.to_string(), "--out", &csv], cwd);
        assert!(out.status.success(), "{}", stderr(&out));
        files.push(csv);
    }
    let text = fs::read_to_string(cwd.join("s1.csv")).unwrap();
    assert_eq!(text.lines().count(), 3000);
    assert!(text.lines().all(|l| l.split(',').count() == 5));

    let mut args = vec!["recover-union", "--beta", "3", "--out", "union.json", "--samples"];
    args.extend(files.iter().map(String::as_str));
    let out = ising(&args, cwd);
    assert!(out.status.success(), "{}", stderr(&out));

    let out = ising(&["score", "--estimated", "union.json", "--truth", "fam/theta_bar.txt"], cwd);
    assert!(out.status.success(), "{}", stderr(&out));
    let score: serde_json::Value = serde_json::from_slice(&out.stdout).unwrap();
    assert_eq!(score["recall"], 1.0, "{score}");

    let out = ising(
        &["estimate-novel", "--samples", "s1.csv", "--union", "union.json", "--d", "2", "--beta", "2", "--out", "novel.json"],
        cwd,
    );
    assert!(out.status.success(), "{}", stderr(&out));
    let result: serde_json::Value = serde_json::from_str(&fs::read_to_string(cwd.join("novel.json")).unwrap()).unwrap();
    assert!(result["all_converged"].as_bool().unwrap());

    let out = ising(&["diagnose", "--theta", "fam/theta_bar.txt", "--node", "1"], cwd);
    assert!(out.status.success(), "{}", stderr(&out));
    let diag: serde_json::Value = serde_json::from_slice(&out.stdout).unwrap();
    assert!(diag["c_min"].as_f64().unwrap() > 0.0);
    let out = ising(&["diagnose", "--theta", "fam/theta_bar.txt", "--node", "1", "--samples", "s1.csv"], cwd);
    assert!(out.status.success(), "{}", stderr(&out));
}

#[test]
fn bad_sample_entry_reports_file_and_line() {
    let dir = tempfile::tempdir().unwrap();
    fs::write(dir.path().join("bad.csv"), "1,-1,1\n1,2,-1\n").unwrap();
    let out = ising(&["recover-union", "--lambda", "0.1", "--samples", "bad.csv"], dir.path());
    assert_eq!(out.status.code(), Some(1));
    let msg = stderr(&out);
    assert!(msg.contains("bad.csv:2"), "{msg}");
}

#[test]
fn config_errors_exit_one() {
    let dir = tempfile::tempdir().unwrap();
    let cwd = dir.path();
    for args in [
        vec!["experiment-union", "--p", "6", "--d", "3", "--out-dir", "o"],
        vec!["experiment-union", "--p", "6", "--d", "9", "--seed", "1", "--out-dir", "o"],
        vec!["experiment-novel", "--config", "missing.toml", "--out-dir", "o"],
        vec!["no-such-command"],
    ] {
        let out = ising(&args, cwd);
        assert_eq!(out.status.code(), Some(1), "{args:?}: {}", stderr(&out));
    }
    fs::write(cwd.join("exp.toml"), "p = 6\nd = 3\nseed = 1\ntrials = 0\n").unwrap();
    let out = ising(&["experiment-union", "--config", "exp.toml", "--out-dir", "o"], cwd);
    assert_eq!(out.status.code(), Some(1));
    assert_eq!(ising(&["--help"], cwd).status.code(), Some(0));
}

#[test]
fn failure_budget_exits_two() {
    let dir = tempfile::tempdir().unwrap();
    let cwd = dir.path();
    fs::write(
        cwd.join("exp.toml"),
        "p = 5\nd = 2\nseed = 3\ntrials = 2\nc_grid = [20.0]\nfailure_budget = 0.0\n[solver]\nmax_iters = 1\n",
    )
    .unwrap();
    let out = ising(&["experiment-union", "--config", "exp.toml", "--out-dir", "o"], cwd);
    assert_eq!(out.status.code(), Some(2), "{}", stderr(&out));
    // results are still written
    assert!(cwd.join("o/results.csv").exists());
}

#[test]
fn experiment_outputs_and_dumps() {
    let dir = tempfile::tempdir().unwrap();
    let cwd = dir.path();
    let args = [
        "experiment-novel", "--p", "5", "--d", "2", "--seed", "9", "--trials", "3", "--c-star-grid", "2,8", "--out-dir",
        "o", "--dump", "--timings",
    ];
    let out = ising(&args, cwd);
    assert!(out.status.success(), "{}", stderr(&out));
    let csv = fs::read_to_string(cwd.join("o/results.csv")).unwrap();
    assert_eq!(csv.lines().count(), 1 + 6);
    assert!(csv.lines().next().unwrap().ends_with("wall_ms"));
    let summary: serde_json::Value = serde_json::from_str(&fs::read_to_string(cwd.join("o/summary.json")).unwrap()).unwrap();
    assert_eq!(summary["experiment"], "novel");
    assert_eq!(summary["config_hash"].as_str().unwrap().len(), 64);
    assert_eq!(summary["points"].as_array().unwrap().len(), 2);
    assert_eq!(fs::read_dir(cwd.join("o/dumps")).unwrap().count(), 6);

    // flags override a config file
    fs::write(cwd.join("exp.toml"), "p = 5\nd = 2\nseed = 9\ntrials = 3\nc_star_grid = [2.0, 8.0]\n").unwrap();
    let out = ising(&["experiment-novel", "--config", "exp.toml", "--trials", "2", "--out-dir", "p"], cwd);
    assert!(out.status.success(), "{}", stderr(&out));
    assert_eq!(fs::read_to_string(cwd.join("p/results.csv")).unwrap().lines().count(), 1 + 4);
}

#[test]
fn manifest_ingestion() {
    let dir = tempfile::tempdir().unwrap();
    let cwd = dir.path();
    fs::create_dir(cwd.join("data")).unwrap();
    fs::write(cwd.join("data/a.csv"), "x1,x2,x3\n1,0,1\n0,0,1\n1,1,1\n0,1,0\n").unwrap();
    fs::write(cwd.join("data/b.csv"), "x1,x2,x3\n1,1,0\n0,1,1\n").unwrap();
    fs::write(cwd.join("data/tasks.toml"), "binary01 = true\nheader = true\ntasks = [\"a.csv\", \"b.csv\"]\n").unwrap();
    let out = ising(&["recover-union", "--manifest", "data/tasks.toml", "--lambda", "10"], cwd);
    assert!(out.status.success(), "{}", stderr(&out));
    let result: serde_json::Value = serde_json::from_slice(&out.stdout).unwrap();
    assert_eq!(result["edge_set"]["p"], 3);
    assert!(result["edge_set"]["edges"].as_array().unwrap().is_empty());
}
