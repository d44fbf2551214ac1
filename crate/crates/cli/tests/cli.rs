#[path = "../../core/tests/common/golden.rs"]
mod golden;

use std::path::Path;
use std::process::{Command, Output};

use cashfactor::synthetic::{write_inputs, SyntheticMarket};
use chrono::NaiveDate;

fn cashfactor(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_cashfactor"))
        .args(args)
        .env("CASHFACTOR_LOG", "warn")
        .output()
        .expect("binary runs")
}

fn market(dir: &Path) {
    let d = |y, m, day| NaiveDate::from_ymd_opt(y, m, day).unwrap();
    let raw = SyntheticMarket::new(30, d(2015, 1, 1), d(2019, 12, 31), 5).generate();
    write_inputs(&raw, dir).unwrap();
}

fn path(p: &Path) -> &str {
    p.to_str().unwrap()
}

#[test]
fn backtest_reproduces_the_golden_trace() {
    let tmp = tempfile::tempdir().unwrap();
    let config = golden::golden_dir().join("golden.toml");
    let out = cashfactor(&["backtest", "--config", path(&config), "--lookback", "6", "--out", path(tmp.path())]);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let bad = golden::mismatches(tmp.path());
    assert!(bad.is_empty(), "mismatched: {bad:?}");
}

#[test]
fn optimized_backtest_records_the_chosen_lookback() {
    let tmp = tempfile::tempdir().unwrap();
    market(tmp.path());
    let out_dir = tmp.path().join("opt");
    let out = cashfactor(&[
        "backtest",
        "--data",
        path(tmp.path()),
        "--lookback",
        "optimize",
        "--train-start",
        "2016-01-01",
        "--train-end",
        "2017-12-31",
        "--out",
        path(&out_dir),
    ]);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let opt: serde_json::Value =
        serde_json::from_str(&std::fs::read_to_string(out_dir.join("optimization.json")).unwrap()).unwrap();
    let meta: serde_json::Value =
        serde_json::from_str(&std::fs::read_to_string(out_dir.join("run_metadata.json")).unwrap()).unwrap();
    let best = opt["best_L"].as_u64().unwrap();
    assert!((1..=24).contains(&best));
    assert_eq!(meta["lookback"].as_u64(), Some(best));
    let listed = String::from_utf8(out.stdout).unwrap();
    assert!(listed.lines().any(|l| l.ends_with("optimization.json")));
}

#[test]
fn repeated_runs_write_identical_files() {
    let tmp = tempfile::tempdir().unwrap();
    market(tmp.path());
    for name in ["a", "b"] {
        let out = cashfactor(&[
            "backtest",
            "--data",
            path(tmp.path()),
            "--lookback",
            "4",
            "--out",
            path(&tmp.path().join(name)),
        ]);
        assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    }
    let mut files: Vec<_> = std::fs::read_dir(tmp.path().join("a")).unwrap().map(|e| e.unwrap().file_name()).collect();
    files.sort();
    assert!(files.len() >= 9);
    for f in files {
        let a = std::fs::read(tmp.path().join("a").join(&f)).unwrap();
        let b = std::fs::read(tmp.path().join("b").join(&f)).unwrap();
        assert_eq!(a, b, "{f:?} differs between runs");
    }
}

#[test]
fn report_rebuilds_performance_from_saved_returns() {
    let tmp = tempfile::tempdir().unwrap();
    market(tmp.path());
    let out_dir = tmp.path().join("r");
    let common = ["--data", path(tmp.path()), "--lookback", "3", "--out", path(&out_dir)];
    let first = cashfactor(&[&["backtest"], &common[..]].concat());
    assert!(first.status.success());
    let before = std::fs::read(out_dir.join("performance.csv")).unwrap();
    std::fs::remove_file(out_dir.join("performance.csv")).unwrap();
    let report = cashfactor(&[&["report"], &common[..]].concat());
    assert!(report.status.success(), "{}", String::from_utf8_lossy(&report.stderr));
    assert_eq!(before, std::fs::read(out_dir.join("performance.csv")).unwrap());
}

#[test]
fn ingest_and_signal_write_their_outputs() {
    let tmp = tempfile::tempdir().unwrap();
    market(tmp.path());
    let out_dir = tmp.path().join("s");
    for (cmd, files) in
        [("ingest", ["panel.csv", "ingest_report.json"]), ("signal", ["signals.csv", "signal_fits.json"])]
    {
        let out = cashfactor(&[cmd, "--data", path(tmp.path()), "--out", path(&out_dir)]);
        assert!(out.status.success(), "{cmd}: {}", String::from_utf8_lossy(&out.stderr));
        for f in files {
            assert!(out_dir.join(f).exists(), "{cmd} did not write {f}");
        }
    }
}

#[test]
fn configuration_problems_exit_with_2() {
    let tmp = tempfile::tempdir().unwrap();
    market(tmp.path());
    let dir = path(tmp.path());
    let cases: [&[&str]; 3] = [
        &["optimize", "--data", dir],
        &["backtest", "--data", dir, "--winsor", "99,1"],
        &[
            "backtest",
            "--data",
            dir,
            "--train-start",
            "2016-01-01",
            "--train-end",
            "2017-12-31",
            "--test-start",
            "2017-06-01",
            "--test-end",
            "2018-12-31",
        ],
    ];
    for args in cases {
        let out = cashfactor(args);
        assert_eq!(out.status.code(), Some(2), "{args:?}: {}", String::from_utf8_lossy(&out.stderr));
        assert!(String::from_utf8_lossy(&out.stderr).starts_with("error: "));
    }
}

#[test]
fn data_problems_exit_with_3_and_missing_files_with_2() {
    let tmp = tempfile::tempdir().unwrap();
    market(tmp.path());
    let prices = tmp.path().join("prices.csv");
    let text = std::fs::read_to_string(&prices).unwrap();
    let mut lines: Vec<&str> = text.lines().collect();
    lines.insert(2, "not,a,valid,row");
    std::fs::write(&prices, lines.join("\n")).unwrap();
    let out = cashfactor(&["backtest", "--data", path(tmp.path()), "--lookback", "3"]);
    assert_eq!(out.status.code(), Some(3), "{}", String::from_utf8_lossy(&out.stderr));

    let empty = tempfile::tempdir().unwrap();
    let out = cashfactor(&["ingest", "--data", path(empty.path())]);
    assert_eq!(out.status.code(), Some(2), "a missing input file is a configuration error");
}

#[test]
fn help_lists_defaults() {
    let out = cashfactor(&["--help"]);
    let text = String::from_utf8(out.stdout).unwrap();
    for needle in ["winsor", "CASHFACTOR_LOG", "Exit codes", "optimize"] {
        assert!(text.contains(needle), "help lacks {needle}");
    }
}
