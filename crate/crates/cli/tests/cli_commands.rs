use std::fs;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use tempfile::TempDir;

fn trisk(dir: &Path, args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_trisk"))
        .current_dir(dir)
        .env_remove(trisk_cli::CONFIG_ENV)
        .args(args)
        .output()
        .expect("binary runs")
}

fn ok(out: &Output) {
    assert!(
        out.status.success(),
        "exit {:?}\nstderr: {}",
        out.status.code(),
        String::from_utf8_lossy(&out.stderr)
    );
}

fn generated(funds: &str) -> TempDir {
    let tmp = tempfile::tempdir().unwrap();
    ok(&trisk(
        tmp.path(),
        &["generate", "-o", "u", "--funds", funds, "--seed", "7"],
    ));
    tmp
}

const INPUTS: [&str; 8] = [
    "--positions",
    "u/positions.csv",
    "--instruments",
    "u/instruments.csv",
    "--counterparties",
    "u/counterparties.csv",
    "--funds",
    "u/funds.csv",
];

fn assess(dir: &Path, extra: &[&str]) -> Output {
    let mut args = vec!["assess"];
    args.extend(INPUTS);
    args.extend(extra);
    trisk(dir, &args)
}

fn fixture(name: &str) -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR"))
        .join("tests/fixtures")
        .join(name)
}

#[test]
fn assess_then_report_writes_every_table() {
    let tmp = generated("25");
    let out = assess(tmp.path(), &["-o", "out"]);
    ok(&out);
    assert!(String::from_utf8_lossy(&out.stdout).contains("MtM loss"));
    for f in [
        "positions.csv",
        "funds.csv",
        "scenario.json",
        "calibration.csv",
        "report.json",
    ] {
        assert!(tmp.path().join("out").join(f).is_file(), "{f}");
    }
    ok(&trisk(
        tmp.path(),
        &[
            "report",
            "--results",
            "out",
            "-o",
            "rep",
            "--subset",
            "sustainable",
        ],
    ));
    for f in [
        "instruments.csv",
        "groups.csv",
        "greenness.csv",
        "distribution.csv",
        "hist_funds.csv",
        "hist_equity.csv",
        "summary.txt",
        "report_sustainable.json",
    ] {
        assert!(tmp.path().join("rep").join(f).is_file(), "{f}");
    }
    let hist = fs::read_to_string(tmp.path().join("rep/hist_funds.csv")).unwrap();
    assert_eq!(hist.lines().count(), 1 + 50);
}

#[test]
fn report_reproduces_assess_summary() {
    let tmp = generated("25");
    ok(&assess(tmp.path(), &["-o", "out"]));
    ok(&trisk(
        tmp.path(),
        &["report", "--results", "out", "-o", "rep"],
    ));
    let a: serde_json::Value =
        serde_json::from_str(&fs::read_to_string(tmp.path().join("out/report.json")).unwrap())
            .unwrap();
    let b: serde_json::Value =
        serde_json::from_str(&fs::read_to_string(tmp.path().join("rep/report_all.json")).unwrap())
            .unwrap();
    assert_eq!(a["summary"], b["summary"]);
    assert_eq!(a["fund_distribution"], b["fund_distribution"]);
    assert_eq!(a["config"], b["config"]);
}

#[test]
fn report_matches_golden() {
    let tmp = generated("12");
    ok(&assess(tmp.path(), &["-o", "out", "--threads", "2"]));
    let got = fs::read_to_string(tmp.path().join("out/report.json")).unwrap();
    let golden = fixture("golden_report.json");
    if std::env::var_os("UPDATE_GOLDEN").is_some() {
        fs::write(&golden, &got).unwrap();
    }
    let want =
        fs::read_to_string(&golden).expect("golden report present; rerun with UPDATE_GOLDEN=1");
    assert!(got == want, "report.json differs from {}", golden.display());
}

#[test]
fn thread_count_does_not_change_output() {
    let tmp = generated("30");
    ok(&assess(tmp.path(), &["-o", "a", "--threads", "1"]));
    ok(&assess(tmp.path(), &["-o", "b", "--threads", "4"]));
    for f in ["positions.csv", "funds.csv", "report.json"] {
        let a = fs::read(tmp.path().join("a").join(f)).unwrap();
        let b = fs::read(tmp.path().join("b").join(f)).unwrap();
        assert!(a == b, "{f} differs");
    }
}

#[test]
fn missing_input_exits_with_io_code() {
    let tmp = tempfile::tempdir().unwrap();
    let out = trisk(
        tmp.path(),
        &[
            "assess",
            "--positions",
            "p.csv",
            "--instruments",
            "i.csv",
            "--counterparties",
            "c.csv",
            "-o",
            "x",
        ],
    );
    assert_eq!(out.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&out.stderr).contains("p.csv"));
}

#[test]
fn usage_errors_exit_with_one() {
    let tmp = tempfile::tempdir().unwrap();
    assert_eq!(trisk(tmp.path(), &["frobnicate"]).status.code(), Some(1));
    assert_eq!(
        trisk(tmp.path(), &["assess", "-o", "x"]).status.code(),
        Some(1)
    );
    let generated = generated("3");
    assert_eq!(assess(generated.path(), &[]).status.code(), Some(1));
    assert_eq!(
        assess(generated.path(), &["-o", "x", "--threads", "0"])
            .status
            .code(),
        Some(1)
    );
    assert_eq!(trisk(tmp.path(), &["--help"]).status.code(), Some(0));
}

#[test]
fn malformed_csv_is_a_data_error() {
    let tmp = generated("3");
    fs::write(tmp.path().join("u/positions.csv"), "fund_id,isin\nF1,X\n").unwrap();
    let out = assess(tmp.path(), &["-o", "out"]);
    assert_eq!(out.status.code(), Some(1));
    assert!(!tmp.path().join("out").exists());
}

#[test]
fn validation_failure_lists_findings() {
    let tmp = generated("3");
    let path = tmp.path().join("u/positions.csv");
    let mut text = fs::read_to_string(&path).unwrap();
    text.push_str("F00000,XX0000000000,equity,1000\n");
    fs::write(&path, text).unwrap();
    let out = assess(tmp.path(), &["-o", "out"]);
    assert_eq!(out.status.code(), Some(1));
    let err = String::from_utf8_lossy(&out.stderr);
    assert!(err.contains("XX0000000000"), "{err}");
}

#[test]
fn config_paths_resolve_against_config_dir() {
    let tmp = generated("5");
    let cfg = serde_json::json!({
        "positions": "positions.csv",
        "instruments": "instruments.csv",
        "counterparties": "counterparties.csv",
        "funds": "funds.csv",
        "output_dir": "../from_config",
        "risk": { "bond_sign": "additive" }
    });
    fs::write(tmp.path().join("u/run.json"), cfg.to_string()).unwrap();
    ok(&trisk(tmp.path(), &["assess", "--config", "u/run.json"]));
    let report = fs::read_to_string(tmp.path().join("from_config/report.json")).unwrap();
    assert!(report.contains("\"bond_sign\": \"additive\""));

    // The environment variable works too, and flags win over the file.
    let out = Command::new(env!("CARGO_BIN_EXE_trisk"))
        .current_dir(tmp.path())
        .env(trisk_cli::CONFIG_ENV, "u/run.json")
        .args(["assess", "-o", "flag_dir", "--bond-sign", "taylor"])
        .output()
        .unwrap();
    ok(&out);
    let report = fs::read_to_string(tmp.path().join("flag_dir/report.json")).unwrap();
    assert!(report.contains("\"bond_sign\": \"taylor\""));
    assert!(!tmp.path().join("from_config/.report.json.tmp").exists());
}

#[test]
fn unknown_config_key_is_rejected() {
    let tmp = tempfile::tempdir().unwrap();
    fs::write(tmp.path().join("c.json"), r#"{"positons": "p.csv"}"#).unwrap();
    let out = trisk(tmp.path(), &["assess", "--config", "c.json", "-o", "x"]);
    assert_eq!(out.status.code(), Some(1));
}

#[test]
fn calibrate_recovers_shipped_moments() {
    let tmp = tempfile::tempdir().unwrap();
    ok(&trisk(
        tmp.path(),
        &["generate", "-o", "cal", "--calibration-sample"],
    ));
    let out = trisk(
        tmp.path(),
        &[
            "calibrate",
            "--counterparties",
            "cal/counterparties.csv",
            "--output",
            "fit.csv",
        ],
    );
    ok(&out);
    let fitted = trisk_core::calib::read_calibration(&tmp.path().join("fit.csv")).unwrap();
    let shipped = trisk_core::calib::default_calibration();
    assert_eq!(fitted.len(), shipped.0.len());
    for row in &fitted {
        let want = &shipped.0[&row.segment];
        assert_eq!(row.n, want.n, "{}", row.segment.label());
        assert!(
            ((row.mean - want.mean) / want.mean).abs() < 1e-9,
            "{}",
            row.segment.label()
        );
        assert!(
            ((row.std - want.std) / want.std).abs() < 1e-9,
            "{}",
            row.segment.label()
        );
    }
    // Segments below five firms are flagged.
    assert!(String::from_utf8_lossy(&out.stderr).contains("A02-A03"));
}

#[test]
fn calibration_override_feeds_assess() {
    let tmp = generated("6");
    ok(&trisk(
        tmp.path(),
        &[
            "calibrate",
            "--counterparties",
            "u/counterparties.csv",
            "--output",
            "fit.csv",
        ],
    ));
    ok(&assess(tmp.path(), &["-o", "base"]));
    ok(&assess(
        tmp.path(),
        &["-o", "fitted", "--calibration", "fit.csv"],
    ));
    let a = fs::read(tmp.path().join("base/positions.csv")).unwrap();
    let b = fs::read(tmp.path().join("fitted/positions.csv")).unwrap();
    assert!(a != b);
}
