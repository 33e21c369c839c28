use std::fs;
use std::path::Path;
use std::process::Command;

fn parkgrid() -> Command {
    Command::new(env!("CARGO_BIN_EXE_parkgrid"))
}

fn synth(dir: &Path, seed: u64, hours: usize, profile: &str) {
    let status = parkgrid()
        .args(["synth", "--seed", &seed.to_string(), "--hours", &hours.to_string(), "--profile", profile, "--out"])
        .arg(dir)
        .status()
        .unwrap();
    assert!(status.success());
}

fn write_flat_scenario(path: &Path, hours: usize) {
    let mut text = String::from("hour,load_kw,pv_pu,wind_pu\n");
    for h in 0..hours {
        text.push_str(&format!("{h},100,0,0\n"));
    }
    fs::write(path, text).unwrap();
}

#[test]
fn missing_scenario_exits_nonzero_naming_the_path() {
    let dir = tempfile::tempdir().unwrap();
    let missing = dir.path().join("absent.csv");
    let out = parkgrid()
        .args(["simulate", "--scenario"])
        .arg(&missing)
        .arg("--out")
        .arg(dir.path().join("o"))
        .output()
        .unwrap();
    assert!(!out.status.success());
    let err = String::from_utf8_lossy(&out.stderr);
    assert!(err.contains(&missing.display().to_string()), "{err}");
}

#[test]
fn malformed_row_is_reported_with_its_line() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("bad.csv");
    fs::write(&path, "hour,load_kw,pv_pu,wind_pu\n0,100,0.5,0.1\n1,abc,0.5,0.1\n").unwrap();
    let out = parkgrid()
        .args(["simulate", "--pv-kw", "100", "--scenario"])
        .arg(&path)
        .arg("--out")
        .arg(dir.path().join("o"))
        .output()
        .unwrap();
    assert!(!out.status.success());
    let err = String::from_utf8_lossy(&out.stderr);
    assert!(err.contains("row 3"), "{err}");
}

#[test]
fn expect_hours_mismatch_fails() {
    let dir = tempfile::tempdir().unwrap();
    synth(dir.path(), 1, 24, "mixed");
    let out = parkgrid()
        .args(["simulate", "--pv-kw", "350", "--wind-kw", "300", "--expect-hours", "48", "--scenario"])
        .arg(dir.path().join("scenario.csv"))
        .arg("--out")
        .arg(dir.path().join("o"))
        .output()
        .unwrap();
    assert!(!out.status.success());
}

#[test]
fn simulate_and_compare_write_their_files() {
    let dir = tempfile::tempdir().unwrap();
    synth(dir.path(), 2, 48, "solar-heavy");
    let scenario = dir.path().join("scenario.csv");
    let prices = dir.path().join("prices.toml");
    for cmd in ["simulate", "compare"] {
        let status = parkgrid()
            .args([cmd, "--pv-kw", "600", "--scenario"])
            .arg(&scenario)
            .arg("--prices")
            .arg(&prices)
            .arg("--out")
            .arg(dir.path().join(cmd))
            .status()
            .unwrap();
        assert!(status.success());
    }
    let sim = dir.path().join("simulate");
    for f in ["trace.csv", "load_balance.csv", "report.json", "manifest.json"] {
        assert!(sim.join(f).exists(), "{f}");
    }
    let trace = fs::read_to_string(sim.join("trace.csv")).unwrap();
    assert_eq!(trace.lines().count(), 49);

    let table = fs::read_to_string(dir.path().join("compare/compare.csv")).unwrap();
    let lines: Vec<&str> = table.lines().collect();
    assert_eq!(lines[0], "indicator,no storage,50kW/100kWh");
    assert_eq!(lines.len(), 6);
    assert!(lines[1].starts_with("Electricity Purchased (kWh/day),"));
    assert!(lines[5].starts_with('#'));
}

#[test]
fn optimize_reports_grid_oracle() {
    let dir = tempfile::tempdir().unwrap();
    synth(dir.path(), 3, 24, "wind-heavy");
    let status = parkgrid()
        .args(["optimize", "--wind-kw", "500", "--generations", "10", "--grid-oracle", "--scenario"])
        .arg(dir.path().join("scenario.csv"))
        .arg("--out")
        .arg(dir.path().join("o"))
        .status()
        .unwrap();
    assert!(status.success());
    let report: serde_json::Value =
        serde_json::from_str(&fs::read_to_string(dir.path().join("o/optimize.json")).unwrap()).unwrap();
    assert_eq!(report["grid_oracle"]["evaluations"], 99);
    let conv = fs::read_to_string(dir.path().join("o/convergence.csv")).unwrap();
    assert_eq!(conv.lines().count(), 11);
}

#[test]
fn constant_cost_is_a_warning_not_an_error() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("flat.csv");
    write_flat_scenario(&path, 24);
    let out = parkgrid()
        .args(["analyze", "--trees", "5", "--scenario"])
        .arg(&path)
        .arg("--out")
        .arg(dir.path().join("o"))
        .output()
        .unwrap();
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let err = String::from_utf8_lossy(&out.stderr);
    assert!(err.contains("warning"), "{err}");
    let imp = fs::read_to_string(dir.path().join("o/importance.csv")).unwrap();
    for line in imp.lines().skip(1) {
        assert!(line.ends_with(",0"), "{line}");
    }
    // every feature is constant, so the linear fit is rank deficient
    let linear: serde_json::Value =
        serde_json::from_str(&fs::read_to_string(dir.path().join("o/linear.json")).unwrap()).unwrap();
    assert!(linear["coefficients"].is_null());
}

#[test]
fn unknown_price_key_is_rejected() {
    let dir = tempfile::tempdir().unwrap();
    synth(dir.path(), 4, 24, "mixed");
    let prices = dir.path().join("prices.toml");
    let mut text = fs::read_to_string(&prices).unwrap();
    text.push_str("surprise = 1.0\n");
    fs::write(&prices, text).unwrap();
    let out = parkgrid()
        .args(["simulate", "--pv-kw", "350", "--wind-kw", "300", "--scenario"])
        .arg(dir.path().join("scenario.csv"))
        .arg("--prices")
        .arg(&prices)
        .arg("--out")
        .arg(dir.path().join("o"))
        .output()
        .unwrap();
    assert!(!out.status.success());
    assert!(String::from_utf8_lossy(&out.stderr).contains("surprise"));
}
