use std::path::{Path, PathBuf};
use std::process::{Command, Output};

fn pfltank(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_pfltank"))
        .args(args)
        .output()
        .expect("binary runs")
}

fn scenario(name: &str) -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR"))
        .join("../../scenarios")
        .join(format!("{name}.json"))
}

fn stdout(o: &Output) -> String {
    String::from_utf8_lossy(&o.stdout).into_owned()
}

fn stderr(o: &Output) -> String {
    String::from_utf8_lossy(&o.stderr).into_owned()
}

const SMALL: &str = r#"{
  "name": "small",
  "tau": 0.001,
  "duration": 0.5,
  "plant": {"type": "cartesian", "diagonal": [4.0, 4.0], "x0": [0.0, 0.0]},
  "controller": {"kp": [12.0, 12.0], "kd": [8.0, 8.0], "target": [1.0, 0.0]},
  "schedule": [{"at": 0.0, "region": "chest"}],
  "tank": {"initial_energy": TANK}
}"#;

fn write_config(dir: &Path, text: &str) -> PathBuf {
    let path = dir.join("scenario.json");
    std::fs::write(&path, text).unwrap();
    path
}

#[test]
fn run_writes_artifacts_within_bounds() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("out");
    let o = pfltank(&["run", scenario("paper_replica").to_str().unwrap(), "--out", out.to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(0), "{}", stderr(&o));
    assert!(stdout(&o).contains("chest"));

    let csv = std::fs::read_to_string(out.join("ticks.csv")).unwrap();
    let header = csv.lines().next().unwrap();
    assert!(header.starts_with("k,t,active_region,alpha,"), "{header}");
    assert!(header.ends_with("xdot_0,xdot_1"), "{header}");
    assert_eq!(csv.lines().count(), 10_001);

    let summary: serde_json::Value = serde_json::from_str(&std::fs::read_to_string(out.join("summary.json")).unwrap()).unwrap();
    assert!(summary["fault"].is_null());
    assert!(summary["min_tank_margin"].as_f64().unwrap() >= -1e-9);
    for seg in summary["segments"].as_array().unwrap() {
        let max_h = seg["max_h_truth"].as_f64().unwrap();
        let bound = seg["energy_bound"].as_f64().unwrap();
        assert!(max_h <= bound + 1e-3, "{seg}");
    }
}

#[test]
fn tau_override_changes_tick_count() {
    let dir = tempfile::tempdir().unwrap();
    let o = pfltank(&[
        "run",
        scenario("budget_starved").to_str().unwrap(),
        "--out",
        dir.path().to_str().unwrap(),
        "--tau",
        "0.002",
        "--duration",
        "1",
    ]);
    assert_eq!(o.status.code(), Some(0), "{}", stderr(&o));
    let csv = std::fs::read_to_string(dir.path().join("ticks.csv")).unwrap();
    assert_eq!(csv.lines().count(), 501);
}

#[test]
fn unaffordable_region_is_a_config_error() {
    let dir = tempfile::tempdir().unwrap();
    let path = write_config(dir.path(), &SMALL.replace("TANK", "1.0"));
    let o = pfltank(&["run", path.to_str().unwrap(), "--out", dir.path().join("out").to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(3));
    assert!(stderr(&o).contains("chest"), "{}", stderr(&o));
    assert!(!dir.path().join("out").exists());
}

#[test]
fn push_reports_damper() {
    let dir = tempfile::tempdir().unwrap();
    let o = pfltank(&["run", scenario("push_at_floor").to_str().unwrap(), "--out", dir.path().to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(0), "{}", stderr(&o));
    let summary: serde_json::Value =
        serde_json::from_str(&std::fs::read_to_string(dir.path().join("summary.json")).unwrap()).unwrap();
    assert!(summary["damper_dissipated"].as_f64().unwrap() > 0.0);
    assert!(stdout(&o).contains("damper"));
}

#[test]
fn iso_chest_energy() {
    let o = pfltank(&["iso", "--fmax", "140", "--k", "25", "--k-unit", "N/mm", "--mh", "40", "--mr", "8"]);
    assert_eq!(o.status.code(), Some(0), "{}", stderr(&o));
    let text = stdout(&o);
    let line = text.lines().find(|l| l.starts_with("E_max")).unwrap();
    let value: f64 = line.split_whitespace().rev().nth(1).unwrap().parse().unwrap();
    assert!((value - 1.568).abs() < 1e-6, "{text}");
}

#[test]
fn iso_equal_masses_halve() {
    let o = pfltank(&["iso", "--fmax", "110", "--k", "75000", "--k-unit", "N/m", "--mh", "2", "--mr", "2"]);
    assert_eq!(o.status.code(), Some(0), "{}", stderr(&o));
    let text = stdout(&o);
    let line = text.lines().find(|l| l.starts_with("mu")).unwrap();
    let mu: f64 = line.split_whitespace().rev().nth(1).unwrap().parse().unwrap();
    assert!((mu - 1.0).abs() < 1e-12);
}

#[test]
fn iso_sweep_is_csv() {
    let o = pfltank(&[
        "iso", "--fmax", "140", "--k", "25", "--k-unit", "N/mm", "--mh", "40", "--mr", "8", "--sweep-mr", "2:10:2",
    ]);
    assert_eq!(o.status.code(), Some(0), "{}", stderr(&o));
    let text = stdout(&o);
    let mut lines = text.lines();
    assert_eq!(lines.next(), Some("m_r,mu,v_max_quasi_static,v_max_transient"));
    let rows: Vec<Vec<f64>> = lines
        .map(|l| l.split(',').map(|v| v.parse().unwrap()).collect())
        .collect();
    assert_eq!(rows.len(), 5);
    assert_eq!(rows[4][0], 10.0);
    // heavier robots must move slower
    assert!(rows.windows(2).all(|w| w[1][2] < w[0][2]));
}

#[test]
fn bad_sweep_range_is_rejected() {
    let o = pfltank(&[
        "iso", "--fmax", "140", "--k", "25", "--k-unit", "N/mm", "--mh", "40", "--mr", "8", "--sweep-mr", "5:1:1",
    ]);
    assert_eq!(o.status.code(), Some(3));
}

#[test]
fn validate_exit_codes() {
    for name in ["paper_replica", "push_at_floor", "stricter_switch", "budget_starved"] {
        let o = pfltank(&["validate", scenario(name).to_str().unwrap()]);
        assert_eq!(o.status.code(), Some(0), "{name}: {}", stderr(&o));
    }
    let dir = tempfile::tempdir().unwrap();

    let no_tau = SMALL.replace("TANK", "5.0").replace("\"tau\": 0.001,", "");
    let o = pfltank(&["validate", write_config(dir.path(), &no_tau).to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(3));
    assert!(stderr(&o).contains("tau"), "{}", stderr(&o));

    let negative = SMALL.replace("TANK", "5.0").replace(
        "\"schedule\"",
        r#""regions": [{"name": "soft", "f_max": 100, "stiffness": -3, "stiffness_unit": "N/mm", "body_mass": 10}],
  "schedule""#,
    );
    let o = pfltank(&["validate", write_config(dir.path(), &negative).to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(3), "{}", stdout(&o));

    let o = pfltank(&["validate", dir.path().join("missing.json").to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(3));
}

#[test]
fn argument_errors_and_help() {
    assert_eq!(pfltank(&["run"]).status.code(), Some(3));
    assert_eq!(pfltank(&["iso", "--fmax", "abc"]).status.code(), Some(3));
    assert_eq!(pfltank(&["frobnicate"]).status.code(), Some(3));
    let help = pfltank(&["--help"]);
    assert_eq!(help.status.code(), Some(0));
    assert!(stdout(&help).contains("validate"));
}
