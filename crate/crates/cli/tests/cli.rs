use std::fs;
use std::path::Path;
use std::process::{Command, Output};

fn schedtune(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_schedtune"))
        .args(args)
        .output()
        .expect("binary runs")
}

fn write_config(dir: &Path, body: &str) -> String {
    let path = dir.join("config.json");
    fs::write(&path, body).unwrap();
    path.to_string_lossy().into_owned()
}

const TOY: &str = r#"{
  "env": { "session_duration_s": 5.0, "x_seconds": 2, "y_seconds": 2 },
  "optimizer": { "population": 4, "epochs": 3 },
  "baseline": { "n_sessions": 3 },
  "seed": 4
}"#;

#[test]
fn validate_accepts_toy_config() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(dir.path(), TOY);
    let out = schedtune(&["validate", &cfg]);
    assert_eq!(out.status.code(), Some(0), "{}", String::from_utf8_lossy(&out.stderr));
    assert!(String::from_utf8_lossy(&out.stdout).starts_with("ok:"));
}

#[test]
fn config_errors_exit_2() {
    let dir = tempfile::tempdir().unwrap();
    let bad = write_config(dir.path(), r#"{ "optimizer": { "epochs": 0 } }"#);
    assert_eq!(schedtune(&["validate", &bad]).status.code(), Some(2));
    let unknown = write_config(dir.path(), r#"{ "bogus": true }"#);
    assert_eq!(schedtune(&["validate", &unknown]).status.code(), Some(2));
    let missing = dir.path().join("nope.json");
    assert_eq!(
        schedtune(&["validate", missing.to_str().unwrap()]).status.code(),
        Some(2)
    );
}

#[test]
fn idle_scenario_exits_3() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(
        dir.path(),
        r#"{ "env": { "scenario": "idle", "session_duration_s": 3.0, "max_constraint_retries": 0 },
             "baseline": { "n_sessions": 2 } }"#,
    );
    let out_dir = dir.path().join("out");
    let out = schedtune(&["baseline", &cfg, "--output-dir", out_dir.to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(3), "{}", String::from_utf8_lossy(&out.stderr));
}

#[test]
fn scenario_file_resolves_relative_to_config() {
    let dir = tempfile::tempdir().unwrap();
    let scenario = serde_json::json!({
        "name": "one-ue",
        "ues": [{
            "ue_id": 0,
            "coverage_class": "Excellent",
            "mean_sinr_db": 25.0,
            "sinr_stddev_db": 1.0,
            "traffic_profile": [
                { "app_kind": "SpeedTest", "start_s": 0.0, "duration_s": 2.0, "offered_rate_bps": "unbounded" },
                { "app_kind": "Messaging", "start_s": 2.0, "duration_s": 2.0, "offered_rate_bps": 2.0e6 }
            ]
        }]
    });
    fs::write(dir.path().join("scenario.json"), scenario.to_string()).unwrap();
    let cfg = write_config(
        dir.path(),
        r#"{ "env": { "scenario": "scenario.json", "session_duration_s": 4.0, "x_seconds": 1, "y_seconds": 0 } }"#,
    );
    let out = schedtune(&["validate", &cfg]);
    assert_eq!(out.status.code(), Some(0), "{}", String::from_utf8_lossy(&out.stderr));
}

#[test]
fn run_resume_and_plotdata() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(dir.path(), TOY);
    let full = dir.path().join("full");
    let part = dir.path().join("part");
    let ok = |o: Output| {
        assert_eq!(o.status.code(), Some(0), "{}", String::from_utf8_lossy(&o.stderr));
        o
    };
    ok(schedtune(&["run", &cfg, "--output-dir", full.to_str().unwrap(), "--workers", "1"]));
    for f in ["epochs.csv", "steps.csv", "kpis.csv", "best_params.json", "summary.json", "report.json"] {
        assert!(full.join(f).exists(), "{f}");
    }
    ok(schedtune(&["run", &cfg, "--output-dir", part.to_str().unwrap(), "--stop-after", "1"]));
    assert!(!part.join("summary.json").exists());
    ok(schedtune(&["resume", part.join("checkpoint.json").to_str().unwrap()]));
    assert_eq!(
        fs::read(full.join("epochs.csv")).unwrap(),
        fs::read(part.join("epochs.csv")).unwrap()
    );

    let out = ok(schedtune(&["plotdata", full.join("report.json").to_str().unwrap()]));
    let listed = String::from_utf8_lossy(&out.stdout).lines().count();
    assert_eq!(listed, 7);
    let rewards = fs::read_to_string(full.join("plot").join("rewards.dat")).unwrap();
    let rows: Vec<Vec<f64>> = rewards
        .lines()
        .filter(|l| !l.starts_with('#'))
        .map(|l| l.split_whitespace().map(|v| v.parse().unwrap()).collect())
        .collect();
    assert_eq!(rows.len(), 3);
    for r in &rows {
        assert!(r[1] <= r[2], "p25 above median");
        assert_eq!(r[5], rows[0][5], "baseline column varies");
    }

    let summary: serde_json::Value =
        serde_json::from_str(&fs::read_to_string(full.join("summary.json")).unwrap()).unwrap();
    assert_eq!(summary["completed_epochs"], 3);
}

#[test]
fn seed_flag_changes_results() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(dir.path(), TOY);
    let a = dir.path().join("a");
    let b = dir.path().join("b");
    for (d, s) in [(&a, "1"), (&b, "2")] {
        let o = schedtune(&["baseline", &cfg, "--seed", s, "--output-dir", d.to_str().unwrap()]);
        assert_eq!(o.status.code(), Some(0));
    }
    assert_ne!(
        fs::read(a.join("baseline.csv")).unwrap(),
        fs::read(b.join("baseline.csv")).unwrap()
    );
}

#[test]
fn template_round_trips_through_validate() {
    let dir = tempfile::tempdir().unwrap();
    let out = schedtune(&["template"]);
    assert_eq!(out.status.code(), Some(0));
    let cfg = write_config(dir.path(), &String::from_utf8_lossy(&out.stdout));
    assert_eq!(schedtune(&["validate", &cfg]).status.code(), Some(0));
}
