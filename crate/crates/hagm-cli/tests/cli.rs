//! End-to-end checks of the `hagm` binary: every subcommand's happy path,
//! the configuration-error exit code, and the mission-failure exit code.
//! Each test works in its own directory under the cargo temp dir.

use std::fs;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};

fn hagm(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_hagm"))
        .args(args)
        .output()
        .expect("binary runs")
}

fn tmp_dir(name: &str) -> PathBuf {
    let d = Path::new(env!("CARGO_TARGET_TMPDIR")).join(name);
    fs::create_dir_all(&d).unwrap();
    d
}

fn write(path: &Path, text: &str) {
    fs::write(path, text).unwrap();
}

fn stdout(out: &Output) -> String {
    String::from_utf8(out.stdout.clone()).unwrap()
}

fn stderr(out: &Output) -> String {
    String::from_utf8(out.stderr.clone()).unwrap()
}

fn exit_code(out: &Output) -> i32 {
    out.status.code().expect("no signal")
}

/// A one second ground scenario with a small initial tilt; fast enough to
/// run several times per test.
const SHORT_SCENARIO: &str = "[scenario]\nname = \"smoke\"\nduration = 1.0\n\n[initial]\npitch = 0.05\n";

#[test]
fn allocate_prints_one_csv_row_per_mode() {
    for mode in ["ground", "aerial"] {
        let out = hagm(&["allocate", "--input", "26,0.5,-0.3,0.1", "--mode", mode]);
        assert_eq!(exit_code(&out), 0, "{}", stderr(&out));
        let text = stdout(&out);
        let fields: Vec<f64> = text
            .trim()
            .split(',')
            .map(|s| s.parse().unwrap())
            .collect();
        assert_eq!(fields.len(), 14, "{text}");
        for &v in &fields[0..4] {
            assert!((100.0..=1000.0).contains(&v), "speed {v} out of band");
        }
        for &s in &fields[4..6] {
            assert!((0.0..=1.0).contains(&s), "scale {s} out of range");
        }
        for &flag in &fields[10..14] {
            assert!(flag == 0.0 || flag == 1.0, "flag {flag} not boolean");
        }
        if mode == "aerial" {
            // In-envelope wrench: the aerial branch tracks thrust exactly.
            assert!((fields[6] - 26.0).abs() < 1e-9, "thrust {}", fields[6]);
        }
    }

    let out = hagm(&[
        "allocate",
        "--input",
        "26,0.5,-0.3,0.1",
        "--mode",
        "baseline",
        "--hover-throttle",
        "0.15",
    ]);
    assert_eq!(exit_code(&out), 0, "{}", stderr(&out));
    let fields: Vec<f64> = stdout(&out)
        .trim()
        .split(',')
        .map(|s| s.parse().unwrap())
        .collect();
    assert_eq!(fields.len(), 14);
    // The baseline applies one common torque scale, reported as both stages.
    assert_eq!(fields[4], fields[5]);
}

#[test]
fn allocate_rejects_bad_usage_with_exit_1() {
    let cases: &[&[&str]] = &[
        // Baseline without a hover throttle.
        &["allocate", "--input", "26,0,0,0", "--mode", "baseline"],
        // Hover throttle outside (0, 1).
        &["allocate", "--input", "26,0,0,0", "--mode", "baseline", "--hover-throttle", "1.5"],
        // Hover throttle on a non-baseline mode.
        &["allocate", "--input", "26,0,0,0", "--mode", "ground", "--hover-throttle", "0.2"],
        // Unknown mode.
        &["allocate", "--input", "26,0,0,0", "--mode", "hybrid"],
        // Wrong field count.
        &["allocate", "--input", "26,0,0", "--mode", "ground"],
    ];
    for args in cases {
        let out = hagm(args);
        assert_eq!(exit_code(&out), 1, "{args:?}");
        assert!(stderr(&out).starts_with("error:"), "{args:?}: {}", stderr(&out));
    }
}

#[test]
fn simulate_writes_identical_telemetry_on_rerun() {
    let dir = tmp_dir("simulate_rerun");
    let scenario = dir.join("smoke.toml");
    write(&scenario, SHORT_SCENARIO);

    let mut runs = Vec::new();
    for name in ["a.csv", "b.csv"] {
        let out_path = dir.join(name);
        let out = hagm(&[
            "simulate",
            "--scenario",
            scenario.to_str().unwrap(),
            "--out",
            out_path.to_str().unwrap(),
        ]);
        assert_eq!(exit_code(&out), 0, "{}", stderr(&out));
        assert!(stdout(&out).contains("smoke: ok"), "{}", stdout(&out));
        runs.push(fs::read(&out_path).unwrap());
    }
    assert_eq!(runs[0], runs[1], "telemetry differs between identical runs");
    let text = String::from_utf8(runs[0].clone()).unwrap();
    assert_eq!(text.lines().next(), Some(hagm::telemetry::CSV_HEADER));
    assert!(text.lines().count() > 50, "expected a populated log");
}

#[test]
fn simulate_rejects_unknown_scenario_key_with_exit_1() {
    let dir = tmp_dir("simulate_bad_config");
    let scenario = dir.join("bad.toml");
    write(&scenario, "[scenario]\nname = \"x\"\nduration = 1.0\nbogus = 1\n");

    let out = hagm(&[
        "simulate",
        "--scenario",
        scenario.to_str().unwrap(),
        "--out",
        dir.join("t.csv").to_str().unwrap(),
    ]);
    assert_eq!(exit_code(&out), 1);
    let err = stderr(&out);
    assert!(err.contains("bogus"), "error should name the bad key: {err}");
    assert!(err.contains("bad.toml"), "error should name the file: {err}");
}

#[test]
fn sweep_writes_summary_and_per_value_files() {
    let dir = tmp_dir("sweep_out");
    let scenario = dir.join("smoke.toml");
    write(&scenario, SHORT_SCENARIO);
    let out_dir = dir.join("results");

    let out = hagm(&[
        "sweep",
        "--scenario",
        scenario.to_str().unwrap(),
        "--vary",
        "T_ground_frac=0.05:0.1:0.05",
        "--out",
        out_dir.to_str().unwrap(),
    ]);
    assert_eq!(exit_code(&out), 0, "{}", stderr(&out));

    for name in ["T_ground_frac_0.05.csv", "T_ground_frac_0.1.csv"] {
        assert!(out_dir.join(name).exists(), "missing {name}");
    }
    let summary = fs::read_to_string(out_dir.join("summary.csv")).unwrap();
    let lines: Vec<&str> = summary.lines().collect();
    assert_eq!(lines[0], "T_ground_frac,pitch_rmse,mean_power_w,energy_j");
    assert_eq!(lines.len(), 3, "{summary}");
    assert!(lines[1].starts_with("0.05,"), "{summary}");
    assert!(lines[2].starts_with("0.1,"), "{summary}");
}

#[test]
fn compare_emits_one_row_per_configuration() {
    let dir = tmp_dir("compare_out");
    let scenario = dir.join("smoke.toml");
    write(&scenario, SHORT_SCENARIO);
    let table_path = dir.join("table.csv");

    let out = hagm(&[
        "compare",
        "--scenario",
        scenario.to_str().unwrap(),
        "--hover",
        "0.15",
        "--out",
        table_path.to_str().unwrap(),
    ]);
    assert_eq!(exit_code(&out), 0, "{}", stderr(&out));

    let table = fs::read_to_string(&table_path).unwrap();
    let lines: Vec<&str> = table.lines().collect();
    assert_eq!(lines[0], "label,hover_frac,pitch_rmse,settling_time_s,mean_power_w");
    assert_eq!(lines.len(), 3, "{table}");
    assert!(lines[1].starts_with("prioritized,,"), "{table}");
    assert!(lines[2].starts_with("baseline_0.15,0.15,"), "{table}");
}

#[test]
fn mission_writes_all_outputs_and_succeeds() {
    let out_dir = tmp_dir("mission_ok").join("results");
    let out = hagm(&["mission", "--out", out_dir.to_str().unwrap()]);
    assert_eq!(exit_code(&out), 0, "{}", stderr(&out));
    assert!(stdout(&out).contains("mission: ok"), "{}", stdout(&out));

    for name in ["telemetry.csv", "events.csv", "phases.csv", "summary.csv"] {
        assert!(out_dir.join(name).exists(), "missing {name}");
    }
    let summary = fs::read_to_string(out_dir.join("summary.csv")).unwrap();
    let lines: Vec<&str> = summary.lines().collect();
    assert_eq!(lines[0], "success,placement_error_m,phases_completed,failure");
    assert!(lines[1].starts_with("true,"), "{summary}");
    let phases = fs::read_to_string(out_dir.join("phases.csv")).unwrap();
    assert_eq!(phases.lines().count(), 11, "header plus ten phases: {phases}");
}

#[test]
fn mission_timeout_fails_with_exit_2() {
    let dir = tmp_dir("mission_timeout");
    let config = dir.join("mission.toml");
    write(&config, "[timeouts]\napproach = 0.1\n");

    let out = hagm(&[
        "mission",
        "--config",
        config.to_str().unwrap(),
        "--out",
        dir.join("results").to_str().unwrap(),
    ]);
    assert_eq!(exit_code(&out), 2, "{}", stderr(&out));
    assert!(stderr(&out).contains("FAILED"), "{}", stderr(&out));
}
