use std::path::Path;
use std::process::{Command, Output};

use serde_json::Value;

fn tomoprop(dir: &Path, args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_tomoprop"))
        .args(args)
        .current_dir(dir)
        .output()
        .expect("binary runs")
}

fn status(out: &Output) -> i32 {
    out.status.code().expect("exited normally")
}

/// The single JSON line the binary writes to stderr on failure.
fn error_line(out: &Output) -> Value {
    let text = String::from_utf8(out.stderr.clone()).unwrap();
    let lines: Vec<&str> = text.lines().collect();
    assert_eq!(lines.len(), 1, "{text}");
    let v: Value = serde_json::from_str(lines[0]).unwrap();
    for key in ["code", "message", "context"] {
        assert!(v.get(key).is_some(), "missing {key} in {v}");
    }
    v
}

fn read_json(path: &Path) -> Value {
    serde_json::from_str(&std::fs::read_to_string(path).unwrap()).unwrap()
}

#[test]
fn oscillator_period_is_the_identity() {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path();
    assert_eq!(
        status(&tomoprop(d, &["tomogram", "--state", "ho_ground", "-o", "w0.csv"])),
        0
    );
    let evolve = [
        "evolve",
        "--state",
        "ho_ground",
        "--potential",
        "harmonic",
        "--route",
        "pullback",
        "--t",
        "6.283185307",
        "-o",
        "w1.csv",
    ];
    assert_eq!(status(&tomoprop(d, &evolve)), 0);
    let out = tomoprop(d, &["compare", "w0.csv", "w1.csv", "--tol", "1e-6"]);
    assert_eq!(status(&out), 0);
    let report: Value = serde_json::from_slice(&out.stdout).unwrap();
    assert_eq!(report["pass"], true);
    assert!(report["linf"].as_f64().unwrap() < 1e-6);
}

#[test]
fn pullback_rejects_general_potentials() {
    let dir = tempfile::tempdir().unwrap();
    let out = tomoprop(
        dir.path(),
        &[
            "evolve",
            "--route",
            "pullback",
            "--potential",
            "alpha=1,beta=0.3",
            "--t",
            "1",
            "-o",
            "w.csv",
        ],
    );
    assert_eq!(status(&out), 2);
    assert_eq!(error_line(&out)["code"], "unsupported_potential");
    assert!(!dir.path().join("w.csv").exists());
}

#[test]
fn oscillator_green_function_at_a_caustic() {
    let dir = tempfile::tempdir().unwrap();
    let out = tomoprop(
        dir.path(),
        &["green", "--kind", "oscillator", "--t", "3.14159265", "-o", "g.csv"],
    );
    assert_eq!(status(&out), 4);
    let err = error_line(&out);
    assert_eq!(err["code"], "caustic");
    assert_eq!(err["context"]["t"].as_f64(), "3.14159265".parse().ok());
}

#[test]
fn invalid_arguments_exit_two() {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path();
    let cases: [&[&str]; 5] = [
        &["evolve", "--bogus"],
        &["evolve", "--route", "kernel", "--t", "1", "-o", "w.csv"],
        &["evolve", "--route", "pde", "-o", "w.csv"],
        &["tomogram", "--state", "ho:1", "--theta-count", "4", "-o", "w.csv"],
        &["tomogram", "--state", "gaussian:0,0,-1", "-o", "w.csv"],
    ];
    for args in cases {
        let out = tomoprop(d, args);
        assert_eq!(status(&out), 2, "{args:?}");
        error_line(&out);
    }
    let out = tomoprop(d, &["compare", "missing.csv", "also_missing.csv"]);
    assert_eq!(status(&out), 2);
}

#[test]
fn compare_above_tolerance_exits_three() {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path();
    let small = ["--x-count", "64", "--theta-count", "16", "--position-count", "128"];
    let run = |state: &str, out: &str| {
        let mut args = vec!["tomogram", "--state", state, "-o", out];
        args.extend(small);
        assert_eq!(status(&tomoprop(d, &args)), 0);
    };
    run("ho_ground", "a.csv");
    run("ho:1", "b.csv");
    let out = tomoprop(d, &["compare", "a.csv", "b.csv", "--tol", "1e-3", "-o", "report.json"]);
    assert_eq!(status(&out), 3);
    let report = read_json(&d.join("report.json"));
    assert_eq!(report["pass"], false);
    assert!(d.join("report.meta.json").exists());
}

#[test]
fn outputs_are_byte_identical_across_runs() {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path();
    let runs: [&[&str]; 3] = [
        &[
            "tomogram",
            "--state",
            "gaussian:1,0.5,1",
            "--x-count",
            "128",
            "--theta-count",
            "32",
            "-o",
            "OUT.csv",
        ],
        &[
            "evolve",
            "--state",
            "ho:0+ho:2",
            "--route",
            "pde",
            "--potential",
            "alpha=1,beta=0.3",
            "--t",
            "0.7",
            "--x-count",
            "128",
            "--theta-count",
            "32",
            "-o",
            "OUT.csv",
        ],
        &[
            "kernel",
            "--t",
            "1",
            "--mu",
            "0.3",
            "--nu",
            "0.2",
            "--mu-p",
            "0.3",
            "--nu-p",
            "0.5,0.52",
            "--domain-step",
            "0.25",
            "-o",
            "OUT.csv",
        ],
    ];
    for args in runs {
        let mut outputs = Vec::new();
        for name in ["first.csv", "second.csv"] {
            let args: Vec<&str> = args.iter().map(|a| if *a == "OUT.csv" { name } else { a }).collect();
            assert_eq!(status(&tomoprop(d, &args)), 0, "{args:?}");
            outputs.push(std::fs::read(d.join(name)).unwrap());
        }
        assert_eq!(outputs[0], outputs[1], "{args:?}");
    }
}

#[test]
fn metadata_records_the_resolved_configuration() {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path();
    let args = [
        "green",
        "--kind",
        "sliced",
        "--potential",
        "alpha=1,beta=0.3",
        "--slices",
        "16",
        "--t",
        "0.5",
        "--x",
        "-1:1:5",
        "--y",
        "0",
        "-o",
        "g.csv",
    ];
    assert_eq!(status(&tomoprop(d, &args)), 0);
    let meta = read_json(&d.join("g.meta.json"));
    assert_eq!(meta["kind"], "green");
    assert_eq!(meta["convention_version"], "1.0");
    assert_eq!(meta["config"]["t"], 0.5);
    assert_eq!(meta["config"]["potential"]["beta"], 0.3);
    assert_eq!(meta["config"]["green"]["kind"]["slices"], 16);
    assert_eq!(meta["report"]["samples"], 5);
    let csv = std::fs::read_to_string(d.join("g.csv")).unwrap();
    assert!(csv.starts_with("x,y,t,re,im\n"));
    assert_eq!(csv.lines().count(), 6);
}

#[test]
fn flags_override_the_config_file() {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path();
    let config = r#"{"state": "ho:1", "potential": "harmonic", "route": "pullback", "t": 0.4,
        "x_count": 64, "theta_count": 16, "phi": "0:3:4", "output": "from_file.csv"}"#;
    std::fs::write(d.join("run.json"), config).unwrap();
    assert_eq!(
        status(&tomoprop(
            d,
            &["evolve", "--config", "run.json", "--t", "0.9", "-o", "flag.csv"]
        )),
        0
    );
    assert!(!d.join("from_file.csv").exists());
    let meta = read_json(&d.join("flag.meta.json"));
    assert_eq!(meta["config"]["t"], 0.9);
    assert_eq!(meta["config"]["state"]["n"], 1);
    let csv = std::fs::read_to_string(d.join("flag.csv")).unwrap();
    assert!(csv.starts_with("X,phi,w\n"));
    assert_eq!(csv.lines().count(), 1 + 4 * 64);

    std::fs::write(d.join("bad.json"), r#"{"stat": "ho:1"}"#).unwrap();
    let out = tomoprop(d, &["tomogram", "--config", "bad.json", "-o", "w.csv"]);
    assert_eq!(status(&out), 2);
}

#[test]
fn reconstruct_reports_trace_and_hermiticity() {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path();
    assert_eq!(
        status(&tomoprop(
            d,
            &["tomogram", "--state", "gaussian:1,0.5,1", "-o", "w.json"]
        )),
        0
    );
    let out = tomoprop(
        d,
        &[
            "reconstruct",
            "--input",
            "w.json",
            "--position-count",
            "32",
            "-o",
            "rho.csv",
        ],
    );
    assert_eq!(status(&out), 0);
    for f in ["rho_re.csv", "rho_im.csv", "rho.meta.json"] {
        assert!(d.join(f).exists(), "{f}");
    }
    let re = std::fs::read_to_string(d.join("rho_re.csv")).unwrap();
    assert_eq!(re.lines().count(), 32);
    let meta = read_json(&d.join("rho.meta.json"));
    assert!((meta["report"]["trace"]["re"].as_f64().unwrap() - 1.0).abs() < 1e-3);
    assert_eq!(meta["report"]["accuracy_warning"], false);
    assert!(meta["report"]["hermiticity_defect"].as_f64().unwrap() < 1e-6);
}

#[test]
fn json_and_csv_outputs_compare_equal() {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path();
    let base = ["tomogram", "--state", "ho:1", "--x-count", "64", "--theta-count", "16"];
    for out in ["w.csv", "w.json"] {
        let mut args = base.to_vec();
        args.extend(["-o", out]);
        assert_eq!(status(&tomoprop(d, &args)), 0);
    }
    let out = tomoprop(d, &["compare", "w.csv", "w.json", "--tol", "0"]);
    assert_eq!(status(&out), 0);
}
