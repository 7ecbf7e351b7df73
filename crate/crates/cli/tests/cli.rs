//! End-to-end checks of the `zermelo` binary: config ingestion, artifact
//! emission, exit codes, reproducibility, and the plot command.

use std::fs;
use std::path::PathBuf;
use std::process::{Command, Output};
use std::sync::atomic::{AtomicUsize, Ordering};

fn scratch_dir(tag: &str) -> PathBuf {
    static COUNTER: AtomicUsize = AtomicUsize::new(0);
    let dir = std::env::temp_dir().join(format!(
        "zermelo-test-{}-{tag}-{}",
        std::process::id(),
        COUNTER.fetch_add(1, Ordering::Relaxed)
    ));
    fs::create_dir_all(&dir).unwrap();
    dir
}

fn run(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_zermelo"))
        .args(args)
        .output()
        .expect("binary runs")
}

const ZERO_FIELD_CONFIG: &str = "\
field.vx = 0
field.vy = 0
problem.A = 0,0
problem.B = -0.35,-0.35
solver.theta_step = 0.2
";

#[test]
fn solve_writes_artifacts_and_reports_optimum() {
    let dir = scratch_dir("solve");
    let config = dir.join("run.conf");
    fs::write(&config, ZERO_FIELD_CONFIG).unwrap();
    let out_dir = dir.join("out");
    let output = run(&[
        "solve",
        config.to_str().unwrap(),
        "--out",
        out_dir.to_str().unwrap(),
        "--quiet",
    ]);
    assert_eq!(output.status.code(), Some(0), "{output:?}");
    let stdout = String::from_utf8(output.stdout).unwrap();
    assert!(stdout.contains("optimal travelling time 0.35"), "{stdout}");

    let summary = fs::read_to_string(out_dir.join("summary.json")).unwrap();
    let value: serde_json::Value = serde_json::from_str(&summary).unwrap();
    assert!(value["optimal_index"].is_u64());
    let extremals = value["extremals"].as_array().unwrap();
    assert!(!extremals.is_empty());
    let t = extremals[value["optimal_index"].as_u64().unwrap() as usize]["travel_time"]
        .as_f64()
        .unwrap();
    assert!((t - 0.35).abs() <= 1e-3, "optimal T = {t}");

    let csv = fs::read_to_string(out_dir.join("extremal_000.csv")).unwrap();
    let mut rows = csv.lines();
    assert_eq!(rows.next().unwrap(), "t,x1,x2,psi1,psi2,mu,u1,u2,mode");
    let first = rows.next().unwrap();
    assert!(first.ends_with(",I"), "first row: {first}");
    // Zero field straight run: u = (-1, -1) all the way.
    let cols: Vec<&str> = first.split(',').collect();
    assert_eq!(cols.len(), 9);
    assert_eq!(cols[6].parse::<f64>().unwrap(), -1.0);
    assert_eq!(cols[7].parse::<f64>().unwrap(), -1.0);

    let svg = fs::read_to_string(out_dir.join("field.svg")).unwrap();
    assert!(svg.starts_with("<svg"));
    assert!(svg.trim_end().ends_with("</svg>"));
}

#[test]
fn solve_reruns_byte_identical() {
    let dir = scratch_dir("repro");
    let config = dir.join("run.conf");
    fs::write(&config, ZERO_FIELD_CONFIG).unwrap();
    let mut outputs = Vec::new();
    for run_dir in ["a", "b"] {
        let out_dir = dir.join(run_dir);
        let output = run(&[
            "solve",
            config.to_str().unwrap(),
            "--out",
            out_dir.to_str().unwrap(),
            "--quiet",
        ]);
        assert_eq!(output.status.code(), Some(0));
        let mut names: Vec<String> = fs::read_dir(&out_dir)
            .unwrap()
            .map(|e| e.unwrap().file_name().into_string().unwrap())
            .collect();
        names.sort();
        let blobs: Vec<(String, Vec<u8>)> = names
            .into_iter()
            .map(|n| {
                let bytes = fs::read(out_dir.join(&n)).unwrap();
                (n, bytes)
            })
            .collect();
        outputs.push(blobs);
    }
    assert_eq!(outputs[0].len(), outputs[1].len());
    for ((name_a, bytes_a), (name_b, bytes_b)) in outputs[0].iter().zip(&outputs[1]) {
        assert_eq!(name_a, name_b);
        assert_eq!(bytes_a, bytes_b, "artifact {name_a} differs between runs");
    }
}

#[test]
fn solve_without_extremals_exits_two() {
    let dir = scratch_dir("empty");
    let config = dir.join("run.conf");
    fs::write(
        &config,
        "field.vx = 0\nfield.vy = 0\nproblem.A = 0,0\nproblem.B = 0,-3\nsolver.theta_step = 0.5\nsolver.t_max = 1\n",
    )
    .unwrap();
    let out_dir = dir.join("out");
    let output = run(&[
        "solve",
        config.to_str().unwrap(),
        "--out",
        out_dir.to_str().unwrap(),
        "--quiet",
    ]);
    assert_eq!(output.status.code(), Some(2), "{output:?}");
    let svg = fs::read_to_string(out_dir.join("field.svg")).unwrap();
    assert!(svg.contains("no extremals"));
}

#[test]
fn config_errors_exit_one() {
    let dir = scratch_dir("badcfg");
    let config = dir.join("run.conf");
    fs::write(&config, "problem.A = 0,0\nproblem.B = 1,1\n").unwrap();
    let output = run(&["solve", config.to_str().unwrap(), "--quiet"]);
    assert_eq!(output.status.code(), Some(1));
    let stderr = String::from_utf8(output.stderr).unwrap();
    assert!(stderr.contains("field"), "{stderr}");

    let output = run(&["solve", dir.join("missing.conf").to_str().unwrap()]);
    assert_eq!(output.status.code(), Some(1));
}

#[test]
fn usage_errors_exit_one() {
    let output = run(&["frobnicate", "x.conf"]);
    assert_eq!(output.status.code(), Some(1));
    let output = run(&["solve"]);
    assert_eq!(output.status.code(), Some(1));
    let output = run(&["solve", "a.conf", "--bogus"]);
    assert_eq!(output.status.code(), Some(1));
}

#[test]
fn check_field_reports_assumption() {
    let dir = scratch_dir("checkfield");
    let config = dir.join("tidal.conf");
    fs::write(
        &config,
        "field.builtin = tidal_parabolic\nproblem.A = 0,0\nproblem.B = -0.5,-6\n",
    )
    .unwrap();
    let output = run(&["check-field", config.to_str().unwrap()]);
    assert_eq!(output.status.code(), Some(0));
    let stdout = String::from_utf8(output.stdout).unwrap();
    assert!(stdout.contains("VIOLATED"), "{stdout}");
    assert!(stdout.contains("1.25"), "{stdout}");

    let config = dir.join("steady.conf");
    fs::write(
        &config,
        "field.builtin = steady_parabolic\nproblem.A = 0,0\nproblem.B = -0.5,-6\n",
    )
    .unwrap();
    let output = run(&["check-field", config.to_str().unwrap()]);
    assert_eq!(output.status.code(), Some(0));
    let stdout = String::from_utf8(output.stdout).unwrap();
    assert!(stdout.contains("holds"), "{stdout}");
    assert!(stdout.contains("dv1/dx2: identically zero"), "{stdout}");
    assert!(stdout.contains("dv2/dx1: zero at"), "{stdout}");

    let config = dir.join("zero.conf");
    fs::write(
        &config,
        "field.vx = 0\nfield.vy = 0\nproblem.A = 0,0\nproblem.B = -0.5,-0.5\n",
    )
    .unwrap();
    let output = run(&["check-field", config.to_str().unwrap()]);
    let stdout = String::from_utf8(output.stdout).unwrap();
    assert!(
        stdout.contains("notice: both safeguards vanish"),
        "{stdout}"
    );
}

#[test]
fn plot_regenerates_svg_from_summary() {
    let dir = scratch_dir("plot");
    let config = dir.join("run.conf");
    fs::write(&config, ZERO_FIELD_CONFIG).unwrap();
    let out_dir = dir.join("out");
    let output = run(&[
        "solve",
        config.to_str().unwrap(),
        "--out",
        out_dir.to_str().unwrap(),
        "--quiet",
    ]);
    assert_eq!(output.status.code(), Some(0));
    let original = fs::read(out_dir.join("field.svg")).unwrap();
    fs::remove_file(out_dir.join("field.svg")).unwrap();

    let output = run(&[
        "plot",
        config.to_str().unwrap(),
        "--from",
        out_dir.join("summary.json").to_str().unwrap(),
        "--out",
        out_dir.to_str().unwrap(),
        "--quiet",
    ]);
    assert_eq!(output.status.code(), Some(0), "{output:?}");
    let regenerated = fs::read(out_dir.join("field.svg")).unwrap();
    assert_eq!(original, regenerated);

    // Missing artifacts fail cleanly.
    let output = run(&[
        "plot",
        config.to_str().unwrap(),
        "--from",
        dir.join("nope.json").to_str().unwrap(),
    ]);
    assert_eq!(output.status.code(), Some(1));
}
