//! End-to-end checks of the `qclt` binary: exit codes, file emission,
//! output schemas, and byte-level determinism of repeated runs.

use std::path::Path;
use std::process::{Command, Output};

use qclt_core::experiments::csv_without_timing;

fn qclt(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_qclt"))
        .args(args)
        .output()
        .expect("failed to launch the qclt binary")
}

fn stdout_of(out: &Output) -> String {
    String::from_utf8(out.stdout.clone()).expect("stdout is UTF-8")
}

fn stderr_of(out: &Output) -> String {
    String::from_utf8(out.stderr.clone()).expect("stderr is UTF-8")
}

fn exit_code(out: &Output) -> i32 {
    out.status.code().expect("process was not signal-killed")
}

/// Parses one CSV data row into its seven columns.
fn parse_row(line: &str) -> (usize, Vec<f64>) {
    let mut parts = line.split(',');
    let n: usize = parts.next().unwrap().parse().unwrap();
    let rest: Vec<f64> = parts.map(|s| s.parse().unwrap()).collect();
    assert_eq!(rest.len(), 6, "row has n plus six numeric columns: {line}");
    (n, rest)
}

#[test]
fn help_and_version_exit_clean() {
    assert_eq!(exit_code(&qclt(&["--help"])), 0);
    assert_eq!(exit_code(&qclt(&["--version"])), 0);
    assert_eq!(exit_code(&qclt(&["rates", "--help"])), 0);
    // Unknown flags and missing required arguments are invalid input.
    assert_eq!(exit_code(&qclt(&["--bogus"])), 1);
    assert_eq!(exit_code(&qclt(&["rates"])), 1);
}

#[test]
fn rates_writes_csv_and_gnuplot_sidecar() {
    let dir = tempfile::tempdir().unwrap();
    let csv_path = dir.path().join("rates.csv");
    let csv_str = csv_path.to_str().unwrap();

    let out = qclt(&["rates", "--state", "fock:1", "--n-grid", "2,4,8", "--out", csv_str]);
    assert_eq!(exit_code(&out), 0, "stderr: {}", stderr_of(&out));

    let csv = std::fs::read_to_string(&csv_path).unwrap();
    let mut lines = csv.lines();
    let config = lines.next().unwrap();
    assert!(config.starts_with("# config: state=fock:1"), "{config}");
    assert_eq!(
        lines.next().unwrap(),
        "n,trace_dist,relent,hs_dist,sqrt_n_scaled,n_scaled,wall_ms"
    );

    // The pair row carries the closed-form values for |1⟩⊞|1⟩.
    let (n, cols) = parse_row(lines.next().unwrap());
    assert_eq!(n, 2);
    assert!((cols[0] - 0.75).abs() < 1e-12, "trace {}", cols[0]);
    assert!((cols[1] - std::f64::consts::LN_2).abs() < 1e-12, "relent {}", cols[1]);
    assert!((cols[2] - (5.0f64 / 24.0).sqrt()).abs() < 1e-12, "hs {}", cols[2]);
    assert!((cols[3] - 2.0f64.sqrt() * 0.75).abs() < 1e-12);
    assert!((cols[4] - 2.0 * std::f64::consts::LN_2).abs() < 1e-12);
    assert_eq!(csv.lines().count(), 5, "config + header + three rows");

    let script = std::fs::read_to_string(dir.path().join("rates.gp")).unwrap();
    assert!(script.contains("'rates.csv'"), "plot script references the CSV");
    assert!(script.contains("set logscale xy"));
}

#[test]
fn rates_streams_csv_to_stdout_without_out() {
    let out = qclt(&["rates", "--state", "fock:1", "--n-grid", "2,4", "--metrics", "trace"]);
    assert_eq!(exit_code(&out), 0);
    let text = stdout_of(&out);
    let lines: Vec<&str> = text.lines().collect();
    assert_eq!(lines.len(), 4);
    assert!(lines[0].starts_with("# config:"));
    assert!(lines[0].contains("metrics=trace"), "selection echoed: {}", lines[0]);
    let (n, cols) = parse_row(lines[2]);
    assert_eq!(n, 2);
    // The CSV schema is frozen: every column is populated regardless of
    // the metric selection, which only tags the config echo.
    assert!((cols[0] - 0.75).abs() < 1e-12);
    assert!((cols[1] - std::f64::consts::LN_2).abs() < 1e-12);
}

#[test]
fn repeated_runs_are_byte_identical_up_to_timing() {
    let dir = tempfile::tempdir().unwrap();
    let a = dir.path().join("a.csv");
    let b = dir.path().join("b.csv");
    for path in [&a, &b] {
        // fock:2 exercises the default char-power route selection; the
        // wider radius keeps the slowly decaying n = 2 inversion clean.
        let out = qclt(&[
            "rates",
            "--state",
            "fock:2",
            "--n-grid",
            "2,4",
            "--radius",
            "12",
            "--out",
            path.to_str().unwrap(),
        ]);
        assert_eq!(exit_code(&out), 0, "stderr: {}", stderr_of(&out));
    }
    let read = |p: &Path| csv_without_timing(&std::fs::read_to_string(p).unwrap());
    let (csv_a, csv_b) = (read(&a), read(&b));
    // The config line echoes the output path; compare data lines only.
    let data = |s: &str| {
        s.lines().skip(1).map(str::to_owned).collect::<Vec<_>>()
    };
    assert_eq!(data(&csv_a), data(&csv_b));
}

#[test]
fn invalid_input_exits_one() {
    let cases: &[&[&str]] = &[
        &["rates", "--state", "fock:x"],
        &["rates", "--state", "fock:1", "--cutoff", "4"],
        &["rates", "--state", "fock:1", "--metrics", "trace,entropy"],
        &["rates", "--state", "fock:1", "--route", "teleport"],
        &["rates", "--state", "fock:1", "--n-grid", "8,4"],
        &["counterexample", "--kind", "hs"],
        &["counterexample", "--kind", "trace", "--theta", "1.5"],
        &["bound-audit", "--count", "0"],
        &["edgeworth", "--state", "super:2,2"],
    ];
    for args in cases {
        let out = qclt(args);
        assert_eq!(exit_code(&out), 1, "args {args:?}, stderr: {}", stderr_of(&out));
        assert!(stderr_of(&out).contains("error"), "args {args:?}");
    }
}

#[test]
fn numerical_failure_exits_two() {
    // The tensor oracle refuses grids beyond n = 3, which is a failure of
    // the computation rather than of the request syntax.
    let out = qclt(&["rates", "--state", "fock:5", "--route", "oracle", "--n-grid", "16,32"]);
    assert_eq!(exit_code(&out), 2);
    assert!(stderr_of(&out).contains("route"), "stderr: {}", stderr_of(&out));
}

#[test]
fn counterexample_writes_csv_and_reports_divergence() {
    let dir = tempfile::tempdir().unwrap();
    let csv_path = dir.path().join("cx.csv");
    let out = qclt(&[
        "counterexample",
        "--kind",
        "trace",
        "--theta",
        "0.5",
        "--n-grid",
        "64:512:x2",
        "--cutoff",
        "2048",
        "--out",
        csv_path.to_str().unwrap(),
    ]);
    assert_eq!(exit_code(&out), 0, "stderr: {}", stderr_of(&out));
    assert!(stdout_of(&out).contains("verdict: diverging"));

    let csv = std::fs::read_to_string(&csv_path).unwrap();
    assert!(csv.lines().next().unwrap().contains("kind=trace theta=0.5"));
    let rows: Vec<(usize, Vec<f64>)> =
        csv.lines().skip(2).map(parse_row).collect();
    assert_eq!(rows.len(), 4);
    // The √n-scaled trace distance grows along the grid.
    assert!(rows[3].1[3] > rows[0].1[3]);
    assert!(dir.path().join("cx.gp").exists());
}

#[test]
fn bound_audit_is_seed_deterministic_json() {
    let dir = tempfile::tempdir().unwrap();
    let a = dir.path().join("a.json");
    let b = dir.path().join("b.json");
    for path in [&a, &b] {
        let out = qclt(&[
            "bound-audit",
            "--seed",
            "11",
            "--count",
            "3",
            "--cutoff",
            "12",
            "--out",
            path.to_str().unwrap(),
        ]);
        assert_eq!(exit_code(&out), 0, "stderr: {}", stderr_of(&out));
    }
    let bytes_a = std::fs::read(&a).unwrap();
    assert_eq!(bytes_a, std::fs::read(&b).unwrap());

    let report: serde_json::Value = serde_json::from_slice(&bytes_a).unwrap();
    assert_eq!(report["seed"], 11);
    assert_eq!(report["entries"].as_array().unwrap().len(), 3);
    assert_eq!(report["failures"].as_array().unwrap().len(), 0);
    assert_eq!(report["entries"][0]["kind"], "thermal");
    assert!(report["worst_margin"].as_f64().unwrap() >= -1e-9);
}

#[test]
fn edgeworth_prints_the_cumulant_table() {
    let out = qclt(&["edgeworth", "--state", "super:0,3", "--order", "3"]);
    assert_eq!(exit_code(&out), 0, "stderr: {}", stderr_of(&out));
    let text = stdout_of(&out);
    assert!(text.lines().next().unwrap().starts_with("# state=super:0,3 order=3"));
    assert!(text.lines().nth(1).unwrap() == "p,q,re,im");

    // κ(1,1) = −ν/2 = −2 for this superposition; κ(3,0) has modulus √6/2.
    let field = |p: usize, q: usize, col: usize| -> f64 {
        let prefix = format!("{p},{q},");
        let line = text
            .lines()
            .find(|l| l.starts_with(&prefix))
            .unwrap_or_else(|| panic!("no ({p},{q}) row"));
        line.split(',').nth(col).unwrap().parse().unwrap()
    };
    assert!((field(1, 1, 2) + 2.0).abs() < 1e-6);
    assert!((field(3, 0, 2).abs() - 6.0f64.sqrt() / 2.0).abs() < 1e-6);
    assert!(field(3, 0, 3).abs() < 1e-9, "third cumulant is real");
}

#[test]
fn selftest_passes_and_prints_one_line_per_check() {
    let out = qclt(&["selftest"]);
    assert_eq!(exit_code(&out), 0, "stdout: {}", stdout_of(&out));
    let text = stdout_of(&out);
    let passes = text.lines().filter(|l| l.starts_with("PASS ")).count();
    assert_eq!(passes, 8, "stdout: {text}");
    assert!(!text.contains("FAIL "));
    assert!(text.contains("all 8 checks passed"));
}
