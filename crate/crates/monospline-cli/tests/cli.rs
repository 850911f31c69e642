//! Behavior tests for the `monospline` binary: artifact shapes, exit-code
//! map {0 ok, 2 config, 3 solver, 4 invariant-violation}, and byte-level
//! determinism of reruns.

use std::fs;
use std::path::PathBuf;
use std::process::{Command, Output};

fn bin() -> Command {
    Command::new(env!("CARGO_BIN_EXE_monospline"))
}

/// Fresh per-test artifact directory under the system temp dir.
fn outdir(tag: &str) -> PathBuf {
    let dir = std::env::temp_dir().join(format!("monospline-cli-{}-{tag}", std::process::id()));
    let _ = fs::remove_dir_all(&dir);
    dir
}

fn stdout(out: &Output) -> String {
    String::from_utf8_lossy(&out.stdout).into_owned()
}

fn stderr(out: &Output) -> String {
    String::from_utf8_lossy(&out.stderr).into_owned()
}

#[test]
fn approx_writes_the_frozen_line_for_square() {
    let dir = outdir("approx-square");
    let out = bin()
        .args([
            "approx",
            "--function",
            "square",
            "--m",
            "1",
            "--l",
            "0",
            "--p",
            "2",
        ])
        .args(["--sizes", "2", "--out-dir"])
        .arg(&dir)
        .output()
        .expect("binary runs");
    assert_eq!(out.status.code(), Some(0), "stderr: {}", stderr(&out));
    assert!(stdout(&out).contains("converged=true"));

    let json: serde_json::Value =
        serde_json::from_str(&fs::read_to_string(dir.join("spline.json")).expect("artifact"))
            .expect("valid JSON");
    let coeffs = json["spline"]["pieces"][0]
        .as_array()
        .expect("coefficient array");
    let c0 = coeffs[0].as_f64().expect("number");
    let c1 = coeffs[1].as_f64().expect("number");
    assert!((c0 + 1.0 / 6.0).abs() <= 1e-6, "constant coefficient {c0}");
    assert!((c1 - 1.0).abs() <= 1e-6, "slope coefficient {c1}");

    let residuals = fs::read_to_string(dir.join("residuals.csv")).expect("artifact");
    let mut lines = residuals.lines();
    assert_eq!(lines.next(), Some("x,f,s"));
    assert_eq!(
        residuals.lines().count(),
        1002,
        "header plus a 1001-point grid"
    );
    fs::remove_dir_all(&dir).ok();
}

#[test]
fn approx_reports_a_zero_objective_for_constant_targets() {
    let dir = outdir("approx-constant");
    let out = bin()
        .args([
            "approx",
            "--function",
            "constant",
            "--m",
            "1",
            "--sizes",
            "3",
            "--out-dir",
        ])
        .arg(&dir)
        .output()
        .expect("binary runs");
    assert_eq!(out.status.code(), Some(0), "stderr: {}", stderr(&out));
    let line = stdout(&out);
    let objective: f64 = line
        .split_whitespace()
        .find_map(|tok| tok.strip_prefix("objective="))
        .expect("summary contains objective=")
        .parse()
        .expect("numeric objective");
    assert!(
        objective.abs() <= 1e-9,
        "objective {objective} for a constant target"
    );
    fs::remove_dir_all(&dir).ok();
}

#[test]
fn approx_requires_exactly_one_partition_size() {
    let out = bin()
        .args(["approx", "--function", "sqrt", "--sizes", "5,9"])
        .output()
        .expect("binary runs");
    assert_eq!(out.status.code(), Some(2));
    assert!(stderr(&out).contains("--sizes"));
}

#[test]
fn missing_target_selector_names_the_flags() {
    let out = bin()
        .args(["approx", "--m", "1"])
        .output()
        .expect("binary runs");
    assert_eq!(out.status.code(), Some(2));
    let err = stderr(&out);
    assert!(
        err.contains("--function"),
        "diagnostic should name the flag: {err}"
    );
}

#[test]
fn unknown_builtin_is_a_config_error() {
    let out = bin()
        .args(["approx", "--function", "parabola", "--sizes", "3"])
        .output()
        .expect("binary runs");
    assert_eq!(out.status.code(), Some(2));
    assert!(stderr(&out).contains("parabola"));
}

#[test]
fn sample_files_must_be_nondecreasing() {
    let dir = outdir("csv-reject");
    fs::create_dir_all(&dir).expect("temp dir");
    let path = dir.join("samples.csv");
    fs::write(&path, "x,y\n0,0\n0.5,0.4\n1,0.2\n").expect("write samples");
    let out = bin()
        .args(["approx", "--input-csv"])
        .arg(&path)
        .output()
        .expect("binary runs");
    assert_eq!(out.status.code(), Some(2));
    assert!(stderr(&out).contains("nondecreasing"));
    fs::remove_dir_all(&dir).ok();
}

#[test]
fn sample_files_fit_as_piecewise_linear_targets() {
    let dir = outdir("csv-accept");
    fs::create_dir_all(&dir).expect("temp dir");
    let path = dir.join("samples.csv");
    fs::write(&path, "x,y\n0,0\n0.25,0.1\n0.5,0.5\n1,0.9\n").expect("write samples");
    let out = bin()
        .args(["approx", "--input-csv"])
        .arg(&path)
        .args(["--sizes", "3", "--out-dir"])
        .arg(dir.join("fit"))
        .output()
        .expect("binary runs");
    assert_eq!(out.status.code(), Some(0), "stderr: {}", stderr(&out));
    assert!(stdout(&out).contains("function=samples"));
    fs::remove_dir_all(&dir).ok();
}

#[test]
fn converge_emits_the_fixed_layout_and_clean_columns_for_constant() {
    let dir = outdir("converge-constant");
    let out = bin()
        .args([
            "converge",
            "--function",
            "constant",
            "--m",
            "1",
            "--sizes",
            "3,5",
            "--out-dir",
        ])
        .arg(&dir)
        .output()
        .expect("binary runs");
    assert_eq!(out.status.code(), Some(0), "stderr: {}", stderr(&out));

    let csv = fs::read_to_string(dir.join("report.csv")).expect("artifact");
    let mut lines = csv.lines();
    assert_eq!(
        lines.next(),
        Some("size,norm,lp_error,sup_global,sup_inner,endpoint_a,endpoint_b,interp_bound,opt_gap")
    );
    for line in lines {
        let fields: Vec<&str> = line.split(',').collect();
        assert_eq!(fields.len(), 9);
        for idx in [2usize, 3, 4, 5, 6] {
            let v: f64 = fields[idx].parse().expect("numeric error column");
            assert!(
                v.abs() <= 1e-9,
                "error column {idx} = {v} for a constant target"
            );
        }
    }
    let curves = fs::read_to_string(dir.join("error_curves.csv")).expect("artifact");
    assert!(
        curves.starts_with("norm,lp_error,sup_global,sup_inner,endpoint_a,endpoint_b,interp_bound")
    );
    assert!(dir.join("report.json").exists());
    fs::remove_dir_all(&dir).ok();
}

#[test]
fn converge_omits_the_bound_column_with_a_warning_when_undefined() {
    let dir = outdir("converge-low-order");
    let out = bin()
        .args(["converge", "--function", "sqrt", "--m", "2", "--l", "1"])
        .args(["--sizes", "3,5", "--format", "csv", "--out-dir"])
        .arg(&dir)
        .output()
        .expect("binary runs");
    assert_eq!(out.status.code(), Some(0), "stderr: {}", stderr(&out));
    assert!(
        stderr(&out).contains("m = 2 < 2l + 1"),
        "warning: {}",
        stderr(&out)
    );

    let csv = fs::read_to_string(dir.join("report.csv")).expect("artifact");
    for line in csv.lines().skip(1) {
        let fields: Vec<&str> = line.split(',').collect();
        assert_eq!(fields[7], "", "bound column should be empty: {line}");
    }
    assert!(
        !dir.join("report.json").exists(),
        "json suppressed by --format csv"
    );
    fs::remove_dir_all(&dir).ok();
}

#[test]
fn converge_reruns_are_byte_identical() {
    let dir1 = outdir("converge-rerun-1");
    let dir2 = outdir("converge-rerun-2");
    let run = |dir: &PathBuf| {
        let out = bin()
            .args([
                "converge",
                "--function",
                "smoothstep",
                "--m",
                "2",
                "--p",
                "3",
            ])
            .args([
                "--partition",
                "random",
                "--seed",
                "7",
                "--sizes",
                "4,6",
                "--out-dir",
            ])
            .arg(dir)
            .output()
            .expect("binary runs");
        assert_eq!(out.status.code(), Some(0), "stderr: {}", stderr(&out));
    };
    run(&dir1);
    run(&dir2);
    for name in ["report.csv", "report.json", "error_curves.csv"] {
        let a = fs::read(dir1.join(name)).expect("first run artifact");
        let b = fs::read(dir2.join(name)).expect("second run artifact");
        assert_eq!(a, b, "{name} differs between identical runs");
    }
    fs::remove_dir_all(&dir1).ok();
    fs::remove_dir_all(&dir2).ok();
}

#[test]
fn check_markov_is_deterministic_and_knows_the_linear_gap() {
    let first = bin()
        .args(["check-markov", "--m", "1", "--seed", "42"])
        .output()
        .expect("binary runs");
    assert_eq!(first.status.code(), Some(0), "stderr: {}", stderr(&first));
    let line = stdout(&first);
    assert!(line.contains("1000/1000 pass"), "summary: {line}");
    // A nondecreasing linear polynomial splits the interval range 1/3 : 2/3,
    // so the worst relative slack of the suite is exactly 1/3.
    assert!(
        line.contains("worst relative slack 0.333333333"),
        "summary: {line}"
    );

    let second = bin()
        .args(["check-markov", "--m", "1", "--seed", "42"])
        .output()
        .expect("binary runs");
    assert_eq!(
        stdout(&first),
        stdout(&second),
        "repeated seed changed the report"
    );

    let out_of_range = bin()
        .args(["check-markov", "--m", "7"])
        .output()
        .expect("binary runs");
    assert_eq!(out_of_range.status.code(), Some(2));
}

#[test]
fn counterexample_matches_the_p2_closed_form() {
    let dir = outdir("counterexample-p2");
    let out = bin()
        .args([
            "counterexample",
            "--p",
            "2",
            "--sizes",
            "1..40",
            "--out-dir",
        ])
        .arg(&dir)
        .output()
        .expect("binary runs");
    assert_eq!(out.status.code(), Some(0), "stderr: {}", stderr(&out));

    let csv = fs::read_to_string(dir.join("counterexample.csv")).expect("artifact");
    let mut lines = csv.lines();
    assert_eq!(lines.next(), Some("n,lp_norm,lp_norm_quadrature,sup_norm"));
    let mut rows = 0usize;
    for line in lines {
        let fields: Vec<&str> = line.split(',').collect();
        let n: f64 = fields[0].parse().expect("n");
        let quad: f64 = fields[2].parse().expect("quadrature column");
        let closed = (1.0 / (2.0 * n + 1.0)).sqrt();
        assert!((quad - closed).abs() <= 1e-8, "n={n}: {quad} vs {closed}");
        rows += 1;
    }
    assert_eq!(rows, 40, "row count equals the exponent count");
    fs::remove_dir_all(&dir).ok();
}

#[test]
fn counterexample_flags_a_non_decreasing_table() {
    let dir = outdir("counterexample-bad");
    let out = bin()
        .args([
            "counterexample",
            "--sizes",
            "5,5",
            "--format",
            "csv",
            "--out-dir",
        ])
        .arg(&dir)
        .output()
        .expect("binary runs");
    assert_eq!(out.status.code(), Some(4), "stderr: {}", stderr(&out));
    assert!(stdout(&out)
        .lines()
        .last()
        .unwrap_or_default()
        .starts_with("5,"));
    fs::remove_dir_all(&dir).ok();
}

#[test]
fn worker_flag_and_environment_are_validated() {
    let ok = bin()
        .args(["check-markov", "--m", "1", "--workers", "2"])
        .output()
        .expect("binary runs");
    assert_eq!(ok.status.code(), Some(0), "stderr: {}", stderr(&ok));

    let bad_env = bin()
        .args(["check-markov", "--m", "1"])
        .env("MONOSPLINE_WORKERS", "three")
        .output()
        .expect("binary runs");
    assert_eq!(bad_env.status.code(), Some(2));
    assert!(stderr(&bad_env).contains("MONOSPLINE_WORKERS"));

    let zero = bin()
        .args(["check-markov", "--m", "1", "--workers", "0"])
        .output()
        .expect("binary runs");
    assert_eq!(zero.status.code(), Some(2));
}

#[test]
fn domain_flags_reparametrize_builtins() {
    let dir = outdir("approx-domain");
    let out = bin()
        .args(["approx", "--function", "sqrt", "--a", "2", "--b", "6"])
        .args(["--sizes", "5", "--out-dir"])
        .arg(&dir)
        .output()
        .expect("binary runs");
    assert_eq!(out.status.code(), Some(0), "stderr: {}", stderr(&out));
    let residuals = fs::read_to_string(dir.join("residuals.csv")).expect("artifact");
    let first_row = residuals.lines().nth(1).expect("data row");
    assert!(
        first_row.starts_with("2,"),
        "grid starts at --a: {first_row}"
    );

    let lonely_a = bin()
        .args(["approx", "--function", "sqrt", "--a", "2", "--sizes", "5"])
        .output()
        .expect("binary runs");
    assert_eq!(
        lonely_a.status.code(),
        Some(2),
        "--a without --b must be rejected"
    );
    fs::remove_dir_all(&dir).ok();
}
