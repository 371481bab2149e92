//! End-to-end tests of the binary: exit codes, report determinism, the
//! model-spec format, and the documented output shapes.

use std::path::{Path, PathBuf};
use std::process::{Command, Output};

fn bin() -> Command {
    Command::new(env!("CARGO_BIN_EXE_bismut"))
}

fn golden(name: &str) -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("tests/golden").join(name)
}

fn run(args: &[&str]) -> Output {
    bin().args(args).output().expect("binary runs")
}

fn stdout(output: &Output) -> String {
    String::from_utf8_lossy(&output.stdout).into_owned()
}

#[test]
fn verify_hopf_passes_with_exit_zero() {
    let out = run(&["verify", "--model", "hopf", "--points", "20", "--seed", "7"]);
    assert_eq!(out.status.code(), Some(0), "stderr: {}", String::from_utf8_lossy(&out.stderr));
    let text = stdout(&out);
    assert!(text.contains("model=hopf(c=1) seed=7 points=20"));
    assert!(text.contains("bismut-curvature-zero"));
    assert!(text.contains("PASS"));
    assert!(!text.contains("FAIL"));
}

#[test]
fn verify_single_check_selection() {
    let out = run(&[
        "verify",
        "--model",
        "boothby:f=z2,h=0",
        "--suite",
        "chern-curvature-zero",
        "--points",
        "15",
    ]);
    assert_eq!(out.status.code(), Some(0));
    let text = stdout(&out);
    assert!(text.contains("chern-curvature-zero"));
    assert!(!text.contains("bianchi-3"));
}

#[test]
fn verify_failure_gives_exit_one() {
    let out = run(&[
        "verify",
        "--model",
        "hopf-perturbed:eps=0.001",
        "--suite",
        "bismut-curvature-zero",
        "--points",
        "20",
        "--seed",
        "7",
    ]);
    assert_eq!(out.status.code(), Some(1));
    assert!(stdout(&out).contains("FAIL"));
}

#[test]
fn usage_errors_give_exit_two() {
    // unknown model
    let out = run(&["verify", "--model", "nope"]);
    assert_eq!(out.status.code(), Some(2));
    // inapplicable check
    let out = run(&[
        "verify",
        "--model",
        "boothby:f=z2,h=0",
        "--suite",
        "bismut-curvature-zero",
    ]);
    assert_eq!(out.status.code(), Some(2));
    // eval outside the domain
    let out = run(&["eval", "--model", "hopf", "--at", "0,0"]);
    assert_eq!(out.status.code(), Some(2));
    // malformed point
    let out = run(&["eval", "--model", "hopf", "--at", "banana,0"]);
    assert_eq!(out.status.code(), Some(2));
}

#[test]
fn spec_file_formats() {
    let out = run(&[
        "verify",
        "--spec",
        golden("punctured-plane.spec").to_str().unwrap(),
        "--suite",
        "bismut-curvature-zero",
        "--points",
        "10",
    ]);
    assert_eq!(out.status.code(), Some(0), "stderr: {}", String::from_utf8_lossy(&out.stderr));
    assert!(stdout(&out).contains("model=punctured-plane"));

    let out = run(&[
        "verify",
        "--spec",
        golden("builtin.spec").to_str().unwrap(),
        "--suite",
        "torsion-norm-8x",
        "--points",
        "5",
    ]);
    assert_eq!(out.status.code(), Some(0));
    assert!(stdout(&out).contains("model=hopf(c=1)"));

    // rank-deficient coframe: input error, exit 2, names the point
    let out = run(&["verify", "--spec", golden("broken.spec").to_str().unwrap(), "--points", "5"]);
    assert_eq!(out.status.code(), Some(2));
    let err = String::from_utf8_lossy(&out.stderr);
    assert!(err.contains("(") && err.contains(")"), "error should name the point: {err}");
}

#[test]
fn reports_are_byte_identical_and_schema_stable() {
    let dir = tempfile::tempdir().unwrap();
    let path_a = dir.path().join("a.json");
    let path_b = dir.path().join("b.json");
    for path in [&path_a, &path_b] {
        let out = run(&[
            "verify",
            "--model",
            "hopf",
            "--seed",
            "7",
            "--points",
            "25",
            "--out",
            path.to_str().unwrap(),
        ]);
        assert_eq!(out.status.code(), Some(0));
    }
    let a = std::fs::read(&path_a).unwrap();
    let b = std::fs::read(&path_b).unwrap();
    assert_eq!(a, b, "reports must be byte-identical");

    // schema: stable top-level fields and per-check fields
    let parsed: serde_json::Value = serde_json::from_slice(&a).unwrap();
    assert_eq!(parsed["schema"], 1);
    assert_eq!(parsed["model"], "hopf(c=1)");
    assert_eq!(parsed["seed"], 7);
    assert_eq!(parsed["points"], 25);
    assert!(parsed["footer"].as_str().unwrap().contains("pointwise"));
    let checks = parsed["checks"].as_array().unwrap();
    assert!(!checks.is_empty());
    for check in checks {
        assert!(check["id"].is_string());
        assert!(check["residual"].is_number());
        assert!(check["tolerance"].is_number());
        assert!(check["pass"].is_boolean());
        assert!(check["argmax_point"].is_array());
    }

    // sequential execution produces the same bytes
    let path_c = dir.path().join("c.json");
    let out = run(&[
        "verify",
        "--model",
        "hopf",
        "--seed",
        "7",
        "--points",
        "25",
        "--sequential",
        "--out",
        path_c.to_str().unwrap(),
    ]);
    assert_eq!(out.status.code(), Some(0));
    let c = std::fs::read(&path_c).unwrap();
    assert_eq!(a, c, "parallel and sequential runs must agree byte for byte");
}

#[test]
fn eval_prints_labeled_components() {
    let out = run(&["eval", "--model", "hopf", "--at", "1,0", "--show", "torsion,eta"]);
    assert_eq!(out.status.code(), Some(0));
    let text = stdout(&out);
    assert!(text.contains("T^1_12 = 0"));
    assert!(text.contains("T^2_12 = -0.5"));
    assert!(text.contains("eta_1 = 0.5"));

    let out = run(&["eval", "--model", "complete-chern-flat", "--at", "1,1", "--show", "torsion"]);
    assert!(stdout(&out).contains("T^2_12 = 1"));
}

#[test]
fn lie_commands_report_residuals() {
    let out = run(&["lie", "--algebra", "su2+su2", "--structure", "central-ce", "check-bismut"]);
    assert_eq!(out.status.code(), Some(0), "stderr: {}", String::from_utf8_lossy(&out.stderr));
    let text = stdout(&out);
    assert!(text.contains("eq-39"));
    assert!(text.contains("PASS"));

    let out = run(&["lie", "--algebra", "su2+r", "--structure", "central", "check-integrability"]);
    assert_eq!(out.status.code(), Some(0));

    // non-integrable structure fails loudly
    let out = run(&[
        "lie",
        "--algebra",
        "su2+su2",
        "--structure",
        "factor-swap",
        "check-integrability",
    ]);
    assert_eq!(out.status.code(), Some(1));
    assert!(stdout(&out).contains("FAIL"));

    let out = run(&[
        "lie",
        "--algebra",
        "su2+su2",
        "--structure",
        "central-ce",
        "exp-chart-verify",
        "--radius",
        "0.5",
        "--k",
        "20",
        "--points",
        "8",
    ]);
    assert_eq!(out.status.code(), Some(0));
    assert!(stdout(&out).contains("truncation bound"));

    let out = run(&["lie", "--algebra", "wat", "check-integrability"]);
    assert_eq!(out.status.code(), Some(2));
}

#[test]
fn list_shows_catalog() {
    let out = run(&["list"]);
    assert_eq!(out.status.code(), Some(0));
    let text = stdout(&out);
    assert!(text.contains("hopf"));
    assert!(text.contains("gauduchon-12"));
    assert!(text.contains("su2+su2"));
}
