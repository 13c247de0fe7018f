use std::path::Path;
use std::process::Command;

fn rpencil(args: &[&str], dir: &Path) -> (i32, String, String) {
    let out = Command::new(env!("CARGO_BIN_EXE_rpencil"))
        .args(args)
        .args(["--out", dir.to_str().unwrap()])
        .output()
        .expect("binary runs");
    (
        out.status.code().unwrap_or(-1),
        String::from_utf8_lossy(&out.stdout).into_owned(),
        String::from_utf8_lossy(&out.stderr).into_owned(),
    )
}

fn config(dir: &Path, text: &str) -> String {
    let path = dir.join("run.toml");
    std::fs::write(&path, text).unwrap();
    path.to_str().unwrap().to_string()
}

#[test]
fn algebra_presets() {
    let dir = tempfile::tempdir().unwrap();
    let (code, stdout, _) = rpencil(&["algebra", "--preset", "cp1"], dir.path());
    assert_eq!(code, 0, "{stdout}");
    assert!(stdout.contains("PASS algebra/compact_dim value=3.0"));
    let json: serde_json::Value =
        serde_json::from_str(&std::fs::read_to_string(dir.path().join("algebra.json")).unwrap()).unwrap();
    assert_eq!(json["schema_version"], 1);
    assert_eq!(
        json["result"]["compact_basis"]["matrices"].as_array().map(|a| a.len()),
        Some(3)
    );

    let (code, _, _) = rpencil(&["algebra", "--preset", "cp2"], dir.path());
    assert_eq!(code, 0);
    let json: serde_json::Value =
        serde_json::from_str(&std::fs::read_to_string(dir.path().join("algebra.json")).unwrap()).unwrap();
    assert_eq!(json["result"]["m"], 2);
    assert_eq!(json["result"]["parabolic"], serde_json::json!(["(1,2)", "(1,3)"]));
}

#[test]
fn rank_zero_is_a_config_error() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = config(dir.path(), "[algebra]\nrank = 0\n[parabolic]\nroots = [[1, 2]]\n");
    let (code, _, stderr) = rpencil(&["algebra", "--config", &cfg], dir.path());
    assert_eq!(code, 2);
    assert!(stderr.contains("algebra.rank"), "{stderr}");
}

#[test]
fn pencil_scan_grid() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = config(dir.path(), "[scan]\nlambda_grid = [-3.0, -1.0, 0.5]\nsamples = 50\n");
    let (code, stdout, _) = rpencil(&["pencil-scan", "--config", &cfg, "--format", "csv"], dir.path());
    assert_eq!(code, 0, "{stdout}");
    let csv = std::fs::read_to_string(dir.path().join("pencil_report.csv")).unwrap();
    let flags: Vec<&str> = csv.lines().skip(1).map(|l| l.split(',').nth(2).unwrap()).collect();
    assert_eq!(flags, vec!["false", "true", "false"]);
    for line in csv.lines().skip(1) {
        let bound: f64 = line.split(',').nth(3).unwrap().parse().unwrap();
        assert!(bound <= 1.0 + 1e-10);
    }
    assert!(!dir.path().join("pencil_scan.json").exists());
}

#[test]
fn empty_grid_is_rejected() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = config(dir.path(), "[scan]\nlambda_grid = []\n");
    let (code, _, stderr) = rpencil(&["pencil-scan", "--config", &cfg], dir.path());
    assert_eq!(code, 2);
    assert!(stderr.contains("scan.lambda_grid"));
}

#[test]
fn parse_errors_name_the_line() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = config(dir.path(), "[scan]\nseed = 1\nsamples = -4\n");
    let (code, _, stderr) = rpencil(&["all", "--config", &cfg], dir.path());
    assert_eq!(code, 2);
    assert!(stderr.contains("line 3"), "{stderr}");
}

#[test]
fn vaisman_default_and_out_of_range() {
    let dir = tempfile::tempdir().unwrap();
    let (code, stdout, _) = rpencil(&["vaisman"], dir.path());
    assert_eq!(code, 0, "{stdout}");
    assert!(stdout.contains("PASS vaisman/verdict[-1].quantizable=false"));
    assert!(stdout.contains("PASS vaisman/flip_pair[-1.5,-0.5]"));
    let json: serde_json::Value =
        serde_json::from_str(&std::fs::read_to_string(dir.path().join("vaisman.json")).unwrap()).unwrap();
    assert_eq!(json["result"]["example2"]["metadata"]["resolved_sign"], "+1");
    assert_eq!(json["result"]["example1"]["checks"][0]["value"], 2.0);

    let cfg = config(dir.path(), "[vaisman]\nlambdas = [0.5]\n");
    let (code, _, stderr) = rpencil(&["vaisman", "--config", &cfg], dir.path());
    assert_eq!(code, 2);
    assert!(stderr.contains("outside admissible range"), "{stderr}");
}

#[test]
fn failing_check_exits_one() {
    let dir = tempfile::tempdir().unwrap();
    // unreachable quadrature tolerance
    let cfg = config(
        dir.path(),
        "[vaisman]\nlambdas = [-1.0]\n[tolerances]\nquad_rel_err = 1e-300\n",
    );
    let (code, stdout, _) = rpencil(&["vaisman", "--config", &cfg], dir.path());
    assert_eq!(code, 1);
    assert!(stdout.contains("FAIL vaisman/obstruction[-1].rel_err"));
}
