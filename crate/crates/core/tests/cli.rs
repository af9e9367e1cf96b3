use std::path::PathBuf;
use std::process::Command;

use liftcheck::cli::{load_spec, run, LoadError, EXIT_FAIL, EXIT_INPUT, EXIT_OK};
use liftcheck::geometry::SpecError;
use liftcheck::report::CheckReport;

fn catalog(name: &str) -> String {
    PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("../../catalog").join(name).to_string_lossy().into_owned()
}

fn liftcheck(args: &[&str]) -> (i32, String, String) {
    let mut out = Vec::new();
    let mut err = Vec::new();
    let code = run(std::iter::once("liftcheck").chain(args.iter().copied()), &mut out, &mut err);
    (code, String::from_utf8(out).unwrap(), String::from_utf8(err).unwrap())
}

#[test]
fn verify_connection_flat_polar_exits_zero() {
    let (code, out, _) = liftcheck(&["verify-connection", &catalog("flat_polar.spec"), "--points", "20", "--seed", "7"]);
    assert_eq!(code, EXIT_OK, "{out}");
    assert!(out.contains("connection.bh_jbi"));
    assert!(!out.contains(" fail"));
}

#[test]
fn classify_flat_rotation_reports_t2a_candidate() {
    let dir = tempfile::tempdir().unwrap();
    let json = dir.path().join("out.json");
    let (code, out, _) = liftcheck(&[
        "classify",
        &catalog("flat_cartesian.spec"),
        "--field",
        "rotation",
        "--points",
        "50",
        "--seed",
        "1",
        "--json",
        json.to_str().unwrap(),
    ]);
    assert_eq!(code, EXIT_FAIL);
    assert!(out.contains("T2a"));
    let report: CheckReport = serde_json::from_str(&std::fs::read_to_string(&json).unwrap()).unwrap();
    assert_eq!(report.seed, 1);
    assert_eq!(report.samples, 50);
    assert!(report.all_checks_pass());
    let t2a = report.audits.iter().find(|a| a.audit.theorem.tag().to_string() == "T2a").unwrap();
    assert_eq!(serde_json::to_value(t2a.audit.verdict).unwrap(), "counterexample_candidate");
    // Flat rotation is Killing with ∇X ≠ 0, and its complete lift is Killing.
    assert!(t2a.audit.base_killing && !t2a.audit.base_parallel);
    assert!(t2a.audit.conclusion && t2a.audit.oracle_conclusion);
}

#[test]
fn classify_translation_is_consistent() {
    let (code, out, _) = liftcheck(&["classify", &catalog("flat_cartesian.spec"), "--field", "translation", "--points", "10"]);
    assert_eq!(code, EXIT_OK, "{out}");
}

#[test]
fn check_closed_gradient_and_rotation() {
    let spec = catalog("flat_cartesian.spec");
    assert_eq!(liftcheck(&["check-closed", &spec, "--field", "gradient", "--points", "20"]).0, EXIT_OK);
    let (code, out, _) = liftcheck(&["check-closed", &spec, "--field", "rotation", "--points", "20"]);
    assert_eq!(code, EXIT_FAIL);
    assert!(out.contains("closed.antisymmetric"));
}

#[test]
fn input_errors_exit_two() {
    let dir = tempfile::tempdir().unwrap();
    let bad = dir.path().join("bad.spec");
    std::fs::write(&bad, "[manifold]\ncoords = u\n[metric]\ng[0][0] = \"1 +\"\n").unwrap();
    let (code, _, err) = liftcheck(&["verify-connection", bad.to_str().unwrap()]);
    assert_eq!(code, EXIT_INPUT);
    assert!(err.contains("line 4"), "{err}");

    assert_eq!(liftcheck(&["verify-connection", "/nonexistent.spec"]).0, EXIT_INPUT);
    assert_eq!(liftcheck(&["classify", &catalog("sphere.spec"), "--field", "nope"]).0, EXIT_INPUT);
    assert_eq!(liftcheck(&["classify", &catalog("sphere.spec"), "--points", "0"]).0, EXIT_INPUT);
    assert_eq!(liftcheck(&["frobnicate"]).0, EXIT_INPUT);
    assert_eq!(liftcheck(&["verify-connection", &catalog("sphere.spec"), "--seed", "x"]).0, EXIT_INPUT);
    assert_eq!(liftcheck(&["verify-paper", dir.path().join("empty").to_str().unwrap()]).0, EXIT_INPUT);
    let json = dir.path().join("missing-dir").join("out.json");
    assert_eq!(
        liftcheck(&["verify-connection", &catalog("flat_polar.spec"), "--points", "2", "--json", json.to_str().unwrap()]).0,
        EXIT_INPUT
    );
}

#[test]
fn help_exits_zero() {
    let (code, out, _) = liftcheck(&["--help"]);
    assert_eq!(code, EXIT_OK);
    assert!(out.contains("verify-paper"));
}

#[test]
fn tolerance_override() {
    let (code, out, _) = liftcheck(&["verify-connection", &catalog("sphere.spec"), "--points", "5", "--tol", "0"]);
    assert_eq!(code, EXIT_FAIL);
    assert!(out.contains("0.0e0"));
}

#[test]
fn catalog_specs_load() {
    let sphere = load_spec(catalog("sphere.spec")).unwrap();
    assert_eq!(sphere.dim(), 2);
    let names: Vec<&str> = sphere.vector_fields().iter().map(|f| f.name.as_str()).collect();
    assert_eq!(names, ["dphi"]);
    let flat = load_spec(catalog("flat_cartesian.spec")).unwrap();
    let names: Vec<&str> = flat.vector_fields().iter().map(|f| f.name.as_str()).collect();
    assert_eq!(names, ["translation", "rotation", "dilation", "gradient"]);
    for name in ["flat_polar", "hyperbolic", "revolution"] {
        assert_eq!(load_spec(catalog(&format!("{name}.spec"))).unwrap().name(), name);
    }
}

#[test]
fn sphere_through_pole_is_rejected() {
    let text = std::fs::read_to_string(catalog("sphere.spec")).unwrap().replace("theta = 0.3, 2.8", "theta = 0, 2.8");
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("pole.spec");
    std::fs::write(&path, text).unwrap();
    match load_spec(&path) {
        Err(LoadError::Spec(SpecError::SingularDomain { det, .. })) => assert!(det.abs() <= 1e-12),
        other => panic!("expected singular domain, got {other:?}"),
    }
    let (code, _, err) = liftcheck(&["verify-connection", path.to_str().unwrap()]);
    assert_eq!(code, EXIT_INPUT);
    assert!(err.contains("singular"));
}

#[test]
fn binary_exit_codes() {
    let bin = env!("CARGO_BIN_EXE_liftcheck");
    let ok = Command::new(bin)
        .args(["verify-connection", &catalog("flat_polar.spec"), "--points", "20", "--seed", "7"])
        .output()
        .unwrap()
        .status;
    assert_eq!(ok.code(), Some(0));
    let bad = Command::new(bin).args(["verify-connection", "/nonexistent.spec"]).output().unwrap();
    assert_eq!(bad.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&bad.stderr).contains("cannot read"));
}

#[test]
fn reports_are_deterministic() {
    let dir = tempfile::tempdir().unwrap();
    let a = dir.path().join("a.json");
    let b = dir.path().join("b.json");
    for p in [&a, &b] {
        liftcheck(&["classify", &catalog("sphere.spec"), "--points", "10", "--seed", "5", "--json", p.to_str().unwrap()]);
    }
    assert_eq!(std::fs::read(a).unwrap(), std::fs::read(b).unwrap());
}
