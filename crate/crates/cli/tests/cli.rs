//! Exit-code contract, report determinism, and output files, exercised
//! through both the library pipeline and the installed binary.

use gafp_cli::pipeline::{execute, Command as Cmd, Flags};
use std::path::PathBuf;
use std::process::Command;

fn spec(name: &str) -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR")).join(format!("../../specs/{name}.spec"))
}

fn bin() -> Command {
    Command::new(env!("CARGO_BIN_EXE_gafp"))
}

#[test]
fn verify_exits_zero_on_example_3_8() {
    let out = bin()
        .args(["verify"])
        .arg(spec("example_3_8"))
        .output()
        .unwrap();
    assert_eq!(out.status.code(), Some(0));
    let stdout = String::from_utf8_lossy(&out.stdout);
    assert!(stdout.contains("g-mohseni: constant 0.200000"), "{stdout}");
    assert!(stdout.contains("verify: pass"), "{stdout}");
}

#[test]
fn parse_error_exits_two_with_position() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("broken.spec");
    std::fs::write(
        &path,
        "[space]\nm = 1\nset_1 = [0, 1]\ngmetric = builder max scale 0.5\n\n[map]\nexpr = x//4\n\n[run]\nepsilons = 0.1\n",
    )
    .unwrap();
    let out = bin().arg("check").arg(&path).output().unwrap();
    assert_eq!(out.status.code(), Some(2));
    let stderr = String::from_utf8_lossy(&out.stderr);
    assert!(stderr.contains("line 7, column 10"), "{stderr}");
}

#[test]
fn missing_file_exits_two() {
    let out = bin().arg("check").arg("no-such-file.spec").output().unwrap();
    assert_eq!(out.status.code(), Some(2));
}

#[test]
fn domain_fault_exits_three() {
    // solving without any x0 is a fault, not a parse error
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("no-start.spec");
    std::fs::write(
        &path,
        "[space]\nm = 1\nset_1 = [0, 1]\ngmetric = builder max scale 0.5\n\n[map]\nexpr = x/2\n\n[run]\nepsilons = 0.1\n",
    )
    .unwrap();
    let out = bin().arg("solve").arg(&path).output().unwrap();
    assert_eq!(out.status.code(), Some(3));

    // and so is a start point outside the carrier
    let out = bin()
        .arg("solve")
        .arg(&path)
        .args(["--x0", "7"])
        .output()
        .unwrap();
    assert_eq!(out.status.code(), Some(3));
}

#[test]
fn failed_verification_exits_one() {
    // an expanding map: no contraction class admits it, and the solve from
    // x0 diverges
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("expanding.spec");
    std::fs::write(
        &path,
        "[space]\nm = 1\nset_1 = [1, 10]\ngmetric = builder max scale 0.5\n\n[map]\nexpr = x*2\n\n[run]\nepsilons = 0.000001\nx0 = 1\n",
    )
    .unwrap();
    let out = bin().arg("solve").arg(&path).output().unwrap();
    assert_eq!(out.status.code(), Some(1));
}

#[test]
fn broken_custom_metric_gates_the_pipeline() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("zignore.spec");
    std::fs::write(
        &path,
        "[space]\nm = 1\nset_1 = [0, 1]\ngmetric = custom abs(x-y)\n\n[map]\nexpr = x/2\n\n[run]\nepsilons = 0.1\nx0 = 0.5\n",
    )
    .unwrap();
    let out = bin().arg("classify").arg(&path).output().unwrap();
    assert_eq!(out.status.code(), Some(1));
    let stderr = String::from_utf8_lossy(&out.stderr);
    assert!(stderr.contains("axiom"), "{stderr}");
}

#[test]
fn json_report_is_deterministic() {
    let flags = Flags::default();
    let a = execute(Cmd::Verify, &spec("example_3_8"), &flags);
    let b = execute(Cmd::Verify, &spec("example_3_8"), &flags);
    let a = serde_json::to_string_pretty(&a.report).unwrap();
    let b = serde_json::to_string_pretty(&b.report).unwrap();
    assert_eq!(a, b, "identical runs must serialize byte-identically");
}

#[test]
fn json_report_carries_schema_and_digest() {
    let out = execute(Cmd::Check, &spec("example_3_8"), &Flags::default());
    let value: serde_json::Value =
        serde_json::from_str(&serde_json::to_string(&out.report).unwrap()).unwrap();
    assert_eq!(value["schema_version"], 1);
    assert_eq!(value["spec_digest"].as_str().unwrap().len(), 64);
    assert_eq!(value["exit_code"], 0);
}

#[test]
fn solve_csv_has_the_trace_columns() {
    let dir = tempfile::tempdir().unwrap();
    let csv_path = dir.path().join("trace.csv");
    let out = bin()
        .arg("solve")
        .arg(spec("example_3_8"))
        .arg("--csv")
        .arg(&csv_path)
        .output()
        .unwrap();
    assert_eq!(out.status.code(), Some(0));
    let csv = std::fs::read_to_string(&csv_path).unwrap();
    let mut lines = csv.lines();
    assert_eq!(lines.next(), Some("n,x_n,delta_n,ratio_n"));
    let first = lines.next().unwrap();
    assert!(first.starts_with("0,0.8,"), "{first}");
}

#[test]
fn fset_csv_lists_members_per_epsilon() {
    let out = execute(Cmd::Fset, &spec("example_3_8"), &Flags::default());
    assert_eq!(out.report.exit_code, 0);
    let csv = out.csv.expect("fset emits csv");
    assert!(csv.starts_with("epsilon,member\n"));
    assert!(csv.contains("0.3,0.39\n"), "largest member at eps = 0.3");
    assert!(!csv.contains("0.3,0.4\n"), "0.4 is not a member at eps = 0.3");
}

#[test]
fn epsilon_flag_overrides_the_declared_list() {
    let flags = Flags {
        epsilon: Some(0.05),
        ..Flags::default()
    };
    let out = execute(Cmd::Fset, &spec("example_3_8"), &flags);
    let fsets = out.report.results.fset.expect("fset summaries");
    assert_eq!(fsets.len(), 1);
    assert_eq!(fsets[0].epsilon, 0.05);
    assert_eq!(fsets[0].member_count, 6);
}

#[test]
fn seed_flag_changes_the_digest_but_not_validity() {
    let a = execute(Cmd::Check, &spec("example_3_8"), &Flags::default());
    let b = execute(
        Cmd::Check,
        &spec("example_3_8"),
        &Flags {
            seed: Some(7),
            ..Flags::default()
        },
    );
    assert_ne!(a.report.spec_digest, b.report.spec_digest);
    assert_eq!(b.report.exit_code, 0);
}

#[test]
fn report_command_aggregates_all_stages() {
    let out = execute(Cmd::Report, &spec("example_3_8"), &Flags::default());
    let results = &out.report.results;
    assert!(results.axioms.is_some());
    assert!(results.cyclicity.is_some());
    assert!(results.classification.is_some());
    assert!(results.solve.is_some());
    assert!(results.fset.is_some());
    assert!(results.verify.is_some());
    assert_eq!(out.report.exit_code, 0);
}

#[test]
fn power_solve_flag_reaches_the_two_step_oracle() {
    let flags = Flags {
        k: Some(2),
        epsilon: Some(0.1),
        ..Flags::default()
    };
    let out = execute(Cmd::Solve, &spec("example_3_8"), &flags);
    let solve = out.report.results.solve.expect("solve summary");
    assert_eq!(solve.k, 2);
    assert_eq!(solve.hit_index, Some(2));
}
