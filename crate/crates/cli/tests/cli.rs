use std::fs;
use std::path::Path;
use std::process::{Command, Output};

fn sdvkit(dir: &Path, args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_sdvkit"))
        .current_dir(dir)
        .args(args)
        .output()
        .unwrap()
}

#[test]
fn missing_input_is_a_one_line_io_error() {
    let dir = tempfile::tempdir().unwrap();
    let out = sdvkit(dir.path(), &["emulate", "absent.vs", "-o", "x.trace"]);
    assert_eq!(out.status.code(), Some(2));
    let err = String::from_utf8(out.stderr).unwrap();
    assert_eq!(err.lines().count(), 1);
    assert!(err.contains("absent.vs: no such file"), "{err}");
    assert!(!dir.path().join("x.trace").exists());
}

#[test]
fn bad_usage_exits_2() {
    let dir = tempfile::tempdir().unwrap();
    assert_eq!(sdvkit(dir.path(), &["gen", "fft", "--variant", "sideways"]).status.code(), Some(2));
}

#[test]
fn invalid_size_is_a_domain_error() {
    let dir = tempfile::tempdir().unwrap();
    let out = sdvkit(dir.path(), &["gen", "fft", "--n", "100", "-o", "f.vs"]);
    assert_eq!(out.status.code(), Some(1));
    assert!(!dir.path().join("f.vs").exists());
}

#[test]
fn dependent_chain_schedules_to_itself() {
    let dir = tempfile::tempdir().unwrap();
    let text = ".xreg x5 8\n.window 1\nvsetvli x0, x5, e64, m1\nvid.v v1\nvadd.vv v2, v1, v1\nvfmul.vv v3, v2, v2\n";
    fs::write(dir.path().join("chain.vs"), text).unwrap();
    let out = sdvkit(dir.path(), &["schedule", "chain.vs", "-o", "out.vs"]);
    assert!(out.status.success());
    assert_eq!(fs::read_to_string(dir.path().join("out.vs")).unwrap(), text);
    let report = String::from_utf8(out.stdout).unwrap();
    assert!(report.contains("equivalent true"), "{report}");
    assert!(report.contains("(delta 0)"), "{report}");
}

#[test]
fn reference_workflow_reports_four_phases() {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path();
    for args in [
        &["gen", "fft", "--n", "64", "--variant", "wide", "-o", "f.vs"][..],
        &["emulate", "f.vs", "-o", "f.trace"],
        &["analyze", "f.trace", "--csv", "-o", "f.csv"],
        &["to-prv", "f.trace", "-o", "f.prv"],
    ] {
        let out = sdvkit(d, args);
        assert!(out.status.success(), "{args:?}: {}", String::from_utf8_lossy(&out.stderr));
    }
    let csv = fs::read_to_string(d.join("f.csv")).unwrap();
    assert_eq!(csv.lines().count(), 5, "{csv}");
    assert!(d.join("f.pcf").exists());

    let out = sdvkit(d, &["gen", "fft", "--n", "512", "--variant", "wide"]);
    fs::write(d.join("w.vs"), &out.stdout).unwrap();
    assert!(sdvkit(d, &["emulate", "w.vs", "-o", "w.trace"]).status.success());
    let report = String::from_utf8(sdvkit(d, &["analyze", "w.trace"]).stdout).unwrap();
    let vls: Vec<&str> = report
        .lines()
        .filter(|l| l.trim_start().starts_with(char::is_numeric))
        .map(|l| l.split_whitespace().nth(3).unwrap())
        .collect();
    assert_eq!(vls, vec!["256.00"; 4], "{report}");
}

#[test]
fn help_lists_defaults() {
    let out = sdvkit(Path::new("."), &["gen", "fft", "--help"]);
    let help = String::from_utf8(out.stdout).unwrap();
    for needle in ["--n", "--variant", "--seed", "--config", "[default: 512]", "[default: 42]"] {
        assert!(help.contains(needle), "{needle} missing from\n{help}");
    }
}
