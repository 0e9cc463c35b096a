//! End-to-end runs of the command line binary.

use std::path::PathBuf;
use std::process::{Command, Output};

fn data(name: &str) -> String {
    let p: PathBuf = [env!("CARGO_MANIFEST_DIR"), "..", "..", "data", name].iter().collect();
    p.to_string_lossy().into_owned()
}

fn run(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_fancomplex")).args(args).output().unwrap()
}

fn stdout(o: &Output) -> String {
    String::from_utf8_lossy(&o.stdout).into_owned()
}

#[test]
fn ih_of_the_projective_plane() {
    let o = run(&["ih", "--fan", &data("p2.fan")]);
    assert_eq!(o.status.code(), Some(0));
    let out = stdout(&o);
    assert!(out.contains("(1,1,1)"));
    assert!(out.contains("MATCH"));
}

#[test]
fn identity_decomposes_into_one_summand() {
    let p2 = data("p2.fan");
    let o = run(&["--format", "machine", "decompose", "--fan", &p2, "--subdivision", &p2]);
    assert_eq!(o.status.code(), Some(0));
    let out = stdout(&o);
    assert!(out.starts_with("object\tcone\tdegree\tvalue\tcertificate\n"));
    let summands: Vec<&str> = out.lines().filter(|l| l.starts_with("summand\t")).collect();
    assert_eq!(summands, ["summand\t0[]\t0\t1\t-"]);
}

#[test]
fn refinement_decomposes_with_two_summands_on_the_cone() {
    let o = run(&[
        "--format",
        "machine",
        "decompose",
        "--fan",
        &data("quadrant.fan"),
        "--subdivision",
        &data("quadrant_refine2.fan"),
    ]);
    assert_eq!(o.status.code(), Some(0));
    let out = stdout(&o);
    let summands: Vec<&str> = out.lines().filter(|l| l.starts_with("summand\t")).collect();
    assert_eq!(summands.len(), 2);
    assert!(summands.iter().any(|l| l.starts_with("summand\t0[]\t0\t1")));
    assert!(summands.iter().any(|l| l.ends_with("\t0\t2\t-")));
}

#[test]
fn invalid_fan_is_an_input_error() {
    let o = run(&["fan", "check", "--fan", &data("overlapping.fan")]);
    assert_eq!(o.status.code(), Some(2));
    assert!(!o.stderr.is_empty());
}

#[test]
fn missing_file_is_an_input_error() {
    let o = run(&["ih", "--fan", "/nonexistent/x.fan"]);
    assert_eq!(o.status.code(), Some(2));
}

#[test]
fn small_window_is_reported() {
    let o = run(&["--degree-max", "-1", "minimal", "build", "--fan", &data("p2.fan")]);
    assert_eq!(o.status.code(), Some(3));
    assert!(String::from_utf8_lossy(&o.stderr).contains("--degree-max"));
}

#[test]
fn built_complex_verifies_after_round_trip() {
    let dir = std::env::temp_dir().join(format!("fancomplex-cli-{}", std::process::id()));
    std::fs::create_dir_all(&dir).unwrap();
    let path = dir.join("p1xp1.complex");
    let path = path.to_string_lossy();
    let o = run(&["--out", &path, "minimal", "build", "--fan", &data("p1xp1.fan")]);
    assert_eq!(o.status.code(), Some(0));
    let o = run(&["--format", "machine", "verify", "--complex", &path]);
    assert_eq!(o.status.code(), Some(0));
    let out = stdout(&o);
    for check in ["d^2=0", "locally_free", "locally_exact"] {
        let line = out.lines().find(|l| l.starts_with(check)).unwrap();
        assert!(line.ends_with("PASS"), "{line}");
    }
    std::fs::remove_dir_all(&dir).unwrap();
}
