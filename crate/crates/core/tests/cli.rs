use std::fs;
use std::path::Path;
use std::process::{Command, Output};

fn icmc(args: &[&str], dir: &Path) -> Output {
    Command::new(env!("CARGO_BIN_EXE_icmc"))
        .args(args)
        .current_dir(dir)
        .output()
        .expect("icmc runs")
}

fn stdout(o: &Output) -> String {
    String::from_utf8_lossy(&o.stdout).into_owned()
}

#[test]
fn convertft_writes_the_t_listing() {
    let dir = tempfile::tempdir().unwrap();
    fs::write(dir.path().join("t.circ"), "TGATE 1\n").unwrap();
    let o = icmc(&["convertft", "t.circ", "--out", "out"], dir.path());
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    let circ = fs::read_to_string(dir.path().join("out.circ")).unwrap();
    assert_eq!(circ, "init 2 A\ncnot 2 1\nmeasure 1 Z\n");
    let geom = fs::read_to_string(dir.path().join("out.geom")).unwrap();
    assert!(geom.lines().count() > 3);
    let svg = fs::read_to_string(dir.path().join("out.svg")).unwrap();
    assert!(svg.starts_with("<svg"));
}

#[test]
fn processraw_reports_toffoli_stats() {
    let dir = tempfile::tempdir().unwrap();
    fs::write(dir.path().join("tof.circ"), "toffoli 1 2 3\n").unwrap();
    let o = icmc(&["processraw", "tof.circ"], dir.path());
    assert!(o.status.success());
    assert!(stdout(&o).contains("t_count 7"), "{}", stdout(&o));
    assert!(dir.path().join("tof.prim.circ").exists());
}

#[test]
fn verify_subcommands_pass() {
    let dir = tempfile::tempdir().unwrap();
    for name in ["TGATE", "toffoli", "CV"] {
        let o = icmc(&["verify", "entry", name], dir.path());
        assert!(o.status.success(), "{name}: {}", stdout(&o));
        assert!(stdout(&o).contains("PASS"));
    }
    let o = icmc(
        &["verify", "distillation", "y", "--trials", "2000"],
        dir.path(),
    );
    assert!(o.status.success(), "{}", stdout(&o));
}

#[test]
fn exit_codes_separate_invalid_input_from_io_errors() {
    let dir = tempfile::tempdir().unwrap();
    let missing = icmc(&["convertft", "nope.circ"], dir.path());
    assert_eq!(missing.status.code(), Some(2));
    fs::write(dir.path().join("bad.circ"), "frobgate 1\n").unwrap();
    let unknown = icmc(&["convertft", "bad.circ"], dir.path());
    assert_eq!(unknown.status.code(), Some(1));
    let entry = icmc(&["verify", "entry", "nope"], dir.path());
    assert_ne!(entry.status.code(), Some(0));
}
