use std::fs;
use std::path::Path;
use std::process::{Command, Output};

fn bench(args: &[&str], cwd: &Path) -> Output {
    Command::new(env!("CARGO_BIN_EXE_dpm-bench")).args(args).current_dir(cwd).output().expect("spawn dpm-bench")
}

fn stdout(o: &Output) -> String {
    String::from_utf8(o.stdout.clone()).unwrap()
}

#[test]
fn csv_table_is_deterministic() {
    let dir = tempfile::tempdir().unwrap();
    let args = ["run", "--problem", "tp-2a", "--order", "2", "--grids", "24,48"];
    let a = bench(&args, dir.path());
    let b = bench(&args, dir.path());
    assert!(a.status.success(), "{}", String::from_utf8_lossy(&a.stderr));
    assert_eq!(a.stdout, b.stdout);
    let text = stdout(&a);
    let lines: Vec<&str> = text.lines().collect();
    assert_eq!(lines[0], "DOF,E,Rate,Active");
    assert!(lines[1].starts_with("576,") && lines[1].split(',').nth(2) == Some(""));
    assert!(lines[2].starts_with("2304,"));
}

#[test]
fn config_file_mirrors_flags_and_flags_win() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("run.cfg");
    fs::write(&cfg, "problem = tp-1a\norder = 4\ngrids = 48,72\nformat = markdown\n").unwrap();
    let from_file = bench(&["run", "--config", "run.cfg", "--order", "2", "--out", "t.md"], dir.path());
    assert!(from_file.status.success(), "{}", String::from_utf8_lossy(&from_file.stderr));
    let flags = bench(
        &["run", "--problem", "tp-1a", "--order", "2", "--grids", "48,72", "--format", "markdown"],
        dir.path(),
    );
    assert_eq!(fs::read_to_string(dir.path().join("t.md")).unwrap(), stdout(&flags));
    assert!(stdout(&flags).starts_with("| DOF | E | Rate | Active |"));
}

#[test]
fn field_dump_and_step_log() {
    let dir = tempfile::tempdir().unwrap();
    let o = bench(
        &["run", "--problem", "tp-2c", "--order", "2", "--grids", "24", "--out", "c.csv", "--dump-fields", "--step-log"],
        dir.path(),
    );
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    let fields = fs::read_to_string(dir.path().join("c.n24.fields.csv")).unwrap();
    let mut lines = fields.lines();
    assert_eq!(lines.next(), Some("x,y,numeric,exact,error"));
    let mut count = 0;
    for l in lines {
        let v: Vec<f64> = l.split(',').map(|s| s.parse().unwrap()).collect();
        assert_eq!(v.len(), 5);
        assert!((v[4] - (v[2] - v[3]).abs()).abs() <= 1e-12 * v[3].abs().max(1.0));
        count += 1;
    }
    assert!(count > 100);
    let steps = fs::read_to_string(dir.path().join("c.n24.steps.csv")).unwrap();
    assert_eq!(steps.lines().next(), Some("step,t,error"));
    let last = steps.lines().last().unwrap();
    let t: f64 = last.split(',').nth(1).unwrap().parse().unwrap();
    assert!((t - 1.0).abs() < 1e-9);
}

#[test]
fn check_mode_exit_codes() {
    let dir = tempfile::tempdir().unwrap();
    let ok = bench(&["run", "--problem", "tp-2a", "--order", "2", "--grids", "40,80", "--check"], dir.path());
    assert_eq!(ok.status.code(), Some(0), "{}", String::from_utf8_lossy(&ok.stderr));
    // One unknown mode cannot carry the interface trace, so the error stalls.
    let bad = bench(
        &["run", "--problem", "tp-2a", "--order", "2", "--grids", "40,80", "--basis-modes", "1", "--check"],
        dir.path(),
    );
    assert_eq!(bad.status.code(), Some(2), "{}", String::from_utf8_lossy(&bad.stderr));
}

#[test]
fn invalid_input_fails_cleanly() {
    let dir = tempfile::tempdir().unwrap();
    let o = bench(&["run", "--problem", "tp-2a", "--order", "3", "--grids", "24"], dir.path());
    assert_eq!(o.status.code(), Some(1));
    assert!(String::from_utf8_lossy(&o.stderr).starts_with("error:"));
    let o = bench(&["run", "--order", "2"], dir.path());
    assert_eq!(o.status.code(), Some(1));
}

#[test]
fn reference_tables() {
    let dir = tempfile::tempdir().unwrap();
    let o = bench(&["reference", "--problem", "tp-2b", "--order", "4"], dir.path());
    assert_eq!(stdout(&o), "DOF,E,Rate\n10000,7.3065e-03,\n40000,6.0014e-04,3.61\n160000,3.3086e-05,4.18\n");
}
