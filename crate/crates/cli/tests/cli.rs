use std::fs;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};

fn scenarios() -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("../core/scenarios")
}

fn svkit(args: &[&str], threads: &str) -> Output {
    Command::new(env!("CARGO_BIN_EXE_svkit"))
        .args(args)
        .env("SVKIT_THREADS", threads)
        .output()
        .expect("spawn svkit")
}

fn run(config: &Path, out: &Path, extra: &[&str]) -> Output {
    let mut args = vec!["run", "--config", config.to_str().unwrap(), "--out", out.to_str().unwrap()];
    args.extend_from_slice(extra);
    svkit(&args, "1")
}

#[test]
fn bundled_exit_codes() {
    for (name, code) in [
        ("heisenberg-smp", 0),
        ("kk-counterexample", 0),
        ("hjb-scp", 0),
        ("malformed", 2),
    ] {
        let dir = tempfile::tempdir().unwrap();
        let out = run(&scenarios().join(format!("{name}.toml")), dir.path(), &[]);
        assert_eq!(out.status.code(), Some(code), "{name}: {}", String::from_utf8_lossy(&out.stderr));
    }
}

#[test]
fn unreadable_config_is_config_error() {
    let dir = tempfile::tempdir().unwrap();
    let out = run(&dir.path().join("missing.toml"), dir.path(), &[]);
    assert_eq!(out.status.code(), Some(2));
    let bad = dir.path().join("bad.toml");
    fs::write(&bad, "name = \"x\"\nseed = 1\nbogus = 3\n").unwrap();
    assert_eq!(run(&bad, dir.path(), &[]).status.code(), Some(2));
    assert_eq!(svkit(&["run"], "1").status.code(), Some(2));
}

#[test]
fn reports_deterministic_across_threads() {
    let cfg = scenarios().join("kk-counterexample.toml");
    for format in ["structured-text", "csv"] {
        let a = tempfile::tempdir().unwrap();
        let b = tempfile::tempdir().unwrap();
        assert_eq!(run(&cfg, a.path(), &["--format", format]).status.code(), Some(0));
        let mut args = vec!["run", "--config", cfg.to_str().unwrap(), "--out", b.path().to_str().unwrap()];
        args.extend_from_slice(&["--format", format]);
        assert_eq!(svkit(&args, "4").status.code(), Some(0));
        let mut names: Vec<_> = fs::read_dir(a.path()).unwrap().map(|e| e.unwrap().file_name()).collect();
        names.sort();
        assert!(!names.is_empty());
        for n in names {
            assert_eq!(fs::read(a.path().join(&n)).unwrap(), fs::read(b.path().join(&n)).unwrap(), "{n:?}");
        }
    }
}

#[test]
fn reach_csv_columns() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("reach.toml");
    fs::write(
        &cfg,
        r#"
name = "r"
seed = 2
format = "csv"
[family]
catalog = "grushin"
[[tasks]]
kind = "reach"
origin = [0.0, 0.0]
region = { lo = [-0.5, -0.5], hi = [0.5, 0.5] }
params = { grid_res = [8], horizon = 2.0 }
"#,
    )
    .unwrap();
    let out = run(&cfg, dir.path(), &[]);
    assert_eq!(out.status.code(), Some(0), "{}", String::from_utf8_lossy(&out.stderr));
    let text = fs::read_to_string(dir.path().join("r.task-00-reach.csv")).unwrap();
    let header = text.lines().next().unwrap();
    assert_eq!(header, "i1,i2,occupied,first_arrival");
    assert_eq!(text.lines().count(), 1 + 64);
}

#[test]
fn empty_task_list() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("empty.toml");
    fs::write(&cfg, "name = \"empty\"\nseed = 1\ntasks = []\n").unwrap();
    assert_eq!(run(&cfg, dir.path(), &["--format", "csv"]).status.code(), Some(0));
    let csv = fs::read_to_string(dir.path().join("empty.summary.csv")).unwrap();
    assert_eq!(csv.lines().count(), 1);
    assert_eq!(run(&cfg, dir.path(), &[]).status.code(), Some(0));
    let json = fs::read_to_string(dir.path().join("empty.report.json")).unwrap();
    assert!(json.contains("\"tasks\": []"), "{json}");
}

/// A task that fails at run time is reported as an error and does not stop
/// the tasks after it.
#[test]
fn task_error_does_not_abort() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("err.toml");
    fs::write(
        &cfg,
        r#"
name = "err"
seed = 3
[family]
catalog = "heisenberg1"
domain = { lo = [-1.0, -1.0, -1.0], hi = [1.0, 1.0, 1.0] }
[operators.h]
kind = "hjb"
mode = "inf"
homogeneous = true
members = [{ a_family_scale = 1.0 }]
[functions.bowl]
kind = "polynomial"
terms = [{ exponents = [2, 0, 0], coeff = 1.0 }]
[[tasks]]
kind = "strict-lift"
operator = "h"
u = "bowl"
center = [0.0, 0.0, 0.0]
lift = { epsilon = 0.01, delta = 50.0, r1 = 0.5 }
[[tasks]]
kind = "hormander-rank"
points = [[0.0, 0.0, 0.0]]
max_depth = 2
expect_rank = 3
"#,
    )
    .unwrap();
    let out = run(&cfg, dir.path(), &[]);
    assert_eq!(out.status.code(), Some(1), "{}", String::from_utf8_lossy(&out.stderr));
    let stdout = String::from_utf8_lossy(&out.stdout);
    assert!(stdout.contains("1 passed, 0 failed, 1 errors"), "{stdout}");
}

#[test]
fn catalog_lists_families() {
    let out = svkit(&["catalog"], "1");
    assert_eq!(out.status.code(), Some(0));
    let text = String::from_utf8_lossy(&out.stdout);
    assert!(text.contains("heisenberg") && text.contains("grushin"));
}
