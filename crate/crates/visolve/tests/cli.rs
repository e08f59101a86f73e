use std::fs;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use visolve::experiment::{load_manifest, MANIFEST_FILE};
use visolve::plotdata::{LONG_FILE, LONG_HEADER, SUMMARY_FILE, SUMMARY_HEADER};

fn visolve(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_visolve"))
        .args(args)
        .output()
        .expect("spawn visolve")
}

fn code(out: &Output) -> i32 {
    out.status.code().expect("exit code")
}

fn stdout(out: &Output) -> String {
    String::from_utf8_lossy(&out.stdout).into_owned()
}

fn write_config(dir: &Path, name: &str, body: &str) -> PathBuf {
    let path = dir.join(name);
    fs::write(&path, body).unwrap();
    path
}

const AFFINE_EG: &str = r#"
output = "out"

[problem]
kind = "affine"
dim = 6
components = 4
mu = 1.0
lipschitz = 4.0
seed = 1

[solver]
kind = "eg"
epochs = 30

[experiment]
schedules = ["rr", "so", "independent"]
seeds = [50, 51, 52]
"#;

const AFFINE_VR: &str = r#"
output = "vr"

[problem]
kind = "affine"
dim = 6
components = 5
mu = 1.0
lipschitz = 4.0
seed = 2

[solver]
kind = "vr-eg"
epochs = 60

[experiment]
schedules = ["rr"]
seed_count = 20
"#;

fn traces(dir: &Path) -> Vec<(String, Vec<u8>)> {
    let mut out: Vec<_> = fs::read_dir(dir.join("traces"))
        .unwrap()
        .map(|e| {
            let p = e.unwrap().path();
            (
                p.file_name().unwrap().to_string_lossy().into_owned(),
                fs::read(&p).unwrap(),
            )
        })
        .collect();
    out.sort();
    out
}

#[test]
fn run_writes_one_trace_per_cell_and_is_reproducible() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = write_config(tmp.path(), "eg.toml", AFFINE_EG);
    let out_dir = tmp.path().join("out");

    let first = visolve(&["run", cfg.to_str().unwrap()]);
    assert_eq!(
        code(&first),
        0,
        "{}",
        String::from_utf8_lossy(&first.stderr)
    );
    let manifest = load_manifest(&out_dir).unwrap();
    assert_eq!(manifest.cells.len(), 9);
    assert!(manifest.cells.iter().all(|c| c.is_ok()));
    let before = traces(&out_dir);
    assert_eq!(before.len(), 9);
    assert!(before.iter().any(|(name, _)| name == "rr_seed50.csv"));

    let second = visolve(&["run", cfg.to_str().unwrap()]);
    assert_eq!(code(&second), 0);
    assert_eq!(traces(&out_dir), before);
}

#[test]
fn overrides_change_the_run() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = write_config(tmp.path(), "eg.toml", AFFINE_EG);
    let out = visolve(&[
        "run",
        cfg.to_str().unwrap(),
        "--set",
        "experiment.schedules=[\"cyclic\"]",
        "--set",
        "solver.gamma=0.01",
    ]);
    assert_eq!(code(&out), 0, "{}", String::from_utf8_lossy(&out.stderr));
    let manifest = load_manifest(&tmp.path().join("out")).unwrap();
    assert_eq!(manifest.cells.len(), 3);
    assert_eq!(manifest.solver.gamma, 0.01);
    assert!(manifest.cells.iter().all(|c| c.schedule == "cyclic"));
}

#[test]
fn check_passes_fails_and_rejects_tampering() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = write_config(tmp.path(), "vr.toml", AFFINE_VR);
    let dir = tmp.path().join("vr");
    let dir_arg = dir.to_str().unwrap();
    assert_eq!(code(&visolve(&["run", cfg.to_str().unwrap()])), 0);

    let pass = visolve(&["check", dir_arg]);
    assert_eq!(code(&pass), 0, "{}", stdout(&pass));
    assert!(stdout(&pass).starts_with("PASS rr"));

    let report = tmp.path().join("report.csv");
    let fail = visolve(&[
        "check",
        dir_arg,
        "--slack",
        "1e-6",
        "--report",
        report.to_str().unwrap(),
    ]);
    assert_eq!(code(&fail), 1, "{}", stdout(&fail));
    assert!(stdout(&fail).starts_with("FAIL rr"));
    let csv = fs::read_to_string(&report).unwrap();
    assert!(csv.starts_with("schedule,epoch,step,iteration,mean,bound,ratio\n"));
    assert_eq!(csv.lines().count(), 62);

    let trace = dir.join("traces/rr_seed50.csv");
    let mut text = fs::read_to_string(&trace).unwrap();
    text.push_str("61,0,0,0,0,0\n");
    fs::write(&trace, text).unwrap();
    let tampered = visolve(&["check", dir_arg]);
    assert_eq!(code(&tampered), 2);
    assert!(String::from_utf8_lossy(&tampered.stderr).contains("rr_seed50.csv"));
}

#[test]
fn check_reports_failed_cells() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = write_config(tmp.path(), "vr.toml", AFFINE_VR);
    let dir = tmp.path().join("vr");
    assert_eq!(code(&visolve(&["run", cfg.to_str().unwrap()])), 0);
    let path = dir.join(MANIFEST_FILE);
    let mut manifest = fs::read_to_string(&path).unwrap();
    manifest.push_str(
        "\n[[cells]]\nschedule = \"rr\"\nseed = 99\nstatus = \"error\"\nerror = \"diverged\"\n",
    );
    fs::write(&path, manifest).unwrap();
    let out = visolve(&["check", dir.to_str().unwrap()]);
    assert_eq!(code(&out), 0, "{}", String::from_utf8_lossy(&out.stderr));
    assert!(stdout(&out).contains("1 cells failed"));
}

#[test]
fn plotdata_writes_long_and_summary_tables() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = write_config(tmp.path(), "eg.toml", AFFINE_EG);
    let dir = tmp.path().join("out");
    assert_eq!(code(&visolve(&["run", cfg.to_str().unwrap()])), 0);
    let out = visolve(&["plotdata", dir.to_str().unwrap()]);
    assert_eq!(code(&out), 0, "{}", String::from_utf8_lossy(&out.stderr));
    let long = fs::read_to_string(dir.join(LONG_FILE)).unwrap();
    let summary = fs::read_to_string(dir.join(SUMMARY_FILE)).unwrap();
    assert_eq!(long.lines().next(), Some(LONG_HEADER));
    assert_eq!(summary.lines().next(), Some(SUMMARY_HEADER));
    // eg traces carry iteration, sq_dist and residual; the summary keeps iteration as a column
    assert_eq!(long.lines().count() - 1, 9 * 31 * 3);
    assert_eq!(summary.lines().count() - 1, 3 * 31 * 2);
}

#[test]
fn reference_writes_the_solution_file() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = write_config(tmp.path(), "eg.toml", AFFINE_EG);
    let out = visolve(&["reference", cfg.to_str().unwrap()]);
    assert_eq!(code(&out), 0, "{}", String::from_utf8_lossy(&out.stderr));
    let text = fs::read_to_string(tmp.path().join("out/reference.txt")).unwrap();
    assert!(text.starts_with("# problem "));
    assert_eq!(text.lines().filter(|l| !l.starts_with('#')).count(), 6);
}

#[test]
fn input_errors_exit_with_two() {
    let tmp = tempfile::tempdir().unwrap();
    let missing = tmp.path().join("missing.toml");
    assert_eq!(code(&visolve(&["run", missing.to_str().unwrap()])), 2);
    assert_eq!(code(&visolve(&["frobnicate"])), 2);
    assert_eq!(code(&visolve(&["fetch-data", "no-such-set"])), 2);
    assert_eq!(code(&visolve(&["check", tmp.path().to_str().unwrap()])), 2);
    let bad = write_config(
        tmp.path(),
        "bad.toml",
        "output = \"x\"\n[problem]\nkind = \"nope\"\n",
    );
    assert_eq!(code(&visolve(&["run", bad.to_str().unwrap()])), 2);
}
