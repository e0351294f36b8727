use std::path::Path;
use std::process::{Command, Output};
use wlry::csv::read_ledger;

fn wlry(args: &[&str], root: &Path) -> Output {
    Command::new(env!("CARGO_BIN_EXE_wlry")).args(args).env("WLRY_OUTPUT_ROOT", root).output().unwrap()
}

fn stdout(o: &Output) -> String {
    String::from_utf8_lossy(&o.stdout).into_owned()
}

fn write(dir: &Path, name: &str, text: &str) -> String {
    let p = dir.join(name);
    std::fs::write(&p, text).unwrap();
    p.to_string_lossy().into_owned()
}

#[test]
fn short_navier_stokes_run_passes_its_ledger() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = write(tmp.path(), "short.toml", "experiment = \"ns_run\"\n[grid]\nn = 32\n[solver]\nT = 0.1\n");
    let o = wlry(&["run", &cfg], tmp.path());
    assert!(o.status.success(), "{}{}", stdout(&o), String::from_utf8_lossy(&o.stderr));
    let dir = tmp.path().join("out/short");
    let ledger = dir.join("ledger.csv");
    let rows = read_ledger(&std::fs::read_to_string(&ledger).unwrap()).unwrap();
    assert_eq!(rows.len(), 21);
    assert!(rows.iter().all(|e| e.slack_a >= -e.tol_disc));
    let summary = std::fs::read_to_string(dir.join("summary.toml")).unwrap();
    assert!(summary.contains("passed = true") && summary.contains("eps = 0.1"));

    let v = wlry(&["verify", ledger.to_str().unwrap()], tmp.path());
    assert!(v.status.success());
    assert!(stdout(&v).starts_with("21 rows, slack_A failures 0"));
    let snap = dir.join("u_000020.wlry");
    let i = wlry(&["info", snap.to_str().unwrap()], tmp.path());
    assert!(i.status.success());
    assert!(stdout(&i).starts_with("vector field, n = 32"), "{}", stdout(&i));
}

#[test]
fn fixed_point_run_writes_a_decaying_trace() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = write(
        tmp.path(),
        "fp.toml",
        "experiment = \"dss_fixpoint\"\nseed = 5\noutput = \"fp\"\n[grid]\nn = 32\nhalf_width = 8.0\n[solver]\nT = 0.4\ndt = 0.01\n[data]\nkind = \"dss\"\nnormalize = 0.2\n[dss]\nomega = 1.0\n",
    );
    let o = wlry(&["run", &cfg], tmp.path());
    assert!(o.status.success(), "{}", stdout(&o));
    let trace = std::fs::read_to_string(tmp.path().join("fp/trace.csv")).unwrap();
    let mut lines = trace.lines();
    assert_eq!(lines.next(), Some("k,residual,residual_full,x_norm,symmetrized"));
    let rows: Vec<Vec<&str>> = lines.map(|l| l.split(',').collect()).collect();
    assert!(rows.len() >= 2);
    let res: Vec<f64> = rows.iter().map(|r| r[1].parse().unwrap()).collect();
    assert!(rows.windows(2).zip(res.windows(2)).all(|(r, p)| p[1] <= p[0] || r[1][4] == "true"), "{res:?}");
}

#[test]
fn failures_set_the_exit_status() {
    let tmp = tempfile::tempdir().unwrap();
    let bad = write(tmp.path(), "bad.toml", "experiment = \"ns_run\"\n[grid]\nn = 32\n[weight]\ngamma = 2.5\n[solver]\nT = 0.1\n");
    let o = wlry(&["run", &bad], tmp.path());
    assert!(!o.status.success());
    assert!(String::from_utf8_lossy(&o.stderr).contains("weight.gamma"));
    let weights = write(tmp.path(), "weights.toml", "experiment = \"weights\"\n[grid]\nn = 16\n[solver]\nT = 0.1\n[weights]\ndeltas = [2.9]\n");
    let o = wlry(&["run", &weights], tmp.path());
    assert!(!o.status.success());
    assert!(stdout(&o).contains("FAIL [plateau_delta_2.9"), "{}", stdout(&o));
    let garbage = write(tmp.path(), "garbage.csv", "t\n1\n");
    assert!(!wlry(&["verify", &garbage], tmp.path()).status.success());
    assert!(!wlry(&["info", &garbage], tmp.path()).status.success());
}

#[test]
fn output_root_comes_from_the_environment() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = write(tmp.path(), "ops.toml", "experiment = \"operators\"\nseed = 2\noutput = \"nested/ops\"\n[grid]\nn = 8\n[solver]\nT = 0.1\n[weights]\nfields = 2\n");
    let root = tmp.path().join("root");
    assert!(wlry(&["run", &cfg], &root).status.success());
    assert!(root.join("nested/ops/operators.csv").exists());
}
