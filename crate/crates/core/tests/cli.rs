use std::fs;
use std::path::Path;
use std::process::{Command, Output};

fn run(args: &[&str], out: &Path) -> Output {
    Command::new(env!("CARGO_BIN_EXE_contact-vi"))
        .args(args)
        .env("CONTACT_VI_OUTPUT_ROOT", out)
        .output()
        .expect("binary runs")
}

fn rows(path: &Path) -> Vec<Vec<String>> {
    fs::read_to_string(path)
        .unwrap()
        .lines()
        .map(|l| l.split(',').map(str::to_string).collect())
        .collect()
}

#[test]
fn list_succeeds_and_names_catalog() {
    let dir = tempfile::tempdir().unwrap();
    let out = run(&["list"], dir.path());
    assert!(out.status.success());
    let text = String::from_utf8(out.stdout).unwrap();
    for id in ["foucault-1", "foucault-2", "disk-1.1", "disk-2.3", "disk-4"] {
        assert!(text.contains(id), "{id} missing");
    }
}

#[test]
fn unknown_experiment_is_config_error() {
    let dir = tempfile::tempdir().unwrap();
    let out = run(&["run", "no-such-thing"], dir.path());
    assert_eq!(out.status.code(), Some(1));
    assert!(String::from_utf8(out.stderr).unwrap().contains("foucault-1"));
}

#[test]
fn invalid_step_is_config_error() {
    let dir = tempfile::tempdir().unwrap();
    let out = run(&["run", "foucault-1", "--h", "-0.1"], dir.path());
    assert_eq!(out.status.code(), Some(1));
    let out = run(&["run", "foucault-1", "--override", "bogus=1"], dir.path());
    assert_eq!(out.status.code(), Some(1));
}

#[test]
fn zero_duration_writes_initial_row_only() {
    let dir = tempfile::tempdir().unwrap();
    let out = run(&["run", "foucault-1", "--t-final", "0"], dir.path());
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let traj = rows(&dir.path().join("foucault-1/contact/trajectory.csv"));
    assert_eq!(traj.len(), 2);
    assert_eq!(traj[1][0].parse::<f64>().unwrap(), 0.0);
}

#[test]
fn trajectory_columns_follow_contract() {
    let dir = tempfile::tempdir().unwrap();
    let out = run(&["run", "disk-1.1", "--t-final", "0.5"], dir.path());
    assert!(out.status.success());
    let traj = rows(&dir.path().join("disk-1.1/contact/trajectory.csv"));
    let mut header = vec!["t".to_string()];
    header.extend((1..=5).map(|i| format!("q_{i}")));
    header.extend((1..=5).map(|i| format!("qdot_{i}")));
    header.push("z".into());
    header.extend((1..=2).map(|i| format!("lambda_{i}")));
    header.push("E".into());
    assert_eq!(traj[0], header);
    let mut last_t = f64::NEG_INFINITY;
    for row in &traj[1..] {
        assert_eq!(row.len(), header.len());
        let vals: Vec<f64> = row.iter().map(|s| s.parse().unwrap()).collect();
        assert!(vals.iter().all(|v| v.is_finite()));
        assert!(vals[0] > last_t);
        last_t = vals[0];
    }
    let energy = rows(&dir.path().join("disk-1.1/contact/energy.csv"));
    assert_eq!(energy[0], vec!["t", "E"]);
    assert_eq!(energy.len(), traj.len());
}

#[test]
fn repeated_runs_are_byte_identical() {
    let a = tempfile::tempdir().unwrap();
    let b = tempfile::tempdir().unwrap();
    let args = ["run", "foucault-2", "--t-final", "20", "--emit", "trajectory,energy,plane_angle,summary"];
    assert!(run(&args, a.path()).status.success());
    assert!(run(&args, b.path()).status.success());
    for file in ["trajectory.csv", "energy.csv", "plane_angle.csv"] {
        let x = fs::read(a.path().join("foucault-2/contact").join(file)).unwrap();
        let y = fs::read(b.path().join("foucault-2/contact").join(file)).unwrap();
        assert_eq!(x, y, "{file} differs");
    }
    let strip = |p: &Path| -> Vec<Vec<String>> { rows(p).into_iter().filter(|r| r[0] != "wall_time").collect() };
    assert_eq!(
        strip(&a.path().join("foucault-2/contact/summary.csv")),
        strip(&b.path().join("foucault-2/contact/summary.csv"))
    );
}

#[test]
fn compare_same_integrator_gives_identical_columns() {
    let dir = tempfile::tempdir().unwrap();
    let out = run(&["compare", "foucault-1", "--integrators", "contact,contact", "--t-final", "10"], dir.path());
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let table = rows(&dir.path().join("foucault-1/compare/comparison.csv"));
    assert_eq!(table[0], vec!["t", "err_contact", "err_contact", "dE_contact", "dE_contact"]);
    for row in &table[1..] {
        assert_eq!(row[1], row[2]);
        assert_eq!(row[3], row[4]);
    }
    let first: Vec<f64> = table[1].iter().map(|s| s.parse().unwrap()).collect();
    assert!(first[1] < 1e-12);
}

#[test]
fn convergence_reports_orders() {
    let dir = tempfile::tempdir().unwrap();
    let target = dir.path().join("conv");
    let out = run(
        &["convergence", "--h-list", "0.1,0.05,0.025", "--t-final", "5", "--output-dir", target.to_str().unwrap()],
        dir.path(),
    );
    assert!(out.status.success());
    let stdout = String::from_utf8(out.stdout).unwrap();
    assert!(stdout.contains("left-first"));
    assert!(stdout.contains("mid-second"));
    assert!(target.join("orders.csv").exists());
}
