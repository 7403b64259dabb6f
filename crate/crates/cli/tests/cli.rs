use std::path::Path;
use std::process::{Command, Output};

fn lkchaos(dir: &Path, args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_lkchaos"))
        .args(args)
        .current_dir(dir)
        .env_remove("LKCHAOS_OUT_DIR")
        .output()
        .expect("binary runs")
}

fn stdout(o: &Output) -> String {
    String::from_utf8_lossy(&o.stdout).into_owned()
}

fn stderr(o: &Output) -> String {
    String::from_utf8_lossy(&o.stderr).into_owned()
}

#[test]
fn dry_run_prints_resolved_config_only() {
    let dir = tempfile::tempdir().unwrap();
    let o = lkchaos(
        dir.path(),
        &["simulate", "--rho", "1.5", "--kappa", "50ns-1", "--record", "10us", "--dry-run"],
    );
    assert!(o.status.success(), "{}", stderr(&o));
    let out = stdout(&o);
    assert!(out.contains("kappa_per_ns=50\n"), "{out}");
    assert!(out.contains("t_record_s=1e-5\n"));
    assert!(out.contains("alpha=5\n"));
    assert!(!dir.path().join("trace.lktr").exists());
}

#[test]
fn bare_number_for_rate_is_usage_error() {
    let dir = tempfile::tempdir().unwrap();
    let o = lkchaos(dir.path(), &["simulate", "--kappa", "50"]);
    assert_eq!(o.status.code(), Some(2));
    assert!(stderr(&o).contains("--kappa"));
}

#[test]
fn unknown_config_key_is_named() {
    let dir = tempfile::tempdir().unwrap();
    std::fs::write(dir.path().join("run.cfg"), "rho = 1.2\nkapa_per_ns = 4\n").unwrap();
    let o = lkchaos(dir.path(), &["simulate", "--config", "run.cfg", "--dry-run"]);
    assert_eq!(o.status.code(), Some(2));
    assert!(stderr(&o).contains("kapa_per_ns"), "{}", stderr(&o));

    let o = lkchaos(dir.path(), &["g2", "--set", "gamma=1", "--dry-run"]);
    assert_eq!(o.status.code(), Some(2));
    assert!(stderr(&o).contains("gamma"));
}

#[test]
fn config_file_values_reach_the_run() {
    let dir = tempfile::tempdir().unwrap();
    std::fs::write(dir.path().join("run.cfg"), "# test\neta_percent = 25\nrho = 1.2\n").unwrap();
    let o = lkchaos(dir.path(), &["simulate", "--config", "run.cfg", "--dry-run"]);
    assert!(o.status.success());
    let out = stdout(&o);
    assert!(out.contains("eta_percent=25\n") && out.contains("rho=1.2\n"), "{out}");
    let o = lkchaos(dir.path(), &["simulate", "--config", "run.cfg", "--rho", "2", "--dry-run"]);
    assert!(stdout(&o).contains("rho=2\n"));
}

#[test]
fn constant_trace_has_unit_g2() {
    let dir = tempfile::tempdir().unwrap();
    let o = lkchaos(
        dir.path(),
        &[
            "simulate", "--rho", "1.5", "--kappa", "0ns-1", "--transient", "500ns", "--record",
            "100ns", "--out", "steady.lktr",
        ],
    );
    assert!(o.status.success(), "{}", stderr(&o));
    assert!(stdout(&o).starts_with("sigma/mean=0.0000"), "{}", stdout(&o));
    let o = lkchaos(dir.path(), &["g2", "--input", "steady.lktr", "--max-lag", "5ns"]);
    assert!(o.status.success(), "{}", stderr(&o));
    assert!(stdout(&o).starts_with("g2(0)=1.000"), "{}", stdout(&o));
    let csv = std::fs::read_to_string(dir.path().join("g2.csv")).unwrap();
    assert!(csv.starts_with("# "));
    assert!(csv.contains("\ntau_ns,g2\n"));
}

#[test]
fn trace_csv_export() {
    let dir = tempfile::tempdir().unwrap();
    let o = lkchaos(
        dir.path(),
        &["simulate", "--transient", "100ns", "--record", "1ns", "--all-channels", "--out", "t.csv"],
    );
    assert!(o.status.success(), "{}", stderr(&o));
    let csv = std::fs::read_to_string(dir.path().join("t.csv")).unwrap();
    assert!(csv.contains("t_ns,intensity,phase_rad,carriers\n"));
    assert_eq!(csv.lines().filter(|l| !l.starts_with('#')).count(), 251);
}

#[test]
fn env_var_sets_default_output_directory() {
    let dir = tempfile::tempdir().unwrap();
    let target = dir.path().join("results");
    let o = Command::new(env!("CARGO_BIN_EXE_lkchaos"))
        .args(["counts", "--kappa", "20ns-1", "--transient", "100ns", "--record", "200ns"])
        .current_dir(dir.path())
        .env("LKCHAOS_OUT_DIR", &target)
        .output()
        .unwrap();
    assert!(o.status.success(), "{}", stderr(&o));
    assert!(target.join("pnd.csv").exists());
    assert!(stdout(&o).contains("g2(0)="));
}

#[test]
fn missing_input_is_runtime_error() {
    let dir = tempfile::tempdir().unwrap();
    let o = lkchaos(dir.path(), &["spectrum", "--input", "nope.lktr"]);
    assert_eq!(o.status.code(), Some(1));
}

#[test]
fn unknown_figure_tag_is_usage_error() {
    let dir = tempfile::tempdir().unwrap();
    let o = lkchaos(dir.path(), &["figure", "fig3"]);
    assert_eq!(o.status.code(), Some(2));
    assert!(stderr(&o).contains("fig3"));
}

#[test]
fn sweep_output_is_reproducible_across_job_counts() {
    let dir = tempfile::tempdir().unwrap();
    std::fs::write(dir.path().join("short.cfg"), "tau_ext_ns = 2\n").unwrap();
    let run = |out: &str, jobs: &str| {
        lkchaos(
            dir.path(),
            &[
                "sweep", "--config", "short.cfg", "--rho", "1.2,1.5", "--kappa", "5.5ns-1,20ns-1",
                "--transient", "20ns", "--record", "60ns", "--metrics", "g2_0,h,pnd", "--seed",
                "5", "--jobs", jobs, "--out", out,
            ],
        )
    };
    let a = run("a", "1");
    assert!(a.status.success(), "{}", stderr(&a));
    assert!(stdout(&a).starts_with("points=4 failed=0"), "{}", stdout(&a));
    let b = run("b", "2");
    assert!(b.status.success());
    let read = |d: &str| std::fs::read(dir.path().join(d).join("sweep.csv")).unwrap();
    assert_eq!(read("a"), read("b"));
    let manifest = std::fs::read_to_string(dir.path().join("a/manifest.txt")).unwrap();
    assert!(manifest.contains("points=4\n"));
}

#[test]
fn sweep_needs_feedback_axis() {
    let dir = tempfile::tempdir().unwrap();
    let o = lkchaos(dir.path(), &["sweep", "--rho", "1.5"]);
    assert_eq!(o.status.code(), Some(2));
}
