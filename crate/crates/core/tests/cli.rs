//! End-to-end runs of the command-line tool.

use fluxcoupler::circuit::derive_unitless;
use fluxcoupler::cli::config::parse_config;
use std::path::{Path, PathBuf};
use std::process::Command;

const SMALL: &str = "\
[circuit]
L_j = 817 pH
C_j = 77 fF
beta_j = 1.1
M_j = 40 pH
L_c = 170 pH
C_c = 407 fF
beta_c = 0.43

[sweep]
beta_c = 0.1:0.4:3

[extraction]
branches = all
";

fn shipped_config() -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("../../configs/reference_device.conf")
}

fn run(args: &[&str], config: Option<&Path>, out: &Path) -> i32 {
    let mut cmd = Command::new(env!("CARGO_BIN_EXE_fluxcoupler"));
    cmd.arg("--out").arg(out);
    if let Some(c) = config {
        cmd.arg("--config").arg(c);
    }
    cmd.args(args).status().unwrap().code().unwrap()
}

fn write_config(dir: &Path, text: &str) -> PathBuf {
    let p = dir.join("run.conf");
    std::fs::write(&p, text).unwrap();
    p
}

#[test]
fn repeated_runs_are_byte_identical() {
    let dir = tempfile::tempdir().unwrap();
    let conf = write_config(dir.path(), SMALL);
    for command in ["sweep-beta", "gap-scan"] {
        let outs: Vec<Vec<u8>> = (0..2)
            .map(|i| {
                let out = dir.path().join(format!("{command}-{i}"));
                std::fs::create_dir_all(&out).unwrap();
                let code = run(&[command], Some(&conf), &out);
                assert!(code == 0 || code == 1, "{command}: exit {code}");
                std::fs::read(out.join(format!("{command}.csv"))).unwrap()
            })
            .collect();
        assert_eq!(outs[0], outs[1], "{command}");
        assert!(!outs[0].contains(&b'\r'));
    }
}

#[test]
fn output_header_describes_the_run() {
    let dir = tempfile::tempdir().unwrap();
    let conf = write_config(dir.path(), SMALL);
    run(&["sweep-beta"], Some(&conf), dir.path());
    let text = std::fs::read_to_string(dir.path().join("sweep-beta.csv")).unwrap();
    assert!(text.starts_with("# fluxcoupler "));
    assert!(text.contains("# command: sweep-beta\n"));
    assert!(text.contains("#   [circuit]\n"));
    assert!(text.contains("# units:\n"));
    let header = text.lines().find(|l| !l.starts_with('#')).unwrap();
    let cols: Vec<&str> = header.split(',').collect();
    assert_eq!(cols[0], "beta_c");
    for c in [
        "spectral_fit_J2_Hz",
        "spectral_fit_J4_Hz",
        "analytic_swt_J4_Hz",
        "numerical_swt_J2_Hz",
        "residual",
        "delta_gap_Hz",
        "delta_max_Hz",
        "status",
    ] {
        assert!(cols.contains(&c), "missing column {c} in {cols:?}");
    }
    let rows: Vec<&str> = text
        .lines()
        .filter(|l| !l.starts_with('#'))
        .skip(1)
        .collect();
    assert_eq!(rows.len(), 3);
    assert!(rows.iter().all(|r| r.split(',').count() == cols.len()));
}

#[test]
fn configuration_errors_exit_with_two() {
    let dir = tempfile::tempdir().unwrap();
    let missing_unit = write_config(dir.path(), &SMALL.replace("L_c = 170 pH", "L_c = 170"));
    assert_eq!(run(&["sweep-beta"], Some(&missing_unit), dir.path()), 2);
    let bad = write_config(
        dir.path(),
        &SMALL.replace("[sweep]\nbeta_c = 0.1:0.4:3\n", ""),
    );
    assert_eq!(run(&["sweep-beta"], Some(&bad), dir.path()), 2);
    assert_eq!(run(&["sweep-beta"], None, dir.path()), 2);
    assert_eq!(run(&["--threads", "0", "check"], None, dir.path()), 2);
}

#[test]
fn check_runs_without_configuration() {
    let dir = tempfile::tempdir().unwrap();
    assert_eq!(run(&["--seed", "7", "check"], None, dir.path()), 0);
    let text = std::fs::read_to_string(dir.path().join("check.csv")).unwrap();
    assert!(text.contains("seed = 7"));
}

#[test]
fn shipped_configuration_reproduces_reference_scales() {
    let cfg = parse_config(&std::fs::read_to_string(shipped_config()).unwrap()).unwrap();
    let u = derive_unitless(&cfg.circuit, &cfg.constants)
        .unwrap()
        .params;
    let near = |x: f64, target: f64, tol: f64| (x - target).abs() <= tol * target.abs();
    assert!(
        near(u.e_l_tilde_c, 1e12, 0.05),
        "E_Ltilde_c = {:e}",
        u.e_l_tilde_c
    );
    assert!(near(u.xi_c, 0.01, 0.05), "ξ_c = {}", u.xi_c);
    assert!(near(u.beta_c, 0.43, 1e-12));
    for j in 0..4 {
        assert!(near(u.xi[j], 0.05, 0.05), "ξ_j = {}", u.xi[j]);
        assert!(near(u.alpha[j], 0.049, 0.01), "α_j = {}", u.alpha[j]);
        assert!(near(u.beta[j], 1.1, 1e-12));
    }
}
