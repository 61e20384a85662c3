//! End-to-end CLI checks: output layout, determinism, exit codes.

use std::path::{Path, PathBuf};

use credell::cli::{run, CliCommand, CliInvocation};

const LINEAR_CFG: &str = "\
model = linear
d = 1
D = 8
alpha = 2
N = 300
seed = 5
theta0.kind = coeffs
theta0.coeffs = 0.4, -0.2
psi.count = 1
psi.1.kind = coeffs
psi.1.coeffs = 1
mcmc.steps = 3000
mcmc.burnin = 800
mcmc.beta = 0.4
cred.level = 0.9
cred.case = 1
coverage.replicates = 10
";

fn write_cfg(dir: &Path, text: &str) -> PathBuf {
    let path = dir.join("exp.cfg");
    std::fs::write(&path, text).unwrap();
    path
}

fn invocation(command: CliCommand, cfg: &Path, out: Option<&Path>) -> CliInvocation {
    CliInvocation {
        command,
        config: Some(cfg.to_path_buf()),
        out: out.map(Path::to_path_buf),
        seed: None,
        replicates: None,
        workers: None,
    }
}

fn meta_without_wall_time(path: &Path) -> serde_json::Value {
    let mut v: serde_json::Value = serde_json::from_slice(&std::fs::read(path).unwrap()).unwrap();
    v.as_object_mut().unwrap().remove("wall_time_secs");
    v
}

#[test]
fn coverage_outputs_are_reproducible_byte_for_byte() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_cfg(dir.path(), LINEAR_CFG);
    let out1 = dir.path().join("run1");
    let out2 = dir.path().join("run2");
    assert_eq!(run(&invocation(CliCommand::Coverage, &cfg, Some(&out1))), 0);
    assert_eq!(run(&invocation(CliCommand::Coverage, &cfg, Some(&out2))), 0);
    let csv1 = std::fs::read(out1.join("coverage.csv")).unwrap();
    let csv2 = std::fs::read(out2.join("coverage.csv")).unwrap();
    assert_eq!(csv1, csv2);
    assert_eq!(
        meta_without_wall_time(&out1.join("meta.json")),
        meta_without_wall_time(&out2.join("meta.json"))
    );
    // csv has header plus one row per replicate
    let text = String::from_utf8(csv1).unwrap();
    assert_eq!(text.lines().count(), 11);
    assert!(text.starts_with("replicate,seed,hit,r_n,diameter,psi_hat_1,psi_true_1"));
}

#[test]
fn seed_override_changes_outputs() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_cfg(dir.path(), LINEAR_CFG);
    let out1 = dir.path().join("a");
    let out2 = dir.path().join("b");
    let mut inv = invocation(CliCommand::Coverage, &cfg, Some(&out1));
    assert_eq!(run(&inv), 0);
    inv.out = Some(out2.clone());
    inv.seed = Some(6);
    assert_eq!(run(&inv), 0);
    let csv1 = std::fs::read_to_string(out1.join("coverage.csv")).unwrap();
    let csv2 = std::fs::read_to_string(out2.join("coverage.csv")).unwrap();
    assert_ne!(csv1, csv2);
    // the echoed config reflects the override
    let meta: serde_json::Value =
        serde_json::from_str(&std::fs::read_to_string(out2.join("meta.json")).unwrap()).unwrap();
    assert_eq!(meta["config"]["seed"], 6);
    assert!(meta["config_text"].as_str().unwrap().contains("seed = 6"));
}

#[test]
fn meta_config_echo_reparses_identically() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_cfg(dir.path(), LINEAR_CFG);
    let out = dir.path().join("out");
    assert_eq!(run(&invocation(CliCommand::Coverage, &cfg, Some(&out))), 0);
    let meta: serde_json::Value =
        serde_json::from_str(&std::fs::read_to_string(out.join("meta.json")).unwrap()).unwrap();
    let echoed = meta["config_text"].as_str().unwrap();
    let reparsed = credell::cli::parse_config(echoed).unwrap();
    let original = credell::cli::parse_config(LINEAR_CFG).unwrap();
    assert_eq!(reparsed, original);
}

#[test]
fn audit_reports_window_bound() {
    let dir = tempfile::tempdir().unwrap();
    let cfg_text = "\
model = darcy
d = 1
D = 16
alpha = 14
N = 10000
theta0.kind = coeffs
theta0.coeffs = 0.3
psi.count = 1
psi.1.kind = coeffs
psi.1.coeffs = 1
";
    let cfg = write_cfg(dir.path(), cfg_text);
    let out = dir.path().join("out");
    assert_eq!(run(&invocation(CliCommand::Audit, &cfg, Some(&out))), 0);
    let audit: serde_json::Value =
        serde_json::from_str(&std::fs::read_to_string(out.join("audit.json")).unwrap()).unwrap();
    let u_max = audit["rates"]["u_max"].as_f64().unwrap();
    assert!((u_max - 8.62e-4).abs() < 1e-5, "u_max {u_max}");
    assert!(audit["rows"].as_array().unwrap().len() == 3);
}

#[test]
fn simulate_and_diagnose_write_reports() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_cfg(dir.path(), LINEAR_CFG);
    let out = dir.path().join("sim");
    assert_eq!(run(&invocation(CliCommand::Simulate, &cfg, Some(&out))), 0);
    let ell: serde_json::Value =
        serde_json::from_str(&std::fs::read_to_string(out.join("ellipsoid.json")).unwrap())
            .unwrap();
    assert!(ell["result"]["r_n"].as_f64().unwrap() > 0.0);
    assert!(ell["result"]["acceptance_rate"].as_f64().unwrap() > 0.0);
    assert!(out.join("meta.json").exists());

    let out2 = dir.path().join("diag");
    assert_eq!(run(&invocation(CliCommand::Diagnose, &cfg, Some(&out2))), 0);
    let diag: serde_json::Value =
        serde_json::from_str(&std::fs::read_to_string(out2.join("diagnostics.json")).unwrap())
            .unwrap();
    let pivot = diag["diagnostics"]["pivot"].as_array().unwrap();
    assert_eq!(pivot.len(), 1);
    assert!(diag["diagnostics"]["pivot_max_deviation"]
        .as_f64()
        .is_some());
    assert!(diag["audit"]["rates"]["s_n"].as_f64().unwrap() > 1.0);
}

#[test]
fn pde_check_runs_without_config() {
    let dir = tempfile::tempdir().unwrap();
    let inv = CliInvocation {
        command: CliCommand::PdeCheck,
        config: None,
        out: Some(dir.path().join("out")),
        seed: None,
        replicates: None,
        workers: None,
    };
    assert_eq!(run(&inv), 0);
    let tables: serde_json::Value = serde_json::from_str(
        &std::fs::read_to_string(dir.path().join("out/pde_check.json")).unwrap(),
    )
    .unwrap();
    assert_eq!(tables.as_array().unwrap().len(), 3);
}

#[test]
fn missing_out_for_coverage_is_config_error() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_cfg(dir.path(), LINEAR_CFG);
    assert_eq!(run(&invocation(CliCommand::Coverage, &cfg, None)), 2);
}

#[test]
fn unreadable_config_path_is_config_error() {
    let dir = tempfile::tempdir().unwrap();
    let missing = dir.path().join("nope.cfg");
    assert_eq!(run(&invocation(CliCommand::Audit, &missing, None)), 2);
}
