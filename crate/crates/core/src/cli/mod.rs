//! Command-line frontend: subcommands, config loading, output layout.
//!
//! Exit codes: 0 success, 2 configuration/argument problems, 3 numerical
//! failures. Results land in the `--out` directory as `coverage.csv`,
//! `diagnostics.json`, `ellipsoid.json`, `audit.json`, and `meta.json`;
//! everything except the wall-time field is a pure function of the config
//! and seed.

pub mod config;

use std::path::{Path, PathBuf};
use std::time::Instant;

use clap::{Parser, Subcommand};

use crate::error::{Error, Result};
use crate::harness::io::{
    write_coverage_csv, write_json, DiagnosticsFile, EllipsoidFile, Meta, MetaCoverage,
    SimulateSummary,
};
use crate::harness::{
    bvm_diagnostics, centering_statistic, condition_audit, coverage_study, pde_convergence_tables,
    simulate, AuditReport, Experiment,
};
use crate::posterior::{functional_moments, run_pcn, McmcConfig};
use crate::rng::{derive_seed, stream_rng, SALT_CHAIN, SALT_DATA};

pub use config::{canonical_text, parse_config};

/// Posterior credible ellipsoids for linear functionals in nonlinear
/// regression, with Darcy and Schrödinger inverse-problem models.
#[derive(Debug, Parser)]
#[command(name = "credell", version)]
pub struct CliInvocation {
    #[command(subcommand)]
    pub command: CliCommand,

    /// experiment configuration file
    #[arg(long, global = true)]
    pub config: Option<PathBuf>,

    /// output directory for result files
    #[arg(long, global = true)]
    pub out: Option<PathBuf>,

    /// master seed override
    #[arg(long, global = true)]
    pub seed: Option<u64>,

    /// replicate-count override
    #[arg(long, global = true)]
    pub replicates: Option<usize>,

    /// worker threads (results are identical for any value)
    #[arg(long, global = true)]
    pub workers: Option<usize>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Subcommand)]
pub enum CliCommand {
    /// One dataset, one pCN posterior, one credible ellipsoid.
    Simulate,
    /// Coverage Monte Carlo over fresh replicates.
    Coverage,
    /// Posterior normality diagnostics on one fit.
    Diagnose,
    /// Rate formulas and asymptotic-condition audit.
    Audit,
    /// Manufactured-solution convergence tables.
    PdeCheck,
}

/// Run an invocation, reporting errors on stderr; returns the exit code.
pub fn run(inv: &CliInvocation) -> i32 {
    match run_inner(inv) {
        Ok(()) => 0,
        Err(e) => {
            eprintln!("error: {e}");
            e.exit_code()
        }
    }
}

fn run_inner(inv: &CliInvocation) -> Result<()> {
    let started = Instant::now();
    if inv.command == CliCommand::PdeCheck {
        return run_pde_check(inv.out.as_deref());
    }

    let config_path = inv
        .config
        .as_ref()
        .ok_or_else(|| Error::Config("--config is required for this subcommand".into()))?;
    let text = std::fs::read_to_string(config_path)?;
    let mut config = parse_config(&text)?;
    if let Some(seed) = inv.seed {
        config.seed = seed;
    }
    if let Some(replicates) = inv.replicates {
        config.replicates = replicates;
    }
    config.validate()?;
    let exp = config.build()?;
    let audit = condition_audit(&exp)?;

    match inv.command {
        CliCommand::Audit => run_audit(&audit, inv.out.as_deref()),
        CliCommand::Simulate => {
            let out = require_out(inv)?;
            run_simulate(&exp, &audit, &out, started)
        }
        CliCommand::Coverage => {
            let out = require_out(inv)?;
            run_coverage(&exp, &audit, &out, inv.workers, started)
        }
        CliCommand::Diagnose => {
            let out = require_out(inv)?;
            run_diagnose(&exp, &audit, &out, started)
        }
        CliCommand::PdeCheck => unreachable!(),
    }
}

fn require_out(inv: &CliInvocation) -> Result<PathBuf> {
    inv.out
        .clone()
        .ok_or_else(|| Error::Config("--out is required for this subcommand".into()))
}

fn write_meta(
    out: &Path,
    exp: &Experiment,
    audit: &AuditReport,
    coverage: Option<MetaCoverage>,
    failures: Vec<(usize, String)>,
    started: Instant,
) -> Result<()> {
    let meta = Meta {
        config: &exp.config,
        config_text: canonical_text(&exp.config),
        version: env!("CARGO_PKG_VERSION"),
        audit,
        coverage_summary: coverage,
        failures,
        wall_time_secs: started.elapsed().as_secs_f64(),
    };
    write_json(&out.join("meta.json"), &meta)
}

fn run_audit(audit: &AuditReport, out: Option<&Path>) -> Result<()> {
    let r = &audit.rates;
    println!(
        "rates at alpha={} d={} N={} D={}:",
        r.alpha, r.d, r.n, r.big_d
    );
    println!("  delta_g          = {:.6e}", r.delta_g);
    println!("  s_n              = {:.6e}", r.s_n);
    println!("  delta_h          = {:.6e}", r.delta_h);
    println!("  delta_theta      = {:.6e}", r.delta_theta);
    println!("  sigma_n          = {:.6e}", r.sigma_n);
    println!("  entropy exponent = {:.6}", r.entropy_exponent);
    println!("  u_max            = {:.6e}", r.u_max);
    println!("  kappa            = {:.3}", r.kappa);
    println!("  lambda_min(I_D)  = {:.6e}", audit.lambda_min);
    println!("audited conditions (pass = value below 1):");
    for row in &audit.rows {
        println!(
            "  {:<44} {:.6e}  [{}]",
            row.name,
            row.value,
            if row.pass { "pass" } else { "warn" }
        );
    }
    if let Some(out) = out {
        write_json(&out.join("audit.json"), audit)?;
    }
    Ok(())
}

fn run_simulate(exp: &Experiment, audit: &AuditReport, out: &Path, started: Instant) -> Result<()> {
    let sim = simulate(exp)?;
    println!(
        "simulate: psi_hat = {:?}, R_N = {:.6}, diameter = {:.6}, contains truth = {}, acceptance = {:.3}",
        sim.record.psi_hat, sim.record.r_n, sim.record.diameter, sim.record.hit, sim.acceptance_rate
    );
    let file = EllipsoidFile {
        result: SimulateSummary::new(&sim),
        audit,
    };
    write_json(&out.join("ellipsoid.json"), &file)?;
    write_meta(out, exp, audit, None, Vec::new(), started)
}

fn run_coverage(
    exp: &Experiment,
    audit: &AuditReport,
    out: &Path,
    workers: Option<usize>,
    started: Instant,
) -> Result<()> {
    let report = coverage_study(exp, workers)?;
    println!(
        "coverage: {:.4} +- {:.4} over {} replicates ({} failed), mean diameter {:.6}",
        report.coverage,
        report.binomial_se,
        report.records.len(),
        report.failures.len(),
        report.mean_diameter
    );
    write_coverage_csv(&out.join("coverage.csv"), &report, exp.k())?;
    let summary = MetaCoverage {
        coverage: report.coverage,
        binomial_se: report.binomial_se,
        mean_diameter: report.mean_diameter,
        replicates_ok: report.records.len(),
    };
    write_meta(
        out,
        exp,
        audit,
        Some(summary),
        report.failures.clone(),
        started,
    )
}

fn run_diagnose(exp: &Experiment, audit: &AuditReport, out: &Path, started: Instant) -> Result<()> {
    let mut data_rng = stream_rng(exp.config.seed, SALT_DATA, 0);
    let gen = exp.generate_dataset(&mut data_rng)?;
    let cfg = McmcConfig {
        steps: exp.config.mcmc.steps,
        burnin: exp.config.mcmc.burnin,
        beta: exp.config.mcmc.beta,
        seed: derive_seed(exp.config.seed, SALT_CHAIN, 0),
    };
    let samples = run_pcn(&exp.model, &exp.prior, &gen.dataset, &cfg)?;
    let fp = functional_moments(samples.draws(), &exp.jacobian)?;
    let bundle = exp.information_bundle()?;
    let psi_n = centering_statistic(
        &bundle,
        &exp.psi_truth,
        &exp.grid,
        &gen.dataset,
        Some(&gen.noise),
    )?;
    let report = bvm_diagnostics(&fp, &bundle, &psi_n, exp.config.n)?;
    println!(
        "diagnose: pivot deviation {:.4}, |zbar| {:.4}, healthy = {}",
        report.pivot_max_deviation, report.zbar_max_abs, report.healthy
    );
    let file = DiagnosticsFile {
        diagnostics: &report,
        psi_n: psi_n.iter().cloned().collect(),
        psi_hat: fp.psi_hat().iter().cloned().collect(),
        acceptance_rate: samples.acceptance_rate(),
        beta_used: samples.beta(),
        audit,
    };
    write_json(&out.join("diagnostics.json"), &file)?;
    write_meta(out, exp, audit, None, Vec::new(), started)
}

fn run_pde_check(out: Option<&Path>) -> Result<()> {
    let tables = pde_convergence_tables()?;
    for t in &tables {
        println!("{}", t.name);
        for (m, err) in &t.entries {
            println!("  m = {m:>4}  max error = {err:.6e}");
        }
        let ratios: Vec<String> = t.ratios.iter().map(|r| format!("{r:.3}")).collect();
        println!("  halving ratios: {}", ratios.join(", "));
    }
    if let Some(out) = out {
        write_json(&out.join("pde_check.json"), &tables)?;
    }
    Ok(())
}
