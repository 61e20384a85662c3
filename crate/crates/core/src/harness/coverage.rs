//! Coverage Monte Carlo and diameter scaling studies.
//!
//! Replicates form a parallel map over the replicate index; every stream is
//! derived from the master seed, so reports are identical for any worker
//! count. The linear variant uses the exact conjugate posterior so coverage
//! error isolates the ellipsoid construction; the PDE variants run pCN.

use rayon::prelude::*;

use crate::credsets::{ellipsoid_case1, ellipsoid_case2, CredibleEllipsoid};
use crate::error::{Error, Result};
use crate::forward::ModelKind;
use crate::posterior::{
    conjugate_oracle, functional_moments, run_pcn, FunctionalPosterior, McmcConfig,
};
use crate::rng::{derive_seed, stream_rng, SALT_CHAIN, SALT_DATA, SALT_EXACT};

use super::{CredCase, Experiment, GeneratedData};

/// One coverage replicate.
#[derive(Debug, Clone, serde::Serialize)]
pub struct ReplicateRecord {
    pub replicate: usize,
    pub seed: u64,
    pub hit: bool,
    pub r_n: f64,
    pub diameter: f64,
    pub psi_hat: Vec<f64>,
    pub psi_true: Vec<f64>,
}

/// Aggregated coverage study.
#[derive(Debug, Clone, serde::Serialize)]
pub struct CoverageReport {
    pub records: Vec<ReplicateRecord>,
    /// (replicate index, error message) of excluded replicates
    pub failures: Vec<(usize, String)>,
    pub coverage: f64,
    pub binomial_se: f64,
    pub mean_diameter: f64,
}

/// Outcome of one end-to-end fit: dataset, posterior, ellipsoid.
pub struct SimulationResult {
    pub record: ReplicateRecord,
    pub acceptance_rate: f64,
    pub beta_used: f64,
    pub degenerate: bool,
}

/// Posterior functional law for one replicate. The linear variant is exact
/// conjugate (sampling only when the calibration needs draws); PDE variants
/// run the configured pCN chain.
fn replicate_posterior(
    exp: &Experiment,
    gen: &GeneratedData,
    r: u64,
) -> Result<FunctionalPosterior> {
    match exp.config.model {
        ModelKind::Linear => {
            let post = conjugate_oracle(&exp.prior, &gen.dataset)?;
            match exp.config.cred_case {
                CredCase::One => {
                    let psi_hat = &exp.jacobian * post.mean_vector();
                    let sigma_hat = &exp.jacobian * post.covariance() * exp.jacobian.transpose();
                    FunctionalPosterior::from_moments(psi_hat, sigma_hat)
                }
                CredCase::Two => {
                    let s = exp.config.mcmc.steps - exp.config.mcmc.burnin;
                    let mut rng = stream_rng(exp.config.seed, SALT_EXACT, r);
                    let draws = post.sample_draws(s, &mut rng);
                    functional_moments(&draws, &exp.jacobian)
                }
            }
        }
        _ => {
            let cfg = McmcConfig {
                steps: exp.config.mcmc.steps,
                burnin: exp.config.mcmc.burnin,
                beta: exp.config.mcmc.beta,
                seed: derive_seed(exp.config.seed, SALT_CHAIN, r),
            };
            let samples = run_pcn(&exp.model, &exp.prior, &gen.dataset, &cfg)?;
            functional_moments(samples.draws(), &exp.jacobian)
        }
    }
}

fn build_ellipsoid(exp: &Experiment, fp: &FunctionalPosterior) -> Result<CredibleEllipsoid> {
    match exp.config.cred_case {
        CredCase::One => ellipsoid_case1(fp, exp.config.cred_level),
        CredCase::Two => ellipsoid_case2(fp, exp.config.cred_level),
    }
}

fn run_replicate(exp: &Experiment, r: usize) -> Result<ReplicateRecord> {
    let mut data_rng = stream_rng(exp.config.seed, SALT_DATA, r as u64);
    let gen = exp.generate_dataset(&mut data_rng)?;
    let fp = replicate_posterior(exp, &gen, r as u64)?;
    let ell = build_ellipsoid(exp, &fp)?;
    Ok(ReplicateRecord {
        replicate: r,
        seed: derive_seed(exp.config.seed, SALT_DATA, r as u64),
        hit: ell.contains(&exp.psi_truth),
        r_n: ell.radius(),
        diameter: ell.diameter(),
        psi_hat: fp.psi_hat().iter().cloned().collect(),
        psi_true: exp.psi_truth.iter().cloned().collect(),
    })
}

/// Frequentist coverage over fresh datasets. Failed replicates are recorded
/// and excluded; more than 2% of them fails the whole study.
pub fn coverage_study(exp: &Experiment, workers: Option<usize>) -> Result<CoverageReport> {
    let m = exp.config.replicates;
    let run_all = || -> Vec<std::result::Result<ReplicateRecord, String>> {
        (0..m)
            .into_par_iter()
            .map(|r| run_replicate(exp, r).map_err(|e| e.to_string()))
            .collect()
    };
    let results = match workers {
        Some(w) => {
            let pool = rayon::ThreadPoolBuilder::new()
                .num_threads(w)
                .build()
                .map_err(|e| Error::Config(format!("cannot build worker pool: {e}")))?;
            pool.install(run_all)
        }
        None => run_all(),
    };
    let mut records = Vec::with_capacity(m);
    let mut failures = Vec::new();
    for (r, res) in results.into_iter().enumerate() {
        match res {
            Ok(rec) => records.push(rec),
            Err(msg) => failures.push((r, msg)),
        }
    }
    if failures.len() * 50 > m {
        return Err(Error::Numerical(format!(
            "{} of {m} replicates failed (more than 2%); first failure: {}",
            failures.len(),
            failures[0].1
        )));
    }
    let n_ok = records.len();
    if n_ok == 0 {
        return Err(Error::Numerical("all replicates failed".into()));
    }
    let hits = records.iter().filter(|r| r.hit).count();
    let coverage = hits as f64 / n_ok as f64;
    let binomial_se = (coverage * (1.0 - coverage) / n_ok as f64).sqrt();
    let mean_diameter = records.iter().map(|r| r.diameter).sum::<f64>() / n_ok as f64;
    Ok(CoverageReport {
        records,
        failures,
        coverage,
        binomial_se,
        mean_diameter,
    })
}

/// One dataset, one pCN posterior, one ellipsoid — the `simulate`
/// subcommand. Runs the configured chain for every model variant.
pub fn simulate(exp: &Experiment) -> Result<SimulationResult> {
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
    let ell = build_ellipsoid(exp, &fp)?;
    Ok(SimulationResult {
        record: ReplicateRecord {
            replicate: 0,
            seed: derive_seed(exp.config.seed, SALT_DATA, 0),
            hit: ell.contains(&exp.psi_truth),
            r_n: ell.radius(),
            diameter: ell.diameter(),
            psi_hat: fp.psi_hat().iter().cloned().collect(),
            psi_true: exp.psi_truth.iter().cloned().collect(),
        },
        acceptance_rate: samples.acceptance_rate(),
        beta_used: samples.beta(),
        degenerate: ell.degenerate(),
    })
}

/// Compensated ellipsoid diameters diam·√N/D^{3/d} over a truncation grid.
/// Each truncation runs one full replicate of the base configuration.
pub fn diameter_scaling_study(
    base: &super::ExperimentConfig,
    truncations: &[usize],
) -> Result<Vec<(usize, f64)>> {
    let mut out = Vec::with_capacity(truncations.len());
    for &dd in truncations {
        let mut cfg = base.clone();
        cfg.big_d = dd;
        let exp = cfg.build()?;
        let rec = run_replicate(&exp, 0)?;
        let compensated =
            rec.diameter * (cfg.n as f64).sqrt() / (dd as f64).powf(3.0 / cfg.d as f64);
        out.push((dd, compensated));
    }
    Ok(out)
}
