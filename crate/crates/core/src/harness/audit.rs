//! Rate formulas and the numeric audit of the asymptotic-regime conditions.
//!
//! The rates below are formula evaluations at the configured (N, D, α, d);
//! the audit quantities must tend to zero (or stay at most one) along the
//! theory's N → ∞, D = D(N) regime, so "pass = value below one" is a
//! finite-sample health indicator, not a proof.

use serde::Serialize;

use crate::error::Result;
use crate::forward::ModelKind;

use super::Experiment;

/// Contraction, linearization, and entropy rates at the configured scale.
#[derive(Debug, Clone, Serialize)]
pub struct RateBundle {
    pub alpha: u32,
    pub d: usize,
    pub n: usize,
    pub big_d: usize,
    /// forward-map contraction rate N^{−α/(2α+d)}
    pub delta_g: f64,
    /// effective sample size N δ_g²
    pub s_n: f64,
    /// parameter contraction rate δ_g^{(α−1)/(α+1)}
    pub delta_h: f64,
    /// metric-radius rate δ_h^{(α−1)/(α+1)}
    pub delta_theta: f64,
    /// linearization-remainder rate δ_h^{2(α−2)/α}
    pub sigma_n: f64,
    pub g_n: f64,
    pub r_n: f64,
    /// exponent of the entropy integral t^{1 − d/(2α−2)}
    pub entropy_exponent: f64,
    /// upper end of the admissible dimension-growth window
    /// u_max = d²/((4α+2d)(α+6))
    pub u_max: f64,
    /// expected stability exponent: λ_min of the information matrix should
    /// decay no faster than D^{−κ}
    pub kappa: f64,
}

/// One audited quantity with its pass flag (pass = value below one).
#[derive(Debug, Clone, Serialize)]
pub struct AuditRow {
    pub name: String,
    pub value: f64,
    pub pass: bool,
}

/// Rate bundle plus the audited smallness conditions.
#[derive(Debug, Clone, Serialize)]
pub struct AuditReport {
    pub rates: RateBundle,
    pub lambda_min: f64,
    pub rows: Vec<AuditRow>,
}

pub fn rate_bundle(alpha: u32, d: usize, n: usize, big_d: usize, kind: ModelKind) -> RateBundle {
    let a = alpha as f64;
    let df = d as f64;
    let nf = n as f64;
    let delta_g = nf.powf(-a / (2.0 * a + df));
    let s_n = nf * delta_g * delta_g;
    let delta_h = delta_g.powf((a - 1.0) / (a + 1.0));
    let delta_theta = delta_h.powf((a - 1.0) / (a + 1.0));
    let sigma_n = delta_h.powf(2.0 * (a - 2.0) / a);
    let entropy_exponent = 1.0 - df / (2.0 * a - 2.0);
    let u_max = df * df / ((4.0 * a + 2.0 * df) * (a + 6.0));
    let kappa = match kind {
        ModelKind::Linear => 0.0,
        ModelKind::Darcy => 6.0 / df,
        ModelKind::Schrodinger => 4.0 / df,
    };
    RateBundle {
        alpha,
        d,
        n,
        big_d,
        delta_g,
        s_n,
        delta_h,
        delta_theta,
        sigma_n,
        g_n: 1.0,
        r_n: 1.0,
        entropy_exponent,
        u_max,
        kappa,
    }
}

fn audit_rows(rates: &RateBundle, lambda_min: f64) -> Vec<AuditRow> {
    let a = rates.alpha as f64;
    let df = rates.d as f64;
    let n = rates.n as f64;
    let dd = rates.big_d as f64;
    let row = |name: &str, value: f64| AuditRow {
        name: name.to_string(),
        value,
        pass: value < 1.0,
    };
    vec![
        row("n_times_sigma_n_pow_3_2", n * rates.sigma_n.powf(1.5)),
        row("s_n_times_delta_g", rates.s_n * rates.delta_g),
        row(
            "d_pow_alpha_over_d_over_sqrt_s_n_lambda_min",
            dd.powf(a / df) / (rates.s_n.sqrt() * lambda_min),
        ),
    ]
}

/// Evaluate the rate bundle at the experiment scale and audit the
/// smallness conditions, using λ_min of the assembled information matrix.
pub fn condition_audit(exp: &Experiment) -> Result<AuditReport> {
    let rates = rate_bundle(
        exp.config.alpha,
        exp.config.d,
        exp.config.n,
        exp.config.big_d,
        exp.config.model,
    );
    let id = crate::fisher::information_matrix(&exp.model, &exp.theta0_spectral, &exp.basis)?;
    let lambda_min = id
        .symmetric_eigen()
        .eigenvalues
        .iter()
        .cloned()
        .fold(f64::MAX, f64::min);
    let rows = audit_rows(&rates, lambda_min);
    Ok(AuditReport {
        rates,
        lambda_min,
        rows,
    })
}
