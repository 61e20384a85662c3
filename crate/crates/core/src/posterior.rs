//! Truncated Gaussian prior, Gaussian log-likelihood, preconditioned
//! Crank–Nicolson sampling on the spectral coefficients, and the exact
//! conjugate posterior for the linear variant.
//!
//! The prior draws coefficient i as τ_i W_i with W_i standard normal and
//! τ_i = N^{-d/(4α+2d)} λ_i^{-α/2}, so its scale shrinks with the sample
//! size. pCN proposals θ' = √(1−β²) θ + β ξ preserve this prior, and
//! acceptance involves only the likelihood ratio.

use nalgebra::{Cholesky, DMatrix, DVector, Dyn};
use rand::Rng;
use rand_chacha::rand_core::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

use crate::error::{Error, Result};
use crate::forward::ForwardModel;
use crate::spectral::{basis_matrix, Basis, SpectralField};

/// Prior regularity and per-coordinate scales.
#[derive(Debug, Clone)]
pub struct PriorSpec {
    basis: Basis,
    alpha: u32,
    n_data: usize,
    taus: Vec<f64>,
}

impl PriorSpec {
    /// α must exceed 1 + d/2; the sample size enters the coefficient scale.
    pub fn new(basis: &Basis, alpha: u32, n_data: usize) -> Result<PriorSpec> {
        let d = basis.d() as f64;
        if (alpha as f64) <= 1.0 + d / 2.0 {
            return Err(Error::Config(format!(
                "prior regularity alpha = {alpha} must exceed 1 + d/2 = {}",
                1.0 + d / 2.0
            )));
        }
        if n_data == 0 {
            return Err(Error::Config(
                "prior scaling needs a positive sample size".into(),
            ));
        }
        let af = alpha as f64;
        let scale = (n_data as f64).powf(-d / (4.0 * af + 2.0 * d));
        let taus = basis
            .eigenvalues()
            .iter()
            .map(|l| scale * l.powf(-af / 2.0))
            .collect();
        Ok(PriorSpec {
            basis: basis.clone(),
            alpha,
            n_data,
            taus,
        })
    }

    pub fn basis(&self) -> &Basis {
        &self.basis
    }

    pub fn alpha(&self) -> u32 {
        self.alpha
    }

    pub fn n_data(&self) -> usize {
        self.n_data
    }

    /// Per-coordinate prior standard deviations.
    pub fn taus(&self) -> &[f64] {
        &self.taus
    }

    pub fn sample<R: Rng>(&self, rng: &mut R) -> SpectralField {
        let coeffs = self.sample_coeffs(rng);
        SpectralField::new(self.basis.clone(), coeffs.data.into()).unwrap()
    }

    fn sample_coeffs<R: Rng>(&self, rng: &mut R) -> DVector<f64> {
        DVector::from_iterator(
            self.taus.len(),
            self.taus
                .iter()
                .map(|t| t * rng.sample::<f64, _>(StandardNormal)),
        )
    }
}

/// Observed design points and responses.
#[derive(Debug, Clone)]
pub struct Dataset {
    d: usize,
    /// flattened coordinates, d per observation
    points: Vec<f64>,
    ys: Vec<f64>,
    sigma0: f64,
}

impl Dataset {
    pub fn new(d: usize, points: Vec<f64>, ys: Vec<f64>, sigma0: f64) -> Result<Dataset> {
        if points.len() != ys.len() * d {
            return Err(Error::Argument(format!(
                "{} coordinates do not match {} observations in dimension {d}",
                points.len(),
                ys.len()
            )));
        }
        if sigma0 < 0.0 || !sigma0.is_finite() {
            return Err(Error::Argument("noise scale must be nonnegative".into()));
        }
        Ok(Dataset {
            d,
            points,
            ys,
            sigma0,
        })
    }

    pub fn len(&self) -> usize {
        self.ys.len()
    }

    pub fn is_empty(&self) -> bool {
        self.ys.is_empty()
    }

    pub fn d(&self) -> usize {
        self.d
    }

    pub fn points(&self) -> &[f64] {
        &self.points
    }

    pub fn point(&self, i: usize) -> &[f64] {
        &self.points[i * self.d..(i + 1) * self.d]
    }

    pub fn ys(&self) -> &[f64] {
        &self.ys
    }

    pub fn sigma0(&self) -> f64 {
        self.sigma0
    }
}

/// Gaussian log-likelihood −Σ (Y_i − 𝒢_θ(X_i))² / (2σ₀²), up to the
/// additive constant.
pub fn log_likelihood(model: &ForwardModel, theta: &SpectralField, data: &Dataset) -> Result<f64> {
    if data.is_empty() {
        return Ok(0.0);
    }
    if data.sigma0() <= 0.0 {
        return Err(Error::Argument(
            "likelihood needs a positive noise scale".into(),
        ));
    }
    let g = model.forward_eval(theta, data.points())?;
    let ss: f64 = g
        .iter()
        .zip(data.ys())
        .map(|(gi, yi)| (yi - gi) * (yi - gi))
        .sum();
    Ok(-ss / (2.0 * data.sigma0() * data.sigma0()))
}

/// pCN chain settings.
#[derive(Debug, Clone, Copy, PartialEq, serde::Serialize)]
pub struct McmcConfig {
    pub steps: usize,
    pub burnin: usize,
    pub beta: f64,
    pub seed: u64,
}

/// Retained coefficient draws with chain metadata. Draws are stored one per
/// column.
#[derive(Debug, Clone)]
pub struct PosteriorSamples {
    draws: DMatrix<f64>,
    acceptance_rate: f64,
    beta: f64,
    burnin: usize,
    seed: u64,
}

impl PosteriorSamples {
    pub fn from_draws(
        draws: DMatrix<f64>,
        acceptance_rate: f64,
        beta: f64,
        burnin: usize,
        seed: u64,
    ) -> PosteriorSamples {
        PosteriorSamples {
            draws,
            acceptance_rate,
            beta,
            burnin,
            seed,
        }
    }

    /// D × S matrix of retained draws (one column per draw).
    pub fn draws(&self) -> &DMatrix<f64> {
        &self.draws
    }

    pub fn num_draws(&self) -> usize {
        self.draws.ncols()
    }

    pub fn acceptance_rate(&self) -> f64 {
        self.acceptance_rate
    }

    pub fn beta(&self) -> f64 {
        self.beta
    }

    pub fn burnin(&self) -> usize {
        self.burnin
    }

    pub fn seed(&self) -> u64 {
        self.seed
    }
}

const ADAPT_WINDOW: usize = 50;
const ACCEPT_LO: f64 = 0.2;
const ACCEPT_HI: f64 = 0.3;

/// Run a preconditioned Crank–Nicolson chain. The step size adapts toward
/// the [0.2, 0.3] acceptance band during burn-in only, so retained draws
/// come from a fixed kernel; the chain is a pure function of (seed, config).
pub fn run_pcn(
    model: &ForwardModel,
    prior: &PriorSpec,
    data: &Dataset,
    cfg: &McmcConfig,
) -> Result<PosteriorSamples> {
    if cfg.steps <= cfg.burnin {
        return Err(Error::Config(format!(
            "mcmc needs steps > burnin (got {} <= {})",
            cfg.steps, cfg.burnin
        )));
    }
    if !(cfg.beta > 0.0 && cfg.beta <= 1.0) {
        return Err(Error::Config(format!(
            "mcmc beta {} outside (0, 1]",
            cfg.beta
        )));
    }
    let dim = prior.basis().dim();
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);

    let mut log_lik = likelihood_evaluator(model, prior.basis(), data)?;

    let mut current = prior.sample_coeffs(&mut rng);
    let mut current_ll = log_lik(&current)?;
    let mut beta = cfg.beta;

    let retained = cfg.steps - cfg.burnin;
    let mut draws = DMatrix::zeros(dim, retained);
    let mut accepted_total = 0usize;
    let mut accepted_burnin = 0usize;
    let mut window_accepts = 0usize;

    for step in 0..cfg.steps {
        let xi = prior.sample_coeffs(&mut rng);
        let keep = (1.0 - beta * beta).sqrt();
        let proposal = &current * keep + xi * beta;
        let prop_ll = log_lik(&proposal)?;
        let u: f64 = rng.gen();
        let accept = u < (prop_ll - current_ll).exp();
        if accept {
            current = proposal;
            current_ll = prop_ll;
        }

        if step < cfg.burnin {
            if accept {
                accepted_burnin += 1;
                window_accepts += 1;
            }
            if (step + 1) % ADAPT_WINDOW == 0 {
                let rate = window_accepts as f64 / ADAPT_WINDOW as f64;
                if rate < ACCEPT_LO {
                    beta = (beta * 0.8).max(1e-6);
                } else if rate > ACCEPT_HI {
                    beta = (beta * 1.25).min(1.0);
                }
                window_accepts = 0;
            }
            if step + 1 == cfg.burnin && accepted_burnin == 0 && cfg.burnin >= ADAPT_WINDOW {
                return Err(Error::Adaptation(format!(
                    "no proposal accepted in {} burn-in steps; retry with a smaller beta than {}",
                    cfg.burnin, cfg.beta
                )));
            }
        } else {
            if accept {
                accepted_total += 1;
            }
            draws.set_column(step - cfg.burnin, &current);
        }
    }

    Ok(PosteriorSamples {
        draws,
        acceptance_rate: accepted_total as f64 / retained as f64,
        beta,
        burnin: cfg.burnin,
        seed: cfg.seed,
    })
}

/// Build the per-proposal likelihood evaluator. The linear variant reduces
/// to one design-matrix product; the PDE variants cost one solve per
/// proposal plus interpolation at the observation points.
fn likelihood_evaluator<'a>(
    model: &'a ForwardModel,
    basis: &Basis,
    data: &'a Dataset,
) -> Result<Box<dyn FnMut(&DVector<f64>) -> Result<f64> + 'a>> {
    if data.is_empty() {
        return Ok(Box::new(|_| Ok(0.0)));
    }
    if data.sigma0() <= 0.0 {
        return Err(Error::Argument(
            "likelihood needs a positive noise scale".into(),
        ));
    }
    let inv_two_var = 1.0 / (2.0 * data.sigma0() * data.sigma0());
    match model.basis() {
        Some(model_basis) => {
            if model_basis.dim() != basis.dim() {
                return Err(Error::Config(
                    "prior basis does not match model basis".into(),
                ));
            }
            let n = data.len();
            let mut phi = DMatrix::zeros(n, basis.dim());
            for i in 0..n {
                for j in 0..basis.dim() {
                    phi[(i, j)] = basis.eval_eigenfunction(j, data.point(i));
                }
            }
            let y = DVector::from_column_slice(data.ys());
            let mut resid = DVector::zeros(n);
            Ok(Box::new(move |c: &DVector<f64>| {
                resid.copy_from(&y);
                resid.gemv(-1.0, &phi, c, 1.0);
                Ok(-resid.norm_squared() * inv_two_var)
            }))
        }
        None => {
            let grid = *model.grid();
            let bg = basis_matrix(basis, &grid);
            let mut interior = DVector::zeros(grid.interior_len());
            Ok(Box::new(move |c: &DVector<f64>| {
                interior.gemv(1.0, &bg, c, 0.0);
                let th_full = crate::forward::lattice_of_interior(&grid, interior.as_slice());
                let sol = model.solve_lattice(&th_full)?;
                let mut ss = 0.0;
                for i in 0..data.len() {
                    let g = sol.eval(data.point(i));
                    let r = data.ys()[i] - g;
                    ss += r * r;
                }
                Ok(-ss * inv_two_var)
            }))
        }
    }
}

/// Exact conjugate posterior of the linear variant.
pub struct ConjugatePosterior {
    mean: SpectralField,
    cov: DMatrix<f64>,
    precision_chol: Cholesky<f64, Dyn>,
}

impl ConjugatePosterior {
    pub fn mean(&self) -> &SpectralField {
        &self.mean
    }

    pub fn mean_vector(&self) -> DVector<f64> {
        DVector::from_column_slice(self.mean.coeffs())
    }

    pub fn covariance(&self) -> &DMatrix<f64> {
        &self.cov
    }

    /// Exact posterior draws, one per column: mean + L⁻ᵀ z with P = L Lᵀ the
    /// posterior precision.
    pub fn sample_draws<R: Rng>(&self, s: usize, rng: &mut R) -> DMatrix<f64> {
        let d = self.cov.nrows();
        let mean = self.mean_vector();
        let z = DMatrix::from_fn(d, s, |_, _| rng.sample::<f64, _>(StandardNormal));
        let lt = self.precision_chol.l().transpose();
        let mut x = lt
            .solve_upper_triangular(&z)
            .expect("posterior precision factor is nonsingular");
        for j in 0..s {
            let mut col = x.column_mut(j);
            col += &mean;
        }
        x
    }
}

/// Closed-form Gaussian posterior for 𝒢_θ(x) = Σ c_j e_j(x): precision
/// ΦᵀΦ/σ₀² + Λ⁻¹ with Λ the prior covariance, mean  Cov·ΦᵀY/σ₀².
pub fn conjugate_oracle(prior: &PriorSpec, data: &Dataset) -> Result<ConjugatePosterior> {
    if !data.is_empty() && data.sigma0() <= 0.0 {
        return Err(Error::Argument(
            "conjugate posterior needs a positive noise scale".into(),
        ));
    }
    let basis = prior.basis();
    let dim = basis.dim();
    let n = data.len();
    let mut precision = DMatrix::zeros(dim, dim);
    for (j, tau) in prior.taus().iter().enumerate() {
        precision[(j, j)] = 1.0 / (tau * tau);
    }
    let mut pht_y = DVector::zeros(dim);
    if n > 0 {
        let mut phi = DMatrix::zeros(n, dim);
        for i in 0..n {
            for j in 0..dim {
                phi[(i, j)] = basis.eval_eigenfunction(j, data.point(i));
            }
        }
        let inv_var = 1.0 / (data.sigma0() * data.sigma0());
        precision += phi.transpose() * &phi * inv_var;
        pht_y = phi.transpose() * DVector::from_column_slice(data.ys()) * inv_var;
    }
    let chol = Cholesky::new(precision.clone())
        .ok_or_else(|| Error::Numerical("conjugate precision not positive definite".into()))?;
    let cov = chol.inverse();
    let mean_coeffs = chol.solve(&pht_y);
    let mean = SpectralField::new(basis.clone(), mean_coeffs.data.into())?;
    Ok(ConjugatePosterior {
        mean,
        cov,
        precision_chol: chol,
    })
}

/// Posterior law of the functional vector: mean Ψ̂, covariance Σ̂, and the
/// per-draw values they were estimated from.
#[derive(Debug, Clone)]
pub struct FunctionalPosterior {
    psi_hat: DVector<f64>,
    sigma_hat: DMatrix<f64>,
    /// k × S functional values, one column per draw (possibly empty when the
    /// moments are exact).
    per_draw: DMatrix<f64>,
}

impl FunctionalPosterior {
    /// Sample moments from per-draw functional values (needs S ≥ 2).
    pub fn from_per_draw(per_draw: DMatrix<f64>) -> Result<FunctionalPosterior> {
        let s = per_draw.ncols();
        if s < 2 {
            return Err(Error::Argument(format!("need at least 2 draws, got {s}")));
        }
        let k = per_draw.nrows();
        let mut mean = DVector::zeros(k);
        for j in 0..s {
            mean += per_draw.column(j);
        }
        mean /= s as f64;
        let mut centered = per_draw.clone();
        for j in 0..s {
            let mut col = centered.column_mut(j);
            col -= &mean;
        }
        let sigma = &centered * centered.transpose() / (s as f64 - 1.0);
        Ok(FunctionalPosterior {
            psi_hat: mean,
            sigma_hat: sigma,
            per_draw,
        })
    }

    /// Exact moments (no draws attached).
    pub fn from_moments(
        psi_hat: DVector<f64>,
        sigma_hat: DMatrix<f64>,
    ) -> Result<FunctionalPosterior> {
        let k = psi_hat.len();
        if sigma_hat.nrows() != k || sigma_hat.ncols() != k {
            return Err(Error::Argument(
                "covariance shape does not match mean".into(),
            ));
        }
        Ok(FunctionalPosterior {
            psi_hat,
            sigma_hat,
            per_draw: DMatrix::zeros(k, 0),
        })
    }

    /// Replace the moments while keeping the draws; for synthetic studies
    /// that pin the shape matrix exactly.
    pub fn override_moments(&mut self, psi_hat: DVector<f64>, sigma_hat: DMatrix<f64>) {
        self.psi_hat = psi_hat;
        self.sigma_hat = sigma_hat;
    }

    pub fn k(&self) -> usize {
        self.psi_hat.len()
    }

    pub fn num_draws(&self) -> usize {
        self.per_draw.ncols()
    }

    pub fn psi_hat(&self) -> &DVector<f64> {
        &self.psi_hat
    }

    pub fn sigma_hat(&self) -> &DMatrix<f64> {
        &self.sigma_hat
    }

    pub fn per_draw(&self) -> &DMatrix<f64> {
        &self.per_draw
    }
}

/// Per-draw functionals Ψθ = J c and their sample moments.
pub fn functional_moments(
    draws: &DMatrix<f64>,
    jacobian: &DMatrix<f64>,
) -> Result<FunctionalPosterior> {
    if jacobian.ncols() != draws.nrows() {
        return Err(Error::Argument(format!(
            "jacobian width {} does not match coefficient dimension {}",
            jacobian.ncols(),
            draws.nrows()
        )));
    }
    FunctionalPosterior::from_per_draw(jacobian * draws)
}
