//! Experiment orchestration: configuration, data generation, posterior
//! diagnostics, coverage Monte Carlo, rate audits, and result persistence.

mod audit;
mod coverage;
pub mod io;

pub use audit::{condition_audit, rate_bundle, AuditReport, AuditRow, RateBundle};
pub use coverage::{
    coverage_study, diameter_scaling_study, simulate, CoverageReport, ReplicateRecord,
    SimulationResult,
};

use nalgebra::{DMatrix, DVector};
use rand::Rng;
use rand_distr::StandardNormal;

use crate::error::{Error, Result};
use crate::fisher::{functional_jacobian, FunctionalSet, InformationBundle};
use crate::forward::{interp_lattice, lattice_of_interior, ForwardModel, ModelKind, PdeSolution};
use crate::posterior::{Dataset, FunctionalPosterior, PriorSpec};
use crate::spectral::{check_nyquist, Basis, FieldSpec, Grid, SpectralField, NYQUIST_FACTOR};

/// Radius calibration choice for configured experiments.
#[derive(Debug, Clone, Copy, PartialEq, Eq, serde::Serialize)]
pub enum CredCase {
    One,
    Two,
}

/// Chain settings as configured; the chain seed is derived from the
/// experiment master seed.
#[derive(Debug, Clone, Copy, PartialEq, serde::Serialize)]
pub struct McmcSettings {
    pub steps: usize,
    pub burnin: usize,
    pub beta: f64,
}

/// Full description of one experiment; every run artifact is a pure
/// function of this value.
#[derive(Debug, Clone, PartialEq, serde::Serialize)]
pub struct ExperimentConfig {
    pub model: ModelKind,
    pub d: usize,
    pub big_d: usize,
    pub alpha: u32,
    pub sigma0: f64,
    pub n: usize,
    pub grid_m: usize,
    pub theta0: FieldSpec,
    pub psis: Vec<FieldSpec>,
    pub mcmc: McmcSettings,
    pub cred_level: f64,
    pub cred_case: CredCase,
    pub replicates: usize,
    pub seed: u64,
}

impl ExperimentConfig {
    /// The smallest Nyquist-safe grid for (d, D), floored for solver
    /// accuracy at low truncations.
    pub fn default_grid_m(d: usize, big_d: usize) -> Result<usize> {
        let basis = Basis::new(d, big_d)?;
        Ok((NYQUIST_FACTOR * basis.max_frequency()).max(128))
    }

    pub fn validate(&self) -> Result<()> {
        if self.d != 1 && self.d != 2 {
            return Err(Error::Config(format!("d must be 1 or 2, got {}", self.d)));
        }
        if self.big_d == 0 {
            return Err(Error::Config("D must be positive".into()));
        }
        if self.sigma0 <= 0.0 || !self.sigma0.is_finite() {
            return Err(Error::Config(format!(
                "sigma0 must be positive, got {}",
                self.sigma0
            )));
        }
        if self.n == 0 {
            return Err(Error::Config("N must be positive".into()));
        }
        if !(0.0 < self.cred_level && self.cred_level < 1.0) {
            return Err(Error::Config(format!(
                "cred.level {} outside (0,1)",
                self.cred_level
            )));
        }
        if self.mcmc.steps <= self.mcmc.burnin {
            return Err(Error::Config(format!(
                "mcmc.steps {} must exceed mcmc.burnin {}",
                self.mcmc.steps, self.mcmc.burnin
            )));
        }
        if !(self.mcmc.beta > 0.0 && self.mcmc.beta <= 1.0) {
            return Err(Error::Config(format!(
                "mcmc.beta {} outside (0,1]",
                self.mcmc.beta
            )));
        }
        if self.replicates == 0 {
            return Err(Error::Config("coverage.replicates must be positive".into()));
        }
        if self.psis.is_empty() {
            return Err(Error::Config("at least one functional is required".into()));
        }
        Ok(())
    }

    pub fn build(&self) -> Result<Experiment> {
        self.validate()?;
        let basis = Basis::new(self.d, self.big_d)?;
        let grid = Grid::new(self.d, self.grid_m)?;
        check_nyquist(&basis, &grid)?;
        let model = match self.model {
            ModelKind::Linear => ForwardModel::linear(basis.clone(), grid, self.sigma0)?,
            ModelKind::Darcy => ForwardModel::darcy_default(grid, self.sigma0)?,
            ModelKind::Schrodinger => ForwardModel::schrodinger_default(grid, self.sigma0)?,
        };
        let prior = PriorSpec::new(&basis, self.alpha, self.n)?;
        let fs = FunctionalSet::new(self.psis.clone(), &basis, &grid)?;
        let jacobian = functional_jacobian(&fs, &basis)?;
        let theta0_spectral = self.theta0.to_spectral(&basis, &grid)?;

        // ground-truth functional values by quadrature against the original
        // fields (not their projections)
        let theta0_values = self.theta0.eval_on_grid(&basis, &grid);
        let k = fs.k();
        let mut psi_truth = DVector::zeros(k);
        for (i, spec) in fs.specs().iter().enumerate() {
            let psi_values = spec.eval_on_grid(&basis, &grid);
            psi_truth[i] = grid.inner_product(&theta0_values, &psi_values);
        }

        // both field kinds vanish on the boundary (sines exactly, the bump
        // by compact support), so the zero-boundary embedding is exact
        let truth = match self.model {
            ModelKind::Linear => TruthForward::Field,
            _ => TruthForward::Solution(
                model.solve_lattice(&lattice_of_interior(&grid, &theta0_values))?,
            ),
        };

        Ok(Experiment {
            config: self.clone(),
            basis,
            grid,
            model,
            prior,
            fs,
            jacobian,
            theta0_spectral,
            psi_truth,
            truth,
        })
    }
}

enum TruthForward {
    /// linear variant: 𝒢_{θ₀}(x) = θ₀(x), evaluated from the field spec
    Field,
    /// PDE variants: u_{θ₀} solved once, interpolated per replicate
    Solution(PdeSolution),
}

/// A built experiment: basis, grid, model, prior, functionals, and the
/// ground-truth forward map.
pub struct Experiment {
    pub config: ExperimentConfig,
    pub basis: Basis,
    pub grid: Grid,
    pub model: ForwardModel,
    pub prior: PriorSpec,
    pub fs: FunctionalSet,
    pub jacobian: DMatrix<f64>,
    pub theta0_spectral: SpectralField,
    pub psi_truth: DVector<f64>,
    truth: TruthForward,
}

/// Dataset plus the simulation noise retained for diagnostics.
pub struct GeneratedData {
    pub dataset: Dataset,
    pub noise: Vec<f64>,
}

impl Experiment {
    pub fn k(&self) -> usize {
        self.fs.k()
    }

    /// 𝒢_{θ₀} at flattened points.
    pub fn truth_eval(&self, points: &[f64]) -> Vec<f64> {
        match &self.truth {
            TruthForward::Field => points
                .chunks(self.grid.d())
                .map(|x| self.config.theta0.eval(&self.basis, x))
                .collect(),
            TruthForward::Solution(sol) => {
                points.chunks(self.grid.d()).map(|x| sol.eval(x)).collect()
            }
        }
    }

    /// Draw a dataset: X_i uniform on (0,1)^d, ε_i ~ N(0, σ₀²),
    /// Y_i = 𝒢_{θ₀}(X_i) + ε_i.
    pub fn generate_dataset<R: Rng>(&self, rng: &mut R) -> Result<GeneratedData> {
        let n = self.config.n;
        let d = self.grid.d();
        let mut points = vec![0.0; n * d];
        for p in points.iter_mut() {
            *p = rng.gen::<f64>();
        }
        let sigma0 = self.config.sigma0;
        let mut noise = vec![0.0; n];
        for e in noise.iter_mut() {
            *e = sigma0 * rng.sample::<f64, _>(StandardNormal);
        }
        let g = self.truth_eval(&points);
        let ys: Vec<f64> = g.iter().zip(&noise).map(|(gi, ei)| gi + ei).collect();
        Ok(GeneratedData {
            dataset: Dataset::new(d, points, ys, sigma0)?,
            noise,
        })
    }

    pub fn information_bundle(&self) -> Result<InformationBundle> {
        InformationBundle::build(
            &self.model,
            &self.theta0_spectral,
            &self.basis,
            &self.fs,
            self.config.n,
        )
    }
}

/// Centering statistic Ψ_N = Ψθ₀ + (1/N) Σ ⟨ε_i, (𝕀ψ̄_D)(X_i)⟩ with the
/// noise inner product carrying the 1/σ₀² factor. Needs the stored
/// simulation noise.
pub fn centering_statistic(
    bundle: &InformationBundle,
    psi_truth: &DVector<f64>,
    grid: &Grid,
    dataset: &Dataset,
    noise: Option<&[f64]>,
) -> Result<DVector<f64>> {
    let noise = noise.ok_or_else(|| {
        Error::DiagnosticUnavailable(
            "centering statistic needs the simulation noise, which this dataset does not carry"
                .into(),
        )
    })?;
    if noise.len() != dataset.len() {
        return Err(Error::Argument(
            "noise length does not match dataset".into(),
        ));
    }
    let sigma0 = dataset.sigma0();
    if sigma0 <= 0.0 {
        return Err(Error::Argument(
            "centering statistic needs a positive noise scale".into(),
        ));
    }
    let n = dataset.len() as f64;
    let k = psi_truth.len();
    let mut out = psi_truth.clone();
    for j in 0..k {
        let image = lattice_of_interior(grid, &bundle.representer_images[j]);
        let mut acc = 0.0;
        for i in 0..dataset.len() {
            acc += noise[i] * interp_lattice(grid, &image, dataset.point(i));
        }
        out[j] += acc / (n * sigma0 * sigma0);
    }
    Ok(out)
}

/// Posterior normality diagnostics of the renormalized draws
/// Z = √N i_D^{1/2} (Ψθ − Ψ_N).
#[derive(Debug, Clone, serde::Serialize)]
pub struct DiagnosticsReport {
    /// N i_D^{1/2} Σ̂_N i_D^{1/2}, row-major
    pub pivot: Vec<Vec<f64>>,
    /// mean of the Z draws
    pub zbar: Vec<f64>,
    /// √N i_D^{1/2}(Ψ̂_N − Ψ_N); equals zbar up to rounding
    pub centering_gap: Vec<f64>,
    pub skewness: Vec<f64>,
    pub excess_kurtosis: Vec<f64>,
    pub pivot_max_deviation: f64,
    pub zbar_max_abs: f64,
    /// pivot within 0.2 of the identity and |Z̄| below 0.2 per coordinate
    pub healthy: bool,
}

pub fn bvm_diagnostics(
    fp: &FunctionalPosterior,
    bundle: &InformationBundle,
    psi_n: &DVector<f64>,
    n_data: usize,
) -> Result<DiagnosticsReport> {
    let s = fp.num_draws();
    if s < 2 {
        return Err(Error::Argument(
            "diagnostics need at least 2 posterior draws".into(),
        ));
    }
    let k = fp.k();
    let sqrt_n = (n_data as f64).sqrt();
    let pivot_m = &bundle.id_sqrt * fp.sigma_hat() * &bundle.id_sqrt * (n_data as f64);
    let pivot_m = 0.5 * (&pivot_m + pivot_m.transpose());
    let mut z = fp.per_draw().clone();
    for j in 0..s {
        let mut col = z.column_mut(j);
        col -= psi_n;
    }
    let z = (&bundle.id_sqrt * z) * sqrt_n;
    let mut zbar = DVector::zeros(k);
    for j in 0..s {
        zbar += z.column(j);
    }
    zbar /= s as f64;
    let mut skewness = vec![0.0; k];
    let mut excess_kurtosis = vec![0.0; k];
    for i in 0..k {
        let m = zbar[i];
        let (mut m2, mut m3, mut m4) = (0.0, 0.0, 0.0);
        for v in z.row(i).iter() {
            let c = v - m;
            let c2 = c * c;
            m2 += c2;
            m3 += c2 * c;
            m4 += c2 * c2;
        }
        m2 /= s as f64;
        m3 /= s as f64;
        m4 /= s as f64;
        skewness[i] = m3 / m2.powf(1.5);
        excess_kurtosis[i] = m4 / (m2 * m2) - 3.0;
    }
    let centering_gap = &bundle.id_sqrt * (fp.psi_hat() - psi_n) * sqrt_n;
    let mut pivot_dev = 0.0f64;
    for i in 0..k {
        for j in 0..k {
            let target = if i == j { 1.0 } else { 0.0 };
            pivot_dev = pivot_dev.max((pivot_m[(i, j)] - target).abs());
        }
    }
    let zbar_max = zbar.amax();
    Ok(DiagnosticsReport {
        pivot: (0..k)
            .map(|i| (0..k).map(|j| pivot_m[(i, j)]).collect())
            .collect(),
        zbar: zbar.iter().cloned().collect(),
        centering_gap: centering_gap.iter().cloned().collect(),
        skewness,
        excess_kurtosis,
        pivot_max_deviation: pivot_dev,
        zbar_max_abs: zbar_max,
        healthy: pivot_dev <= 0.2 && zbar_max <= 0.2,
    })
}

/// Manufactured-solution convergence table for the CLI PDE check.
#[derive(Debug, Clone, serde::Serialize)]
pub struct ConvergenceTable {
    pub name: String,
    /// (interior points per axis, max-norm error)
    pub entries: Vec<(usize, f64)>,
    /// error ratios between successive refinements
    pub ratios: Vec<f64>,
}

/// Convergence under grid halving (h = 1/16 down to 1/128) for the
/// manufactured Darcy solutions and the constant-coefficient Schrödinger
/// solution.
pub fn pde_convergence_tables() -> Result<Vec<ConvergenceTable>> {
    use std::f64::consts::PI;
    let ms = [15usize, 31, 63, 127];
    let basis = Basis::new(1, 2)?;

    let mut tables = Vec::new();

    let mut darcy_sin = Vec::new();
    for &m in &ms {
        let grid = Grid::new(1, m)?;
        let model =
            ForwardModel::darcy_unchecked(grid, 1.0, |x| -PI * PI * (PI * x[0]).sin(), |_| 0.0)?;
        let sol = model.solve(&SpectralField::zero(basis.clone()))?;
        darcy_sin.push((m, max_err(&grid, |x| sol.eval(&[x]), |x| (PI * x).sin())));
    }
    tables.push(table("darcy theta=0, u=sin(pi x)", darcy_sin));

    let mut darcy_var = Vec::new();
    for &m in &ms {
        let grid = Grid::new(1, m)?;
        let model = ForwardModel::darcy_unchecked(
            grid,
            1.0,
            |x| x[0].exp() * (PI * (PI * x[0]).cos() - PI * PI * (PI * x[0]).sin()),
            |_| 0.0,
        )?;
        let theta: Vec<f64> = (0..crate::forward::lattice_len(&grid))
            .map(|q| crate::forward::lattice_point(&grid, q)[0])
            .collect();
        let sol = model.solve_lattice(&theta)?;
        darcy_var.push((m, max_err(&grid, |x| sol.eval(&[x]), |x| (PI * x).sin())));
    }
    tables.push(table("darcy theta=x, u=sin(pi x)", darcy_var));

    let mut schrod = Vec::new();
    for &m in &ms {
        let grid = Grid::new(1, m)?;
        let model = ForwardModel::schrodinger_default(grid, 1.0)?;
        let theta = vec![(0.5f64).ln(); crate::forward::lattice_len(&grid)];
        let sol = model.solve_lattice(&theta)?;
        schrod.push((
            m,
            max_err(
                &grid,
                |x| sol.eval(&[x]),
                |x| (x - 0.5).cosh() / (0.5f64).cosh(),
            ),
        ));
    }
    tables.push(table("schrodinger exp(theta)=1/2, g=1", schrod));

    Ok(tables)
}

fn max_err(grid: &Grid, approx: impl Fn(f64) -> f64, exact: impl Fn(f64) -> f64) -> f64 {
    (0..grid.interior_len())
        .map(|p| {
            let x = grid.interior_point(p)[0];
            (approx(x) - exact(x)).abs()
        })
        .fold(0.0, f64::max)
}

fn table(name: &str, entries: Vec<(usize, f64)>) -> ConvergenceTable {
    let ratios = entries.windows(2).map(|w| w[0].1 / w[1].1).collect();
    ConvergenceTable {
        name: name.to_string(),
        entries,
        ratios,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::{stream_rng, SALT_DATA};
    use approx::assert_relative_eq;
    use nalgebra::DMatrix;
    use rand_chacha::rand_core::SeedableRng;
    use rand_chacha::ChaCha8Rng;
    use rand_distr::StandardNormal;

    pub(super) fn linear_config() -> ExperimentConfig {
        ExperimentConfig {
            model: ModelKind::Linear,
            d: 1,
            big_d: 8,
            alpha: 2,
            sigma0: 1.0,
            n: 500,
            grid_m: 128,
            theta0: FieldSpec::Coeffs(vec![0.5, -0.25]),
            psis: vec![FieldSpec::Coeffs(vec![1.0])],
            mcmc: McmcSettings {
                steps: 4000,
                burnin: 1000,
                beta: 0.5,
            },
            cred_level: 0.9,
            cred_case: CredCase::One,
            replicates: 8,
            seed: 7,
        }
    }

    #[test]
    fn dataset_generation_moments_and_determinism() {
        let exp = linear_config().build().unwrap();
        let mut rng = stream_rng(3, SALT_DATA, 0);
        let gen = exp.generate_dataset(&mut rng).unwrap();
        assert_eq!(gen.dataset.len(), 500);
        assert_eq!(gen.noise.len(), 500);
        // identical stream reproduces bitwise
        let mut rng2 = stream_rng(3, SALT_DATA, 0);
        let gen2 = exp.generate_dataset(&mut rng2).unwrap();
        assert_eq!(gen.dataset.ys(), gen2.dataset.ys());
        assert_eq!(gen.dataset.points(), gen2.dataset.points());
        // Y − G(θ0) equals the stored noise
        let g = exp.truth_eval(gen.dataset.points());
        for i in 0..gen.dataset.len() {
            assert_relative_eq!(gen.dataset.ys()[i] - g[i], gen.noise[i], epsilon = 1e-14);
        }
    }

    #[test]
    fn noise_mean_within_clt_band() {
        let mut cfg = linear_config();
        cfg.n = 100_000;
        let exp = cfg.build().unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        let gen = exp.generate_dataset(&mut rng).unwrap();
        let mean: f64 = gen.noise.iter().sum::<f64>() / gen.noise.len() as f64;
        let bound = 3.0 * exp.config.sigma0 / (gen.noise.len() as f64).sqrt();
        assert!(mean.abs() <= bound, "noise mean {mean} outside {bound}");
    }

    #[test]
    fn zero_noise_scale_reproduces_forward_values() {
        let mut cfg = linear_config();
        cfg.sigma0 = 1e-300; // effectively zero while satisfying positivity
        let exp = cfg.build().unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        let gen = exp.generate_dataset(&mut rng).unwrap();
        let g = exp.truth_eval(gen.dataset.points());
        for i in 0..gen.dataset.len() {
            assert_relative_eq!(gen.dataset.ys()[i], g[i], epsilon = 1e-12);
        }
    }

    #[test]
    fn centering_statistic_with_zero_noise_is_truth() {
        let exp = linear_config().build().unwrap();
        let bundle = exp.information_bundle().unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let gen = exp.generate_dataset(&mut rng).unwrap();
        let zeros = vec![0.0; gen.dataset.len()];
        let psi_n = centering_statistic(
            &bundle,
            &exp.psi_truth,
            &exp.grid,
            &gen.dataset,
            Some(&zeros),
        )
        .unwrap();
        assert_relative_eq!(psi_n[0], exp.psi_truth[0], epsilon = 1e-12);
    }

    #[test]
    fn centering_statistic_requires_noise() {
        let exp = linear_config().build().unwrap();
        let bundle = exp.information_bundle().unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let gen = exp.generate_dataset(&mut rng).unwrap();
        let err = centering_statistic(&bundle, &exp.psi_truth, &exp.grid, &gen.dataset, None);
        assert!(matches!(err, Err(Error::DiagnosticUnavailable(_))));
    }

    #[test]
    fn centering_statistic_linear_identity_model_reduces_to_noise_average() {
        // linear model, ψ = e₁, [I_D] = I: Ψ_N − Ψθ₀ = (1/N) Σ ε_i e₁(X_i)
        let exp = linear_config().build().unwrap();
        let bundle = exp.information_bundle().unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(9);
        let gen = exp.generate_dataset(&mut rng).unwrap();
        let psi_n = centering_statistic(
            &bundle,
            &exp.psi_truth,
            &exp.grid,
            &gen.dataset,
            Some(&gen.noise),
        )
        .unwrap();
        let mut expected = exp.psi_truth[0];
        for i in 0..gen.dataset.len() {
            expected += gen.noise[i] * exp.basis.eval_eigenfunction(0, gen.dataset.point(i))
                / gen.dataset.len() as f64;
        }
        // the image is interpolated off the grid, so agreement is O(h²)
        assert_relative_eq!(psi_n[0], expected, max_relative = 1e-4);
    }

    #[test]
    fn centering_variance_matches_renormalized_covariance() {
        // 𝕍(√N (Ψ_N − Ψθ₀)) ≈ i_D⁻¹ over replicates
        let mut cfg = linear_config();
        cfg.n = 400;
        let exp = cfg.build().unwrap();
        let bundle = exp.information_bundle().unwrap();
        let reps = 1000;
        let mut vals = Vec::with_capacity(reps);
        for r in 0..reps {
            let mut rng = stream_rng(17, SALT_DATA, r as u64);
            let gen = exp.generate_dataset(&mut rng).unwrap();
            let psi_n = centering_statistic(
                &bundle,
                &exp.psi_truth,
                &exp.grid,
                &gen.dataset,
                Some(&gen.noise),
            )
            .unwrap();
            vals.push((exp.config.n as f64).sqrt() * (psi_n[0] - exp.psi_truth[0]));
        }
        let mean: f64 = vals.iter().sum::<f64>() / reps as f64;
        let var: f64 =
            vals.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / (reps as f64 - 1.0);
        let target = bundle.id_inv[(0, 0)];
        assert!(
            (var - target).abs() <= 0.15 * target,
            "variance {var} vs renormalized {target}"
        );
    }

    #[test]
    fn synthetic_gaussian_draws_give_healthy_diagnostics() {
        let exp = linear_config().build().unwrap();
        let bundle = exp.information_bundle().unwrap();
        let n = exp.config.n;
        // draws exactly N(Ψ_N, Σ_N) with Σ_N = i_D⁻¹/N
        let psi_n = DVector::from_element(1, 0.3);
        let sd = (bundle.sigma_n[(0, 0)]).sqrt();
        let mut rng = ChaCha8Rng::seed_from_u64(31);
        let s = 200_000;
        let per_draw = DMatrix::from_fn(1, s, |_, _| {
            psi_n[0] + sd * rng.sample::<f64, _>(StandardNormal)
        });
        let fp = FunctionalPosterior::from_per_draw(per_draw).unwrap();
        let report = bvm_diagnostics(&fp, &bundle, &psi_n, n).unwrap();
        assert!(
            report.pivot_max_deviation < 0.05,
            "pivot dev {}",
            report.pivot_max_deviation
        );
        assert!(report.zbar_max_abs < 0.05);
        assert!(report.healthy);
        assert!(report.skewness[0].abs() < 0.05);
        assert!(report.excess_kurtosis[0].abs() < 0.1);
        assert_relative_eq!(report.zbar[0], report.centering_gap[0], epsilon = 1e-8);
    }

    #[test]
    fn diagnostics_shift_moves_zbar_not_pivot() {
        let exp = linear_config().build().unwrap();
        let bundle = exp.information_bundle().unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(37);
        let s = 5000;
        let per_draw = DMatrix::from_fn(1, s, |_, _| rng.sample::<f64, _>(StandardNormal));
        let fp = FunctionalPosterior::from_per_draw(per_draw.clone()).unwrap();
        let psi_n = DVector::zeros(1);
        let base = bvm_diagnostics(&fp, &bundle, &psi_n, exp.config.n).unwrap();
        let shifted = per_draw.map(|v| v + 0.5);
        let fp2 = FunctionalPosterior::from_per_draw(shifted).unwrap();
        let rep2 = bvm_diagnostics(&fp2, &bundle, &psi_n, exp.config.n).unwrap();
        let delta = (exp.config.n as f64).sqrt() * bundle.id_sqrt[(0, 0)] * 0.5;
        assert_relative_eq!(rep2.zbar[0], base.zbar[0] + delta, max_relative = 1e-8);
        assert_relative_eq!(rep2.pivot[0][0], base.pivot[0][0], max_relative = 1e-10);
    }

    #[test]
    fn pivot_collapses_to_n_sigma_for_identity_information() {
        // k = 1 identity model: pivot = N Σ̂ when i_D = 1
        let exp = linear_config().build().unwrap();
        let bundle = exp.information_bundle().unwrap();
        assert_relative_eq!(bundle.id_sqrt[(0, 0)], 1.0, epsilon = 1e-8);
        let draws = DMatrix::from_row_slice(1, 4, &[0.1, 0.2, 0.3, 0.4]);
        let fp = FunctionalPosterior::from_per_draw(draws).unwrap();
        let psi_n = DVector::zeros(1);
        let rep = bvm_diagnostics(&fp, &bundle, &psi_n, exp.config.n).unwrap();
        assert_relative_eq!(
            rep.pivot[0][0],
            exp.config.n as f64 * fp.sigma_hat()[(0, 0)],
            max_relative = 1e-8
        );
    }

    #[test]
    fn convergence_tables_second_order() {
        let tables = pde_convergence_tables().unwrap();
        assert_eq!(tables.len(), 3);
        for t in &tables {
            for r in &t.ratios {
                assert!((3.5..=4.5).contains(r), "{}: ratios {:?}", t.name, t.ratios);
            }
        }
    }

    #[test]
    fn config_validation_catches_errors() {
        let good = linear_config();
        assert!(good.validate().is_ok());
        let mut bad = good.clone();
        bad.cred_level = 1.2;
        assert!(bad.validate().is_err());
        let mut bad = good.clone();
        bad.mcmc.steps = bad.mcmc.burnin;
        assert!(bad.validate().is_err());
        let mut bad = good.clone();
        bad.psis.clear();
        assert!(bad.validate().is_err());
        let mut bad = good;
        bad.sigma0 = 0.0;
        assert!(bad.validate().is_err());
    }

    #[test]
    fn bump_truth_exercises_projection_error() {
        let mut cfg = linear_config();
        cfg.theta0 = FieldSpec::Bump;
        let exp = cfg.build().unwrap();
        // the projected truth differs from the true field off the span
        let x = [0.37];
        let direct = exp.truth_eval(&x)[0];
        let projected = exp.theta0_spectral.eval(&x);
        assert!((direct - projected).abs() > 1e-4);
    }
}
