//! Information matrices, functional Jacobians, the renormalized covariance,
//! representers, and stability diagnostics.
//!
//! [I_D]_{ij} = ⟨𝕀e_i, 𝕀e_j⟩ / σ₀² is assembled as a Gram matrix of the
//! linearized basis images, so it is symmetric positive semidefinite by
//! construction. The inverse of [I_D] is never formed; every solve goes
//! through one Cholesky factorization, which matters because the smallest
//! eigenvalue decays polynomially in D for the PDE models.

use nalgebra::{Cholesky, DMatrix, DVector, Dyn};
use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::forward::ForwardModel;
use crate::spectral::{check_nyquist, Basis, FieldSpec, Grid, SpectralField};

/// Linearly independent functionals ψ_1..ψ_k with their projections onto
/// the inference basis.
#[derive(Debug, Clone)]
pub struct FunctionalSet {
    specs: Vec<FieldSpec>,
    projected: Vec<SpectralField>,
    gram_min_eig: f64,
}

/// Gram-matrix eigenvalue floor below which the set counts as dependent.
const GRAM_EIG_FLOOR: f64 = 1e-10;

impl FunctionalSet {
    pub fn new(specs: Vec<FieldSpec>, basis: &Basis, grid: &Grid) -> Result<FunctionalSet> {
        if specs.is_empty() {
            return Err(Error::Config("functional set must not be empty".into()));
        }
        check_nyquist(basis, grid)?;
        let k = specs.len();
        // Gram matrix of the original fields by quadrature
        let values: Vec<Vec<f64>> = specs.iter().map(|s| s.eval_on_grid(basis, grid)).collect();
        let mut gram = DMatrix::zeros(k, k);
        for i in 0..k {
            for j in 0..=i {
                let v = grid.inner_product(&values[i], &values[j]);
                gram[(i, j)] = v;
                gram[(j, i)] = v;
            }
        }
        let eig_min = gram
            .symmetric_eigen()
            .eigenvalues
            .iter()
            .cloned()
            .fold(f64::MAX, f64::min);
        if eig_min <= GRAM_EIG_FLOOR {
            return Err(Error::Degenerate(format!(
                "functionals are numerically dependent (Gram eigenvalue {eig_min:.3e})"
            )));
        }
        let projected = specs
            .iter()
            .map(|s| s.to_spectral(basis, grid))
            .collect::<Result<Vec<_>>>()?;
        Ok(FunctionalSet {
            specs,
            projected,
            gram_min_eig: eig_min,
        })
    }

    pub fn k(&self) -> usize {
        self.specs.len()
    }

    pub fn specs(&self) -> &[FieldSpec] {
        &self.specs
    }

    pub fn projected(&self) -> &[SpectralField] {
        &self.projected
    }

    pub fn gram_min_eig(&self) -> f64 {
        self.gram_min_eig
    }
}

/// [I_D] at θ₀: Gram matrix of the linearized basis images divided by σ₀².
pub fn information_matrix(
    model: &ForwardModel,
    theta0: &SpectralField,
    basis: &Basis,
) -> Result<DMatrix<f64>> {
    let grid = model.grid();
    check_nyquist(basis, grid)?;
    let images = linearized_basis_images(model, theta0, basis)?;
    Ok(gram_of_images(&images, grid, model.sigma0()))
}

/// Interior-grid images 𝕀e_j, one column per basis element. The solves are
/// independent and run as a parallel map; the result layout is fixed by
/// column index.
fn linearized_basis_images(
    model: &ForwardModel,
    theta0: &SpectralField,
    basis: &Basis,
) -> Result<DMatrix<f64>> {
    let grid = model.grid();
    let lin = model.linearize_at(theta0)?;
    let n = grid.interior_len();
    let dd = basis.dim();
    let cols: Vec<Vec<f64>> = (0..dd)
        .into_par_iter()
        .map(|j| {
            let mut coeffs = vec![0.0; dd];
            coeffs[j] = 1.0;
            let ej = SpectralField::new(basis.clone(), coeffs).expect("dimension matches");
            lin.apply(&ej)
        })
        .collect();
    let mut b = DMatrix::zeros(n, dd);
    for (j, col) in cols.iter().enumerate() {
        for (p, v) in col.iter().enumerate() {
            b[(p, j)] = *v;
        }
    }
    Ok(b)
}

fn gram_of_images(images: &DMatrix<f64>, grid: &Grid, sigma0: f64) -> DMatrix<f64> {
    images.transpose() * images * (grid.weight() / (sigma0 * sigma0))
}

/// Jacobian of the functional map: row i holds the projection coefficients
/// of ψ_i.
pub fn functional_jacobian(fs: &FunctionalSet, basis: &Basis) -> Result<DMatrix<f64>> {
    let k = fs.k();
    let dd = basis.dim();
    let mut j = DMatrix::zeros(k, dd);
    for (i, psi) in fs.projected().iter().enumerate() {
        if psi.basis().dim() != dd {
            return Err(Error::Argument(
                "functional projection does not match basis".into(),
            ));
        }
        for (jj, c) in psi.coeffs().iter().enumerate() {
            j[(i, jj)] = *c;
        }
    }
    Ok(j)
}

/// Renormalized covariance quantities derived from [I_D] and J_D.
#[derive(Debug, Clone)]
pub struct Renormalized {
    /// i_D⁻¹ = J_D [I_D]⁻¹ J_Dᵀ
    pub id_inv: DMatrix<f64>,
    /// Σ_N = i_D⁻¹ / N
    pub sigma_n: DMatrix<f64>,
    /// symmetric square root of i_D = (i_D⁻¹)⁻¹
    pub id_sqrt: DMatrix<f64>,
}

/// Compute i_D⁻¹, Σ_N and i_D^{1/2} through a symmetric factorization of
/// [I_D]; fails when the renormalized matrix is numerically singular.
pub fn renormalize(id: &DMatrix<f64>, jd: &DMatrix<f64>, n_data: usize) -> Result<Renormalized> {
    if n_data == 0 {
        return Err(Error::Argument(
            "renormalization needs a positive sample size".into(),
        ));
    }
    let chol = Cholesky::new(id.clone())
        .ok_or_else(|| Error::Degenerate("information matrix is not positive definite".into()))?;
    // W = L⁻¹ J_Dᵀ gives i_D⁻¹ = Wᵀ W, exactly symmetric
    let w = chol
        .l()
        .solve_lower_triangular(&jd.transpose())
        .ok_or_else(|| Error::Degenerate("information factor is singular".into()))?;
    let id_inv = w.transpose() * &w;
    let eig = id_inv.clone().symmetric_eigen();
    let eig_max = eig.eigenvalues.iter().cloned().fold(f64::MIN, f64::max);
    let eig_min = eig.eigenvalues.iter().cloned().fold(f64::MAX, f64::min);
    if eig_min <= 1e-12 * eig_max.max(1e-300) {
        return Err(Error::Degenerate(format!(
            "renormalized covariance is numerically singular (eigenvalues {eig_min:.3e}..{eig_max:.3e})"
        )));
    }
    let k = id_inv.nrows();
    let mut inv_sqrt = DMatrix::zeros(k, k);
    for i in 0..k {
        inv_sqrt[(i, i)] = 1.0 / eig.eigenvalues[i].sqrt();
    }
    let id_sqrt = &eig.eigenvectors * inv_sqrt * eig.eigenvectors.transpose();
    let sigma_n = &id_inv / (n_data as f64);
    Ok(Renormalized {
        id_inv,
        sigma_n,
        id_sqrt,
    })
}

/// Representers ψ̄_D solving [I_D] ψ̄ = P_{E_D} ψ_i, with the max-norm solve
/// residuals.
pub fn representers(
    id: &DMatrix<f64>,
    fs: &FunctionalSet,
    basis: &Basis,
) -> Result<(Vec<SpectralField>, Vec<f64>)> {
    let chol = Cholesky::new(id.clone())
        .ok_or_else(|| Error::Degenerate("information matrix is not positive definite".into()))?;
    let mut reps = Vec::with_capacity(fs.k());
    let mut residuals = Vec::with_capacity(fs.k());
    for psi in fs.projected() {
        let rhs = DVector::from_column_slice(psi.coeffs());
        let sol = chol.solve(&rhs);
        let resid = (id * &sol - &rhs).amax();
        residuals.push(resid);
        reps.push(SpectralField::new(basis.clone(), sol.data.into())?);
    }
    Ok((reps, residuals))
}

/// Everything downstream modules need about the information geometry at θ₀.
pub struct InformationBundle {
    pub id: DMatrix<f64>,
    pub jd: DMatrix<f64>,
    pub id_inv: DMatrix<f64>,
    pub sigma_n: DMatrix<f64>,
    pub id_sqrt: DMatrix<f64>,
    pub representers: Vec<SpectralField>,
    pub representer_residuals: Vec<f64>,
    /// interior-grid values of 𝕀ψ̄_D per functional
    pub representer_images: Vec<Vec<f64>>,
    pub eig_min: f64,
    pub eig_max: f64,
}

impl InformationBundle {
    pub fn build(
        model: &ForwardModel,
        theta0: &SpectralField,
        basis: &Basis,
        fs: &FunctionalSet,
        n_data: usize,
    ) -> Result<InformationBundle> {
        let id = information_matrix(model, theta0, basis)?;
        let jd = functional_jacobian(fs, basis)?;
        let renorm = renormalize(&id, &jd, n_data)?;
        let (reps, residuals) = representers(&id, fs, basis)?;
        let lin = model.linearize_at(theta0)?;
        let images = reps.iter().map(|r| lin.apply(r)).collect();
        let eig = id.clone().symmetric_eigen();
        let eig_min = eig.eigenvalues.iter().cloned().fold(f64::MAX, f64::min);
        let eig_max = eig.eigenvalues.iter().cloned().fold(f64::MIN, f64::max);
        Ok(InformationBundle {
            id,
            jd,
            id_inv: renorm.id_inv,
            sigma_n: renorm.sigma_n,
            id_sqrt: renorm.id_sqrt,
            representers: reps,
            representer_residuals: residuals,
            representer_images: images,
            eig_min,
            eig_max,
        })
    }
}

fn min_eig_of_leading(id: &DMatrix<f64>, dd: usize) -> f64 {
    let sub = id.view((0, 0), (dd, dd)).into_owned();
    sub.symmetric_eigen()
        .eigenvalues
        .iter()
        .cloned()
        .fold(f64::MAX, f64::min)
}

/// Compensated stability sequence (D, λ_min([I_D]) · D^{p/d}) over an
/// ascending D grid. One information matrix is assembled at the largest D;
/// truncations are its leading principal submatrices.
pub fn stability_curve(
    model: &ForwardModel,
    theta0: &SpectralField,
    basis: &Basis,
    truncations: &[usize],
) -> Result<Vec<(usize, f64)>> {
    if truncations.windows(2).any(|w| w[1] <= w[0]) {
        return Err(Error::Argument("truncation grid must be ascending".into()));
    }
    let max_d = *truncations.last().unwrap();
    if max_d > basis.dim() {
        return Err(Error::Argument(format!(
            "truncation {max_d} exceeds basis dimension {}",
            basis.dim()
        )));
    }
    let id = information_matrix(model, theta0, basis)?;
    let p = model.stability_exponent();
    let d = model.grid().d() as f64;
    Ok(truncations
        .iter()
        .map(|&dd| {
            let lmin = min_eig_of_leading(&id, dd);
            (dd, lmin * (dd as f64).powf(p / d))
        })
        .collect())
}

/// Cholesky factor wrapper for reuse in tests.
pub fn cholesky_of(id: &DMatrix<f64>) -> Result<Cholesky<f64, Dyn>> {
    Cholesky::new(id.clone())
        .ok_or_else(|| Error::Degenerate("matrix is not positive definite".into()))
}
