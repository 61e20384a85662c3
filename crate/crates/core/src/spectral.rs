//! Dirichlet-Laplacian eigenbasis on the unit interval/square, spectral
//! fields, projections, and the quadrature grid shared with the PDE solvers.
//!
//! On (0,1) the eigenpairs are closed form: e_j(x) = √2 sin(jπx) with
//! eigenvalue (jπ)². On (0,1)² eigenfunctions are products of 1-D ones and
//! eigenvalues add. Quadrature is the composite midpoint rule on the uniform
//! interior grid, which reproduces the sine orthogonality relations exactly
//! up to rounding as long as the grid resolves the highest retained
//! frequency.

use std::f64::consts::PI;

use nalgebra::DMatrix;

use crate::error::{Error, Result};

/// Grid resolution must be at least this multiple of the highest retained
/// 1-D frequency. Keeps the quadrature Gram matrix within 1e-8 of identity
/// for truncation levels up to 64.
pub const NYQUIST_FACTOR: usize = 8;

/// Truncated eigenbasis of the negative Dirichlet Laplacian on (0,1)^d.
#[derive(Debug, Clone, PartialEq)]
pub struct Basis {
    d: usize,
    indices: Vec<[usize; 2]>,
    eigenvalues: Vec<f64>,
}

impl Basis {
    /// Build the first `dim` eigenpairs, ordered by ascending eigenvalue with
    /// lexicographic tie-breaking on the multi-index.
    pub fn new(d: usize, dim: usize) -> Result<Basis> {
        if d != 1 && d != 2 {
            return Err(Error::Argument(format!(
                "dimension must be 1 or 2, got {d}"
            )));
        }
        if dim == 0 {
            return Err(Error::Argument("basis dimension must be positive".into()));
        }
        let mut indices = Vec::new();
        if d == 1 {
            for j in 1..=dim {
                indices.push([j, 0]);
            }
        } else {
            // dim candidates per axis always suffice: the multi-index
            // (1, dim) alone already yields dim pairs below its eigenvalue.
            let mut cand: Vec<[usize; 2]> = Vec::with_capacity(dim * dim);
            for j1 in 1..=dim {
                for j2 in 1..=dim {
                    cand.push([j1, j2]);
                }
            }
            cand.sort_by(|a, b| {
                let la = a[0] * a[0] + a[1] * a[1];
                let lb = b[0] * b[0] + b[1] * b[1];
                la.cmp(&lb).then(a.cmp(b))
            });
            cand.truncate(dim);
            indices = cand;
        }
        let eigenvalues = indices
            .iter()
            .map(|idx| {
                if d == 1 {
                    (idx[0] as f64 * PI).powi(2)
                } else {
                    PI * PI * ((idx[0] * idx[0] + idx[1] * idx[1]) as f64)
                }
            })
            .collect();
        Ok(Basis {
            d,
            indices,
            eigenvalues,
        })
    }

    pub fn d(&self) -> usize {
        self.d
    }

    /// Number of retained eigenpairs.
    pub fn dim(&self) -> usize {
        self.indices.len()
    }

    /// Multi-index of eigenpair `i` (0-based). Second component is 0 in 1-D.
    pub fn index(&self, i: usize) -> [usize; 2] {
        self.indices[i]
    }

    pub fn eigenvalues(&self) -> &[f64] {
        &self.eigenvalues
    }

    /// Eigenvalue and eigenfunction of eigenpair `i` (1-based, as stated in
    /// the interface contract).
    pub fn eigenpair(&self, i: usize) -> Result<(f64, impl Fn(&[f64]) -> f64 + '_)> {
        if i < 1 || i > self.dim() {
            return Err(Error::Argument(format!(
                "eigenpair index {i} out of range 1..={}",
                self.dim()
            )));
        }
        let idx = i - 1;
        Ok((self.eigenvalues[idx], move |x: &[f64]| {
            self.eval_eigenfunction(idx, x)
        }))
    }

    /// Evaluate eigenfunction `i` (0-based) at a point.
    pub fn eval_eigenfunction(&self, i: usize, x: &[f64]) -> f64 {
        let idx = self.indices[i];
        match self.d {
            1 => (2.0f64).sqrt() * (idx[0] as f64 * PI * x[0]).sin(),
            _ => 2.0 * (idx[0] as f64 * PI * x[0]).sin() * (idx[1] as f64 * PI * x[1]).sin(),
        }
    }

    /// Highest 1-D frequency appearing in any retained multi-index.
    pub fn max_frequency(&self) -> usize {
        self.indices
            .iter()
            .map(|idx| idx[0].max(idx[1]))
            .max()
            .unwrap_or(0)
    }
}

/// Uniform interior grid on (0,1)^d with spacing h = 1/(m+1).
///
/// The same nodes serve as finite-difference unknowns and quadrature points,
/// so PDE solutions never need resampling.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Grid {
    d: usize,
    m: usize,
    h: f64,
}

impl Grid {
    pub fn new(d: usize, m: usize) -> Result<Grid> {
        if d != 1 && d != 2 {
            return Err(Error::Argument(format!(
                "dimension must be 1 or 2, got {d}"
            )));
        }
        if m < 2 {
            return Err(Error::Argument(
                "grid needs at least 2 interior points".into(),
            ));
        }
        Ok(Grid {
            d,
            m,
            h: 1.0 / (m as f64 + 1.0),
        })
    }

    pub fn d(&self) -> usize {
        self.d
    }

    /// Interior points per axis.
    pub fn m(&self) -> usize {
        self.m
    }

    pub fn h(&self) -> f64 {
        self.h
    }

    /// Total number of interior nodes.
    pub fn interior_len(&self) -> usize {
        self.m.pow(self.d as u32)
    }

    /// Quadrature weight of one interior node.
    pub fn weight(&self) -> f64 {
        self.h.powi(self.d as i32)
    }

    /// Coordinates of interior node `p` (x-major in 2-D).
    pub fn interior_point(&self, p: usize) -> [f64; 2] {
        match self.d {
            1 => [(p + 1) as f64 * self.h, 0.0],
            _ => {
                let ix = p % self.m;
                let iy = p / self.m;
                [(ix + 1) as f64 * self.h, (iy + 1) as f64 * self.h]
            }
        }
    }

    /// Quadrature approximation of ∫ f g dλ over (0,1)^d from interior
    /// nodal values.
    pub fn inner_product(&self, f: &[f64], g: &[f64]) -> f64 {
        debug_assert_eq!(f.len(), self.interior_len());
        debug_assert_eq!(g.len(), self.interior_len());
        let dot: f64 = f.iter().zip(g).map(|(a, b)| a * b).sum();
        self.weight() * dot
    }

    /// Quadrature L² norm of interior nodal values.
    pub fn l2_norm(&self, f: &[f64]) -> f64 {
        self.inner_product(f, f).sqrt()
    }
}

/// Reject grids too coarse to resolve the basis.
pub fn check_nyquist(basis: &Basis, grid: &Grid) -> Result<()> {
    if basis.d() != grid.d() {
        return Err(Error::Config(format!(
            "basis dimension {} does not match grid dimension {}",
            basis.d(),
            grid.d()
        )));
    }
    let need = NYQUIST_FACTOR * basis.max_frequency();
    if grid.m() < need {
        return Err(Error::Config(format!(
            "grid too coarse for basis: m = {} < {} = {} * max frequency",
            grid.m(),
            need,
            NYQUIST_FACTOR
        )));
    }
    Ok(())
}

/// Default grid for a basis: the smallest Nyquist-safe resolution, with a
/// floor that keeps finite-difference errors small at low truncations.
pub fn default_grid(basis: &Basis) -> Result<Grid> {
    let m = (NYQUIST_FACTOR * basis.max_frequency()).max(128);
    Grid::new(basis.d(), m)
}

/// Matrix of eigenfunction values at the interior nodes, one column per
/// basis element. Shared by projection, field evaluation, and the design
/// matrices of the samplers.
pub fn basis_matrix(basis: &Basis, grid: &Grid) -> DMatrix<f64> {
    let n = grid.interior_len();
    let dd = basis.dim();
    let mut b = DMatrix::zeros(n, dd);
    for j in 0..dd {
        for p in 0..n {
            let x = grid.interior_point(p);
            b[(p, j)] = basis.eval_eigenfunction(j, &x[..basis.d()]);
        }
    }
    b
}

/// An element of the span of the truncated eigenbasis, stored by its
/// coefficients ⟨θ, e_i⟩.
#[derive(Debug, Clone, PartialEq)]
pub struct SpectralField {
    basis: Basis,
    coeffs: Vec<f64>,
}

impl SpectralField {
    pub fn new(basis: Basis, coeffs: Vec<f64>) -> Result<SpectralField> {
        if coeffs.len() != basis.dim() {
            return Err(Error::Argument(format!(
                "coefficient count {} does not match basis dimension {}",
                coeffs.len(),
                basis.dim()
            )));
        }
        Ok(SpectralField { basis, coeffs })
    }

    pub fn zero(basis: Basis) -> SpectralField {
        let coeffs = vec![0.0; basis.dim()];
        SpectralField { basis, coeffs }
    }

    pub fn basis(&self) -> &Basis {
        &self.basis
    }

    pub fn coeffs(&self) -> &[f64] {
        &self.coeffs
    }

    pub fn eval(&self, x: &[f64]) -> f64 {
        self.coeffs
            .iter()
            .enumerate()
            .map(|(i, c)| c * self.basis.eval_eigenfunction(i, x))
            .sum()
    }

    /// Values at the interior nodes of a grid.
    pub fn eval_on_grid(&self, grid: &Grid) -> Vec<f64> {
        let n = grid.interior_len();
        let mut out = vec![0.0; n];
        for p in 0..n {
            let x = grid.interior_point(p);
            out[p] = self.eval(&x[..self.basis.d()]);
        }
        out
    }

    /// L² norm via Parseval.
    pub fn l2_norm(&self) -> f64 {
        self.coeffs.iter().map(|c| c * c).sum::<f64>().sqrt()
    }
}

/// Spectral Sobolev norm √(Σ c_j² λ_j^β). β = 0 recovers the L² norm.
pub fn sobolev_norm(theta: &SpectralField, beta: f64) -> f64 {
    theta
        .coeffs()
        .iter()
        .zip(theta.basis().eigenvalues())
        .map(|(c, l)| c * c * l.powf(beta))
        .sum::<f64>()
        .sqrt()
}

/// Project interior nodal values onto the basis by quadrature.
pub fn project_values(values: &[f64], basis: &Basis, grid: &Grid) -> Result<SpectralField> {
    check_nyquist(basis, grid)?;
    if values.len() != grid.interior_len() {
        return Err(Error::Argument(format!(
            "value count {} does not match grid size {}",
            values.len(),
            grid.interior_len()
        )));
    }
    let w = grid.weight();
    let mut coeffs = vec![0.0; basis.dim()];
    for (j, c) in coeffs.iter_mut().enumerate() {
        let mut acc = 0.0;
        for (p, v) in values.iter().enumerate() {
            let x = grid.interior_point(p);
            acc += v * basis.eval_eigenfunction(j, &x[..basis.d()]);
        }
        *c = w * acc;
    }
    SpectralField::new(basis.clone(), coeffs)
}

/// Project an analytically given field onto the basis.
pub fn project_fn<F: Fn(&[f64]) -> f64>(f: F, basis: &Basis, grid: &Grid) -> Result<SpectralField> {
    let n = grid.interior_len();
    let mut values = vec![0.0; n];
    for (p, v) in values.iter_mut().enumerate() {
        let x = grid.interior_point(p);
        *v = f(&x[..grid.d()]);
    }
    project_values(&values, basis, grid)
}

/// L² errors ‖f − P_{E_D} f‖ over an ascending list of truncation levels.
/// All truncations must be representable in `basis`.
pub fn projection_error(
    values: &[f64],
    basis: &Basis,
    grid: &Grid,
    truncations: &[usize],
) -> Result<Vec<f64>> {
    let full = project_values(values, basis, grid)?;
    let b = basis_matrix(basis, grid);
    let mut out = Vec::with_capacity(truncations.len());
    for &dd in truncations {
        if dd > basis.dim() {
            return Err(Error::Argument(format!(
                "truncation {dd} exceeds basis dimension {}",
                basis.dim()
            )));
        }
        let mut resid = values.to_vec();
        for j in 0..dd {
            let c = full.coeffs()[j];
            for p in 0..resid.len() {
                resid[p] -= c * b[(p, j)];
            }
        }
        out.push(grid.l2_norm(&resid));
    }
    Ok(out)
}

/// Smooth compactly supported bump exp(−1/(1−r²)) with r the scaled radial
/// distance from the center; identically zero outside the support.
pub fn bump(x: &[f64], center: f64, radius: f64) -> f64 {
    let r2: f64 = x.iter().map(|xi| ((xi - center) / radius).powi(2)).sum();
    if r2 < 1.0 {
        (-1.0 / (1.0 - r2)).exp()
    } else {
        0.0
    }
}

/// How a field is specified in an experiment: by coefficients in the
/// eigenbasis, or as the named analytic bump (center 0.5, radius 0.4).
#[derive(Debug, Clone, PartialEq, serde::Serialize)]
pub enum FieldSpec {
    Coeffs(Vec<f64>),
    Bump,
}

pub const BUMP_CENTER: f64 = 0.5;
pub const BUMP_RADIUS: f64 = 0.4;

impl FieldSpec {
    pub fn eval(&self, basis: &Basis, x: &[f64]) -> f64 {
        match self {
            FieldSpec::Coeffs(c) => c
                .iter()
                .enumerate()
                .map(|(i, ci)| ci * basis.eval_eigenfunction(i, x))
                .sum(),
            FieldSpec::Bump => bump(x, BUMP_CENTER, BUMP_RADIUS),
        }
    }

    /// Coefficients padded or truncated to the basis dimension.
    pub fn to_spectral(&self, basis: &Basis, grid: &Grid) -> Result<SpectralField> {
        match self {
            FieldSpec::Coeffs(c) => {
                if c.len() > basis.dim() {
                    return Err(Error::Config(format!(
                        "field has {} coefficients but the basis is {}-dimensional",
                        c.len(),
                        basis.dim()
                    )));
                }
                let mut coeffs = c.clone();
                coeffs.resize(basis.dim(), 0.0);
                SpectralField::new(basis.clone(), coeffs)
            }
            FieldSpec::Bump => project_fn(|x| bump(x, BUMP_CENTER, BUMP_RADIUS), basis, grid),
        }
    }

    /// Interior nodal values of the field itself (not its projection).
    pub fn eval_on_grid(&self, basis: &Basis, grid: &Grid) -> Vec<f64> {
        let n = grid.interior_len();
        let mut out = vec![0.0; n];
        for (p, v) in out.iter_mut().enumerate() {
            let x = grid.interior_point(p);
            *v = self.eval(basis, &x[..grid.d()]);
        }
        out
    }
}
