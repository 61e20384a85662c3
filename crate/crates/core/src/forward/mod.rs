//! Forward maps and their linearizations: the linear conjugate oracle, the
//! Darcy divergence-form problem ∇·(e^θ∇u) = f, and the Schrödinger problem
//! −½Δu + e^θ u = 0, all with Dirichlet data on (0,1)^d.
//!
//! The PDE variants share one conservative second-order finite-difference
//! discretization. Diffusion coefficients are evaluated at half-grid points
//! by arithmetic averaging of the nodal values, which keeps the discrete
//! operator symmetric; the assembled (negated, for Darcy) system is SPD and
//! is factorized once per coefficient field. The discrete linearization
//! below is the exact derivative of the discrete forward map, so remainder
//! studies see clean quadratic decay.

mod elliptic;

pub use elliptic::{BandedCholesky, SymBanded};

use crate::error::{Error, Result};
use crate::spectral::{check_nyquist, Basis, Grid, SpectralField};

/// Model variant selector, also used by configuration.
#[derive(Debug, Clone, Copy, PartialEq, Eq, serde::Serialize)]
#[serde(rename_all = "lowercase")]
pub enum ModelKind {
    Linear,
    Darcy,
    Schrodinger,
}

impl std::fmt::Display for ModelKind {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            ModelKind::Linear => write!(f, "linear"),
            ModelKind::Darcy => write!(f, "darcy"),
            ModelKind::Schrodinger => write!(f, "schrodinger"),
        }
    }
}

// ---------------------------------------------------------------------------
// full-lattice indexing (interior plus boundary ring)

pub(crate) fn lat_side(grid: &Grid) -> usize {
    grid.m() + 2
}

pub(crate) fn lat_len(grid: &Grid) -> usize {
    lat_side(grid).pow(grid.d() as u32)
}

pub(crate) fn lat_point(grid: &Grid, q: usize) -> [f64; 2] {
    let s = lat_side(grid);
    let h = grid.h();
    match grid.d() {
        1 => [q as f64 * h, 0.0],
        _ => [(q % s) as f64 * h, (q / s) as f64 * h],
    }
}

pub(crate) fn interior_to_lat(grid: &Grid, p: usize) -> usize {
    let m = grid.m();
    match grid.d() {
        1 => p + 1,
        _ => {
            let ix = p % m;
            let iy = p / m;
            (iy + 1) * lat_side(grid) + (ix + 1)
        }
    }
}

pub(crate) fn is_boundary(grid: &Grid, q: usize) -> bool {
    let s = lat_side(grid);
    match grid.d() {
        1 => q == 0 || q == s - 1,
        _ => {
            let ix = q % s;
            let iy = q / s;
            ix == 0 || ix == s - 1 || iy == 0 || iy == s - 1
        }
    }
}

/// Lattice values of a field: interior from the supplied slice, boundary 0.
/// Appropriate for spectral fields, whose eigenfunctions vanish on ∂𝒳.
pub fn lattice_of_interior(grid: &Grid, interior: &[f64]) -> Vec<f64> {
    lattice_zero_boundary(grid, interior)
}

/// Number of full-lattice nodes (interior plus boundary ring).
pub fn lattice_len(grid: &Grid) -> usize {
    lat_len(grid)
}

/// Coordinates of full-lattice node `q`.
pub fn lattice_point(grid: &Grid, q: usize) -> [f64; 2] {
    lat_point(grid, q)
}

/// Multilinear interpolation of full-lattice values.
pub fn interp_lattice(grid: &Grid, full: &[f64], x: &[f64]) -> f64 {
    interp(grid, full, x)
}

pub(crate) fn lattice_zero_boundary(grid: &Grid, interior: &[f64]) -> Vec<f64> {
    let mut full = vec![0.0; lat_len(grid)];
    for (p, v) in interior.iter().enumerate() {
        full[interior_to_lat(grid, p)] = *v;
    }
    full
}

/// Lattice values of a spectral field (eigenfunctions vanish on ∂𝒳).
pub(crate) fn lattice_from_spectral(grid: &Grid, theta: &SpectralField) -> Vec<f64> {
    let mut full = vec![0.0; lat_len(grid)];
    for q in 0..full.len() {
        if !is_boundary(grid, q) {
            let x = lat_point(grid, q);
            full[q] = theta.eval(&x[..grid.d()]);
        }
    }
    full
}

/// Multilinear interpolation of full-lattice values at an interior point.
pub(crate) fn interp(grid: &Grid, full: &[f64], x: &[f64]) -> f64 {
    let m = grid.m();
    let h = grid.h();
    let cell = |xi: f64| -> (usize, f64) {
        let s = (xi / h).floor();
        let k = (s as isize).clamp(0, m as isize) as usize;
        (k, (xi / h) - k as f64)
    };
    match grid.d() {
        1 => {
            let (k, t) = cell(x[0]);
            (1.0 - t) * full[k] + t * full[k + 1]
        }
        _ => {
            let s = lat_side(grid);
            let (kx, tx) = cell(x[0]);
            let (ky, ty) = cell(x[1]);
            let q = ky * s + kx;
            let v00 = full[q];
            let v10 = full[q + 1];
            let v01 = full[q + s];
            let v11 = full[q + s + 1];
            (1.0 - ty) * ((1.0 - tx) * v00 + tx * v10) + ty * ((1.0 - tx) * v01 + tx * v11)
        }
    }
}

fn check_points(grid: &Grid, points: &[f64]) -> Result<()> {
    if points.len() % grid.d() != 0 {
        return Err(Error::Argument(
            "point buffer length not a multiple of d".into(),
        ));
    }
    for x in points {
        if !(0.0..=1.0).contains(x) {
            return Err(Error::Argument(format!(
                "point coordinate {x} outside [0,1]"
            )));
        }
    }
    Ok(())
}

// ---------------------------------------------------------------------------
// model

#[derive(Debug, Clone)]
enum Variant {
    Linear {
        basis: Basis,
    },
    Darcy {
        /// source term at interior nodes; strictly positive
        f: Vec<f64>,
        /// boundary data on the lattice ring
        g: Vec<f64>,
    },
    Schrodinger {
        /// boundary data on the lattice ring; strictly positive
        g: Vec<f64>,
    },
}

/// A forward map 𝒢_θ together with its grid and noise scale.
#[derive(Debug, Clone)]
pub struct ForwardModel {
    variant: Variant,
    grid: Grid,
    sigma0: f64,
}

impl ForwardModel {
    pub fn linear(basis: Basis, grid: Grid, sigma0: f64) -> Result<ForwardModel> {
        check_nyquist(&basis, &grid)?;
        check_sigma(sigma0)?;
        Ok(ForwardModel {
            variant: Variant::Linear { basis },
            grid,
            sigma0,
        })
    }

    /// Darcy model for inference; the source must be strictly positive on
    /// the grid, as the stability theory requires.
    pub fn darcy<F, G>(grid: Grid, sigma0: f64, f: F, g: G) -> Result<ForwardModel>
    where
        F: Fn(&[f64]) -> f64,
        G: Fn(&[f64]) -> f64,
    {
        let model = ForwardModel::darcy_unchecked(grid, sigma0, f, g)?;
        if let Variant::Darcy { f, .. } = &model.variant {
            if let Some(v) = f.iter().find(|v| **v <= 0.0) {
                return Err(Error::Config(format!(
                    "Darcy source must be strictly positive on the grid (found {v})"
                )));
            }
        }
        Ok(model)
    }

    /// Darcy model without the source-positivity validation; for
    /// manufactured-solution and convergence studies only.
    pub fn darcy_unchecked<F, G>(grid: Grid, sigma0: f64, f: F, g: G) -> Result<ForwardModel>
    where
        F: Fn(&[f64]) -> f64,
        G: Fn(&[f64]) -> f64,
    {
        check_sigma(sigma0)?;
        let n = grid.interior_len();
        let mut f_int = vec![0.0; n];
        for (p, v) in f_int.iter_mut().enumerate() {
            let x = grid.interior_point(p);
            *v = f(&x[..grid.d()]);
        }
        let g_full = boundary_lattice(&grid, g);
        Ok(ForwardModel {
            variant: Variant::Darcy {
                f: f_int,
                g: g_full,
            },
            grid,
            sigma0,
        })
    }

    /// Darcy model with the default data f ≡ 2, g ≡ 0.
    pub fn darcy_default(grid: Grid, sigma0: f64) -> Result<ForwardModel> {
        ForwardModel::darcy(grid, sigma0, |_| 2.0, |_| 0.0)
    }

    pub fn schrodinger<G>(grid: Grid, sigma0: f64, g: G) -> Result<ForwardModel>
    where
        G: Fn(&[f64]) -> f64,
    {
        check_sigma(sigma0)?;
        let g_full = boundary_lattice(&grid, g);
        for q in 0..g_full.len() {
            if is_boundary(&grid, q) && g_full[q] <= 0.0 {
                return Err(Error::Config(
                    "Schrödinger boundary data must be strictly positive".into(),
                ));
            }
        }
        Ok(ForwardModel {
            variant: Variant::Schrodinger { g: g_full },
            grid,
            sigma0,
        })
    }

    /// Schrödinger model with the default boundary data g ≡ 1.
    pub fn schrodinger_default(grid: Grid, sigma0: f64) -> Result<ForwardModel> {
        ForwardModel::schrodinger(grid, sigma0, |_| 1.0)
    }

    pub fn kind(&self) -> ModelKind {
        match self.variant {
            Variant::Linear { .. } => ModelKind::Linear,
            Variant::Darcy { .. } => ModelKind::Darcy,
            Variant::Schrodinger { .. } => ModelKind::Schrodinger,
        }
    }

    /// Inference basis of the linear variant; `None` for the PDE variants.
    pub fn basis(&self) -> Option<&Basis> {
        match &self.variant {
            Variant::Linear { basis } => Some(basis),
            _ => None,
        }
    }

    pub fn grid(&self) -> &Grid {
        &self.grid
    }

    pub fn sigma0(&self) -> f64 {
        self.sigma0
    }

    /// Exponent p such that λ_min of the information matrix is expected to
    /// be of order D^{-p/d} for this model.
    pub fn stability_exponent(&self) -> f64 {
        match self.variant {
            Variant::Linear { .. } => 0.0,
            Variant::Darcy { .. } => 6.0,
            Variant::Schrodinger { .. } => 4.0,
        }
    }

    /// Solve the PDE at a spectral parameter. Errors for the linear variant,
    /// which has no boundary-value problem.
    pub fn solve(&self, theta: &SpectralField) -> Result<PdeSolution> {
        let th = lattice_from_spectral(&self.grid, theta);
        self.solve_lattice(&th)
    }

    /// Solve the PDE from lattice values of θ (used for analytic truths).
    pub fn solve_lattice(&self, theta_full: &[f64]) -> Result<PdeSolution> {
        match &self.variant {
            Variant::Linear { .. } => Err(Error::Argument(
                "the linear variant has no PDE solution".into(),
            )),
            Variant::Darcy { f, g } => solve_darcy_system(&self.grid, theta_full, f, g),
            Variant::Schrodinger { g } => solve_schrodinger_system(&self.grid, theta_full, g),
        }
    }

    /// Evaluate 𝒢_θ at observation points (flattened, d coordinates per
    /// point). PDE variants solve once and interpolate.
    pub fn forward_eval(&self, theta: &SpectralField, points: &[f64]) -> Result<Vec<f64>> {
        check_points(&self.grid, points)?;
        match &self.variant {
            Variant::Linear { basis } => {
                if basis.dim() != theta.basis().dim() {
                    return Err(Error::Argument(
                        "parameter basis does not match model basis".into(),
                    ));
                }
                Ok(points
                    .chunks(self.grid.d())
                    .map(|x| theta.eval(x))
                    .collect())
            }
            _ => {
                let sol = self.solve(theta)?;
                Ok(points.chunks(self.grid.d()).map(|x| sol.eval(x)).collect())
            }
        }
    }

    /// Linearization 𝕀_{θ₀} of the forward map, factorized once per θ₀.
    pub fn linearize_at(&self, theta0: &SpectralField) -> Result<Linearization> {
        let th = lattice_from_spectral(&self.grid, theta0);
        self.linearize_at_lattice(&th)
    }

    pub fn linearize_at_lattice(&self, theta_full: &[f64]) -> Result<Linearization> {
        match &self.variant {
            Variant::Linear { .. } => Ok(Linearization {
                grid: self.grid,
                kind: LinKind::Identity,
            }),
            Variant::Darcy { f, g } => {
                let w: Vec<f64> = theta_full.iter().map(|t| t.exp()).collect();
                let a = assemble_darcy(&self.grid, &w);
                let factor = a.cholesky()?;
                let rhs = darcy_rhs(&self.grid, &w, f, g);
                let u_int = factor.solve(&rhs);
                let u_full = embed(&self.grid, &u_int, g);
                Ok(Linearization {
                    grid: self.grid,
                    kind: LinKind::Darcy { factor, w, u_full },
                })
            }
            Variant::Schrodinger { g } => {
                let sol = solve_schrodinger_system(&self.grid, theta_full, g)?;
                let a = assemble_schrodinger(&self.grid, theta_full);
                let factor = a.cholesky()?;
                let n = self.grid.interior_len();
                let mut mult = vec![0.0; n];
                for p in 0..n {
                    let q = interior_to_lat(&self.grid, p);
                    mult[p] = theta_full[q].exp() * sol.full[q];
                }
                Ok(Linearization {
                    grid: self.grid,
                    kind: LinKind::Schrodinger { factor, mult },
                })
            }
        }
    }
}

fn check_sigma(sigma0: f64) -> Result<()> {
    if sigma0 <= 0.0 || !sigma0.is_finite() {
        return Err(Error::Config(format!(
            "noise scale must be positive, got {sigma0}"
        )));
    }
    Ok(())
}

fn boundary_lattice<G: Fn(&[f64]) -> f64>(grid: &Grid, g: G) -> Vec<f64> {
    let mut out = vec![0.0; lat_len(grid)];
    for (q, v) in out.iter_mut().enumerate() {
        if is_boundary(grid, q) {
            let x = lat_point(grid, q);
            *v = g(&x[..grid.d()]);
        }
    }
    out
}

fn embed(grid: &Grid, interior: &[f64], g_full: &[f64]) -> Vec<f64> {
    let mut full = g_full.to_vec();
    for (p, v) in interior.iter().enumerate() {
        full[interior_to_lat(grid, p)] = *v;
    }
    full
}

// ---------------------------------------------------------------------------
// discrete operators

fn axis_steps(grid: &Grid) -> Vec<(usize, usize)> {
    // (lattice step, interior step) per axis
    match grid.d() {
        1 => vec![(1, 1)],
        _ => vec![(1, 1), (lat_side(grid), grid.m())],
    }
}

/// Assemble the negated Darcy operator −∇·(e^θ∇·) on interior nodes (SPD).
fn assemble_darcy(grid: &Grid, w_full: &[f64]) -> SymBanded {
    let n = grid.interior_len();
    let bw = if grid.d() == 1 { 1 } else { grid.m() };
    let h2 = grid.h() * grid.h();
    let mut a = SymBanded::zeros(n, bw);
    let steps = axis_steps(grid);
    for p in 0..n {
        let q = interior_to_lat(grid, p);
        for &(lstep, istep) in &steps {
            for dir in [-1isize, 1isize] {
                let qn = (q as isize + dir * lstep as isize) as usize;
                let face = 0.5 * (w_full[q] + w_full[qn]) / h2;
                a.add(p, p, face);
                if !is_boundary(grid, qn) {
                    let pn = (p as isize + dir * istep as isize) as usize;
                    if pn < p {
                        a.add(p, pn, -face);
                    }
                }
            }
        }
    }
    a
}

/// Right-hand side of the negated Darcy system: −f plus boundary fluxes.
fn darcy_rhs(grid: &Grid, w_full: &[f64], f_int: &[f64], g_full: &[f64]) -> Vec<f64> {
    let n = grid.interior_len();
    let h2 = grid.h() * grid.h();
    let mut rhs: Vec<f64> = f_int.iter().map(|v| -v).collect();
    let steps = axis_steps(grid);
    for (p, r) in rhs.iter_mut().enumerate().take(n) {
        let q = interior_to_lat(grid, p);
        for &(lstep, _) in &steps {
            for dir in [-1isize, 1isize] {
                let qn = (q as isize + dir * lstep as isize) as usize;
                if is_boundary(grid, qn) {
                    let face = 0.5 * (w_full[q] + w_full[qn]) / h2;
                    *r += face * g_full[qn];
                }
            }
        }
    }
    rhs
}

/// Assemble −½Δ + e^θ on interior nodes (SPD).
fn assemble_schrodinger(grid: &Grid, theta_full: &[f64]) -> SymBanded {
    let n = grid.interior_len();
    let bw = if grid.d() == 1 { 1 } else { grid.m() };
    let h2 = grid.h() * grid.h();
    let mut a = SymBanded::zeros(n, bw);
    let steps = axis_steps(grid);
    for p in 0..n {
        let q = interior_to_lat(grid, p);
        a.add(p, p, grid.d() as f64 / h2 + theta_full[q].exp());
        for &(lstep, istep) in &steps {
            for dir in [-1isize, 1isize] {
                let qn = (q as isize + dir * lstep as isize) as usize;
                if !is_boundary(grid, qn) {
                    let pn = (p as isize + dir * istep as isize) as usize;
                    if pn < p {
                        a.add(p, pn, -0.5 / h2);
                    }
                }
            }
        }
    }
    a
}

fn schrodinger_rhs(grid: &Grid, g_full: &[f64]) -> Vec<f64> {
    let n = grid.interior_len();
    let h2 = grid.h() * grid.h();
    let mut rhs = vec![0.0; n];
    let steps = axis_steps(grid);
    for (p, r) in rhs.iter_mut().enumerate().take(n) {
        let q = interior_to_lat(grid, p);
        for &(lstep, _) in &steps {
            for dir in [-1isize, 1isize] {
                let qn = (q as isize + dir * lstep as isize) as usize;
                if is_boundary(grid, qn) {
                    *r += 0.5 * g_full[qn] / h2;
                }
            }
        }
    }
    rhs
}

const RESIDUAL_REL_TOL: f64 = 1e-8;

fn residual_inf(a: &SymBanded, x: &[f64], rhs: &[f64]) -> f64 {
    let ax = a.mul_vec(x);
    ax.iter()
        .zip(rhs)
        .map(|(l, r)| (l - r).abs())
        .fold(0.0, f64::max)
}

fn solve_darcy_system(
    grid: &Grid,
    theta_full: &[f64],
    f_int: &[f64],
    g_full: &[f64],
) -> Result<PdeSolution> {
    let w: Vec<f64> = theta_full.iter().map(|t| t.exp()).collect();
    let a = assemble_darcy(grid, &w);
    let factor = a.cholesky()?;
    let rhs = darcy_rhs(grid, &w, f_int, g_full);
    let u_int = factor.solve(&rhs);
    let res = residual_inf(&a, &u_int, &rhs);
    let scale = rhs.iter().fold(1.0f64, |m, v| m.max(v.abs()));
    if res > RESIDUAL_REL_TOL * scale {
        return Err(Error::Solver(format!(
            "Darcy residual {res:.3e} exceeds tolerance (rhs scale {scale:.3e})"
        )));
    }
    Ok(PdeSolution {
        grid: *grid,
        full: embed(grid, &u_int, g_full),
        residual: res,
    })
}

fn solve_schrodinger_system(
    grid: &Grid,
    theta_full: &[f64],
    g_full: &[f64],
) -> Result<PdeSolution> {
    let a = assemble_schrodinger(grid, theta_full);
    let factor = a.cholesky()?;
    let rhs = schrodinger_rhs(grid, g_full);
    let u_int = factor.solve(&rhs);
    let res = residual_inf(&a, &u_int, &rhs);
    let scale = rhs.iter().fold(1.0f64, |m, v| m.max(v.abs()));
    if res > RESIDUAL_REL_TOL * scale {
        return Err(Error::Solver(format!(
            "Schrödinger residual {res:.3e} exceeds tolerance (rhs scale {scale:.3e})"
        )));
    }
    if u_int.iter().any(|v| *v <= 0.0) {
        return Err(Error::Numerical(
            "Schrödinger solution lost positivity on the interior".into(),
        ));
    }
    Ok(PdeSolution {
        grid: *grid,
        full: embed(grid, &u_int, g_full),
        residual: res,
    })
}

/// Finite-difference solution on the full lattice (interior unknowns plus
/// the Dirichlet boundary trace).
#[derive(Debug, Clone)]
pub struct PdeSolution {
    grid: Grid,
    full: Vec<f64>,
    residual: f64,
}

impl PdeSolution {
    pub fn grid(&self) -> &Grid {
        &self.grid
    }

    /// Multilinear interpolation at a point of the closed unit cube.
    pub fn eval(&self, x: &[f64]) -> f64 {
        interp(&self.grid, &self.full, x)
    }

    /// Values at the interior nodes, in grid order.
    pub fn interior(&self) -> Vec<f64> {
        (0..self.grid.interior_len())
            .map(|p| self.full[interior_to_lat(&self.grid, p)])
            .collect()
    }

    /// Full-lattice values including the boundary trace.
    pub fn lattice(&self) -> &[f64] {
        &self.full
    }

    /// Max-norm residual of the discrete system after the linear solve.
    pub fn residual(&self) -> f64 {
        self.residual
    }
}

// ---------------------------------------------------------------------------
// linearization

enum LinKind {
    Identity,
    Darcy {
        factor: BandedCholesky,
        w: Vec<f64>,
        u_full: Vec<f64>,
    },
    Schrodinger {
        factor: BandedCholesky,
        mult: Vec<f64>,
    },
}

/// The linearization 𝕀_{θ₀} as an operator on fields; holds one
/// factorization of the PDE operator at θ₀ and applies it repeatedly.
pub struct Linearization {
    grid: Grid,
    kind: LinKind,
}

impl Linearization {
    pub fn grid(&self) -> &Grid {
        &self.grid
    }

    /// Interior values of 𝕀[h] from lattice values of h. The image has a
    /// vanishing boundary trace for the PDE variants.
    pub fn apply_lattice(&self, h_full: &[f64]) -> Vec<f64> {
        let grid = &self.grid;
        match &self.kind {
            LinKind::Identity => (0..grid.interior_len())
                .map(|p| h_full[interior_to_lat(grid, p)])
                .collect(),
            LinKind::Darcy { factor, w, u_full } => {
                // I h = -L_θ⁻¹[∇·(e^θ h ∇u_θ)]; in the negated SPD system the
                // sign cancels: solve A v = div(e^θ h ∇u).
                let h2 = grid.h() * grid.h();
                let n = grid.interior_len();
                let wh: Vec<f64> = w.iter().zip(h_full).map(|(a, b)| a * b).collect();
                let mut div = vec![0.0; n];
                let steps = axis_steps(grid);
                for (p, dv) in div.iter_mut().enumerate() {
                    let q = interior_to_lat(grid, p);
                    let mut acc = 0.0;
                    for &(lstep, _) in &steps {
                        for dir in [-1isize, 1isize] {
                            let qn = (q as isize + dir * lstep as isize) as usize;
                            let face = 0.5 * (wh[q] + wh[qn]);
                            acc += face * (u_full[qn] - u_full[q]) / h2;
                        }
                    }
                    *dv = acc;
                }
                factor.solve(&div)
            }
            LinKind::Schrodinger { factor, mult } => {
                let n = grid.interior_len();
                let rhs: Vec<f64> = (0..n)
                    .map(|p| -mult[p] * h_full[interior_to_lat(grid, p)])
                    .collect();
                factor.solve(&rhs)
            }
        }
    }

    /// Interior values of 𝕀[h] for a spectral direction h.
    pub fn apply(&self, h: &SpectralField) -> Vec<f64> {
        let h_full = lattice_from_spectral(&self.grid, h);
        self.apply_lattice(&h_full)
    }

    /// Interpolate an image field (vanishing boundary) at a point.
    pub fn eval_image(&self, image_interior: &[f64], x: &[f64]) -> f64 {
        let full = lattice_zero_boundary(&self.grid, image_interior);
        interp(&self.grid, &full, x)
    }
}

/// One-shot linearization 𝕀_{θ₀}[h]; prefer [`ForwardModel::linearize_at`]
/// when applying the operator to many directions.
pub fn linearize(
    model: &ForwardModel,
    theta0: &SpectralField,
    h: &SpectralField,
) -> Result<Vec<f64>> {
    Ok(model.linearize_at(theta0)?.apply(h))
}
