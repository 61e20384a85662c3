//! χ²_k quantiles, credible ellipsoids under both radius calibrations, and
//! the k = 1 credible-interval view.
//!
//! The ellipsoid is {x : (x − Ψ̂)ᵀ Σ̂⁻¹ (x − Ψ̂) ≤ R}. Case 1 sets R to the
//! χ²_k quantile of the credibility level; case 2 sets R to the empirical
//! level-quantile of the quadratic form over posterior draws, taken as the
//! order statistic at ⌈(1−α)S⌉ so the retained posterior mass is at least
//! the nominal level. A numerically singular Σ̂ is flagged degenerate and
//! its inverse replaced by the identity.

use nalgebra::{DMatrix, DVector};

use crate::error::{Error, Result};
use crate::posterior::FunctionalPosterior;

// ---------------------------------------------------------------------------
// gamma machinery (series / continued fraction, Lanczos log-gamma)

fn ln_gamma(x: f64) -> f64 {
    // Lanczos, g = 7, n = 9
    const COEF: [f64; 9] = [
        0.999_999_999_999_809_93,
        676.520_368_121_885_1,
        -1_259.139_216_722_402_8,
        771.323_428_777_653_13,
        -176.615_029_162_140_6,
        12.507_343_278_686_905,
        -0.138_571_095_265_720_12,
        9.984_369_578_019_571_6e-6,
        1.505_632_735_149_311_6e-7,
    ];
    if x < 0.5 {
        // reflection
        let pi = std::f64::consts::PI;
        pi.ln() - (pi * x).sin().ln() - ln_gamma(1.0 - x)
    } else {
        let x = x - 1.0;
        let mut a = COEF[0];
        let t = x + 7.5;
        for (i, c) in COEF.iter().enumerate().skip(1) {
            a += c / (x + i as f64);
        }
        0.5 * (2.0 * std::f64::consts::PI).ln() + (x + 0.5) * t.ln() - t + a.ln()
    }
}

/// Regularized lower incomplete gamma P(a, x).
fn reg_lower_gamma(a: f64, x: f64) -> f64 {
    if x <= 0.0 {
        return 0.0;
    }
    if x < a + 1.0 {
        // series expansion
        let mut term = 1.0 / a;
        let mut sum = term;
        let mut n = a;
        for _ in 0..500 {
            n += 1.0;
            term *= x / n;
            sum += term;
            if term.abs() < sum.abs() * 1e-16 {
                break;
            }
        }
        sum * (a * x.ln() - x - ln_gamma(a)).exp()
    } else {
        // Lentz continued fraction for Q(a, x)
        let tiny = 1e-300;
        let mut b = x + 1.0 - a;
        let mut c = 1.0 / tiny;
        let mut d = 1.0 / b;
        let mut h = d;
        for i in 1..500 {
            let an = -(i as f64) * (i as f64 - a);
            b += 2.0;
            d = an * d + b;
            if d.abs() < tiny {
                d = tiny;
            }
            c = b + an / c;
            if c.abs() < tiny {
                c = tiny;
            }
            d = 1.0 / d;
            let del = d * c;
            h *= del;
            if (del - 1.0).abs() < 1e-16 {
                break;
            }
        }
        let q = (a * x.ln() - x - ln_gamma(a)).exp() * h;
        1.0 - q
    }
}

/// CDF of the χ²_k distribution.
pub fn chi2_cdf(k: usize, x: f64) -> f64 {
    reg_lower_gamma(k as f64 / 2.0, x / 2.0)
}

/// Quantile of the χ²_k distribution by bisection on the CDF, accurate to
/// 1e-8 absolute.
pub fn chi2_quantile(k: usize, p: f64) -> Result<f64> {
    if k == 0 {
        return Err(Error::Argument(
            "degrees of freedom must be positive".into(),
        ));
    }
    if !(0.0 < p && p < 1.0) {
        return Err(Error::Argument(format!("probability {p} outside (0,1)")));
    }
    let kf = k as f64;
    let mut hi = kf + 10.0 + 10.0 * (2.0 * kf).sqrt();
    while chi2_cdf(k, hi) < p {
        hi *= 2.0;
        if hi > 1e12 {
            return Err(Error::Numerical(
                "chi-square quantile bracket failed".into(),
            ));
        }
    }
    let mut lo = 0.0;
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        if chi2_cdf(k, mid) < p {
            lo = mid;
        } else {
            hi = mid;
        }
        if hi - lo < 1e-12 {
            break;
        }
    }
    Ok(0.5 * (lo + hi))
}

// ---------------------------------------------------------------------------
// ellipsoids

/// Radius calibration of the credible ellipsoid.
#[derive(Debug, Clone, Copy, PartialEq, Eq, serde::Serialize)]
pub enum Calibration {
    /// R is the χ²_k quantile of the level.
    Case1,
    /// R is the empirical level-quantile of the posterior quadratic form.
    Case2,
}

/// Credible ellipsoid centered at the posterior functional mean, shaped by
/// the posterior functional covariance.
#[derive(Debug, Clone)]
pub struct CredibleEllipsoid {
    center: DVector<f64>,
    shape: DMatrix<f64>,
    shape_inv: DMatrix<f64>,
    radius: f64,
    shape_eig_max: f64,
    calibration: Calibration,
    degenerate: bool,
}

/// Symmetric credible interval around the posterior mean (k = 1).
#[derive(Debug, Clone)]
pub struct CredibleInterval {
    pub center: f64,
    pub half_width: f64,
}

impl CredibleInterval {
    pub fn lower(&self) -> f64 {
        self.center - self.half_width
    }

    pub fn upper(&self) -> f64 {
        self.center + self.half_width
    }
}

struct ShapeDecomp {
    inv: DMatrix<f64>,
    eig_max: f64,
    degenerate: bool,
}

/// Invert Σ̂ by symmetric eigendecomposition; fall back to the identity if
/// numerically singular (relative threshold 1e-12).
fn decompose_shape(sigma: &DMatrix<f64>) -> ShapeDecomp {
    let k = sigma.nrows();
    let sym = 0.5 * (sigma + sigma.transpose());
    let eig = sym.clone().symmetric_eigen();
    let eig_max = eig.eigenvalues.iter().cloned().fold(f64::MIN, f64::max);
    let eig_min = eig.eigenvalues.iter().cloned().fold(f64::MAX, f64::min);
    let degenerate = eig_min < 1e-12 * eig_max.max(1e-30);
    let inv = if degenerate {
        DMatrix::identity(k, k)
    } else {
        let mut lam_inv = DMatrix::zeros(k, k);
        for i in 0..k {
            lam_inv[(i, i)] = 1.0 / eig.eigenvalues[i];
        }
        &eig.eigenvectors * lam_inv * eig.eigenvectors.transpose()
    };
    ShapeDecomp {
        inv,
        eig_max: eig_max.max(0.0),
        degenerate,
    }
}

fn build(fp: &FunctionalPosterior, radius: f64, calibration: Calibration) -> CredibleEllipsoid {
    let decomp = decompose_shape(fp.sigma_hat());
    CredibleEllipsoid {
        center: fp.psi_hat().clone(),
        shape: fp.sigma_hat().clone(),
        shape_inv: decomp.inv,
        radius,
        shape_eig_max: decomp.eig_max,
        calibration,
        degenerate: decomp.degenerate,
    }
}

/// Ellipsoid with the fixed χ²_k-quantile radius.
pub fn ellipsoid_case1(fp: &FunctionalPosterior, level: f64) -> Result<CredibleEllipsoid> {
    let r = chi2_quantile(fp.k(), level)?;
    Ok(build(fp, r, Calibration::Case1))
}

/// Ellipsoid whose radius is the empirical level-quantile of the quadratic
/// form over the posterior draws, so at least ⌈level·S⌉ draws are covered.
pub fn ellipsoid_case2(fp: &FunctionalPosterior, level: f64) -> Result<CredibleEllipsoid> {
    if !(0.0 < level && level < 1.0) {
        return Err(Error::Argument(format!("level {level} outside (0,1)")));
    }
    let mut ell = build(fp, 0.0, Calibration::Case2);
    let draws = fp.per_draw();
    let s = draws.ncols();
    let mut q = Vec::with_capacity(s);
    for j in 0..s {
        let diff = draws.column(j) - &ell.center;
        q.push((&ell.shape_inv * &diff).dot(&diff));
    }
    ell.radius = empirical_quantile(&mut q, level);
    Ok(ell)
}

/// Symmetric credible interval for a scalar functional, calibrated on the
/// draws; identical to the k = 1 case-2 ellipsoid.
pub fn interval_case2(fp: &FunctionalPosterior, level: f64) -> Result<CredibleInterval> {
    if fp.k() != 1 {
        return Err(Error::Argument(format!(
            "credible intervals need a scalar functional, got k = {}",
            fp.k()
        )));
    }
    if !(0.0 < level && level < 1.0) {
        return Err(Error::Argument(format!("level {level} outside (0,1)")));
    }
    let center = fp.psi_hat()[0];
    let mut devs: Vec<f64> = fp
        .per_draw()
        .row(0)
        .iter()
        .map(|v| (v - center).abs())
        .collect();
    let half_width = empirical_quantile(&mut devs, level);
    Ok(CredibleInterval { center, half_width })
}

/// Order statistic at index ⌈level·S⌉ (1-based).
fn empirical_quantile(values: &mut [f64], level: f64) -> f64 {
    values.sort_by(f64::total_cmp);
    let s = values.len();
    let idx = ((level * s as f64).ceil() as usize).clamp(1, s);
    values[idx - 1]
}

impl CredibleEllipsoid {
    pub fn center(&self) -> &DVector<f64> {
        &self.center
    }

    pub fn shape(&self) -> &DMatrix<f64> {
        &self.shape
    }

    pub fn shape_inv(&self) -> &DMatrix<f64> {
        &self.shape_inv
    }

    pub fn radius(&self) -> f64 {
        self.radius
    }

    pub fn calibration(&self) -> Calibration {
        self.calibration
    }

    pub fn degenerate(&self) -> bool {
        self.degenerate
    }

    /// Quadratic-form membership test.
    pub fn contains(&self, x: &DVector<f64>) -> bool {
        let diff = x - &self.center;
        (&self.shape_inv * &diff).dot(&diff) <= self.radius
    }

    /// diam = 2 √(R λ_max(Σ̂)).
    pub fn diameter(&self) -> f64 {
        2.0 * (self.radius * self.shape_eig_max).sqrt()
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::posterior::FunctionalPosterior;
    use approx::assert_relative_eq;
    use proptest::prelude::*;
    use rand::Rng;
    use rand_chacha::rand_core::SeedableRng;
    use rand_chacha::ChaCha8Rng;
    use rand_distr::StandardNormal;

    fn fp_from_draws(per_draw: DMatrix<f64>) -> FunctionalPosterior {
        FunctionalPosterior::from_per_draw(per_draw).unwrap()
    }

    fn gaussian_draws(k: usize, s: usize, seed: u64) -> DMatrix<f64> {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        DMatrix::from_fn(k, s, |_, _| rng.sample::<f64, _>(StandardNormal))
    }

    #[test]
    fn chi2_quantile_matches_closed_form_k2() {
        let q = chi2_quantile(2, 0.95).unwrap();
        assert!((q - (-2.0 * (0.05f64).ln())).abs() < 1e-8);
    }

    #[test]
    fn chi2_quantile_k1() {
        let q = chi2_quantile(1, 0.95).unwrap();
        assert!((q - 3.841458820694124).abs() < 1e-8);
    }

    #[test]
    fn chi2_quantile_small_p_tends_to_zero() {
        for k in 1..=4 {
            assert!(chi2_quantile(k, 1e-10).unwrap() < 1e-3);
        }
    }

    #[test]
    fn chi2_round_trip() {
        for k in 1..=5 {
            for p in [0.5, 0.9, 0.95, 0.99] {
                let q = chi2_quantile(k, p).unwrap();
                assert!((chi2_cdf(k, q) - p).abs() < 1e-8, "k={k} p={p}");
            }
        }
    }

    #[test]
    fn chi2_quantile_rejects_bad_probability() {
        assert!(chi2_quantile(2, 0.0).is_err());
        assert!(chi2_quantile(2, 1.0).is_err());
        assert!(chi2_quantile(2, -0.2).is_err());
    }

    #[test]
    fn case1_scalar_diameter_example() {
        // k=1, Σ̂ = 4, level 0.95: diameter 2 √(3.84146·4)
        let draws = DMatrix::from_row_slice(1, 4, &[-2.0, 2.0, -2.0, 2.0]);
        let mut fp = fp_from_draws(draws);
        fp.override_moments(
            DVector::from_element(1, 0.0),
            DMatrix::from_element(1, 1, 4.0),
        );
        let ell = ellipsoid_case1(&fp, 0.95).unwrap();
        assert_relative_eq!(ell.radius(), 3.841458820694124, epsilon = 1e-8);
        assert_relative_eq!(
            ell.diameter(),
            2.0 * (3.841458820694124f64 * 4.0).sqrt(),
            epsilon = 1e-10
        );
    }

    #[test]
    fn degenerate_covariance_flagged_with_identity_inverse() {
        let draws = DMatrix::from_element(2, 5, 1.5);
        let fp = fp_from_draws(draws);
        let ell = ellipsoid_case1(&fp, 0.9).unwrap();
        assert!(ell.degenerate());
        assert_eq!(ell.shape_inv(), &DMatrix::identity(2, 2));
        // behaves as a Euclidean ball of radius sqrt(R)
        let r = ell.radius();
        let inside = DVector::from_vec(vec![1.5 + 0.9 * r.sqrt(), 1.5]);
        let outside = DVector::from_vec(vec![1.5 + 1.1 * r.sqrt(), 1.5]);
        assert!(ell.contains(&inside));
        assert!(!ell.contains(&outside));
    }

    #[test]
    fn contains_boundary_cases() {
        let draws = gaussian_draws(1, 100, 3);
        let mut fp = fp_from_draws(draws);
        fp.override_moments(
            DVector::from_element(1, 0.0),
            DMatrix::from_element(1, 1, 1.0),
        );
        let mut ell = ellipsoid_case1(&fp, 0.9).unwrap();
        ell.radius = 4.0;
        assert!(ell.contains(&DVector::from_element(1, 2.0)));
        assert!(!ell.contains(&DVector::from_element(1, 2.0001)));
        assert!(ell.contains(ell.center()));
    }

    #[test]
    fn case2_gaussian_draws_approach_chi2_quantile() {
        for k in [1usize, 2] {
            let draws = gaussian_draws(k, 100_000, 11 + k as u64);
            let fp = fp_from_draws(draws);
            let ell = ellipsoid_case2(&fp, 0.95).unwrap();
            let target = chi2_quantile(k, 0.95).unwrap();
            assert!(
                (ell.radius() - target).abs() < 0.15,
                "k={k} radius {} target {target}",
                ell.radius()
            );
        }
    }

    #[test]
    fn case2_single_repeated_draw_degenerates() {
        let draws = DMatrix::from_element(1, 3, 2.0);
        let fp = fp_from_draws(draws);
        let ell = ellipsoid_case2(&fp, 0.9).unwrap();
        assert!(ell.degenerate());
        assert_eq!(ell.radius(), 0.0);
    }

    #[test]
    fn case2_coverage_over_defining_draws() {
        let s = 10_000;
        let draws = gaussian_draws(2, s, 5);
        let fp = fp_from_draws(draws.clone());
        let level = 0.9;
        let ell = ellipsoid_case2(&fp, level).unwrap();
        let mut inside = 0usize;
        for j in 0..s {
            if ell.contains(&draws.column(j).into_owned()) {
                inside += 1;
            }
        }
        let frac = inside as f64 / s as f64;
        assert!(frac >= level, "coverage {frac}");
        assert!(frac <= level + 1.0 / s as f64 + 1e-12, "coverage {frac}");
    }

    #[test]
    fn interval_matches_scalar_ellipsoid_extremes() {
        let draws = gaussian_draws(1, 5_000, 9);
        let fp = fp_from_draws(draws);
        let level = 0.9;
        let interval = interval_case2(&fp, level).unwrap();
        let ell = ellipsoid_case2(&fp, level).unwrap();
        let half = (ell.radius() * ell.shape()[(0, 0)]).sqrt();
        assert!((interval.half_width - half).abs() < 1e-10);
        assert!((interval.lower() - (ell.center()[0] - half)).abs() < 1e-10);
        assert!((interval.upper() - (ell.center()[0] + half)).abs() < 1e-10);
    }

    #[test]
    fn interval_requires_scalar_functional() {
        let draws = gaussian_draws(2, 50, 13);
        let fp = fp_from_draws(draws);
        assert!(interval_case2(&fp, 0.9).is_err());
    }

    #[test]
    fn interval_width_zero_for_constant_draws() {
        let draws = DMatrix::from_element(1, 10, 0.7);
        let fp = fp_from_draws(draws);
        let interval = interval_case2(&fp, 0.9).unwrap();
        assert!(interval.half_width <= 1e-15);
    }

    #[test]
    fn rotation_equivariance_of_case1() {
        let draws = gaussian_draws(2, 2_000, 21);
        let fp = fp_from_draws(draws.clone());
        let ell = ellipsoid_case1(&fp, 0.9).unwrap();
        let angle = 0.7f64;
        let q =
            DMatrix::from_row_slice(2, 2, &[angle.cos(), -angle.sin(), angle.sin(), angle.cos()]);
        let rotated = &q * &draws;
        let fp_rot = fp_from_draws(rotated);
        let ell_rot = ellipsoid_case1(&fp_rot, 0.9).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(77);
        for _ in 0..200 {
            let x = DVector::from_fn(2, |_, _| rng.gen::<f64>() * 4.0 - 2.0);
            assert_eq!(ell.contains(&x), ell_rot.contains(&(&q * &x)));
        }
    }

    #[test]
    fn diameter_examples() {
        let draws = gaussian_draws(2, 100, 31);
        let mut fp = fp_from_draws(draws);
        fp.override_moments(
            DVector::zeros(2),
            DMatrix::from_row_slice(2, 2, &[1.0, 0.0, 0.0, 4.0]),
        );
        let mut ell = ellipsoid_case1(&fp, 0.9).unwrap();
        ell.radius = 1.0;
        assert_relative_eq!(ell.diameter(), 4.0, epsilon = 1e-12);
    }

    #[test]
    fn diameter_agrees_with_direction_search() {
        let mut rng = ChaCha8Rng::seed_from_u64(41);
        for k in 1..=3usize {
            let a = DMatrix::from_fn(k, k, |_, _| rng.sample::<f64, _>(StandardNormal));
            let sigma = &a * a.transpose() + DMatrix::identity(k, k) * 0.1;
            let draws = gaussian_draws(k, 50, 43 + k as u64);
            let mut fp = fp_from_draws(draws);
            fp.override_moments(DVector::zeros(k), sigma.clone());
            let ell = ellipsoid_case1(&fp, 0.9).unwrap();
            // brute force over random boundary directions
            let sym = 0.5 * (&sigma + sigma.transpose());
            let eig = sym.symmetric_eigen();
            let mut sqrt_sigma = DMatrix::zeros(k, k);
            for i in 0..k {
                sqrt_sigma[(i, i)] = eig.eigenvalues[i].max(0.0).sqrt();
            }
            let sqrt_sigma = &eig.eigenvectors * sqrt_sigma * eig.eigenvectors.transpose();
            let mut best = 0.0f64;
            for _ in 0..10_000 {
                let mut u = DVector::from_fn(k, |_, _| rng.sample::<f64, _>(StandardNormal));
                u /= u.norm();
                let len = 2.0 * ell.radius().sqrt() * (&sqrt_sigma * u).norm();
                best = best.max(len);
            }
            assert!(
                (ell.diameter() - best) / ell.diameter() < 1e-3,
                "k={k}: formula {} search {best}",
                ell.diameter()
            );
            assert!(best <= ell.diameter() + 1e-12);
        }
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(16))]
        #[test]
        fn case2_radius_affine_invariant(seed in 0u64..1000, scale in 0.1f64..5.0, shift in -3.0f64..3.0) {
            let draws = gaussian_draws(2, 500, seed);
            let fp = fp_from_draws(draws.clone());
            let r = ellipsoid_case2(&fp, 0.9).unwrap().radius();
            let a = DMatrix::from_row_slice(2, 2, &[scale, 0.3, 0.0, 1.0 / scale]);
            let mut mapped = &a * &draws;
            for j in 0..mapped.ncols() {
                mapped[(0, j)] += shift;
                mapped[(1, j)] -= shift;
            }
            let fp2 = fp_from_draws(mapped);
            let r2 = ellipsoid_case2(&fp2, 0.9).unwrap().radius();
            prop_assert!((r - r2).abs() < 1e-6 * r.max(1.0), "{r} vs {r2}");
        }

        #[test]
        fn diameter_scales_linearly(c in 0.1f64..10.0) {
            let draws = gaussian_draws(2, 200, 55);
            let mut fp = fp_from_draws(draws.clone());
            let sigma = DMatrix::from_row_slice(2, 2, &[2.0, 0.5, 0.5, 1.0]);
            fp.override_moments(DVector::zeros(2), sigma.clone());
            let d1 = ellipsoid_case1(&fp, 0.9).unwrap().diameter();
            let mut fp2 = fp_from_draws(draws);
            fp2.override_moments(DVector::zeros(2), sigma * (c * c));
            let d2 = ellipsoid_case1(&fp2, 0.9).unwrap().diameter();
            prop_assert!((d2 - c * d1).abs() < 1e-9 * d2.max(1.0));
        }
    }
}
