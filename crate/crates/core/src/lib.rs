//! Construction and empirical validation of posterior credible ellipsoids
//! for vectors of linear functionals in Gaussian-noise nonlinear regression.
//!
//! The library provides the spectral approximation spaces, forward maps
//! (a linear conjugate oracle plus Darcy and Schrödinger elliptic inverse
//! problems), information matrices with their renormalized covariances,
//! prior-preserving MCMC, quantile-calibrated credible ellipsoids, and a
//! harness for coverage Monte Carlo and asymptotic-condition audits.

pub mod credsets;
pub mod error;
pub mod fisher;
pub mod forward;
pub mod harness;
pub mod posterior;
pub mod rng;
pub mod spectral;

pub mod cli;

pub use error::{Error, Result};
