//! Estimators for the bearings-only regression model: the least-squares
//! criterion and its minimizer, and the marginal maximum likelihood built on
//! Gauss-Hermite quadrature over the trajectory noise.

pub mod estimators;
pub mod nelder_mead;
pub mod quadrature;

pub use estimators::{
    criterion_mn, loglik_jn, lse, marginal_density, mle, pseudolinear_init, BearingProblem,
    LOG_DENSITY_FLOOR,
};
pub use nelder_mead::{nelder_mead, EstimateResult, OptimizerConfig};
pub use quadrature::{gauss_hermite, QuadratureRule};
