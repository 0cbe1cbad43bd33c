//! Bearings-only tracking estimation laboratory.
//!
//! Simulates the semiparametric bearings-only regression model, implements
//! its least-squares and marginal maximum-likelihood estimators with their
//! asymptotic covariance matrices and confidence regions (standard and
//! conservative), and verifies the distributional claims by seeded Monte
//! Carlo at desk scale.

pub mod dependence;
pub mod error;
pub mod estimate;
pub mod geometry;
pub mod harness;
pub mod inference;
pub mod noise;
pub mod sim;
pub mod stats;

pub use error::{Error, Result};
