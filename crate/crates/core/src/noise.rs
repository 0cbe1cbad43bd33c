//! Trajectory-noise and observation-noise specifications and samplers.
//!
//! All lengths are km internally. Samplers are pure functions of
//! `(spec, stream)`: the same seed always yields the bit-identical sequence,
//! and each `(replication, role)` pair gets its own counter-derived stream so
//! Monte Carlo results do not depend on thread scheduling.

use nalgebra::{Matrix2, Vector2};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha12Rng;
use rand_distr::StandardNormal;

use crate::error::{Error, Result};

/// Trajectory (state) noise law for the latent positions.
#[derive(Debug, Clone, PartialEq)]
pub enum TrajectoryNoise {
    /// No perturbation: the target follows the model exactly.
    None,
    /// i.i.d. N(0, sigma^2 I_2), sigma in km.
    Isotropic { sigma: f64 },
    /// i.i.d. N(0, cov), cov symmetric positive-definite, km^2.
    Anisotropic { cov: Matrix2<f64> },
    /// Per-component AR(1): eps_{k+1} = phi * eps_k + eta_k with
    /// eta_k ~ N(0, sigma_eta^2 I_2), started from the stationary law.
    Ar1 { phi: f64, sigma_eta: f64 },
}

impl TrajectoryNoise {
    pub fn validate(&self) -> Result<()> {
        match self {
            TrajectoryNoise::None => Ok(()),
            TrajectoryNoise::Isotropic { sigma } => {
                if *sigma >= 0.0 && sigma.is_finite() {
                    Ok(())
                } else {
                    Err(Error::Config(format!("isotropic sigma must be >= 0, got {sigma}")))
                }
            }
            TrajectoryNoise::Anisotropic { cov } => {
                let sym = (cov[(0, 1)] - cov[(1, 0)]).abs()
                    <= 1e-12 * cov.norm().max(1.0);
                let det = cov[(0, 0)] * cov[(1, 1)] - cov[(0, 1)] * cov[(1, 0)];
                if sym && cov[(0, 0)] > 0.0 && det > 0.0 {
                    Ok(())
                } else {
                    Err(Error::Config("anisotropic covariance must be symmetric positive-definite".into()))
                }
            }
            TrajectoryNoise::Ar1 { phi, sigma_eta } => {
                if phi.abs() < 1.0 && *sigma_eta >= 0.0 && sigma_eta.is_finite() {
                    Ok(())
                } else {
                    Err(Error::Config(format!(
                        "AR(1) requires |phi| < 1 and sigma_eta >= 0, got phi={phi}, sigma_eta={sigma_eta}"
                    )))
                }
            }
        }
    }

    /// Closed-form `E |eps_1|^2` in km^2.
    pub fn second_moment(&self) -> f64 {
        match self {
            TrajectoryNoise::None => 0.0,
            TrajectoryNoise::Isotropic { sigma } => 2.0 * sigma * sigma,
            TrajectoryNoise::Anisotropic { cov } => cov[(0, 0)] + cov[(1, 1)],
            TrajectoryNoise::Ar1 { phi, sigma_eta } => {
                2.0 * sigma_eta * sigma_eta / (1.0 - phi * phi)
            }
        }
    }

    /// Marginal (stationary) covariance of one noise vector, km^2.
    pub fn marginal_cov(&self) -> Matrix2<f64> {
        match self {
            TrajectoryNoise::None => Matrix2::zeros(),
            TrajectoryNoise::Isotropic { sigma } => Matrix2::identity() * (sigma * sigma),
            TrajectoryNoise::Anisotropic { cov } => *cov,
            TrajectoryNoise::Ar1 { phi, sigma_eta } => {
                Matrix2::identity() * (sigma_eta * sigma_eta / (1.0 - phi * phi))
            }
        }
    }

    /// Samples `n` noise vectors. AR(1) starts at its stationary law and
    /// recurses; the other variants are i.i.d.
    pub fn sample(&self, n: usize, rng: &mut ChaCha12Rng) -> Result<Vec<Vector2<f64>>> {
        self.validate()?;
        let mut out = Vec::with_capacity(n);
        match self {
            TrajectoryNoise::None => out.resize(n, Vector2::zeros()),
            TrajectoryNoise::Isotropic { sigma } => {
                for _ in 0..n {
                    let z1: f64 = rng.sample(StandardNormal);
                    let z2: f64 = rng.sample(StandardNormal);
                    out.push(Vector2::new(sigma * z1, sigma * z2));
                }
            }
            TrajectoryNoise::Anisotropic { cov } => {
                let chol = cov
                    .cholesky()
                    .ok_or_else(|| Error::Config("anisotropic covariance is not SPD".into()))?;
                let l = chol.l();
                for _ in 0..n {
                    let z = Vector2::new(rng.sample(StandardNormal), rng.sample(StandardNormal));
                    out.push(l * z);
                }
            }
            TrajectoryNoise::Ar1 { phi, sigma_eta } => {
                let stat_sd = sigma_eta / (1.0 - phi * phi).sqrt();
                let mut eps = Vector2::new(
                    stat_sd * rng.sample::<f64, _>(StandardNormal),
                    stat_sd * rng.sample::<f64, _>(StandardNormal),
                );
                for _ in 0..n {
                    out.push(eps);
                    let eta = Vector2::new(
                        sigma_eta * rng.sample::<f64, _>(StandardNormal),
                        sigma_eta * rng.sample::<f64, _>(StandardNormal),
                    );
                    eps = *phi * eps + eta;
                }
            }
        }
        Ok(out)
    }
}

/// Per-component AR(1) autocovariance at lag `k`: `phi^k sigma_eta^2 / (1 - phi^2)`.
pub fn ar1_autocovariance(phi: f64, sigma_eta: f64, lag: u32) -> f64 {
    phi.powi(lag as i32) * sigma_eta * sigma_eta / (1.0 - phi * phi)
}

/// Centered Gaussian observation noise with standard deviation `sigma` rad.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ObservationNoise {
    pub sigma: f64,
}

impl ObservationNoise {
    pub fn new(sigma: f64) -> Result<Self> {
        if sigma > 0.0 && sigma.is_finite() {
            Ok(Self { sigma })
        } else {
            Err(Error::Config(format!("observation sigma must be > 0, got {sigma}")))
        }
    }

    pub fn sample(&self, n: usize, rng: &mut ChaCha12Rng) -> Vec<f64> {
        (0..n)
            .map(|_| self.sigma * rng.sample::<f64, _>(StandardNormal))
            .collect()
    }
}

/// Named roles for RNG streams, so that each consumer of randomness within a
/// replication draws from its own substream.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum StreamRole {
    TrajectoryNoise,
    ObservationNoise,
    Dependence,
    Summary,
}

impl StreamRole {
    fn tag(self) -> u64 {
        match self {
            StreamRole::TrajectoryNoise => 1,
            StreamRole::ObservationNoise => 2,
            StreamRole::Dependence => 3,
            StreamRole::Summary => 4,
        }
    }
}

fn splitmix64(state: &mut u64) -> u64 {
    *state = state.wrapping_add(0x9e3779b97f4a7c15);
    let mut z = *state;
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58476d1ce4e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d049bb133111eb);
    z ^ (z >> 31)
}

/// Counter-based stream for `(base_seed, replication, role)`.
pub fn stream(base_seed: u64, replication: u64, role: StreamRole) -> ChaCha12Rng {
    let mut state = base_seed
        ^ replication.wrapping_mul(0x9e3779b97f4a7c15)
        ^ role.tag().wrapping_mul(0xd1342543de82ef95);
    let mut seed = [0u8; 32];
    for chunk in seed.chunks_exact_mut(8) {
        chunk.copy_from_slice(&splitmix64(&mut state).to_le_bytes());
    }
    ChaCha12Rng::from_seed(seed)
}
