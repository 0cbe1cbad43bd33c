//! Dependent trajectory noise: long-run variance of time averages of a
//! noise functional, and seeded LLN/CLT experiments for the AR(1) case.

use std::fmt;
use std::io::Write as _;
use std::path::Path;
use std::sync::Arc;

use nalgebra::Vector2;
use rand::Rng;
use rand_distr::StandardNormal;

use crate::error::{Error, Result};
use crate::noise::{stream, StreamRole, TrajectoryNoise};
use crate::stats::{ks_to_gaussian, mean_var};

/// Scalar functional `F(eps, t)` of the trajectory noise.
#[derive(Clone)]
pub enum Functional {
    /// `F(eps, t) = eps[i]`.
    Coordinate(usize),
    /// `F(eps, t) = a . eps`.
    Linear(Vector2<f64>),
    Custom(Arc<dyn Fn(Vector2<f64>, f64) -> f64 + Send + Sync>),
}

impl fmt::Debug for Functional {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Functional::Coordinate(i) => write!(f, "Coordinate({i})"),
            Functional::Linear(a) => write!(f, "Linear({}, {})", a.x, a.y),
            Functional::Custom(_) => write!(f, "Custom(..)"),
        }
    }
}

impl Functional {
    pub fn eval(&self, eps: Vector2<f64>, t: f64) -> f64 {
        match self {
            Functional::Coordinate(i) => eps[*i],
            Functional::Linear(a) => a.dot(&eps),
            Functional::Custom(f) => f(eps, t),
        }
    }

    /// Constant linear coefficient, when the functional admits a closed-form
    /// covariance under Gaussian noise.
    fn linear_coeff(&self) -> Option<Vector2<f64>> {
        match self {
            Functional::Coordinate(0) => Some(Vector2::new(1.0, 0.0)),
            Functional::Coordinate(1) => Some(Vector2::new(0.0, 1.0)),
            Functional::Coordinate(_) => None,
            Functional::Linear(a) => Some(*a),
            Functional::Custom(_) => None,
        }
    }
}

/// Long-run variance `gamma^2` of `n^{-1/2} sum F(eps_k, t_k)`.
#[derive(Debug, Clone)]
pub struct LongRunVariance {
    /// `int Var F dt + 2 sum_k int Cov(F_0, F_k) dt`, truncated at `lag_cap`.
    pub gamma2: f64,
    pub lag_cap: usize,
    /// `int Var F(eps_0, t) dt`.
    pub var_integral: f64,
    /// `int Cov(F(eps_0, t), F(eps_k, t)) dt` for k = 1..=lag_cap.
    pub lag_cov_integrals: Vec<f64>,
    /// Whether the geometric tail beyond `lag_cap` is below 1e-3 relative.
    pub converged: bool,
}

fn ar1_params(noise: &TrajectoryNoise) -> Option<(f64, f64)> {
    match noise {
        TrajectoryNoise::Ar1 { phi, sigma_eta } => Some((*phi, *sigma_eta)),
        _ => None,
    }
}

/// Truncated long-run variance of the time average of `F` under the given
/// noise. Linear functionals use the closed-form Gaussian covariances; custom
/// functionals use paired Monte Carlo with common random numbers.
pub fn long_run_variance(
    f: &Functional,
    noise: &TrajectoryNoise,
    lag_cap: usize,
    t_grid: &[f64],
    mc_per_lag: usize,
    seed: u64,
) -> Result<LongRunVariance> {
    noise.validate()?;
    if lag_cap == 0 {
        return Err(Error::InvalidArgument("lag cap must be >= 1".into()));
    }
    if t_grid.is_empty() {
        return Err(Error::InvalidArgument("t grid must be nonempty".into()));
    }
    if let Functional::Coordinate(i) = f {
        if *i > 1 {
            return Err(Error::InvalidArgument(format!("coordinate index {i} out of range")));
        }
    }
    let phi = ar1_params(noise).map(|(phi, _)| phi).unwrap_or(0.0);
    let cov = noise.marginal_cov();

    let (var_integral, lag_cov_integrals) = if let Some(a) = f.linear_coeff() {
        // closed form: per-component AR(1) with a common phi gives
        // Cov(a.eps_0, a.eps_k) = phi^k a^T C a
        let base = (a.transpose() * cov * a)[(0, 0)];
        let lags = (1..=lag_cap).map(|k| phi.powi(k as i32) * base).collect();
        (base, lags)
    } else {
        mc_lag_covariances(f, noise, lag_cap, t_grid, mc_per_lag, seed)?
    };

    let gamma2 = var_integral + 2.0 * lag_cov_integrals.iter().sum::<f64>();
    // geometric tail bound: the omitted lags are dominated by
    // 2 |cov_K| phi / (1 - phi)
    let tail = if phi.abs() < 1.0 && phi != 0.0 {
        2.0 * lag_cov_integrals.last().copied().unwrap_or(0.0).abs() * phi.abs()
            / (1.0 - phi.abs())
    } else {
        0.0
    };
    let converged = tail <= 1e-3 * gamma2.abs() + 1e-15;
    Ok(LongRunVariance { gamma2, lag_cap, var_integral, lag_cov_integrals, converged })
}

/// Paired Monte Carlo covariances with common random numbers: one shared
/// stationary draw per sample feeds every lag.
fn mc_lag_covariances(
    f: &Functional,
    noise: &TrajectoryNoise,
    lag_cap: usize,
    t_grid: &[f64],
    mc_per_lag: usize,
    seed: u64,
) -> Result<(f64, Vec<f64>)> {
    if mc_per_lag < 2 {
        return Err(Error::InvalidArgument("mc_per_lag must be >= 2".into()));
    }
    let mut rng = stream(seed, 0, StreamRole::Dependence);
    let nt = t_grid.len() as f64;
    let (phi, s0) = match ar1_params(noise) {
        Some((phi, sigma_eta)) => (phi, sigma_eta / (1.0 - phi * phi).sqrt()),
        None => (0.0, 0.0),
    };
    let chol = noise
        .marginal_cov()
        .cholesky()
        .ok_or_else(|| Error::Config("noise covariance is not positive-definite".into()))?
        .l();

    // accumulators: E F0, E F0^2, and per lag (E Fk, E F0 Fk), each averaged
    // over the t grid
    let mut m0 = 0.0;
    let mut m00 = 0.0;
    let mut mk = vec![0.0; lag_cap];
    let mut m0k = vec![0.0; lag_cap];
    for _ in 0..mc_per_lag {
        let z = Vector2::new(rng.sample::<f64, _>(StandardNormal), rng.sample(StandardNormal));
        let eps0 = chol * z;
        for &t in t_grid {
            let f0 = f.eval(eps0, t);
            m0 += f0 / nt;
            m00 += f0 * f0 / nt;
        }
        for k in 1..=lag_cap {
            let eps_k = if phi == 0.0 {
                // independent across time: fresh draw
                let z = Vector2::new(
                    rng.sample::<f64, _>(StandardNormal),
                    rng.sample(StandardNormal),
                );
                chol * z
            } else {
                let decay = phi.powi(k as i32);
                let w_sd = s0 * (1.0 - decay * decay).sqrt();
                let z = Vector2::new(
                    rng.sample::<f64, _>(StandardNormal),
                    rng.sample(StandardNormal),
                );
                eps0 * decay + z * w_sd
            };
            for &t in t_grid {
                let f0 = f.eval(eps0, t);
                let fk = f.eval(eps_k, t);
                mk[k - 1] += fk / nt;
                m0k[k - 1] += f0 * fk / nt;
            }
        }
    }
    let n = mc_per_lag as f64;
    let mean0 = m0 / n;
    let var = m00 / n - mean0 * mean0;
    let covs = (0..lag_cap)
        .map(|i| m0k[i] / n - mean0 * (mk[i] / n))
        .collect();
    Ok((var, covs))
}

/// Seeded LLN + CLT experiment on `n^{-1/2} sum F(eps_k, t_k)`.
#[derive(Debug, Clone)]
pub struct CltSummary {
    pub n: usize,
    pub reps: usize,
    /// Reference long-run variance for the limiting Gaussian.
    pub gamma2: f64,
    /// Mean over replications of the time average `n^{-1} sum F` (LLN check).
    pub lln_mean: f64,
    /// Empirical variance of the normalized sums.
    pub emp_var: f64,
    /// KS distance of the normalized sums to `N(0, gamma2)`; `None` when the
    /// limit is degenerate.
    pub ks: Option<f64>,
    pub samples: Vec<f64>,
}

pub fn clt_experiment(
    f: &Functional,
    noise: &TrajectoryNoise,
    n: usize,
    reps: usize,
    base_seed: u64,
    gamma2_ref: Option<f64>,
) -> Result<CltSummary> {
    if n == 0 || reps < 2 {
        return Err(Error::InvalidArgument("need n >= 1 and reps >= 2".into()));
    }
    let gamma2 = match gamma2_ref {
        Some(g) => g,
        None => {
            let t_grid: Vec<f64> = (1..=16).map(|k| k as f64 / 16.0).collect();
            long_run_variance(f, noise, 60, &t_grid, 100_000, base_seed ^ 0x9e37)?.gamma2
        }
    };
    let sqrt_n = (n as f64).sqrt();
    let mut samples = Vec::with_capacity(reps);
    for rep in 0..reps {
        let mut rng = stream(base_seed, rep as u64, StreamRole::Dependence);
        let eps = noise.sample(n, &mut rng)?;
        let sum: f64 = eps
            .iter()
            .enumerate()
            .map(|(k, &e)| f.eval(e, (k + 1) as f64 / n as f64))
            .sum();
        samples.push(sum / sqrt_n);
    }
    let (mean, emp_var) = mean_var(&samples)?;
    let ks = if gamma2 > 0.0 {
        Some(ks_to_gaussian(&samples, 0.0, gamma2.sqrt())?)
    } else {
        None
    };
    Ok(CltSummary { n, reps, gamma2, lln_mean: mean / sqrt_n, emp_var, ks, samples })
}

/// Writes an experiment summary as CSV with header `stat,value`.
pub fn write_clt_csv(path: &Path, s: &CltSummary) -> Result<()> {
    let mut out = Vec::new();
    writeln!(out, "stat,value")?;
    writeln!(out, "n,{}", s.n)?;
    writeln!(out, "reps,{}", s.reps)?;
    writeln!(out, "gamma2,{:.16e}", s.gamma2)?;
    writeln!(out, "lln_mean,{:.16e}", s.lln_mean)?;
    writeln!(out, "emp_var,{:.16e}", s.emp_var)?;
    writeln!(out, "ks,{}", s.ks.map_or("nan".to_string(), |k| format!("{k:.16e}")))?;
    std::fs::write(path, out)?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    const AR1: TrajectoryNoise = TrajectoryNoise::Ar1 { phi: 0.6, sigma_eta: 0.008 };

    fn unit_grid(n: usize) -> Vec<f64> {
        (1..=n).map(|k| k as f64 / n as f64).collect()
    }

    #[test]
    fn ar1_closed_form_long_run_variance() {
        // spectral density at zero: (sigma_eta^2/(1-phi^2)) (1+phi)/(1-phi)
        let lrv = long_run_variance(&Functional::Coordinate(0), &AR1, 40, &unit_grid(8), 10, 1)
            .unwrap();
        assert_relative_eq!(lrv.gamma2, 4e-4, max_relative = 1e-6);
        assert_relative_eq!(lrv.var_integral, 1e-4, max_relative = 1e-12);
        assert!(lrv.converged);
    }

    #[test]
    fn iid_noise_reduces_to_the_variance() {
        let noise = TrajectoryNoise::Isotropic { sigma: 0.01 };
        let lrv = long_run_variance(&Functional::Coordinate(1), &noise, 10, &unit_grid(4), 10, 1)
            .unwrap();
        assert_relative_eq!(lrv.gamma2, 1e-4, max_relative = 1e-12);
        assert!(lrv.lag_cov_integrals.iter().all(|&c| c == 0.0));
        assert!(lrv.converged);
    }

    #[test]
    fn linear_functional_mixes_components() {
        let a = Vector2::new(0.3, -0.4);
        let lrv = long_run_variance(&Functional::Linear(a), &AR1, 40, &unit_grid(4), 10, 1)
            .unwrap();
        // components are independent AR(1) with common phi
        assert_relative_eq!(lrv.gamma2, 4e-4 * (0.09 + 0.16), max_relative = 1e-6);
    }

    #[test]
    fn odd_bounded_functional_with_symmetric_independent_noise() {
        // bounded odd F, symmetric independent noise: lag covariances vanish
        // and the time average is centered
        let f = Functional::Custom(Arc::new(|e: Vector2<f64>, _| (50.0 * e.x).tanh()));
        let noise = TrajectoryNoise::Isotropic { sigma: 0.01 };
        let lrv = long_run_variance(&f, &noise, 6, &unit_grid(4), 200_000, 7).unwrap();
        let mc_band = 4.0 * lrv.var_integral / (200_000f64).sqrt();
        for (k, &c) in lrv.lag_cov_integrals.iter().enumerate() {
            assert!(c.abs() < mc_band, "lag {} cov {c} exceeds MC band {mc_band}", k + 1);
        }
        let clt = clt_experiment(&f, &noise, 2000, 200, 11, Some(lrv.gamma2)).unwrap();
        assert!(clt.lln_mean.abs() < 5e-3, "LLN mean {}", clt.lln_mean);
    }

    #[test]
    fn ar1_correlations_of_a_nonlinear_functional_are_damped() {
        // Hermite expansion: for odd F and lag correlation rho = phi^k,
        // Cov(F_0, F_k) = sum_{odd j} c_j^2 rho^j <= rho Var F
        let f = Functional::Custom(Arc::new(|e: Vector2<f64>, _| (50.0 * e.x).tanh()));
        let lrv = long_run_variance(&f, &AR1, 4, &unit_grid(4), 400_000, 13).unwrap();
        let mc_band = 4.0 * lrv.var_integral / (400_000f64).sqrt();
        for (k, &c) in lrv.lag_cov_integrals.iter().enumerate() {
            let cap = 0.6f64.powi(k as i32 + 1) * lrv.var_integral;
            assert!(c > -mc_band, "lag {} cov {c} below zero", k + 1);
            assert!(c < cap + mc_band, "lag {} cov {c} above damped cap {cap}", k + 1);
        }
    }

    #[test]
    fn custom_mc_agrees_with_closed_form() {
        let f = Functional::Custom(Arc::new(|e: Vector2<f64>, _| e.x));
        let mc = long_run_variance(&f, &AR1, 30, &unit_grid(4), 400_000, 3).unwrap();
        assert_relative_eq!(mc.gamma2, 4e-4, max_relative = 0.05);
    }

    #[test]
    fn truncation_is_monotone_with_geometric_tail() {
        let grid = unit_grid(4);
        let full = long_run_variance(&Functional::Coordinate(0), &AR1, 40, &grid, 10, 1)
            .unwrap()
            .gamma2;
        let mut prev = f64::NEG_INFINITY;
        for k in 1..=12 {
            let lrv = long_run_variance(&Functional::Coordinate(0), &AR1, k, &grid, 10, 1).unwrap();
            assert!(lrv.gamma2 > prev);
            prev = lrv.gamma2;
            let bound = 2.0 * 0.6f64.powi(k as i32 + 1) / (1.0 - 0.6) * lrv.var_integral;
            assert!((full - lrv.gamma2).abs() <= bound * (1.0 + 1e-12));
        }
        // too-small lag cap is flagged, not an error
        let short = long_run_variance(&Functional::Coordinate(0), &AR1, 2, &grid, 10, 1).unwrap();
        assert!(!short.converged);
    }

    #[test]
    fn clt_experiment_matches_gamma2() {
        let clt = clt_experiment(&Functional::Coordinate(0), &AR1, 4000, 800, 42, None).unwrap();
        assert_relative_eq!(clt.gamma2, 4e-4, max_relative = 1e-6);
        assert_relative_eq!(clt.emp_var, 4e-4, max_relative = 0.15);
        assert!(clt.ks.unwrap() < 0.05, "KS {}", clt.ks.unwrap());
        assert!(clt.lln_mean.abs() < 1e-3);
    }

    #[test]
    fn variance_gap_shrinks_with_n() {
        // at n = 4 the truncated covariance sum sits ~40% below gamma2; by
        // n = 10^4 only MC noise (~3% at these reps) remains
        let small = clt_experiment(&Functional::Coordinate(0), &AR1, 4, 2000, 5, None).unwrap();
        let large = clt_experiment(&Functional::Coordinate(0), &AR1, 10_000, 2000, 5, None).unwrap();
        let gap_small = (small.emp_var - small.gamma2).abs();
        let gap_large = (large.emp_var - large.gamma2).abs();
        assert!(gap_small > 0.2 * small.gamma2, "small-n gap {gap_small}");
        assert!(gap_large < 0.5 * gap_small, "gap did not shrink: {gap_large} vs {gap_small}");
        assert_relative_eq!(large.emp_var, large.gamma2, max_relative = 0.12);
    }

    #[test]
    fn degenerate_noise_is_degenerate() {
        let clt = clt_experiment(&Functional::Coordinate(0), &TrajectoryNoise::None, 100, 10, 1, None)
            .unwrap();
        assert_eq!(clt.gamma2, 0.0);
        assert!(clt.samples.iter().all(|&s| s == 0.0));
        assert!(clt.ks.is_none());
    }

    #[test]
    fn summary_csv_layout() {
        let dir = tempfile::tempdir().unwrap();
        let clt = clt_experiment(&Functional::Coordinate(0), &AR1, 500, 50, 9, None).unwrap();
        let path = dir.path().join("clt.csv");
        write_clt_csv(&path, &clt).unwrap();
        let text = std::fs::read_to_string(&path).unwrap();
        let mut lines = text.lines();
        assert_eq!(lines.next(), Some("stat,value"));
        assert!(text.contains("\ngamma2,"));
        assert!(text.contains("\nks,"));
    }
}
