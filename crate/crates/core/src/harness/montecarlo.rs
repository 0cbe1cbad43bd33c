//! Seeded Monte Carlo campaigns: repeated simulate-estimate runs with
//! distributional summaries and coverage studies.
//!
//! Replications run on any number of workers; per-replication RNG streams
//! and index-ordered reduction make every summary independent of scheduling.

use std::time::Instant;

use nalgebra::{DMatrix, DVector};
use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::estimate::{gauss_hermite, lse, mle, OptimizerConfig, QuadratureRule};
use crate::inference::{
    confidence_intervals, conservative_a2, conservative_intervals, info_ipsi, info_ir,
    lse_asymptotic_cov, InfoMatrices,
};
use crate::sim::{simulate, Scenario};
use crate::stats::ks_to_gaussian;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum EstimatorKind {
    Lse,
    Mle,
}

impl std::fmt::Display for EstimatorKind {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            EstimatorKind::Lse => write!(f, "lse"),
            EstimatorKind::Mle => write!(f, "mle"),
        }
    }
}

/// Confidence interval families from the asymptotic theory: IC_1 (LSE
/// sandwich), IC_2 (conservative), IC_3 (MLE Fisher).
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum IntervalKind {
    Ic1,
    Ic2,
    Ic3,
}

/// One entry of the seed ledger: everything needed to reproduce a single
/// replication bit-exactly.
#[derive(Debug, Clone)]
pub struct Replication {
    pub rep: u64,
    pub seed: u64,
    /// Estimate in internal parameter order.
    pub theta: DVector<f64>,
    pub value: f64,
    pub evals: usize,
    pub converged: bool,
}

#[derive(Debug, Clone)]
pub struct MonteCarloSummary {
    pub estimator: EstimatorKind,
    pub reps: usize,
    pub base_seed: u64,
    pub n: usize,
    pub theta_star: DVector<f64>,
    /// Seed ledger, one entry per replication in index order.
    pub replications: Vec<Replication>,
    /// `sqrt(n) (theta_hat - theta*)` for converged replications only.
    pub samples: Vec<DVector<f64>>,
    pub mean: DVector<f64>,
    pub cov: DMatrix<f64>,
    /// Per-coordinate KS distance to the reference Gaussian marginal.
    pub ks: Vec<f64>,
    pub nonconverged: usize,
    /// More than 5% non-convergence invalidates the campaign.
    pub flagged_invalid: bool,
    pub wall_clock_s: f64,
}

/// Derives the simulation seed of one replication from the campaign seed.
pub fn replication_seed(base_seed: u64, rep: u64) -> u64 {
    let mut z = base_seed
        .wrapping_add(rep.wrapping_add(1).wrapping_mul(0x9e3779b97f4a7c15));
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58476d1ce4e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d049bb133111eb);
    z ^ (z >> 31)
}

fn run_one(
    scenario: &Scenario,
    estimator: EstimatorKind,
    rep: u64,
    base_seed: u64,
    cfg: &OptimizerConfig,
    quad: &QuadratureRule,
) -> Result<Replication> {
    let seed = replication_seed(base_seed, rep);
    let data = simulate(scenario, seed)?;
    let res = match estimator {
        EstimatorKind::Lse => lse(&data, &scenario.model, &scenario.path, cfg, None)?,
        EstimatorKind::Mle => mle(
            &data,
            &scenario.model,
            &scenario.path,
            &scenario.traj_noise,
            &scenario.obs_noise,
            quad,
            cfg,
            None,
        )?,
    };
    Ok(Replication {
        rep,
        seed,
        theta: res.theta,
        value: res.value,
        evals: res.evals,
        converged: res.converged,
    })
}

/// Runs `reps` independent simulate-estimate replications and summarizes the
/// normalized errors against the reference Gaussian (`I_M^-1` marginals for
/// the LSE, `I^-1` for the MLE).
pub fn run_montecarlo(
    scenario: &Scenario,
    estimator: EstimatorKind,
    reps: usize,
    base_seed: u64,
    reference: &InfoMatrices,
    cfg: &OptimizerConfig,
) -> Result<MonteCarloSummary> {
    if reps == 0 {
        return Err(Error::InvalidArgument("reps must be >= 1".into()));
    }
    let start = Instant::now();
    let quad = gauss_hermite(12)?;
    let replications: Vec<Replication> = (0..reps as u64)
        .into_par_iter()
        .map(|rep| run_one(scenario, estimator, rep, base_seed, cfg, &quad))
        .collect::<Result<Vec<_>>>()?;

    let sqrt_n = (scenario.n as f64).sqrt();
    let m = scenario.model.dim();
    let samples: Vec<DVector<f64>> = replications
        .iter()
        .filter(|r| r.converged)
        .map(|r| (&r.theta - &scenario.theta_star) * sqrt_n)
        .collect();
    let nonconverged = reps - samples.len();
    if samples.len() < 2 {
        return Err(Error::InvalidArgument(format!(
            "campaign produced only {} converged replications",
            samples.len()
        )));
    }
    let count = samples.len() as f64;
    let mean = samples.iter().sum::<DVector<f64>>() / count;
    let mut cov = DMatrix::zeros(m, m);
    for s in &samples {
        let d = s - &mean;
        cov.ger(1.0, &d, &d, 1.0);
    }
    cov /= count - 1.0;

    let reference_cov = match estimator {
        EstimatorKind::Lse => &reference.i_m_inv,
        EstimatorKind::Mle => &reference.i_inv,
    };
    let mut ks = Vec::with_capacity(m);
    for i in 0..m {
        let coord: Vec<f64> = samples.iter().map(|s| s[i]).collect();
        let sd = reference_cov[(i, i)].max(0.0).sqrt();
        ks.push(if sd > 0.0 {
            ks_to_gaussian(&coord, 0.0, sd)?
        } else {
            f64::NAN
        });
    }

    Ok(MonteCarloSummary {
        estimator,
        reps,
        base_seed,
        n: scenario.n,
        theta_star: scenario.theta_star.clone(),
        replications,
        samples,
        mean,
        cov,
        ks,
        nonconverged,
        flagged_invalid: (nonconverged as f64) > 0.05 * reps as f64,
        wall_clock_s: start.elapsed().as_secs_f64(),
    })
}

/// Fraction of converged replications whose interval of the given kind
/// contains `theta*`.
///
/// IC_1 and IC_2 are plug-in intervals re-evaluated at each `theta_hat`
/// (`grid` controls the information-matrix quadrature); IC_3 uses the
/// reference Fisher inverse evaluated at `theta*`.
pub fn coverage_study(
    scenario: &Scenario,
    summary: &MonteCarloSummary,
    level: f64,
    kind: IntervalKind,
    reference: &InfoMatrices,
    grid: usize,
) -> Result<f64> {
    let quad = gauss_hermite(12)?;
    let a2 = conservative_a2(scenario.r_min, scenario.traj_noise.second_moment())?;
    let converged: Vec<&Replication> =
        summary.replications.iter().filter(|r| r.converged).collect();
    if converged.is_empty() {
        return Err(Error::InvalidArgument("no converged replications".into()));
    }
    let hits: Result<Vec<bool>> = converged
        .par_iter()
        .map(|r| {
            let report = match kind {
                IntervalKind::Ic1 => {
                    let ir = info_ir(&scenario.model, &r.theta, &scenario.path, grid)?;
                    let ipsi = info_ipsi(
                        &scenario.model,
                        &r.theta,
                        &scenario.path,
                        &scenario.traj_noise,
                        &quad,
                        grid,
                    )?;
                    let cov = lse_asymptotic_cov(&ir, &ipsi, scenario.obs_noise.sigma)?;
                    confidence_intervals(&r.theta, &cov, scenario.n, level)?
                }
                IntervalKind::Ic2 => {
                    let ir = info_ir(&scenario.model, &r.theta, &scenario.path, grid)?;
                    conservative_intervals(
                        &r.theta,
                        &ir,
                        a2,
                        scenario.obs_noise.sigma,
                        scenario.n,
                        level,
                    )?
                }
                IntervalKind::Ic3 => {
                    confidence_intervals(&r.theta, &reference.i_inv, scenario.n, level)?
                }
            };
            Ok(report.covers(&scenario.theta_star))
        })
        .collect();
    let hits = hits?;
    Ok(hits.iter().filter(|&&h| h).count() as f64 / hits.len() as f64)
}
