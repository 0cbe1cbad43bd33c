//! CSV emitters for campaign outputs: plotting data (histograms, ECDFs),
//! per-replication sample ledgers, estimate dumps, and `summary.csv`.
//!
//! All numbers use 17 significant digits so files are byte-deterministic and
//! round-trip exactly.

use std::io::Write as _;
use std::path::Path;

use crate::error::Result;
use crate::estimate::EstimateResult;
use crate::harness::montecarlo::MonteCarloSummary;
use crate::stats::{histogram, ks_to_gaussian, Bin, Ecdf};

/// Distributional summary of one scalar sample set against a Gaussian
/// reference marginal.
#[derive(Debug, Clone)]
pub struct Summary1d {
    pub bins: Vec<Bin>,
    pub ecdf: Ecdf,
    pub ks: f64,
}

/// Histogram, ECDF and KS distance of `samples` vs `N(ref_mean, ref_sd^2)`.
pub fn summarize(samples: &[f64], ref_mean: f64, ref_sd: f64, bins: usize) -> Result<Summary1d> {
    Ok(Summary1d {
        bins: histogram(samples, bins)?,
        ecdf: Ecdf::new(samples)?,
        ks: ks_to_gaussian(samples, ref_mean, ref_sd)?,
    })
}

/// Writes an estimate as CSV with header `coord,estimate,converged,evals`.
pub fn write_estimate_csv(path: &Path, result: &EstimateResult) -> Result<()> {
    let mut out = Vec::new();
    writeln!(out, "coord,estimate,converged,evals")?;
    for (i, v) in result.theta.iter().enumerate() {
        writeln!(out, "{i},{v:.16e},{},{}", result.converged, result.evals)?;
    }
    std::fs::write(path, out)?;
    Ok(())
}

/// Writes the per-replication seed ledger and normalized errors:
/// `rep,seed,converged,s0,...`.
pub fn write_samples_csv(path: &Path, summary: &MonteCarloSummary) -> Result<()> {
    let m = summary.theta_star.len();
    let sqrt_n = (summary.n as f64).sqrt();
    let mut out = Vec::new();
    write!(out, "rep,seed,converged")?;
    for i in 0..m {
        write!(out, ",s{i}")?;
    }
    writeln!(out)?;
    for r in &summary.replications {
        write!(out, "{},{},{}", r.rep, r.seed, r.converged)?;
        for i in 0..m {
            write!(out, ",{:.16e}", (r.theta[i] - summary.theta_star[i]) * sqrt_n)?;
        }
        writeln!(out)?;
    }
    std::fs::write(path, out)?;
    Ok(())
}

/// Writes per-coordinate histograms: `coord,bin_lo,bin_hi,count`.
pub fn write_histograms_csv(path: &Path, summary: &MonteCarloSummary, bins: usize) -> Result<()> {
    let m = summary.theta_star.len();
    let mut out = Vec::new();
    writeln!(out, "coord,bin_lo,bin_hi,count")?;
    for i in 0..m {
        let coord: Vec<f64> = summary.samples.iter().map(|s| s[i]).collect();
        for b in histogram(&coord, bins)? {
            writeln!(out, "{i},{:.16e},{:.16e},{}", b.lo, b.hi, b.count)?;
        }
    }
    std::fs::write(path, out)?;
    Ok(())
}

/// Writes per-coordinate right-continuous ECDFs: `coord,x,f`.
pub fn write_ecdfs_csv(path: &Path, summary: &MonteCarloSummary) -> Result<()> {
    let m = summary.theta_star.len();
    let mut out = Vec::new();
    writeln!(out, "coord,x,f")?;
    for i in 0..m {
        let coord: Vec<f64> = summary.samples.iter().map(|s| s[i]).collect();
        let ecdf = Ecdf::new(&coord)?;
        for &x in ecdf.points() {
            writeln!(out, "{i},{x:.16e},{:.16e}", ecdf.eval(x))?;
        }
    }
    std::fs::write(path, out)?;
    Ok(())
}

/// Writes the campaign `summary.csv` with `stat,value` rows; optional named
/// coverage rates are appended.
pub fn write_summary_csv(
    path: &Path,
    summary: &MonteCarloSummary,
    coverage: &[(String, f64)],
) -> Result<()> {
    let m = summary.theta_star.len();
    let mut out = Vec::new();
    writeln!(out, "stat,value")?;
    writeln!(out, "estimator,{}", summary.estimator)?;
    writeln!(out, "reps,{}", summary.reps)?;
    writeln!(out, "n,{}", summary.n)?;
    writeln!(out, "base_seed,{}", summary.base_seed)?;
    writeln!(out, "converged,{}", summary.samples.len())?;
    writeln!(out, "nonconverged,{}", summary.nonconverged)?;
    writeln!(out, "flagged_invalid,{}", summary.flagged_invalid)?;
    for i in 0..m {
        writeln!(out, "mean_{i},{:.16e}", summary.mean[i])?;
    }
    for i in 0..m {
        for j in 0..m {
            writeln!(out, "cov_{i}_{j},{:.16e}", summary.cov[(i, j)])?;
        }
    }
    for (i, k) in summary.ks.iter().enumerate() {
        writeln!(out, "ks_{i},{k:.16e}")?;
    }
    for (name, rate) in coverage {
        writeln!(out, "coverage_{name},{rate:.16e}")?;
    }
    // wall-clock time deliberately stays out: summaries must be
    // byte-identical across reruns and worker counts
    std::fs::write(path, out)?;
    Ok(())
}
