//! Asymptotic covariance matrices, Fisher information, and confidence
//! regions (standard and conservative).
//!
//! All time integrals are Riemann averages on the grid t_k = k/n_g, matching
//! how the estimation criteria weight time.

use std::io::Write as _;
use std::path::Path;

use nalgebra::{DMatrix, DVector};
use statrs::distribution::{ChiSquared, ContinuousCDF, Normal};

use crate::error::{Error, Result};
use crate::estimate::QuadratureRule;
use crate::geometry::{
    bearing_residual, grad_theta_bearing, grad_theta_bearing_at, ObserverPath, TrajectoryModel,
};
use crate::noise::{ObservationNoise, TrajectoryNoise};

/// Conditioning threshold beyond which an information matrix is treated as
/// singular: double-precision sandwich inversions degrade past this.
pub const SINGULAR_COND_LIMIT: f64 = 1e12;

/// Worst-case bound constant `pi^2 (1 + pi^(-2/3))^3`.
pub const CONSERVATIVE_CONSTANT: f64 = 31.108145935833903;

/// The asymptotic information/covariance bundle for one scenario.
#[derive(Debug, Clone)]
pub struct InfoMatrices {
    /// Noise-free regression information `int grad Psi grad Psi^T dt`.
    pub i_r: DMatrix<f64>,
    /// State-noise contribution `int E{dPsi}^2 grad Psi grad Psi^T dt`.
    pub i_psi: DMatrix<f64>,
    /// LSE sandwich covariance `I_R^-1 (I_Psi + sigma^2 I_R) I_R^-1`.
    pub i_m_inv: DMatrix<f64>,
    /// Parametric Fisher information of the marginal density.
    pub i: DMatrix<f64>,
    pub i_inv: DMatrix<f64>,
    pub cond_i_r: f64,
    pub cond_i: f64,
    /// Time-grid size used for the Riemann averages.
    pub grid: usize,
}

fn condition_number(m: &DMatrix<f64>) -> f64 {
    let sv = m.clone().singular_values();
    sv.max() / sv.min().max(f64::MIN_POSITIVE)
}

fn symmetrize(m: &mut DMatrix<f64>) {
    let t = m.transpose();
    *m += t;
    *m *= 0.5;
}

fn invert_spd(m: &DMatrix<f64>, what: &str) -> Result<DMatrix<f64>> {
    let cond = condition_number(m);
    if cond > SINGULAR_COND_LIMIT {
        return Err(Error::Observability { cond, limit: SINGULAR_COND_LIMIT });
    }
    m.clone()
        .try_inverse()
        .ok_or_else(|| Error::InvalidArgument(format!("{what} is not invertible")))
}

/// `I_R(theta)`: Riemann average of the bearing-gradient outer products.
pub fn info_ir(
    model: &TrajectoryModel,
    theta: &DVector<f64>,
    path: &ObserverPath,
    grid: usize,
) -> Result<DMatrix<f64>> {
    if grid == 0 {
        return Err(Error::InvalidArgument("grid size must be >= 1".into()));
    }
    let m = model.dim();
    let mut acc = DMatrix::zeros(m, m);
    for k in 1..=grid {
        let t = k as f64 / grid as f64;
        let g = grad_theta_bearing(model, theta, t, path)?;
        acc.ger(1.0, &g, &g, 1.0);
    }
    acc /= grid as f64;
    symmetrize(&mut acc);
    Ok(acc)
}

/// Per-node bearings and theta-gradients at the displaced positions
/// `S_theta(t) + u_j`, the shared kernel of the marginal-density integrals.
fn displaced_terms(
    model: &TrajectoryModel,
    theta: &DVector<f64>,
    path: &ObserverPath,
    nodes: &[(nalgebra::Vector2<f64>, f64)],
    t: f64,
    with_grads: bool,
) -> Result<(f64, Vec<f64>, Vec<DVector<f64>>)> {
    let basis = model.basis_values(t);
    let s = model.position(theta, t)?;
    let o = path.position(t);
    let psi0 = crate::geometry::bearing_from(s, o, t)?;
    let mut psis = Vec::with_capacity(nodes.len());
    let mut grads = Vec::new();
    for (u, _) in nodes {
        let x = s + u;
        psis.push(crate::geometry::bearing_from(x, o, t)?);
        if with_grads {
            grads.push(grad_theta_bearing_at(model, &basis, x, o, t)?);
        }
    }
    Ok((psi0, psis, grads))
}

/// `I_Psi(theta)`: inner expectation `E{dPsi}^2` by tensorized quadrature at
/// each grid time, weighted by the gradient outer product.
pub fn info_ipsi(
    model: &TrajectoryModel,
    theta: &DVector<f64>,
    path: &ObserverPath,
    traj_noise: &TrajectoryNoise,
    quad: &QuadratureRule,
    grid: usize,
) -> Result<DMatrix<f64>> {
    if grid == 0 {
        return Err(Error::InvalidArgument("grid size must be >= 1".into()));
    }
    let nodes = quad.displacement_nodes(traj_noise)?;
    let m = model.dim();
    let mut acc = DMatrix::zeros(m, m);
    for k in 1..=grid {
        let t = k as f64 / grid as f64;
        let (psi0, psis, _) = displaced_terms(model, theta, path, &nodes, t, false)?;
        let esq: f64 = psis
            .iter()
            .zip(&nodes)
            .map(|(&psi, (_, w))| {
                let d = bearing_residual(psi, psi0);
                w * d * d
            })
            .sum();
        let g = grad_theta_bearing(model, theta, t, path)?;
        acc.ger(esq, &g, &g, 1.0);
    }
    acc /= grid as f64;
    symmetrize(&mut acc);
    Ok(acc)
}

/// LSE sandwich covariance `I_R^-1 (I_Psi + sigma^2 I_R) I_R^-1`.
pub fn lse_asymptotic_cov(
    i_r: &DMatrix<f64>,
    i_psi: &DMatrix<f64>,
    sigma: f64,
) -> Result<DMatrix<f64>> {
    let inv = invert_spd(i_r, "I_R")?;
    let mut out = &inv * (i_psi + i_r * (sigma * sigma)) * &inv;
    symmetrize(&mut out);
    Ok(out)
}

fn fisher_accumulate(
    model: &TrajectoryModel,
    theta: &DVector<f64>,
    path: &ObserverPath,
    traj_noise: &TrajectoryNoise,
    obs_noise: &ObservationNoise,
    quad: &QuadratureRule,
    grid: usize,
) -> Result<(DMatrix<f64>, DVector<f64>)> {
    if grid == 0 {
        return Err(Error::InvalidArgument("grid size must be >= 1".into()));
    }
    let nodes = quad.displacement_nodes(traj_noise)?;
    let m = model.dim();
    let sigma = obs_noise.sigma;
    let inv_s2 = 1.0 / (sigma * sigma);
    let mut info = DMatrix::zeros(m, m);
    let mut mean = DVector::zeros(m);
    let mut dp = DVector::zeros(m);
    for k in 1..=grid {
        let t = k as f64 / grid as f64;
        let (_, psis, grads) = displaced_terms(model, theta, path, &nodes, t, true)?;
        // outer expectation over Y = Psi(S + eps) + V, nested quadrature
        for (i, (_, wi)) in nodes.iter().enumerate() {
            for (&zv, &wv) in quad.nodes.iter().zip(&quad.weights) {
                let y = psis[i] + sigma * zv;
                let weight = wi * wv;
                let mut p = 0.0;
                dp.fill(0.0);
                for (j, (_, wj)) in nodes.iter().enumerate() {
                    let res = bearing_residual(y, psis[j]);
                    let g = wj * (-0.5 * res * res * inv_s2).exp();
                    p += g;
                    dp.axpy(g * res * inv_s2, &grads[j], 1.0);
                }
                if p < 1e-300 {
                    continue;
                }
                let score = &dp / p;
                info.ger(weight, &score, &score, 1.0);
                mean.axpy(weight, &score, 1.0);
            }
        }
    }
    info /= grid as f64;
    mean /= grid as f64;
    symmetrize(&mut info);
    Ok((info, mean))
}

/// Parametric Fisher information `I(theta)` of the marginal observation
/// density and its inverse, by nested quadrature (trajectory-noise nodes
/// times observation-noise nodes) and a Riemann time average.
pub fn parametric_fisher(
    model: &TrajectoryModel,
    theta: &DVector<f64>,
    path: &ObserverPath,
    traj_noise: &TrajectoryNoise,
    obs_noise: &ObservationNoise,
    quad: &QuadratureRule,
    grid: usize,
) -> Result<(DMatrix<f64>, DMatrix<f64>)> {
    let (info, _) = fisher_accumulate(model, theta, path, traj_noise, obs_noise, quad, grid)?;
    let inv = invert_spd(&info, "Fisher information")?;
    Ok((info, inv))
}

/// Mean of the marginal score under the same nested quadrature; vanishes at
/// the data-generating parameter.
pub fn score_mean(
    model: &TrajectoryModel,
    theta: &DVector<f64>,
    path: &ObserverPath,
    traj_noise: &TrajectoryNoise,
    obs_noise: &ObservationNoise,
    quad: &QuadratureRule,
    grid: usize,
) -> Result<DVector<f64>> {
    Ok(fisher_accumulate(model, theta, path, traj_noise, obs_noise, quad, grid)?.1)
}

/// All information matrices for one scenario at a common grid.
pub fn compute_info_matrices(
    model: &TrajectoryModel,
    theta: &DVector<f64>,
    path: &ObserverPath,
    traj_noise: &TrajectoryNoise,
    obs_noise: &ObservationNoise,
    quad: &QuadratureRule,
    grid: usize,
) -> Result<InfoMatrices> {
    let i_r = info_ir(model, theta, path, grid)?;
    let i_psi = info_ipsi(model, theta, path, traj_noise, quad, grid)?;
    let i_m_inv = lse_asymptotic_cov(&i_r, &i_psi, obs_noise.sigma)?;
    let (i, i_inv) = parametric_fisher(model, theta, path, traj_noise, obs_noise, quad, grid)?;
    Ok(InfoMatrices {
        cond_i_r: condition_number(&i_r),
        cond_i: condition_number(&i),
        i_r,
        i_psi,
        i_m_inv,
        i,
        i_inv,
        grid,
    })
}

/// Worst-case bearing-variance bound
/// `A^2 = pi^2 (1 + pi^(-2/3))^3 E|eps|^2 / R_min^2`.
pub fn conservative_a2(r_min: f64, second_moment: f64) -> Result<f64> {
    if !(r_min > 0.0) {
        return Err(Error::InvalidArgument("R_min must be positive".into()));
    }
    if !(second_moment >= 0.0) {
        return Err(Error::InvalidArgument("second moment must be nonnegative".into()));
    }
    Ok(CONSERVATIVE_CONSTANT * second_moment / (r_min * r_min))
}

/// Per-coordinate confidence intervals and the joint ellipsoid at one level.
#[derive(Debug, Clone)]
pub struct ConfidenceReport {
    pub level: f64,
    pub center: DVector<f64>,
    /// Per-coordinate `(lo, hi)`.
    pub intervals: Vec<(f64, f64)>,
    pub widths: Vec<f64>,
    /// Ellipsoid shape matrix `Sigma / n`; the region is
    /// `(x - center)^T (Sigma/n)^-1 (x - center) <= radius^2`.
    pub shape: DMatrix<f64>,
    /// Square root of the chi-square quantile with m degrees of freedom.
    pub radius: f64,
}

impl ConfidenceReport {
    /// Whether every coordinate of `x` falls inside its interval.
    pub fn covers(&self, x: &DVector<f64>) -> bool {
        x.iter()
            .zip(&self.intervals)
            .all(|(&v, &(lo, hi))| lo <= v && v <= hi)
    }
}

/// Per-coordinate intervals `theta_i +- z_(1-alpha/2) sqrt(Sigma_ii / n)` and
/// the chi-square ellipsoid, from an asymptotic covariance `Sigma`.
pub fn confidence_intervals(
    theta_hat: &DVector<f64>,
    sigma_mat: &DMatrix<f64>,
    n: usize,
    level: f64,
) -> Result<ConfidenceReport> {
    if !(0.0 < level && level < 1.0) {
        return Err(Error::InvalidArgument(format!("level {level} outside (0, 1)")));
    }
    let m = theta_hat.len();
    if sigma_mat.nrows() != m || sigma_mat.ncols() != m {
        return Err(Error::InvalidArgument("covariance dimension mismatch".into()));
    }
    if n == 0 {
        return Err(Error::InvalidArgument("n must be >= 1".into()));
    }
    let z = Normal::new(0.0, 1.0)
        .expect("standard normal")
        .inverse_cdf(0.5 + level / 2.0);
    let mut intervals = Vec::with_capacity(m);
    let mut widths = Vec::with_capacity(m);
    for i in 0..m {
        let var = sigma_mat[(i, i)];
        if var < -1e-12 {
            return Err(Error::InvalidArgument(format!(
                "covariance diagonal entry {i} is negative: {var}"
            )));
        }
        let half = z * (var.max(0.0) / n as f64).sqrt();
        intervals.push((theta_hat[i] - half, theta_hat[i] + half));
        widths.push(2.0 * half);
    }
    let radius = ChiSquared::new(m as f64)
        .map_err(|e| Error::InvalidArgument(format!("chi-square dof: {e}")))?
        .inverse_cdf(level)
        .sqrt();
    Ok(ConfidenceReport {
        level,
        center: theta_hat.clone(),
        intervals,
        widths,
        shape: sigma_mat / n as f64,
        radius,
    })
}

/// Conservative intervals: same construction with the worst-case covariance
/// `(A^2 + sigma^2) I_R(theta_hat)^-1`, valid for any isotropic trajectory
/// noise with the given second moment.
pub fn conservative_intervals(
    theta_hat: &DVector<f64>,
    i_r: &DMatrix<f64>,
    a2: f64,
    obs_sigma: f64,
    n: usize,
    level: f64,
) -> Result<ConfidenceReport> {
    if !(a2 >= 0.0) {
        return Err(Error::InvalidArgument("A^2 must be nonnegative".into()));
    }
    let sigma_mat = invert_spd(i_r, "I_R")? * (a2 + obs_sigma * obs_sigma);
    confidence_intervals(theta_hat, &sigma_mat, n, level)
}

/// Max over the grid of `|E Psi(S_theta + eps) - Psi(S_theta)|`, rad; zero
/// for isotropic noise (up to quadrature error).
pub fn check_mean_preservation(
    model: &TrajectoryModel,
    theta: &DVector<f64>,
    path: &ObserverPath,
    traj_noise: &TrajectoryNoise,
    quad: &QuadratureRule,
    t_grid: &[f64],
) -> Result<f64> {
    let nodes = quad.displacement_nodes(traj_noise)?;
    let mut worst = 0.0f64;
    for &t in t_grid {
        let (psi0, psis, _) = displaced_terms(model, theta, path, &nodes, t, false)?;
        let dev: f64 = psis
            .iter()
            .zip(&nodes)
            .map(|(&psi, (_, w))| w * bearing_residual(psi, psi0))
            .sum();
        worst = worst.max(dev.abs());
    }
    Ok(worst)
}

/// Max over the grid of the quadrature value of `E{dPsi}^2`, rad^2; the
/// quantity the conservative bound `A^2` must dominate.
pub fn max_expected_sq_shift(
    model: &TrajectoryModel,
    theta: &DVector<f64>,
    path: &ObserverPath,
    traj_noise: &TrajectoryNoise,
    quad: &QuadratureRule,
    grid: usize,
) -> Result<f64> {
    let nodes = quad.displacement_nodes(traj_noise)?;
    let mut worst = 0.0f64;
    for k in 1..=grid {
        let t = k as f64 / grid as f64;
        let (psi0, psis, _) = displaced_terms(model, theta, path, &nodes, t, false)?;
        let esq: f64 = psis
            .iter()
            .zip(&nodes)
            .map(|(&psi, (_, w))| {
                let d = bearing_residual(psi, psi0);
                w * d * d
            })
            .sum();
        worst = worst.max(esq);
    }
    Ok(worst)
}

/// Linear map from the internal parameter vector to the final-time position
/// `S_theta(1)`; its rows are the basis values at t = 1, so covariances
/// transform as `B Sigma B^T`.
pub fn final_position_map(model: &TrajectoryModel) -> DMatrix<f64> {
    let p = model.p();
    let basis = model.basis_values(1.0);
    let mut b = DMatrix::zeros(2, 2 * p);
    for i in 0..p {
        b[(0, i)] = basis[i];
        b[(1, p + i)] = basis[i];
    }
    b
}

/// Writes a matrix as row-major CSV with header `i,j,value`.
pub fn write_matrix_csv(path: &Path, m: &DMatrix<f64>) -> Result<()> {
    let mut out = Vec::new();
    writeln!(out, "i,j,value")?;
    for i in 0..m.nrows() {
        for j in 0..m.ncols() {
            writeln!(out, "{i},{j},{:.16e}", m[(i, j)])?;
        }
    }
    std::fs::write(path, out)?;
    Ok(())
}

/// Writes a `ConfidenceReport` as CSV with header `coord,lo,hi,width`.
pub fn write_intervals_csv(path: &Path, report: &ConfidenceReport) -> Result<()> {
    let mut out = Vec::new();
    writeln!(out, "coord,lo,hi,width")?;
    for (i, ((lo, hi), w)) in report.intervals.iter().zip(&report.widths).enumerate() {
        writeln!(out, "{i},{lo:.16e},{hi:.16e},{w:.16e}")?;
    }
    std::fs::write(path, out)?;
    Ok(())
}
