//! Least-squares and marginal maximum-likelihood estimators.

use nalgebra::{DMatrix, DVector, Vector2};

use crate::error::{Error, Result};
use crate::estimate::nelder_mead::{nelder_mead, EstimateResult, OptimizerConfig};
use crate::estimate::quadrature::QuadratureRule;
use crate::geometry::{bearing_from, bearing_residual, ObserverPath, TrajectoryModel};
use crate::noise::{ObservationNoise, TrajectoryNoise};
use crate::sim::Dataset;

/// Log-density floor guarding against underflow in the far tails during
/// early optimizer steps.
pub const LOG_DENSITY_FLOOR: f64 = -700.0;

/// Per-dataset cache of basis values and observer positions; all estimator
/// hot loops run through this.
pub struct BearingProblem<'a> {
    model: &'a TrajectoryModel,
    y: &'a [f64],
    /// n x p basis values at the observation times.
    basis: DMatrix<f64>,
    obs: Vec<Vector2<f64>>,
}

impl<'a> BearingProblem<'a> {
    pub fn new(dataset: &'a Dataset, model: &'a TrajectoryModel, path: &ObserverPath) -> Self {
        let n = dataset.len();
        let p = model.p();
        let mut basis = DMatrix::zeros(n, p);
        let mut obs = Vec::with_capacity(n);
        for (k, &t) in dataset.t.iter().enumerate() {
            let b = model.basis_values(t);
            for i in 0..p {
                basis[(k, i)] = b[i];
            }
            obs.push(path.position(t));
        }
        Self { model, y: &dataset.y, basis, obs }
    }

    pub fn len(&self) -> usize {
        self.y.len()
    }

    pub fn is_empty(&self) -> bool {
        self.y.is_empty()
    }

    fn target(&self, theta: &DVector<f64>, k: usize) -> Vector2<f64> {
        let p = self.model.p();
        let mut x = 0.0;
        let mut y = 0.0;
        for i in 0..p {
            let e = self.basis[(k, i)];
            x += theta[i] * e;
            y += theta[p + i] * e;
        }
        Vector2::new(x, y)
    }

    /// Least-squares criterion `M_n(theta)`, rad^2. Singular geometry at any
    /// observation time yields an optimizer-safe `+inf` sentinel.
    pub fn criterion(&self, theta: &DVector<f64>) -> f64 {
        let n = self.len();
        let mut acc = 0.0;
        for k in 0..n {
            let d = self.target(theta, k) - self.obs[k];
            let r2 = d.norm_squared();
            if r2 < 1e-24 {
                return f64::INFINITY;
            }
            let res = bearing_residual(self.y[k], d.y.atan2(d.x));
            acc += res * res;
        }
        acc / n as f64
    }

    /// Normalized marginal log-likelihood `J_n(theta, f)` in nats, with the
    /// count of observations whose density hit the underflow floor.
    pub fn loglik_flagged(
        &self,
        theta: &DVector<f64>,
        displacement_nodes: &[(Vector2<f64>, f64)],
        obs_noise: &ObservationNoise,
    ) -> (f64, usize) {
        let n = self.len();
        let sigma = obs_noise.sigma;
        let norm = 1.0 / (sigma * (2.0 * std::f64::consts::PI).sqrt());
        let inv2s2 = 0.5 / (sigma * sigma);
        let mut acc = 0.0;
        let mut clamped = 0usize;
        for k in 0..n {
            let s = self.target(theta, k);
            let o = self.obs[k];
            let mut dens = 0.0;
            for (u, w) in displacement_nodes {
                let d = s + u - o;
                let r2 = d.norm_squared();
                if r2 < 1e-24 {
                    continue;
                }
                let res = bearing_residual(self.y[k], d.y.atan2(d.x));
                dens += w * (-res * res * inv2s2).exp();
            }
            let log_dens = (dens * norm).ln();
            if log_dens.is_finite() && log_dens > LOG_DENSITY_FLOOR {
                acc += log_dens;
            } else {
                acc += LOG_DENSITY_FLOOR;
                clamped += 1;
            }
        }
        (acc / n as f64, clamped)
    }
}

/// `M_n(theta)` for a dataset (one-shot convenience over [`BearingProblem`]).
pub fn criterion_mn(
    theta: &DVector<f64>,
    dataset: &Dataset,
    model: &TrajectoryModel,
    path: &ObserverPath,
) -> f64 {
    BearingProblem::new(dataset, model, path).criterion(theta)
}

/// Marginal observation density `p_(theta,f)(z, t)` in rad^-1, by tensorized
/// Gauss-Hermite quadrature over the trajectory noise.
pub fn marginal_density(
    z: f64,
    t: f64,
    theta: &DVector<f64>,
    model: &TrajectoryModel,
    path: &ObserverPath,
    traj_noise: &TrajectoryNoise,
    obs_noise: &ObservationNoise,
    quad: &QuadratureRule,
) -> Result<f64> {
    let nodes = quad.displacement_nodes(traj_noise)?;
    let s = model.position(theta, t)?;
    let o = path.position(t);
    let sigma = obs_noise.sigma;
    let norm = 1.0 / (sigma * (2.0 * std::f64::consts::PI).sqrt());
    let mut dens = 0.0;
    for (u, w) in &nodes {
        let psi = bearing_from(s + u, o, t)?;
        let res = bearing_residual(z, psi);
        dens += w * (-0.5 * (res / sigma).powi(2)).exp();
    }
    Ok(dens * norm)
}

/// `J_n(theta, f)` for a dataset.
pub fn loglik_jn(
    theta: &DVector<f64>,
    dataset: &Dataset,
    model: &TrajectoryModel,
    path: &ObserverPath,
    traj_noise: &TrajectoryNoise,
    obs_noise: &ObservationNoise,
    quad: &QuadratureRule,
) -> Result<f64> {
    let nodes = quad.displacement_nodes(traj_noise)?;
    let problem = BearingProblem::new(dataset, model, path);
    Ok(problem.loglik_flagged(theta, &nodes, obs_noise).0)
}

/// Crude linear triangulation start: solves the pseudo-linear system
/// `sin(Y_k) * S_theta(t_k)_1 - cos(Y_k) * S_theta(t_k)_2
///  = sin(Y_k) * O_1(t_k) - cos(Y_k) * O_2(t_k)`
/// in least squares, which is linear in theta for linear trajectory models.
pub fn pseudolinear_init(
    dataset: &Dataset,
    model: &TrajectoryModel,
    path: &ObserverPath,
) -> Result<DVector<f64>> {
    let n = dataset.len();
    let m = model.dim();
    if n < m {
        return Err(Error::Config(format!(
            "underdetermined: n = {n} observations for m = {m} parameters"
        )));
    }
    let p = model.p();
    let mut a = DMatrix::zeros(n, m);
    let mut b = DVector::zeros(n);
    for (k, (&t, &y)) in dataset.t.iter().zip(&dataset.y).enumerate() {
        let (sin_b, cos_b) = y.sin_cos();
        let e = model.basis_values(t);
        for i in 0..p {
            a[(k, i)] = sin_b * e[i];
            a[(k, p + i)] = -cos_b * e[i];
        }
        let o = path.position(t);
        b[k] = sin_b * o.x - cos_b * o.y;
    }
    let svd = a.svd(true, true);
    svd.solve(&b, 1e-12)
        .map_err(|e| Error::InvalidArgument(format!("pseudolinear solve failed: {e}")))
}

fn multistart_points(base: &DVector<f64>, count: usize) -> Vec<DVector<f64>> {
    // coarse radial grid around the triangulation start; scaling theta scales
    // the whole trajectory, which sweeps the range hypothesis
    const FACTORS: [f64; 8] = [1.0, 0.85, 1.2, 0.7, 1.45, 0.55, 1.8, 0.4];
    (0..count.max(1))
        .map(|i| base * FACTORS[i % FACTORS.len()])
        .collect()
}

fn best_of_starts(
    starts: Vec<DVector<f64>>,
    mut objective: impl FnMut(&DVector<f64>) -> f64,
    cfg: &OptimizerConfig,
) -> EstimateResult {
    let mut best: Option<EstimateResult> = None;
    let mut traces = Vec::with_capacity(starts.len());
    let mut total_evals = 0usize;
    for x0 in starts {
        let res = nelder_mead(&mut objective, &x0, cfg);
        total_evals += res.evals;
        traces.push((x0, res.value, res.converged));
        if best.as_ref().map_or(true, |b| res.value < b.value) {
            best = Some(res);
        }
    }
    let mut best = best.expect("at least one start");
    best.evals = total_evals;
    best.starts = traces;
    best
}

/// Least-squares estimator: Nelder-Mead minimizer of `M_n`, best of
/// `cfg.multistart` starts around `theta_init` (or the pseudo-linear
/// triangulation when no start is supplied).
pub fn lse(
    dataset: &Dataset,
    model: &TrajectoryModel,
    path: &ObserverPath,
    cfg: &OptimizerConfig,
    theta_init: Option<&DVector<f64>>,
) -> Result<EstimateResult> {
    if dataset.len() < model.dim() {
        return Err(Error::Config(format!(
            "underdetermined: n = {} observations for m = {} parameters",
            dataset.len(),
            model.dim()
        )));
    }
    let base = match theta_init {
        Some(x0) => {
            if x0.len() != model.dim() || x0.iter().any(|v| !v.is_finite()) {
                return Err(Error::InvalidArgument("theta_init must be finite and of length m".into()));
            }
            x0.clone()
        }
        None => pseudolinear_init(dataset, model, path)?,
    };
    let problem = BearingProblem::new(dataset, model, path);
    Ok(best_of_starts(
        multistart_points(&base, cfg.multistart),
        |theta| problem.criterion(theta),
        cfg,
    ))
}

/// Parametric maximum-likelihood estimator: Nelder-Mead maximizer of
/// `J_n(theta, f)`, initialized at the LSE output when no start is supplied.
/// The returned `value` is the maximized `J_n`.
pub fn mle(
    dataset: &Dataset,
    model: &TrajectoryModel,
    path: &ObserverPath,
    traj_noise: &TrajectoryNoise,
    obs_noise: &ObservationNoise,
    quad: &QuadratureRule,
    cfg: &OptimizerConfig,
    theta_init: Option<&DVector<f64>>,
) -> Result<EstimateResult> {
    let init = match theta_init {
        Some(x0) => x0.clone(),
        None => lse(dataset, model, path, cfg, None)?.theta,
    };
    let nodes = quad.displacement_nodes(traj_noise)?;
    let problem = BearingProblem::new(dataset, model, path);
    let mut res = best_of_starts(
        vec![init],
        |theta| -problem.loglik_flagged(theta, &nodes, obs_noise).0,
        cfg,
    );
    res.value = -res.value;
    for s in &mut res.starts {
        s.1 = -s.1;
    }
    Ok(res)
}
