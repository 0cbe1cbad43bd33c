//! Generic Nelder-Mead simplex minimizer.
//!
//! Standard reflection / expansion / contraction / shrink with coefficients
//! 1, 2, 0.5, 0.5. Stops when the simplex diameter falls below the parameter
//! tolerance, the criterion spread falls below the criterion tolerance, or
//! the evaluation / iteration budget is exhausted.

use nalgebra::DVector;

/// Simplex optimizer options; the evaluation and iteration budgets default to
/// 2000 each.
#[derive(Debug, Clone)]
pub struct OptimizerConfig {
    pub max_fun_evals: usize,
    pub max_iter: usize,
    /// Simplex diameter tolerance on the parameter scale.
    pub x_tol: f64,
    /// Spread tolerance on the criterion scale; 0 disables the spread stop
    /// (shallow valleys can have tiny spreads far from the minimizer).
    pub f_tol: f64,
    /// Per-coordinate initial simplex step relative to `1 + |x0_i|`.
    pub initial_step_rel: f64,
    /// Number of starts explored by the estimator front-ends.
    pub multistart: usize,
}

impl Default for OptimizerConfig {
    fn default() -> Self {
        Self {
            max_fun_evals: 2000,
            max_iter: 2000,
            x_tol: 1e-8,
            f_tol: 0.0,
            initial_step_rel: 5e-3,
            multistart: 1,
        }
    }
}

/// Result of one estimation (possibly the best of several starts).
#[derive(Debug, Clone)]
pub struct EstimateResult {
    /// Minimizer (for likelihoods, the maximizer of the sign-flipped
    /// objective).
    pub theta: DVector<f64>,
    /// Criterion value at `theta`.
    pub value: f64,
    pub evals: usize,
    pub iterations: usize,
    pub converged: bool,
    /// `(start point, final value, converged)` for every start explored.
    pub starts: Vec<(DVector<f64>, f64, bool)>,
}

/// Minimizes `f` from `x0`. `f` may return `+inf` as an optimizer-safe
/// sentinel for infeasible points.
pub fn nelder_mead(
    mut f: impl FnMut(&DVector<f64>) -> f64,
    x0: &DVector<f64>,
    cfg: &OptimizerConfig,
) -> EstimateResult {
    let dim = x0.len();
    let mut evals = 0usize;
    let mut eval = |x: &DVector<f64>, evals: &mut usize| {
        *evals += 1;
        let v = f(x);
        if v.is_nan() {
            f64::INFINITY
        } else {
            v
        }
    };

    // initial simplex: x0 plus one perturbed vertex per coordinate
    let mut simplex: Vec<(DVector<f64>, f64)> = Vec::with_capacity(dim + 1);
    let v0 = eval(x0, &mut evals);
    simplex.push((x0.clone(), v0));
    for i in 0..dim {
        let mut x = x0.clone();
        x[i] += cfg.initial_step_rel * (1.0 + x0[i].abs());
        let v = eval(&x, &mut evals);
        simplex.push((x, v));
    }

    let mut iterations = 0usize;
    let mut converged = false;
    while iterations < cfg.max_iter && evals + 2 <= cfg.max_fun_evals {
        simplex.sort_by(|a, b| a.1.partial_cmp(&b.1).unwrap());
        let diameter = simplex[1..]
            .iter()
            .map(|(x, _)| (x - &simplex[0].0).amax())
            .fold(0.0f64, f64::max);
        let spread = simplex[dim].1 - simplex[0].1;
        if diameter < cfg.x_tol || spread.abs() < cfg.f_tol {
            converged = true;
            break;
        }
        iterations += 1;

        let centroid: DVector<f64> =
            simplex[..dim].iter().map(|(x, _)| x).sum::<DVector<f64>>() / dim as f64;
        let worst = simplex[dim].clone();
        let reflected = &centroid + (&centroid - &worst.0);
        let fr = eval(&reflected, &mut evals);

        if fr < simplex[0].1 {
            // try to expand
            let expanded = &centroid + (&reflected - &centroid) * 2.0;
            let fe = eval(&expanded, &mut evals);
            simplex[dim] = if fe < fr { (expanded, fe) } else { (reflected, fr) };
        } else if fr < simplex[dim - 1].1 {
            simplex[dim] = (reflected, fr);
        } else {
            // contract toward the better of worst/reflected
            let (anchor, fa) = if fr < worst.1 { (&reflected, fr) } else { (&worst.0, worst.1) };
            let contracted = &centroid + (anchor - &centroid) * 0.5;
            let fc = eval(&contracted, &mut evals);
            if fc < fa {
                simplex[dim] = (contracted, fc);
            } else {
                // shrink toward the best vertex
                let best = simplex[0].0.clone();
                for v in simplex.iter_mut().skip(1) {
                    v.0 = &best + (&v.0 - &best) * 0.5;
                    v.1 = eval(&v.0, &mut evals);
                }
            }
        }
    }
    simplex.sort_by(|a, b| a.1.partial_cmp(&b.1).unwrap());
    let (theta, value) = simplex.swap_remove(0);
    EstimateResult {
        starts: vec![(x0.clone(), value, converged)],
        theta,
        value,
        evals,
        iterations,
        converged,
    }
}
