//! The bearing map and its derivatives.
//!
//! `bearing(x, t)` is the full-plane angle of `x - O(t)` in `(-pi, pi]`.
//! On valid scenarios (bearing window shorter than pi) this coincides with
//! the principal arctan branch, and wrapped residuals make the least-squares
//! criterion insensitive to the 2-pi wrap.

use nalgebra::{DMatrix, DVector, Vector2};

use crate::error::{Error, Result};
use crate::geometry::observer::ObserverPath;
use crate::geometry::trajectory::TrajectoryModel;

/// Squared range below which the geometry is treated as singular, km^2.
const SINGULAR_R2: f64 = 1e-24;

/// Wraps an angle into `(-pi, pi]`.
pub fn wrap_angle(a: f64) -> f64 {
    let mut w = a.rem_euclid(std::f64::consts::TAU);
    if w > std::f64::consts::PI {
        w -= std::f64::consts::TAU;
    }
    w
}

/// Difference `a - b` wrapped into `(-pi, pi]`.
pub fn bearing_residual(a: f64, b: f64) -> f64 {
    wrap_angle(a - b)
}

/// Bearing of position `x` seen from the observer at unit time `t`.
pub fn bearing(x: Vector2<f64>, t: f64, path: &ObserverPath) -> Result<f64> {
    bearing_from(x, path.position(t), t)
}

/// Bearing of `x` seen from an explicit observer position.
pub fn bearing_from(x: Vector2<f64>, obs: Vector2<f64>, t: f64) -> Result<f64> {
    let d = x - obs;
    if d.norm_squared() < SINGULAR_R2 {
        return Err(Error::SingularGeometry { t });
    }
    Ok(d.y.atan2(d.x))
}

/// Gradient of `x |-> bearing(x, t)`: `(-dy, dx) / r^2`.
pub fn grad_x_bearing(x: Vector2<f64>, obs: Vector2<f64>, t: f64) -> Result<Vector2<f64>> {
    let d = x - obs;
    let r2 = d.norm_squared();
    if r2 < SINGULAR_R2 {
        return Err(Error::SingularGeometry { t });
    }
    Ok(Vector2::new(-d.y / r2, d.x / r2))
}

/// Bearing of the model trajectory: `Psi[S_theta(t), t]`.
pub fn bearing_of_trajectory(
    model: &TrajectoryModel,
    theta: &DVector<f64>,
    t: f64,
    path: &ObserverPath,
) -> Result<f64> {
    bearing(model.position(theta, t)?, t, path)
}

/// Gradient of `theta |-> Psi[S_theta(t), t]` for a linear model, evaluated
/// at an arbitrary plane position `x` (normally `S_theta(t)`, or a shifted
/// point `S_theta(t) + u` for marginal scores).
///
/// By the chain rule the `a_i` entry is `dPsi/dx1 * e_i(t)` and the `b_i`
/// entry is `dPsi/dx2 * e_i(t)`.
pub fn grad_theta_bearing_at(
    model: &TrajectoryModel,
    basis: &DVector<f64>,
    x: Vector2<f64>,
    obs: Vector2<f64>,
    t: f64,
) -> Result<DVector<f64>> {
    let g = grad_x_bearing(x, obs, t)?;
    let p = model.p();
    let mut out = DVector::zeros(2 * p);
    for i in 0..p {
        out[i] = g.x * basis[i];
        out[p + i] = g.y * basis[i];
    }
    Ok(out)
}

/// Gradient of `theta |-> Psi[S_theta(t), t]`.
pub fn grad_theta_bearing(
    model: &TrajectoryModel,
    theta: &DVector<f64>,
    t: f64,
    path: &ObserverPath,
) -> Result<DVector<f64>> {
    let basis = model.basis_values(t);
    let x = model.position(theta, t)?;
    grad_theta_bearing_at(model, &basis, x, path.position(t), t)
}

/// Hessian of `theta |-> Psi[S_theta(t), t]` for a linear model.
///
/// With `d = S_theta(t) - O(t)` and `r^2 = |d|^2`, the second derivatives of
/// the plane bearing are `Psi_11 = 2 d1 d2 / r^4`, `Psi_22 = -Psi_11` and
/// `Psi_12 = (d2^2 - d1^2) / r^4`; one more chain-rule layer multiplies by
/// `e_i(t) e_j(t)`.
pub fn hess_theta_bearing(
    model: &TrajectoryModel,
    theta: &DVector<f64>,
    t: f64,
    path: &ObserverPath,
) -> Result<DMatrix<f64>> {
    let basis = model.basis_values(t);
    let d = model.position(theta, t)? - path.position(t);
    let r2 = d.norm_squared();
    if r2 < SINGULAR_R2 {
        return Err(Error::SingularGeometry { t });
    }
    let r4 = r2 * r2;
    let h11 = 2.0 * d.x * d.y / r4;
    let h22 = -h11;
    let h12 = (d.y * d.y - d.x * d.x) / r4;
    let p = model.p();
    let mut out = DMatrix::zeros(2 * p, 2 * p);
    for i in 0..p {
        for j in 0..p {
            let eij = basis[i] * basis[j];
            out[(i, j)] = h11 * eij;
            out[(i, p + j)] = h12 * eij;
            out[(p + i, j)] = h12 * eij;
            out[(p + i, p + j)] = h22 * eij;
        }
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::observer::{build_observer_path, default_maneuvering_spec};
    use crate::geometry::trajectory::uniform_linear_theta;
    use approx::assert_relative_eq;
    use rand::rngs::StdRng;
    use rand::{Rng, SeedableRng};
    use std::f64::consts::PI;

    #[test]
    fn quadrant_examples() {
        let o = Vector2::zeros();
        assert_relative_eq!(bearing_from(Vector2::new(1.0, 1.0), o, 0.0).unwrap(), PI / 4.0);
        assert_relative_eq!(bearing_from(Vector2::new(-1.0, 0.0), o, 0.0).unwrap(), PI);
        let o = Vector2::new(1.0, 2.0);
        let x = Vector2::new(1.0 + 3f64.sqrt(), 3.0);
        assert_relative_eq!(bearing_from(x, o, 0.0).unwrap(), PI / 6.0, max_relative = 1e-15);
    }

    #[test]
    fn coincident_point_is_singular() {
        let o = Vector2::new(1.0, 2.0);
        assert!(bearing_from(o, o, 0.3).is_err());
    }

    #[test]
    fn residual_examples() {
        assert_relative_eq!(bearing_residual(0.1, -0.1), 0.2, max_relative = 1e-15);
        assert_relative_eq!(bearing_residual(PI - 0.01, -PI + 0.01), -0.02, epsilon = 1e-12);
        for k in 0..20 {
            let x = -3.0 + 0.3 * k as f64;
            assert_eq!(bearing_residual(x, x), 0.0);
        }
    }

    #[test]
    fn residual_antisymmetric_and_bounded() {
        let mut rng = StdRng::seed_from_u64(7);
        for _ in 0..1000 {
            let a = rng.gen_range(-PI..PI);
            let b = rng.gen_range(-PI..PI);
            let r = bearing_residual(a, b);
            assert!(r.abs() <= PI);
            if r.abs() < PI - 1e-12 {
                assert_relative_eq!(bearing_residual(b, a), -r, epsilon = 1e-12);
            }
        }
    }

    #[test]
    fn grad_x_norm_is_inverse_range() {
        // |grad_x Psi| * |x - O| = 1; at O + (2, 0) the norm is 0.5 km^-1
        let o = Vector2::new(0.3, -0.7);
        let g = grad_x_bearing(o + Vector2::new(2.0, 0.0), o, 0.0).unwrap();
        assert_relative_eq!(g.norm(), 0.5, epsilon = 1e-15);
        let mut rng = StdRng::seed_from_u64(11);
        for _ in 0..200 {
            let x = Vector2::new(rng.gen_range(-10.0..10.0), rng.gen_range(-10.0..10.0));
            if (x - o).norm() < 1e-3 {
                continue;
            }
            let g = grad_x_bearing(x, o, 0.0).unwrap();
            assert_relative_eq!(g.norm() * (x - o).norm(), 1.0, epsilon = 1e-12);
        }
    }

    #[test]
    fn analytic_gradient_matches_finite_differences() {
        let model = TrajectoryModel::uniform_linear(20.0);
        let path = build_observer_path(default_maneuvering_spec()).unwrap();
        let mut rng = StdRng::seed_from_u64(42);
        for _ in 0..100 {
            let theta = uniform_linear_theta(
                rng.gen_range(2.0..4.0),
                rng.gen_range(3.0..5.0),
                rng.gen_range(0.1..0.3),
                rng.gen_range(-0.3..-0.05),
            );
            let t = rng.gen_range(0.0..1.0);
            let grad = grad_theta_bearing(&model, &theta, t, &path).unwrap();
            let h = 1e-6;
            for i in 0..4 {
                let mut tp = theta.clone();
                let mut tm = theta.clone();
                tp[i] += h;
                tm[i] -= h;
                let fd = bearing_residual(
                    bearing_of_trajectory(&model, &tp, t, &path).unwrap(),
                    bearing_of_trajectory(&model, &tm, t, &path).unwrap(),
                ) / (2.0 * h);
                assert_relative_eq!(grad[i], fd, max_relative = 1e-6, epsilon = 1e-10);
            }
        }
    }

    #[test]
    fn analytic_hessian_matches_finite_differences() {
        let model = TrajectoryModel::uniform_linear(20.0);
        let path = build_observer_path(default_maneuvering_spec()).unwrap();
        let mut rng = StdRng::seed_from_u64(43);
        for _ in 0..100 {
            let theta = uniform_linear_theta(
                rng.gen_range(2.0..4.0),
                rng.gen_range(3.0..5.0),
                rng.gen_range(0.1..0.3),
                rng.gen_range(-0.3..-0.05),
            );
            let t = rng.gen_range(0.0..1.0);
            let hess = hess_theta_bearing(&model, &theta, t, &path).unwrap();
            let h = 1e-5;
            for i in 0..4 {
                let mut tp = theta.clone();
                let mut tm = theta.clone();
                tp[i] += h;
                tm[i] -= h;
                let gp = grad_theta_bearing(&model, &tp, t, &path).unwrap();
                let gm = grad_theta_bearing(&model, &tm, t, &path).unwrap();
                for j in 0..4 {
                    let fd = (gp[j] - gm[j]) / (2.0 * h);
                    assert_relative_eq!(hess[(i, j)], fd, max_relative = 1e-6, epsilon = 1e-9);
                }
            }
        }
    }

    #[test]
    fn velocity_entries_scale_position_entries() {
        // chain rule through e_2(t) = T * t
        let model = TrajectoryModel::uniform_linear(20.0);
        let path = build_observer_path(default_maneuvering_spec()).unwrap();
        let theta = uniform_linear_theta(2.8, 3.8, 0.225, -0.15);
        for k in 1..10 {
            let t = k as f64 / 10.0;
            let g = grad_theta_bearing(&model, &theta, t, &path).unwrap();
            assert_relative_eq!(g[1], g[0] * 20.0 * t, max_relative = 1e-12);
            assert_relative_eq!(g[3], g[2] * 20.0 * t, max_relative = 1e-12);
        }
    }

    #[test]
    fn position_gradient_is_tangential_over_range() {
        // gradient w.r.t. (x0, y0) is (-sin beta, cos beta) / r
        let model = TrajectoryModel::uniform_linear(20.0);
        let path = build_observer_path(default_maneuvering_spec()).unwrap();
        let theta = uniform_linear_theta(2.8, 3.8, 0.225, -0.15);
        for k in 0..=10 {
            let t = k as f64 / 10.0;
            let g = grad_theta_bearing(&model, &theta, t, &path).unwrap();
            let beta = bearing_of_trajectory(&model, &theta, t, &path).unwrap();
            let r = (model.position(&theta, t).unwrap() - path.position(t)).norm();
            assert_relative_eq!(g[0], -beta.sin() / r, max_relative = 1e-12);
            assert_relative_eq!(g[2], beta.cos() / r, max_relative = 1e-12);
        }
    }
}
