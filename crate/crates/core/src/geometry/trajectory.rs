//! Linear-in-basis target trajectory models.
//!
//! A trajectory is `S_theta(t) = (sum_i a_i e_i(t), sum_i b_i e_i(t))` for
//! continuous basis functions `e_1, ..., e_p` on unit time `t in [0, 1]` and
//! parameter `theta = (a_1, ..., a_p, b_1, ..., b_p)` in km / km-per-second
//! units. Physical time is `T * t` where `T` is the scenario duration in
//! seconds.

use std::fmt;
use std::sync::Arc;

use nalgebra::{DVector, Vector2};

use crate::error::{Error, Result};

type BasisFn = Arc<dyn Fn(f64) -> f64 + Send + Sync>;

/// Linear trajectory model: a set of scalar basis functions on `[0, 1]`
/// shared by both planar coordinates.
#[derive(Clone)]
pub struct TrajectoryModel {
    basis: Vec<BasisFn>,
    duration: f64,
}

impl fmt::Debug for TrajectoryModel {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("TrajectoryModel")
            .field("p", &self.basis.len())
            .field("duration", &self.duration)
            .finish()
    }
}

impl TrajectoryModel {
    /// Builds a model from explicit basis functions, checking each is finite
    /// on a dense grid of `[0, 1]`.
    pub fn new(basis: Vec<BasisFn>, duration: f64) -> Result<Self> {
        if basis.is_empty() {
            return Err(Error::Config("trajectory model needs at least one basis function".into()));
        }
        if !(duration.is_finite() && duration > 0.0) {
            return Err(Error::Config(format!("duration must be positive, got {duration}")));
        }
        for (i, e) in basis.iter().enumerate() {
            for k in 0..=1000 {
                let t = k as f64 / 1000.0;
                let v = e(t);
                if !v.is_finite() {
                    return Err(Error::Config(format!(
                        "basis function {i} is not finite at t = {t}"
                    )));
                }
            }
        }
        Ok(Self { basis, duration })
    }

    /// Uniform linear motion: `e_1(t) = 1`, `e_2(t) = T * t`, so that
    /// `theta = (x0, vx, y0, vy)` with velocities in km/s.
    pub fn uniform_linear(duration: f64) -> Self {
        let one: BasisFn = Arc::new(|_t| 1.0);
        let ramp: BasisFn = Arc::new(move |t| duration * t);
        Self::new(vec![one, ramp], duration).expect("uniform linear basis is finite")
    }

    /// Number of basis functions.
    pub fn p(&self) -> usize {
        self.basis.len()
    }

    /// Parameter dimension `m = 2p`.
    pub fn dim(&self) -> usize {
        2 * self.basis.len()
    }

    /// Physical duration in seconds.
    pub fn duration(&self) -> f64 {
        self.duration
    }

    /// Values `(e_1(t), ..., e_p(t))`.
    pub fn basis_values(&self, t: f64) -> DVector<f64> {
        DVector::from_iterator(self.basis.len(), self.basis.iter().map(|e| e(t)))
    }

    fn check_theta(&self, theta: &DVector<f64>) -> Result<()> {
        if theta.len() != self.dim() {
            return Err(Error::Config(format!(
                "theta has length {}, model expects {}",
                theta.len(),
                self.dim()
            )));
        }
        Ok(())
    }

    /// Position `S_theta(t)` in km.
    pub fn position(&self, theta: &DVector<f64>, t: f64) -> Result<Vector2<f64>> {
        self.check_theta(theta)?;
        let p = self.p();
        let mut x = 0.0;
        let mut y = 0.0;
        for (i, e) in self.basis.iter().enumerate() {
            let v = e(t);
            x += theta[i] * v;
            y += theta[p + i] * v;
        }
        Ok(Vector2::new(x, y))
    }

    /// Position from precomputed basis values (hot path for estimators).
    pub fn position_from_basis(&self, theta: &DVector<f64>, basis: &DVector<f64>) -> Vector2<f64> {
        let p = self.p();
        let mut x = 0.0;
        let mut y = 0.0;
        for i in 0..p {
            x += theta[i] * basis[i];
            y += theta[p + i] * basis[i];
        }
        Vector2::new(x, y)
    }

    /// Reorders `theta = (a_1..a_p, b_1..b_p)` into the interleaved
    /// `(a_1, b_1, a_2, b_2, ...)` convention used for reporting uniform
    /// linear motion as `(x0, y0, vx, vy)`.
    pub fn report_order(&self, theta: &DVector<f64>) -> DVector<f64> {
        let p = self.p();
        DVector::from_fn(2 * p, |i, _| {
            if i % 2 == 0 {
                theta[i / 2]
            } else {
                theta[p + i / 2]
            }
        })
    }

    /// Inverse of [`report_order`](Self::report_order).
    pub fn from_report_order(&self, reported: &DVector<f64>) -> DVector<f64> {
        let p = self.p();
        let mut theta = DVector::zeros(2 * p);
        for i in 0..p {
            theta[i] = reported[2 * i];
            theta[p + i] = reported[2 * i + 1];
        }
        theta
    }
}

/// Parses `(x0, y0, vx, vy)` in reporting order into the internal
/// `(a_1..a_p, b_1..b_p)` ordering for the uniform linear model.
pub fn uniform_linear_theta(x0: f64, y0: f64, vx: f64, vy: f64) -> DVector<f64> {
    DVector::from_vec(vec![x0, vx, y0, vy])
}
