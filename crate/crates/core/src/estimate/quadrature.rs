//! Gauss-Hermite quadrature in probabilist normalization: nodes and weights
//! such that `sum_i w_i f(x_i) ~ E[f(Z)]` for `Z ~ N(0, 1)`.
//!
//! Nodes are the eigenvalues of the symmetric Jacobi matrix of the Hermite
//! recurrence; weights are the squared first eigenvector components. The node
//! set is symmetrized about zero so that odd integrands cancel exactly.

use nalgebra::{DMatrix, Vector2};

use crate::error::{Error, Result};
use crate::noise::TrajectoryNoise;

/// One-dimensional Gauss-Hermite rule for N(0, 1) expectations.
#[derive(Debug, Clone, PartialEq)]
pub struct QuadratureRule {
    pub order: usize,
    pub nodes: Vec<f64>,
    pub weights: Vec<f64>,
}

/// Builds the rule of the given order (default used throughout is 12).
pub fn gauss_hermite(order: usize) -> Result<QuadratureRule> {
    if order == 0 {
        return Err(Error::InvalidArgument("quadrature order must be >= 1".into()));
    }
    if order == 1 {
        return Ok(QuadratureRule { order, nodes: vec![0.0], weights: vec![1.0] });
    }
    // Jacobi matrix of the probabilists' Hermite polynomials: zero diagonal,
    // off-diagonal sqrt(k).
    let mut jacobi = DMatrix::zeros(order, order);
    for k in 1..order {
        let b = (k as f64).sqrt();
        jacobi[(k - 1, k)] = b;
        jacobi[(k, k - 1)] = b;
    }
    let eig = jacobi.symmetric_eigen();
    let mut pairs: Vec<(f64, f64)> = (0..order)
        .map(|i| (eig.eigenvalues[i], eig.eigenvectors[(0, i)].powi(2)))
        .collect();
    pairs.sort_by(|a, b| a.0.partial_cmp(&b.0).unwrap());
    // Symmetrize: mirror-average each (x, -x) pair, pin the center node.
    let mut nodes = vec![0.0; order];
    let mut weights = vec![0.0; order];
    for i in 0..order {
        let j = order - 1 - i;
        let x = 0.5 * (pairs[i].0 - pairs[j].0);
        let w = 0.5 * (pairs[i].1 + pairs[j].1);
        nodes[i] = if i == j { 0.0 } else { x };
        weights[i] = w;
    }
    let total: f64 = weights.iter().sum();
    for w in &mut weights {
        *w /= total;
    }
    Ok(QuadratureRule { order, nodes, weights })
}

impl QuadratureRule {
    /// `E[f(Z)]` for `Z ~ N(0, 1)`.
    pub fn expect(&self, mut f: impl FnMut(f64) -> f64) -> f64 {
        self.nodes
            .iter()
            .zip(&self.weights)
            .map(|(&x, &w)| w * f(x))
            .sum()
    }

    /// Tensorized 2-D displacement nodes for a planar Gaussian noise law:
    /// `u_ij = L (z_i, z_j)` with `L` the Cholesky factor of the marginal
    /// covariance, paired with product weights.
    ///
    /// The `None` noise variant yields the single node `(0, 0)` with weight 1,
    /// so marginal integrals degenerate exactly to the noise-free case.
    pub fn displacement_nodes(&self, noise: &TrajectoryNoise) -> Result<Vec<(Vector2<f64>, f64)>> {
        noise.validate()?;
        if *noise == TrajectoryNoise::None {
            return Ok(vec![(Vector2::zeros(), 1.0)]);
        }
        let cov = noise.marginal_cov();
        if cov == nalgebra::Matrix2::zeros() {
            return Ok(vec![(Vector2::zeros(), 1.0)]);
        }
        let l = cov
            .cholesky()
            .ok_or_else(|| Error::Config("noise covariance is not positive-definite".into()))?
            .l();
        let mut out = Vec::with_capacity(self.order * self.order);
        for (i, &zi) in self.nodes.iter().enumerate() {
            for (j, &zj) in self.nodes.iter().enumerate() {
                let u = l * Vector2::new(zi, zj);
                out.push((u, self.weights[i] * self.weights[j]));
            }
        }
        Ok(out)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    #[test]
    fn order_one_is_the_mean() {
        let q = gauss_hermite(1).unwrap();
        assert_eq!(q.nodes, vec![0.0]);
        assert_eq!(q.weights, vec![1.0]);
    }

    #[test]
    fn order_12_moments() {
        let q = gauss_hermite(12).unwrap();
        let total: f64 = q.weights.iter().sum();
        assert_relative_eq!(total, 1.0, epsilon = 1e-14);
        assert!(q.expect(|x| x).abs() < 1e-14);
        assert!(q.expect(|x| x.powi(3)).abs() < 1e-13);
        assert_relative_eq!(q.expect(|x| x * x), 1.0, epsilon = 1e-13);
        assert_relative_eq!(q.expect(|x| x.powi(4)), 3.0, epsilon = 1e-12);
    }

    #[test]
    fn nodes_symmetric_about_zero() {
        let q = gauss_hermite(12).unwrap();
        for i in 0..q.order {
            let j = q.order - 1 - i;
            assert_eq!(q.nodes[i], -q.nodes[j]);
            assert_eq!(q.weights[i], q.weights[j]);
        }
    }

    #[test]
    fn degree_23_exactness() {
        // order 12 integrates polynomials up to degree 23; oracle is the
        // closed-form N(0,1) moments (2k-1)!!
        let q = gauss_hermite(12).unwrap();
        let mut double_factorial = 1.0;
        for k in 1..=11usize {
            double_factorial *= (2 * k - 1) as f64;
            let got = q.expect(|x| x.powi(2 * k as i32));
            assert_relative_eq!(got, double_factorial, max_relative = 1e-10);
            // odd moments cancel pairwise; rounding is relative to the term
            // magnitudes, so scale the tolerance by the even-moment size
            let odd = q.expect(|x| x.powi(2 * k as i32 - 1)).abs();
            assert!(odd < 1e-12 * double_factorial + 1e-12, "degree {} moment {odd}", 2 * k - 1);
        }
    }

    #[test]
    fn displacement_nodes_reproduce_covariance() {
        let q = gauss_hermite(12).unwrap();
        let cov = nalgebra::Matrix2::new(36e-4, 4e-4, 4e-4, 1e-4);
        let nodes = q.displacement_nodes(&TrajectoryNoise::Anisotropic { cov }).unwrap();
        assert_eq!(nodes.len(), 144);
        let mut acc = nalgebra::Matrix2::zeros();
        for (u, w) in &nodes {
            acc += *w * u * u.transpose();
        }
        assert_relative_eq!(acc[(0, 0)], cov[(0, 0)], max_relative = 1e-12);
        assert_relative_eq!(acc[(0, 1)], cov[(0, 1)], max_relative = 1e-12);
        assert_relative_eq!(acc[(1, 1)], cov[(1, 1)], max_relative = 1e-12);
    }

    #[test]
    fn none_noise_degenerates_to_single_node() {
        let q = gauss_hermite(12).unwrap();
        let nodes = q.displacement_nodes(&TrajectoryNoise::None).unwrap();
        assert_eq!(nodes, vec![(Vector2::zeros(), 1.0)]);
    }
}
