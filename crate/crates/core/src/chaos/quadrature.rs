//! Gauss–Hermite rules for the standard Gaussian weight.

use nalgebra::{DMatrix, SymmetricEigen};

use crate::{Error, Result};

/// Nodes and weights (summing to one) of the `q`-point rule, nodes ascending.
/// Exact for polynomials of degree below `2q`.
#[derive(Clone, Debug)]
pub struct GaussHermite {
    pub nodes: Vec<f64>,
    pub weights: Vec<f64>,
}

impl GaussHermite {
    pub fn new(q: usize) -> Result<Self> {
        if q == 0 || q > 64 {
            return Err(Error::InvalidArgument(format!(
                "quadrature size {q} must lie in 1..=64"
            )));
        }
        let mut jacobi = DMatrix::<f64>::zeros(q, q);
        for k in 1..q {
            let b = (k as f64).sqrt();
            jacobi[(k, k - 1)] = b;
            jacobi[(k - 1, k)] = b;
        }
        let eig = SymmetricEigen::new(jacobi);
        let mut pairs: Vec<(f64, f64)> = (0..q)
            .map(|i| (eig.eigenvalues[i], eig.eigenvectors[(0, i)].powi(2)))
            .collect();
        pairs.sort_by(|a, b| a.0.total_cmp(&b.0));
        let total: f64 = pairs.iter().map(|p| p.1).sum();
        Ok(GaussHermite {
            nodes: pairs.iter().map(|p| p.0).collect(),
            weights: pairs.iter().map(|p| p.1 / total).collect(),
        })
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::chaos::hermite::gaussian_moment;

    #[test]
    fn moments_are_exact() {
        for q in 1..=9 {
            let gh = GaussHermite::new(q).unwrap();
            for p in 0..2 * q {
                let got: f64 = gh
                    .nodes
                    .iter()
                    .zip(&gh.weights)
                    .map(|(x, w)| w * x.powi(p as i32))
                    .sum();
                let scale: f64 = gh
                    .nodes
                    .iter()
                    .zip(&gh.weights)
                    .map(|(x, w)| w * x.abs().powi(p as i32))
                    .sum();
                assert!(
                    (got - gaussian_moment(p)).abs() < 1e-12 * scale.max(1.0),
                    "q={q} p={p}"
                );
            }
        }
    }

    #[test]
    fn three_point_rule() {
        let gh = GaussHermite::new(3).unwrap();
        let s3 = 3f64.sqrt();
        assert!(
            (gh.nodes[0] + s3).abs() < 1e-14
                && gh.nodes[1].abs() < 1e-14
                && (gh.nodes[2] - s3).abs() < 1e-14
        );
        assert!((gh.weights[1] - 2.0 / 3.0).abs() < 1e-14);
    }
}
