use nalgebra::DMatrix;

use super::hermite::psi_pair_moment;
use super::index::Catalog;
use crate::Result;

/// `E[e_alpha e_beta]` over the basis of `H^M(k)` in catalog order, from
/// exact one-dimensional Gaussian moments. Equals the identity up to
/// rounding.
pub fn gram_matrix(k: usize, m: usize) -> Result<DMatrix<f64>> {
    let catalog = Catalog::new(k, m)?;
    let space = catalog.space(k);
    let d = space.dim();
    let pair: Vec<Vec<f64>> = (0..=m)
        .map(|a| (0..=m).map(|b| psi_pair_moment(a, b)).collect())
        .collect();
    let dense: Vec<_> = (0..d).map(|i| space.multi_index(i)).collect();
    Ok(DMatrix::from_fn(d, d, |i, j| {
        dense[i]
            .entries()
            .iter()
            .zip(dense[j].entries())
            .map(|(&a, &b)| pair[a as usize][b as usize])
            .product()
    }))
}
