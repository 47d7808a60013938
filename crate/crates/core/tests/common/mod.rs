#![allow(dead_code)]

use std::sync::Arc;

use nalgebra::DMatrix;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use transposer::chaos::{Catalog, ChaosRandomVariable};

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

pub fn random_variable(
    catalog: &Arc<Catalog>,
    slots: usize,
    modes: usize,
    degree: usize,
    rng: &mut ChaCha8Rng,
) -> ChaosRandomVariable {
    let mut v = ChaosRandomVariable::zeros(catalog, slots, modes).unwrap();
    let space = catalog.space(slots);
    let d = space.dim();
    for l in 0..modes {
        for i in 0..d {
            if space.degree(i) <= degree {
                v.coeffs_mut()[l * d + i] = rng.sample::<f64, _>(StandardNormal);
            }
        }
    }
    v
}

pub fn random_matrix(n: usize, scale: f64, rng: &mut ChaCha8Rng) -> DMatrix<f64> {
    DMatrix::from_fn(n, n, |_, _| scale * rng.sample::<f64, _>(StandardNormal))
}
