use std::sync::Arc;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use rayon::prelude::*;

use super::{Partition, SolutionPair};
use crate::chaos::{refine, Catalog, PsiTable};
use crate::{Error, Result, DEFAULT_SEED};

/// A continuous-time reference solution that depends on the path only
/// through the current value `W(t)`.
pub trait Reference: Sync {
    fn modes(&self) -> usize;

    /// True when neither component depends on the path.
    fn is_deterministic(&self) -> bool {
        false
    }

    /// `z(t)` and `Z(t)` given `W(t) = w`.
    fn values(&self, t: f64, w: f64, z: &mut [f64], zz: &mut [f64]);
}

/// `z_i(t) = e^{-lambda_i (T - t)} (c_i + d_i W(t))`, `Z_i(t) = d_i e^{-lambda_i (T - t)}`:
/// the exact solution for `F = 0` and `a_T = c + d W(T)` per mode.
#[derive(Clone, Debug)]
pub struct HeatReference {
    pub horizon: f64,
    pub eigenvalues: Vec<f64>,
    pub shift: Vec<f64>,
    pub slope: Vec<f64>,
}

impl Reference for HeatReference {
    fn modes(&self) -> usize {
        self.eigenvalues.len()
    }

    fn is_deterministic(&self) -> bool {
        self.slope.iter().all(|&d| d == 0.0)
    }

    fn values(&self, t: f64, w: f64, z: &mut [f64], zz: &mut [f64]) {
        for i in 0..self.eigenvalues.len() {
            let decay = (-self.eigenvalues[i] * (self.horizon - t)).exp();
            z[i] = decay * (self.shift[i] + self.slope[i] * w);
            zz[i] = decay * self.slope[i];
        }
    }
}

#[derive(Clone, Copy, Debug)]
pub struct ErrorOptions {
    pub paths: usize,
    /// Fine sub-steps per grid cell at which the sup and the integral are sampled.
    pub substeps: usize,
    pub seed: u64,
}

impl Default for ErrorOptions {
    fn default() -> Self {
        ErrorOptions {
            paths: 100_000,
            substeps: 4,
            seed: DEFAULT_SEED,
        }
    }
}

#[derive(Clone, Copy, Debug, serde::Serialize)]
pub struct ErrorReport {
    /// `sup_t E|a(t) - z(t)|^2` with `a` piecewise constant on the grid.
    pub sup_a: f64,
    /// `int_0^T E|b(t) - Z(t)|^2 dt` with `b` piecewise constant.
    pub int_b: f64,
}

impl ErrorReport {
    pub fn total(&self) -> f64 {
        self.sup_a + self.int_b
    }
}

const PATH_CHUNK: usize = 1024;

/// Mean-square distance between a discrete solution and a reference, by
/// Monte Carlo over Brownian paths sampled on a grid `substeps` times finer.
/// Falls back to a single evaluation when both sides are deterministic.
pub fn error_vs_reference(
    solution: &SolutionPair,
    partition: &Partition,
    reference: &dyn Reference,
    options: &ErrorOptions,
) -> Result<ErrorReport> {
    let n_sol = solution.a.modes();
    let n_ref = reference.modes();
    if n_ref < n_sol {
        return Err(Error::Shape(format!(
            "reference has {n_ref} modes, solution {n_sol}"
        )));
    }
    if options.substeps == 0 || options.paths == 0 {
        return Err(Error::InvalidArgument(
            "need at least one path and one sub-step".into(),
        ));
    }
    let steps = partition.steps();
    let tau = partition.tau();
    let r = options.substeps;
    let fine = steps * r;
    let h = tau / r as f64;
    let deterministic = reference.is_deterministic() && solution.is_deterministic();
    let paths = if deterministic { 1 } else { options.paths };
    let catalog = solution.terminal.catalog();
    let degree = catalog.max_degree();
    let top = catalog.space(steps);
    let maps: Vec<Vec<u32>> = (0..=steps).map(|k| catalog.chain(k, steps)).collect();
    let chunks = paths.div_ceil(PATH_CHUNK);
    let partial = (0..chunks)
        .into_par_iter()
        .map(|chunk| {
            let mut rng = ChaCha8Rng::seed_from_u64(options.seed);
            rng.set_stream(chunk as u64);
            let count = PATH_CHUNK.min(paths - chunk * PATH_CHUNK);
            let mut sup = vec![0.0; fine + 1];
            let mut int_b = 0.0;
            let mut w = vec![0.0; fine + 1];
            let mut xi = vec![0.0; steps];
            let mut a = vec![0.0; n_sol];
            let mut b = vec![0.0; n_sol];
            let mut z = vec![0.0; n_ref];
            let mut zz = vec![0.0; n_ref];
            let mut basis = vec![0.0; top.dim()];
            for _ in 0..count {
                if !deterministic {
                    for q in 0..fine {
                        let g: f64 = StandardNormal.sample(&mut rng);
                        w[q + 1] = w[q] + h.sqrt() * g;
                    }
                }
                for (k, x) in xi.iter_mut().enumerate() {
                    *x = (w[(k + 1) * r] - w[k * r]) / tau.sqrt();
                }
                let table = PsiTable::new(&xi, degree);
                for (i, v) in basis.iter_mut().enumerate() {
                    *v = table.basis(top.key(i));
                }
                for k in 0..=steps {
                    solution.a_at(k).evaluate_lifted(&basis, &maps[k], &mut a);
                    if k < steps {
                        solution.b.get(k).evaluate_lifted(&basis, &maps[k], &mut b);
                    }
                    let last = if k < steps { r } else { 1 };
                    for s in 0..last {
                        let q = k * r + s;
                        reference.values(q as f64 * h, w[q], &mut z, &mut zz);
                        let mut ea = 0.0;
                        let mut eb = 0.0;
                        for i in 0..n_ref {
                            let (ai, bi) = if i < n_sol { (a[i], b[i]) } else { (0.0, 0.0) };
                            ea += (ai - z[i]).powi(2);
                            eb += (bi - zz[i]).powi(2);
                        }
                        sup[q] += ea;
                        if k < steps {
                            int_b += h * eb;
                        }
                    }
                }
            }
            (sup, int_b)
        })
        .collect::<Vec<_>>();
    let mut sup = vec![0.0; fine + 1];
    let mut int_b = 0.0;
    for (s, b) in partial {
        sup.iter_mut().zip(s).for_each(|(x, y)| *x += y);
        int_b += b;
    }
    let inv = 1.0 / paths as f64;
    Ok(ErrorReport {
        sup_a: sup.into_iter().fold(0.0, f64::max) * inv,
        int_b: int_b * inv,
    })
}

/// Exact mean-square distance between a coarse solution and a finer one
/// whose step count is an integer multiple, computed in chaos coordinates
/// after refining the coarse solution onto the fine increments.
pub fn self_convergence_error(
    coarse: &SolutionPair,
    fine: &SolutionPair,
    horizon: f64,
) -> Result<ErrorReport> {
    let (nc, nf) = (coarse.a.len(), fine.a.len());
    if nc == 0 || nf % nc != 0 {
        return Err(Error::Shape(format!(
            "{nf} fine steps is not a multiple of {nc}"
        )));
    }
    let factor = nf / nc;
    let fine_catalog: &Arc<Catalog> = fine.terminal.catalog();
    let tf = horizon / nf as f64;
    let rows = (0..=nc)
        .into_par_iter()
        .map(|k| -> Result<(f64, f64)> {
            let ac = refine(coarse.a_at(k), fine_catalog, factor)?;
            if k == nc {
                return Ok((ac.distance_sq(&fine.terminal)?, 0.0));
            }
            let bc = refine(coarse.b.get(k), fine_catalog, factor)?;
            let mut sup = 0.0f64;
            let mut int_b = 0.0;
            for q in k * factor..(k + 1) * factor {
                sup = sup.max(ac.distance_sq(fine.a.get(q))?);
                int_b += bc.distance_sq(fine.b.get(q))?;
            }
            Ok((sup, int_b))
        })
        .collect::<Result<Vec<_>>>()?;
    let sup_a = rows.iter().map(|r| r.0).fold(0.0, f64::max);
    let int_b: f64 = rows.iter().map(|r| r.1).sum();
    Ok(ErrorReport {
        sup_a,
        int_b: int_b * tf,
    })
}
