//! Minimum-energy null control with full-domain control, by minimizing the
//! dual functional `J(z_T) = 1/2 tau sum_{k=0}^{N-1} E|z_k|^2 + <y0, E z_0>`
//! over terminal values of the backward equation `z_k = Lambda_0 E(z_{k+1} | F_k)`.
//! The control is `u_k = z_k` evaluated at the minimizer.

use std::sync::Arc;

use nalgebra::{DMatrix, SymmetricEigen};

use crate::bsee::{solve_linear, BseeProblem, Driver, Partition, SolutionPair};
use crate::chaos::{Catalog, ChaosRandomVariable, ChaosVector};
use crate::forward::{solve_implicit, ForwardProblem};
use crate::spectral::{SpectralBasis, SpectralCoeffs};
use crate::{Error, Result};

#[derive(Clone, Debug)]
pub struct NullControlProblem {
    pub partition: Partition,
    pub basis: SpectralBasis,
    pub catalog: Arc<Catalog>,
    pub initial: SpectralCoeffs,
}

impl NullControlProblem {
    pub fn new(
        partition: Partition,
        basis: SpectralBasis,
        catalog: Arc<Catalog>,
        initial: SpectralCoeffs,
    ) -> Result<Self> {
        if initial.modes() != basis.modes() {
            return Err(Error::Shape(format!(
                "initial value needs {} modes",
                basis.modes()
            )));
        }
        if catalog.n_slots() != partition.steps() {
            return Err(Error::Shape(
                "catalog size differs from the step count".into(),
            ));
        }
        Ok(NullControlProblem {
            partition,
            basis,
            catalog,
            initial,
        })
    }

    fn backward(&self, terminal: &ChaosRandomVariable) -> Result<SolutionPair> {
        let p = BseeProblem::new(
            self.partition,
            self.basis,
            self.catalog.clone(),
            Driver::Zero,
            terminal.clone(),
        )?;
        solve_linear(&p)
    }

    fn forward(&self, control: Option<ChaosVector>) -> Result<f64> {
        let n = self.basis.modes();
        let fp = ForwardProblem::new(
            self.partition,
            self.basis,
            self.catalog.clone(),
            self.initial.clone(),
            SpectralCoeffs::new(vec![0.0; n]),
            control,
        )?;
        Ok(solve_implicit(&fp)?.terminal().norm_sq())
    }
}

pub fn functional_j(problem: &NullControlProblem, terminal: &ChaosRandomVariable) -> Result<f64> {
    let z = problem.backward(terminal)?;
    let tau = problem.partition.tau();
    let y0 = ChaosRandomVariable::constant(&problem.catalog, &problem.initial.values);
    Ok(0.5 * z.a.norm_sq(tau) + y0.dot(z.a.get(0))?)
}

#[derive(Clone, Copy, Debug)]
pub struct NullControlOptions {
    /// Stop when the gradient norm falls below `tol` times its initial value.
    pub tol: f64,
    pub max_iter: usize,
}

impl Default for NullControlOptions {
    fn default() -> Self {
        NullControlOptions {
            tol: 1e-12,
            max_iter: 1000,
        }
    }
}

#[derive(Clone, Debug, serde::Serialize)]
pub struct NullControlReport {
    #[serde(rename = "J_value")]
    pub j_value: f64,
    pub grad_norm: f64,
    pub iterations: usize,
    pub terminal_energy: f64,
    pub uncontrolled_energy: f64,
    /// Extreme Ritz values of the quadratic part seen by conjugate gradients.
    pub ritz_min: f64,
    pub ritz_max: f64,
    /// Terminal coordinates invisible to the functional, held at zero.
    pub pinned: usize,
}

#[derive(Clone, Debug)]
pub struct NullControlResult {
    pub terminal: ChaosRandomVariable,
    pub control: ChaosVector,
    pub report: NullControlReport,
}

// Quadratic part applied to a terminal value: tau sum_k L_k^* L_k z_T with
// L_k z_T = z_k.
fn apply_quadratic(
    problem: &NullControlProblem,
    zt: &ChaosRandomVariable,
) -> Result<ChaosRandomVariable> {
    let steps = problem.partition.steps();
    let tau = problem.partition.tau();
    let lam = problem.basis.resolvent(tau);
    let z = problem.backward(zt)?;
    let mut out = ChaosRandomVariable::zeros(&problem.catalog, steps, problem.basis.modes())?;
    for k in 0..steps {
        let mut w = z.a.get(k).clone();
        for (l, &r) in lam.iter().enumerate() {
            let f = r.powi((steps - k) as i32);
            w.mode_mut(l).iter_mut().for_each(|c| *c *= f);
        }
        out.axpy(tau, &w)?;
    }
    Ok(out)
}

/// Conjugate gradients on the normal equations of `J`, restricted to the
/// terminal coordinates the functional can see.
pub fn minimize_j(
    problem: &NullControlProblem,
    options: &NullControlOptions,
) -> Result<NullControlResult> {
    let steps = problem.partition.steps();
    let tau = problem.partition.tau();
    let n = problem.basis.modes();
    let lam = problem.basis.resolvent(tau);
    let catalog = &problem.catalog;
    let space = catalog.space(steps);
    let d = space.dim();
    // coordinates that touch the last increment vanish under E(. | F_{N-1})
    let visible: Vec<bool> = (0..d)
        .map(|i| space.key(i).iter().all(|p| (p.0 as usize) < steps))
        .collect();
    let pinned = n * visible.iter().filter(|v| !**v).count();
    let mask = |v: &mut ChaosRandomVariable| {
        for l in 0..n {
            for (c, &keep) in v.mode_mut(l).iter_mut().zip(&visible) {
                if !keep {
                    *c = 0.0;
                }
            }
        }
    };
    // linear part: gradient of <y0, E z_0> is Lambda_0^N y0 on the constant coordinate
    let mut g = ChaosRandomVariable::zeros(catalog, steps, n)?;
    for l in 0..n {
        g.mode_mut(l)[0] = lam[l].powi(steps as i32) * problem.initial.values[l];
    }
    let mut x = ChaosRandomVariable::zeros(catalog, steps, n)?;
    let mut r = g.clone();
    r.scale(-1.0);
    mask(&mut r);
    let mut p = r.clone();
    let mut rr = r.norm_sq();
    let r0 = rr.sqrt();
    let (mut alphas, mut betas) = (Vec::new(), Vec::new());
    let mut iterations = 0;
    let target = options.tol * r0;
    while rr.sqrt() > target && iterations < options.max_iter {
        let mut q = apply_quadratic(problem, &p)?;
        mask(&mut q);
        let pq = p.dot(&q)?;
        if !(pq > 0.0) {
            break;
        }
        let alpha = rr / pq;
        x.axpy(alpha, &p)?;
        r.axpy(-alpha, &q)?;
        let rr_new = r.norm_sq();
        let beta = rr_new / rr;
        alphas.push(alpha);
        betas.push(beta);
        p.scale(beta);
        p.axpy(1.0, &r)?;
        rr = rr_new;
        iterations += 1;
    }
    let mut grad = apply_quadratic(problem, &x)?;
    grad.axpy(1.0, &g)?;
    mask(&mut grad);
    let grad_norm = grad.norm_sq().sqrt();
    if grad_norm > target.max(1e-14 * r0.max(1.0)) * 10.0 {
        return Err(Error::CgStagnation {
            grad_norm,
            iterations,
        });
    }
    let (ritz_min, ritz_max) = ritz_extremes(&alphas, &betas);
    let z = problem.backward(&x)?;
    let j_value = 0.5 * z.a.norm_sq(tau)
        + ChaosRandomVariable::constant(catalog, &problem.initial.values).dot(z.a.get(0))?;
    let terminal_energy = problem.forward(Some(z.a.clone()))?;
    let uncontrolled_energy = problem.forward(None)?;
    Ok(NullControlResult {
        terminal: x,
        control: z.a,
        report: NullControlReport {
            j_value,
            grad_norm,
            iterations,
            terminal_energy,
            uncontrolled_energy,
            ritz_min,
            ritz_max,
            pinned,
        },
    })
}

// Eigenvalues of the Lanczos tridiagonal assembled from the CG coefficients.
fn ritz_extremes(alphas: &[f64], betas: &[f64]) -> (f64, f64) {
    let m = alphas.len();
    if m == 0 {
        return (f64::NAN, f64::NAN);
    }
    let mut t = DMatrix::<f64>::zeros(m, m);
    for j in 0..m {
        t[(j, j)] = 1.0 / alphas[j]
            + if j > 0 {
                betas[j - 1] / alphas[j - 1]
            } else {
                0.0
            };
        if j + 1 < m {
            let off = betas[j].sqrt() / alphas[j];
            t[(j, j + 1)] = off;
            t[(j + 1, j)] = off;
        }
    }
    let eig = SymmetricEigen::new(t).eigenvalues;
    (
        eig.iter().cloned().fold(f64::INFINITY, f64::min),
        eig.iter().cloned().fold(f64::NEG_INFINITY, f64::max),
    )
}

/// `E|y(T)|^2` when the control is applied to the noiseless forward scheme.
pub fn verify_null(problem: &NullControlProblem, control: &ChaosVector) -> Result<f64> {
    problem.forward(Some(control.clone()))
}
