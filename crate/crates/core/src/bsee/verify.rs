use rayon::prelude::*;

use super::solver::eval_driver;
use super::{BseeProblem, Partition, Scheme, SolutionPair};
use crate::chaos::{ChaosRandomVariable, ChaosVector, Projector, ProjectorOptions};
use crate::spectral::SpectralBasis;
use crate::{Error, Result};

/// Forward test process driven by `(v1, v2)`.
#[derive(Clone, Debug)]
pub struct TestProcess {
    /// `x(t_j)` for `j = 0..N-1`.
    pub x: Vec<ChaosRandomVariable>,
    /// `x(T)`.
    pub terminal: ChaosRandomVariable,
}

/// Implicit-resolvent recursion
/// `x_j = Lambda_0 (x_{j-1} + tau v1_j + v2_{j-1} Delta_j W)` from `x_{-1} = 0`,
/// closed by `x(T) = x_{N-1} + v2_{N-1} Delta_N W`.
pub fn test_process(
    v1: &ChaosVector,
    v2: &ChaosVector,
    basis: &SpectralBasis,
    partition: &Partition,
) -> Result<TestProcess> {
    let steps = partition.steps();
    if v1.len() != steps || v2.len() != steps {
        return Err(Error::Shape(
            "test functions must cover t_0..t_{N-1}".into(),
        ));
    }
    if v1.modes() != basis.modes() || v2.modes() != basis.modes() {
        return Err(Error::Shape(
            "test functions have the wrong number of modes".into(),
        ));
    }
    let tau = partition.tau();
    let lam = basis.resolvent(tau);
    let catalog = v1.catalog();
    let mut x = Vec::with_capacity(steps);
    let mut prev = ChaosRandomVariable::zeros(catalog, 0, basis.modes())?;
    for j in 0..steps {
        let mut cur = prev.embed(j)?;
        cur.axpy(tau, v1.get(j))?;
        if j > 0 {
            cur.axpy(1.0, &v2.get(j - 1).increment_multiply(j, tau)?)?;
        }
        for (l, &r) in lam.iter().enumerate() {
            cur.mode_mut(l).iter_mut().for_each(|c| *c *= r);
        }
        x.push(cur.clone());
        prev = cur;
    }
    let mut terminal = prev.embed(steps)?;
    terminal.axpy(1.0, &v2.get(steps - 1).increment_multiply(steps, tau)?)?;
    Ok(TestProcess { x, terminal })
}

fn driver_values(
    solution: &SolutionPair,
    problem: &BseeProblem,
    projector: &Projector,
) -> Result<Vec<ChaosRandomVariable>> {
    let steps = problem.partition.steps();
    let scheme: Scheme = solution.diagnostics.scheme.parse()?;
    (0..steps)
        .into_par_iter()
        .map(|j| match scheme {
            Scheme::Implicit => eval_driver(
                problem,
                projector,
                j + 1,
                solution.a.get(j),
                solution.b.get(j),
            ),
            Scheme::Explicit => {
                let b = solution.b.get((j + 1).min(steps - 1));
                eval_driver(problem, projector, j + 1, solution.a_at(j + 1), b)
            }
        })
        .collect()
}

/// Largest defect of the discrete variational identity
/// `E<x(T), a_T> = sum_j tau (E<x_j, F_j> + E<v1_j, a_j> + E<v2_j, b_j>)`
/// over test pairs `(e, 0)` and `(0, e)` with `e` ranging over the
/// orthonormal basis of the control spaces.
pub fn variational_residual(
    solution: &SolutionPair,
    problem: &BseeProblem,
    projector: &ProjectorOptions,
) -> Result<f64> {
    let projector = Projector::new(projector.clone())?;
    let drivers = driver_values(solution, problem, &projector)?;
    let steps = problem.partition.steps();
    let tau = problem.partition.tau();
    let n = problem.modes();
    let catalog = &problem.catalog;
    let m = catalog.max_degree();
    let mut tests = Vec::new();
    for k in 0..steps {
        let space = catalog.space(k);
        for l in 0..n {
            for i in 0..space.dim() {
                tests.push((false, k, l, i));
                if m > 0 && space.degree(i) < m {
                    tests.push((true, k, l, i));
                }
            }
        }
    }
    let zero1 = ChaosVector::zeros(catalog, n, m)?;
    let zero2 = ChaosVector::zeros(catalog, n, m.saturating_sub(1))?;
    let defects = tests
        .par_iter()
        .map(|&(second, k, l, i)| -> Result<f64> {
            let (mut v1, mut v2) = (zero1.clone(), zero2.clone());
            let mut e = ChaosRandomVariable::zeros(catalog, k, n)?;
            e.mode_mut(l)[i] = 1.0 / tau.sqrt();
            if second {
                v2.set(k, e)?;
            } else {
                v1.set(k, e)?;
            }
            let x = test_process(&v1, &v2, &problem.basis, &problem.partition)?;
            let lhs = x.terminal.dot(&solution.terminal)?;
            let mut rhs = 0.0;
            for j in k..steps {
                rhs += x.x[j].dot(&drivers[j])?;
            }
            rhs += if second {
                v2.dot(&solution.b, 1.0)?
            } else {
                v1.dot(&solution.a, 1.0)?
            };
            Ok((lhs - tau * rhs).abs())
        })
        .collect::<Result<Vec<f64>>>()?;
    Ok(defects.into_iter().fold(0.0, f64::max))
}
