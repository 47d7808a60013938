//! Implicit Euler for the controlled forward heat equation
//! `dy = (-A y + u) dt + sigma dW`.

use std::sync::Arc;

use crate::bsee::Partition;
use crate::chaos::{Catalog, ChaosRandomVariable, ChaosVector};
use crate::spectral::{SpectralBasis, SpectralCoeffs};
use crate::{Error, Result};

#[derive(Clone, Debug)]
pub struct ForwardProblem {
    pub partition: Partition,
    pub basis: SpectralBasis,
    pub catalog: Arc<Catalog>,
    pub initial: SpectralCoeffs,
    /// Additive noise intensity per mode.
    pub noise: SpectralCoeffs,
    pub control: Option<ChaosVector>,
}

impl ForwardProblem {
    pub fn new(
        partition: Partition,
        basis: SpectralBasis,
        catalog: Arc<Catalog>,
        initial: SpectralCoeffs,
        noise: SpectralCoeffs,
        control: Option<ChaosVector>,
    ) -> Result<Self> {
        let n = basis.modes();
        if initial.modes() != n || noise.modes() != n {
            return Err(Error::Shape(format!(
                "initial value and noise need {n} modes"
            )));
        }
        if catalog.n_slots() != partition.steps() {
            return Err(Error::Shape(
                "catalog size differs from the step count".into(),
            ));
        }
        if catalog.max_degree() == 0 && noise.values.iter().any(|&s| s != 0.0) {
            return Err(Error::DegreeOverflow(
                "additive noise needs chaos degree at least 1".into(),
            ));
        }
        if let Some(u) = &control {
            if u.modes() != n || !Arc::ptr_eq(u.catalog(), &catalog) || u.len() != partition.steps()
            {
                return Err(Error::Shape(
                    "control has the wrong shape or catalog".into(),
                ));
            }
        }
        Ok(ForwardProblem {
            partition,
            basis,
            catalog,
            initial,
            noise,
            control,
        })
    }
}

/// States `y(t_0), ..., y(t_N)`; `y(t_k)` lives on `k` slots.
#[derive(Clone, Debug)]
pub struct ForwardTrajectory {
    pub states: Vec<ChaosRandomVariable>,
}

impl ForwardTrajectory {
    pub fn state(&self, k: usize) -> &ChaosRandomVariable {
        &self.states[k]
    }

    pub fn terminal(&self) -> &ChaosRandomVariable {
        self.states.last().expect("trajectory is never empty")
    }
}

/// `y_{k+1} = Lambda_0 (y_k + tau u_k + sigma Delta_{k+1} W)`.
pub fn solve_implicit(problem: &ForwardProblem) -> Result<ForwardTrajectory> {
    let tau = problem.partition.tau();
    let lam = problem.basis.resolvent(tau);
    let n = problem.basis.modes();
    let sigma = ChaosRandomVariable::constant(&problem.catalog, &problem.noise.values);
    let noisy = problem.noise.values.iter().any(|&s| s != 0.0);
    let mut states = Vec::with_capacity(problem.partition.steps() + 1);
    let mut y = ChaosRandomVariable::constant(&problem.catalog, &problem.initial.values);
    for k in 0..problem.partition.steps() {
        let mut next = y.embed(k + 1)?;
        if let Some(u) = &problem.control {
            next.axpy(tau, u.get(k))?;
        }
        if noisy {
            next.axpy(1.0, &sigma.increment_multiply(k + 1, tau)?)?;
        }
        for l in 0..n {
            next.mode_mut(l).iter_mut().for_each(|c| *c *= lam[l]);
        }
        states.push(std::mem::replace(&mut y, next));
    }
    states.push(y);
    Ok(ForwardTrajectory { states })
}
