//! Stochastic linear-quadratic control by projected gradient iteration.
//!
//! Minimizes `J(u) = 1/2 (tau sum_{k=1}^N E|y_k|^2 + tau sum_{k=0}^{N-1} E|u_k|^2) + 1/2 E|y_N|^2`
//! subject to the implicit forward scheme. The gradient is `u - z` where `z`
//! solves the backward adjoint `z_k = Lambda_0 E(z_{k+1} - tau y_{k+1} | F_k)`,
//! `z_N = -y_N`.

use std::sync::Arc;

use nalgebra::DMatrix;

use crate::bsee::{solve_linear, AffineDriver, BseeProblem, Driver, Partition, SolutionPair};
use crate::chaos::{Catalog, ChaosVector};
use crate::forward::{solve_implicit, ForwardProblem, ForwardTrajectory};
use crate::spectral::{SpectralBasis, SpectralCoeffs};
use crate::{Error, Result};

#[derive(Clone, Debug)]
pub struct SlqProblem {
    pub partition: Partition,
    pub basis: SpectralBasis,
    pub catalog: Arc<Catalog>,
    pub initial: SpectralCoeffs,
    pub noise: SpectralCoeffs,
    /// Step parameter; the update is `u <- (1 - 1/kappa) u + z / kappa`.
    pub kappa: f64,
    /// Run the forward recursion without the control term.
    pub literal_forward: bool,
}

impl SlqProblem {
    /// Uses `kappa = 1 + T + T^2`.
    pub fn new(
        partition: Partition,
        basis: SpectralBasis,
        catalog: Arc<Catalog>,
        initial: SpectralCoeffs,
        noise: SpectralCoeffs,
    ) -> Result<Self> {
        let t = partition.horizon();
        let p = SlqProblem {
            partition,
            basis,
            catalog,
            initial,
            noise,
            kappa: 1.0 + t + t * t,
            literal_forward: false,
        };
        p.forward(None)?;
        Ok(p)
    }

    pub fn default_kappa(&self) -> f64 {
        let t = self.partition.horizon();
        1.0 + t + t * t
    }

    fn forward(&self, control: Option<ChaosVector>) -> Result<ForwardProblem> {
        ForwardProblem::new(
            self.partition,
            self.basis,
            self.catalog.clone(),
            self.initial.clone(),
            self.noise.clone(),
            if self.literal_forward { None } else { control },
        )
    }

    pub fn zero_control(&self) -> Result<ChaosVector> {
        ChaosVector::zeros(&self.catalog, self.basis.modes(), self.catalog.max_degree())
    }
}

pub fn state(problem: &SlqProblem, control: &ChaosVector) -> Result<ForwardTrajectory> {
    solve_implicit(&problem.forward(Some(control.clone()))?)
}

pub fn cost(problem: &SlqProblem, trajectory: &ForwardTrajectory, control: &ChaosVector) -> f64 {
    let tau = problem.partition.tau();
    let running: f64 = trajectory.states[1..].iter().map(|y| y.norm_sq()).sum();
    0.5 * (tau * running + control.norm_sq(tau)) + 0.5 * trajectory.terminal().norm_sq()
}

/// Backward adjoint solved as an affine equation with source `y`.
pub fn adjoint_solve(problem: &SlqProblem, trajectory: &ForwardTrajectory) -> Result<SolutionPair> {
    let n = problem.basis.modes();
    let driver = AffineDriver::new(DMatrix::zeros(n, n), DMatrix::zeros(n, n))
        .with_source(trajectory.states.clone());
    let mut terminal = trajectory.terminal().clone();
    terminal.scale(-1.0);
    let bsee = BseeProblem::new(
        problem.partition,
        problem.basis,
        problem.catalog.clone(),
        Driver::Affine(driver),
        terminal,
    )?;
    solve_linear(&bsee)
}

/// `|u - z|` in the control norm `tau sum_k E|.|^2`.
pub fn max_condition_residual(
    control: &ChaosVector,
    adjoint: &SolutionPair,
    tau: f64,
) -> Result<f64> {
    let mut diff = control.clone();
    diff.axpy(-1.0, &adjoint.a)?;
    Ok(diff.norm_sq(tau).sqrt())
}

#[derive(Clone, Copy, Debug)]
pub struct SlqOptions {
    pub tol: f64,
    pub max_iter: usize,
}

impl Default for SlqOptions {
    fn default() -> Self {
        SlqOptions {
            tol: 1e-8,
            max_iter: 500,
        }
    }
}

#[derive(Clone, Debug)]
pub struct SlqIterate {
    pub control: ChaosVector,
    pub state: ForwardTrajectory,
    pub adjoint: SolutionPair,
    pub cost: f64,
    pub residual: f64,
}

#[derive(Clone, Copy, Debug, serde::Serialize)]
pub struct IterationRecord {
    pub iter: usize,
    pub cost: f64,
    pub residual: f64,
}

/// Iteration history plus the full final iterate.
#[derive(Clone, Debug)]
pub struct SlqRun {
    pub history: Vec<IterationRecord>,
    pub last: SlqIterate,
    pub converged: bool,
}

fn evaluate(problem: &SlqProblem, control: ChaosVector) -> Result<SlqIterate> {
    let state = state(problem, &control)?;
    let adjoint = adjoint_solve(problem, &state)?;
    let cost = cost(problem, &state, &control);
    let residual = max_condition_residual(&control, &adjoint, problem.partition.tau())?;
    Ok(SlqIterate {
        control,
        state,
        adjoint,
        cost,
        residual,
    })
}

/// Runs `u <- (1 - 1/kappa) u + z / kappa` from `initial` (zero by default)
/// until the residual drops below `tol` or `max_iter` updates were made.
pub fn gradient_iterate(
    problem: &SlqProblem,
    initial: Option<ChaosVector>,
    options: &SlqOptions,
) -> Result<SlqRun> {
    if !(problem.kappa.is_finite() && problem.kappa >= 1.0) {
        return Err(Error::InvalidArgument(format!(
            "kappa must be at least 1, got {}",
            problem.kappa
        )));
    }
    let mut current = evaluate(problem, initial.map_or_else(|| problem.zero_control(), Ok)?)?;
    let mut history = vec![IterationRecord {
        iter: 0,
        cost: current.cost,
        residual: current.residual,
    }];
    let w = 1.0 / problem.kappa;
    let mut iter = 0;
    while current.residual >= options.tol && iter < options.max_iter {
        iter += 1;
        let mut u = current.control.clone();
        u.scale(1.0 - w);
        u.axpy(w, &current.adjoint.a)?;
        current = evaluate(problem, u)?;
        history.push(IterationRecord {
            iter,
            cost: current.cost,
            residual: current.residual,
        });
    }
    let converged = current.residual < options.tol;
    Ok(SlqRun {
        history,
        last: current,
        converged,
    })
}

/// Scalar Riccati oracles for a single mode with eigenvalue `lambda`.
pub mod riccati {
    use crate::bsee::Partition;

    #[derive(Clone, Copy, Debug)]
    pub struct RiccatiValue {
        pub p0: f64,
        pub cost: f64,
    }

    /// Continuous problem: `P' = 2 lambda P - 1 + P^2`, `P(T) = 1`, integrated
    /// backward by RK4 with `steps` steps; cost `(P(0) y0^2 + sigma^2 int P) / 2`.
    pub fn continuous(
        lambda: f64,
        y0: f64,
        sigma: f64,
        horizon: f64,
        steps: usize,
    ) -> RiccatiValue {
        let rhs = |p: f64| 2.0 * lambda * p - 1.0 + p * p;
        let h = horizon / steps as f64;
        let mut p = 1.0;
        let mut integral = 0.0;
        for _ in 0..steps {
            // backward in time: dP/ds = -rhs with s = T - t
            let k1 = -rhs(p);
            let k2 = -rhs(p + 0.5 * h * k1);
            let k3 = -rhs(p + 0.5 * h * k2);
            let k4 = -rhs(p + h * k3);
            let next = p + h / 6.0 * (k1 + 2.0 * k2 + 2.0 * k3 + k4);
            // Simpson on the step using the RK midpoint estimate
            let mid = p + 0.5 * h * k2;
            integral += h / 6.0 * (p + 4.0 * mid + next);
            p = next;
        }
        RiccatiValue {
            p0: p,
            cost: 0.5 * (p * y0 * y0 + sigma * sigma * integral),
        }
    }

    /// Exact optimal cost of the discrete problem with the implicit
    /// forward scheme, by dynamic programming over feedback laws.
    pub fn discrete(lambda: f64, y0: f64, sigma: f64, partition: &Partition) -> RiccatiValue {
        let tau = partition.tau();
        let r = 1.0 / (1.0 + lambda * tau);
        let mut p = 1.0 + tau;
        let mut c = 0.0;
        for k in (0..partition.steps()).rev() {
            c += 0.5 * p * r * r * sigma * sigma * tau;
            let running = if k >= 1 { tau } else { 0.0 };
            p = running + p * r * r / (1.0 + tau * p * r * r);
        }
        RiccatiValue {
            p0: p,
            cost: 0.5 * p * y0 * y0 + c,
        }
    }
}
