//! Backward stochastic heat equations by finite transposition.
//!
//! The pair `(a, b)` solves `da = -(A a + F(t, a, b)) dt + b dW`,
//! `a(T) = a_T`, with `A = -d^2/dx^2` on `(0, π)` under Dirichlet conditions.
//! On the grid, `a(t_k) in H^M(k)` and `b(t_k) in H^{M-1}(k)`; the scheme is
//! characterized by a discrete variational identity against forward test
//! processes.

mod reference;
mod solver;
mod verify;

use std::sync::Arc;

use nalgebra::DMatrix;

use crate::chaos::{Catalog, ChaosRandomVariable, ChaosVector};
use crate::spectral::SpectralBasis;
use crate::{Error, Result};

pub use reference::{
    error_vs_reference, self_convergence_error, ErrorOptions, ErrorReport, HeatReference, Reference,
};
pub use solver::{solve_linear, solve_picard, SolveOptions};
pub use verify::{test_process, variational_residual, TestProcess};

/// Uniform grid `t_k = k T / N`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Partition {
    horizon: f64,
    steps: usize,
}

impl Partition {
    pub fn new(horizon: f64, steps: usize) -> Result<Self> {
        if !(horizon.is_finite() && horizon > 0.0) {
            return Err(Error::InvalidArgument(format!(
                "horizon must be positive, got {horizon}"
            )));
        }
        if steps == 0 {
            return Err(Error::InvalidArgument("need at least one time step".into()));
        }
        Ok(Partition { horizon, steps })
    }

    pub fn horizon(&self) -> f64 {
        self.horizon
    }

    pub fn steps(&self) -> usize {
        self.steps
    }

    pub fn tau(&self) -> f64 {
        self.horizon / self.steps as f64
    }

    pub fn time(&self, k: usize) -> f64 {
        self.horizon * k as f64 / self.steps as f64
    }

    /// Index `k` of the cell `[t_k, t_{k+1})` containing `t`; `T` maps to `N - 1`.
    pub fn cell(&self, t: f64) -> usize {
        ((t / self.tau()).floor().max(0.0) as usize).min(self.steps - 1)
    }

    /// Left end `t_k` of the cell containing `t`.
    pub fn nu(&self, t: f64) -> f64 {
        self.time(self.cell(t))
    }

    /// Right end `t_{k+1}` of the cell containing `t`.
    pub fn mu(&self, t: f64) -> f64 {
        self.time(self.cell(t) + 1)
    }
}

/// Time discretization of the driver.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Scheme {
    Implicit,
    Explicit,
}

impl Scheme {
    pub fn tag(&self) -> &'static str {
        match self {
            Scheme::Implicit => "implicit",
            Scheme::Explicit => "explicit",
        }
    }
}

impl std::str::FromStr for Scheme {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "implicit" => Ok(Scheme::Implicit),
            "explicit" => Ok(Scheme::Explicit),
            other => Err(Error::Config(format!("unknown scheme {other:?}"))),
        }
    }
}

/// `F(t, a, b, out)` evaluated pointwise in `omega`.
pub type DriverFn = Arc<dyn Fn(f64, &[f64], &[f64], &mut [f64]) + Send + Sync>;

/// `F(t, a, b) = L_a a + L_b b + f(t)`, with an optional source `f` that may
/// itself be chaos valued.
#[derive(Clone, Debug)]
pub struct AffineDriver {
    pub la: DMatrix<f64>,
    pub lb: DMatrix<f64>,
    // source[j] is f(t_j), j = 0..=N; entry 0 is never used.
    source: Option<Vec<ChaosRandomVariable>>,
}

impl AffineDriver {
    pub fn new(la: DMatrix<f64>, lb: DMatrix<f64>) -> Self {
        AffineDriver {
            la,
            lb,
            source: None,
        }
    }

    /// Attaches `f(t_j)` for `j = 0..=N`.
    pub fn with_source(mut self, source: Vec<ChaosRandomVariable>) -> Self {
        self.source = Some(source);
        self
    }

    /// Attaches a deterministic source `f(t)`.
    pub fn with_deterministic_source(
        self,
        catalog: &Arc<Catalog>,
        partition: &Partition,
        f: impl Fn(f64) -> Vec<f64>,
    ) -> Self {
        let source = (0..=partition.steps())
            .map(|j| ChaosRandomVariable::constant(catalog, &f(partition.time(j))))
            .collect();
        self.with_source(source)
    }

    pub fn source_at(&self, j: usize) -> Option<&ChaosRandomVariable> {
        self.source.as_ref().map(|s| &s[j])
    }
}

/// Nonlinear driver with a known Lipschitz constant.
#[derive(Clone)]
pub struct LipschitzDriver {
    pub name: String,
    pub lipschitz: f64,
    pub f: DriverFn,
}

impl std::fmt::Debug for LipschitzDriver {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("LipschitzDriver")
            .field("name", &self.name)
            .field("lipschitz", &self.lipschitz)
            .finish()
    }
}

impl LipschitzDriver {
    pub fn new(name: impl Into<String>, lipschitz: f64, f: DriverFn) -> Self {
        LipschitzDriver {
            name: name.into(),
            lipschitz,
            f,
        }
    }

    /// Named drivers acting componentwise, scaled by `scale`:
    /// `sin` is `sin(a)`, `tanh` is `tanh(a)`, `sin_tanh` is `sin(a) + tanh(b) / 2`.
    pub fn named(name: &str, scale: f64) -> Result<Self> {
        let (lip, f): (f64, DriverFn) = match name {
            "sin" => (
                1.0,
                Arc::new(move |_, a, _, out| {
                    out.iter_mut()
                        .zip(a)
                        .for_each(|(o, x)| *o = scale * x.sin())
                }),
            ),
            "tanh" => (
                1.0,
                Arc::new(move |_, a, _, out| {
                    out.iter_mut()
                        .zip(a)
                        .for_each(|(o, x)| *o = scale * x.tanh())
                }),
            ),
            "sin_tanh" => (
                1.5,
                Arc::new(move |_, a, b, out| {
                    for i in 0..out.len() {
                        out[i] = scale * (a[i].sin() + 0.5 * b[i].tanh());
                    }
                }),
            ),
            other => return Err(Error::Config(format!("unknown driver function {other:?}"))),
        };
        Ok(LipschitzDriver::new(name, lip * scale.abs(), f))
    }
}

#[derive(Clone, Debug)]
pub enum Driver {
    Zero,
    Affine(AffineDriver),
    Lipschitz(LipschitzDriver),
}

impl Driver {
    pub fn is_affine(&self) -> bool {
        !matches!(self, Driver::Lipschitz(_))
    }
}

#[derive(Clone, Debug)]
pub struct BseeProblem {
    pub partition: Partition,
    pub basis: SpectralBasis,
    pub catalog: Arc<Catalog>,
    pub driver: Driver,
    /// `a(T)`, stored on all `N` slots.
    pub terminal: ChaosRandomVariable,
}

impl BseeProblem {
    pub fn new(
        partition: Partition,
        basis: SpectralBasis,
        catalog: Arc<Catalog>,
        driver: Driver,
        terminal: ChaosRandomVariable,
    ) -> Result<Self> {
        let (n, steps) = (basis.modes(), partition.steps());
        if catalog.n_slots() != steps {
            return Err(Error::Shape(format!(
                "catalog has {} slots for {steps} steps",
                catalog.n_slots()
            )));
        }
        if !Arc::ptr_eq(terminal.catalog(), &catalog) {
            return Err(Error::Shape(
                "terminal value belongs to a different catalog".into(),
            ));
        }
        if terminal.modes() != n {
            return Err(Error::Shape(format!(
                "terminal has {} modes, basis has {n}",
                terminal.modes()
            )));
        }
        if let Driver::Affine(d) = &driver {
            if d.la.shape() != (n, n) || d.lb.shape() != (n, n) {
                return Err(Error::Shape(format!(
                    "affine driver matrices must be {n}x{n}"
                )));
            }
            if let Some(src) = &d.source {
                if src.len() != steps + 1 {
                    return Err(Error::Shape(format!(
                        "source needs {} time values",
                        steps + 1
                    )));
                }
                for (j, s) in src.iter().enumerate() {
                    if s.modes() != n || s.slots() > j {
                        return Err(Error::Shape(format!("source at t_{j} has the wrong shape")));
                    }
                    if !Arc::ptr_eq(s.catalog(), &catalog) {
                        return Err(Error::Shape("source belongs to a different catalog".into()));
                    }
                }
            }
        }
        if let Driver::Lipschitz(d) = &driver {
            if !(d.lipschitz.is_finite() && d.lipschitz >= 0.0) {
                return Err(Error::InvalidArgument(
                    "Lipschitz constant must be finite and nonnegative".into(),
                ));
            }
        }
        let terminal = terminal.embed(steps)?;
        Ok(BseeProblem {
            partition,
            basis,
            catalog,
            driver,
            terminal,
        })
    }

    pub fn modes(&self) -> usize {
        self.basis.modes()
    }
}

#[derive(Clone, Debug, serde::Serialize)]
pub struct Diagnostics {
    pub scheme: &'static str,
    /// Total driver evaluations in Picard sweeps (0 for the direct solver).
    pub iterations: usize,
    pub max_inner_iterations: usize,
    /// Largest final Picard update over all steps.
    pub residual: f64,
    pub converged: bool,
}

/// Discrete solution: `a` and `b` at `t_0..t_{N-1}`, plus `a(T)`.
#[derive(Clone, Debug)]
pub struct SolutionPair {
    pub a: ChaosVector,
    pub b: ChaosVector,
    pub terminal: ChaosRandomVariable,
    pub diagnostics: Diagnostics,
}

impl SolutionPair {
    /// `a(t_k)` for `k = 0..=N`.
    pub fn a_at(&self, k: usize) -> &ChaosRandomVariable {
        if k == self.a.len() {
            &self.terminal
        } else {
            self.a.get(k)
        }
    }

    pub fn is_deterministic(&self) -> bool {
        self.terminal.is_deterministic()
            && self.a.iter().all(|v| v.is_deterministic())
            && self
                .b
                .iter()
                .all(|v| v.norm_sq() == 0.0 || v.is_deterministic())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn grid_helpers() {
        let p = Partition::new(1.0, 4).unwrap();
        assert_eq!(p.tau(), 0.25);
        assert_eq!(p.cell(0.3), 1);
        assert_eq!(p.nu(0.3), 0.25);
        assert_eq!(p.mu(0.3), 0.5);
        assert_eq!(p.cell(1.0), 3);
        assert!(Partition::new(0.0, 3).is_err());
        assert!(Partition::new(1.0, 0).is_err());
    }
}
