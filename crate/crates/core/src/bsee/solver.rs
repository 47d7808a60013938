use nalgebra::DMatrix;

use super::{BseeProblem, Diagnostics, Driver, Scheme, SolutionPair};
use crate::chaos::{ChaosRandomVariable, ChaosVector, Projector, ProjectorOptions};
use crate::{Error, Result};

#[derive(Clone, Debug)]
pub struct SolveOptions {
    pub scheme: Scheme,
    /// Absolute tolerance on the `L^2(Omega)` size of a Picard update.
    pub tol: f64,
    pub max_iter: usize,
    /// Relaxation weight of each Picard update, in `(0, 1]`.
    pub relaxation: f64,
    pub projector: ProjectorOptions,
}

impl Default for SolveOptions {
    fn default() -> Self {
        SolveOptions {
            scheme: Scheme::Implicit,
            tol: 1e-12,
            max_iter: 200,
            relaxation: 1.0,
            projector: ProjectorOptions::default(),
        }
    }
}

/// `out_l = sum_m mat[l, m] v_m`.
fn mix(mat: &DMatrix<f64>, v: &ChaosRandomVariable) -> ChaosRandomVariable {
    let mut out =
        ChaosRandomVariable::zeros(v.catalog(), v.slots(), v.modes()).expect("same shape");
    let d = v.dim();
    let src = v.coeffs();
    let dst = out.coeffs_mut();
    for l in 0..v.modes() {
        for m in 0..v.modes() {
            let w = mat[(l, m)];
            if w != 0.0 {
                for i in 0..d {
                    dst[l * d + i] += w * src[m * d + i];
                }
            }
        }
    }
    out
}

fn scale_modes(v: &mut ChaosRandomVariable, diag: &[f64]) {
    for (l, &s) in diag.iter().enumerate() {
        v.mode_mut(l).iter_mut().for_each(|c| *c *= s);
    }
}

/// `b(t_k) = E(Delta_{k+1} W a(t_{k+1}) | F_{t_k}) / tau`.
pub(crate) fn martingale_part(
    a_next: &ChaosRandomVariable,
    k: usize,
    tau: f64,
) -> Result<ChaosRandomVariable> {
    let mut b = a_next.increment_expect(k + 1, tau)?;
    b.scale(1.0 / tau);
    Ok(b)
}

/// `F(t_j, a, b)` projected onto the chaos space of its arguments.
pub(crate) fn eval_driver(
    problem: &BseeProblem,
    projector: &Projector,
    j: usize,
    a: &ChaosRandomVariable,
    b: &ChaosRandomVariable,
) -> Result<ChaosRandomVariable> {
    let slots = a.slots().max(b.slots());
    let n = problem.modes();
    match &problem.driver {
        Driver::Zero => ChaosRandomVariable::zeros(&problem.catalog, slots, n),
        Driver::Affine(d) => {
            let extra = d.source_at(j).map_or(0, |s| s.slots());
            let mut out = ChaosRandomVariable::zeros(&problem.catalog, slots.max(extra), n)?;
            out.axpy(1.0, &mix(&d.la, a))?;
            out.axpy(1.0, &mix(&d.lb, b))?;
            if let Some(s) = d.source_at(j) {
                out.axpy(1.0, s)?;
            }
            Ok(out)
        }
        Driver::Lipschitz(d) => {
            let t = problem.partition.time(j);
            let f = &d.f;
            projector.project_inputs(&[a, b], slots, n, |v, out| f(t, &v[..n], &v[n..], out))
        }
    }
}

fn empty_pair(problem: &BseeProblem) -> Result<(ChaosVector, ChaosVector)> {
    let m = problem.catalog.max_degree();
    Ok((
        ChaosVector::zeros(&problem.catalog, problem.modes(), m)?,
        ChaosVector::zeros(&problem.catalog, problem.modes(), m.saturating_sub(1))?,
    ))
}

/// Direct backward sweep for zero or affine drivers. Each step solves
/// `(I + tau Lambda_0 L_a) a_k = Lambda_0 (E(a_{k+1} | F_k) - tau L_b b_k - tau E(f(t_{k+1}) | F_k))`.
pub fn solve_linear(problem: &BseeProblem) -> Result<SolutionPair> {
    let n = problem.modes();
    let tau = problem.partition.tau();
    let lam = problem.basis.resolvent(tau);
    let lam_mat = DMatrix::from_diagonal(&nalgebra::DVector::from_vec(lam.clone()));
    let (la, lb, affine) = match &problem.driver {
        Driver::Zero => (DMatrix::zeros(n, n), DMatrix::zeros(n, n), None),
        Driver::Affine(d) => (d.la.clone(), d.lb.clone(), Some(d)),
        Driver::Lipschitz(_) => {
            return Err(Error::InvalidArgument(
                "solve_linear needs a zero or affine driver; use solve_picard".into(),
            ))
        }
    };
    let k_mat = DMatrix::identity(n, n) + &lam_mat * &la * tau;
    let step = k_mat.lu().solve(&lam_mat).ok_or(Error::SingularStep {
        step: problem.partition.steps() - 1,
    })?;
    if step.iter().any(|x| !x.is_finite()) {
        return Err(Error::SingularStep {
            step: problem.partition.steps() - 1,
        });
    }
    let lb_tau = &lb * (-tau);
    let (mut a, mut b) = empty_pair(problem)?;
    let mut next = problem.terminal.clone();
    for k in (0..problem.partition.steps()).rev() {
        let bk = martingale_part(&next, k, tau)?;
        let mut rhs = next.conditional_expect(k);
        rhs.axpy(1.0, &mix(&lb_tau, &bk))?;
        if let Some(src) = affine.and_then(|d| d.source_at(k + 1)) {
            rhs.axpy(-tau, &src.conditional_expect(k))?;
        }
        let ak = mix(&step, &rhs);
        b.set(k, bk)?;
        a.set(k, ak.clone())?;
        next = ak;
    }
    Ok(SolutionPair {
        a,
        b,
        terminal: problem.terminal.clone(),
        diagnostics: Diagnostics {
            scheme: Scheme::Implicit.tag(),
            iterations: 0,
            max_inner_iterations: 0,
            residual: 0.0,
            converged: true,
        },
    })
}

fn check_finite(v: &ChaosRandomVariable, step: usize, iterations: usize) -> Result<()> {
    if v.coeffs().iter().all(|c| c.is_finite()) {
        Ok(())
    } else {
        Err(Error::PicardDivergence {
            step,
            iterations,
            residual: f64::INFINITY,
        })
    }
}

/// Backward sweep for a general driver.
///
/// The implicit scheme runs a fixed-point iteration inside every step and
/// requires `tau L < 1/2`; affine drivers are handed to [`solve_linear`].
/// The explicit scheme evaluates the driver at `(a_{k+1}, b_{k+1})` with
/// `b(t_N) := b(t_{N-1})`.
pub fn solve_picard(problem: &BseeProblem, options: &SolveOptions) -> Result<SolutionPair> {
    if options.scheme == Scheme::Implicit && problem.driver.is_affine() {
        return solve_linear(problem);
    }
    if !(options.relaxation > 0.0 && options.relaxation <= 1.0) {
        return Err(Error::InvalidArgument(format!(
            "relaxation {} must lie in (0, 1]",
            options.relaxation
        )));
    }
    let tau = problem.partition.tau();
    let steps = problem.partition.steps();
    if let (Scheme::Implicit, Driver::Lipschitz(d)) = (options.scheme, &problem.driver) {
        let product = tau * d.lipschitz;
        if product >= 0.5 {
            let suggested = (2.0 * d.lipschitz * problem.partition.horizon()).floor() as usize + 1;
            return Err(Error::Contraction { product, suggested });
        }
    }
    let projector = Projector::new(options.projector.clone())?;
    let lam = problem.basis.resolvent(tau);
    let (mut a, mut b) = empty_pair(problem)?;
    let mut next = problem.terminal.clone();
    let mut b_next: Option<ChaosRandomVariable> = None;
    let mut total = 0;
    let mut max_inner = 0;
    let mut worst = 0.0f64;
    let mut converged = true;
    for k in (0..steps).rev() {
        let bk = martingale_part(&next, k, tau)?;
        let ak = match options.scheme {
            Scheme::Explicit => {
                let bn = b_next.as_ref().unwrap_or(&bk);
                let g = eval_driver(problem, &projector, k + 1, &next, bn)?;
                total += 1;
                max_inner = max_inner.max(1);
                let mut v = next.clone();
                v.axpy(-tau, &g)?;
                let mut v = v.conditional_expect(k);
                scale_modes(&mut v, &lam);
                check_finite(&v, k, 1)?;
                v
            }
            Scheme::Implicit => {
                let mut base = next.conditional_expect(k);
                scale_modes(&mut base, &lam);
                let mut x = base.clone();
                let mut inner = 0;
                let mut last = f64::INFINITY;
                while inner < options.max_iter {
                    inner += 1;
                    let g = eval_driver(problem, &projector, k + 1, &x, &bk)?.conditional_expect(k);
                    let mut proposal = base.clone();
                    let mut step_g = g;
                    scale_modes(&mut step_g, &lam);
                    proposal.axpy(-tau, &step_g)?;
                    last = proposal.distance_sq(&x)?.sqrt();
                    x.scale(1.0 - options.relaxation);
                    x.axpy(options.relaxation, &proposal)?;
                    check_finite(&x, k, inner)?;
                    if last <= options.tol {
                        break;
                    }
                }
                total += inner;
                max_inner = max_inner.max(inner);
                worst = worst.max(last);
                if last > options.tol {
                    converged = false;
                }
                x
            }
        };
        b.set(k, bk.clone())?;
        a.set(k, ak.clone())?;
        b_next = Some(bk);
        next = ak;
    }
    Ok(SolutionPair {
        a,
        b,
        terminal: problem.terminal.clone(),
        diagnostics: Diagnostics {
            scheme: options.scheme.tag(),
            iterations: total,
            max_inner_iterations: max_inner,
            residual: worst,
            converged,
        },
    })
}
