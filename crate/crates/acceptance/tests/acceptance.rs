//! One line per acceptance criterion. Exits with status 1 if any fails.

use std::sync::Arc;
use std::time::Instant;

use nalgebra::{DMatrix, DVector};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use transposer::bsee::{
    error_vs_reference, self_convergence_error, solve_linear, solve_picard, variational_residual,
    AffineDriver, BseeProblem, Driver, ErrorOptions, HeatReference, LipschitzDriver, Partition,
    Scheme, SolutionPair, SolveOptions,
};
use transposer::chaos::{
    enumerate_indices, gram_matrix, Catalog, CatalogLimits, ChaosRandomVariable, MultiIndex,
    ProjectorOptions,
};
use transposer::nullctrl::{minimize_j, NullControlOptions, NullControlProblem};
use transposer::rate::fit_loglog;
use transposer::slq::{gradient_iterate, riccati, SlqOptions, SlqProblem};
use transposer::spectral::{eigenvalue, SpectralBasis, SpectralCoeffs};
use transposer::DEFAULT_SEED;

type Outcome = (bool, String);

fn main() {
    let criteria: [(usize, f64, fn() -> Outcome); 9] = [
        (1, 1.0, basis_counts),
        (2, 30.0, orthonormality),
        (3, 10.0, closed_form_linear),
        (4, 60.0, variational_identity),
        (5, 10.0, euler_equivalence),
        (6, 60.0, spatial_rate),
        (7, 120.0, slq),
        (8, 60.0, null_control),
        (9, 120.0, nonlinear_picard),
    ];
    let mut failed = 0;
    for (id, budget, check) in criteria {
        let start = Instant::now();
        let (ok, detail) = check();
        let secs = start.elapsed().as_secs_f64();
        let ok = ok && secs < budget;
        failed += usize::from(!ok);
        println!(
            "criterion {id}: {} {detail} ({secs:.2} s of {budget} s)",
            if ok { "PASS" } else { "FAIL" }
        );
    }
    println!("{} of 9 criteria passed", 9 - failed);
    if failed > 0 {
        std::process::exit(1);
    }
}

fn catalog(steps: usize, degree: usize) -> Arc<Catalog> {
    let limits = CatalogLimits {
        max_slots: steps.max(64),
        ..Default::default()
    };
    Catalog::with_limits(steps, degree, limits).unwrap()
}

fn random_variable(
    c: &Arc<Catalog>,
    slots: usize,
    modes: usize,
    rng: &mut ChaCha8Rng,
) -> ChaosRandomVariable {
    let d = c.dim(slots);
    let coeffs = (0..d * modes)
        .map(|_| rng.sample::<f64, _>(StandardNormal))
        .collect();
    ChaosRandomVariable::from_coeffs(c, slots, modes, coeffs).unwrap()
}

fn random_matrix(n: usize, rng: &mut ChaCha8Rng) -> DMatrix<f64> {
    DMatrix::from_fn(n, n, |_, _| 0.5 * rng.sample::<f64, _>(StandardNormal))
}

// Criterion 1

fn binomial(n: u64, k: u64) -> u64 {
    (1..=k).fold(1, |acc, i| acc * (n + 1 - i) / i)
}

fn basis_counts() -> Outcome {
    for k in 0..=20 {
        if enumerate_indices(k, 1).len() != k + 1
            || enumerate_indices(k, 2).len() != (k + 1) * (k + 2) / 2
        {
            return (false, format!("count mismatch at k = {k}"));
        }
    }
    // M = 3 against brute force over {0..3}^k
    for k in 0..=8 {
        let mut brute = Vec::new();
        for code in 0..4usize.pow(k as u32) {
            let e: Vec<u32> = (0..k)
                .map(|j| (code / 4usize.pow(j as u32) % 4) as u32)
                .collect();
            if e.iter().sum::<u32>() <= 3 {
                brute.push(e);
            }
        }
        let mut got: Vec<Vec<u32>> = enumerate_indices(k, 3)
            .iter()
            .map(|a| a.entries().to_vec())
            .collect();
        got.sort();
        brute.sort();
        if got != brute || got.len() as u64 != binomial(k as u64 + 3, 3) {
            return (false, format!("M = 3 enumeration differs at k = {k}"));
        }
    }
    (
        true,
        "M=1,2 closed forms for k<=20; M=3 exhaustive for k<=8".into(),
    )
}

// Criterion 2

fn orthonormal_hermite(m: usize, x: f64) -> f64 {
    let (mut p0, mut p1) = (1.0, x);
    if m == 0 {
        return 1.0;
    }
    for j in 1..m {
        let p2 = x * p1 - j as f64 * p0;
        p0 = p1;
        p1 = p2;
    }
    let fact: f64 = (1..=m).map(|j| j as f64).product();
    p1 / fact.sqrt()
}

fn orthonormality() -> Outcome {
    let mut worst = 0.0f64;
    for k in 0..=6 {
        for m in 0..=4 {
            let g = gram_matrix(k, m).unwrap();
            let d = g.nrows();
            worst = worst.max((g - DMatrix::<f64>::identity(d, d)).amax());
        }
    }
    if worst > 1e-10 {
        return (false, format!("exact Gram deviates by {worst:e}"));
    }
    let index = enumerate_indices(3, 2);
    let d = index.len();
    let samples = 1_000_000;
    let mut rng = ChaCha8Rng::seed_from_u64(DEFAULT_SEED);
    let mut sum = vec![0.0; d * d];
    let mut sum_sq = vec![0.0; d * d];
    let mut e = vec![0.0; d];
    for _ in 0..samples {
        let xi: [f64; 3] = std::array::from_fn(|_| rng.sample(StandardNormal));
        for (v, alpha) in e.iter_mut().zip(&index) {
            *v = alpha
                .entries()
                .iter()
                .zip(&xi)
                .map(|(&a, &x)| orthonormal_hermite(a as usize, x))
                .product();
        }
        for i in 0..d {
            for j in 0..d {
                let p = e[i] * e[j];
                sum[i * d + j] += p;
                sum_sq[i * d + j] += p * p;
            }
        }
    }
    let n = samples as f64;
    let mut worst_z = 0.0f64;
    for i in 0..d {
        for j in 0..d {
            let mean = sum[i * d + j] / n;
            let var = (sum_sq[i * d + j] / n - mean * mean) * n / (n - 1.0);
            let target = if i == j { 1.0 } else { 0.0 };
            worst_z = worst_z.max((mean - target).abs() / (var / n).sqrt());
        }
    }
    (worst_z <= 3.0, format!("exact Gram max dev {worst:.1e} (k<=6, M<=4); MC worst |z| = {worst_z:.2} (k=3, M=2, 1e6 samples)"))
}

// Criterion 3

fn brownian_problem(steps: usize) -> BseeProblem {
    let p = Partition::new(1.0, steps).unwrap();
    let c = catalog(steps, 1);
    let t = ChaosRandomVariable::affine_brownian(&c, steps, p.tau(), &[0.0], &[1.0]).unwrap();
    BseeProblem::new(p, SpectralBasis::new(1).unwrap(), c, Driver::Zero, t).unwrap()
}

fn closed_form_linear() -> Outcome {
    let sweep = [8, 16, 32, 64, 128];
    let lambda = eigenvalue(1);
    let reference = HeatReference {
        horizon: 1.0,
        eigenvalues: vec![lambda],
        shift: vec![0.0],
        slope: vec![1.0],
    };
    let mut coeff_dev = 0.0f64;
    let mut errors = Vec::new();
    for &steps in &sweep {
        let pr = brownian_problem(steps);
        let s = solve_linear(&pr).unwrap();
        let tau = pr.partition.tau();
        let r = 1.0 / (1.0 + lambda * tau);
        for k in 0..steps {
            let space = pr.catalog.space(k);
            let scale = r.powi((steps - k) as i32);
            for (i, &c) in s.a.get(k).coeffs().iter().enumerate() {
                let want = if space.degree(i) == 1 {
                    scale * tau.sqrt()
                } else {
                    0.0
                };
                coeff_dev = coeff_dev.max((c - want).abs());
            }
            for (i, &c) in s.b.get(k).coeffs().iter().enumerate() {
                let want = if i == 0 {
                    r.powi((steps - k - 1) as i32)
                } else {
                    0.0
                };
                coeff_dev = coeff_dev.max((c - want).abs());
            }
        }
        errors.push(
            error_vs_reference(&s, &pr.partition, &reference, &ErrorOptions::default())
                .unwrap()
                .total(),
        );
    }
    let taus: Vec<f64> = sweep.iter().map(|&n| 1.0 / n as f64).collect();
    let (slope, _, hw) = fit_loglog(&taus, &errors).unwrap();
    let ok = coeff_dev < 1e-12 && (slope - 1.0).abs() <= 0.2;
    (ok, format!("coeff dev {coeff_dev:.1e}; squared-error slope vs tau {slope:.3} +- {hw:.3} over N=8..128"))
}

// Criterion 4

fn variational_identity() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(DEFAULT_SEED);
    let mut worst = 0.0f64;
    let mut count = 0;
    for (steps, n, m) in [
        (1, 1, 1),
        (2, 1, 3),
        (5, 3, 2),
        (8, 4, 1),
        (8, 2, 2),
        (8, 4, 3),
    ] {
        let c = catalog(steps, m);
        let p = Partition::new(1.0, steps).unwrap();
        let src = (0..=steps)
            .map(|j| random_variable(&c, j, n, &mut rng))
            .collect();
        let driver = Driver::Affine(
            AffineDriver::new(random_matrix(n, &mut rng), random_matrix(n, &mut rng))
                .with_source(src),
        );
        let t = random_variable(&c, steps, n, &mut rng);
        let pr = BseeProblem::new(p, SpectralBasis::new(n).unwrap(), c, driver, t).unwrap();
        let s = solve_linear(&pr).unwrap();
        worst = worst.max(variational_residual(&s, &pr, &ProjectorOptions::default()).unwrap());
        count += 1;
    }
    for (steps, n, m) in [(4, 2, 1), (8, 4, 1), (6, 2, 2), (4, 4, 3), (5, 1, 3)] {
        for scheme in [Scheme::Implicit, Scheme::Explicit] {
            let c = catalog(steps, m);
            let p = Partition::new(1.0, steps).unwrap();
            let t = random_variable(&c, steps, n, &mut rng);
            let d = Driver::Lipschitz(LipschitzDriver::named("sin_tanh", 1.0).unwrap());
            let pr = BseeProblem::new(p, SpectralBasis::new(n).unwrap(), c, d, t).unwrap();
            let opts = SolveOptions {
                scheme,
                ..Default::default()
            };
            let s = solve_picard(&pr, &opts).unwrap();
            if !s.diagnostics.converged {
                return (
                    false,
                    format!("Picard did not converge at N={steps} n={n} M={m}"),
                );
            }
            worst = worst.max(variational_residual(&s, &pr, &opts.projector).unwrap());
            count += 1;
        }
    }
    (
        worst < 1e-8,
        format!("max residual {worst:.2e} over {count} solver outputs (affine and Picard)"),
    )
}

// Criterion 5: dense recursion over the full H^M(N) coordinates, with
// conditional expectations as coordinate masks.

struct Dense {
    catalog: Arc<Catalog>,
    steps: usize,
}

impl Dense {
    fn dim(&self) -> usize {
        self.catalog.dim(self.steps)
    }

    fn alpha(&self, i: usize) -> Vec<u32> {
        self.catalog
            .space(self.steps)
            .multi_index(i)
            .entries()
            .to_vec()
    }

    fn ordinal(&self, e: Vec<u32>) -> Option<usize> {
        self.catalog.space(self.steps).ordinal(&MultiIndex::new(e))
    }

    fn lift(&self, v: &ChaosRandomVariable) -> Vec<Vec<f64>> {
        let space = self.catalog.space(v.slots());
        (0..v.modes())
            .map(|l| {
                let mut out = vec![0.0; self.dim()];
                for (i, &c) in v.mode(l).iter().enumerate() {
                    let mut e = space.multi_index(i).entries().to_vec();
                    e.resize(self.steps, 0);
                    out[self.ordinal(e).unwrap()] = c;
                }
                out
            })
            .collect()
    }

    fn measurable(&self, i: usize, k: usize) -> bool {
        self.alpha(i)[k..].iter().all(|&a| a == 0)
    }

    fn cond(&self, x: &[Vec<f64>], k: usize) -> Vec<Vec<f64>> {
        x.iter()
            .map(|m| {
                m.iter()
                    .enumerate()
                    .map(|(i, &c)| if self.measurable(i, k) { c } else { 0.0 })
                    .collect()
            })
            .collect()
    }

    // E(x Delta W_{k+1} | F_k) / tau with Delta W_{k+1} = sqrt(tau) xi_k
    fn mart(&self, x: &[Vec<f64>], k: usize, tau: f64) -> Vec<Vec<f64>> {
        x.iter()
            .map(|m| {
                (0..self.dim())
                    .map(|i| {
                        if !self.measurable(i, k) {
                            return 0.0;
                        }
                        let mut e = self.alpha(i);
                        e[k] = 1;
                        self.ordinal(e).map_or(0.0, |j| m[j] / tau.sqrt())
                    })
                    .collect()
            })
            .collect()
    }
}

fn euler_equivalence() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(DEFAULT_SEED ^ 5);
    let mut worst = 0.0f64;
    for _ in 0..20 {
        let steps = rng.random_range(2..=6);
        let n = rng.random_range(1..=3);
        let m = rng.random_range(1..=3);
        let c = catalog(steps, m);
        let p = Partition::new(rng.random_range(0.5..2.0), steps).unwrap();
        let tau = p.tau();
        let (la, lb) = (random_matrix(n, &mut rng), random_matrix(n, &mut rng));
        let src: Vec<_> = (0..=steps)
            .map(|j| random_variable(&c, j, n, &mut rng))
            .collect();
        let t = random_variable(&c, steps, n, &mut rng);
        let driver =
            Driver::Affine(AffineDriver::new(la.clone(), lb.clone()).with_source(src.clone()));
        let pr = BseeProblem::new(
            p,
            SpectralBasis::new(n).unwrap(),
            c.clone(),
            driver,
            t.clone(),
        )
        .unwrap();
        let s = solve_linear(&pr).unwrap();

        let dense = Dense { catalog: c, steps };
        let lam: Vec<f64> = (1..=n).map(|i| 1.0 / (1.0 + eigenvalue(i) * tau)).collect();
        let lam_mat = DMatrix::from_diagonal(&DVector::from_vec(lam));
        let lhs = (DMatrix::identity(n, n) + &lam_mat * &la * tau)
            .try_inverse()
            .unwrap()
            * &lam_mat;
        let mut next = dense.lift(&t);
        for k in (0..steps).rev() {
            let b = dense.mart(&next, k, tau);
            let ea = dense.cond(&next, k);
            let ef = dense.cond(&dense.lift(&src[k + 1]), k);
            let mut a = vec![vec![0.0; dense.dim()]; n];
            for i in 0..dense.dim() {
                let rhs = DVector::from_fn(n, |l, _| {
                    let lbb: f64 = (0..n).map(|q| lb[(l, q)] * b[q][i]).sum();
                    ea[l][i] - tau * lbb - tau * ef[l][i]
                });
                let x = &lhs * rhs;
                for l in 0..n {
                    a[l][i] = x[l];
                }
            }
            for (got, want) in [(dense.lift(s.a.get(k)), &a), (dense.lift(s.b.get(k)), &b)] {
                for (g, w) in got.iter().flatten().zip(want.iter().flatten()) {
                    worst = worst.max((g - w).abs());
                }
            }
            next = a;
        }
    }
    (
        worst < 1e-12,
        format!("max coefficient deviation {worst:.2e} over 20 random affine instances"),
    )
}

// Criterion 6

fn spatial_rate() -> Outcome {
    let steps = 256;
    let sweep = [2usize, 4, 8, 16];
    let n_ref = 64 * 16;
    let decay: Vec<f64> = (1..=n_ref).map(|i| (i as f64).powf(-1.5)).collect();
    let reference = HeatReference {
        horizon: 1.0,
        eigenvalues: (1..=n_ref).map(eigenvalue).collect(),
        shift: decay.clone(),
        slope: vec![0.0; n_ref],
    };
    let c = catalog(steps, 1);
    let errors: Vec<f64> = sweep
        .iter()
        .map(|&n| {
            let p = Partition::new(1.0, steps).unwrap();
            let t = ChaosRandomVariable::constant(&c, &decay[..n]);
            let pr = BseeProblem::new(
                p,
                SpectralBasis::new(n).unwrap(),
                c.clone(),
                Driver::Zero,
                t,
            )
            .unwrap();
            let s = solve_linear(&pr).unwrap();
            error_vs_reference(&s, &pr.partition, &reference, &ErrorOptions::default())
                .unwrap()
                .total()
        })
        .collect();
    let xs: Vec<f64> = sweep.iter().map(|&n| (n + 1) as f64).collect();
    let (slope, _, hw) = fit_loglog(&xs, &errors).unwrap();
    (
        (slope + 2.0).abs() <= 0.3,
        format!("squared-error slope vs n+1 {slope:.3} +- {hw:.3} (N=256, n=2..16)"),
    )
}

// Criterion 7

fn slq() -> Outcome {
    let (lambda, y0, sigma) = (eigenvalue(1), 1.0, 0.5);
    let mut parts = Vec::new();
    let mut ok = true;
    for steps in [16, 32, 64] {
        let p = SlqProblem::new(
            Partition::new(1.0, steps).unwrap(),
            SpectralBasis::new(1).unwrap(),
            catalog(steps, 1),
            SpectralCoeffs::new(vec![y0]),
            SpectralCoeffs::new(vec![sigma]),
        )
        .unwrap();
        let run = gradient_iterate(&p, None, &SlqOptions::default()).unwrap();
        let monotone = run
            .history
            .windows(2)
            .all(|w| w[1].cost <= w[0].cost * (1.0 + 1e-14));
        let exact = riccati::continuous(lambda, y0, sigma, 1.0, 100 * steps).cost;
        let gap = (run.last.cost - exact).abs() / exact;
        let iters = run.history.len() - 1;
        ok &= monotone && run.converged && run.last.residual < 1e-8 && gap <= 5.0 / steps as f64;
        parts.push(format!(
            "N={steps}: {iters} it, res {:.1e}, gap {gap:.4} (<= {:.4}){}",
            run.last.residual,
            5.0 / steps as f64,
            if monotone { "" } else { ", cost increased" }
        ));
    }
    (ok, parts.join("; "))
}

// Criterion 8

fn null_control() -> Outcome {
    let (steps, horizon) = (32, 1.0);
    let y0 = vec![1.0, 0.5, 0.0, 0.0];
    let p = NullControlProblem::new(
        Partition::new(horizon, steps).unwrap(),
        SpectralBasis::new(4).unwrap(),
        catalog(steps, 1),
        SpectralCoeffs::new(y0.clone()),
    )
    .unwrap();
    let r = minimize_j(&p, &NullControlOptions::default()).unwrap();
    let ratio = r.report.terminal_energy / r.report.uncontrolled_energy;
    let mut ok = ratio <= 1e-4;
    let mut parts = vec![format!("energy ratio {ratio:.1e} (<= 1e-4)")];
    let bound = 10.0 / steps as f64;
    let zt = r.terminal.mean();
    for (l, &y) in y0.iter().enumerate() {
        let lam = eigenvalue(l + 1);
        let star = -2.0 * lam * (-lam * horizon).exp() * y / (1.0 - (-2.0 * lam * horizon).exp());
        if y == 0.0 {
            ok &= zt[l].abs() < 1e-12;
            continue;
        }
        let gap = (zt[l] - star).abs() / star.abs();
        ok &= gap <= bound;
        parts.push(format!(
            "mode {} gap {gap:.3} ({})",
            l + 1,
            if gap <= bound { "ok" } else { "over" }
        ));
    }
    parts.push(format!("bound {bound:.4}"));
    (ok, parts.join("; "))
}

// Criterion 9: F = sin(a) with terminal W(T) phi_1

fn sin_problem(steps: usize) -> BseeProblem {
    let p = Partition::new(1.0, steps).unwrap();
    let c = catalog(steps, 1);
    let t = ChaosRandomVariable::affine_brownian(&c, steps, p.tau(), &[0.0], &[1.0]).unwrap();
    let d = Driver::Lipschitz(LipschitzDriver::named("sin", 1.0).unwrap());
    BseeProblem::new(p, SpectralBasis::new(1).unwrap(), c, d, t).unwrap()
}

fn solve(steps: usize, scheme: Scheme) -> SolutionPair {
    let s = solve_picard(
        &sin_problem(steps),
        &SolveOptions {
            scheme,
            ..Default::default()
        },
    )
    .unwrap();
    assert!(
        s.diagnostics.converged,
        "Picard did not converge at N = {steps}"
    );
    s
}

fn nonlinear_picard() -> Outcome {
    let reference = 64;
    let fine = solve(reference, Scheme::Implicit);
    let sweep = [4usize, 8, 16, 32];
    let errors: Vec<f64> = sweep
        .iter()
        .map(|&n| {
            self_convergence_error(&solve(n, Scheme::Implicit), &fine, 1.0)
                .unwrap()
                .total()
        })
        .collect();
    // the coarse-to-fine distance of a first-order scheme scales with tau - tau_ref
    let gaps: Vec<f64> = sweep
        .iter()
        .map(|&n| 1.0 / n as f64 - 1.0 / reference as f64)
        .collect();
    let (slope, _, hw) = fit_loglog(&gaps, &errors).unwrap();
    let taus: Vec<f64> = sweep.iter().map(|&n| 1.0 / n as f64).collect();
    let (raw, _, _) = fit_loglog(&taus, &errors).unwrap();
    let sweep = [8usize, 16, 32, 64];
    let dist: Vec<f64> = sweep
        .iter()
        .map(|&n| {
            let d = self_convergence_error(
                &solve(n, Scheme::Explicit),
                &solve(n, Scheme::Implicit),
                1.0,
            )
            .unwrap();
            d.total().sqrt()
        })
        .collect();
    let taus: Vec<f64> = sweep.iter().map(|&n| 1.0 / n as f64).collect();
    let (dist_slope, _, dist_hw) = fit_loglog(&taus, &dist).unwrap();
    let ok = (slope - 1.0).abs() <= 0.2 && (dist_slope - 1.0).abs() <= 0.2;
    (
        ok,
        format!(
            "squared self-convergence slope vs tau - tau_ref {slope:.3} +- {hw:.3} (vs tau {raw:.3}; N=4..32 against 64); \
             implicit-explicit distance slope {dist_slope:.3} +- {dist_hw:.3} (N=8..64)"
        ),
    )
}
