use transposer::bsee::Partition;
use transposer::chaos::{Catalog, ChaosRandomVariable};
use transposer::nullctrl::{
    functional_j, minimize_j, verify_null, NullControlOptions, NullControlProblem,
};
use transposer::slq::{self, gradient_iterate, riccati, SlqOptions, SlqProblem};
use transposer::spectral::{SpectralBasis, SpectralCoeffs};

fn slq_problem(steps: usize, n: usize, m: usize, y0: Vec<f64>, sigma: Vec<f64>) -> SlqProblem {
    SlqProblem::new(
        Partition::new(1.0, steps).unwrap(),
        SpectralBasis::new(n).unwrap(),
        Catalog::new(steps, m).unwrap(),
        SpectralCoeffs::new(y0),
        SpectralCoeffs::new(sigma),
    )
    .unwrap()
}

#[test]
fn gradient_iteration_reaches_the_discrete_optimum() {
    let p = slq_problem(16, 1, 1, vec![1.0], vec![0.5]);
    let run = gradient_iterate(&p, None, &SlqOptions::default()).unwrap();
    assert!(run.converged);
    for w in run.history.windows(2) {
        assert!(w[1].cost <= w[0].cost + 1e-15);
    }
    let dp = riccati::discrete(1.0, 1.0, 0.5, &p.partition);
    assert!(
        (run.last.cost - dp.cost).abs() < 1e-9 * dp.cost,
        "{} {}",
        run.last.cost,
        dp.cost
    );
}

#[test]
fn multi_mode_costs_add_up() {
    let p = slq_problem(8, 3, 2, vec![1.0, -0.5, 0.2], vec![0.3, 0.1, 0.0]);
    let run = gradient_iterate(
        &p,
        None,
        &SlqOptions {
            tol: 1e-10,
            max_iter: 500,
        },
    )
    .unwrap();
    assert!(run.converged);
    let want: f64 = (0..3)
        .map(|l| {
            let lam = ((l + 1) * (l + 1)) as f64;
            riccati::discrete(lam, p.initial.values[l], p.noise.values[l], &p.partition).cost
        })
        .sum();
    assert!((run.last.cost - want).abs() < 1e-9);
}

#[test]
fn adjoint_gives_the_gradient() {
    // directional derivative of the cost along a random direction equals <u - z, v>
    let p = slq_problem(6, 2, 1, vec![1.0, 0.5], vec![0.2, 0.4]);
    let tau = p.partition.tau();
    let mut u = p.zero_control().unwrap();
    let mut v = p.zero_control().unwrap();
    for k in 0..6 {
        let base =
            ChaosRandomVariable::affine_brownian(&p.catalog, k, tau, &[0.3, -0.1], &[0.2, 0.5])
                .unwrap();
        v.set(k, base.clone()).unwrap();
        let mut ub = base;
        ub.scale(-0.7);
        u.set(k, ub).unwrap();
    }
    let cost_at =
        |c: &transposer::chaos::ChaosVector| slq::cost(&p, &slq::state(&p, c).unwrap(), c);
    let y = slq::state(&p, &u).unwrap();
    let z = slq::adjoint_solve(&p, &y).unwrap();
    let mut g = u.clone();
    g.axpy(-1.0, &z.a).unwrap();
    let want = g.dot(&v, tau).unwrap();
    let h = 1e-6;
    let (mut up, mut um) = (u.clone(), u.clone());
    up.axpy(h, &v).unwrap();
    um.axpy(-h, &v).unwrap();
    let fd = (cost_at(&up) - cost_at(&um)) / (2.0 * h);
    assert!((fd - want).abs() < 1e-7, "{fd} {want}");
}

#[test]
fn riccati_cost_gap_shrinks_with_tau() {
    let mut gaps = Vec::new();
    for steps in [8, 16, 32] {
        let part = Partition::new(1.0, steps).unwrap();
        let d = riccati::discrete(1.0, 1.0, 0.5, &part).cost;
        let c = riccati::continuous(1.0, 1.0, 0.5, 1.0, 10 * steps).cost;
        gaps.push((d - c).abs() / c);
    }
    assert!(
        gaps[1] < 0.6 * gaps[0] && gaps[2] < 0.6 * gaps[1],
        "{gaps:?}"
    );
}

#[test]
fn kappa_below_one_is_rejected() {
    let mut p = slq_problem(4, 1, 1, vec![1.0], vec![0.0]);
    p.kappa = 0.5;
    assert!(gradient_iterate(&p, None, &SlqOptions::default()).is_err());
}

fn null_problem(steps: usize, m: usize, y0: Vec<f64>) -> NullControlProblem {
    let n = y0.len();
    NullControlProblem::new(
        Partition::new(1.0, steps).unwrap(),
        SpectralBasis::new(n).unwrap(),
        Catalog::new(steps, m).unwrap(),
        SpectralCoeffs::new(y0),
    )
    .unwrap()
}

#[test]
fn null_control_is_exact_on_the_grid() {
    let p = null_problem(16, 1, vec![1.0, 0.5, 0.0, -0.25]);
    let r = minimize_j(&p, &NullControlOptions::default()).unwrap();
    assert!(r.report.terminal_energy < 1e-24 * r.report.uncontrolled_energy.max(1.0));
    assert!((verify_null(&p, &r.control).unwrap() - r.report.terminal_energy).abs() < 1e-30);
    assert!((functional_j(&p, &r.terminal).unwrap() - r.report.j_value).abs() < 1e-14);
    // coordinates touching the last increment are pinned
    assert_eq!(r.report.pinned, 4);
    assert!(r.report.ritz_min > 0.0 && r.report.ritz_min <= r.report.ritz_max);
}

#[test]
fn minimizer_beats_perturbations() {
    let p = null_problem(8, 2, vec![1.0, 0.5]);
    let r = minimize_j(&p, &NullControlOptions::default()).unwrap();
    for (l, o) in [(0, 0), (1, 0), (0, 3), (1, 7)] {
        let mut z = r.terminal.clone();
        z.mode_mut(l)[o] += 1e-3;
        assert!(functional_j(&p, &z).unwrap() >= r.report.j_value - 1e-15);
    }
}

#[test]
fn zero_initial_state_needs_no_control() {
    let p = null_problem(4, 1, vec![0.0, 0.0]);
    let r = minimize_j(&p, &NullControlOptions::default()).unwrap();
    assert_eq!(r.report.iterations, 0);
    assert_eq!(r.control.norm_sq(p.partition.tau()), 0.0);
}
