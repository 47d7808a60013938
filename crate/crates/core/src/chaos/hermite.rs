//! One-dimensional Hermite polynomials.
//!
//! `H_n = He_n / n!` is the normalization used for the chaos basis. It obeys
//! `x H_n = (n + 1) H_{n+1} + H_{n-1}` with `H_0 = 1`, `H_1 = x`.
//! `psi_n = He_n / sqrt(n!)` is the orthonormal version under the standard
//! Gaussian weight; `sqrt(alpha!) prod H_{alpha_j}` is a product of `psi`s.

use crate::{Error, Result};

/// Largest degree accepted by [`hermite_eval`].
pub const MAX_HERMITE_DEGREE: usize = 64;

/// `H_n(x) = He_n(x) / n!`.
pub fn hermite_eval(degree: usize, x: f64) -> Result<f64> {
    if degree > MAX_HERMITE_DEGREE {
        return Err(Error::HermiteDegree {
            degree,
            cap: MAX_HERMITE_DEGREE,
        });
    }
    let (mut prev, mut cur) = (0.0, 1.0);
    for n in 0..degree {
        let next = (x * cur - prev) / (n + 1) as f64;
        prev = cur;
        cur = next;
    }
    Ok(cur)
}

/// Orthonormal Hermite function `He_n(x) / sqrt(n!)`.
pub fn psi(degree: usize, x: f64) -> f64 {
    let (mut prev, mut cur) = (0.0, 1.0);
    for n in 0..degree {
        let next = (x * cur - (n as f64).sqrt() * prev) / ((n + 1) as f64).sqrt();
        prev = cur;
        cur = next;
    }
    cur
}

/// Fills `out[m] = psi_m(x)` for `m < out.len()`.
pub fn psi_table(x: f64, out: &mut [f64]) {
    if out.is_empty() {
        return;
    }
    out[0] = 1.0;
    if out.len() > 1 {
        out[1] = x;
    }
    for n in 1..out.len().saturating_sub(1) {
        out[n + 1] = (x * out[n] - (n as f64).sqrt() * out[n - 1]) / ((n + 1) as f64).sqrt();
    }
}

/// Monomial coefficients of `psi_m`, lowest power first.
pub(crate) fn psi_monomials(degree: usize) -> Vec<f64> {
    let mut prev = vec![0.0; degree + 1];
    let mut cur = vec![0.0; degree + 1];
    cur[0] = 1.0;
    for n in 0..degree {
        let mut next = vec![0.0; degree + 1];
        for p in 0..degree {
            next[p + 1] += cur[p];
        }
        let s = (n as f64).sqrt();
        for p in 0..=degree {
            next[p] -= s * prev[p];
        }
        let d = ((n + 1) as f64).sqrt();
        next.iter_mut().for_each(|c| *c /= d);
        prev = cur;
        cur = next;
    }
    cur
}

/// `E[X^p]` for a standard Gaussian `X`.
pub(crate) fn gaussian_moment(p: usize) -> f64 {
    if p % 2 == 1 {
        return 0.0;
    }
    (1..p).step_by(2).map(|j| j as f64).product()
}

/// `E[psi_m(X) psi_l(X)]` computed from monomial expansions and exact
/// Gaussian moments.
pub(crate) fn psi_pair_moment(m: usize, l: usize) -> f64 {
    let a = psi_monomials(m);
    let b = psi_monomials(l);
    let mut total = 0.0;
    for (i, ca) in a.iter().enumerate() {
        for (j, cb) in b.iter().enumerate() {
            total += ca * cb * gaussian_moment(i + j);
        }
    }
    total
}
