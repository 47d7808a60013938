//! Orthogonal projection `Gamma_M` of nonlinear functionals onto `H^M(k)`.

use std::sync::Arc;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use rayon::prelude::*;

use super::index::Catalog;
use super::quadrature::GaussHermite;
use super::variable::{ChaosRandomVariable, PsiTable};
use crate::{Error, Result};

const MC_CHUNK: usize = 4096;

/// Monte Carlo fallback settings.
#[derive(Clone, Copy, Debug)]
pub struct MonteCarlo {
    pub samples: usize,
    pub seed: u64,
}

/// How projections are computed.
///
/// Tensor Gauss–Hermite quadrature runs over the increment slots a functional
/// actually depends on, provided there are at most `max_slots` of them.
/// Beyond that the Monte Carlo fallback is used if configured.
#[derive(Clone, Debug)]
pub struct ProjectorOptions {
    pub nodes: usize,
    pub max_slots: usize,
    pub monte_carlo: Option<MonteCarlo>,
}

impl Default for ProjectorOptions {
    fn default() -> Self {
        ProjectorOptions {
            nodes: 5,
            max_slots: 8,
            monte_carlo: None,
        }
    }
}

/// `Gamma_M` of the functional `f(xi, out)` of the standardized increments
/// `xi_1, ..., xi_slots`, returned in `H^M(slots)` with `modes` components.
pub fn gamma_project<F>(
    catalog: &Arc<Catalog>,
    slots: usize,
    modes: usize,
    options: &ProjectorOptions,
    f: F,
) -> Result<ChaosRandomVariable>
where
    F: Fn(&[f64], &mut [f64]) + Sync,
{
    let projector = Projector::new(options.clone())?;
    let active: Vec<usize> = (1..=slots).collect();
    projector.project_over(catalog, slots, modes, &active, |_, xi, out| f(xi, out))
}

/// Reusable projection engine.
#[derive(Clone, Debug)]
pub struct Projector {
    options: ProjectorOptions,
    rule: GaussHermite,
}

impl Projector {
    pub fn new(options: ProjectorOptions) -> Result<Self> {
        let rule = GaussHermite::new(options.nodes)?;
        Ok(Projector { options, rule })
    }

    pub fn options(&self) -> &ProjectorOptions {
        &self.options
    }

    /// Projection of a functional that depends only on the `active` slots.
    pub(crate) fn project_over<F>(
        &self,
        catalog: &Arc<Catalog>,
        slots: usize,
        modes: usize,
        active: &[usize],
        f: F,
    ) -> Result<ChaosRandomVariable>
    where
        F: Fn(&PsiTable, &[f64], &mut [f64]) + Sync,
    {
        if active.len() <= self.options.max_slots {
            Ok(tensor_project(catalog, slots, modes, active, &self.rule, f))
        } else if let Some(mc) = self.options.monte_carlo {
            Ok(mc_project(catalog, slots, modes, mc, f))
        } else {
            Err(Error::QuadratureCap {
                active: active.len(),
                cap: self.options.max_slots,
            })
        }
    }

    /// `Gamma_M f(X_1, ..., X_p)` where the `X_i` are chaos variables and
    /// `f` receives their per-mode values concatenated in order. The result
    /// lives on `slots` increments, at least as many as any input.
    pub fn project_inputs<F>(
        &self,
        inputs: &[&ChaosRandomVariable],
        slots: usize,
        modes: usize,
        f: F,
    ) -> Result<ChaosRandomVariable>
    where
        F: Fn(&[f64], &mut [f64]) + Sync,
    {
        let catalog = inputs
            .first()
            .map(|v| v.catalog().clone())
            .ok_or_else(|| Error::InvalidArgument("no projection inputs".into()))?;
        let width: usize = inputs.iter().map(|v| v.modes()).sum();
        if catalog.max_degree() <= 1 && inputs.iter().all(|v| v.max_degree() <= 1) {
            if let Some(v) = self.project_gaussian(&catalog, inputs, slots, modes, &f) {
                return Ok(v);
            }
        }
        let mut active: Vec<usize> = inputs.iter().flat_map(|v| v.active_slots()).collect();
        active.sort_unstable();
        active.dedup();
        self.project_over(&catalog, slots, modes, &active, |table, _, out| {
            let mut vals = vec![0.0; width];
            let mut off = 0;
            for v in inputs {
                v.evaluate_with(table, &mut vals[off..off + v.modes()]);
                off += v.modes();
            }
            f(&vals, out);
        })
    }

    // Affine inputs with an affine target space: rotate onto an orthonormal
    // basis of the Gaussian directions the inputs span and integrate there.
    fn project_gaussian<F>(
        &self,
        catalog: &Arc<Catalog>,
        inputs: &[&ChaosRandomVariable],
        slots: usize,
        modes: usize,
        f: &F,
    ) -> Option<ChaosRandomVariable>
    where
        F: Fn(&[f64], &mut [f64]) + Sync,
    {
        let space = catalog.space(slots);
        let mut means = Vec::new();
        let mut rows: Vec<Vec<f64>> = Vec::new();
        for v in inputs {
            let vs = catalog.space(v.slots());
            for l in 0..v.modes() {
                let c = v.mode(l);
                means.push(c[0]);
                let mut g = vec![0.0; slots];
                for (i, &ci) in c.iter().enumerate().skip(1) {
                    let key = vs.key(i);
                    g[key[0].0 as usize - 1] = ci;
                }
                rows.push(g);
            }
        }
        // modified Gram–Schmidt on the rows
        let scale = rows
            .iter()
            .flat_map(|r| r.iter())
            .fold(0.0f64, |m, x| m.max(x.abs()));
        let mut basis: Vec<Vec<f64>> = Vec::new();
        for r in &rows {
            let mut w = r.clone();
            for _ in 0..2 {
                for q in &basis {
                    let p: f64 = w.iter().zip(q).map(|(a, b)| a * b).sum();
                    w.iter_mut().zip(q).for_each(|(a, b)| *a -= p * b);
                }
            }
            let nrm = w.iter().map(|x| x * x).sum::<f64>().sqrt();
            if nrm > 1e-12 * scale.max(f64::MIN_POSITIVE) {
                w.iter_mut().for_each(|x| *x /= nrm);
                basis.push(w);
            }
        }
        let r = basis.len();
        if r > self.options.max_slots {
            return None;
        }
        let coef: Vec<Vec<f64>> = rows
            .iter()
            .map(|g| {
                basis
                    .iter()
                    .map(|q| g.iter().zip(q).map(|(a, b)| a * b).sum())
                    .collect()
            })
            .collect();
        let q = self.rule.len();
        let total = q.pow(r as u32);
        // moments[l][0] = E f_l, moments[l][1 + s] = E f_l eta_s
        let acc = (0..q)
            .into_par_iter()
            .map(|first| {
                let mut acc = vec![0.0; modes * (r + 1)];
                let mut vals = vec![0.0; means.len()];
                let mut out = vec![0.0; modes];
                let mut eta = vec![0.0; r];
                let inner = if r == 0 { 1 } else { total / q };
                if r == 0 && first > 0 {
                    return acc;
                }
                for idx in 0..inner {
                    let mut w = 1.0;
                    let mut rem = idx;
                    for (s, e) in eta.iter_mut().enumerate() {
                        let node = if s == 0 {
                            first
                        } else {
                            let n = rem % q;
                            rem /= q;
                            n
                        };
                        *e = self.rule.nodes[node];
                        w *= self.rule.weights[node];
                    }
                    for (i, v) in vals.iter_mut().enumerate() {
                        *v = means[i] + coef[i].iter().zip(&eta).map(|(c, e)| c * e).sum::<f64>();
                    }
                    f(&vals, &mut out);
                    for l in 0..modes {
                        acc[l * (r + 1)] += w * out[l];
                        for s in 0..r {
                            acc[l * (r + 1) + 1 + s] += w * out[l] * eta[s];
                        }
                    }
                }
                acc
            })
            .collect::<Vec<_>>()
            .into_iter()
            .fold(vec![0.0; modes * (r + 1)], |mut a, b| {
                a.iter_mut().zip(b).for_each(|(x, y)| *x += y);
                a
            });
        let mut result = ChaosRandomVariable::zeros(catalog, slots, modes).ok()?;
        let d = space.dim();
        for l in 0..modes {
            let dst = result.mode_mut(l);
            dst[0] = acc[l * (r + 1)];
            if catalog.max_degree() == 0 {
                continue;
            }
            for j in 1..=slots {
                let o = space.ordinal_sparse(&[(j as u32, 1)])?;
                debug_assert!(o < d);
                dst[o] = (0..r)
                    .map(|s| basis[s][j - 1] * acc[l * (r + 1) + 1 + s])
                    .sum();
            }
        }
        Some(result)
    }
}

fn tensor_project<F>(
    catalog: &Arc<Catalog>,
    slots: usize,
    modes: usize,
    active: &[usize],
    rule: &GaussHermite,
    f: F,
) -> ChaosRandomVariable
where
    F: Fn(&PsiTable, &[f64], &mut [f64]) + Sync,
{
    let space = catalog.space(slots);
    let mut is_active = vec![false; slots + 1];
    active.iter().for_each(|&s| is_active[s] = true);
    let support: Vec<usize> = (0..space.dim())
        .filter(|&i| space.key(i).iter().all(|p| is_active[p.0 as usize]))
        .collect();
    let q = rule.len();
    let s = active.len();
    let total = q.pow(s as u32);
    let firsts = if s == 0 { 1 } else { q };
    let inner = total / firsts;
    let m = catalog.max_degree();
    let width = support.len();
    let acc = (0..firsts)
        .into_par_iter()
        .map(|first| {
            let mut acc = vec![0.0; modes * width];
            let mut xi = vec![0.0; slots];
            let mut out = vec![0.0; modes];
            for idx in 0..inner {
                let mut w = 1.0;
                let mut rem = idx;
                for (a, &slot) in active.iter().enumerate() {
                    let node = if a == 0 {
                        first
                    } else {
                        let n = rem % q;
                        rem /= q;
                        n
                    };
                    xi[slot - 1] = rule.nodes[node];
                    w *= rule.weights[node];
                }
                let table = PsiTable::new(&xi, m);
                f(&table, &xi, &mut out);
                for (c, &i) in support.iter().enumerate() {
                    let b = w * table.basis(space.key(i));
                    for l in 0..modes {
                        acc[l * width + c] += out[l] * b;
                    }
                }
            }
            acc
        })
        .collect::<Vec<_>>()
        .into_iter()
        .fold(vec![0.0; modes * width], |mut a, b| {
            a.iter_mut().zip(b).for_each(|(x, y)| *x += y);
            a
        });
    let mut result =
        ChaosRandomVariable::zeros(catalog, slots, modes).expect("slots within catalog");
    for l in 0..modes {
        let dst = result.mode_mut(l);
        for (c, &i) in support.iter().enumerate() {
            dst[i] = acc[l * width + c];
        }
    }
    result
}

fn mc_project<F>(
    catalog: &Arc<Catalog>,
    slots: usize,
    modes: usize,
    mc: MonteCarlo,
    f: F,
) -> ChaosRandomVariable
where
    F: Fn(&PsiTable, &[f64], &mut [f64]) + Sync,
{
    let space = catalog.space(slots);
    let d = space.dim();
    let m = catalog.max_degree();
    let chunks = mc.samples.div_ceil(MC_CHUNK);
    let acc = (0..chunks)
        .into_par_iter()
        .map(|chunk| {
            let mut rng = ChaCha8Rng::seed_from_u64(mc.seed);
            rng.set_stream(chunk as u64);
            let n = MC_CHUNK.min(mc.samples - chunk * MC_CHUNK);
            let mut acc = vec![0.0; modes * d];
            let mut xi = vec![0.0; slots];
            let mut out = vec![0.0; modes];
            for _ in 0..n {
                xi.iter_mut()
                    .for_each(|x| *x = StandardNormal.sample(&mut rng));
                let table = PsiTable::new(&xi, m);
                f(&table, &xi, &mut out);
                for i in 0..d {
                    let b = table.basis(space.key(i));
                    for l in 0..modes {
                        acc[l * d + i] += out[l] * b;
                    }
                }
            }
            acc
        })
        .collect::<Vec<_>>()
        .into_iter()
        .fold(vec![0.0; modes * d], |mut a, b| {
            a.iter_mut().zip(b).for_each(|(x, y)| *x += y);
            a
        });
    let inv = 1.0 / mc.samples as f64;
    ChaosRandomVariable::from_coeffs(
        catalog,
        slots,
        modes,
        acc.into_iter().map(|x| x * inv).collect(),
    )
    .expect("shape fixed above")
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn polynomial_in_the_span_is_reproduced() {
        let c = Catalog::new(2, 2).unwrap();
        let v = gamma_project(&c, 2, 1, &ProjectorOptions::default(), |xi, out| {
            out[0] = 1.0 + 2.0 * xi[0] + xi[0] * xi[1]
        })
        .unwrap();
        assert!((v.mean()[0] - 1.0).abs() < 1e-13);
        let o = c
            .space(2)
            .ordinal(&crate::chaos::MultiIndex::new(vec![1, 1]))
            .unwrap();
        assert!((v.mode(0)[o] - 1.0).abs() < 1e-13);
        assert!((v.norm_sq() - 6.0).abs() < 1e-12);
    }

    #[test]
    fn gaussian_backend_agrees_with_tensor() {
        let c = Catalog::new(3, 1).unwrap();
        let a =
            ChaosRandomVariable::affine_brownian(&c, 3, 0.2, &[0.3, -0.1], &[1.0, 0.5]).unwrap();
        let p = Projector::new(ProjectorOptions {
            nodes: 9,
            ..Default::default()
        })
        .unwrap();
        let fast = p
            .project_inputs(&[&a], 3, 2, |v, out| {
                out[0] = v[0].sin();
                out[1] = v[1].tanh() + v[0];
            })
            .unwrap();
        let slow = p
            .project_over(&c, 3, 2, &[1, 2, 3], |t, _, out| {
                let mut v = [0.0; 2];
                a.evaluate_with(t, &mut v);
                out[0] = v[0].sin();
                out[1] = v[1].tanh() + v[0];
            })
            .unwrap();
        let d = fast.distance_sq(&slow).unwrap();
        // both are quadratures of a non-polynomial; they differ at the 1e-7 level
        assert!(d < 1e-12, "{d:e}");
    }

    #[test]
    fn gaussian_backend_is_exact_for_polynomials() {
        let c = Catalog::new(3, 1).unwrap();
        let a =
            ChaosRandomVariable::affine_brownian(&c, 3, 0.2, &[0.3, -0.1], &[1.0, 0.5]).unwrap();
        let p = Projector::new(ProjectorOptions::default()).unwrap();
        let f = |v: &[f64], out: &mut [f64]| {
            out[0] = v[0].powi(3) + v[0] * v[1];
            out[1] = v[1] * v[1];
        };
        let fast = p.project_inputs(&[&a], 3, 2, f).unwrap();
        let slow = p
            .project_over(&c, 3, 2, &[1, 2, 3], |t, _, out| {
                let mut v = [0.0; 2];
                a.evaluate_with(t, &mut v);
                f(&v, out);
            })
            .unwrap();
        let d = fast.distance_sq(&slow).unwrap();
        assert!(d < 1e-26, "{d:e} {:?} {:?}", fast.coeffs(), slow.coeffs());
    }

    #[test]
    fn cap_without_fallback_errors() {
        let c = Catalog::new(3, 1).unwrap();
        let opts = ProjectorOptions {
            max_slots: 2,
            ..Default::default()
        };
        let r = gamma_project(&c, 3, 1, &opts, |xi, out| out[0] = xi[0]);
        assert!(matches!(r, Err(Error::QuadratureCap { active: 3, cap: 2 })));
    }
}
