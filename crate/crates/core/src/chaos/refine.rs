//! Embedding of coarse-grid chaos into a refined grid.
//!
//! A coarse increment is the normalized sum of `R` fine ones, and
//! `psi_m((x_1 + ... + x_R) / sqrt(R)) = sum_{|beta| = m} sqrt(m! / beta!) R^{-m/2} prod_r psi_{beta_r}(x_r)`,
//! so the embedding is exact and preserves the degree.

use std::sync::Arc;

use super::index::Catalog;
use super::variable::ChaosRandomVariable;
use crate::{Error, Result};

fn compositions(m: u32, parts: usize, prefix: &mut Vec<u32>, out: &mut Vec<Vec<u32>>) {
    if prefix.len() + 1 == parts {
        prefix.push(m);
        out.push(prefix.clone());
        prefix.pop();
        return;
    }
    for e in 0..=m {
        prefix.push(e);
        compositions(m - e, parts, prefix, out);
        prefix.pop();
    }
}

fn factorial(n: u32) -> f64 {
    (1..=n).map(f64::from).product()
}

/// Re-expresses `v` (on a grid with `N` steps) in the catalog of the grid
/// with `factor * N` steps.
pub fn refine(
    v: &ChaosRandomVariable,
    fine: &Arc<Catalog>,
    factor: usize,
) -> Result<ChaosRandomVariable> {
    let coarse = v.catalog();
    if factor == 0 || coarse.n_slots() * factor != fine.n_slots() {
        return Err(Error::Shape(format!(
            "fine catalog has {} slots, expected {} x {factor}",
            fine.n_slots(),
            coarse.n_slots()
        )));
    }
    if fine.max_degree() < coarse.max_degree() {
        return Err(Error::Shape(
            "fine catalog degree is lower than the coarse one".into(),
        ));
    }
    let slots = v.slots() * factor;
    let mut out = ChaosRandomVariable::zeros(fine, slots, v.modes())?;
    let cs = coarse.space(v.slots());
    let fs = fine.space(slots);
    let (dc, df) = (cs.dim(), fs.dim());
    let rf = factor as f64;
    let mut cache: Vec<Vec<(Vec<(u32, u32)>, f64)>> = Vec::new();
    for i in 0..dc {
        let coeffs: Vec<f64> = (0..v.modes()).map(|l| v.coeffs()[l * dc + i]).collect();
        if coeffs.iter().all(|&c| c == 0.0) {
            continue;
        }
        // expand each (slot, degree) factor and take the product
        let mut terms: Vec<(Vec<(u32, u32)>, f64)> = vec![(Vec::new(), 1.0)];
        for &(j, m) in cs.key(i) {
            let m_idx = m as usize;
            if cache.len() <= m_idx {
                cache.resize(m_idx + 1, Vec::new());
            }
            if cache[m_idx].is_empty() {
                let mut comps = Vec::new();
                compositions(m, factor, &mut Vec::new(), &mut comps);
                cache[m_idx] = comps
                    .into_iter()
                    .map(|beta| {
                        let w = (factorial(m)
                            / beta.iter().map(|&b| factorial(b)).product::<f64>())
                        .sqrt()
                            * rf.powf(-(m as f64) / 2.0);
                        let local = beta
                            .iter()
                            .enumerate()
                            .filter(|(_, &b)| b > 0)
                            .map(|(r, &b)| (r as u32, b))
                            .collect();
                        (local, w)
                    })
                    .collect();
            }
            let base = (j - 1) * factor as u32 + 1;
            let mut next = Vec::with_capacity(terms.len() * cache[m_idx].len());
            for (key, w) in &terms {
                for (local, lw) in &cache[m_idx] {
                    let mut k = key.clone();
                    k.extend(local.iter().map(|&(r, b)| (base + r, b)));
                    next.push((k, w * lw));
                }
            }
            terms = next;
        }
        for (key, w) in terms {
            let o = fs
                .ordinal_sparse(&key)
                .expect("refined index has the same degree");
            for (l, c) in coeffs.iter().enumerate() {
                out.coeffs_mut()[l * df + o] += w * c;
            }
        }
    }
    Ok(out)
}
