//! Chaos-valued random variables and adapted processes on the grid.

use std::sync::Arc;

use super::hermite::psi_table;
use super::index::{Catalog, MultiIndex, NONE};
use crate::{Error, Result};

/// A vector of `modes` random variables, each an element of `H^M(slots)`.
///
/// Coefficients are stored mode-major against the orthonormal basis
/// `sqrt(alpha!) prod_j H_{alpha_j}(xi_j)`, so `E|X|^2` is the plain sum of
/// squares.
#[derive(Clone, Debug)]
pub struct ChaosRandomVariable {
    catalog: Arc<Catalog>,
    slots: usize,
    modes: usize,
    coeffs: Vec<f64>,
}

impl ChaosRandomVariable {
    pub fn zeros(catalog: &Arc<Catalog>, slots: usize, modes: usize) -> Result<Self> {
        if slots > catalog.n_slots() {
            return Err(Error::Shape(format!(
                "{slots} slots exceed catalog size {}",
                catalog.n_slots()
            )));
        }
        let dim = catalog.dim(slots);
        Ok(ChaosRandomVariable {
            catalog: catalog.clone(),
            slots,
            modes,
            coeffs: vec![0.0; dim * modes],
        })
    }

    /// Deterministic variable with the given per-mode values.
    pub fn constant(catalog: &Arc<Catalog>, values: &[f64]) -> Self {
        let mut v = Self::zeros(catalog, 0, values.len()).expect("slot 0 always exists");
        v.coeffs.copy_from_slice(values);
        v
    }

    pub fn from_coeffs(
        catalog: &Arc<Catalog>,
        slots: usize,
        modes: usize,
        coeffs: Vec<f64>,
    ) -> Result<Self> {
        let v = Self::zeros(catalog, slots, modes)?;
        if coeffs.len() != v.coeffs.len() {
            return Err(Error::Shape(format!(
                "expected {} coefficients, got {}",
                v.coeffs.len(),
                coeffs.len()
            )));
        }
        Ok(ChaosRandomVariable { coeffs, ..v })
    }

    /// `shift_l + scale_l W(t_slots)` per mode, with `W(t_s) = sqrt(tau) sum_{j<=s} xi_j`.
    pub fn affine_brownian(
        catalog: &Arc<Catalog>,
        slots: usize,
        tau: f64,
        shift: &[f64],
        scale: &[f64],
    ) -> Result<Self> {
        if shift.len() != scale.len() {
            return Err(Error::Shape("shift and scale lengths differ".into()));
        }
        let mut v = Self::zeros(catalog, slots, shift.len())?;
        if slots > 0 && catalog.max_degree() == 0 && scale.iter().any(|&s| s != 0.0) {
            return Err(Error::DegreeOverflow(
                "Brownian term needs chaos degree at least 1".into(),
            ));
        }
        let space = catalog.space(slots);
        let dim = space.dim();
        for l in 0..shift.len() {
            v.coeffs[l * dim] = shift[l];
            for j in 1..=slots as u32 {
                if let Some(o) = space.ordinal_sparse(&[(j, 1)]) {
                    v.coeffs[l * dim + o] = scale[l] * tau.sqrt();
                }
            }
        }
        Ok(v)
    }

    pub fn catalog(&self) -> &Arc<Catalog> {
        &self.catalog
    }

    pub fn slots(&self) -> usize {
        self.slots
    }

    pub fn modes(&self) -> usize {
        self.modes
    }

    pub fn dim(&self) -> usize {
        self.catalog.dim(self.slots)
    }

    pub fn coeffs(&self) -> &[f64] {
        &self.coeffs
    }

    pub fn coeffs_mut(&mut self) -> &mut [f64] {
        &mut self.coeffs
    }

    pub fn mode(&self, l: usize) -> &[f64] {
        let d = self.dim();
        &self.coeffs[l * d..(l + 1) * d]
    }

    pub fn mode_mut(&mut self, l: usize) -> &mut [f64] {
        let d = self.dim();
        &mut self.coeffs[l * d..(l + 1) * d]
    }

    pub fn coeff(&self, l: usize, alpha: &MultiIndex) -> Option<f64> {
        let o = self.catalog.space(self.slots).ordinal(alpha)?;
        Some(self.mode(l)[o])
    }

    pub fn set_coeff(&mut self, l: usize, alpha: &MultiIndex, value: f64) -> Result<()> {
        let o = self
            .catalog
            .space(self.slots)
            .ordinal(alpha)
            .ok_or_else(|| {
                Error::Shape(format!("{alpha} is not a basis index of H({})", self.slots))
            })?;
        self.mode_mut(l)[o] = value;
        Ok(())
    }

    /// Per-mode expectations.
    pub fn mean(&self) -> Vec<f64> {
        (0..self.modes).map(|l| self.mode(l)[0]).collect()
    }

    /// `E sum_l |X_l|^2`.
    pub fn norm_sq(&self) -> f64 {
        self.coeffs.iter().map(|c| c * c).sum()
    }

    fn same_family(&self, other: &Self) -> Result<()> {
        if !Arc::ptr_eq(&self.catalog, &other.catalog) {
            return Err(Error::Shape(
                "variables belong to different catalogs".into(),
            ));
        }
        if self.modes != other.modes {
            return Err(Error::Shape(format!(
                "mode counts {} and {} differ",
                self.modes, other.modes
            )));
        }
        Ok(())
    }

    /// `E sum_l X_l Y_l`; the variable with fewer slots is embedded first.
    pub fn dot(&self, other: &Self) -> Result<f64> {
        self.same_family(other)?;
        let (lo, hi) = if self.slots <= other.slots {
            (self, other)
        } else {
            (other, self)
        };
        let map = self.catalog.chain(lo.slots, hi.slots);
        let mut total = 0.0;
        for l in 0..self.modes {
            let (a, b) = (lo.mode(l), hi.mode(l));
            total += map
                .iter()
                .zip(a)
                .map(|(&j, x)| x * b[j as usize])
                .sum::<f64>();
        }
        Ok(total)
    }

    /// `E sum_l |X_l - Y_l|^2`.
    pub fn distance_sq(&self, other: &Self) -> Result<f64> {
        self.same_family(other)?;
        let (lo, hi) = if self.slots <= other.slots {
            (self, other)
        } else {
            (other, self)
        };
        let mut diff = hi.clone();
        diff.axpy(-1.0, lo)?;
        Ok(diff.norm_sq())
    }

    /// `self += alpha * other`, where `other` may live on fewer slots.
    pub fn axpy(&mut self, alpha: f64, other: &Self) -> Result<()> {
        self.same_family(other)?;
        if other.slots > self.slots {
            return Err(Error::Shape(format!(
                "cannot add {} slots into {}",
                other.slots, self.slots
            )));
        }
        let map = self.catalog.chain(other.slots, self.slots);
        let d = self.dim();
        for l in 0..self.modes {
            let src = other.mode(l);
            let dst = &mut self.coeffs[l * d..(l + 1) * d];
            for (&j, x) in map.iter().zip(src) {
                dst[j as usize] += alpha * x;
            }
        }
        Ok(())
    }

    pub fn scale(&mut self, alpha: f64) {
        self.coeffs.iter_mut().for_each(|c| *c *= alpha);
    }

    /// The same variable viewed in `H^M(slots)` for `slots >= self.slots()`.
    pub fn embed(&self, slots: usize) -> Result<Self> {
        let mut out = Self::zeros(&self.catalog, slots, self.modes)?;
        out.axpy(1.0, self)?;
        Ok(out)
    }

    /// `E(X | F_{t_k})`: drops every basis element touching slots beyond `k`.
    pub fn conditional_expect(&self, k: usize) -> Self {
        if k >= self.slots {
            return self.clone();
        }
        let map = self.catalog.chain(k, self.slots);
        let mut out = Self::zeros(&self.catalog, k, self.modes).expect("k < slots");
        let d = out.dim();
        for l in 0..self.modes {
            let src = self.mode(l);
            for (i, &j) in map.iter().enumerate() {
                out.coeffs[l * d + i] = src[j as usize];
            }
        }
        out
    }

    /// `X * Delta_k W` for the 1-based increment index `k`, using
    /// `xi psi_m = sqrt(m+1) psi_{m+1} + sqrt(m) psi_{m-1}`.
    pub fn increment_multiply(&self, k: usize, tau: f64) -> Result<Self> {
        if k == 0 || k > self.catalog.n_slots() {
            return Err(Error::InvalidArgument(format!(
                "increment index {k} out of range"
            )));
        }
        let slots = self.slots.max(k);
        let src = if slots > self.slots {
            self.embed(slots)?
        } else {
            self.clone()
        };
        let space = self.catalog.space(slots);
        let max_deg = self.catalog.max_degree();
        let mut out = Self::zeros(&self.catalog, slots, self.modes)?;
        let d = space.dim();
        let slot = k as u32;
        let st = tau.sqrt();
        let mut key: Vec<(u32, u32)> = Vec::new();
        for i in 0..d {
            let base = space.key(i);
            let m = base.iter().find(|p| p.0 == slot).map_or(0, |p| p.1);
            let coeffs: Vec<f64> = (0..self.modes).map(|l| src.coeffs[l * d + i]).collect();
            if coeffs.iter().all(|&c| c == 0.0) {
                continue;
            }
            // raise
            if space.degree(i) >= max_deg {
                return Err(Error::DegreeOverflow(format!(
                    "multiplying a degree-{} term by an increment exceeds degree {max_deg}",
                    space.degree(i)
                )));
            }
            with_slot_degree(base, slot, m + 1, &mut key);
            let up = space
                .ordinal_sparse(&key)
                .expect("raised index is in the space");
            let w = ((m + 1) as f64).sqrt() * st;
            for l in 0..self.modes {
                out.coeffs[l * d + up] += w * coeffs[l];
            }
            if m > 0 {
                with_slot_degree(base, slot, m - 1, &mut key);
                let down = space
                    .ordinal_sparse(&key)
                    .expect("lowered index is in the space");
                let w = (m as f64).sqrt() * st;
                for l in 0..self.modes {
                    out.coeffs[l * d + down] += w * coeffs[l];
                }
            }
        }
        Ok(out)
    }

    /// `E(Delta_k W * X | F_{t_{k-1}})` for the 1-based increment index `k`.
    ///
    /// Equal to `increment_multiply(k)` followed by `conditional_expect(k-1)`,
    /// but never raises the degree, so it applies to degree-`M` inputs.
    pub fn increment_expect(&self, k: usize, tau: f64) -> Result<Self> {
        if k == 0 || k > self.catalog.n_slots() {
            return Err(Error::InvalidArgument(format!(
                "increment index {k} out of range"
            )));
        }
        let mut out = Self::zeros(&self.catalog, k - 1, self.modes)?;
        if self.slots < k {
            return Ok(out);
        }
        let src = self.conditional_expect(k);
        let lift = self.catalog.lift_map(k - 1);
        let (d_lo, d_hi) = (out.dim(), src.dim());
        let st = tau.sqrt();
        for l in 0..self.modes {
            for (i, &j) in lift.iter().enumerate() {
                if j != NONE {
                    out.coeffs[l * d_lo + i] = st * src.coeffs[l * d_hi + j as usize];
                }
            }
        }
        Ok(out)
    }

    /// Largest degree carrying a nonzero coefficient (0 for the zero variable).
    pub fn max_degree(&self) -> usize {
        let space = self.catalog.space(self.slots);
        let d = space.dim();
        (0..d)
            .filter(|&i| (0..self.modes).any(|l| self.coeffs[l * d + i] != 0.0))
            .map(|i| space.degree(i))
            .max()
            .unwrap_or(0)
    }

    /// 1-based increment slots that some nonzero coefficient depends on.
    pub fn active_slots(&self) -> Vec<usize> {
        let space = self.catalog.space(self.slots);
        let d = space.dim();
        let mut active = vec![false; self.slots + 1];
        for i in 0..d {
            if (0..self.modes).any(|l| self.coeffs[l * d + i] != 0.0) {
                for &(s, _) in space.key(i) {
                    active[s as usize] = true;
                }
            }
        }
        (1..=self.slots).filter(|&s| active[s]).collect()
    }

    pub fn is_deterministic(&self) -> bool {
        self.max_degree() == 0
    }

    /// Pathwise value given the standardized increments
    /// `xi_j = Delta_j W / sqrt(tau)`, `j = 1..=N`.
    pub fn evaluate_sample(&self, draws: &[f64]) -> Result<Vec<f64>> {
        if draws.len() != self.catalog.n_slots() {
            return Err(Error::Shape(format!(
                "expected {} draws, got {}",
                self.catalog.n_slots(),
                draws.len()
            )));
        }
        let table = PsiTable::new(draws, self.catalog.max_degree());
        let mut out = vec![0.0; self.modes];
        self.evaluate_with(&table, &mut out);
        Ok(out)
    }

    pub(crate) fn evaluate_with(&self, table: &PsiTable, out: &mut [f64]) {
        let space = self.catalog.space(self.slots);
        let d = space.dim();
        out.iter_mut().for_each(|o| *o = 0.0);
        for i in 0..d {
            let basis = table.basis(space.key(i));
            for l in 0..self.modes {
                out[l] += self.coeffs[l * d + i] * basis;
            }
        }
    }
}

impl ChaosRandomVariable {
    /// Like [`Self::evaluate_with`], reading basis values of a larger space
    /// through `map` (ordinals of this space inside that one).
    pub(crate) fn evaluate_lifted(&self, basis: &[f64], map: &[u32], out: &mut [f64]) {
        let d = self.dim();
        for (l, o) in out.iter_mut().enumerate().take(self.modes) {
            let c = &self.coeffs[l * d..(l + 1) * d];
            *o = c.iter().zip(map).map(|(c, &j)| c * basis[j as usize]).sum();
        }
    }
}

fn with_slot_degree(base: &[(u32, u32)], slot: u32, degree: u32, key: &mut Vec<(u32, u32)>) {
    key.clear();
    let mut placed = degree == 0;
    for &(s, e) in base {
        if s == slot {
            continue;
        }
        if !placed && s > slot {
            key.push((slot, degree));
            placed = true;
        }
        key.push((s, e));
    }
    if !placed {
        key.push((slot, degree));
    }
}

/// `psi_m(xi_j)` for all slots and degrees, for fast basis evaluation.
pub(crate) struct PsiTable {
    stride: usize,
    values: Vec<f64>,
}

impl PsiTable {
    pub(crate) fn new(draws: &[f64], max_degree: usize) -> Self {
        let stride = max_degree + 1;
        let mut values = vec![0.0; draws.len() * stride];
        for (j, &x) in draws.iter().enumerate() {
            psi_table(x, &mut values[j * stride..(j + 1) * stride]);
        }
        PsiTable { stride, values }
    }

    pub(crate) fn basis(&self, key: &[(u32, u32)]) -> f64 {
        key.iter()
            .map(|&(s, e)| self.values[(s as usize - 1) * self.stride + e as usize])
            .product()
    }
}

/// An adapted process sampled at `t_0, ..., t_{N-1}`: the value at `t_k`
/// lives in `H^degree(k)`.
#[derive(Clone, Debug)]
pub struct ChaosVector {
    catalog: Arc<Catalog>,
    modes: usize,
    degree: usize,
    values: Vec<ChaosRandomVariable>,
}

impl ChaosVector {
    pub fn zeros(catalog: &Arc<Catalog>, modes: usize, degree: usize) -> Result<Self> {
        if degree > catalog.max_degree() {
            return Err(Error::DegreeOverflow(format!(
                "degree bound {degree} exceeds catalog degree {}",
                catalog.max_degree()
            )));
        }
        let values = (0..catalog.n_slots())
            .map(|k| ChaosRandomVariable::zeros(catalog, k, modes))
            .collect::<Result<Vec<_>>>()?;
        Ok(ChaosVector {
            catalog: catalog.clone(),
            modes,
            degree,
            values,
        })
    }

    pub fn catalog(&self) -> &Arc<Catalog> {
        &self.catalog
    }

    pub fn modes(&self) -> usize {
        self.modes
    }

    pub fn degree(&self) -> usize {
        self.degree
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    pub fn get(&self, k: usize) -> &ChaosRandomVariable {
        &self.values[k]
    }

    pub fn iter(&self) -> impl Iterator<Item = &ChaosRandomVariable> {
        self.values.iter()
    }

    /// Stores the value at `t_k`; it must live on at most `k` slots and
    /// respect the degree bound.
    pub fn set(&mut self, k: usize, value: ChaosRandomVariable) -> Result<()> {
        if k >= self.values.len() {
            return Err(Error::Shape(format!("time index {k} out of range")));
        }
        if value.modes() != self.modes {
            return Err(Error::Shape("mode count mismatch".into()));
        }
        if value.slots() > k {
            return Err(Error::Shape(format!(
                "value at t_{k} depends on {} increments",
                value.slots()
            )));
        }
        if value.max_degree() > self.degree {
            return Err(Error::DegreeOverflow(format!(
                "value at t_{k} has degree {} > {}",
                value.max_degree(),
                self.degree
            )));
        }
        self.values[k] = if value.slots() < k {
            value.embed(k)?
        } else {
            value
        };
        Ok(())
    }

    pub(crate) fn get_mut(&mut self, k: usize) -> &mut ChaosRandomVariable {
        &mut self.values[k]
    }

    /// `tau sum_k E|v_k|^2`.
    pub fn norm_sq(&self, tau: f64) -> f64 {
        tau * self.values.iter().map(|v| v.norm_sq()).sum::<f64>()
    }

    pub fn dot(&self, other: &Self, tau: f64) -> Result<f64> {
        if self.len() != other.len() {
            return Err(Error::Shape("process lengths differ".into()));
        }
        let mut s = 0.0;
        for (a, b) in self.values.iter().zip(&other.values) {
            s += a.dot(b)?;
        }
        Ok(tau * s)
    }

    pub fn axpy(&mut self, alpha: f64, other: &Self) -> Result<()> {
        if self.len() != other.len() {
            return Err(Error::Shape("process lengths differ".into()));
        }
        for (a, b) in self.values.iter_mut().zip(&other.values) {
            a.axpy(alpha, b)?;
        }
        self.degree = self.degree.max(other.degree);
        Ok(())
    }

    pub fn scale(&mut self, alpha: f64) {
        self.values.iter_mut().for_each(|v| v.scale(alpha));
    }
}
