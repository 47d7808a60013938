//! Multi-indices and per-slot chaos spaces.

use std::collections::HashMap;
use std::fmt;
use std::sync::Arc;

use crate::{Error, Result};

/// Dense multi-index `(alpha_1, ..., alpha_k)`; entry `j` is the Hermite
/// degree attached to the increment over `[t_{j-1}, t_j]` (1-based `j`).
#[derive(Clone, Debug, PartialEq, Eq, Hash)]
pub struct MultiIndex {
    entries: Vec<u32>,
}

impl MultiIndex {
    pub fn new(entries: Vec<u32>) -> Self {
        MultiIndex { entries }
    }

    pub fn zero(len: usize) -> Self {
        MultiIndex {
            entries: vec![0; len],
        }
    }

    pub fn entries(&self) -> &[u32] {
        &self.entries
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn degree(&self) -> usize {
        self.entries.iter().map(|&e| e as usize).sum()
    }

    /// Dash-joined entries; the empty tuple gives an empty string.
    pub fn to_field(&self) -> String {
        self.entries
            .iter()
            .map(|e| e.to_string())
            .collect::<Vec<_>>()
            .join("-")
    }

    pub fn parse_field(field: &str) -> std::result::Result<Self, String> {
        let field = field.trim();
        if field.is_empty() {
            return Ok(MultiIndex::new(Vec::new()));
        }
        field
            .split('-')
            .map(|p| {
                p.trim()
                    .parse::<u32>()
                    .map_err(|e| format!("bad multi-index entry {p:?}: {e}"))
            })
            .collect::<std::result::Result<Vec<_>, _>>()
            .map(MultiIndex::new)
    }

    pub(crate) fn to_sparse(&self) -> Vec<(u32, u32)> {
        self.entries
            .iter()
            .enumerate()
            .filter(|(_, &e)| e > 0)
            .map(|(j, &e)| (j as u32 + 1, e))
            .collect()
    }

    pub(crate) fn from_sparse(len: usize, sparse: &[(u32, u32)]) -> Self {
        let mut entries = vec![0; len];
        for &(s, d) in sparse {
            entries[s as usize - 1] = d;
        }
        MultiIndex { entries }
    }
}

impl fmt::Display for MultiIndex {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(
            f,
            "({})",
            self.entries
                .iter()
                .map(|e| e.to_string())
                .collect::<Vec<_>>()
                .join(",")
        )
    }
}

/// `C(k + m, m)`, the dimension of `H^m(k)`, or `None` on overflow.
pub fn basis_size(k: usize, m: usize) -> Option<u64> {
    let mut acc: u128 = 1;
    for j in 1..=m as u128 {
        acc = acc * (k as u128 + j) / j;
        if acc > u64::MAX as u128 {
            return None;
        }
    }
    Some(acc as u64)
}

/// All multi-indices of length `k` and total degree at most `m`, in
/// graded-lex order: degree ascending, then lexicographically descending.
pub fn enumerate_indices(k: usize, m: usize) -> Vec<MultiIndex> {
    enumerate_sparse(k, m)
        .iter()
        .map(|s| MultiIndex::from_sparse(k, s))
        .collect()
}

pub(crate) fn enumerate_sparse(k: usize, m: usize) -> Vec<Box<[(u32, u32)]>> {
    fn rec(
        slot: u32,
        k: u32,
        left: u32,
        prefix: &mut Vec<(u32, u32)>,
        out: &mut Vec<Box<[(u32, u32)]>>,
    ) {
        if left == 0 {
            out.push(prefix.clone().into_boxed_slice());
            return;
        }
        if slot > k {
            return;
        }
        for e in (0..=left).rev() {
            if slot == k && e != left {
                continue;
            }
            if e > 0 {
                prefix.push((slot, e));
                rec(slot + 1, k, left - e, prefix, out);
                prefix.pop();
            } else {
                rec(slot + 1, k, left, prefix, out);
            }
        }
    }
    let mut out = Vec::new();
    let mut prefix = Vec::new();
    for d in 0..=m as u32 {
        rec(1, k as u32, d, &mut prefix, &mut out);
    }
    out
}

/// `H^M(k)`: chaos polynomials of degree at most `M` in the first `k`
/// increments. Basis elements are stored sparsely as `(slot, degree)` pairs.
#[derive(Debug)]
pub struct ChaosSpace {
    slots: usize,
    max_degree: usize,
    keys: Vec<Box<[(u32, u32)]>>,
    degrees: Vec<u32>,
    lookup: HashMap<Box<[(u32, u32)]>, u32>,
}

impl ChaosSpace {
    fn build(slots: usize, max_degree: usize) -> Self {
        let keys = enumerate_sparse(slots, max_degree);
        let degrees = keys.iter().map(|k| k.iter().map(|p| p.1).sum()).collect();
        let lookup = keys
            .iter()
            .enumerate()
            .map(|(i, k)| (k.clone(), i as u32))
            .collect();
        ChaosSpace {
            slots,
            max_degree,
            keys,
            degrees,
            lookup,
        }
    }

    pub fn slots(&self) -> usize {
        self.slots
    }

    pub fn max_degree(&self) -> usize {
        self.max_degree
    }

    pub fn dim(&self) -> usize {
        self.keys.len()
    }

    pub fn multi_index(&self, ordinal: usize) -> MultiIndex {
        MultiIndex::from_sparse(self.slots, &self.keys[ordinal])
    }

    pub fn ordinal(&self, alpha: &MultiIndex) -> Option<usize> {
        if alpha.len() != self.slots {
            return None;
        }
        self.ordinal_sparse(&alpha.to_sparse())
    }

    pub(crate) fn ordinal_sparse(&self, key: &[(u32, u32)]) -> Option<usize> {
        self.lookup.get(key).map(|&i| i as usize)
    }

    pub(crate) fn key(&self, ordinal: usize) -> &[(u32, u32)] {
        &self.keys[ordinal]
    }

    pub fn degree(&self, ordinal: usize) -> usize {
        self.degrees[ordinal] as usize
    }
}

/// Limits guarding catalog construction.
#[derive(Clone, Copy, Debug)]
pub struct CatalogLimits {
    pub max_degree: usize,
    pub max_slots: usize,
    /// Largest admissible `dim H^M(N)`.
    pub max_dim: u64,
}

impl Default for CatalogLimits {
    fn default() -> Self {
        CatalogLimits {
            max_degree: 8,
            max_slots: 64,
            max_dim: 2_000_000,
        }
    }
}

/// The spaces `H^M(0), ..., H^M(N)` together with the index maps used for
/// embedding, conditional expectation and increment extraction.
#[derive(Debug)]
pub struct Catalog {
    n_slots: usize,
    max_degree: usize,
    spaces: Vec<ChaosSpace>,
    // embed[k][i]: ordinal in space k+1 of element i of space k.
    embed: Vec<Vec<u32>>,
    // lift[k][i]: ordinal in space k+1 of (element i of space k) + e_{k+1},
    // or NONE when that would exceed the degree cap.
    lift: Vec<Vec<u32>>,
}

pub(crate) const NONE: u32 = u32::MAX;

impl Catalog {
    pub fn new(n_slots: usize, max_degree: usize) -> Result<Arc<Catalog>> {
        Self::with_limits(n_slots, max_degree, CatalogLimits::default())
    }

    pub fn with_limits(
        n_slots: usize,
        max_degree: usize,
        limits: CatalogLimits,
    ) -> Result<Arc<Catalog>> {
        if max_degree > limits.max_degree {
            return Err(Error::CatalogCap(format!(
                "degree {max_degree} > {}",
                limits.max_degree
            )));
        }
        if n_slots > limits.max_slots {
            return Err(Error::CatalogCap(format!(
                "{n_slots} slots > {}",
                limits.max_slots
            )));
        }
        match basis_size(n_slots, max_degree) {
            Some(d) if d <= limits.max_dim => {}
            _ => {
                return Err(Error::CatalogCap(format!(
                    "dim H^{max_degree}({n_slots}) exceeds {}",
                    limits.max_dim
                )))
            }
        }
        let spaces: Vec<ChaosSpace> = (0..=n_slots)
            .map(|k| ChaosSpace::build(k, max_degree))
            .collect();
        let mut embed = Vec::with_capacity(n_slots);
        let mut lift = Vec::with_capacity(n_slots);
        for k in 0..n_slots {
            let (lo, hi) = (&spaces[k], &spaces[k + 1]);
            embed.push(
                (0..lo.dim())
                    .map(|i| hi.ordinal_sparse(lo.key(i)).unwrap() as u32)
                    .collect(),
            );
            let slot = k as u32 + 1;
            lift.push(
                (0..lo.dim())
                    .map(|i| {
                        if lo.degree(i) >= max_degree {
                            return NONE;
                        }
                        let mut key = lo.key(i).to_vec();
                        key.push((slot, 1));
                        hi.ordinal_sparse(&key).map_or(NONE, |o| o as u32)
                    })
                    .collect(),
            );
        }
        Ok(Arc::new(Catalog {
            n_slots,
            max_degree,
            spaces,
            embed,
            lift,
        }))
    }

    pub fn n_slots(&self) -> usize {
        self.n_slots
    }

    pub fn max_degree(&self) -> usize {
        self.max_degree
    }

    pub fn space(&self, k: usize) -> &ChaosSpace {
        &self.spaces[k]
    }

    pub fn dim(&self, k: usize) -> usize {
        self.spaces[k].dim()
    }

    pub fn dims(&self) -> Vec<usize> {
        self.spaces.iter().map(|s| s.dim()).collect()
    }

    pub(crate) fn lift_map(&self, k: usize) -> &[u32] {
        &self.lift[k]
    }

    /// Ordinals in space `to` of every element of space `from <= to`.
    pub(crate) fn chain(&self, from: usize, to: usize) -> Vec<u32> {
        debug_assert!(from <= to);
        let mut map: Vec<u32> = (0..self.dim(from) as u32).collect();
        for k in from..to {
            let e = &self.embed[k];
            for m in map.iter_mut() {
                *m = e[*m as usize];
            }
        }
        map
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn graded_lex_order_k2() {
        let got: Vec<Vec<u32>> = enumerate_indices(2, 2)
            .iter()
            .map(|a| a.entries().to_vec())
            .collect();
        assert_eq!(
            got,
            vec![
                vec![0, 0],
                vec![1, 0],
                vec![0, 1],
                vec![2, 0],
                vec![1, 1],
                vec![0, 2]
            ]
        );
    }

    #[test]
    fn empty_length() {
        let got = enumerate_indices(0, 3);
        assert_eq!(got.len(), 1);
        assert!(got[0].is_empty());
    }

    #[test]
    fn field_round_trip() {
        let a = MultiIndex::new(vec![2, 0, 1]);
        assert_eq!(a.to_field(), "2-0-1");
        assert_eq!(MultiIndex::parse_field("2-0-1").unwrap(), a);
        assert_eq!(
            MultiIndex::parse_field("").unwrap(),
            MultiIndex::new(vec![])
        );
    }

    #[test]
    fn catalog_dims() {
        let c = Catalog::new(3, 2).unwrap();
        assert_eq!(c.dims(), vec![1, 3, 6, 10]);
    }

    #[test]
    fn caps_are_enforced() {
        assert!(matches!(Catalog::new(65, 1), Err(Error::CatalogCap(_))));
        assert!(matches!(Catalog::new(4, 9), Err(Error::CatalogCap(_))));
        assert!(matches!(Catalog::new(64, 8), Err(Error::CatalogCap(_))));
    }

    #[test]
    fn embedding_preserves_indices() {
        let c = Catalog::new(4, 2).unwrap();
        let map = c.chain(1, 4);
        for (i, &j) in map.iter().enumerate() {
            let a = c.space(1).multi_index(i);
            let b = c.space(4).multi_index(j as usize);
            assert_eq!(&b.entries()[..1], a.entries());
            assert!(b.entries()[1..].iter().all(|&e| e == 0));
        }
    }
}
