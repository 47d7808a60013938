//! Dirichlet sine basis of `L^2(0, π)`.
//!
//! `phi_i(x) = sqrt(2/π) sin(i x)` with `-phi_i'' = i^2 phi_i`.

use std::f64::consts::PI;
use std::io::{BufRead, Write};

use crate::{Error, Result};

pub fn eigenvalue(i: usize) -> f64 {
    (i * i) as f64
}

pub fn eigenfunction(i: usize, x: f64) -> f64 {
    (2.0 / PI).sqrt() * (i as f64 * x).sin()
}

/// `(lambda_i, phi_i(x))` for a 1-based mode `i`.
pub fn eigen_pair(i: usize, x: f64) -> Result<(f64, f64)> {
    if i == 0 {
        return Err(Error::InvalidArgument("modes are 1-based".into()));
    }
    Ok((eigenvalue(i), eigenfunction(i, x)))
}

/// The first `n` modes.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct SpectralBasis {
    modes: usize,
}

impl SpectralBasis {
    pub fn new(modes: usize) -> Result<Self> {
        if modes == 0 {
            return Err(Error::InvalidArgument(
                "need at least one spatial mode".into(),
            ));
        }
        Ok(SpectralBasis { modes })
    }

    pub fn modes(&self) -> usize {
        self.modes
    }

    pub fn eigenvalues(&self) -> Vec<f64> {
        (1..=self.modes).map(eigenvalue).collect()
    }

    /// Diagonal of `Lambda_0 = (I + tau A)^{-1}`.
    pub fn resolvent(&self, tau: f64) -> Vec<f64> {
        self.eigenvalues()
            .iter()
            .map(|l| 1.0 / (1.0 + l * tau))
            .collect()
    }
}

/// Expansion coefficients `(c_1, ..., c_n)` against the sine basis.
#[derive(Clone, Debug, PartialEq)]
pub struct SpectralCoeffs {
    pub values: Vec<f64>,
}

impl SpectralCoeffs {
    pub fn new(values: Vec<f64>) -> Self {
        SpectralCoeffs { values }
    }

    pub fn modes(&self) -> usize {
        self.values.len()
    }

    pub fn l2_norm_sq(&self) -> f64 {
        self.values.iter().map(|c| c * c).sum()
    }

    /// `|u'|^2_{L^2} = sum_i i^2 c_i^2`.
    pub fn h1_seminorm_sq(&self) -> f64 {
        self.values
            .iter()
            .enumerate()
            .map(|(i, c)| eigenvalue(i + 1) * c * c)
            .sum()
    }

    /// Point values on a uniform grid.
    pub fn reconstruct(&self, grid: &UniformGrid) -> Vec<f64> {
        (0..grid.len())
            .map(|j| {
                let x = grid.x(j);
                self.values
                    .iter()
                    .enumerate()
                    .map(|(i, c)| c * eigenfunction(i + 1, x))
                    .sum()
            })
            .collect()
    }
}

/// `points` equispaced nodes on `[0, π]`, endpoints included.
#[derive(Clone, Copy, Debug)]
pub struct UniformGrid {
    points: usize,
}

impl UniformGrid {
    pub fn new(points: usize) -> Result<Self> {
        if points < 2 {
            return Err(Error::InvalidArgument(
                "a grid needs at least two points".into(),
            ));
        }
        Ok(UniformGrid { points })
    }

    pub fn len(&self) -> usize {
        self.points
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    pub fn x(&self, j: usize) -> f64 {
        PI * j as f64 / (self.points - 1) as f64
    }
}

/// Projects uniformly sampled values onto the first `n` modes by composite
/// Simpson quadrature. Needs an odd number of at least `4n + 1` samples.
pub fn project_function(samples: &[f64], n: usize) -> Result<SpectralCoeffs> {
    let p = samples.len();
    if n == 0 {
        return Err(Error::InvalidArgument("need at least one mode".into()));
    }
    if p < 4 * n + 1 || p % 2 == 0 {
        return Err(Error::InvalidArgument(format!(
            "projection onto {n} modes needs an odd number of at least {} samples, got {p}",
            4 * n + 1
        )));
    }
    let grid = UniformGrid::new(p)?;
    let h = PI / (p - 1) as f64;
    let values = (1..=n)
        .map(|i| {
            let s: f64 = samples
                .iter()
                .enumerate()
                .map(|(j, f)| {
                    let w = if j == 0 || j == p - 1 {
                        1.0
                    } else if j % 2 == 1 {
                        4.0
                    } else {
                        2.0
                    };
                    w * f * eigenfunction(i, grid.x(j))
                })
                .sum();
            s * h / 3.0
        })
        .collect();
    Ok(SpectralCoeffs { values })
}

/// Writes `x,value` rows.
pub fn write_samples(w: &mut impl Write, grid: &UniformGrid, values: &[f64]) -> Result<()> {
    writeln!(w, "x,value")?;
    for (j, v) in values.iter().enumerate() {
        writeln!(w, "{:.16e},{:.16e}", grid.x(j), v)?;
    }
    Ok(())
}

/// Reads `x,value` rows on a uniform grid of `[0, π]`.
pub fn read_samples(r: impl BufRead, origin: &str) -> Result<Vec<f64>> {
    let pairs = read_pairs(r, origin, "x,value")?;
    let p = pairs.len();
    if p < 2 {
        return Err(Error::parse(origin, "need at least two samples"));
    }
    let grid = UniformGrid::new(p)?;
    for (j, (x, _)) in pairs.iter().enumerate() {
        if (x - grid.x(j)).abs() > 1e-9 {
            return Err(Error::parse(
                origin,
                format!("sample {j} at x={x} is not on the uniform grid of [0, pi]"),
            ));
        }
    }
    Ok(pairs.into_iter().map(|p| p.1).collect())
}

/// Writes `mode,coeff` rows with 1-based modes.
pub fn write_coeffs(w: &mut impl Write, c: &SpectralCoeffs) -> Result<()> {
    writeln!(w, "mode,coeff")?;
    for (i, v) in c.values.iter().enumerate() {
        writeln!(w, "{},{:.16e}", i + 1, v)?;
    }
    Ok(())
}

pub fn read_coeffs(r: impl BufRead, origin: &str) -> Result<SpectralCoeffs> {
    let pairs = read_pairs(r, origin, "mode,coeff")?;
    let mut values = vec![0.0; pairs.iter().map(|p| p.0 as usize).max().unwrap_or(0)];
    for (m, c) in pairs {
        if m < 1.0 || m.fract() != 0.0 {
            return Err(Error::parse(origin, format!("bad mode {m}")));
        }
        values[m as usize - 1] = c;
    }
    Ok(SpectralCoeffs { values })
}

fn read_pairs(r: impl BufRead, origin: &str, header: &str) -> Result<Vec<(f64, f64)>> {
    let mut out = Vec::new();
    let mut seen_header = false;
    for (n, line) in r.lines().enumerate() {
        let line = line?;
        let line = line.trim();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        let loc = format!("{origin}:{}", n + 1);
        if !seen_header {
            if line != header {
                return Err(Error::parse(loc, format!("expected header {header:?}")));
            }
            seen_header = true;
            continue;
        }
        let (a, b) = line
            .split_once(',')
            .ok_or_else(|| Error::parse(&loc, "expected two fields"))?;
        let a: f64 = a
            .trim()
            .parse()
            .map_err(|e| Error::parse(&loc, format!("{e}")))?;
        let b: f64 = b
            .trim()
            .parse()
            .map_err(|e| Error::parse(&loc, format!("{e}")))?;
        out.push((a, b));
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn single_mode_is_recovered() {
        let grid = UniformGrid::new(41).unwrap();
        let samples: Vec<f64> = (0..41).map(|j| (2.0 * grid.x(j)).sin()).collect();
        let c = project_function(&samples, 3).unwrap();
        let want = (PI / 2.0).sqrt();
        assert!(c.values[0].abs() < 1e-12);
        assert!((c.values[1] - want).abs() < 1e-5);
        assert!(c.values[2].abs() < 1e-12);
    }

    #[test]
    fn too_few_samples() {
        assert!(project_function(&[0.0; 11], 3).is_err());
        assert!(project_function(&[0.0; 13], 3).is_ok());
    }

    #[test]
    fn coeffs_round_trip() {
        let c = SpectralCoeffs::new(vec![1.0 / 3.0, -2e-7]);
        let mut buf = Vec::new();
        write_coeffs(&mut buf, &c).unwrap();
        assert_eq!(read_coeffs(&buf[..], "mem").unwrap(), c);
    }
}
