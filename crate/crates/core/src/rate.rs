//! Convergence-rate fits on log-log axes.

use serde::Serialize;
use statrs::distribution::{ContinuousCDF, StudentsT};

use crate::{Error, Result};

/// Errors at or below this level are treated as round-off.
pub const ROUNDOFF_FLOOR: f64 = 1e-24;

#[derive(Clone, Copy, Debug, Serialize)]
pub struct RatePoint {
    pub x: f64,
    pub error_sq: f64,
}

#[derive(Clone, Debug, Serialize)]
pub struct RateReport {
    /// What `x` is: `tau` or `n`.
    pub variable: String,
    pub points: Vec<RatePoint>,
    pub slope: Option<f64>,
    /// Half-width of the 95% confidence interval of the slope.
    pub half_width: Option<f64>,
    pub note: Option<String>,
}

/// Least-squares slope and intercept of `log y` against `log x`, with the
/// 95% half-width of the slope (infinite with only two points).
pub fn fit_loglog(x: &[f64], y: &[f64]) -> Result<(f64, f64, f64)> {
    let m = x.len();
    if m < 2 || y.len() != m {
        return Err(Error::InvalidArgument(
            "a rate fit needs at least two points".into(),
        ));
    }
    if x.iter().chain(y).any(|v| !(*v > 0.0 && v.is_finite())) {
        return Err(Error::InvalidArgument(
            "rate fits need positive finite data".into(),
        ));
    }
    let lx: Vec<f64> = x.iter().map(|v| v.ln()).collect();
    let ly: Vec<f64> = y.iter().map(|v| v.ln()).collect();
    let mx = lx.iter().sum::<f64>() / m as f64;
    let my = ly.iter().sum::<f64>() / m as f64;
    let sxx: f64 = lx.iter().map(|a| (a - mx).powi(2)).sum();
    let sxy: f64 = lx.iter().zip(&ly).map(|(a, b)| (a - mx) * (b - my)).sum();
    let slope = sxy / sxx;
    let intercept = my - slope * mx;
    if m == 2 {
        return Ok((slope, intercept, f64::INFINITY));
    }
    let sse: f64 = lx
        .iter()
        .zip(&ly)
        .map(|(a, b)| (b - intercept - slope * a).powi(2))
        .sum();
    let se = (sse / (m - 2) as f64 / sxx).sqrt();
    let t = StudentsT::new(0.0, 1.0, (m - 2) as f64)
        .expect("positive dof")
        .inverse_cdf(0.975);
    Ok((slope, intercept, t * se))
}

impl RateReport {
    pub fn fit(variable: &str, points: Vec<RatePoint>) -> Result<Self> {
        if points.iter().all(|p| p.error_sq <= ROUNDOFF_FLOOR) {
            return Ok(RateReport {
                variable: variable.into(),
                points,
                slope: None,
                half_width: None,
                note: Some("all errors at round-off level; no rate fitted".into()),
            });
        }
        let x: Vec<f64> = points.iter().map(|p| p.x).collect();
        let y: Vec<f64> = points.iter().map(|p| p.error_sq).collect();
        let (slope, _, hw) = fit_loglog(&x, &y)?;
        Ok(RateReport {
            variable: variable.into(),
            points,
            slope: Some(slope),
            half_width: hw.is_finite().then_some(hw),
            note: None,
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn exact_power_law() {
        let x = [1.0, 2.0, 4.0, 8.0];
        let y: Vec<f64> = x.iter().map(|v: &f64| 3.0 * v.powf(-2.0)).collect();
        let (s, c, hw) = fit_loglog(&x, &y).unwrap();
        assert!((s + 2.0).abs() < 1e-12 && (c - 3f64.ln()).abs() < 1e-12 && hw < 1e-10);
    }

    #[test]
    fn roundoff_is_skipped() {
        let pts = vec![
            RatePoint {
                x: 1.0,
                error_sq: 0.0,
            },
            RatePoint {
                x: 2.0,
                error_sq: 1e-30,
            },
        ];
        let r = RateReport::fit("tau", pts).unwrap();
        assert!(r.slope.is_none() && r.note.is_some());
    }
}
