//! Least-squares power-law fits `y ~ C x^q` on log-log scale.

use serde::Serialize;

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct PowerFit {
    pub exponent: f64,
    pub log_prefactor: f64,
    /// Root-mean-square residual of the fit in natural-log units.
    pub rms_residual: f64,
    pub points: usize,
}

impl PowerFit {
    pub fn predict(&self, x: f64) -> f64 {
        (self.log_prefactor + self.exponent * x.ln()).exp()
    }
}

/// Fits `ln y = ln C + q ln x` over the pairs with both coordinates positive
/// and finite.
pub fn fit_power_law(x: &[f64], y: &[f64]) -> Result<PowerFit> {
    let pts: Vec<(f64, f64)> = x
        .iter()
        .zip(y)
        .filter(|(a, b)| **a > 0.0 && **b > 0.0 && a.is_finite() && b.is_finite())
        .map(|(a, b)| (a.ln(), b.ln()))
        .collect();
    let n = pts.len();
    if n < 2 {
        return Err(Error::Fit { needed: 2, got: n });
    }
    let nf = n as f64;
    let mx = pts.iter().map(|p| p.0).sum::<f64>() / nf;
    let my = pts.iter().map(|p| p.1).sum::<f64>() / nf;
    let sxx: f64 = pts.iter().map(|p| (p.0 - mx).powi(2)).sum();
    let sxy: f64 = pts.iter().map(|p| (p.0 - mx) * (p.1 - my)).sum();
    if sxx == 0.0 {
        return Err(Error::Singular("fit abscissae are all equal"));
    }
    let exponent = sxy / sxx;
    let log_prefactor = my - exponent * mx;
    let ss: f64 = pts
        .iter()
        .map(|p| (p.1 - log_prefactor - exponent * p.0).powi(2))
        .sum();
    Ok(PowerFit {
        exponent,
        log_prefactor,
        rms_residual: (ss / nf).sqrt(),
        points: n,
    })
}
