//! Measured `(n, value)` curves and weighted log-log slope fits.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Default lower end of a fit window; shorter lags are transient.
pub const DEFAULT_MIN_N: f64 = 20.0;
/// Points whose relative standard error exceeds this are not fitted.
pub const MAX_REL_ERR: f64 = 0.3;
const REL_ERR_FLOOR: f64 = 1e-3;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CurvePoint {
    pub n: u64,
    pub value: f64,
    /// Monte Carlo standard error, 0 for operator-exact values.
    pub stderr: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DecayCurve {
    pub points: Vec<CurvePoint>,
    /// The `s` of the `L^s` norm, when the curve is a norm.
    pub norm: Option<f64>,
    pub method: String,
    pub description: String,
}

impl DecayCurve {
    pub fn new(method: impl Into<String>, description: impl Into<String>) -> Self {
        Self {
            points: Vec::new(),
            norm: None,
            method: method.into(),
            description: description.into(),
        }
    }

    pub fn with_norm(mut self, s: f64) -> Self {
        self.norm = Some(s);
        self
    }

    /// Appends a point; `n` must be strictly increasing.
    pub fn push(&mut self, n: u64, value: f64, stderr: f64) {
        debug_assert!(self.points.last().is_none_or(|p| p.n < n));
        self.points.push(CurvePoint { n, value, stderr });
    }

    pub fn values(&self) -> Vec<f64> {
        self.points.iter().map(|p| p.value).collect()
    }

    pub fn value_at(&self, n: u64) -> Option<f64> {
        self.points.iter().find(|p| p.n == n).map(|p| p.value)
    }

    pub fn fit(&self, n_lo: f64, n_hi: f64) -> Result<ExponentFit> {
        let pts: Vec<(f64, f64, f64)> = self.points.iter().map(|p| (p.n as f64, p.value, p.stderr)).collect();
        fit_loglog(&pts, n_lo, n_hi)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ExponentFit {
    pub slope: f64,
    pub intercept: f64,
    pub r2: f64,
    pub window: (f64, f64),
    pub n_points: usize,
}

/// Weighted least squares of `log value` on `log n` over `[n_lo, n_hi]`.
///
/// Weights are `1 / rel_err^2` with the relative error floored at 1e-3, so
/// operator-exact curves (all errors zero) get ordinary least squares.
pub fn fit_loglog(points: &[(f64, f64, f64)], n_lo: f64, n_hi: f64) -> Result<ExponentFit> {
    if !(n_lo <= n_hi) {
        return Err(Error::range(format!("empty fit window [{n_lo}, {n_hi}]")));
    }
    let data: Vec<(f64, f64, f64)> = points
        .iter()
        .filter(|(n, v, e)| *n >= n_lo && *n <= n_hi && *v > 0.0 && v.is_finite() && e / v <= MAX_REL_ERR)
        .map(|&(n, v, e)| {
            let rel = (e / v).max(REL_ERR_FLOOR);
            (n.ln(), v.ln(), 1.0 / (rel * rel))
        })
        .collect();
    if data.len() < 2 {
        return Err(Error::range(format!(
            "fit window [{n_lo}, {n_hi}] has {} usable points",
            data.len()
        )));
    }
    let sw: f64 = data.iter().map(|d| d.2).sum();
    let mx = data.iter().map(|d| d.2 * d.0).sum::<f64>() / sw;
    let my = data.iter().map(|d| d.2 * d.1).sum::<f64>() / sw;
    let sxx: f64 = data.iter().map(|d| d.2 * (d.0 - mx).powi(2)).sum();
    let sxy: f64 = data.iter().map(|d| d.2 * (d.0 - mx) * (d.1 - my)).sum();
    if sxx == 0.0 {
        return Err(Error::range("fit window spans a single n"));
    }
    let slope = sxy / sxx;
    let intercept = my - slope * mx;
    let ss_tot: f64 = data.iter().map(|d| d.2 * (d.1 - my).powi(2)).sum();
    let ss_res: f64 = data.iter().map(|d| d.2 * (d.1 - intercept - slope * d.0).powi(2)).sum();
    let r2 = if ss_tot > 0.0 {
        (1.0 - ss_res / ss_tot).clamp(0.0, 1.0)
    } else {
        1.0
    };
    Ok(ExponentFit {
        slope,
        intercept,
        r2,
        window: (n_lo, n_hi),
        n_points: data.len(),
    })
}

/// Roughly log-spaced integers in `[lo, hi]`, `per_decade` per factor of ten.
pub fn log_spaced(lo: u64, hi: u64, per_decade: usize) -> Vec<u64> {
    assert!(lo >= 1 && lo <= hi);
    let steps = ((hi as f64 / lo as f64).log10() * per_decade as f64).ceil().max(1.0) as usize;
    let mut out: Vec<u64> = (0..=steps)
        .map(|k| (lo as f64 * (hi as f64 / lo as f64).powf(k as f64 / steps as f64)).round() as u64)
        .collect();
    out.dedup();
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn recovers_exact_power_law() {
        let pts: Vec<_> = (1..100).map(|n| (n as f64, 3.0 * (n as f64).powf(-1.7), 0.0)).collect();
        let f = fit_loglog(&pts, 5.0, 80.0).unwrap();
        assert!((f.slope + 1.7).abs() < 1e-12);
        assert!((f.intercept - 3f64.ln()).abs() < 1e-12);
        assert!((f.r2 - 1.0).abs() < 1e-12);
        assert_eq!(f.n_points, 76);
    }

    #[test]
    fn noisy_points_are_dropped() {
        let mut pts: Vec<_> = (1..50).map(|n| (n as f64, (n as f64).powi(-2), 0.0)).collect();
        pts.push((60.0, 1.0, 0.9));
        pts.push((61.0, -1.0, 0.0));
        let f = fit_loglog(&pts, 1.0, 100.0).unwrap();
        assert!((f.slope + 2.0).abs() < 1e-12);
        assert!(fit_loglog(&pts, 200.0, 300.0).is_err());
        assert!(fit_loglog(&pts, 3.0, 2.0).is_err());
    }

    #[test]
    fn log_spacing_is_increasing() {
        let v = log_spaced(20, 400, 20);
        assert_eq!(*v.first().unwrap(), 20);
        assert_eq!(*v.last().unwrap(), 400);
        assert!(v.windows(2).all(|w| w[1] > w[0]));
    }
}
