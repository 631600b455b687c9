use std::sync::Arc;

use rayon::prelude::*;
use serde::Serialize;

use crate::env::{sample_path, ParameterLaw};
use crate::error::{Error, Result};
use crate::fit::{fit_loglog, ExponentFit};
use crate::rng::{derive_seed, derive_seed2};
use crate::transfer::{Grid, UlamCache};

use super::cocycle::Cocycle;
use super::mc::mean_stderr;
use super::observable::{require_nonempty, Observable};
use super::quenched::{correlation_curve, Estimate, Method};

/// Shared settings for averaging over sampled environments.
#[derive(Debug, Clone)]
pub struct AnnealedSetup {
    pub law: ParameterLaw,
    pub grid: Grid,
    pub n_pull: usize,
    pub n_paths: usize,
    /// Estimator for each path; Monte Carlo seeds are re-derived per path.
    pub inner: Method,
    pub seed: u64,
}

/// `int phi (phi ∘ tau^n) d mu` on the skew product: the average over sampled
/// paths of the quenched correlation at fiber 0, at each lag.
pub fn annealed_correlation(setup: &AnnealedSetup, phi: &Observable, lags: &[u64]) -> Result<Vec<Estimate>> {
    require_nonempty(lags)?;
    if setup.n_paths == 0 {
        return Err(Error::range("need at least one path"));
    }
    setup.law.validate()?;
    let n_max = *lags.last().unwrap() as usize;
    let cache = Arc::new(UlamCache::new(setup.grid.clone()));
    let per_path = (0..setup.n_paths as u64)
        .into_par_iter()
        .map(|p| {
            let path = sample_path(&setup.law, setup.n_pull, n_max, derive_seed(setup.seed, p))?;
            let c = Cocycle::with_cache(path, Arc::clone(&cache), 0, n_max, setup.n_pull)?;
            let inner = match setup.inner {
                Method::Operator => Method::Operator,
                Method::MonteCarlo { samples, seed } => Method::MonteCarlo {
                    samples,
                    seed: derive_seed2(seed, 1, p),
                },
            };
            correlation_curve(&c, 0, phi, phi, lags, inner)
        })
        .collect::<Result<Vec<_>>>()?;
    Ok((0..lags.len())
        .map(|k| {
            let col: Vec<f64> = per_path.iter().map(|r| r[k].value).collect();
            let (value, se) = mean_stderr(&col);
            let stderr = if per_path.len() > 1 { se } else { per_path[0][k].stderr };
            Estimate { value, stderr }
        })
        .collect())
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct AnnealedVariance {
    /// `c_0 + 2 sum_{n=1}^{n_max} c_n + 2 tail`; `None` when the fitted
    /// decay is not summable.
    pub value: Option<f64>,
    pub partial: f64,
    /// Signed estimate of `sum_{n > n_max} c_n`.
    pub tail: f64,
    pub truncation_error: f64,
    pub summable: bool,
    pub fit: Option<ExponentFit>,
    pub correlations: Vec<Estimate>,
}

/// `Sigma^2 = c_0 + 2 sum_{n>=1} c_n`, truncated at `n_max` with the tail
/// extrapolated from a power-law fit of `|c_n|` over the last three quarters
/// of the lags.
pub fn annealed_variance(setup: &AnnealedSetup, phi: &Observable, n_max: u64) -> Result<AnnealedVariance> {
    if n_max == 0 {
        return Err(Error::range("n_max must be >= 1"));
    }
    let lags: Vec<u64> = (0..=n_max).collect();
    let corr = annealed_correlation(setup, phi, &lags)?;
    let partial = corr[0].value + 2.0 * corr[1..].iter().map(|e| e.value).sum::<f64>();
    let pts: Vec<(f64, f64, f64)> = corr
        .iter()
        .enumerate()
        .skip(1)
        .map(|(n, e)| (n as f64, e.value.abs(), e.stderr))
        .collect();
    let lo = (n_max as f64 / 4.0).max(1.0);
    let fit = fit_loglog(&pts, lo, n_max as f64).ok();
    let (tail, summable) = match fit {
        Some(f) if f.slope >= -1.0 => (f64::NAN, false),
        Some(f) => {
            let nm = n_max as f64;
            // sum_{n > n_max} A n^a ~ A n_max^{a+1} / (-a - 1)
            let mag = f.intercept.exp() * nm.powf(f.slope + 1.0) / (-f.slope - 1.0);
            let sign = corr[n_max as usize].value.signum();
            (sign * mag, true)
        }
        None => (0.0, true),
    };
    let value = summable.then_some(partial + 2.0 * tail);
    Ok(AnnealedVariance {
        value,
        partial,
        tail: if summable { tail } else { 0.0 },
        truncation_error: if summable { 2.0 * tail.abs() } else { f64::INFINITY },
        summable,
        fit,
        correlations: corr,
    })
}
