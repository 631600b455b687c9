use serde::{Deserialize, Serialize};
use statrs::distribution::{ContinuousCDF, Normal};

use crate::error::{Error, Result};
use crate::fit::{DecayCurve, ExponentFit, DEFAULT_MIN_N};

use super::cocycle::Cocycle;
use super::mc::{mean_stderr, par_samples, step_refined};
use super::observable::{require_nonempty, FiberValues, Observable};

/// Below this `Sigma^2_n / n` the observable is treated as a coboundary.
pub const DEGENERATE_VARIANCE: f64 = 1e-6;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case")]
pub enum Method {
    Operator,
    MonteCarlo { samples: usize, seed: u64 },
}

impl Method {
    pub fn label(&self) -> &'static str {
        match self {
            Method::Operator => "operator",
            Method::MonteCarlo { .. } => "monte-carlo",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Estimate {
    pub value: f64,
    pub stderr: f64,
}

impl Estimate {
    pub fn exact(value: f64) -> Self {
        Self { value, stderr: 0.0 }
    }

    /// `|a - b|` in units of the combined standard error.
    pub fn z_distance(&self, other: &Estimate) -> f64 {
        let se = (self.stderr * self.stderr + other.stderr * other.stderr).sqrt();
        let d = (self.value - other.value).abs();
        if se == 0.0 {
            if d == 0.0 {
                0.0
            } else {
                f64::INFINITY
            }
        } else {
            d / se
        }
    }
}

/// Memory-loss curves `|| [L_i^{j-i}(g2 L_s^{i-s} g1)]_j ||_{L^s(mu_j)}`, one
/// curve per entry of `norms`, indexed by the lag `j - i`.
///
/// `g1` is read on fiber `s`, `g2` on fiber `i`.
pub fn memory_loss_curve(
    c: &Cocycle,
    s: i64,
    i: i64,
    lags: &[u64],
    g1: &Observable,
    g2: &Observable,
    norms: &[f64],
) -> Result<Vec<DecayCurve>> {
    require_nonempty(lags)?;
    if i < s {
        return Err(Error::range(format!("need s <= i, got s = {s}, i = {i}")));
    }
    if let Some(p) = norms.iter().find(|p| !(**p >= 1.0)) {
        return Err(Error::range(format!("norm exponent {p} must be >= 1")));
    }
    let j_max = i + *lags.last().unwrap() as i64;
    c.require(s, j_max)?;
    let mut f = c.fibers(g1, s, s)?.grid(s);
    let mut scratch = vec![0.0; f.len()];
    for t in s..i {
        c.push(t, &mut f, &mut scratch)?;
    }
    let g2v = c.fibers(g2, i, i)?.grid(i);
    f.iter_mut().zip(&g2v).for_each(|(a, b)| *a *= b);

    let mut curves: Vec<DecayCurve> = norms
        .iter()
        .map(|&p| DecayCurve::new("operator", format!("memory loss, L^{p} norm, s = {s}, i = {i}")).with_norm(p))
        .collect();
    let mut t = i;
    for &lag in lags {
        while t < i + lag as i64 {
            c.push(t, &mut f, &mut scratch)?;
            t += 1;
        }
        let centred = c.track().center(t, &f);
        for (curve, &p) in curves.iter_mut().zip(norms) {
            curve.push(lag, c.track().norm(t, &centred, p), 0.0);
        }
    }
    Ok(curves)
}

/// `int phi_t (psi_{t+n} ∘ T_t^n) d mu_t` at each lag.
pub fn correlation_curve(
    c: &Cocycle,
    t: i64,
    phi: &Observable,
    psi: &Observable,
    lags: &[u64],
    method: Method,
) -> Result<Vec<Estimate>> {
    require_nonempty(lags)?;
    let t_end = t + *lags.last().unwrap() as i64;
    c.require(t, t_end)?;
    let pv = c.fibers(phi, t, t)?;
    let qv = c.fibers(psi, t, t_end)?;
    match method {
        Method::Operator => {
            let mut f = pv.grid(t);
            let mut scratch = vec![0.0; f.len()];
            let mut k = t;
            let mut out = Vec::with_capacity(lags.len());
            for &lag in lags {
                while k < t + lag as i64 {
                    c.push(k, &mut f, &mut scratch)?;
                    k += 1;
                }
                out.push(Estimate::exact(c.mean(k, &mul(&f, &qv.grid(k)))));
            }
            Ok(out)
        }
        Method::MonteCarlo { samples, seed } => {
            let sampler = c.sampler(t);
            let betas = betas(c, t, t_end);
            let rows = par_samples(samples, seed, |rng| {
                let mut x = sampler.sample(rng);
                let a = pv.eval(t, x);
                let mut row = Vec::with_capacity(lags.len());
                let mut k = 0usize;
                for &lag in lags {
                    while k < lag as usize {
                        x = step_refined(betas[k], x, rng);
                        k += 1;
                    }
                    row.push(a * qv.eval(t + k as i64, x));
                }
                row
            });
            Ok(column_estimates(&rows, lags.len()))
        }
    }
}

pub fn correlation(
    c: &Cocycle,
    t: i64,
    phi: &Observable,
    psi: &Observable,
    n: u64,
    method: Method,
) -> Result<Estimate> {
    Ok(correlation_curve(c, t, phi, psi, &[n], method)?[0])
}

fn mul(a: &[f64], b: &[f64]) -> Vec<f64> {
    a.iter().zip(b).map(|(x, y)| x * y).collect()
}

fn betas(c: &Cocycle, t_lo: i64, t_hi: i64) -> Vec<f64> {
    (t_lo..=t_hi).map(|t| c.path().beta(t)).collect()
}

fn column_estimates(rows: &[Vec<f64>], k: usize) -> Vec<Estimate> {
    (0..k)
        .map(|j| {
            let col: Vec<f64> = rows.iter().map(|r| r[j]).collect();
            let (value, stderr) = mean_stderr(&col);
            Estimate { value, stderr }
        })
        .collect()
}

/// Birkhoff sums `S_n = sum_{j<n} phi_{t+j} ∘ T_t^j` at each `n` in `ns`,
/// `out[k][sample]` for `n = ns[k]`. Orbits start from `mu_t`.
pub fn birkhoff_sums(
    c: &Cocycle,
    t: i64,
    phi: &Observable,
    ns: &[u64],
    n_samples: usize,
    seed: u64,
) -> Result<Vec<Vec<f64>>> {
    require_nonempty(ns)?;
    let n_max = *ns.last().unwrap() as i64;
    c.require(t, t + n_max)?;
    let fv = c.fibers(phi, t, t + n_max)?;
    let betas = betas(c, t, t + n_max);
    let sampler = c.sampler(t);
    let rows = par_samples(n_samples, seed, |rng| {
        birkhoff_row(&fv, t, &betas, ns, sampler.sample(rng), rng)
    });
    Ok((0..ns.len()).map(|k| rows.iter().map(|r| r[k]).collect()).collect())
}

fn birkhoff_row(
    fv: &FiberValues,
    t: i64,
    betas: &[f64],
    ns: &[u64],
    x0: f64,
    rng: &mut impl rand::RngCore,
) -> Vec<f64> {
    let (w, off) = fv.coefficients();
    let base = fv.base();
    let k0 = (t - fv.t_range().0) as usize;
    let mut x = x0;
    let mut s = 0.0;
    let mut j = 0usize;
    let mut row = Vec::with_capacity(ns.len());
    for &n in ns {
        while j < n as usize {
            s += w[k0 + j] * (base.eval(x) - off[k0 + j]);
            x = step_refined(betas[j], x, rng);
            j += 1;
        }
        row.push(s);
    }
    row
}

pub fn birkhoff_samples(
    c: &Cocycle,
    t: i64,
    phi: &Observable,
    n: u64,
    n_samples: usize,
    seed: u64,
) -> Result<Vec<f64>> {
    Ok(birkhoff_sums(c, t, phi, &[n], n_samples, seed)?.remove(0))
}

/// `Sigma^2_n = int S_n^2 d mu_t` for every `n = 1..=n_max`, via
/// `Sigma^2_n = sum_{l<n} [mu_l(phi_l^2) + 2 mu_l(phi_l G_l)]` with
/// `G_0 = 0`, `G_{l+1} = L_l(G_l + phi_l)`.
pub fn operator_variances(c: &Cocycle, t: i64, phi: &Observable, n_max: u64) -> Result<Vec<f64>> {
    c.require(t, t + n_max as i64)?;
    let fv = c.fibers(phi, t, t + n_max as i64)?;
    let mut g = vec![0.0; c.grid().len()];
    let mut scratch = g.clone();
    let mut acc = 0.0;
    let mut out = Vec::with_capacity(n_max as usize);
    for l in 0..n_max as i64 {
        let tl = t + l;
        let p = fv.grid(tl);
        let term: Vec<f64> = p.iter().zip(&g).map(|(a, b)| a * (a + 2.0 * b)).collect();
        acc += c.mean(tl, &term);
        out.push(acc);
        g.iter_mut().zip(&p).for_each(|(a, b)| *a += b);
        c.push(tl, &mut g, &mut scratch)?;
    }
    Ok(out)
}

/// `Sigma^2_n / n` at each `n` in `ns`.
pub fn variance_curve(c: &Cocycle, t: i64, phi: &Observable, ns: &[u64], method: Method) -> Result<DecayCurve> {
    require_nonempty(ns)?;
    if ns[0] == 0 {
        return Err(Error::range("variance curve needs n >= 1"));
    }
    let mut curve = DecayCurve::new(method.label(), "Sigma^2_n / n");
    match method {
        Method::Operator => {
            let all = operator_variances(c, t, phi, *ns.last().unwrap())?;
            for &n in ns {
                curve.push(n, all[n as usize - 1] / n as f64, 0.0);
            }
        }
        Method::MonteCarlo { samples, seed } => {
            let sums = birkhoff_sums(c, t, phi, ns, samples, seed)?;
            for (&n, s) in ns.iter().zip(&sums) {
                let sq: Vec<f64> = s.iter().map(|v| v * v).collect();
                let (m, e) = mean_stderr(&sq);
                curve.push(n, m / n as f64, e / n as f64);
            }
        }
    }
    Ok(curve)
}

/// `sup_t |F(t) - Phi(t)|` for the empirical CDF of `samples`.
pub fn kolmogorov_distance(samples: &[f64]) -> f64 {
    let normal = Normal::new(0.0, 1.0).expect("standard normal");
    let mut xs = samples.to_vec();
    xs.sort_by(f64::total_cmp);
    let n = xs.len() as f64;
    xs.iter()
        .enumerate()
        .map(|(i, &x)| {
            let f = normal.cdf(x);
            (f - i as f64 / n).max((i + 1) as f64 / n - f)
        })
        .fold(0.0, f64::max)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct CltPoint {
    pub n: u64,
    pub sigma2: f64,
    pub distance: f64,
    pub mean: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CltReport {
    pub points: Vec<CltPoint>,
    pub curve: DecayCurve,
    /// Decay rate of the distance, when enough points clear the noise floor.
    pub fit: Option<ExponentFit>,
}

/// Kolmogorov distance between `S_n / Sigma_n` and the standard normal.
pub fn clt_diagnostic(
    c: &Cocycle,
    t: i64,
    phi: &Observable,
    ns: &[u64],
    n_samples: usize,
    seed: u64,
) -> Result<CltReport> {
    require_nonempty(ns)?;
    if ns[0] == 0 || n_samples == 0 {
        return Err(Error::range("CLT diagnostic needs n >= 1 and samples"));
    }
    let n_max = *ns.last().unwrap();
    let var = operator_variances(c, t, phi, n_max)?;
    let ratio = var[n_max as usize - 1] / n_max as f64;
    if !(ratio >= DEGENERATE_VARIANCE) {
        return Err(Error::DegenerateClt { ratio });
    }
    let sums = birkhoff_sums(c, t, phi, ns, n_samples, seed)?;
    // Mean of the Kolmogorov distribution over sqrt(samples).
    let floor = 0.8687 / (n_samples as f64).sqrt();
    let mut curve = DecayCurve::new("monte-carlo", "Kolmogorov distance of S_n / Sigma_n");
    let mut points = Vec::with_capacity(ns.len());
    for (&n, s) in ns.iter().zip(&sums) {
        let sigma2 = var[n as usize - 1];
        let sd = sigma2.sqrt();
        let z: Vec<f64> = s.iter().map(|v| v / sd).collect();
        let distance = kolmogorov_distance(&z);
        let mean = mean_stderr(s).0 / (n as f64).sqrt();
        points.push(CltPoint {
            n,
            sigma2,
            distance,
            mean,
        });
        curve.push(n, distance, floor);
    }
    let fit = curve.fit(1.0, n_max as f64).ok();
    Ok(CltReport { points, curve, fit })
}

/// `|| S_n ||_{L^s(mu_t)}` from Birkhoff samples, with a log-log fit over
/// `n >= 20` (or the whole list when it starts later).
pub fn moment_growth(
    c: &Cocycle,
    t: i64,
    phi: &Observable,
    s: f64,
    ns: &[u64],
    n_samples: usize,
    seed: u64,
) -> Result<(DecayCurve, Option<ExponentFit>)> {
    if !(s >= 1.0) {
        return Err(Error::range(format!("moment order {s} must be >= 1")));
    }
    let sums = birkhoff_sums(c, t, phi, ns, n_samples, seed)?;
    let mut curve = DecayCurve::new("monte-carlo", format!("L^{s} norm of S_n")).with_norm(s);
    for (&n, v) in ns.iter().zip(&sums) {
        let pw: Vec<f64> = v.iter().map(|x| x.abs().powf(s)).collect();
        let (m, e) = mean_stderr(&pw);
        let norm = m.powf(1.0 / s);
        let se = if m > 0.0 { norm * e / (s * m) } else { 0.0 };
        curve.push(n, norm, se);
    }
    let fit = curve.fit(DEFAULT_MIN_N, f64::INFINITY).ok();
    Ok((curve, fit))
}
