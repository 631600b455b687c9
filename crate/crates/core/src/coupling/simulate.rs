use rand::RngCore;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::fit::{fit_loglog, ExponentFit};
use crate::io::{fmt_f64, Csv};
use crate::lsv::ReturnStructure;
use crate::rng::unit_f64;
use crate::stats::par_samples;

/// Tail functions driving the coupling-time construction.
pub trait TailModel: Sync {
    /// `r(l) = P(X_1 >= l)`.
    fn first(&self, l: usize) -> Result<f64>;
    /// `u_{sigma^p w, x}(l)`, the bound on `P(X_{j+1} >= l)` given
    /// `X_j = x` and `p = X_1 + ... + X_{j-1}`.
    fn next(&self, p: usize, x: usize, l: usize) -> Result<f64>;
}

/// `P(X >= l) = q^l` for every draw.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GeometricShim {
    pub q: f64,
}

impl GeometricShim {
    /// `P(S >= n)` for `S = X_1 + ... + X_xi`, `xi ~ Geometric(theta)` on
    /// `{1, 2, ...}`: `S` is geometric with ratio `q / (theta + q - theta q)`.
    pub fn exact_tail(&self, theta: f64, n: usize) -> f64 {
        let ratio = self.q / (theta + self.q - theta * self.q);
        ratio.powi(n as i32)
    }
}

impl TailModel for GeometricShim {
    fn first(&self, l: usize) -> Result<f64> {
        Ok(self.q.powi(l as i32))
    }

    fn next(&self, _p: usize, _x: usize, l: usize) -> Result<f64> {
        Ok(self.q.powi(l as i32))
    }
}

/// `r(l) = u_t(l)` and the windowed tails `u_{sigma^p w, x}(l)` from a
/// tabulated return structure.
#[derive(Debug, Clone)]
pub struct ReturnTailModel {
    pub structure: ReturnStructure,
    pub t: i64,
    pub c_u: f64,
}

impl TailModel for ReturnTailModel {
    fn first(&self, l: usize) -> Result<f64> {
        self.structure.tail_u(self.t, l)
    }

    fn next(&self, p: usize, x: usize, l: usize) -> Result<f64> {
        super::u_window(&self.structure, self.t + p as i64, x, l, self.c_u)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CouplingConfig {
    /// `P(xi = 1)`.
    pub theta: f64,
    /// Draws stop, and are marked censored, once the running sum reaches this.
    pub horizon: usize,
    pub n_samples: usize,
    pub seed: u64,
    /// Window of the log-log tail fit.
    pub fit_window: (f64, f64),
}

impl CouplingConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.theta > 0.0 && self.theta <= 1.0) {
            return Err(Error::config(format!("theta = {} must be in (0, 1]", self.theta)));
        }
        if self.horizon == 0 || self.n_samples == 0 {
            return Err(Error::config("horizon and n_samples must be positive"));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct TailRow {
    pub n: usize,
    pub p_hat: f64,
    pub stderr: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CouplingResult {
    /// `P^(S >= n)` for `n = 0..=horizon`; censored draws count as `S >= n`.
    pub table: Vec<TailRow>,
    pub censored_frac: f64,
    pub n_samples: usize,
    pub fit: Option<ExponentFit>,
}

impl CouplingResult {
    pub fn p_hat(&self, n: usize) -> f64 {
        self.table.get(n).map_or(self.censored_frac, |r| r.p_hat)
    }

    /// Least-squares slope of `log2 P^(S >= n)` against `n` over `[lo, hi]`,
    /// skipping zero entries.
    pub fn log2_slope(&self, lo: usize, hi: usize) -> Option<f64> {
        let pts: Vec<(f64, f64)> = self.table[lo.min(self.table.len())..=hi.min(self.table.len() - 1)]
            .iter()
            .filter(|r| r.p_hat > 0.0)
            .map(|r| (r.n as f64, r.p_hat.log2()))
            .collect();
        if pts.len() < 2 {
            return None;
        }
        let m = pts.len() as f64;
        let mx = pts.iter().map(|p| p.0).sum::<f64>() / m;
        let my = pts.iter().map(|p| p.1).sum::<f64>() / m;
        let sxy: f64 = pts.iter().map(|p| (p.0 - mx) * (p.1 - my)).sum();
        let sxx: f64 = pts.iter().map(|p| (p.0 - mx) * (p.0 - mx)).sum();
        Some(sxy / sxx)
    }

    /// `n,p_hat,stderr,censored_frac`.
    pub fn csv(&self) -> Csv {
        let mut csv = Csv::new(&["n", "p_hat", "stderr", "censored_frac"]);
        for r in &self.table {
            csv.row(&[
                r.n.to_string(),
                fmt_f64(r.p_hat),
                fmt_f64(r.stderr),
                fmt_f64(self.censored_frac),
            ]);
        }
        csv
    }
}

/// Draws `X >= 0` with `P(X >= l) = min(1, min_{l' <= l} f(l'))`, `P(X >= 0) = 1`,
/// by inverse CDF. `Ok(None)` when the draw would exceed `cap`.
fn draw(u: f64, cap: usize, f: impl Fn(usize) -> Result<f64>) -> Result<Option<usize>> {
    let mut running = 1.0f64;
    let mut l = 1;
    loop {
        if l > cap {
            return Ok(None);
        }
        running = running.min(f(l)?);
        if running <= u {
            return Ok(Some(l - 1));
        }
        l += 1;
    }
}

fn draw_s(model: &dyn TailModel, cfg: &CouplingConfig, rng: &mut impl RngCore) -> Result<Option<usize>> {
    let mut xi = 1usize;
    while unit_f64(rng.next_u64()) >= cfg.theta {
        xi += 1;
    }
    let h = cfg.horizon;
    let Some(x1) = draw(unit_f64(rng.next_u64()), h, |l| model.first(l))? else {
        return Ok(None);
    };
    let (mut s, mut last) = (x1, x1);
    for _ in 1..xi {
        if s >= h {
            return Ok(None);
        }
        // Offset of X_j's window: X_1 + ... + X_{j-1}.
        let p = s - last;
        let Some(x) = draw(unit_f64(rng.next_u64()), h - s, |l| model.next(p, last, l))? else {
            return Ok(None);
        };
        s += x;
        last = x;
    }
    if s > h {
        return Ok(None);
    }
    Ok(Some(s))
}

/// Monte Carlo law of the coupling time `S = X_1 + ... + X_xi`.
pub fn simulate_coupling_time(model: &dyn TailModel, cfg: &CouplingConfig) -> Result<CouplingResult> {
    cfg.validate()?;
    let draws = par_samples(cfg.n_samples, cfg.seed, |rng| draw_s(model, cfg, rng));
    let h = cfg.horizon;
    let mut counts = vec![0usize; h + 1];
    let mut censored = 0usize;
    for d in draws {
        match d? {
            Some(s) => counts[s] += 1,
            None => censored += 1,
        }
    }
    let n = cfg.n_samples as f64;
    let mut table = Vec::with_capacity(h + 1);
    let mut at_least = cfg.n_samples;
    for (k, c) in counts.iter().enumerate() {
        let p = at_least as f64 / n;
        table.push(TailRow {
            n: k,
            p_hat: p,
            stderr: (p * (1.0 - p) / n).sqrt(),
        });
        at_least -= c;
    }
    let pts: Vec<(f64, f64, f64)> = table.iter().skip(1).map(|r| (r.n as f64, r.p_hat, r.stderr)).collect();
    let fit = fit_loglog(&pts, cfg.fit_window.0, cfg.fit_window.1).ok();
    Ok(CouplingResult {
        table,
        censored_frac: censored as f64 / n,
        n_samples: cfg.n_samples,
        fit,
    })
}
