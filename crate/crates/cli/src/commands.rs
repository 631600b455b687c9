//! One function per subcommand. Each returns its artifacts; writing them and
//! updating the manifest is left to the caller.

use std::sync::Arc;

use anyhow::Result;
use serde_json::json;

use lsv_core::coupling::{
    dkw_epsilon, induced_constants, simulate_coupling_time, CouplingConfig, CouplingResult, GeometricShim,
    ReturnTailModel,
};
use lsv_core::env::{b0_of, count_below, n_eps, sample_path, Direction, MixingProfile};
use lsv_core::io::{cells_csv, curve_csv, fmt_f64, Csv};
use lsv_core::lsv::orbit_from;
use lsv_core::rng::derive_seed;
use lsv_core::stats::{
    annealed_correlation, annealed_variance, clt_diagnostic, correlation_curve, default_test_functions,
    martingale_orthogonality_check, martingale_parts, moment_growth, telescoping_residuals, variance_curve,
    AnnealedSetup, Cocycle, Estimate, Method,
};
use lsv_core::transfer::{cone_report, equivariant_density};
use lsv_core::{DecayCurve, EnvironmentPath, Error, Grid, GridKind, ReturnStructure, UlamMatrix};

use crate::config::{clt_enabled, memory_exponent, ExperimentConfig, TailKind};
use crate::manifest::{CheckSummary, FitSummary};

/// Everything a command needs besides its config section.
pub struct Ctx {
    pub cfg: ExperimentConfig,
    /// Root seed after any `--seed` override.
    pub seed: u64,
}

#[derive(Debug, Default)]
pub struct Artifacts {
    /// `(file name, bytes)`, written in order.
    pub files: Vec<(String, Vec<u8>)>,
    pub fits: Vec<FitSummary>,
    pub checks: Vec<CheckSummary>,
}

impl Artifacts {
    fn csv(&mut self, name: impl Into<String>, csv: &Csv) {
        self.files.push((name.into(), csv.as_str().as_bytes().to_vec()));
    }

    fn json(&mut self, name: impl Into<String>, v: &serde_json::Value) {
        let mut text = serde_json::to_string_pretty(v).expect("json values serialise");
        text.push('\n');
        self.files.push((name.into(), text.into_bytes()));
    }
}

// Seed streams: the environment uses the root seed, Monte Carlo and the
// coupling simulator use derived streams.
const MC_STREAM: u64 = 1;
const COUPLING_STREAM: u64 = 2;

const MAX_CENSORED: f64 = 0.05;

impl Ctx {
    fn mc_seed(&self) -> u64 {
        derive_seed(self.seed, MC_STREAM)
    }

    fn grid(&self) -> Result<Grid> {
        Ok(Grid::new(self.cfg.grid)?)
    }

    /// The sampled environment on a window covering `t_lo..=t_hi` and 0.
    /// Entries depend on `(law, seed, t)` only, so every command sees the
    /// same environment.
    fn path(&self, t_lo: i64, t_hi: i64) -> Result<EnvironmentPath> {
        let n_past = (-t_lo).max(0) as usize;
        let n_future = t_hi.max(0) as usize;
        Ok(sample_path(&self.cfg.law, n_past, n_future, self.seed)?)
    }

    fn cocycle(&self, t0: i64, len: u64) -> Result<Cocycle> {
        let n_pull = self.cfg.n_pull as i64;
        let path = self.path(t0 - n_pull, t0 + len as i64)?;
        Ok(Cocycle::new(path, self.grid()?, t0, len as usize, self.cfg.n_pull)?)
    }

    fn mc(&self) -> Method {
        Method::MonteCarlo {
            samples: self.cfg.mc.n_samples,
            seed: self.mc_seed(),
        }
    }

    fn constant_law(&self) -> bool {
        self.cfg.law.ess_inf() == self.cfg.law.ess_sup()
    }

    /// Fit of a decay exponent against `predicted`: two-sided for constant
    /// laws, an upper bound on the slope otherwise.
    fn rate_fit(
        &self,
        name: &str,
        slope: Option<f64>,
        predicted: Option<f64>,
        tol: f64,
        two_sided: bool,
    ) -> FitSummary {
        match predicted {
            None => FitSummary::reported(name, slope, None),
            Some(p) if two_sided && self.constant_law() => FitSummary::within(name, slope, p, tol),
            Some(p) => FitSummary::at_most(name, slope, p, tol),
        }
    }
}

fn estimates_csv(lags: &[u64], rows: &[Estimate], method: &str, csv: &mut Csv) {
    for (n, e) in lags.iter().zip(rows) {
        csv.row(&[n.to_string(), fmt_f64(e.value), fmt_f64(e.stderr), method.to_string()]);
    }
}

fn abs_curve(lags: &[u64], rows: &[Estimate], method: &str) -> DecayCurve {
    let mut c = DecayCurve::new(method, "absolute correlation");
    for (&n, e) in lags.iter().zip(rows) {
        c.push(n, e.value.abs(), e.stderr);
    }
    c
}

fn slope_of(fit: lsv_core::Result<lsv_core::ExponentFit>) -> Option<f64> {
    fit.ok().map(|f| f.slope)
}

fn fit_window(w: Option<(f64, f64)>, ns: &[u64]) -> (f64, f64) {
    w.unwrap_or((ns[0] as f64, *ns.last().unwrap() as f64))
}

pub fn env_sample(ctx: &Ctx) -> Result<Artifacts> {
    let e = &ctx.cfg.env;
    let path = ctx.path(-(e.n_past as i64), e.n_future as i64)?;
    let mut csv = Csv::new(&["t", "beta"]);
    for (t, b) in path.iter() {
        csv.row(&[t.to_string(), fmt_f64(b)]);
    }
    let b0 = b0_of(&ctx.cfg.law, ctx.cfg.gamma)?;
    let neps = n_eps(&path, ctx.cfg.gamma, b0, ctx.cfg.epsilon, e.horizon)?;
    let s_n = count_below(&path, ctx.cfg.gamma, e.n_future, Direction::Forward)?;
    let mixing = MixingProfile::from_law(&ctx.cfg.law, 16).ok();
    let mut a = Artifacts::default();
    a.csv("env.csv", &csv);
    a.json(
        "env.json",
        &json!({
            "seed": ctx.seed,
            "window": [path.t_min(), path.t_max()],
            "gamma": ctx.cfg.gamma,
            "b0": b0,
            "ess_inf": ctx.cfg.law.ess_inf(),
            "ess_sup": ctx.cfg.law.ess_sup(),
            "forward_count": { "n": e.n_future, "s_n": s_n },
            "n_eps": neps,
            "mixing": mixing,
        }),
    );
    Ok(a)
}

pub fn orbit(ctx: &Ctx) -> Result<Artifacts> {
    let o = &ctx.cfg.orbit;
    let path = ctx.path(o.t, o.t + o.n as i64)?;
    let xs = orbit_from(&path, o.t, o.x0, o.n)?;
    let mut csv = Csv::new(&["k", "t", "beta", "x"]);
    for (k, x) in xs.iter().enumerate() {
        let t = o.t + k as i64;
        csv.row(&[k.to_string(), t.to_string(), fmt_f64(path.beta(t)), fmt_f64(*x)]);
    }
    let mut a = Artifacts::default();
    a.csv("orbit.csv", &csv);
    Ok(a)
}

pub fn return_tails(ctx: &Ctx) -> Result<Artifacts> {
    let r = &ctx.cfg.return_tails;
    if r.t_hi < r.t_lo {
        return Err(Error::Config("return_tails.t_hi < t_lo".into()).into());
    }
    let path = ctx.path(r.t_lo, r.t_hi + r.depth as i64 + 1)?;
    let rs = ReturnStructure::build(&path, r.t_lo, r.t_hi, r.depth)?;
    let mut csv = Csv::new(&["t", "n", "x_n", "y_n", "u_n"]);
    for (t, n, x, y, u) in rs.csv_rows() {
        csv.row(&[t.to_string(), n.to_string(), fmt_f64(x), fmt_f64(y), fmt_f64(u)]);
    }
    let mut curve = DecayCurve::new("exact", "tail u(n) at t_lo");
    for n in 1..=r.depth {
        curve.push(n as u64, rs.tail_u(r.t_lo, n)?, 0.0);
    }
    let fit = curve.fit(r.fit.0, r.fit.1);
    let b = ctx.cfg.law.ess_sup();
    let predicted = (b > 0.0).then(|| -1.0 / b);
    let mut a = Artifacts::default();
    a.fits
        .push(ctx.rate_fit("return-tails.u", slope_of(fit.clone()), predicted, 0.3, true));
    a.csv("return_tails.csv", &csv);
    a.json(
        "return_tails.json",
        &json!({ "t": r.t_lo, "depth": r.depth, "clamped": rs.clamped(), "fit": fit.ok(), "predicted": predicted }),
    );
    Ok(a)
}

pub fn ulam(ctx: &Ctx) -> Result<Artifacts> {
    let u = &ctx.cfg.ulam;
    let beta = match u.beta {
        Some(b) => b,
        None => ctx.path(0, 0)?.beta(0),
    };
    let kind = match (ctx.cfg.grid, u.n) {
        (k, None) => k,
        (GridKind::Uniform { .. }, Some(n)) => GridKind::Uniform { n },
        (GridKind::Refined { kappa, .. }, Some(n)) => GridKind::Refined { n, kappa },
    };
    let grid = Grid::new(kind)?;
    let descriptor = grid.descriptor();
    let m = UlamMatrix::new(beta, Arc::new(grid))?;
    let mut bin = Vec::new();
    m.write_binary(&mut bin)?;
    let defect = m.row_sum_defect();
    let mut a = Artifacts::default();
    a.checks.push(CheckSummary::below("ulam.row-sum-defect", defect, 1e-12));
    a.files.push(("ulam.bin".into(), bin));
    a.json(
        "ulam.json",
        &json!({ "beta": beta, "grid": descriptor, "cells": m.len(), "nnz": m.nnz(), "row_sum_defect": defect }),
    );
    Ok(a)
}

pub fn density(ctx: &Ctx) -> Result<Artifacts> {
    let t = ctx.cfg.density.t;
    let path = ctx.path(t - ctx.cfg.n_pull as i64, t)?;
    let (d, report) = equivariant_density(&path, t, ctx.cfg.n_pull, &ctx.grid()?)?;
    let h = d.values();
    let cone = cone_report(&d, ctx.cfg.law.ess_sup());
    let spread = h.iter().fold(0.0f64, |m, v| m.max((v - h[0]).abs()));
    let mut a = Artifacts::default();
    a.csv("density.csv", &cells_csv(d.grid().bounds(), &[("h", h)]));
    a.json(
        "density.json",
        &json!({ "t": t, "grid": d.grid().descriptor(), "mass": d.mass(), "max_cell_spread": spread, "pullback": report, "cone": cone }),
    );
    Ok(a)
}

pub fn decay(ctx: &Ctx) -> Result<Artifacts> {
    let d = &ctx.cfg.decay;
    let lags = d.lags.values()?;
    let c = ctx.cocycle(d.s, (d.i - d.s) as u64 + lags.last().unwrap())?;
    let g2 = d.g2.clone().unwrap_or_else(|| ctx.cfg.observable.clone());
    let curves = lsv_core::stats::memory_loss_curve(&c, d.s, d.i, &lags, &ctx.cfg.observable, &g2, &d.norms)?;
    let eta = memory_exponent(&ctx.cfg.law);
    let mut a = Artifacts::default();
    let mut fits = Vec::new();
    for (s, curve) in d.norms.iter().zip(&curves) {
        let name = format!("decay.L{s}");
        let fit = curve.fit(d.fit.0, d.fit.1);
        a.fits
            .push(ctx.rate_fit(&name, slope_of(fit.clone()), eta.map(|e| -e / s), 0.35, *s == 1.0));
        a.csv(format!("decay_L{s}.csv"), &curve_csv(curve));
        fits.push(json!({ "norm": s, "fit": fit.ok() }));
    }
    a.json(
        "decay.json",
        &json!({ "s": d.s, "i": d.i, "predicted_exponent": eta, "fits": fits }),
    );
    Ok(a)
}

pub fn corr(ctx: &Ctx) -> Result<Artifacts> {
    let k = &ctx.cfg.corr;
    let lags = k.lags.values()?;
    let c = ctx.cocycle(k.t, *lags.last().unwrap())?;
    let phi = &ctx.cfg.observable;
    let psi = k.psi.clone().unwrap_or_else(|| phi.clone());
    let op = correlation_curve(&c, k.t, phi, &psi, &lags, Method::Operator)?;
    let mut csv = Csv::new(&["n", "value", "stderr", "method"]);
    estimates_csv(&lags, &op, "operator", &mut csv);
    let mut a = Artifacts::default();
    let mut max_z = None;
    if k.monte_carlo {
        let mc = correlation_curve(&c, k.t, phi, &psi, &lags, ctx.mc())?;
        estimates_csv(&lags, &mc, "monte-carlo", &mut csv);
        let z = op.iter().zip(&mc).map(|(a, b)| a.z_distance(b)).fold(0.0f64, f64::max);
        a.checks.push(CheckSummary::below("corr.max-z", z, 5.0));
        max_z = Some(z);
    }
    let fit = abs_curve(&lags, &op, "operator").fit(k.fit.0, k.fit.1);
    let eta = memory_exponent(&ctx.cfg.law);
    a.fits
        .push(ctx.rate_fit("corr.operator", slope_of(fit.clone()), eta.map(|e| -e), 0.35, true));
    a.csv("corr.csv", &csv);
    a.json("corr.json", &json!({ "t": k.t, "fit": fit.ok(), "max_z": max_z }));
    Ok(a)
}

pub fn variance(ctx: &Ctx) -> Result<Artifacts> {
    let v = &ctx.cfg.variance;
    let ns = v.ns.values()?;
    let c = ctx.cocycle(v.t, *ns.last().unwrap())?;
    let phi = &ctx.cfg.observable;
    let op = variance_curve(&c, v.t, phi, &ns, Method::Operator)?;
    let mut text = curve_csv(&op).as_str().to_string();
    if v.monte_carlo {
        let mc = variance_curve(&c, v.t, phi, &ns, ctx.mc())?;
        let body = curve_csv(&mc);
        text.extend(body.as_str().lines().skip(1).map(|l| format!("{l}\n")));
    }
    let (lo, hi) = fit_window(v.fit, &ns);
    let fit = op.fit(lo, hi);
    let mut a = Artifacts::default();
    let name = "variance.flatness";
    a.fits.push(if clt_enabled(&ctx.cfg) {
        FitSummary::within(name, slope_of(fit.clone()), 0.0, 0.05)
    } else {
        FitSummary::reported(name, slope_of(fit.clone()), Some(0.0))
    });
    a.files.push(("variance.csv".into(), text.into_bytes()));
    a.json(
        "variance.json",
        &json!({ "t": v.t, "sigma2_per_n_at_max": op.points.last().map(|p| p.value), "fit": fit.ok() }),
    );
    Ok(a)
}

pub fn clt(ctx: &Ctx) -> Result<Artifacts> {
    if !clt_enabled(&ctx.cfg) {
        return Err(Error::Capability(format!(
            "CLT diagnostics are disabled: 1/gamma - 1 = {:.3} <= 1 gives non-summable decay",
            1.0 / ctx.cfg.gamma - 1.0
        ))
        .into());
    }
    let k = &ctx.cfg.clt;
    let ns = k.ns.values()?;
    let c = ctx.cocycle(k.t, *ns.last().unwrap())?;
    let n_samples = ctx.cfg.mc.n_samples;
    let r = clt_diagnostic(&c, k.t, &ctx.cfg.observable, &ns, n_samples, ctx.mc_seed())?;
    let mut csv = Csv::new(&["n", "sigma2", "distance", "mean"]);
    for p in &r.points {
        csv.row(&[p.n.to_string(), fmt_f64(p.sigma2), fmt_f64(p.distance), fmt_f64(p.mean)]);
    }
    let mut a = Artifacts::default();
    a.fits
        .push(FitSummary::reported("clt.distance", r.fit.map(|f| f.slope), None));
    let last = r.points.last().unwrap();
    let bound = 0.02f64.max(2.0 / (n_samples as f64).sqrt());
    a.checks
        .push(CheckSummary::below("clt.distance-at-max-n", last.distance, bound));
    a.csv("clt.csv", &csv);
    a.json("clt.json", &json!({ "t": k.t, "samples": n_samples, "fit": r.fit }));
    Ok(a)
}

pub fn moments(ctx: &Ctx) -> Result<Artifacts> {
    let m = &ctx.cfg.moments;
    let ns = m.ns.values()?;
    let c = ctx.cocycle(m.t, *ns.last().unwrap())?;
    let (curve, _) = moment_growth(
        &c,
        m.t,
        &ctx.cfg.observable,
        m.s,
        &ns,
        ctx.cfg.mc.n_samples,
        ctx.mc_seed(),
    )?;
    let (lo, hi) = fit_window(m.fit, &ns);
    let fit = curve.fit(lo, hi);
    let name = format!("moments.L{}", m.s);
    let mut a = Artifacts::default();
    a.fits.push(if clt_enabled(&ctx.cfg) {
        FitSummary::within(&name, slope_of(fit.clone()), 0.5, 0.07)
    } else {
        FitSummary::reported(&name, slope_of(fit.clone()), Some(0.5))
    });
    a.csv("moments.csv", &curve_csv(&curve));
    a.json("moments.json", &json!({ "t": m.t, "s": m.s, "fit": fit.ok() }));
    Ok(a)
}

pub fn martingale_check(ctx: &Ctx) -> Result<Artifacts> {
    let m = &ctx.cfg.martingale;
    let c = ctx.cocycle(m.t, m.n as u64 + 2)?;
    let tests = m.tests.clone().unwrap_or_else(default_test_functions);
    let phi = &ctx.cfg.observable;
    let report = martingale_orthogonality_check(&c, m.t, phi, m.n, &tests)?;
    let parts = martingale_parts(&c, m.t, phi, m.n)?;
    let residuals = telescoping_residuals(&c, &parts, &tests)?;
    let mut csv = Csv::new(&["k", "telescoping_residual"]);
    for (k, r) in residuals.iter().enumerate() {
        csv.row(&[k.to_string(), fmt_f64(*r)]);
    }
    let mut a = Artifacts::default();
    a.checks.push(CheckSummary::below(
        "martingale.max-defect",
        report.max_defect,
        m.max_defect,
    ));
    a.csv("martingale.csv", &csv);
    a.json(
        "martingale.json",
        &json!({ "t": m.t, "n": m.n, "grid": c.grid().descriptor(), "defect": report, "max_telescoping_residual": residuals.iter().cloned().fold(0.0, f64::max) }),
    );
    Ok(a)
}

pub fn coupling(ctx: &Ctx) -> Result<Artifacts> {
    let k = &ctx.cfg.coupling;
    let cfg = CouplingConfig {
        theta: k.theta,
        horizon: k.horizon,
        n_samples: k.n_samples.unwrap_or(ctx.cfg.mc.n_samples),
        seed: derive_seed(ctx.seed, COUPLING_STREAM),
        fit_window: k.fit,
    };
    let mut a = Artifacts::default();
    let (result, info): (CouplingResult, serde_json::Value) = match k.tail {
        TailKind::Geometric => {
            let shim = GeometricShim { q: k.q };
            let r = simulate_coupling_time(&shim, &cfg)?;
            let dev = r
                .table
                .iter()
                .map(|row| (row.p_hat - shim.exact_tail(k.theta, row.n)).abs())
                .fold(0.0, f64::max);
            let eps = dkw_epsilon(cfg.n_samples, 1e-3);
            a.checks.push(CheckSummary::below("coupling.shim-deviation", dev, eps));
            let ratio = shim.exact_tail(k.theta, 1);
            (
                r,
                json!({ "tail": "geometric", "q": k.q, "exact_ratio": ratio, "max_deviation": dev, "dkw_epsilon": eps }),
            )
        }
        TailKind::Return => {
            let path = ctx.path(k.t, k.t + 2 * k.horizon as i64 + k.depth as i64 + 4)?;
            let induced = induced_constants(&path, k.t, k.depth)?;
            let c_u = k.c_u.unwrap_or_else(|| induced.constants.c_u());
            let structure = ReturnStructure::build(&path, k.t, k.t + k.horizon as i64, k.horizon + 2)?;
            let model = ReturnTailModel { structure, t: k.t, c_u };
            let r = simulate_coupling_time(&model, &cfg)?;
            let eta_hat = r.fit.map(|f| -f.slope);
            let eta = memory_exponent(&ctx.cfg.law);
            // Heavy censoring means the fit window sits before the asymptotic tail.
            a.fits.push(match eta {
                Some(e) if r.censored_frac <= MAX_CENSORED => FitSummary::at_least("coupling.eta", eta_hat, e, 0.4),
                _ => FitSummary::reported("coupling.eta", eta_hat, eta),
            });
            (
                r,
                json!({ "tail": "return", "induced": induced, "c_u": c_u, "eta_hat": eta_hat, "predicted_eta": eta }),
            )
        }
    };
    a.csv("coupling.csv", &result.csv());
    a.json(
        "coupling.json",
        &json!({ "theta": k.theta, "horizon": k.horizon, "samples": cfg.n_samples, "censored_frac": result.censored_frac, "fit": result.fit, "model": info }),
    );
    Ok(a)
}

pub fn annealed(ctx: &Ctx) -> Result<Artifacts> {
    let k = &ctx.cfg.annealed;
    let lags = k.lags.values()?;
    let inner = if k.monte_carlo { ctx.mc() } else { Method::Operator };
    let setup = AnnealedSetup {
        law: ctx.cfg.law.clone(),
        grid: ctx.grid()?,
        n_pull: ctx.cfg.n_pull,
        n_paths: k.n_paths,
        inner,
        seed: ctx.seed,
    };
    let phi = &ctx.cfg.observable;
    let corr = annealed_correlation(&setup, phi, &lags)?;
    let var = annealed_variance(&setup, phi, k.n_max)?;
    let mut csv = Csv::new(&["n", "value", "stderr", "method"]);
    estimates_csv(&lags, &corr, &format!("annealed-{}", inner.label()), &mut csv);
    let eta = memory_exponent(&ctx.cfg.law);
    let mut a = Artifacts::default();
    a.fits.push(FitSummary::reported(
        "annealed.correlation-tail",
        var.fit.map(|f| f.slope),
        eta.map(|e| -e),
    ));
    a.csv("annealed.csv", &csv);
    a.json(
        "annealed.json",
        &json!({ "paths": k.n_paths, "n_max": k.n_max, "variance": var }),
    );
    Ok(a)
}
