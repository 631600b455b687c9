use serde::Serialize;

use crate::error::Result;

use super::cocycle::Cocycle;
use super::observable::{grid_values, Base, Observable};

/// `G_k` and `H_k` on the grid, fiber `t + k`.
///
/// `G_0 = 0`, `G_{k+1} = L_{t+k}(G_k + phi_k)` and
/// `H_k = phi_k + G_k - G_{k+1} ∘ T_{t+k}`.
#[derive(Debug, Clone)]
pub struct MartingaleParts {
    pub t: i64,
    /// `g[k]` for `k = 0..=n + 1`.
    pub g: Vec<Vec<f64>>,
    /// `h[k]` for `k = 0..=n`.
    pub h: Vec<Vec<f64>>,
    /// `phi[k]` for `k = 0..=n`.
    pub phi: Vec<Vec<f64>>,
}

pub fn martingale_parts(c: &Cocycle, t: i64, phi: &Observable, n: usize) -> Result<MartingaleParts> {
    let t_end = t + n as i64 + 1;
    c.require(t, t_end)?;
    let fv = c.fibers(phi, t, t_end)?;
    let len = c.grid().len();
    let mut g = vec![vec![0.0; len]];
    let mut phis = Vec::with_capacity(n + 1);
    let mut scratch = vec![0.0; len];
    for k in 0..=n {
        let tk = t + k as i64;
        let p = fv.grid(tk);
        let mut next: Vec<f64> = g[k].iter().zip(&p).map(|(a, b)| a + b).collect();
        c.push(tk, &mut next, &mut scratch)?;
        g.push(next);
        phis.push(p);
    }
    let h = (0..=n)
        .map(|k| {
            let back = c.compose(t + k as i64, &g[k + 1])?;
            Ok(phis[k]
                .iter()
                .zip(&g[k])
                .zip(&back)
                .map(|((p, gk), b)| p + gk - b)
                .collect())
        })
        .collect::<Result<Vec<Vec<f64>>>>()?;
    Ok(MartingaleParts { t, g, h, phi: phis })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct DefectReport {
    pub max_defect: f64,
    /// `(k, index of the test function)` attaining the maximum.
    pub worst: (usize, usize),
}

/// `max_{k <= n, f} | int (H_k ∘ T^k)(f ∘ T^{k+1}) d mu_t |`, evaluated as
/// `| int (L_{t+k} H_k) f d mu_{t+k+1} |`.
pub fn martingale_orthogonality_check(
    c: &Cocycle,
    t: i64,
    phi: &Observable,
    n: usize,
    tests: &[Base],
) -> Result<DefectReport> {
    let parts = martingale_parts(c, t, phi, n)?;
    let fs: Vec<Vec<f64>> = tests.iter().map(|b| grid_values(c.grid(), b)).collect();
    let mut scratch = vec![0.0; c.grid().len()];
    let mut report = DefectReport {
        max_defect: 0.0,
        worst: (0, 0),
    };
    for (k, hk) in parts.h.iter().enumerate() {
        let tk = t + k as i64;
        let mut pushed = hk.clone();
        c.push(tk, &mut pushed, &mut scratch)?;
        for (j, f) in fs.iter().enumerate() {
            let prod: Vec<f64> = pushed.iter().zip(f).map(|(a, b)| a * b).collect();
            let d = c.mean(tk + 1, &prod).abs();
            if d > report.max_defect {
                report = DefectReport {
                    max_defect: d,
                    worst: (k, j),
                };
            }
        }
    }
    Ok(report)
}

/// `| int [sum_{k<=n} phi_k ∘ T^k - sum_{k<=n} H_k ∘ T^k - G_{n+1} ∘ T^{n+1}] f d mu_t |`
/// for each test function, using `int (u ∘ T^k) f d mu_t = int u (L^k f) d mu_{t+k}`.
pub fn telescoping_residuals(c: &Cocycle, parts: &MartingaleParts, tests: &[Base]) -> Result<Vec<f64>> {
    let n = parts.h.len() - 1;
    let t = parts.t;
    let mut scratch = vec![0.0; c.grid().len()];
    tests
        .iter()
        .map(|b| {
            let mut f = grid_values(c.grid(), b);
            let mut total = 0.0;
            for k in 0..=n {
                let tk = t + k as i64;
                let d: Vec<f64> = parts.phi[k]
                    .iter()
                    .zip(&parts.h[k])
                    .zip(&f)
                    .map(|((p, h), fv)| (p - h) * fv)
                    .collect();
                total += c.mean(tk, &d);
                c.push(tk, &mut f, &mut scratch)?;
            }
            let last: Vec<f64> = parts.g[n + 1].iter().zip(&f).map(|(a, b)| a * b).collect();
            total -= c.mean(t + n as i64 + 1, &last);
            Ok(total.abs())
        })
        .collect()
}
