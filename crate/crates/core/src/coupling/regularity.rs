use serde::{Deserialize, Serialize};

use crate::env::EnvironmentPath;
use crate::error::{Error, Result};
use crate::lsv::{deriv, left_inverse, second_deriv, step, ReturnStructure};

/// Pairs closer than this many sample points are compared directly.
pub const LL_WINDOW: usize = 8;

/// Log-Lipschitz seminorm `sup |log psi(y) - log psi(y')| / |y - y'|` over
/// pairs of sample points at most [`LL_WINDOW`] apart, plus every pair that
/// involves the first or last point. `xs` must be increasing. Two zeros
/// compare as equal; a zero next to a positive value gives infinity.
pub fn ll_seminorm(xs: &[f64], values: &[f64]) -> f64 {
    assert_eq!(xs.len(), values.len(), "ll_seminorm: length mismatch");
    let n = xs.len();
    let logs: Vec<f64> = values
        .iter()
        .map(|&v| if v > 0.0 { v.ln() } else { f64::NEG_INFINITY })
        .collect();
    let q = |i: usize, j: usize| -> f64 {
        let (a, b) = (logs[i], logs[j]);
        if a == f64::NEG_INFINITY && b == f64::NEG_INFINITY {
            return 0.0;
        }
        let d = xs[j] - xs[i];
        if d == 0.0 {
            return 0.0;
        }
        ((b - a) / d).abs()
    };
    let mut sup = 0.0f64;
    for i in 0..n {
        for j in i + 1..n.min(i + LL_WINDOW + 1) {
            sup = sup.max(q(i, j));
        }
        if n > 1 {
            if i > 0 {
                sup = sup.max(q(0, i));
            }
            if i < n - 1 {
                sup = sup.max(q(i, n - 1));
            }
        }
    }
    sup
}

/// Constants of the induced map on `Y = [1/2, 1]`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RegularityConstants {
    /// Lower bound of `F'` over the induced branches.
    pub lambda: f64,
    /// Upper bound of `|F''| / F'^2`, the log-Lipschitz constant of the
    /// pushforward of normalised Lebesgue measure.
    pub k: f64,
    pub k2: f64,
    /// `K + K2 / Lambda`.
    pub k1: f64,
}

impl RegularityConstants {
    pub fn new(lambda: f64, k: f64, k2: f64) -> Result<Self> {
        if !(lambda > 1.0) || !(k >= 0.0) || !k.is_finite() {
            return Err(Error::Numerical(format!(
                "invalid induced constants Lambda = {lambda}, K = {k}"
            )));
        }
        if !(k2 > (1.0 - 1.0 / lambda) * k) {
            return Err(Error::config(format!(
                "K2 = {k2} must exceed (1 - 1/Lambda) K = {}",
                (1.0 - 1.0 / lambda) * k
            )));
        }
        Ok(Self {
            lambda,
            k,
            k2,
            k1: k + k2 / lambda,
        })
    }

    /// Default `K2 = K / (1 - 1/Lambda) + 1`, which also gives `K1 < K2`.
    pub fn with_default_k2(lambda: f64, k: f64) -> Result<Self> {
        Self::new(lambda, k, k / (1.0 - 1.0 / lambda) + 1.0)
    }

    /// `C_u = 2 exp(K2)`.
    pub fn c_u(&self) -> f64 {
        2.0 * self.k2.exp()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct InducedReport {
    pub constants: RegularityConstants,
    pub depth: usize,
    /// Return times beyond `depth` are not sampled, or the preimage table
    /// hit the underflow floor.
    pub truncated: bool,
}

/// `F'(x)` and `F''(x) / F'(x)^2` for the first return from `x` in `Y` at shift `t`.
///
/// `F''/F'^2 = sum_k T_k''(x_k) / (T_k'(x_k)^2 prod_{i>k} T_i'(x_i))`.
pub fn induced_derivatives(path: &EnvironmentPath, t: i64, x: f64, cap: usize) -> Result<(f64, f64, usize)> {
    let mut pts = Vec::with_capacity(16);
    let mut z = x;
    for k in 0..cap {
        let b = path.try_beta(t + k as i64)?;
        pts.push((b, z));
        z = step(b, z);
        if z >= 0.5 {
            return Ok(fold_derivatives(&pts));
        }
    }
    Err(Error::Numerical(format!("no return to Y within {cap} steps from {x}")))
}

fn fold_derivatives(pts: &[(f64, f64)]) -> (f64, f64, usize) {
    // Walk backwards so the tail product prod_{i>k} T_i' is available.
    let mut tail = 1.0;
    let mut dist = 0.0;
    for &(b, z) in pts.iter().rev() {
        let d = deriv(b, z);
        dist += second_deriv(b, z) / (d * d * tail);
        tail *= d;
    }
    (tail, dist, pts.len())
}

/// Sample points `left + delta`, midpoint, `right - delta` of an element.
fn probes(a: f64, b: f64) -> [f64; 3] {
    let d = (b - a) * 1e-6;
    [a + d, 0.5 * (a + b), b - d]
}

/// `Lambda` and `K` over the induced branches `(y_{n+1}, y_n)`, `n < depth`.
pub fn induced_constants(path: &EnvironmentPath, t: i64, depth: usize) -> Result<InducedReport> {
    if depth < 2 {
        return Err(Error::range("induced constants need depth >= 2"));
    }
    let rs = ReturnStructure::build(path, t, t, depth)?;
    let mut lambda = f64::INFINITY;
    let mut k = 0.0f64;
    for n in 1..depth {
        let (a, b) = (rs.y(t, n + 1)?, rs.y(t, n)?);
        if !(b > a) {
            continue;
        }
        for x in probes(a, b) {
            let (d, dist, _) = induced_derivatives(path, t, x, depth + 2)?;
            lambda = lambda.min(d);
            k = k.max(dist.abs());
        }
    }
    Ok(InducedReport {
        constants: RegularityConstants::with_default_k2(lambda, k)?,
        depth,
        truncated: rs.clamped(),
    })
}

/// The induced branch on `(y_{n+1}(t), y_n(t))` applied to `samples` interior
/// points, with `psi` pushed forward: returns `(F(x_i), psi(x_i) / F'(x_i))`
/// sorted by image.
pub fn push_on_branch(
    path: &EnvironmentPath,
    rs: &ReturnStructure,
    t: i64,
    n: usize,
    psi: &dyn Fn(f64) -> f64,
    samples: usize,
) -> Result<(Vec<f64>, Vec<f64>)> {
    let (a, b) = (rs.y(t, n + 1)?, rs.y(t, n)?);
    let d = (b - a) * 1e-6;
    let (lo, hi) = (a + d, b - d);
    let mut ys = Vec::with_capacity(samples);
    let mut rho = Vec::with_capacity(samples);
    for i in 0..samples {
        let x = lo + (hi - lo) * i as f64 / (samples - 1).max(1) as f64;
        let (fd, _, steps) = induced_derivatives(path, t, x, n + 2)?;
        let mut z = x;
        for k in 0..steps {
            z = step(path.beta(t + k as i64), z);
        }
        ys.push(z);
        rho.push(psi(x) / fd);
    }
    Ok((ys, rho))
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RegularityReport {
    pub pass: bool,
    /// `(l, LL seminorm)` with the largest seminorm.
    pub worst: (usize, f64),
    pub values: Vec<(usize, f64)>,
}

/// Tests `|(T^l)_*(nu restricted to {tau = l})|_LL <= k1` for `1 <= l <= l_max`.
///
/// `{tau_t = l}` is `(x_{l+1}, x_l) ∪ (y_{l+1}, y_l)`; each piece maps onto
/// `Y` under `T_t^l`. The pushforward density is evaluated at `samples`
/// points of `Y` through the inverse branches.
pub fn regularity_check(
    nu: &dyn Fn(f64) -> f64,
    path: &EnvironmentPath,
    t: i64,
    l_max: usize,
    k1: f64,
    samples: usize,
) -> Result<RegularityReport> {
    if l_max == 0 || samples < 2 {
        return Err(Error::range("regularity check needs l_max >= 1 and >= 2 samples"));
    }
    path.require(t, t + l_max as i64)?;
    let lo = 0.5 + 0.5 * 1e-6;
    let hi = 1.0 - 0.5 * 1e-6;
    let ys: Vec<f64> = (0..samples)
        .map(|i| lo + (hi - lo) * i as f64 / (samples - 1) as f64)
        .collect();
    let mut values = Vec::with_capacity(l_max);
    for l in 1..=l_max {
        let rho: Vec<f64> = ys.iter().map(|&y| pushed_density(nu, path, t, l, y)).collect();
        values.push((l, ll_seminorm(&ys, &rho)));
    }
    let worst = values
        .iter()
        .copied()
        .fold((0, 0.0f64), |w, v| if v.1 > w.1 { v } else { w });
    Ok(RegularityReport {
        pass: values.iter().all(|v| v.1 <= k1),
        worst,
        values,
    })
}

/// Density at `y` in `Y` of `(T_t^l)_*(nu restricted to {tau_t = l})`.
fn pushed_density(nu: &dyn Fn(f64) -> f64, path: &EnvironmentPath, t: i64, l: usize, y: f64) -> f64 {
    // Left piece: l left-branch preimages.
    let mut chain = Vec::with_capacity(l + 1);
    let mut z = y;
    for k in (0..l as i64).rev() {
        z = left_inverse(path.beta(t + k), z);
        chain.push((path.beta(t + k), z));
    }
    let jac: f64 = chain.iter().map(|&(b, x)| deriv(b, x)).product();
    let left = nu(z) / jac;
    // Right piece: l - 1 left preimages at shifts t+1.., then (z + 1) / 2.
    let mut z = y;
    let mut jac = 2.0;
    for k in (1..l as i64).rev() {
        z = left_inverse(path.beta(t + k), z);
        jac *= deriv(path.beta(t + k), z);
    }
    let right = nu(0.5 * (z + 1.0)) / jac;
    left + right
}

/// `C_u sum_{i=0}^{n} u_{t+i}(l + n - i)`.
pub fn u_window(rs: &ReturnStructure, t: i64, n: usize, l: usize, c_u: f64) -> Result<f64> {
    let mut s = 0.0;
    for i in 0..=n {
        s += rs.tail_u(t + i as i64, l + n - i)?;
    }
    Ok(c_u * s)
}
