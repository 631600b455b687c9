//! The LSV family `T_b(x) = x (1 + (2x)^b)` on `[0, 1/2)`, `2x - 1` on
//! `[1/2, 1]`, its cocycle along an environment path, and the first-return
//! structure to `Y = [1/2, 1]`.

use crate::env::EnvironmentPath;
use crate::error::{Error, Result};

fn check_unit(x: f64) -> Result<()> {
    if (0.0..=1.0).contains(&x) {
        Ok(())
    } else {
        Err(Error::Domain(format!("x = {x} is outside [0, 1]")))
    }
}

/// Left branch `x (1 + 2^b x^b)`, no domain checks.
#[inline]
pub fn left_branch(beta: f64, x: f64) -> f64 {
    if beta == 0.0 {
        2.0 * x
    } else {
        x * (1.0 + (2.0 * x).powf(beta))
    }
}

/// `T_b(x)` without domain checks. `x = 1/2` belongs to the right branch.
#[inline]
pub fn step(beta: f64, x: f64) -> f64 {
    if x < 0.5 {
        left_branch(beta, x)
    } else {
        2.0 * x - 1.0
    }
}

pub fn map_eval(beta: f64, x: f64) -> Result<f64> {
    check_unit(x)?;
    Ok(step(beta, x).min(1.0))
}

/// `T_b'(x)`: `1 + (1 + b)(2x)^b` on the left branch, 2 on the right.
#[inline]
pub fn deriv(beta: f64, x: f64) -> f64 {
    if x >= 0.5 || beta == 0.0 {
        2.0
    } else {
        1.0 + (1.0 + beta) * (2.0 * x).powf(beta)
    }
}

pub fn map_deriv(beta: f64, x: f64) -> Result<f64> {
    check_unit(x)?;
    Ok(deriv(beta, x))
}

/// `T_b''(x) = b (1 + b) (2x)^b / x` on the left branch, 0 on the right.
#[inline]
pub fn second_deriv(beta: f64, x: f64) -> f64 {
    if x >= 0.5 || beta == 0.0 {
        0.0
    } else if x == 0.0 {
        f64::INFINITY
    } else {
        beta * (1.0 + beta) * (2.0 * x).powf(beta) / x
    }
}

const BRACKET_WIDTH: f64 = 1e-10;

/// Inverse of the left branch: the `v` in `[0, 1/2]` with `T_b(v) = y`.
///
/// Bisection narrows the bracket to `1e-10`, then Newton polishes; a Newton
/// iterate leaving the bracket falls back to bisection. Relative accuracy is
/// near machine precision, which matters for the deep preimages near 0.
pub fn left_inverse(beta: f64, y: f64) -> f64 {
    if y <= 0.0 {
        return 0.0;
    }
    if y >= 1.0 {
        return 0.5;
    }
    if beta == 0.0 {
        return 0.5 * y;
    }
    // T(v) >= v and T(v) <= 2v on the left branch, so v lies in [y/2, y].
    let mut lo = 0.5 * y;
    let mut hi = y.min(0.5);
    let width = BRACKET_WIDTH * y.min(1.0);
    while hi - lo > width {
        let mid = 0.5 * (lo + hi);
        if left_branch(beta, mid) < y {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    let mut v = 0.5 * (lo + hi);
    for _ in 0..50 {
        let f = left_branch(beta, v) - y;
        if f == 0.0 {
            return v;
        }
        if f < 0.0 {
            lo = v;
        } else {
            hi = v;
        }
        let mut next = v - f / deriv(beta, v);
        if !(next > lo && next < hi) {
            next = 0.5 * (lo + hi);
        }
        if (next - v).abs() <= 1e-16 * v || next == v {
            return next;
        }
        v = next;
    }
    v
}

/// Orbit `x0, T_w x0, ..., T_w^n x0` along the path from time 0.
pub fn orbit(path: &EnvironmentPath, x0: f64, n: usize) -> Result<Vec<f64>> {
    orbit_from(path, 0, x0, n)
}

/// Orbit starting at time `t`.
pub fn orbit_from(path: &EnvironmentPath, t: i64, x0: f64, n: usize) -> Result<Vec<f64>> {
    check_unit(x0)?;
    if n > 0 {
        path.require(t, t + n as i64 - 1)?;
    }
    let mut out = Vec::with_capacity(n + 1);
    let mut x = x0;
    out.push(x);
    for k in 0..n as i64 {
        x = step(path.beta(t + k), x);
        out.push(x);
    }
    Ok(out)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct ReturnTime {
    pub value: usize,
    /// No return within the cap.
    pub capped: bool,
}

/// First `n >= 1` with `T_w^n(x)` in `Y`, searched up to `cap` steps.
pub fn return_time(path: &EnvironmentPath, x: f64, cap: usize) -> Result<ReturnTime> {
    return_time_from(path, 0, x, cap)
}

pub fn return_time_from(path: &EnvironmentPath, t: i64, x: f64, cap: usize) -> Result<ReturnTime> {
    check_unit(x)?;
    let cap = cap.min((path.t_max() - t + 1).max(0) as usize);
    let mut y = x;
    for n in 1..=cap {
        y = step(path.beta(t + n as i64 - 1), y);
        if y >= 0.5 {
            return Ok(ReturnTime {
                value: n,
                capped: false,
            });
        }
    }
    Ok(ReturnTime {
        value: cap,
        capped: true,
    })
}

/// Values below this clamp the preimage table.
pub const UNDERFLOW_FLOOR: f64 = 1e-300;

/// Partition points `x_n(t) = T_t^{-n}(1)` (left-branch preimages) and
/// `y_n(t) = (x_{n-1}(t+1) + 1) / 2` for shifts `t` in `t_lo..=t_hi`.
#[derive(Debug, Clone)]
pub struct ReturnStructure {
    t_lo: i64,
    t_hi: i64,
    depth: usize,
    /// `x[(t - t_lo) * (depth + 1) + n]` for `t` in `t_lo..=t_hi + 1`.
    x: Vec<f64>,
    clamped: bool,
}

impl ReturnStructure {
    /// Tabulates `x_n(t)` for `n <= depth`, `t` in `t_lo..=t_hi` (and `t_hi + 1`,
    /// which `y_n(t_hi)` needs). Needs betas on `t_lo..=t_hi + depth`.
    pub fn build(path: &EnvironmentPath, t_lo: i64, t_hi: i64, depth: usize) -> Result<Self> {
        if t_hi < t_lo || depth == 0 {
            return Err(Error::range("empty return structure"));
        }
        path.require(t_lo, t_hi + depth as i64)?;
        let rows = (t_hi - t_lo + 2) as usize;
        let stride = depth + 1;
        let mut x = vec![0.0; rows * stride];
        let mut clamped = false;

        if path.is_constant_on(t_lo, t_hi + depth as i64) {
            let beta = path.beta(t_lo);
            let mut col = Vec::with_capacity(stride);
            col.push(1.0);
            for n in 1..=depth {
                let v = left_inverse(beta, col[n - 1]);
                if v < UNDERFLOW_FLOOR {
                    clamped = true;
                }
                col.push(v.max(UNDERFLOW_FLOOR));
            }
            for r in 0..rows {
                x[r * stride..(r + 1) * stride].copy_from_slice(&col);
            }
        } else {
            // Column by column: x_n(t) = L_t^{-1}(x_{n-1}(t + 1)). Column n is
            // needed on t_lo..=t_hi + 1 + depth - n; keep a scratch column.
            let span = (t_hi - t_lo) as usize + 2 + depth;
            let mut prev = vec![1.0; span];
            for r in 0..rows {
                x[r * stride] = 1.0;
            }
            for n in 1..=depth {
                let len = span - n;
                let mut cur = vec![0.0; len];
                for k in 0..len {
                    let t = t_lo + k as i64;
                    let v = left_inverse(path.beta(t), prev[k + 1]);
                    if v < UNDERFLOW_FLOOR {
                        clamped = true;
                    }
                    cur[k] = v.max(UNDERFLOW_FLOOR);
                }
                for r in 0..rows {
                    x[r * stride + n] = cur[r];
                }
                prev = cur;
            }
        }
        Ok(Self {
            t_lo,
            t_hi,
            depth,
            x,
            clamped,
        })
    }

    pub fn depth(&self) -> usize {
        self.depth
    }

    pub fn t_range(&self) -> (i64, i64) {
        (self.t_lo, self.t_hi)
    }

    /// Some entry hit the underflow floor.
    pub fn clamped(&self) -> bool {
        self.clamped
    }

    fn row(&self, t: i64) -> &[f64] {
        let r = (t - self.t_lo) as usize;
        let stride = self.depth + 1;
        &self.x[r * stride..(r + 1) * stride]
    }

    fn check(&self, t: i64, n: usize, t_extra: i64) -> Result<()> {
        if t < self.t_lo || t > self.t_hi + t_extra || n > self.depth {
            return Err(Error::range(format!(
                "(t = {t}, n = {n}) outside the tabulated range t in [{}, {}], n <= {}",
                self.t_lo, self.t_hi, self.depth
            )));
        }
        Ok(())
    }

    pub fn x(&self, t: i64, n: usize) -> Result<f64> {
        self.check(t, n, 1)?;
        Ok(self.row(t)[n])
    }

    /// `y_n(t)` for `n >= 1`.
    pub fn y(&self, t: i64, n: usize) -> Result<f64> {
        if n == 0 {
            return Err(Error::range("y_n is defined for n >= 1"));
        }
        self.check(t, n, 0)?;
        Ok(0.5 * (self.row(t + 1)[n - 1] + 1.0))
    }

    /// `u_t(n) = m~(tau_t >= n) = x_{n-1}(t + 1)`, with `u_t(0) = 1`.
    pub fn tail_u(&self, t: i64, n: usize) -> Result<f64> {
        if n == 0 {
            self.check(t, 0, 0)?;
            return Ok(1.0);
        }
        self.check(t, n, 0)?;
        Ok(self.row(t + 1)[n - 1])
    }

    /// The two partition elements on which `tau_t = n`:
    /// `(x_{n+1}, x_n)` in `[0, 1/2)` and `(y_{n+1}, y_n)` in `Y`.
    pub fn level_set(&self, t: i64, n: usize) -> Result<[(f64, f64); 2]> {
        if n == 0 || n >= self.depth {
            return Err(Error::range("level sets need 1 <= n < depth"));
        }
        Ok([(self.x(t, n + 1)?, self.x(t, n)?), (self.y(t, n + 1)?, self.y(t, n)?)])
    }

    /// CSV rows `t,n,x_n,y_n,u_n` for `n` in `1..=depth`.
    pub fn csv_rows(&self) -> Vec<(i64, usize, f64, f64, f64)> {
        let mut out = Vec::new();
        for t in self.t_lo..=self.t_hi {
            for n in 1..=self.depth {
                let row = self.row(t);
                let next = self.row(t + 1);
                out.push((t, n, row[n], 0.5 * (next[n - 1] + 1.0), next[n - 1]));
            }
        }
        out
    }
}

/// Builds the structure at a single shift; convenience for `tail_u` queries.
pub fn build_return_structure(path: &EnvironmentPath, depth: usize) -> Result<ReturnStructure> {
    ReturnStructure::build(path, 0, 0, depth)
}

pub fn tail_u(structure: &ReturnStructure, t: i64, n: usize) -> Result<f64> {
    structure.tail_u(t, n)
}
