use std::f64::consts::PI;

use serde::{Deserialize, Serialize};

use crate::env::EnvironmentPath;
use crate::error::{Error, Result};
use crate::lsv;
use crate::transfer::{DensityTrack, Grid};

/// Closed-form base function on `[0, 1]`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case")]
pub enum Base {
    /// `sum_k coeffs[k] x^k`
    Poly {
        coeffs: Vec<f64>,
    },
    /// `amp cos(2 pi freq x)`
    Cos {
        freq: f64,
        #[serde(default = "one")]
        amp: f64,
    },
    /// `amp sin(2 pi freq x)`
    Sin {
        freq: f64,
        #[serde(default = "one")]
        amp: f64,
    },
    /// `amp |x - center|`
    AbsDist {
        center: f64,
        #[serde(default = "one")]
        amp: f64,
    },
    /// `psi(x) - psi(T_beta x)`
    Coboundary {
        psi: Box<Base>,
        beta: f64,
    },
    Sum {
        terms: Vec<Base>,
    },
}

fn one() -> f64 {
    1.0
}

impl Base {
    pub fn constant(c: f64) -> Self {
        Base::Poly { coeffs: vec![c] }
    }

    pub fn identity() -> Self {
        Base::Poly { coeffs: vec![0.0, 1.0] }
    }

    pub fn cos(freq: f64) -> Self {
        Base::Cos { freq, amp: 1.0 }
    }

    pub fn coboundary(psi: Base, beta: f64) -> Self {
        Base::Coboundary {
            psi: Box::new(psi),
            beta,
        }
    }

    #[inline]
    pub fn eval(&self, x: f64) -> f64 {
        match self {
            Base::Poly { coeffs } => coeffs.iter().rev().fold(0.0, |acc, c| acc * x + c),
            Base::Cos { freq, amp } => amp * (2.0 * PI * freq * x).cos(),
            Base::Sin { freq, amp } => amp * (2.0 * PI * freq * x).sin(),
            Base::AbsDist { center, amp } => amp * (x - center).abs(),
            Base::Coboundary { psi, beta } => psi.eval(x) - psi.eval(lsv::step(*beta, x).min(1.0)),
            Base::Sum { terms } => terms.iter().map(|b| b.eval(x)).sum(),
        }
    }

    /// `sup |f| + Lip(f)`, estimated on 10^4 equally spaced points; for the
    /// coboundary variant the Lipschitz part is per branch.
    pub fn lip_norm(&self) -> f64 {
        let k = 10_000;
        let xs: Vec<f64> = (0..=k).map(|i| i as f64 / k as f64).collect();
        let vals: Vec<f64> = xs.iter().map(|&x| self.eval(x)).collect();
        let sup = vals.iter().fold(0.0f64, |m, v| m.max(v.abs()));
        let lip = xs
            .windows(2)
            .zip(vals.windows(2))
            .filter(|(x, _)| !(x[0] < 0.5 && x[1] >= 0.5))
            .map(|(x, v)| (v[1] - v[0]).abs() / (x[1] - x[0]))
            .fold(0.0f64, f64::max);
        sup + lip
    }

    pub fn is_zero(&self) -> bool {
        match self {
            Base::Poly { coeffs } => coeffs.iter().all(|&c| c == 0.0),
            Base::Cos { amp, .. } | Base::Sin { amp, .. } | Base::AbsDist { amp, .. } => *amp == 0.0,
            Base::Coboundary { psi, .. } => psi.is_zero(),
            Base::Sum { terms } => terms.iter().all(Base::is_zero),
        }
    }
}

/// Bounded fiber weight `a + b beta`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Weight {
    pub a: f64,
    #[serde(default)]
    pub b: f64,
}

impl Default for Weight {
    fn default() -> Self {
        Weight { a: 1.0, b: 0.0 }
    }
}

impl Weight {
    #[inline]
    pub fn at(&self, beta: f64) -> f64 {
        self.a + self.b * beta
    }
}

/// Fiberwise observable `phi_w(x) = weight(beta(w)) (base(x) - c_w)`, where
/// `c_w = mu_w(base)` when centred and 0 otherwise.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Observable {
    pub base: Base,
    #[serde(default)]
    pub weight: Weight,
    #[serde(default)]
    pub centered: bool,
}

impl Observable {
    pub fn new(base: Base) -> Self {
        Self {
            base,
            weight: Weight::default(),
            centered: false,
        }
    }

    pub fn centered(base: Base) -> Self {
        Self {
            base,
            weight: Weight::default(),
            centered: true,
        }
    }

    pub fn with_weight(mut self, a: f64, b: f64) -> Self {
        self.weight = Weight { a, b };
        self
    }

    /// Multiplies the observable by `c`.
    pub fn scaled(&self, c: f64) -> Self {
        let mut out = self.clone();
        out.weight = Weight {
            a: c * self.weight.a,
            b: c * self.weight.b,
        };
        out
    }

    pub fn is_zero(&self) -> bool {
        self.base.is_zero() || (self.weight.a == 0.0 && self.weight.b == 0.0)
    }

    /// Tabulates the fibers `t_lo..=t_hi` against the densities of `track`.
    pub fn on_fibers(&self, path: &EnvironmentPath, track: &DensityTrack, t_lo: i64, t_hi: i64) -> Result<FiberValues> {
        track.covers(t_lo, t_hi)?;
        path.require(t_lo, t_hi)?;
        let base_grid = track.grid().cell_averages(|x| self.base.eval(x));
        let offsets = (t_lo..=t_hi)
            .map(|t| if self.centered { track.mean(t, &base_grid) } else { 0.0 })
            .collect();
        let weights = (t_lo..=t_hi).map(|t| self.weight.at(path.beta(t))).collect();
        Ok(FiberValues {
            base: self.base.clone(),
            base_grid,
            offsets,
            weights,
            t_lo,
        })
    }
}

/// An observable resolved on a range of fibers: grid values for operator
/// methods, pointwise values for orbit sampling.
#[derive(Debug, Clone)]
pub struct FiberValues {
    base: Base,
    base_grid: Vec<f64>,
    offsets: Vec<f64>,
    weights: Vec<f64>,
    t_lo: i64,
}

impl FiberValues {
    pub fn t_range(&self) -> (i64, i64) {
        (self.t_lo, self.t_lo + self.offsets.len() as i64 - 1)
    }

    fn idx(&self, t: i64) -> usize {
        let k = t - self.t_lo;
        assert!(k >= 0 && (k as usize) < self.offsets.len(), "fiber {t} not tabulated");
        k as usize
    }

    /// Cell values of `phi_t`.
    pub fn grid(&self, t: i64) -> Vec<f64> {
        let k = self.idx(t);
        let (c, w) = (self.offsets[k], self.weights[k]);
        self.base_grid.iter().map(|v| w * (v - c)).collect()
    }

    /// `phi_t(x)`.
    #[inline]
    pub fn eval(&self, t: i64, x: f64) -> f64 {
        let k = self.idx(t);
        self.weights[k] * (self.base.eval(x) - self.offsets[k])
    }

    /// Per-fiber `(weight, offset)` for tight loops.
    pub fn coefficients(&self) -> (&[f64], &[f64]) {
        (&self.weights, &self.offsets)
    }

    pub fn base(&self) -> &Base {
        &self.base
    }
}

/// Test functions used for orthogonality and telescoping checks.
pub fn default_test_functions() -> Vec<Base> {
    vec![
        Base::identity(),
        Base::cos(1.0),
        Base::AbsDist { center: 0.5, amp: 1.0 },
    ]
}

pub(crate) fn grid_values(grid: &Grid, base: &Base) -> Vec<f64> {
    grid.cell_averages(|x| base.eval(x))
}

pub(crate) fn require_nonempty(n: &[u64]) -> Result<()> {
    if n.is_empty() || n.windows(2).any(|w| w[1] <= w[0]) {
        return Err(Error::range("n list must be nonempty and strictly increasing"));
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::transfer::UlamCache;

    #[test]
    fn evaluation() {
        assert_eq!(
            Base::Poly {
                coeffs: vec![1.0, 2.0, 3.0]
            }
            .eval(2.0),
            17.0
        );
        assert!((Base::cos(1.0).eval(0.5) + 1.0).abs() < 1e-15);
        assert_eq!(Base::AbsDist { center: 0.5, amp: 2.0 }.eval(0.0), 1.0);
        let cob = Base::coboundary(Base::identity(), 0.0);
        assert!((cob.eval(0.3) - (0.3 - 0.6)).abs() < 1e-15);
        assert!(Base::constant(0.0).is_zero());
    }

    #[test]
    fn lip_norm_of_identity() {
        assert!((Base::identity().lip_norm() - 2.0).abs() < 1e-9);
        let c = Base::cos(1.0).lip_norm();
        assert!((c - (1.0 + 2.0 * PI)).abs() < 1e-3);
    }

    #[test]
    fn centering_is_per_fiber() {
        let path = crate::env::sample_path(&crate::env::ParameterLaw::fair_coin(0.1, 0.6), 200, 20, 3).unwrap();
        let cache = UlamCache::new(Grid::refined(256, 2.0).unwrap());
        let track = DensityTrack::build(&path, 0, 20, 200, &cache).unwrap();
        let obs = Observable::centered(Base::identity()).with_weight(1.0, 2.0);
        let fv = obs.on_fibers(&path, &track, 0, 20).unwrap();
        for t in 0..=20 {
            assert!(track.mean(t, &fv.grid(t)).abs() < 1e-12);
        }
        let w = 1.0 + 2.0 * path.beta(3);
        assert!((fv.eval(3, 0.7) - fv.grid(3)[0] - w * (0.7 - fv.base_grid[0])).abs() < 1e-12);
    }
}
