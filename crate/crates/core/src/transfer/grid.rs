use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case")]
pub enum GridKind {
    Uniform {
        n: usize,
    },
    /// Left half refined towards 0 with boundaries `(1/2) (i / (n/2))^kappa`,
    /// right half uniform.
    Refined {
        n: usize,
        kappa: f64,
    },
}

impl GridKind {
    pub fn cells(&self) -> usize {
        match *self {
            GridKind::Uniform { n } | GridKind::Refined { n, .. } => n,
        }
    }
}

/// Cell boundaries `0 = b_0 < ... < b_N = 1` with 1/2 always a boundary.
#[derive(Debug, Clone, PartialEq)]
pub struct Grid {
    kind: GridKind,
    bounds: Vec<f64>,
    widths: Vec<f64>,
    half: usize,
}

impl Grid {
    pub fn new(kind: GridKind) -> Result<Self> {
        let n = kind.cells();
        if n < 2 || !n.is_multiple_of(2) {
            return Err(Error::config(format!(
                "grid needs an even number of cells >= 2, got {n}"
            )));
        }
        let m = n / 2;
        let left: Box<dyn Fn(usize) -> f64> = match kind {
            GridKind::Uniform { .. } => Box::new(move |i| 0.5 * i as f64 / m as f64),
            GridKind::Refined { kappa, .. } => {
                if !(kappa >= 1.0) {
                    return Err(Error::config(format!("refine exponent {kappa} must be >= 1")));
                }
                Box::new(move |i| 0.5 * (i as f64 / m as f64).powf(kappa))
            }
        };
        let mut bounds: Vec<f64> = (0..m).map(left).collect();
        bounds.extend((0..=m).map(|i| 0.5 + 0.5 * i as f64 / m as f64));
        bounds[m] = 0.5;
        bounds[n] = 1.0;
        if bounds.windows(2).any(|w| !(w[1] > w[0])) {
            return Err(Error::config("grid boundaries are not strictly increasing"));
        }
        let widths = bounds.windows(2).map(|w| w[1] - w[0]).collect();
        Ok(Self {
            kind,
            bounds,
            widths,
            half: m,
        })
    }

    pub fn uniform(n: usize) -> Result<Self> {
        Self::new(GridKind::Uniform { n })
    }

    pub fn refined(n: usize, kappa: f64) -> Result<Self> {
        Self::new(GridKind::Refined { n, kappa })
    }

    pub fn kind(&self) -> GridKind {
        self.kind
    }

    pub fn len(&self) -> usize {
        self.widths.len()
    }

    pub fn is_empty(&self) -> bool {
        self.widths.is_empty()
    }

    pub fn bounds(&self) -> &[f64] {
        &self.bounds
    }

    pub fn widths(&self) -> &[f64] {
        &self.widths
    }

    /// Index of the first cell in `[1/2, 1]`.
    pub fn half_index(&self) -> usize {
        self.half
    }

    pub fn cell(&self, i: usize) -> (f64, f64) {
        (self.bounds[i], self.bounds[i + 1])
    }

    pub fn midpoints(&self) -> Vec<f64> {
        self.bounds.windows(2).map(|w| 0.5 * (w[0] + w[1])).collect()
    }

    /// Cell containing `x` (right-closed at 1).
    pub fn locate(&self, x: f64) -> usize {
        let k = self.bounds.partition_point(|&b| b <= x);
        k.saturating_sub(1).min(self.len() - 1)
    }

    /// Cell averages of `f` by 3-point Gauss-Legendre quadrature.
    pub fn cell_averages(&self, f: impl Fn(f64) -> f64) -> Vec<f64> {
        const NODE: f64 = 0.774_596_669_241_483_4; // sqrt(3/5)
        self.bounds
            .windows(2)
            .map(|w| {
                let c = 0.5 * (w[0] + w[1]);
                let h = 0.5 * (w[1] - w[0]);
                (5.0 * f(c - NODE * h) + 8.0 * f(c) + 5.0 * f(c + NODE * h)) / 18.0
            })
            .collect()
    }

    /// Stable textual descriptor, used for cache keys and manifests.
    pub fn descriptor(&self) -> String {
        match self.kind {
            GridKind::Uniform { n } => format!("uniform-{n}"),
            GridKind::Refined { n, kappa } => format!("refined-{n}-k{kappa}"),
        }
    }

    pub(crate) fn same_as(&self, other: &Grid) -> bool {
        self.kind == other.kind
    }
}
