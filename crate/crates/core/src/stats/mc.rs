//! Orbit sampling from the equivariant measures.

use rand::RngCore;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

use crate::lsv::left_branch;
use crate::rng::{replica_rng, unit_f64};
use crate::transfer::Grid;

/// Samples from a piecewise-constant density by inverse CDF: a cell is chosen
/// by its mass, then a uniform point inside it.
#[derive(Debug, Clone)]
pub struct DensitySampler {
    cdf: Vec<f64>,
    bounds: Vec<f64>,
}

impl DensitySampler {
    pub fn new(grid: &Grid, h: &[f64]) -> Self {
        let mut acc = 0.0;
        let mut cdf: Vec<f64> = h
            .iter()
            .zip(grid.widths())
            .map(|(v, w)| {
                acc += (v * w).max(0.0);
                acc
            })
            .collect();
        cdf.iter_mut().for_each(|c| *c /= acc);
        Self {
            cdf,
            bounds: grid.bounds().to_vec(),
        }
    }

    pub fn sample(&self, rng: &mut impl RngCore) -> f64 {
        let u = unit_f64(rng.next_u64());
        let i = self.cdf.partition_point(|&c| c <= u).min(self.cdf.len() - 1);
        let (a, b) = (self.bounds[i], self.bounds[i + 1]);
        a + (b - a) * unit_f64(rng.next_u64())
    }
}

const ULP_HALF: f64 = 1.0 / (1u64 << 53) as f64;
const ULP_ONE: f64 = 1.0 / (1u64 << 52) as f64;

/// One map step with fresh low-order bits after each doubling.
///
/// In floating point, `2x - 1` shifts out one mantissa bit per step and the
/// doubling branch collapses every orbit onto 0 within ~53 steps. The point
/// is treated as an interval of one ulp, and the bit shifted in at the bottom
/// is drawn at random, which is the exact conditional law under Lebesgue
/// measure on that interval.
#[inline]
pub fn step_refined(beta: f64, x: f64, rng: &mut impl RngCore) -> f64 {
    if x < 0.5 {
        left_branch(beta, x)
    } else {
        let y = 2.0 * x - 1.0;
        if y < 0.5 {
            y + unit_f64(rng.next_u64()) * ULP_ONE
        } else {
            y + (rng.next_u64() >> 63) as f64 * ULP_HALF
        }
    }
}

/// Runs `n_samples` independent orbits in parallel, sample `k` using the
/// stream `replica_rng(seed, k)`; results come back in sample order.
pub fn par_samples<T: Send>(n_samples: usize, seed: u64, f: impl Fn(&mut ChaCha8Rng) -> T + Sync) -> Vec<T> {
    (0..n_samples as u64)
        .into_par_iter()
        .map(|k| f(&mut replica_rng(seed, k)))
        .collect()
}

/// Mean and standard error of the mean.
pub fn mean_stderr(xs: &[f64]) -> (f64, f64) {
    let n = xs.len() as f64;
    if xs.is_empty() {
        return (0.0, 0.0);
    }
    let m = xs.iter().sum::<f64>() / n;
    if xs.len() < 2 {
        return (m, 0.0);
    }
    let v = xs.iter().map(|x| (x - m) * (x - m)).sum::<f64>() / (n - 1.0);
    (m, (v / n).sqrt())
}
