//! Ulam discretisation of the transfer-operator cocycle: grids, matrices,
//! equivariant densities and the normalised operators `L_w`.

mod density;
mod grid;
mod ulam;

pub use density::{
    equivariant_density, equivariant_density_cached, integrate, lp_norm, normalized_push, push_density, DensityTrack,
    DensityVector, PullbackReport,
};
pub use grid::{Grid, GridKind};
pub use ulam::{beta_key, cache_file_name, read_binary, UlamCache, UlamMatrix};

/// Cone diagnostics for a density on `[0, 1]`, checked cell by cell.
#[derive(Debug, Clone, Copy, PartialEq, serde::Serialize)]
pub struct ConeReport {
    /// Cells where the density increases.
    pub increasing_violations: usize,
    /// Cells where `x^{beta+1} h` decreases (right endpoints used for `x`).
    pub weighted_violations: usize,
    /// Smallest `a` with `int_0^x h <= a x^{1-beta} int_0^1 h` at all boundaries.
    pub a_fit: f64,
    pub min_on_y: f64,
    pub min_overall: f64,
}

pub fn cone_report(d: &DensityVector, beta: f64) -> ConeReport {
    let grid = d.grid();
    let h = d.values();
    let b = grid.bounds();
    let increasing_violations = h.windows(2).filter(|w| w[1] > w[0]).count();
    let weighted: Vec<f64> = (0..h.len()).map(|i| b[i + 1].powf(beta + 1.0) * h[i]).collect();
    let weighted_violations = weighted.windows(2).filter(|w| w[1] < w[0]).count();
    let total = d.mass();
    let mut acc = 0.0;
    let mut a_fit = 0.0f64;
    for i in 0..h.len() {
        acc += h[i] * grid.widths()[i];
        let x = b[i + 1];
        a_fit = a_fit.max(acc / (x.powf(1.0 - beta) * total));
    }
    let half = grid.half_index();
    ConeReport {
        increasing_violations,
        weighted_violations,
        a_fit,
        min_on_y: h[half..].iter().cloned().fold(f64::INFINITY, f64::min),
        min_overall: h.iter().cloned().fold(f64::INFINITY, f64::min),
    }
}
