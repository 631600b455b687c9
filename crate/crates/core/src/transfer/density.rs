use std::sync::Arc;

use crate::env::EnvironmentPath;
use crate::error::{Error, Result};

use super::grid::Grid;
use super::ulam::{UlamCache, UlamMatrix};

/// Piecewise-constant probability density on a grid.
#[derive(Debug, Clone, PartialEq)]
pub struct DensityVector {
    grid: Arc<Grid>,
    values: Vec<f64>,
}

impl DensityVector {
    pub fn new(grid: Arc<Grid>, values: Vec<f64>) -> Result<Self> {
        if values.len() != grid.len() {
            return Err(Error::Shape(format!(
                "{} values for {} cells",
                values.len(),
                grid.len()
            )));
        }
        if values.iter().any(|v| !(*v >= 0.0)) {
            return Err(Error::Domain("densities must be nonnegative".into()));
        }
        Ok(Self { grid, values })
    }

    pub fn uniform(grid: Arc<Grid>) -> Self {
        let values = vec![1.0; grid.len()];
        Self { grid, values }
    }

    pub fn grid(&self) -> &Arc<Grid> {
        &self.grid
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn into_values(self) -> Vec<f64> {
        self.values
    }

    pub fn mass(&self) -> f64 {
        self.values.iter().zip(self.grid.widths()).map(|(d, w)| d * w).sum()
    }

    /// Cell masses `d_i m(A_i)`.
    pub fn masses(&self) -> Vec<f64> {
        self.values.iter().zip(self.grid.widths()).map(|(d, w)| d * w).collect()
    }

    pub fn l1_distance(&self, other: &DensityVector) -> f64 {
        self.values
            .iter()
            .zip(&other.values)
            .zip(self.grid.widths())
            .map(|((a, b), w)| (a - b).abs() * w)
            .sum()
    }
}

fn masses_to_density(grid: &Grid, mass: &[f64]) -> Vec<f64> {
    mass.iter().zip(grid.widths()).map(|(m, w)| m / w).collect()
}

/// Pushes `d` through `matrices` in order (first matrix applied first).
pub fn push_density(matrices: &[&UlamMatrix], d: &DensityVector) -> Result<DensityVector> {
    let grid = d.grid();
    if let Some(bad) = matrices.iter().find(|m| !m.grid().same_as(grid)) {
        return Err(Error::Shape(format!(
            "matrix grid {} does not match density grid {}",
            bad.grid().descriptor(),
            grid.descriptor()
        )));
    }
    let mut mass = d.masses();
    let mut scratch = vec![0.0; mass.len()];
    for m in matrices {
        m.push_mass(&mass, &mut scratch);
        std::mem::swap(&mut mass, &mut scratch);
    }
    Ok(DensityVector {
        grid: Arc::clone(grid),
        values: masses_to_density(grid, &mass),
    })
}

/// `sum_i g_i d_i m(A_i)`.
pub fn integrate(d: &DensityVector, g: &[f64]) -> Result<f64> {
    if g.len() != d.values.len() {
        return Err(Error::Shape(format!("{} values for {} cells", g.len(), d.values.len())));
    }
    Ok(weighted_sum(d.values(), d.grid.widths(), g))
}

#[inline]
pub(crate) fn weighted_sum(h: &[f64], w: &[f64], g: &[f64]) -> f64 {
    h.iter().zip(w).zip(g).map(|((h, w), g)| h * w * g).sum()
}

/// `(sum_i |f_i|^s h_i m(A_i))^{1/s}`.
pub fn lp_norm(d: &DensityVector, f: &[f64], s: f64) -> Result<f64> {
    if f.len() != d.values.len() {
        return Err(Error::Shape("norm: length mismatch".into()));
    }
    Ok(lp_norm_raw(d.values(), d.grid.widths(), f, s))
}

pub(crate) fn lp_norm_raw(h: &[f64], w: &[f64], f: &[f64], s: f64) -> f64 {
    let sum: f64 = h
        .iter()
        .zip(w)
        .zip(f)
        .map(|((h, w), f)| {
            let a = f.abs();
            let p = if s == 1.0 {
                a
            } else if s == 2.0 {
                a * a
            } else {
                a.powf(s)
            };
            p * h * w
        })
        .sum();
    if s == 1.0 {
        sum
    } else {
        sum.powf(1.0 / s)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, serde::Serialize)]
pub struct PullbackReport {
    pub n_pull: usize,
    /// `|| h^(n) - h^(n/2) ||_{L^1(m)}`.
    pub half_increment: f64,
    /// `|| h^(n) - h^(n-1) ||_{L^1(m)}` at the same shift.
    pub last_increment: f64,
}

fn pullback(path: &EnvironmentPath, t: i64, n_pull: usize, cache: &UlamCache) -> Result<Vec<f64>> {
    path.require(t - n_pull as i64, t)?;
    let grid = cache.grid();
    let mut mass = grid.widths().to_vec();
    let mut scratch = vec![0.0; mass.len()];
    for k in (1..=n_pull as i64).rev() {
        cache.get(path.beta(t - k))?.push_mass(&mass, &mut scratch);
        std::mem::swap(&mut mass, &mut scratch);
    }
    Ok(masses_to_density(grid, &mass))
}

/// `h^(n_pull)_t = L_{t-1} ... L_{t-n_pull} 1`, the pullback approximation of
/// the equivariant density at shift `t`.
pub fn equivariant_density(
    path: &EnvironmentPath,
    t: i64,
    n_pull: usize,
    grid: &Grid,
) -> Result<(DensityVector, PullbackReport)> {
    let cache = UlamCache::new(grid.clone());
    equivariant_density_cached(path, t, n_pull, &cache)
}

pub fn equivariant_density_cached(
    path: &EnvironmentPath,
    t: i64,
    n_pull: usize,
    cache: &UlamCache,
) -> Result<(DensityVector, PullbackReport)> {
    let grid = Arc::clone(cache.grid());
    let h = DensityVector::new(Arc::clone(&grid), pullback(path, t, n_pull, cache)?)?;
    let half = DensityVector::new(Arc::clone(&grid), pullback(path, t, n_pull / 2, cache)?)?;
    let last = if n_pull > 0 {
        let prev = DensityVector::new(Arc::clone(&grid), pullback(path, t, n_pull - 1, cache)?)?;
        h.l1_distance(&prev)
    } else {
        0.0
    };
    let report = PullbackReport {
        n_pull,
        half_increment: h.l1_distance(&half),
        last_increment: last,
    };
    Ok((h, report))
}

/// Equivariant densities at consecutive shifts `t0 ..= t0 + len`, built by a
/// pullback at `t0` and then exact forward transport, so that
/// `push(L_t, h_t) = h_{t+1}` holds to the last bit.
#[derive(Debug, Clone)]
pub struct DensityTrack {
    grid: Arc<Grid>,
    t0: i64,
    densities: Vec<Vec<f64>>,
    report: PullbackReport,
}

impl DensityTrack {
    pub fn build(path: &EnvironmentPath, t0: i64, len: usize, n_pull: usize, cache: &UlamCache) -> Result<Self> {
        path.require(t0 - n_pull as i64, t0 + len as i64)?;
        let (h0, report) = equivariant_density_cached(path, t0, n_pull, cache)?;
        let grid = Arc::clone(cache.grid());
        let mut densities = Vec::with_capacity(len + 1);
        let mut mass = h0.masses();
        densities.push(h0.into_values());
        let mut scratch = vec![0.0; mass.len()];
        for k in 0..len as i64 {
            cache.get(path.beta(t0 + k))?.push_mass(&mass, &mut scratch);
            std::mem::swap(&mut mass, &mut scratch);
            densities.push(masses_to_density(&grid, &mass));
        }
        Ok(Self {
            grid,
            t0,
            densities,
            report,
        })
    }

    pub fn grid(&self) -> &Arc<Grid> {
        &self.grid
    }

    pub fn report(&self) -> PullbackReport {
        self.report
    }

    pub fn t_range(&self) -> (i64, i64) {
        (self.t0, self.t0 + self.densities.len() as i64 - 1)
    }

    pub fn covers(&self, lo: i64, hi: i64) -> Result<()> {
        let (a, b) = self.t_range();
        if lo < a || hi > b {
            return Err(Error::range(format!("densities cover [{a}, {b}], need [{lo}, {hi}]")));
        }
        Ok(())
    }

    /// Density values at shift `t`; panics outside the track.
    pub fn h(&self, t: i64) -> &[f64] {
        &self.densities[(t - self.t0) as usize]
    }

    pub fn density(&self, t: i64) -> DensityVector {
        DensityVector {
            grid: Arc::clone(&self.grid),
            values: self.h(t).to_vec(),
        }
    }

    /// `mu_t(g)`.
    pub fn mean(&self, t: i64, g: &[f64]) -> f64 {
        weighted_sum(self.h(t), self.grid.widths(), g)
    }

    pub fn norm(&self, t: i64, f: &[f64], s: f64) -> f64 {
        lp_norm_raw(self.h(t), self.grid.widths(), f, s)
    }

    /// `[g]_t = g - mu_t(g)`.
    pub fn center(&self, t: i64, g: &[f64]) -> Vec<f64> {
        let m = self.mean(t, g);
        g.iter().map(|v| v - m).collect()
    }

    /// `L_t g = L_t(g h_t) / h_{t+1}`, in place.
    pub fn apply_normalized(&self, m: &UlamMatrix, t: i64, g: &mut Vec<f64>, scratch: &mut Vec<f64>) -> Result<()> {
        let h = self.h(t);
        let h_next = self.h(t + 1);
        let w = self.grid.widths();
        for ((gi, hi), wi) in g.iter_mut().zip(h).zip(w) {
            *gi *= hi * wi;
        }
        m.push_mass(g, scratch);
        for (j, ((s, hj), wj)) in scratch.iter().zip(h_next).zip(w).enumerate() {
            if !(*hj > 0.0) {
                return Err(Error::SingularDensity { cell: j });
            }
            g[j] = s / (hj * wj);
        }
        Ok(())
    }

    /// `(g ∘ T_t)` on the cells at shift `t`, via the matrix at `t`.
    pub fn compose(&self, m: &UlamMatrix, g: &[f64]) -> Vec<f64> {
        let mut out = vec![0.0; g.len()];
        m.compose(g, &mut out);
        out
    }
}

/// `L_{sigma^t omega}^n g` on the grid.
pub fn normalized_push(
    path: &EnvironmentPath,
    t: i64,
    n: usize,
    g: &[f64],
    track: &DensityTrack,
    cache: &UlamCache,
) -> Result<Vec<f64>> {
    if g.len() != track.grid.len() {
        return Err(Error::Shape("function length does not match the grid".into()));
    }
    track.covers(t, t + n as i64)?;
    let mut f = g.to_vec();
    let mut scratch = vec![0.0; f.len()];
    for k in 0..n as i64 {
        let m = cache.get(path.beta(t + k))?;
        track.apply_normalized(&m, t + k, &mut f, &mut scratch)?;
    }
    Ok(f)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::env::{sample_path, ParameterLaw};
    use crate::transfer::grid::Grid;

    fn grid(n: usize) -> Arc<Grid> {
        Arc::new(Grid::uniform(n).unwrap())
    }

    #[test]
    fn push_identity_and_doubling_cases() {
        let g = grid(16);
        let d = DensityVector::uniform(Arc::clone(&g));
        assert_eq!(push_density(&[], &d).unwrap(), d);
        let m = UlamMatrix::new(0.0, Arc::clone(&g)).unwrap();
        let out = push_density(&[&m, &m, &m], &d).unwrap();
        assert!(out.values().iter().all(|&v| (v - 1.0).abs() < 1e-14));
        // 2 * 1_[0, 1/2] spreads over the whole interval in one doubling step
        let left: Vec<f64> = (0..16).map(|i| if i < 8 { 2.0 } else { 0.0 }).collect();
        let out = push_density(&[&m], &DensityVector::new(Arc::clone(&g), left).unwrap()).unwrap();
        assert!(out.values().iter().all(|&v| (v - 1.0).abs() < 1e-14));
    }

    #[test]
    fn push_rejects_grid_mismatch() {
        let m = UlamMatrix::new(0.2, grid(8)).unwrap();
        let d = DensityVector::uniform(grid(16));
        assert!(matches!(push_density(&[&m], &d), Err(Error::Shape(_))));
    }

    #[test]
    fn mass_is_conserved_over_long_compositions() {
        let path = sample_path(&ParameterLaw::IidUniform { lo: 0.0, hi: 0.9 }, 0, 10_000, 1).unwrap();
        let cache = UlamCache::with_capacity(Grid::refined(256, 2.0).unwrap(), 64);
        let mut d = DensityVector::uniform(Arc::clone(cache.grid()));
        let mut worst_step = 0.0f64;
        for t in 0..10_000 {
            let m = cache.get(path.beta(t)).unwrap();
            let before = d.mass();
            d = push_density(&[&m], &d).unwrap();
            worst_step = worst_step.max((d.mass() - before).abs());
        }
        assert!(worst_step <= 1e-10);
        assert!((d.mass() - 1.0).abs() <= 1e-7);
    }

    #[test]
    fn integrate_examples() {
        let g = grid(2);
        let d = DensityVector::uniform(Arc::clone(&g));
        assert_eq!(integrate(&d, &[3.0, 3.0]).unwrap(), 3.0);
        assert_eq!(integrate(&d, &g.midpoints()).unwrap(), 0.5);
        let g = grid(4096);
        let d = DensityVector::uniform(Arc::clone(&g));
        let x2: Vec<f64> = g.midpoints().iter().map(|x| x * x).collect();
        assert!((integrate(&d, &x2).unwrap() - 1.0 / 3.0).abs() < 1e-4);
        assert!(integrate(&d, &[1.0]).is_err());
    }

    #[test]
    fn doubling_density_is_uniform() {
        let path = crate::env::EnvironmentPath::constant(0.0, 200, 0);
        for n_pull in [0, 1, 100] {
            let (h, _) = equivariant_density(&path, 0, n_pull, &Grid::uniform(512).unwrap()).unwrap();
            assert!(h.values().iter().all(|&v| (v - 1.0).abs() < 1e-12));
        }
    }

    #[test]
    fn track_is_equivariant_bit_for_bit() {
        let path = sample_path(&ParameterLaw::fair_coin(0.2, 0.6), 100, 100, 9).unwrap();
        let cache = UlamCache::new(Grid::uniform(128).unwrap());
        let track = DensityTrack::build(&path, -10, 20, 50, &cache).unwrap();
        let next = push_density(&[&cache.get(path.beta(-10)).unwrap()], &track.density(-10)).unwrap();
        assert_eq!(next.values(), track.h(-9));
        // same as a direct pullback of length 51 at -9
        let direct = pullback(&path, -9, 51, &cache).unwrap();
        assert_eq!(direct.as_slice(), track.h(-9));
    }

    #[test]
    fn normalized_push_fixes_constants_and_preserves_means() {
        let path = sample_path(&ParameterLaw::fair_coin(0.1, 0.7), 200, 100, 4).unwrap();
        let cache = UlamCache::new(Grid::refined(256, 2.0).unwrap());
        let track = DensityTrack::build(&path, 0, 40, 200, &cache).unwrap();
        let ones = vec![1.0; 256];
        let out = normalized_push(&path, 0, 40, &ones, &track, &cache).unwrap();
        assert!(out.iter().all(|v| (v - 1.0).abs() < 1e-9));
        let g = cache.grid().cell_averages(|x| (5.0 * x).sin());
        for n in [1, 7, 40] {
            let out = normalized_push(&path, 0, n, &g, &track, &cache).unwrap();
            assert!((track.mean(n as i64, &out) - track.mean(0, &g)).abs() < 1e-9);
        }
    }

    #[test]
    fn doubling_annihilates_cosine() {
        let path = crate::env::EnvironmentPath::constant(0.0, 10, 10);
        let cache = UlamCache::new(Grid::uniform(1024).unwrap());
        let track = DensityTrack::build(&path, 0, 5, 5, &cache).unwrap();
        let g = cache.grid().cell_averages(|x| (2.0 * std::f64::consts::PI * x).cos());
        let out = normalized_push(&path, 0, 1, &g, &track, &cache).unwrap();
        assert!(out.iter().all(|v| v.abs() < 1.0 / 1024.0));
    }

    #[test]
    fn singular_density_is_reported() {
        let path = crate::env::EnvironmentPath::constant(0.3, 0, 4);
        let cache = UlamCache::new(Grid::uniform(8).unwrap());
        let mut track = DensityTrack::build(&path, 0, 2, 0, &cache).unwrap();
        track.densities[1][3] = 0.0;
        let err = normalized_push(&path, 0, 1, &[1.0; 8], &track, &cache).unwrap_err();
        assert_eq!(err, Error::SingularDensity { cell: 3 });
    }
}
