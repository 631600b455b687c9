use std::sync::Arc;

use crate::env::EnvironmentPath;
use crate::error::Result;
use crate::transfer::{DensityTrack, Grid, UlamCache};

use super::mc::DensitySampler;
use super::observable::{FiberValues, Observable};

/// A path together with its matrices and equivariant densities on
/// `t0..=t0 + len`: everything the quenched statistics need.
#[derive(Debug, Clone)]
pub struct Cocycle {
    path: EnvironmentPath,
    cache: Arc<UlamCache>,
    track: DensityTrack,
}

impl Cocycle {
    pub fn new(path: EnvironmentPath, grid: Grid, t0: i64, len: usize, n_pull: usize) -> Result<Self> {
        Self::with_cache(path, Arc::new(UlamCache::new(grid)), t0, len, n_pull)
    }

    pub fn with_cache(
        path: EnvironmentPath,
        cache: Arc<UlamCache>,
        t0: i64,
        len: usize,
        n_pull: usize,
    ) -> Result<Self> {
        let track = DensityTrack::build(&path, t0, len, n_pull, &cache)?;
        Ok(Self { path, cache, track })
    }

    pub fn path(&self) -> &EnvironmentPath {
        &self.path
    }

    pub fn cache(&self) -> &Arc<UlamCache> {
        &self.cache
    }

    pub fn track(&self) -> &DensityTrack {
        &self.track
    }

    pub fn grid(&self) -> &Arc<Grid> {
        self.track.grid()
    }

    pub fn t_range(&self) -> (i64, i64) {
        self.track.t_range()
    }

    pub fn fibers(&self, obs: &Observable, t_lo: i64, t_hi: i64) -> Result<FiberValues> {
        obs.on_fibers(&self.path, &self.track, t_lo, t_hi)
    }

    /// `g <- L_t g`, the normalised operator at shift `t`.
    pub fn push(&self, t: i64, g: &mut Vec<f64>, scratch: &mut Vec<f64>) -> Result<()> {
        let m = self.cache.get(self.path.beta(t))?;
        self.track.apply_normalized(&m, t, g, scratch)
    }

    /// `g ∘ T_t` on the cells at shift `t`.
    pub fn compose(&self, t: i64, g: &[f64]) -> Result<Vec<f64>> {
        let m = self.cache.get(self.path.beta(t))?;
        Ok(self.track.compose(&m, g))
    }

    pub fn mean(&self, t: i64, g: &[f64]) -> f64 {
        self.track.mean(t, g)
    }

    /// Inverse-CDF sampler for `mu_t`.
    pub fn sampler(&self, t: i64) -> DensitySampler {
        DensitySampler::new(self.grid(), self.track.h(t))
    }

    pub(crate) fn require(&self, t_lo: i64, t_hi: i64) -> Result<()> {
        self.track.covers(t_lo, t_hi)
    }
}
