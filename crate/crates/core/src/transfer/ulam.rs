use std::collections::HashMap;
use std::io::{Read, Write};
use std::sync::{Arc, Mutex};

use crate::error::{Error, Result};
use crate::lsv::left_inverse;

use super::grid::Grid;

/// Ulam matrix `P[i][j] = m(A_i ∩ T^{-1} A_j) / m(A_i)` for one parameter.
///
/// Each cell lies inside one branch, and a monotone branch maps an interval
/// onto an interval, so every row is a contiguous run of columns. Rows are
/// stored as `(first column, values)`.
#[derive(Debug, Clone)]
pub struct UlamMatrix {
    beta: f64,
    grid: Arc<Grid>,
    first_col: Vec<u32>,
    offsets: Vec<usize>,
    values: Vec<f64>,
}

/// Overlaps of `[a, b]` with consecutive preimage cells `[pre[j], pre[j+1]]`,
/// starting the scan at `*cursor`.
fn overlap_row(a: f64, b: f64, pre: &[f64], cursor: &mut usize, out: &mut Vec<f64>) -> usize {
    let last = pre.len() - 2;
    while *cursor < last && pre[*cursor + 1] <= a {
        *cursor += 1;
    }
    let first = *cursor;
    let width = b - a;
    let mut j = first;
    loop {
        let lo = a.max(pre[j]);
        let hi = b.min(pre[j + 1]);
        out.push(((hi - lo) / width).max(0.0));
        if j == last || pre[j + 1] >= b {
            break;
        }
        j += 1;
    }
    first
}

impl UlamMatrix {
    pub fn new(beta: f64, grid: Arc<Grid>) -> Result<Self> {
        if !(0.0..1.0).contains(&beta) {
            return Err(Error::Domain(format!("beta = {beta} is outside [0, 1)")));
        }
        let b = grid.bounds();
        let n = grid.len();
        let left_pre: Vec<f64> = b.iter().map(|&y| left_inverse(beta, y)).collect();
        let right_pre: Vec<f64> = b.iter().map(|&y| 0.5 * (y + 1.0)).collect();

        let mut first_col = Vec::with_capacity(n);
        let mut offsets = Vec::with_capacity(n + 1);
        let mut values = Vec::with_capacity(4 * n);
        offsets.push(0);
        let (mut lc, mut rc) = (0usize, 0usize);
        for i in 0..n {
            let (a, bb) = grid.cell(i);
            let start = values.len();
            let first = if i < grid.half_index() {
                overlap_row(a, bb, &left_pre, &mut lc, &mut values)
            } else {
                overlap_row(a, bb, &right_pre, &mut rc, &mut values)
            };
            // Renormalise away the rounding in the telescoped overlaps.
            let s: f64 = values[start..].iter().sum();
            if s != 1.0 {
                values[start..].iter_mut().for_each(|v| *v /= s);
            }
            first_col.push(first as u32);
            offsets.push(values.len());
        }
        Ok(Self {
            beta,
            grid,
            first_col,
            offsets,
            values,
        })
    }

    pub fn beta(&self) -> f64 {
        self.beta
    }

    pub fn grid(&self) -> &Arc<Grid> {
        &self.grid
    }

    pub fn len(&self) -> usize {
        self.first_col.len()
    }

    pub fn is_empty(&self) -> bool {
        self.first_col.is_empty()
    }

    pub fn nnz(&self) -> usize {
        self.values.len()
    }

    /// Row `i` as `(first column, entries)`.
    #[inline]
    pub fn row(&self, i: usize) -> (usize, &[f64]) {
        (
            self.first_col[i] as usize,
            &self.values[self.offsets[i]..self.offsets[i + 1]],
        )
    }

    pub fn get(&self, i: usize, j: usize) -> f64 {
        let (first, vals) = self.row(i);
        if j < first {
            0.0
        } else {
            vals.get(j - first).copied().unwrap_or(0.0)
        }
    }

    pub fn row_sum_defect(&self) -> f64 {
        (0..self.len())
            .map(|i| (self.row(i).1.iter().sum::<f64>() - 1.0).abs())
            .fold(0.0, f64::max)
    }

    /// `out[j] = sum_i mass[i] P[i][j]`: transports cell masses one step.
    pub fn push_mass(&self, mass: &[f64], out: &mut [f64]) {
        out.iter_mut().for_each(|v| *v = 0.0);
        for (i, &m) in mass.iter().enumerate() {
            if m == 0.0 {
                continue;
            }
            let (first, vals) = self.row(i);
            for (o, &p) in out[first..first + vals.len()].iter_mut().zip(vals) {
                *o += m * p;
            }
        }
    }

    /// `out[i] = sum_j P[i][j] g[j]`: the discrete Koopman operator `g ∘ T`.
    pub fn compose(&self, g: &[f64], out: &mut [f64]) {
        for (i, o) in out.iter_mut().enumerate() {
            let (first, vals) = self.row(i);
            *o = vals.iter().zip(&g[first..first + vals.len()]).map(|(p, v)| p * v).sum();
        }
    }

    pub fn to_dense(&self) -> Vec<f64> {
        let n = self.len();
        let mut dense = vec![0.0; n * n];
        for i in 0..n {
            let (first, vals) = self.row(i);
            dense[i * n + first..i * n + first + vals.len()].copy_from_slice(vals);
        }
        dense
    }

    /// Binary dump: `ULAM1`, the dimension as little-endian u64, then the
    /// dense matrix as little-endian f64 in row-major order.
    pub fn write_binary(&self, mut w: impl Write) -> std::io::Result<()> {
        w.write_all(MAGIC)?;
        w.write_all(&(self.len() as u64).to_le_bytes())?;
        for v in self.to_dense() {
            w.write_all(&v.to_le_bytes())?;
        }
        Ok(())
    }
}

const MAGIC: &[u8; 5] = b"ULAM1";

/// Reads a dump written by [`UlamMatrix::write_binary`] as a dense row-major matrix.
pub fn read_binary(mut r: impl Read) -> Result<(usize, Vec<f64>)> {
    let io = |e: std::io::Error| Error::Shape(format!("reading ULAM1 dump: {e}"));
    let mut magic = [0u8; 5];
    r.read_exact(&mut magic).map_err(io)?;
    if &magic != MAGIC {
        return Err(Error::Shape("bad magic, expected ULAM1".into()));
    }
    let mut word = [0u8; 8];
    r.read_exact(&mut word).map_err(io)?;
    let n = u64::from_le_bytes(word) as usize;
    let mut dense = Vec::with_capacity(n * n);
    for _ in 0..n * n {
        r.read_exact(&mut word).map_err(io)?;
        dense.push(f64::from_le_bytes(word));
    }
    Ok((n, dense))
}

/// Cache key: beta rounded to 1e-12.
pub fn beta_key(beta: f64) -> i64 {
    (beta * 1e12).round() as i64
}

/// File name for a cached dump of `(beta, grid)`.
pub fn cache_file_name(beta: f64, grid: &Grid) -> String {
    format!("ulam_{}_{}.bin", beta_key(beta), grid.descriptor())
}

/// Shared, thread-safe store of assembled matrices for one grid.
#[derive(Debug)]
pub struct UlamCache {
    grid: Arc<Grid>,
    capacity: usize,
    map: Mutex<HashMap<i64, Arc<UlamMatrix>>>,
}

impl UlamCache {
    pub fn new(grid: Grid) -> Self {
        Self::with_capacity(grid, 256)
    }

    /// Beyond `capacity` distinct parameters the store is flushed, which
    /// bounds memory for continuous laws.
    pub fn with_capacity(grid: Grid, capacity: usize) -> Self {
        Self {
            grid: Arc::new(grid),
            capacity: capacity.max(1),
            map: Mutex::new(HashMap::new()),
        }
    }

    pub fn grid(&self) -> &Arc<Grid> {
        &self.grid
    }

    pub fn get(&self, beta: f64) -> Result<Arc<UlamMatrix>> {
        let key = beta_key(beta);
        if let Some(m) = self.map.lock().expect("cache poisoned").get(&key) {
            return Ok(Arc::clone(m));
        }
        let m = Arc::new(UlamMatrix::new(beta, Arc::clone(&self.grid))?);
        let mut map = self.map.lock().expect("cache poisoned");
        if map.len() >= self.capacity {
            map.clear();
        }
        Ok(Arc::clone(map.entry(key).or_insert(m)))
    }
}
