//! The driving process: parameter laws, sampled environment windows, counting
//! statistics along a path, the regularity horizon, and mixing bounds.

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::rng;

const PROB_TOL: f64 = 1e-12;
const STATIONARY_TOL: f64 = 1e-10;

/// Law of the parameter sequence `beta(sigma^t omega)`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case")]
pub enum ParameterLaw {
    Constant {
        beta: f64,
    },
    IidDiscrete {
        values: Vec<f64>,
        probs: Vec<f64>,
    },
    IidUniform {
        lo: f64,
        hi: f64,
    },
    FiniteMarkov {
        states: Vec<f64>,
        transition: Vec<Vec<f64>>,
        initial: Vec<f64>,
    },
    /// A fixed sequence; `sequence[origin]` sits at time 0. Outside the
    /// supplied range the nearest endpoint value is repeated.
    Explicit {
        sequence: Vec<f64>,
        #[serde(default)]
        origin: usize,
    },
}

fn check_beta(b: f64) -> Result<()> {
    if (0.0..1.0).contains(&b) {
        Ok(())
    } else {
        Err(Error::config(format!("beta = {b} is outside [0, 1)")))
    }
}

fn check_prob_vector(p: &[f64], what: &str) -> Result<()> {
    if p.iter().any(|&x| !(x >= 0.0) || x > 1.0) {
        return Err(Error::config(format!("{what} has entries outside [0, 1]")));
    }
    let s: f64 = p.iter().sum();
    if (s - 1.0).abs() > PROB_TOL {
        return Err(Error::config(format!("{what} sums to {s}, not 1")));
    }
    Ok(())
}

impl ParameterLaw {
    pub fn constant(beta: f64) -> Self {
        ParameterLaw::Constant { beta }
    }

    /// Equal-weight i.i.d. law on the given atoms.
    pub fn fair_coin(a: f64, b: f64) -> Self {
        ParameterLaw::IidDiscrete {
            values: vec![a, b],
            probs: vec![0.5, 0.5],
        }
    }

    pub fn validate(&self) -> Result<()> {
        match self {
            ParameterLaw::Constant { beta } => check_beta(*beta),
            ParameterLaw::IidDiscrete { values, probs } => {
                if values.is_empty() || values.len() != probs.len() {
                    return Err(Error::config("iid-discrete needs matching, nonempty values/probs"));
                }
                values.iter().try_for_each(|&b| check_beta(b))?;
                check_prob_vector(probs, "iid-discrete probs")
            }
            ParameterLaw::IidUniform { lo, hi } => {
                check_beta(*lo)?;
                check_beta(*hi)?;
                if !(lo < hi) {
                    return Err(Error::config(format!("iid-uniform needs lo < hi, got [{lo}, {hi}]")));
                }
                Ok(())
            }
            ParameterLaw::FiniteMarkov {
                states,
                transition,
                initial,
            } => {
                let k = states.len();
                if k == 0 || transition.len() != k || initial.len() != k {
                    return Err(Error::config("finite-markov dimensions disagree"));
                }
                states.iter().try_for_each(|&b| check_beta(b))?;
                for (i, row) in transition.iter().enumerate() {
                    if row.len() != k {
                        return Err(Error::config(format!("transition row {i} has wrong length")));
                    }
                    check_prob_vector(row, &format!("transition row {i}"))?;
                }
                check_prob_vector(initial, "finite-markov initial")?;
                for j in 0..k {
                    let pj: f64 = (0..k).map(|i| initial[i] * transition[i][j]).sum();
                    if (pj - initial[j]).abs() > STATIONARY_TOL {
                        return Err(Error::config(format!(
                            "initial distribution is not stationary (state {j}: {} vs {pj})",
                            initial[j]
                        )));
                    }
                }
                Ok(())
            }
            ParameterLaw::Explicit { sequence, origin } => {
                if sequence.is_empty() || *origin >= sequence.len() {
                    return Err(Error::config("explicit sequence empty or origin out of range"));
                }
                sequence.iter().try_for_each(|&b| check_beta(b))
            }
        }
    }

    /// Essential supremum of beta under the law.
    pub fn ess_sup(&self) -> f64 {
        self.support_bounds().1
    }

    /// Essential infimum of beta under the law.
    pub fn ess_inf(&self) -> f64 {
        self.support_bounds().0
    }

    fn support_bounds(&self) -> (f64, f64) {
        let fold = |it: &mut dyn Iterator<Item = f64>| {
            it.fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), b| (lo.min(b), hi.max(b)))
        };
        match self {
            ParameterLaw::Constant { beta } => (*beta, *beta),
            ParameterLaw::IidDiscrete { values, probs } => {
                fold(&mut values.iter().zip(probs).filter(|(_, &p)| p > 0.0).map(|(&v, _)| v))
            }
            ParameterLaw::IidUniform { lo, hi } => (*lo, *hi),
            ParameterLaw::FiniteMarkov { states, initial, .. } => {
                fold(&mut states.iter().zip(initial).filter(|(_, &p)| p > 0.0).map(|(&v, _)| v))
            }
            ParameterLaw::Explicit { sequence, .. } => fold(&mut sequence.iter().copied()),
        }
    }

    /// True for laws under which the beta sequence is i.i.d. (constants included).
    pub fn is_iid(&self) -> bool {
        matches!(
            self,
            ParameterLaw::Constant { .. } | ParameterLaw::IidDiscrete { .. } | ParameterLaw::IidUniform { .. }
        )
    }

    fn draw_iid(&self, u: f64) -> f64 {
        match self {
            ParameterLaw::Constant { beta } => *beta,
            ParameterLaw::IidDiscrete { values, probs } => values[pick(probs, u)],
            ParameterLaw::IidUniform { lo, hi } => lo + (hi - lo) * u,
            _ => unreachable!("draw_iid on a non-iid law"),
        }
    }
}

/// Index `k` with `cum[k-1] <= u < cum[k]`; clamps to the last positive atom.
fn pick(probs: &[f64], u: f64) -> usize {
    let mut acc = 0.0;
    let mut last = 0;
    for (k, &p) in probs.iter().enumerate() {
        if p > 0.0 {
            last = k;
            acc += p;
            if u < acc {
                return k;
            }
        }
    }
    last
}

/// A finite two-sided window of the environment, `t = -n_past ..= n_future`.
#[derive(Debug, Clone, PartialEq)]
pub struct EnvironmentPath {
    betas: Vec<f64>,
    n_past: usize,
    seed: u64,
}

impl EnvironmentPath {
    /// Builds a path directly from its window values; `betas[n_past]` is time 0.
    pub fn from_window(betas: Vec<f64>, n_past: usize, seed: u64) -> Result<Self> {
        if n_past >= betas.len() {
            return Err(Error::range("origin outside the window"));
        }
        betas.iter().try_for_each(|&b| check_beta(b))?;
        Ok(Self { betas, n_past, seed })
    }

    /// Constant path of the given window, convenient for deterministic runs.
    pub fn constant(beta: f64, n_past: usize, n_future: usize) -> Self {
        Self {
            betas: vec![beta; n_past + n_future + 1],
            n_past,
            seed: 0,
        }
    }

    pub fn n_past(&self) -> usize {
        self.n_past
    }

    pub fn n_future(&self) -> usize {
        self.betas.len() - 1 - self.n_past
    }

    pub fn seed(&self) -> u64 {
        self.seed
    }

    pub fn t_min(&self) -> i64 {
        -(self.n_past as i64)
    }

    pub fn t_max(&self) -> i64 {
        self.n_future() as i64
    }

    pub fn contains(&self, t: i64) -> bool {
        t >= self.t_min() && t <= self.t_max()
    }

    /// `beta(sigma^t omega)`; panics outside the window.
    #[inline]
    pub fn beta(&self, t: i64) -> f64 {
        self.betas[(t + self.n_past as i64) as usize]
    }

    pub fn try_beta(&self, t: i64) -> Result<f64> {
        if self.contains(t) {
            Ok(self.beta(t))
        } else {
            Err(Error::range(format!(
                "time {t} outside window [{}, {}]",
                self.t_min(),
                self.t_max()
            )))
        }
    }

    /// Errors unless every time in `lo..=hi` is inside the window.
    pub fn require(&self, lo: i64, hi: i64) -> Result<()> {
        if lo < self.t_min() || hi > self.t_max() {
            return Err(Error::range(format!(
                "need times [{lo}, {hi}] but window is [{}, {}]",
                self.t_min(),
                self.t_max()
            )));
        }
        Ok(())
    }

    /// Window values ordered by time.
    pub fn window(&self) -> &[f64] {
        &self.betas
    }

    /// `(t, beta)` pairs ordered by time.
    pub fn iter(&self) -> impl Iterator<Item = (i64, f64)> + '_ {
        let t0 = self.t_min();
        self.betas.iter().enumerate().map(move |(k, &b)| (t0 + k as i64, b))
    }

    /// True when every value in `lo..=hi` equals `beta(lo)` bit for bit.
    pub fn is_constant_on(&self, lo: i64, hi: i64) -> bool {
        let b = self.beta(lo).to_bits();
        (lo..=hi).all(|t| self.beta(t).to_bits() == b)
    }
}

/// Draws an environment window.
///
/// i.i.d. laws use a counter-based draw per time index, so entries do not
/// depend on the window size. Markov laws draw the origin from the stationary
/// distribution, run forward with the transition matrix and backward with the
/// time reversal `pi_i P_ij / pi_j`; the two-sided window is therefore a
/// stationary stretch of the chain.
pub fn sample_path(law: &ParameterLaw, n_past: usize, n_future: usize, seed: u64) -> Result<EnvironmentPath> {
    law.validate()?;
    let len = n_past + n_future + 1;
    let betas = match law {
        ParameterLaw::Constant { beta } => vec![*beta; len],
        ParameterLaw::IidDiscrete { .. } | ParameterLaw::IidUniform { .. } => (0..len)
            .map(|k| law.draw_iid(rng::counter_uniform(seed, k as i64 - n_past as i64)))
            .collect(),
        ParameterLaw::FiniteMarkov {
            states,
            transition,
            initial,
        } => {
            let k = states.len();
            let reversed: Vec<Vec<f64>> = (0..k)
                .map(|j| {
                    (0..k)
                        .map(|i| {
                            if initial[j] > 0.0 {
                                initial[i] * transition[i][j] / initial[j]
                            } else {
                                0.0
                            }
                        })
                        .collect()
                })
                .collect();
            let mut idx = vec![0usize; len];
            let mut origin_rng = rng::replica_rng(seed, 0);
            idx[n_past] = pick(initial, origin_rng.random::<f64>());
            let mut fwd = rng::replica_rng(seed, 1);
            for pos in n_past + 1..len {
                idx[pos] = pick(&transition[idx[pos - 1]], fwd.random::<f64>());
            }
            let mut bwd = rng::replica_rng(seed, 2);
            for pos in (0..n_past).rev() {
                idx[pos] = pick(&reversed[idx[pos + 1]], bwd.random::<f64>());
            }
            idx.into_iter().map(|i| states[i]).collect()
        }
        ParameterLaw::Explicit { sequence, origin } => (0..len)
            .map(|k| {
                let t = k as i64 - n_past as i64;
                let pos = (*origin as i64 + t).clamp(0, sequence.len() as i64 - 1);
                sequence[pos as usize]
            })
            .collect(),
    };
    Ok(EnvironmentPath { betas, n_past, seed })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Direction {
    Forward,
    Backward,
}

/// `S_n`: number of `0 <= j < n` with `beta(sigma^{+-j} omega) <= gamma`.
pub fn count_below(path: &EnvironmentPath, gamma: f64, n: usize, direction: Direction) -> Result<usize> {
    if n == 0 {
        return Ok(0);
    }
    let last = n as i64 - 1;
    match direction {
        Direction::Forward => path.require(0, last)?,
        Direction::Backward => path.require(-last, 0)?,
    }
    let sign = if direction == Direction::Forward { 1 } else { -1 };
    Ok((0..n as i64).filter(|&j| path.beta(sign * j) <= gamma).count())
}

/// `P(beta <= gamma)` under the stationary law. A zero value violates the
/// positivity assumption; use [`require_positive_b0`] where that matters.
pub fn b0_of(law: &ParameterLaw, gamma: f64) -> Result<f64> {
    law.validate()?;
    if !(gamma > 0.0 && gamma < 1.0) {
        return Err(Error::config(format!("gamma = {gamma} must lie in (0, 1)")));
    }
    let mass = |vals: &[f64], probs: &[f64]| -> f64 {
        vals.iter()
            .zip(probs)
            .filter(|(&b, _)| b <= gamma)
            .map(|(_, &p)| p)
            .sum()
    };
    Ok(match law {
        ParameterLaw::Constant { beta } => {
            if *beta <= gamma {
                1.0
            } else {
                0.0
            }
        }
        ParameterLaw::IidDiscrete { values, probs } => mass(values, probs),
        ParameterLaw::IidUniform { lo, hi } => ((gamma - lo) / (hi - lo)).clamp(0.0, 1.0),
        ParameterLaw::FiniteMarkov { states, initial, .. } => mass(states, initial),
        ParameterLaw::Explicit { sequence, .. } => {
            sequence.iter().filter(|&&b| b <= gamma).count() as f64 / sequence.len() as f64
        }
    })
}

pub fn require_positive_b0(b0: f64) -> Result<f64> {
    if b0 > 0.0 {
        Ok(b0)
    } else {
        Err(Error::config(
            "b0 = P(beta <= gamma) is zero; choose gamma above ess inf beta",
        ))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub struct NEps {
    pub value: usize,
    /// The violation set reaches the horizon, so the true value may be larger.
    pub saturated: bool,
}

/// Finite-horizon `N_eps(omega)`: the largest `n <= horizon`, over both
/// directions, with `S_n / n` outside `[b0 (1 - eps), b0 (1 + eps)]`.
pub fn n_eps(path: &EnvironmentPath, gamma: f64, b0: f64, eps: f64, horizon: usize) -> Result<NEps> {
    if !(eps > 0.0 && eps < 0.5) {
        return Err(Error::config(format!("epsilon = {eps} must lie in (0, 1/2)")));
    }
    if horizon == 0 {
        return Ok(NEps {
            value: 0,
            saturated: true,
        });
    }
    path.require(-(horizon as i64 - 1), horizon as i64 - 1)?;
    let (lo, hi) = (b0 * (1.0 - eps), b0 * (1.0 + eps));
    let mut worst = 0;
    for sign in [1i64, -1] {
        let mut count = 0usize;
        for n in 1..=horizon {
            if path.beta(sign * (n as i64 - 1)) <= gamma {
                count += 1;
            }
            let ratio = count as f64 / n as f64;
            if (ratio < lo || ratio > hi) && n > worst {
                worst = n;
            }
        }
    }
    Ok(NEps {
        value: worst,
        saturated: worst == horizon,
    })
}

/// Upper bound on the alpha-mixing coefficient at lag `n`.
///
/// i.i.d. and constant laws give 0 for `n >= 1`. For a stationary finite
/// chain the bound is `max_i || P^n(i, .) - pi ||_TV`.
pub fn alpha_bound(law: &ParameterLaw, n: usize) -> Result<f64> {
    law.validate()?;
    match law {
        ParameterLaw::Constant { .. } => Ok(0.0),
        ParameterLaw::IidDiscrete { .. } | ParameterLaw::IidUniform { .. } => {
            let degenerate = law.ess_inf() == law.ess_sup();
            Ok(if n == 0 && !degenerate { 0.25 } else { 0.0 })
        }
        ParameterLaw::FiniteMarkov {
            transition, initial, ..
        } => {
            let k = initial.len();
            let mut power = identity(k);
            for _ in 0..n {
                power = matmul(&power, transition);
            }
            Ok((0..k)
                .map(|i| 0.5 * (0..k).map(|j| (power[i][j] - initial[j]).abs()).sum::<f64>())
                .fold(0.0, f64::max))
        }
        ParameterLaw::Explicit { .. } => Err(Error::Capability(
            "explicit sequences carry no mixing bound; supply a profile".into(),
        )),
    }
}

fn identity(k: usize) -> Vec<Vec<f64>> {
    (0..k)
        .map(|i| (0..k).map(|j| if i == j { 1.0 } else { 0.0 }).collect())
        .collect()
}

fn matmul(a: &[Vec<f64>], b: &[Vec<f64>]) -> Vec<Vec<f64>> {
    let k = a.len();
    (0..k)
        .map(|i| (0..k).map(|j| (0..k).map(|l| a[i][l] * b[l][j]).sum()).collect())
        .collect()
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum MixingProvenance {
    ExactIid,
    MarkovTvBound,
    UserSupplied,
}

/// Tabulated `n -> alpha(n)` bound, clipped to `[0, 1/4]` (every alpha
/// coefficient is at most 1/4) and made nonincreasing.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct MixingProfile {
    pub bounds: Vec<f64>,
    pub provenance: MixingProvenance,
}

impl MixingProfile {
    pub fn from_law(law: &ParameterLaw, n_max: usize) -> Result<Self> {
        let provenance = if law.is_iid() {
            MixingProvenance::ExactIid
        } else {
            MixingProvenance::MarkovTvBound
        };
        let raw = (0..=n_max).map(|n| alpha_bound(law, n)).collect::<Result<Vec<_>>>()?;
        Ok(Self::from_raw(raw, provenance))
    }

    pub fn user_supplied(bounds: Vec<f64>) -> Result<Self> {
        if bounds.iter().any(|b| !(*b >= 0.0)) {
            return Err(Error::config("mixing bounds must be nonnegative"));
        }
        Ok(Self::from_raw(bounds, MixingProvenance::UserSupplied))
    }

    fn from_raw(raw: Vec<f64>, provenance: MixingProvenance) -> Self {
        let mut running = 0.25f64;
        let bounds = raw
            .into_iter()
            .map(|b| {
                running = running.min(b);
                running
            })
            .collect();
        Self { bounds, provenance }
    }

    pub fn at(&self, n: usize) -> Option<f64> {
        self.bounds.get(n).copied()
    }
}
