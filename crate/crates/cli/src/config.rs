//! Versioned TOML experiment configuration.

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use lsv_core::fit::log_spaced;
use lsv_core::stats::Base;
use lsv_core::{GridKind, Observable, ParameterLaw};

use crate::CliError;

pub const SCHEMA_VERSION: u32 = 1;

/// A list of `n` values: either explicit, or `lo..=hi` spaced linearly by
/// `step` or logarithmically with `per_decade` points.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum NSpec {
    List(Vec<u64>),
    Range {
        lo: u64,
        hi: u64,
        #[serde(default)]
        step: Option<u64>,
        #[serde(default)]
        per_decade: Option<usize>,
    },
}

impl NSpec {
    pub fn values(&self) -> Result<Vec<u64>, CliError> {
        let out = match self {
            NSpec::List(v) => v.clone(),
            NSpec::Range {
                lo,
                hi,
                step,
                per_decade,
            } => {
                if lo > hi {
                    return Err(CliError::config(format!("range lo = {lo} exceeds hi = {hi}")));
                }
                match (step, per_decade) {
                    (Some(s), None) if *s > 0 => (*lo..=*hi).step_by(*s as usize).collect(),
                    (None, Some(k)) if *lo >= 1 && *k > 0 => log_spaced(*lo, *hi, *k),
                    (None, None) => (*lo..=*hi).collect(),
                    _ => {
                        return Err(CliError::config(
                            "range needs one of step > 0 or per_decade > 0 with lo >= 1",
                        ))
                    }
                }
            }
        };
        if out.is_empty() || out.windows(2).any(|w| w[1] <= w[0]) {
            return Err(CliError::config("n values must be nonempty and strictly increasing"));
        }
        Ok(out)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Mc {
    #[serde(default = "d_samples")]
    pub n_samples: usize,
    #[serde(default = "d_seed")]
    pub seed: u64,
}

impl Default for Mc {
    fn default() -> Self {
        Self {
            n_samples: d_samples(),
            seed: d_seed(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct EnvSection {
    #[serde(default = "d_100")]
    pub n_past: usize,
    #[serde(default = "d_1000")]
    pub n_future: usize,
    /// Horizon for `N_eps`; at most `min(n_past, n_future) + 1`.
    #[serde(default = "d_100")]
    pub horizon: usize,
}

impl Default for EnvSection {
    fn default() -> Self {
        Self {
            n_past: 100,
            n_future: 1000,
            horizon: 100,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct OrbitSection {
    #[serde(default = "d_x0")]
    pub x0: f64,
    #[serde(default = "d_1000")]
    pub n: usize,
    #[serde(default)]
    pub t: i64,
}

impl Default for OrbitSection {
    fn default() -> Self {
        Self {
            x0: d_x0(),
            n: 1000,
            t: 0,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ReturnSection {
    #[serde(default)]
    pub t_lo: i64,
    #[serde(default)]
    pub t_hi: i64,
    #[serde(default = "d_500")]
    pub depth: usize,
    #[serde(default = "d_fit_tails")]
    pub fit: (f64, f64),
}

impl Default for ReturnSection {
    fn default() -> Self {
        Self {
            t_lo: 0,
            t_hi: 0,
            depth: 500,
            fit: d_fit_tails(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize, Default)]
#[serde(deny_unknown_fields)]
pub struct UlamSection {
    /// Defaults to `beta` at time 0 of the sampled path.
    pub beta: Option<f64>,
    /// Overrides the grid size for the dense dump.
    pub n: Option<usize>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize, Default)]
#[serde(deny_unknown_fields)]
pub struct DensitySection {
    #[serde(default)]
    pub t: i64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DecaySection {
    #[serde(default)]
    pub s: i64,
    #[serde(default)]
    pub i: i64,
    #[serde(default = "d_lags")]
    pub lags: NSpec,
    #[serde(default = "d_norms")]
    pub norms: Vec<f64>,
    #[serde(default = "d_fit")]
    pub fit: (f64, f64),
    /// Defaults to the main observable.
    pub g2: Option<Observable>,
}

impl Default for DecaySection {
    fn default() -> Self {
        Self {
            s: 0,
            i: 0,
            lags: d_lags(),
            norms: d_norms(),
            fit: d_fit(),
            g2: None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CorrSection {
    #[serde(default)]
    pub t: i64,
    #[serde(default = "d_lags")]
    pub lags: NSpec,
    #[serde(default = "d_fit")]
    pub fit: (f64, f64),
    /// Defaults to the main observable.
    pub psi: Option<Observable>,
    /// Also estimate by Monte Carlo (`mc` section).
    #[serde(default = "d_true")]
    pub monte_carlo: bool,
}

impl Default for CorrSection {
    fn default() -> Self {
        Self {
            t: 0,
            lags: d_lags(),
            fit: d_fit(),
            psi: None,
            monte_carlo: true,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SumsSection {
    #[serde(default)]
    pub t: i64,
    #[serde(default = "d_ns")]
    pub ns: NSpec,
    pub fit: Option<(f64, f64)>,
    /// Moment order for `moments`.
    #[serde(default = "d_two")]
    pub s: f64,
    /// Also estimate by Monte Carlo (`variance` only).
    #[serde(default)]
    pub monte_carlo: bool,
}

impl Default for SumsSection {
    fn default() -> Self {
        Self {
            t: 0,
            ns: d_ns(),
            fit: None,
            s: 2.0,
            monte_carlo: false,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MartingaleSection {
    #[serde(default)]
    pub t: i64,
    #[serde(default = "d_50")]
    pub n: usize,
    #[serde(default = "d_defect")]
    pub max_defect: f64,
    /// Defaults to `x`, `cos 2 pi x`, `|x - 1/2|`.
    pub tests: Option<Vec<Base>>,
}

impl Default for MartingaleSection {
    fn default() -> Self {
        Self {
            t: 0,
            n: 50,
            max_defect: d_defect(),
            tests: None,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum TailKind {
    Return,
    Geometric,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CouplingSection {
    #[serde(default = "d_theta")]
    pub theta: f64,
    #[serde(default = "d_500")]
    pub horizon: usize,
    /// Defaults to `mc.n_samples`.
    pub n_samples: Option<usize>,
    #[serde(default = "d_tail")]
    pub tail: TailKind,
    /// Ratio of the geometric shim.
    #[serde(default = "d_q")]
    pub q: f64,
    /// Overrides `C_u = 2 exp(K2)` from the induced constants.
    pub c_u: Option<f64>,
    /// Depth of the induced-branch scan.
    #[serde(default = "d_50")]
    pub depth: usize,
    #[serde(default)]
    pub t: i64,
    #[serde(default = "d_fit_coupling")]
    pub fit: (f64, f64),
}

impl Default for CouplingSection {
    fn default() -> Self {
        Self {
            theta: d_theta(),
            horizon: 500,
            n_samples: None,
            tail: d_tail(),
            q: d_q(),
            c_u: None,
            depth: 50,
            t: 0,
            fit: d_fit_coupling(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct AnnealedSection {
    #[serde(default = "d_paths")]
    pub n_paths: usize,
    #[serde(default = "d_lags")]
    pub lags: NSpec,
    #[serde(default = "d_n_max")]
    pub n_max: u64,
    /// Inner estimator per path.
    #[serde(default)]
    pub monte_carlo: bool,
}

impl Default for AnnealedSection {
    fn default() -> Self {
        Self {
            n_paths: d_paths(),
            lags: d_lags(),
            n_max: d_n_max(),
            monte_carlo: false,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub schema_version: u32,
    pub law: ParameterLaw,
    pub gamma: f64,
    #[serde(default = "d_eps")]
    pub epsilon: f64,
    pub grid: GridKind,
    #[serde(default = "d_1000")]
    pub n_pull: usize,
    #[serde(default = "d_observable")]
    pub observable: Observable,
    #[serde(default)]
    pub mc: Mc,
    pub output_dir: Option<PathBuf>,
    #[serde(default)]
    pub env: EnvSection,
    #[serde(default)]
    pub orbit: OrbitSection,
    #[serde(default)]
    pub return_tails: ReturnSection,
    #[serde(default)]
    pub ulam: UlamSection,
    #[serde(default)]
    pub density: DensitySection,
    #[serde(default)]
    pub decay: DecaySection,
    #[serde(default)]
    pub corr: CorrSection,
    #[serde(default)]
    pub variance: SumsSection,
    #[serde(default)]
    pub clt: SumsSection,
    #[serde(default)]
    pub moments: SumsSection,
    #[serde(default)]
    pub martingale: MartingaleSection,
    #[serde(default)]
    pub coupling: CouplingSection,
    #[serde(default)]
    pub annealed: AnnealedSection,
}

/// A parsed config with the bytes it was read from.
#[derive(Debug, Clone)]
pub struct Loaded {
    pub config: ExperimentConfig,
    pub path: PathBuf,
    pub text: String,
}

pub fn load(path: &Path) -> anyhow::Result<Loaded> {
    let text =
        std::fs::read_to_string(path).map_err(|e| CliError::config(format!("reading {}: {e}", path.display())))?;
    let config = parse(&text)?;
    Ok(Loaded {
        config,
        path: path.to_path_buf(),
        text,
    })
}

pub fn parse(text: &str) -> Result<ExperimentConfig, CliError> {
    // Check the version first so that a newer schema reports as such rather
    // than as an unknown field.
    let raw: toml::Table = toml::from_str(text).map_err(|e| CliError::config(e.to_string()))?;
    match raw.get("schema_version").and_then(|v| v.as_integer()) {
        Some(v) if v == SCHEMA_VERSION as i64 => {}
        Some(v) => {
            return Err(CliError::config(format!(
                "schema_version {v} is not supported (expected {SCHEMA_VERSION})"
            )))
        }
        None => return Err(CliError::config("missing integer schema_version")),
    }
    toml::from_str(text).map_err(|e| CliError::config(e.to_string()))
}

/// Which of the hard invariants fail; an empty list means the config is usable.
pub fn hard_errors(c: &ExperimentConfig) -> Vec<String> {
    let mut out = Vec::new();
    if let Err(e) = c.law.validate() {
        out.push(e.to_string());
    }
    if !(c.gamma > 0.0 && c.gamma < 1.0) {
        out.push(format!("range error: gamma = {} must lie in (0, 1)", c.gamma));
    }
    if !(c.epsilon > 0.0 && c.epsilon < 0.5) {
        out.push(format!("range error: epsilon = {} must lie in (0, 1/2)", c.epsilon));
    }
    if let Err(e) = lsv_core::Grid::new(c.grid) {
        out.push(e.to_string());
    }
    if out.is_empty() {
        match lsv_core::env::b0_of(&c.law, c.gamma) {
            Ok(b0) if b0 <= 0.0 => out.push(format!(
                "b0 = P(beta <= gamma) = 0 for gamma = {}: gamma lies below every atom of the law",
                c.gamma
            )),
            Err(e) => out.push(e.to_string()),
            _ => {}
        }
    }
    let ranges = [
        ("decay.lags", &c.decay.lags),
        ("corr.lags", &c.corr.lags),
        ("variance.ns", &c.variance.ns),
        ("clt.ns", &c.clt.ns),
        ("moments.ns", &c.moments.ns),
        ("annealed.lags", &c.annealed.lags),
    ];
    for (name, r) in ranges {
        if let Err(e) = r.values() {
            out.push(format!("{name}: {e}"));
        }
    }
    if c.decay.norms.is_empty() || c.decay.norms.iter().any(|&s| !(s >= 1.0 && s.is_finite())) {
        out.push("decay.norms must be finite and >= 1".into());
    }
    if c.decay.i < c.decay.s {
        out.push("decay.i must be >= decay.s".into());
    }
    if c.mc.n_samples == 0 {
        out.push("mc.n_samples must be positive".into());
    }
    if !(c.moments.s >= 1.0) {
        out.push("moments.s must be >= 1".into());
    }
    if !(c.coupling.theta > 0.0 && c.coupling.theta <= 1.0) {
        out.push(format!("coupling.theta = {} must lie in (0, 1]", c.coupling.theta));
    }
    if !(0.0..1.0).contains(&c.coupling.q) {
        out.push(format!("coupling.q = {} must lie in [0, 1)", c.coupling.q));
    }
    if !(0.0..=1.0).contains(&c.orbit.x0) {
        out.push(format!("orbit.x0 = {} must lie in [0, 1]", c.orbit.x0));
    }
    if c.annealed.n_paths == 0 {
        out.push("annealed.n_paths must be positive".into());
    }
    out
}

/// `1/beta_max - 1`: the memory-loss exponent of the slowest atom. `None`
/// when every atom is the doubling map (exponential mixing).
pub fn memory_exponent(law: &ParameterLaw) -> Option<f64> {
    let b = law.ess_sup();
    (b > 0.0).then(|| 1.0 / b - 1.0)
}

/// Paper-consistency warnings; none of these stop a run.
pub fn warnings(c: &ExperimentConfig) -> Vec<String> {
    let mut out = Vec::new();
    if c.gamma >= c.law.ess_sup() {
        out.push(format!(
            "gamma = {} >= ess sup beta = {}: every time counts as good and S_n = n",
            c.gamma,
            c.law.ess_sup()
        ));
    }
    let eta = 1.0 / c.gamma - 1.0;
    if eta <= 1.0 {
        out.push(format!(
            "predicted memory-loss exponent 1/gamma - 1 = {eta:.3} <= 1, decay non-summable for s=1; CLT diagnostics disabled"
        ));
    }
    out
}

pub fn clt_enabled(c: &ExperimentConfig) -> bool {
    1.0 / c.gamma - 1.0 > 1.0
}

fn d_samples() -> usize {
    10_000
}
fn d_seed() -> u64 {
    1
}
fn d_100() -> usize {
    100
}
fn d_50() -> usize {
    50
}
fn d_500() -> usize {
    500
}
fn d_1000() -> usize {
    1000
}
fn d_x0() -> f64 {
    0.3
}
fn d_eps() -> f64 {
    0.25
}
fn d_two() -> f64 {
    2.0
}
fn d_true() -> bool {
    true
}
fn d_theta() -> f64 {
    0.25
}
fn d_q() -> f64 {
    0.6
}
fn d_tail() -> TailKind {
    TailKind::Return
}
fn d_paths() -> usize {
    4
}
fn d_n_max() -> u64 {
    60
}
fn d_defect() -> f64 {
    5e-3
}
fn d_norms() -> Vec<f64> {
    vec![1.0]
}
fn d_lags() -> NSpec {
    NSpec::Range {
        lo: 1,
        hi: 400,
        step: None,
        per_decade: Some(10),
    }
}
fn d_ns() -> NSpec {
    NSpec::Range {
        lo: 100,
        hi: 10_000,
        step: None,
        per_decade: Some(4),
    }
}
fn d_fit() -> (f64, f64) {
    (20.0, 400.0)
}
fn d_fit_tails() -> (f64, f64) {
    (10.0, 500.0)
}
fn d_fit_coupling() -> (f64, f64) {
    (20.0, 200.0)
}
fn d_observable() -> Observable {
    Observable::centered(Base::identity())
}

#[cfg(test)]
mod tests {
    use super::*;

    const MINIMAL: &str = r#"
schema_version = 1
gamma = 0.5
law = { kind = "constant", beta = 0.5 }
grid = { kind = "uniform", n = 64 }
"#;

    #[test]
    fn minimal_config_gets_defaults() {
        let c = parse(MINIMAL).unwrap();
        assert_eq!(c.epsilon, 0.25);
        assert!(c.observable.centered);
        assert_eq!(c.decay.lags.values().unwrap()[0], 1);
        assert!(hard_errors(&c).is_empty());
    }

    #[test]
    fn version_and_unknown_keys_are_rejected() {
        assert!(parse(&MINIMAL.replace("schema_version = 1", "schema_version = 2")).is_err());
        assert!(parse(&format!("{MINIMAL}\nbogus = 3\n")).is_err());
    }

    #[test]
    fn nspec_forms() {
        assert_eq!(NSpec::List(vec![1, 5]).values().unwrap(), vec![1, 5]);
        let r = NSpec::Range {
            lo: 10,
            hi: 30,
            step: Some(10),
            per_decade: None,
        };
        assert_eq!(r.values().unwrap(), vec![10, 20, 30]);
        assert!(NSpec::List(vec![3, 3]).values().is_err());
    }

    #[test]
    fn consistency_warnings() {
        let mut c = parse(MINIMAL).unwrap();
        c.gamma = 0.6;
        c.law = ParameterLaw::constant(0.6);
        let w = warnings(&c);
        assert!(w
            .iter()
            .any(|m| m.contains("0.667") && m.contains("CLT diagnostics disabled")));
        c.gamma = 0.05;
        c.law = ParameterLaw::constant(0.2);
        assert!(hard_errors(&c).iter().any(|m| m.contains("b0")));
        c.gamma = 0.3;
        c.epsilon = 0.6;
        assert!(hard_errors(&c).iter().any(|m| m.contains("epsilon")));
    }
}
