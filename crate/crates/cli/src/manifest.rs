//! `manifest.json`: what each command wrote, with content hashes and fit
//! summaries.

use std::path::Path;

use anyhow::Context;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

pub const FILE_NAME: &str = "manifest.json";

/// Git-style object hash: SHA-256 of `blob <len>\0<content>`.
pub fn content_hash(bytes: &[u8]) -> String {
    let mut h = Sha256::new();
    h.update(format!("blob {}\0", bytes.len()).as_bytes());
    h.update(bytes);
    hex::encode(h.finalize())
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OutputFile {
    /// Relative to the output directory.
    pub path: String,
    pub sha256: String,
}

/// A fitted exponent against its predicted value.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FitSummary {
    pub name: String,
    pub slope: Option<f64>,
    pub predicted: Option<f64>,
    pub tolerance: Option<f64>,
    /// `within` (two-sided), `at-most` (slope <= predicted + tol),
    /// `at-least`, or `reported` (not enforced).
    pub rule: String,
    pub pass: bool,
}

impl FitSummary {
    pub fn reported(name: &str, slope: Option<f64>, predicted: Option<f64>) -> Self {
        Self {
            name: name.into(),
            slope,
            predicted,
            tolerance: None,
            rule: "reported".into(),
            pass: true,
        }
    }

    pub fn within(name: &str, slope: Option<f64>, predicted: f64, tol: f64) -> Self {
        Self {
            name: name.into(),
            slope,
            predicted: Some(predicted),
            tolerance: Some(tol),
            rule: "within".into(),
            pass: slope.is_some_and(|s| (s - predicted).abs() <= tol),
        }
    }

    pub fn at_most(name: &str, slope: Option<f64>, predicted: f64, tol: f64) -> Self {
        Self {
            name: name.into(),
            slope,
            predicted: Some(predicted),
            tolerance: Some(tol),
            rule: "at-most".into(),
            pass: slope.is_some_and(|s| s <= predicted + tol),
        }
    }

    pub fn at_least(name: &str, slope: Option<f64>, predicted: f64, tol: f64) -> Self {
        Self {
            name: name.into(),
            slope,
            predicted: Some(predicted),
            tolerance: Some(tol),
            rule: "at-least".into(),
            pass: slope.is_some_and(|s| s >= predicted - tol),
        }
    }

    pub fn enforced(&self) -> bool {
        self.rule != "reported"
    }
}

/// A scalar threshold check, e.g. a defect bound.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CheckSummary {
    pub name: String,
    pub value: f64,
    pub bound: f64,
    pub pass: bool,
}

impl CheckSummary {
    pub fn below(name: &str, value: f64, bound: f64) -> Self {
        Self {
            name: name.into(),
            value,
            bound,
            pass: value <= bound,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunRecord {
    pub command: String,
    pub config_path: String,
    pub config_hash: String,
    pub seed: u64,
    pub threads: Option<usize>,
    /// Unix seconds.
    pub started: u64,
    pub finished: u64,
    pub outputs: Vec<OutputFile>,
    pub fits: Vec<FitSummary>,
    pub checks: Vec<CheckSummary>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunManifest {
    pub tool_version: String,
    pub runs: Vec<RunRecord>,
}

impl RunManifest {
    pub fn new() -> Self {
        Self {
            tool_version: env!("CARGO_PKG_VERSION").into(),
            runs: Vec::new(),
        }
    }

    pub fn load_or_new(dir: &Path) -> anyhow::Result<Self> {
        let p = dir.join(FILE_NAME);
        if !p.exists() {
            return Ok(Self::new());
        }
        Self::load(dir)
    }

    pub fn load(dir: &Path) -> anyhow::Result<Self> {
        let p = dir.join(FILE_NAME);
        let text = std::fs::read_to_string(&p).with_context(|| format!("reading {}", p.display()))?;
        serde_json::from_str(&text).with_context(|| format!("parsing {}", p.display()))
    }

    /// Adds a run. Earlier runs that wrote any of the same files are dropped,
    /// since those files have just been overwritten.
    pub fn record(&mut self, run: RunRecord) {
        self.runs.retain(|r| {
            !(r.command == run.command && r.config_path == run.config_path)
                && !r.outputs.iter().any(|o| run.outputs.iter().any(|n| n.path == o.path))
        });
        self.runs.push(run);
    }

    pub fn save(&self, dir: &Path) -> anyhow::Result<()> {
        let p = dir.join(FILE_NAME);
        let mut text = serde_json::to_string_pretty(self)?;
        text.push('\n');
        std::fs::write(&p, text).with_context(|| format!("writing {}", p.display()))
    }

    /// Files whose current hash differs from the recorded one, or that are gone.
    pub fn mismatches(&self, dir: &Path) -> Vec<String> {
        let mut out = Vec::new();
        for r in &self.runs {
            for f in &r.outputs {
                match std::fs::read(dir.join(&f.path)) {
                    Ok(bytes) if content_hash(&bytes) == f.sha256 => {}
                    Ok(_) => out.push(format!("{}: hash mismatch", f.path)),
                    Err(_) => out.push(format!("{}: missing", f.path)),
                }
            }
        }
        out
    }
}

impl Default for RunManifest {
    fn default() -> Self {
        Self::new()
    }
}
