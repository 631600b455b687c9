//! `lsv`: experiment runner for random compositions of LSV maps.

mod commands;
mod config;
mod manifest;

use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::time::{SystemTime, UNIX_EPOCH};

use anyhow::{Context, Result};
use clap::{Parser, Subcommand};

use commands::{Artifacts, Ctx};
use manifest::{content_hash, OutputFile, RunManifest, RunRecord};

/// Default output directory when neither `--out` nor `output_dir` is given.
pub const OUT_DIR_ENV: &str = "LSV_OUT_DIR";

#[derive(Debug, Parser)]
#[command(name = "lsv", version, about = "Quenched statistics of random LSV map compositions")]
struct Cli {
    #[command(subcommand)]
    command: Command,

    /// Experiment config (TOML).
    #[arg(long, global = true)]
    config: Option<PathBuf>,

    /// Output directory.
    #[arg(long, global = true)]
    out: Option<PathBuf>,

    /// Overrides `mc.seed`.
    #[arg(long, global = true)]
    seed: Option<u64>,

    /// Worker threads (default: all cores).
    #[arg(long, global = true)]
    threads: Option<usize>,

    /// Exit with status 5 when a fit or check misses its threshold.
    #[arg(long, global = true)]
    check: bool,
}

#[derive(Debug, Subcommand, Clone, Copy, PartialEq, Eq)]
enum Command {
    /// Sampled environment window, b0, N_eps and mixing bounds.
    EnvSample,
    /// One orbit along the sampled path.
    Orbit,
    /// Return structure x_n, y_n and the tails u(n).
    ReturnTails,
    /// Dense ULAM1 dump of one Ulam matrix.
    Ulam,
    /// Pullback equivariant density.
    Density,
    /// Memory-loss curves in the configured norms.
    Decay,
    /// Correlation curve, operator and Monte Carlo.
    Corr,
    /// Sigma^2_n / n.
    Variance,
    /// Kolmogorov distance of normalised Birkhoff sums.
    Clt,
    /// Growth of the L^s norm of Birkhoff sums.
    Moments,
    /// Martingale orthogonality defect and telescoping residuals.
    MartingaleCheck,
    /// Coupling-time tail simulation.
    Coupling,
    /// Environment-averaged correlations and variance.
    Annealed,
    /// Verifies manifest hashes and prints the fit table.
    Report,
    /// Schema and consistency diagnostics for a config.
    Validate,
}

impl Command {
    fn name(self) -> &'static str {
        match self {
            Command::EnvSample => "env-sample",
            Command::Orbit => "orbit",
            Command::ReturnTails => "return-tails",
            Command::Ulam => "ulam",
            Command::Density => "density",
            Command::Decay => "decay",
            Command::Corr => "corr",
            Command::Variance => "variance",
            Command::Clt => "clt",
            Command::Moments => "moments",
            Command::MartingaleCheck => "martingale-check",
            Command::Coupling => "coupling",
            Command::Annealed => "annealed",
            Command::Report => "report",
            Command::Validate => "validate",
        }
    }
}

#[derive(Debug, thiserror::Error)]
pub enum CliError {
    #[error("configuration error: {0}")]
    Config(String),
    #[error("check failed: {0}")]
    CheckFailed(String),
}

impl CliError {
    pub fn config(msg: impl Into<String>) -> Self {
        CliError::Config(msg.into())
    }
}

fn exit_code(err: &anyhow::Error) -> u8 {
    if let Some(e) = err.downcast_ref::<CliError>() {
        return match e {
            CliError::Config(_) => 2,
            CliError::CheckFailed(_) => 5,
        };
    }
    if let Some(e) = err.downcast_ref::<lsv_core::Error>() {
        use lsv_core::Error::*;
        return match e {
            Config(_) | Range(_) | Domain(_) | Shape(_) => 2,
            Numerical(_) | SingularDensity { .. } | DegenerateClt { .. } => 3,
            Capability(_) => 4,
        };
    }
    1
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(&cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(exit_code(&e))
        }
    }
}

fn now() -> u64 {
    SystemTime::now().duration_since(UNIX_EPOCH).map_or(0, |d| d.as_secs())
}

fn out_dir(cli: &Cli, cfg: Option<&config::ExperimentConfig>) -> PathBuf {
    cli.out
        .clone()
        .or_else(|| cfg.and_then(|c| c.output_dir.clone()))
        .or_else(|| std::env::var_os(OUT_DIR_ENV).map(PathBuf::from))
        .unwrap_or_else(|| PathBuf::from("lsv-out"))
}

fn require_config(cli: &Cli) -> Result<config::Loaded> {
    let path = cli
        .config
        .as_ref()
        .ok_or_else(|| CliError::config("--config is required"))?;
    config::load(path)
}

fn run(cli: &Cli) -> Result<()> {
    if let Some(n) = cli.threads {
        if n == 0 {
            return Err(CliError::config("--threads must be positive").into());
        }
        rayon::ThreadPoolBuilder::new()
            .num_threads(n)
            .build_global()
            .context("starting the worker pool")?;
    }
    match cli.command {
        Command::Validate => validate(cli),
        Command::Report => report(cli),
        cmd => execute(cli, cmd),
    }
}

fn validate(cli: &Cli) -> Result<()> {
    let loaded = require_config(cli)?;
    let errors = config::hard_errors(&loaded.config);
    for w in config::warnings(&loaded.config) {
        println!("warning: {w}");
    }
    for e in &errors {
        println!("error: {e}");
    }
    if errors.is_empty() {
        println!("{}: ok", loaded.path.display());
        Ok(())
    } else {
        Err(CliError::config(format!("{} error(s) in {}", errors.len(), loaded.path.display())).into())
    }
}

fn execute(cli: &Cli, cmd: Command) -> Result<()> {
    let loaded = require_config(cli)?;
    let errors = config::hard_errors(&loaded.config);
    if !errors.is_empty() {
        return Err(CliError::config(errors.join("; ")).into());
    }
    for w in config::warnings(&loaded.config) {
        eprintln!("warning: {w}");
    }
    let dir = out_dir(cli, Some(&loaded.config));
    std::fs::create_dir_all(&dir).with_context(|| format!("creating {}", dir.display()))?;

    let seed = cli.seed.unwrap_or(loaded.config.mc.seed);
    let ctx = Ctx {
        cfg: loaded.config.clone(),
        seed,
    };
    let started = now();
    let artifacts = match cmd {
        Command::EnvSample => commands::env_sample(&ctx),
        Command::Orbit => commands::orbit(&ctx),
        Command::ReturnTails => commands::return_tails(&ctx),
        Command::Ulam => commands::ulam(&ctx),
        Command::Density => commands::density(&ctx),
        Command::Decay => commands::decay(&ctx),
        Command::Corr => commands::corr(&ctx),
        Command::Variance => commands::variance(&ctx),
        Command::Clt => commands::clt(&ctx),
        Command::Moments => commands::moments(&ctx),
        Command::MartingaleCheck => commands::martingale_check(&ctx),
        Command::Coupling => commands::coupling(&ctx),
        Command::Annealed => commands::annealed(&ctx),
        Command::Report | Command::Validate => unreachable!(),
    }?;
    let outputs = write_outputs(&dir, &artifacts)?;

    let mut m = RunManifest::load_or_new(&dir)?;
    m.record(RunRecord {
        command: cmd.name().into(),
        config_path: loaded.path.display().to_string(),
        config_hash: content_hash(loaded.text.as_bytes()),
        seed,
        threads: cli.threads,
        started,
        finished: now(),
        outputs,
        fits: artifacts.fits.clone(),
        checks: artifacts.checks.clone(),
    });
    m.save(&dir)?;

    print_table(&artifacts.fits, &artifacts.checks);
    let failed = artifacts.fits.iter().filter(|f| f.enforced() && !f.pass).count()
        + artifacts.checks.iter().filter(|c| !c.pass).count();
    if cli.check && failed > 0 {
        return Err(CliError::CheckFailed(format!("{failed} threshold(s) missed by {}", cmd.name())).into());
    }
    Ok(())
}

fn write_outputs(dir: &Path, a: &Artifacts) -> Result<Vec<OutputFile>> {
    a.files
        .iter()
        .map(|(name, bytes)| {
            let p = dir.join(name);
            std::fs::write(&p, bytes).with_context(|| format!("writing {}", p.display()))?;
            Ok(OutputFile {
                path: name.clone(),
                sha256: content_hash(bytes),
            })
        })
        .collect()
}

fn fmt_opt(v: Option<f64>) -> String {
    v.map_or_else(|| "-".into(), |x| format!("{x:.4}"))
}

fn print_table(fits: &[manifest::FitSummary], checks: &[manifest::CheckSummary]) {
    if !fits.is_empty() {
        println!(
            "{:<28} {:>10} {:>10} {:>6} {:>9} {:>5}",
            "fit", "slope", "predicted", "tol", "rule", "pass"
        );
        for f in fits {
            println!(
                "{:<28} {:>10} {:>10} {:>6} {:>9} {:>5}",
                f.name,
                fmt_opt(f.slope),
                fmt_opt(f.predicted),
                f.tolerance.map_or_else(|| "-".into(), |t| format!("{t}")),
                f.rule,
                if f.pass { "yes" } else { "NO" }
            );
        }
    }
    if !checks.is_empty() {
        println!("{:<28} {:>12} {:>12} {:>5}", "check", "value", "bound", "pass");
        for c in checks {
            println!(
                "{:<28} {:>12.4e} {:>12.4e} {:>5}",
                c.name,
                c.value,
                c.bound,
                if c.pass { "yes" } else { "NO" }
            );
        }
    }
}

fn report(cli: &Cli) -> Result<()> {
    let cfg = match &cli.config {
        Some(p) => Some(config::load(p)?.config),
        None => None,
    };
    let dir = out_dir(cli, cfg.as_ref());
    let m = RunManifest::load(&dir)?;
    println!(
        "manifest {} (tool {})",
        dir.join(manifest::FILE_NAME).display(),
        m.tool_version
    );
    println!("{:<18} {:<40} {:>8} {:>6}", "command", "config", "seed", "files");
    for r in &m.runs {
        println!(
            "{:<18} {:<40} {:>8} {:>6}",
            r.command,
            r.config_path,
            r.seed,
            r.outputs.len()
        );
    }
    let fits: Vec<_> = m.runs.iter().flat_map(|r| r.fits.clone()).collect();
    let checks: Vec<_> = m.runs.iter().flat_map(|r| r.checks.clone()).collect();
    print_table(&fits, &checks);

    let bad = m.mismatches(&dir);
    for b in &bad {
        println!("integrity: {b}");
    }
    if !bad.is_empty() {
        return Err(CliError::CheckFailed(format!("{} output file(s) fail verification", bad.len())).into());
    }
    let failed = fits.iter().filter(|f| f.enforced() && !f.pass).count() + checks.iter().filter(|c| !c.pass).count();
    if cli.check && failed > 0 {
        return Err(CliError::CheckFailed(format!("{failed} threshold(s) missed")).into());
    }
    println!("all {} run(s) verified", m.runs.len());
    Ok(())
}
