//! Experiment runner for the `qnoise` toolkit: config parsing, orchestration
//! and plot-ready output files.

pub mod config;
pub mod experiment;
pub mod manifest;
pub mod output;

use std::path::{Path, PathBuf};

pub use config::{ConfigError, ExperimentConfig, DEFAULT_CONFIG};
pub use experiment::{Analysis, Fault, Setup};
pub use manifest::{RunManifest, Timer, MANIFEST_NAME};
pub use output::{Artifact, Provenance};

#[derive(Debug, thiserror::Error)]
pub enum CliError {
    #[error("config error: {0}")]
    Config(#[from] ConfigError),
    #[error("numerical failure: {0}")]
    Numerical(#[from] qnoise::Error),
    #[error("cannot write {path}: {source}")]
    Io {
        path: PathBuf,
        source: std::io::Error,
    },
}

impl CliError {
    /// 2 for configuration and I/O problems, 3 for numerical failures.
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Config(_) | CliError::Io { .. } => 2,
            CliError::Numerical(_) => 3,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Command {
    Spectrum,
    MinNoise,
    RandomFilters,
    PairMap,
    Immunity,
    Validate,
}

impl Command {
    pub fn name(self) -> &'static str {
        match self {
            Command::Spectrum => "spectrum",
            Command::MinNoise => "min-noise",
            Command::RandomFilters => "random-filters",
            Command::PairMap => "pair-map",
            Command::Immunity => "immunity",
            Command::Validate => "validate",
        }
    }
}

/// Result of one command: files to write, lines for the terminal, and
/// whether validation passed.
#[derive(Debug)]
pub struct CommandOutput {
    pub artifacts: Vec<Artifact>,
    pub summary: Vec<String>,
    pub passed: bool,
    pub manifest: RunManifest,
}

/// Applies command-line overrides and re-validates.
pub fn effective_config(
    mut cfg: ExperimentConfig,
    seed: Option<u64>,
    bins: Option<usize>,
) -> Result<ExperimentConfig, ConfigError> {
    if let Some(s) = seed {
        cfg.run.seed = s;
    }
    if let Some(b) = bins {
        cfg.binning.channels = b;
    }
    cfg.validate()?;
    Ok(cfg)
}

fn db(v: f64) -> String {
    format!("{v:+.2} dB")
}

/// Runs a command without touching the file system.
pub fn run(cmd: Command, cfg: &ExperimentConfig, fault: Option<Fault>) -> Result<CommandOutput, CliError> {
    use experiment::*;
    let mut timer = Timer::new();
    let prov = Provenance {
        command: cmd.name().into(),
        config_hash: cfg.hash(),
        seed: cfg.run.seed,
        manifest: MANIFEST_NAME.into(),
    };
    let setup = timer.stage("setup", || Setup::new(cfg))?;
    let mut summary = Vec::new();
    let mut passed = true;
    let artifacts = if cmd == Command::Spectrum {
        let scan = timer.stage("propagate", || compute_spectrum(&setup))?;
        for (p, r) in scan.powers_w.iter().zip(&scan.red_peak_thz) {
            summary.push(format!("P0 = {p:9.1} W  red-shifted peak at {r:+.2} THz"));
        }
        render_spectrum(&setup, &scan, &prov)
    } else {
        let analysis = timer.stage("jacobian", || Analysis::new(setup))?;
        summary.push(format!(
            "jacobian: {} x {}, {} evaluations, {} pruned, {} flagged",
            analysis.jacobian.rows(),
            analysis.jacobian.cols(),
            analysis.jacobian.evaluations,
            analysis.jacobian.pruned.len(),
            analysis.jacobian.flagged.len()
        ));
        let mut files = vec![render_channels(&analysis, &prov)];
        match cmd {
            Command::MinNoise => {
                let rows = timer.stage("optimize", || compute_min_noise(&analysis))?;
                for r in &rows {
                    match &r.optimized {
                        Some(o) => summary.push(format!(
                            "T = {:.2}: {}  (linear loss {})",
                            r.target,
                            db(o.result.fano_db),
                            db(qnoise::to_decibels(r.baseline))
                        )),
                        None => summary.push(format!("T = {:.2}: infeasible", r.target)),
                    }
                }
                files.push(render_min_noise(&analysis, &rows, &prov));
            }
            Command::RandomFilters => {
                let entries = timer.stage("sweep", || compute_random_filters(&analysis))?;
                summary.push(format!("{} random filters", entries.len()));
                files.push(render_random_filters(&analysis, &entries, &prov)?);
            }
            Command::PairMap => {
                let res = timer.stage("pair-map", || compute_pair_map(&analysis))?;
                match res.min_red {
                    Some((r, a, b)) => summary.push(format!(
                        "smallest relative pair noise on the red side: {r:.4} (channels {a}, {b})"
                    )),
                    None => summary.push("no red-side channel pairs above threshold".into()),
                }
                files.extend(render_pair_map(&analysis, &res, &prov));
            }
            Command::Immunity => {
                let points = timer.stage("immunity", || compute_immunity(&analysis))?;
                for p in &points {
                    summary.push(format!(
                        "pump {}: optimized {}",
                        db(qnoise::to_decibels(p.pump_fano)),
                        db(p.optimized.result.fano_db)
                    ));
                }
                files.push(render_immunity(&analysis, &points, &prov));
            }
            Command::Validate => {
                let val = timer.stage("validate", || compute_validation(&analysis, fault))?;
                for c in &val.checks {
                    summary.push(format!(
                        "{} {:<24} value {:.3e}  limit {:.3e}  {}",
                        if c.passed { "PASS" } else { "FAIL" },
                        c.name,
                        c.value,
                        c.limit,
                        c.detail
                    ));
                }
                passed = val.passed();
                files.extend(render_validation(&analysis, &val, &prov));
            }
            Command::Spectrum => unreachable!(),
        }
        files
    };
    let names = artifacts.iter().map(|a| a.name.clone()).collect();
    let manifest = timer.finish(cmd.name(), &prov.config_hash, cfg.run.seed, names);
    Ok(CommandOutput {
        artifacts,
        summary,
        passed,
        manifest,
    })
}

/// Writes artifacts, the manifest and a copy of the effective config.
pub fn write_output(out: &CommandOutput, cfg: &ExperimentConfig, dir: &Path) -> Result<(), CliError> {
    let io = |path: PathBuf| move |source| CliError::Io { path, source };
    std::fs::create_dir_all(dir).map_err(io(dir.to_path_buf()))?;
    for a in &out.artifacts {
        a.write_to(dir).map_err(io(dir.join(&a.name)))?;
    }
    let cfg_path = dir.join("config.toml");
    std::fs::write(&cfg_path, cfg.canonical()).map_err(io(cfg_path.clone()))?;
    let m = dir.join(MANIFEST_NAME);
    std::fs::write(&m, out.manifest.to_json()).map_err(io(m.clone()))?;
    Ok(())
}
