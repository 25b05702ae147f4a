//! Experiment configuration: a TOML file with one section per stage and
//! units spelled out in the key names. Missing sections or keys fall back to
//! the bundled defaults.

use std::path::Path;
use std::sync::Arc;

use qnoise::field::PulseShape;
use qnoise::gnlse::SolverOptions;
use qnoise::sensitivity::Pruning;
use qnoise::{make_grid, FiberParams, Grid, JacobianOptions, OptimizerOptions, PulseSpec};
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

/// The bundled default configuration.
pub const DEFAULT_CONFIG: &str = include_str!("../configs/default.toml");

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum ConfigError {
    #[error("cannot read {path}: {message}")]
    Read { path: String, message: String },
    #[error("parse error: {0}")]
    Parse(String),
    #[error("{field}: {message}")]
    Invalid { field: String, message: String },
}

fn bad(field: &str, message: impl Into<String>) -> ConfigError {
    ConfigError::Invalid {
        field: field.to_string(),
        message: message.into(),
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct RunSection {
    pub seed: u64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct GridSection {
    pub n_samples: usize,
    pub time_window_ps: f64,
    pub center_wavelength_nm: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ShapeName {
    Sech,
    Gaussian,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct PulseSection {
    pub shape: ShapeName,
    pub peak_power_w: f64,
    pub duration_fwhm_fs: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct FiberSection {
    pub length_m: f64,
    pub beta2_ps2_per_km: f64,
    pub beta3_ps3_per_km: f64,
    pub gamma_per_w_per_km: f64,
    pub raman_fraction: f64,
    pub raman_tau1_fs: f64,
    pub raman_tau2_fs: f64,
    pub self_steepening: bool,
    pub loss_db_per_km: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct SolverSection {
    pub steps: usize,
    pub edge_threshold: f64,
    pub edge_band_fraction: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct NoiseSection {
    /// Fano factor of occupied input bins.
    pub pump_fano: f64,
    /// Bins above this fraction of the input spectral peak count as occupied.
    pub occupied_threshold: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct JacobianSection {
    /// Photon-amplitude probe step; omitted means automatic.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub probe_step: Option<f64>,
    /// 1 disables pruning.
    pub prescan_stride: usize,
    pub prune_threshold: f64,
    /// 0 disables the step-halving check.
    pub verify_stride: usize,
    pub verify_tolerance: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct BinningSection {
    pub channels: usize,
    pub span_bins: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct SpectrumSection {
    pub peak_powers_w: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct MinNoiseSection {
    pub transmissions: Vec<f64>,
    pub restarts: usize,
    pub transmission_tolerance: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct RandomFiltersSection {
    pub count: usize,
    pub max_block_channels: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct PairMapSection {
    /// Channels below this fraction of the brightest channel are left out of
    /// the summary statistics (the matrices are always complete).
    pub band_threshold: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ImmunitySection {
    pub pump_fanos: Vec<f64>,
    pub transmission: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ValidateSection {
    pub mc_samples: usize,
    pub mc_masks: usize,
    pub mc_sigma: f64,
    pub mc_relative: f64,
    pub shot_noise_tolerance: f64,
    pub bilinearity_masks: usize,
    pub bilinearity_tolerance: f64,
    pub symmetry_tolerance: f64,
    pub conservation_tolerance: f64,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ExperimentConfig {
    pub run: RunSection,
    pub grid: GridSection,
    pub pulse: PulseSection,
    pub fiber: FiberSection,
    pub solver: SolverSection,
    pub noise: NoiseSection,
    pub jacobian: JacobianSection,
    pub binning: BinningSection,
    pub spectrum: SpectrumSection,
    pub min_noise: MinNoiseSection,
    pub random_filters: RandomFiltersSection,
    pub pair_map: PairMapSection,
    pub immunity: ImmunitySection,
    pub validate: ValidateSection,
}

impl Default for RunSection {
    fn default() -> Self {
        Self { seed: 1 }
    }
}

impl Default for GridSection {
    fn default() -> Self {
        Self {
            n_samples: 1024,
            time_window_ps: 8.0,
            center_wavelength_nm: 1560.0,
        }
    }
}

impl Default for PulseSection {
    fn default() -> Self {
        Self {
            shape: ShapeName::Sech,
            peak_power_w: 8545.0,
            duration_fwhm_fs: 200.0,
        }
    }
}

impl Default for FiberSection {
    fn default() -> Self {
        Self {
            length_m: 1.0,
            beta2_ps2_per_km: -22.0,
            beta3_ps3_per_km: 0.1,
            gamma_per_w_per_km: 1.8,
            raman_fraction: 0.18,
            raman_tau1_fs: 12.2,
            raman_tau2_fs: 32.0,
            self_steepening: true,
            loss_db_per_km: 0.0,
        }
    }
}

impl Default for SolverSection {
    fn default() -> Self {
        Self {
            steps: 500,
            edge_threshold: 1e-6,
            edge_band_fraction: 0.05,
        }
    }
}

impl Default for NoiseSection {
    fn default() -> Self {
        Self {
            pump_fano: 10.0,
            occupied_threshold: 1e-4,
        }
    }
}

impl Default for JacobianSection {
    fn default() -> Self {
        Self {
            probe_step: None,
            prescan_stride: 4,
            prune_threshold: 1e-6,
            verify_stride: 16,
            verify_tolerance: 0.01,
        }
    }
}

impl Default for BinningSection {
    fn default() -> Self {
        Self {
            channels: 128,
            span_bins: 512,
        }
    }
}

impl Default for SpectrumSection {
    fn default() -> Self {
        Self {
            peak_powers_w: vec![
                0.0, 500.0, 1000.0, 2000.0, 3000.0, 4000.0, 5000.0, 6000.0, 7000.0, 8545.0,
            ],
        }
    }
}

impl Default for MinNoiseSection {
    fn default() -> Self {
        Self {
            transmissions: (1..10).map(|i| i as f64 / 10.0).collect(),
            restarts: 16,
            transmission_tolerance: 0.02,
        }
    }
}

impl Default for RandomFiltersSection {
    fn default() -> Self {
        Self {
            count: 2000,
            max_block_channels: 8,
        }
    }
}

impl Default for PairMapSection {
    fn default() -> Self {
        Self {
            band_threshold: 1e-3,
        }
    }
}

impl Default for ImmunitySection {
    fn default() -> Self {
        Self {
            pump_fanos: vec![1.0, 10.0, 100.0, 316.0],
            transmission: 0.1,
        }
    }
}

impl Default for ValidateSection {
    fn default() -> Self {
        Self {
            mc_samples: 10_000,
            mc_masks: 6,
            mc_sigma: 3.0,
            mc_relative: 0.05,
            shot_noise_tolerance: 0.01,
            bilinearity_masks: 100,
            bilinearity_tolerance: 1e-10,
            symmetry_tolerance: 1e-12,
            conservation_tolerance: 1e-6,
        }
    }
}

fn positive(field: &str, v: f64) -> Result<(), ConfigError> {
    if v > 0.0 && v.is_finite() {
        Ok(())
    } else {
        Err(bad(field, format!("must be a positive finite number, got {v}")))
    }
}

fn fraction(field: &str, v: f64, open_low: bool) -> Result<(), ConfigError> {
    let ok = if open_low {
        v > 0.0 && v <= 1.0
    } else {
        (0.0..=1.0).contains(&v)
    };
    if ok {
        Ok(())
    } else {
        let range = if open_low { "(0, 1]" } else { "[0, 1]" };
        Err(bad(field, format!("must lie in {range}, got {v}")))
    }
}

impl ExperimentConfig {
    pub fn from_toml(text: &str) -> Result<Self, ConfigError> {
        let cfg: Self = toml::from_str(text).map_err(|e| ConfigError::Parse(e.to_string()))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn load(path: &Path) -> Result<Self, ConfigError> {
        let text = std::fs::read_to_string(path).map_err(|e| ConfigError::Read {
            path: path.display().to_string(),
            message: e.to_string(),
        })?;
        Self::from_toml(&text)
    }

    pub fn bundled() -> Self {
        Self::from_toml(DEFAULT_CONFIG).expect("bundled config is valid")
    }

    /// Canonical TOML of the effective configuration.
    pub fn canonical(&self) -> String {
        toml::to_string(self).expect("config serializes")
    }

    /// SHA-256 of [`canonical`](Self::canonical), hex encoded.
    pub fn hash(&self) -> String {
        hex::encode(Sha256::digest(self.canonical().as_bytes()))
    }

    pub fn validate(&self) -> Result<(), ConfigError> {
        let g = &self.grid;
        if g.n_samples < 2 || !g.n_samples.is_power_of_two() {
            return Err(bad(
                "grid.n_samples",
                format!("must be a power of two >= 2, got {}", g.n_samples),
            ));
        }
        positive("grid.time_window_ps", g.time_window_ps)?;
        positive("grid.center_wavelength_nm", g.center_wavelength_nm)?;

        let p = &self.pulse;
        if !(p.peak_power_w >= 0.0 && p.peak_power_w.is_finite()) {
            return Err(bad("pulse.peak_power_w", format!("must be >= 0, got {}", p.peak_power_w)));
        }
        positive("pulse.duration_fwhm_fs", p.duration_fwhm_fs)?;

        let f = &self.fiber;
        positive("fiber.length_m", f.length_m)?;
        for (name, v) in [
            ("fiber.beta2_ps2_per_km", f.beta2_ps2_per_km),
            ("fiber.beta3_ps3_per_km", f.beta3_ps3_per_km),
        ] {
            if !v.is_finite() {
                return Err(bad(name, "must be finite"));
            }
        }
        if !(f.gamma_per_w_per_km >= 0.0 && f.gamma_per_w_per_km.is_finite()) {
            return Err(bad("fiber.gamma_per_w_per_km", "must be >= 0"));
        }
        fraction("fiber.raman_fraction", f.raman_fraction, false)?;
        if f.raman_fraction > 0.0 {
            positive("fiber.raman_tau1_fs", f.raman_tau1_fs)?;
            positive("fiber.raman_tau2_fs", f.raman_tau2_fs)?;
        }
        if !(f.loss_db_per_km >= 0.0 && f.loss_db_per_km.is_finite()) {
            return Err(bad("fiber.loss_db_per_km", "must be >= 0"));
        }

        let s = &self.solver;
        if s.steps == 0 {
            return Err(bad("solver.steps", "must be >= 1"));
        }
        positive("solver.edge_threshold", s.edge_threshold)?;
        if !(0.0..0.5).contains(&s.edge_band_fraction) {
            return Err(bad("solver.edge_band_fraction", "must lie in [0, 0.5)"));
        }

        let n = &self.noise;
        if !(n.pump_fano >= 1.0 && n.pump_fano.is_finite()) {
            return Err(bad(
                "noise.pump_fano",
                format!("phase-insensitive noise needs F >= 1, got {}", n.pump_fano),
            ));
        }
        fraction("noise.occupied_threshold", n.occupied_threshold, false)?;

        let j = &self.jacobian;
        if let Some(h) = j.probe_step {
            positive("jacobian.probe_step", h)?;
        }
        if j.prescan_stride == 0 {
            return Err(bad("jacobian.prescan_stride", "must be >= 1 (1 disables pruning)"));
        }
        fraction("jacobian.prune_threshold", j.prune_threshold, false)?;
        positive("jacobian.verify_tolerance", j.verify_tolerance)?;

        let b = &self.binning;
        if b.channels == 0 || b.span_bins == 0 || b.span_bins > g.n_samples {
            return Err(bad(
                "binning.span_bins",
                format!("must lie in 1..={} with at least one channel", g.n_samples),
            ));
        }
        if b.span_bins % b.channels != 0 {
            return Err(bad(
                "binning.channels",
                format!("must divide binning.span_bins = {}, got {}", b.span_bins, b.channels),
            ));
        }

        if self.spectrum.peak_powers_w.is_empty() {
            return Err(bad("spectrum.peak_powers_w", "must not be empty"));
        }
        for (i, &w) in self.spectrum.peak_powers_w.iter().enumerate() {
            if !(w >= 0.0 && w.is_finite()) {
                return Err(bad(&format!("spectrum.peak_powers_w[{i}]"), "must be >= 0"));
            }
        }

        let m = &self.min_noise;
        if m.transmissions.is_empty() {
            return Err(bad("min_noise.transmissions", "must not be empty"));
        }
        for (i, &t) in m.transmissions.iter().enumerate() {
            fraction(&format!("min_noise.transmissions[{i}]"), t, true)?;
        }
        fraction("min_noise.transmission_tolerance", m.transmission_tolerance, false)?;

        let r = &self.random_filters;
        if r.count == 0 {
            return Err(bad("random_filters.count", "must be >= 1"));
        }
        if r.max_block_channels == 0 {
            return Err(bad("random_filters.max_block_channels", "must be >= 1"));
        }

        fraction("pair_map.band_threshold", self.pair_map.band_threshold, false)?;

        let im = &self.immunity;
        if im.pump_fanos.is_empty() {
            return Err(bad("immunity.pump_fanos", "must not be empty"));
        }
        for (i, &f) in im.pump_fanos.iter().enumerate() {
            if !(f >= 1.0 && f.is_finite()) {
                return Err(bad(&format!("immunity.pump_fanos[{i}]"), format!("needs F >= 1, got {f}")));
            }
        }
        fraction("immunity.transmission", im.transmission, true)?;

        let v = &self.validate;
        if v.mc_samples < 2 {
            return Err(bad("validate.mc_samples", "must be >= 2"));
        }
        if v.mc_masks == 0 {
            return Err(bad("validate.mc_masks", "must be >= 1"));
        }
        positive("validate.mc_sigma", v.mc_sigma)?;
        positive("validate.mc_relative", v.mc_relative)?;
        positive("validate.shot_noise_tolerance", v.shot_noise_tolerance)?;
        positive("validate.bilinearity_tolerance", v.bilinearity_tolerance)?;
        positive("validate.symmetry_tolerance", v.symmetry_tolerance)?;
        positive("validate.conservation_tolerance", v.conservation_tolerance)?;
        Ok(())
    }

    pub fn make_grid(&self) -> qnoise::Result<Arc<Grid>> {
        make_grid(
            self.grid.n_samples,
            self.grid.time_window_ps * 1e-12,
            self.grid.center_wavelength_nm * 1e-9,
        )
    }

    pub fn pulse_spec(&self) -> PulseSpec {
        PulseSpec {
            shape: match self.pulse.shape {
                ShapeName::Sech => PulseShape::Sech,
                ShapeName::Gaussian => PulseShape::Gaussian,
            },
            peak_power: self.pulse.peak_power_w,
            duration_fwhm: self.pulse.duration_fwhm_fs * 1e-15,
            center_wavelength: self.grid.center_wavelength_nm * 1e-9,
        }
    }

    pub fn fiber_params(&self) -> FiberParams {
        let f = &self.fiber;
        FiberParams {
            length: f.length_m,
            beta2: f.beta2_ps2_per_km * 1e-27,
            beta3: f.beta3_ps3_per_km * 1e-39,
            gamma: f.gamma_per_w_per_km * 1e-3,
            raman_fraction: f.raman_fraction,
            raman_tau1: f.raman_tau1_fs * 1e-15,
            raman_tau2: f.raman_tau2_fs * 1e-15,
            self_steepening: f.self_steepening,
            loss_alpha: f.loss_db_per_km * std::f64::consts::LN_10 / 10.0 * 1e-3,
        }
    }

    pub fn solver_options(&self) -> SolverOptions {
        SolverOptions {
            steps: self.solver.steps,
            edge_threshold: self.solver.edge_threshold,
            edge_band: self.solver.edge_band_fraction,
            ..SolverOptions::default()
        }
    }

    pub fn jacobian_options(&self) -> JacobianOptions {
        let j = &self.jacobian;
        JacobianOptions {
            probe_step: j.probe_step,
            verify_stride: j.verify_stride,
            verify_tolerance: j.verify_tolerance,
            pruning: (j.prescan_stride > 1).then_some(Pruning {
                stride: j.prescan_stride,
                threshold: j.prune_threshold,
            }),
        }
    }

    pub fn optimizer_options(&self) -> OptimizerOptions {
        OptimizerOptions {
            tolerance: self.min_noise.transmission_tolerance,
            restarts: self.min_noise.restarts,
            seed: self.run.seed,
            ..OptimizerOptions::default()
        }
    }
}
