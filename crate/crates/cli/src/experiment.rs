//! One function per experiment. `compute_*` returns typed results; the
//! matching `render_*` turns them into data files.

use std::sync::Arc;

use qnoise::field::exact_photon_number;
use qnoise::filter::{
    random_filter_sweep, ImmunityPoint, OptimizedFilter, PairNoiseMap, SweepEntry, SweepOptions,
};
use qnoise::gnlse::spectrum_vs_power;
use qnoise::montecarlo::sample_rng;
use qnoise::{
    covariance_eq1, filter_noise, linear_loss_fano, mc_statistics, noise_immunity_scan,
    optimize_filter, pair_noise_map, photon_numbers, soliton_number, synthesize_pulse,
    to_decibels, to_spectrum, variance_eq1, wirtinger_jacobian, CovarianceMatrix,
    FiberParams, Field, FilterMask, Grid, Identity, JacobianOptions, McConfig, NoiseModel,
    Observable, Propagator, PulseSpec, SensitivityMatrix, SolverOptions, SpectralBinning,
};
use rand::Rng;

use crate::config::ExperimentConfig;
use crate::output::{matrix, Artifact, Provenance, Table};
use crate::CliError;

/// Grid, pulse and propagator built from a config.
#[derive(Debug, Clone)]
pub struct Setup {
    pub config: ExperimentConfig,
    pub grid: Arc<Grid>,
    pub pulse: PulseSpec,
    pub fiber: FiberParams,
    pub propagator: Propagator,
    pub input: Field,
    pub binning: SpectralBinning,
}

impl Setup {
    pub fn new(config: &ExperimentConfig) -> Result<Self, CliError> {
        let grid = config.make_grid()?;
        let pulse = config.pulse_spec();
        let fiber = config.fiber_params();
        let propagator = Propagator::new(grid.clone(), fiber, config.solver_options())?;
        let input = synthesize_pulse(&pulse, &grid)?;
        let binning =
            SpectralBinning::centered(&grid, config.binning.channels, config.binning.span_bins)?;
        Ok(Self {
            config: config.clone(),
            grid,
            pulse,
            fiber,
            propagator,
            input,
            binning,
        })
    }

    pub fn soliton_number(&self) -> Option<f64> {
        soliton_number(&self.pulse, &self.fiber).ok()
    }

    /// Channel centers as optical detuning, THz.
    pub fn channel_detunings_thz(&self) -> Vec<f64> {
        self.binning
            .center_detunings(&self.grid)
            .iter()
            .map(|w| w / (2.0 * std::f64::consts::PI) * 1e-12)
            .collect()
    }

    /// RMS spectral width of the input, rad/s.
    pub fn input_rms_width(&self) -> f64 {
        let p = photon_numbers(&to_spectrum(&self.input));
        rms_width(&p, self.grid.detunings())
    }
}

fn rms_width(photons: &[f64], detunings: &[f64]) -> f64 {
    let total: f64 = photons.iter().sum();
    if total <= 0.0 {
        return 0.0;
    }
    let mean: f64 = photons.iter().zip(detunings).map(|(p, w)| p * w).sum::<f64>() / total;
    let var: f64 = photons
        .iter()
        .zip(detunings)
        .map(|(p, w)| p * (w - mean).powi(2))
        .sum::<f64>()
        / total;
    var.sqrt()
}

/// A setup with its base propagation and channel Jacobian.
#[derive(Debug, Clone)]
pub struct Analysis {
    pub setup: Setup,
    pub output: Field,
    pub jacobian: SensitivityMatrix,
}

impl Analysis {
    pub fn new(setup: Setup) -> Result<Self, CliError> {
        let output = setup.propagator.propagate(&setup.input)?;
        let jacobian = wirtinger_jacobian(
            &setup.propagator,
            &setup.input,
            &setup.binning.observables(),
            &setup.config.jacobian_options(),
        )?;
        Ok(Self {
            setup,
            output,
            jacobian,
        })
    }

    pub fn noise(&self, pump_fano: f64) -> Result<NoiseModel, CliError> {
        Ok(NoiseModel::amplified_pump(
            &self.jacobian.input_photons,
            pump_fano,
            self.setup.config.noise.occupied_threshold,
        )?)
    }

    pub fn covariance(&self, pump_fano: f64) -> Result<CovarianceMatrix, CliError> {
        Ok(covariance_eq1(&self.jacobian, &self.noise(pump_fano)?)?)
    }

    /// Fine-grid transmission of a channel mask.
    pub fn fine_mask(&self, mask: &FilterMask) -> Vec<f64> {
        let mut t = vec![0.0; self.setup.grid.n_samples()];
        for (g, &v) in self.setup.binning.groups().iter().zip(mask.values()) {
            for &k in g {
                t[k] = v;
            }
        }
        t
    }
}

fn prov_meta_common(table: &mut Table, setup: &Setup) {
    let c = &setup.config;
    table
        .meta("n_samples", c.grid.n_samples)
        .meta("time_window_ps", c.grid.time_window_ps)
        .meta("center_wavelength_nm", c.grid.center_wavelength_nm)
        .meta("peak_power_w", c.pulse.peak_power_w)
        .meta("duration_fwhm_fs", c.pulse.duration_fwhm_fs)
        .meta("fiber_length_m", c.fiber.length_m)
        .meta("steps", c.solver.steps);
    if let Some(n) = setup.soliton_number() {
        table.meta("soliton_number", format!("{n:.4}"));
    }
}

/// Per-channel axis shared by the noise commands.
pub fn render_channels(analysis: &Analysis, prov: &Provenance) -> Artifact {
    let s = &analysis.setup;
    let mut t = Table::new(
        "channels.dat",
        &[
            ("channel", "1"),
            ("detuning", "THz"),
            ("wavelength", "nm"),
            ("first_bin", "1"),
            ("bins", "1"),
            ("mean_photons", "photons"),
        ],
    );
    prov_meta_common(&mut t, s);
    t.meta("order", "ascending optical frequency");
    let det = s.channel_detunings_thz();
    let f0 = s.grid.carrier() / (2.0 * std::f64::consts::PI) * 1e-12;
    for (i, g) in s.binning.groups().iter().enumerate() {
        let wl = 299_792.458 / (f0 + det[i]);
        t.row(vec![
            i.into(),
            det[i].into(),
            wl.into(),
            g[0].into(),
            g.len().into(),
            analysis.jacobian.base_values[i].into(),
        ]);
    }
    t.render(prov)
}

// ---------------------------------------------------------------- spectrum

#[derive(Debug, Clone)]
pub struct SpectrumScan {
    pub powers_w: Vec<f64>,
    /// Detunings in ascending order, rad/s.
    pub detunings: Vec<f64>,
    /// Photons per bin, ascending frequency, one row per power.
    pub spectra: Vec<Vec<f64>>,
    pub input_spectra: Vec<Vec<f64>>,
    /// Detuning (THz) of the strongest red-shifted feature, NaN if none.
    pub red_peak_thz: Vec<f64>,
}

/// Strongest bin more than three input RMS widths to the red of the carrier,
/// if it reaches 1e-3 of the spectral peak.
fn red_peak(spectrum: &[f64], detunings: &[f64], input_width: f64) -> f64 {
    let peak = spectrum.iter().cloned().fold(0.0, f64::max);
    let cut = -3.0 * input_width;
    let best = spectrum
        .iter()
        .zip(detunings)
        .filter(|(_, w)| **w < cut)
        .fold(None::<(f64, f64)>, |acc, (&p, &w)| match acc {
            Some((bp, _)) if bp >= p => acc,
            _ => Some((p, w)),
        });
    match best {
        Some((p, w)) if peak > 0.0 && p >= 1e-3 * peak => w / (2.0 * std::f64::consts::PI) * 1e-12,
        _ => f64::NAN,
    }
}

pub fn compute_spectrum(setup: &Setup) -> Result<SpectrumScan, CliError> {
    let powers = setup.config.spectrum.peak_powers_w.clone();
    let out = spectrum_vs_power(&setup.pulse, &setup.propagator, &powers)?;
    let order = setup.grid.shifted_order();
    let det: Vec<f64> = order.iter().map(|&k| setup.grid.detunings()[k]).collect();
    let width = setup.input_rms_width();
    let mut spectra = Vec::new();
    let mut inputs = Vec::new();
    let mut red = Vec::new();
    for (p, sf) in powers.iter().zip(&out) {
        let n = photon_numbers(sf);
        let row: Vec<f64> = order.iter().map(|&k| n[k]).collect();
        let pulse = PulseSpec {
            peak_power: *p,
            ..setup.pulse
        };
        let inp = photon_numbers(&to_spectrum(&synthesize_pulse(&pulse, &setup.grid)?));
        inputs.push(order.iter().map(|&k| inp[k]).collect());
        red.push(red_peak(&row, &det, width));
        spectra.push(row);
    }
    Ok(SpectrumScan {
        powers_w: powers,
        detunings: det,
        spectra,
        input_spectra: inputs,
        red_peak_thz: red,
    })
}

pub fn render_spectrum(setup: &Setup, scan: &SpectrumScan, prov: &Provenance) -> Vec<Artifact> {
    let rows = scan.powers_w.len();
    let cols = scan.detunings.len();
    let flat: Vec<f64> = scan.spectra.iter().flatten().copied().collect();
    let meta = [
        ("rows", "spectrum_power.dat".to_string()),
        ("cols", "spectrum_frequency.dat".to_string()),
        ("units", "photons per bin".to_string()),
    ];
    let m = matrix("spectrum.dat", prov, &meta, rows, cols, &flat);

    let mut pw = Table::new(
        "spectrum_power.dat",
        &[
            ("peak_power", "W"),
            ("soliton_number", "1"),
            ("input_photons", "photons"),
            ("output_photons", "photons"),
            ("red_peak_detuning", "THz"),
        ],
    );
    prov_meta_common(&mut pw, setup);
    for (i, p) in scan.powers_w.iter().enumerate() {
        let pulse = PulseSpec {
            peak_power: *p,
            ..setup.pulse
        };
        let n = soliton_number(&pulse, &setup.fiber).unwrap_or(f64::NAN);
        pw.row(vec![
            (*p).into(),
            n.into(),
            scan.input_spectra[i].iter().sum::<f64>().into(),
            scan.spectra[i].iter().sum::<f64>().into(),
            scan.red_peak_thz[i].into(),
        ]);
    }

    let mut fr = Table::new(
        "spectrum_frequency.dat",
        &[("bin", "1"), ("detuning", "THz"), ("wavelength", "nm")],
    );
    let order = setup.grid.shifted_order();
    for (j, &k) in order.iter().enumerate() {
        let w = scan.detunings[j] / (2.0 * std::f64::consts::PI) * 1e-12;
        fr.row(vec![k.into(), w.into(), (setup.grid.wavelength(k) * 1e9).into()]);
    }
    vec![m, pw.render(prov), fr.render(prov)]
}

// --------------------------------------------------------------- min-noise

#[derive(Debug, Clone)]
pub struct MinNoiseRow {
    pub target: f64,
    pub optimized: Option<OptimizedFilter>,
    /// Linear-loss Fano of the pump noise at the target transmission.
    pub baseline: f64,
    pub error: Option<String>,
}

pub fn compute_min_noise(analysis: &Analysis) -> Result<Vec<MinNoiseRow>, CliError> {
    let cfg = &analysis.setup.config;
    let f = cfg.noise.pump_fano;
    let c = analysis.covariance(f)?;
    let opts = cfg.optimizer_options();
    cfg.min_noise
        .transmissions
        .iter()
        .map(|&t| {
            let baseline = linear_loss_fano(f, t)?;
            Ok(match optimize_filter(&c, t, &opts) {
                Ok(o) => MinNoiseRow {
                    target: t,
                    optimized: Some(o),
                    baseline,
                    error: None,
                },
                Err(qnoise::Error::Infeasible(msg)) => MinNoiseRow {
                    target: t,
                    optimized: None,
                    baseline,
                    error: Some(msg),
                },
                Err(e) => return Err(e.into()),
            })
        })
        .collect()
}

pub fn render_min_noise(analysis: &Analysis, rows: &[MinNoiseRow], prov: &Provenance) -> Artifact {
    let mut t = Table::new(
        "min_noise.dat",
        &[
            ("target_transmission", "1"),
            ("transmission", "1"),
            ("fano", "1"),
            ("fano_db", "dB"),
            ("linear_loss_fano", "1"),
            ("linear_loss_db", "dB"),
            ("gap_db", "dB"),
            ("converged", "1"),
            ("mask", "channels"),
        ],
    );
    prov_meta_common(&mut t, &analysis.setup);
    t.meta("pump_fano", analysis.setup.config.noise.pump_fano);
    t.meta("channel_axis", "channels.dat");
    for r in rows {
        let ll_db = to_decibels(r.baseline);
        match &r.optimized {
            Some(o) => t.row(vec![
                r.target.into(),
                o.result.transmission_fraction.into(),
                o.result.fano.into(),
                o.result.fano_db.into(),
                r.baseline.into(),
                ll_db.into(),
                (ll_db - o.result.fano_db).into(),
                o.converged.into(),
                o.mask.to_bit_string().into(),
            ]),
            None => t.row(vec![
                r.target.into(),
                f64::NAN.into(),
                f64::NAN.into(),
                f64::NAN.into(),
                r.baseline.into(),
                ll_db.into(),
                f64::NAN.into(),
                false.into(),
                "-".into(),
            ]),
        }
    }
    t.render(prov)
}

// ---------------------------------------------------------- random filters

pub fn compute_random_filters(analysis: &Analysis) -> Result<Vec<SweepEntry>, CliError> {
    let cfg = &analysis.setup.config;
    let c = analysis.covariance(cfg.noise.pump_fano)?;
    let opts = SweepOptions {
        max_block: cfg.random_filters.max_block_channels,
    };
    Ok(random_filter_sweep(&c, cfg.random_filters.count, cfg.run.seed, &opts)?)
}

pub fn render_random_filters(
    analysis: &Analysis,
    entries: &[SweepEntry],
    prov: &Provenance,
) -> Result<Artifact, CliError> {
    let c = analysis.covariance(analysis.setup.config.noise.pump_fano)?;
    let all = filter_noise(&c, &FilterMask::all_pass(c.dim()))?;
    let mut t = Table::new(
        "random_filters.dat",
        &[
            ("id", "1"),
            ("transmission", "1"),
            ("fano_db", "dB"),
            ("linear_loss_db", "dB"),
            ("excess_db", "dB"),
            ("mask", "channels"),
        ],
    );
    prov_meta_common(&mut t, &analysis.setup);
    t.meta("pump_fano", analysis.setup.config.noise.pump_fano);
    t.meta("unfiltered_fano_db", crate::output::fmt_f64(all.fano_db));
    t.meta("baseline", "linear loss applied to the unfiltered output");
    t.meta("channel_axis", "channels.dat");
    for e in entries {
        let ll = to_decibels(e.linear_loss_fano);
        t.row(vec![
            e.id.into(),
            e.result.transmission_fraction.into(),
            e.result.fano_db.into(),
            ll.into(),
            (e.result.fano_db - ll).into(),
            e.mask.to_bit_string().into(),
        ]);
    }
    Ok(t.render(prov))
}

// ---------------------------------------------------------------- pair map

#[derive(Debug, Clone)]
pub struct PairMapResult {
    pub map: PairNoiseMap,
    /// Channels above the band threshold.
    pub band: Vec<usize>,
    /// Band channels more than three input RMS widths to the red.
    pub red_band: Vec<usize>,
    /// Smallest R over distinct red-band pairs: (R, a, b).
    pub min_red: Option<(f64, usize, usize)>,
}

pub fn compute_pair_map(analysis: &Analysis) -> Result<PairMapResult, CliError> {
    let cfg = &analysis.setup.config;
    let c = analysis.covariance(cfg.noise.pump_fano)?;
    let map = pair_noise_map(&c);
    let peak = c.mean().iter().cloned().fold(0.0, f64::max);
    let band: Vec<usize> = (0..c.dim())
        .filter(|&i| peak > 0.0 && c.mean()[i] >= cfg.pair_map.band_threshold * peak)
        .collect();
    let cut = -3.0 * analysis.setup.input_rms_width() / (2.0 * std::f64::consts::PI) * 1e-12;
    let det = analysis.setup.channel_detunings_thz();
    let red_band: Vec<usize> = band.iter().copied().filter(|&i| det[i] < cut).collect();
    let mut min_red: Option<(f64, usize, usize)> = None;
    for (ia, &a) in red_band.iter().enumerate() {
        for &b in &red_band[ia + 1..] {
            if let Some(r) = map.relative_at(a, b) {
                if min_red.is_none_or(|(m, _, _)| r < m) {
                    min_red = Some((r, a, b));
                }
            }
        }
    }
    Ok(PairMapResult {
        map,
        band,
        red_band,
        min_red,
    })
}

pub fn render_pair_map(analysis: &Analysis, res: &PairMapResult, prov: &Provenance) -> Vec<Artifact> {
    let d = res.map.dim;
    let mut meta = vec![
        ("rows", "channels.dat".to_string()),
        ("cols", "channels.dat".to_string()),
        ("pump_fano", analysis.setup.config.noise.pump_fano.to_string()),
    ];
    if let Some((r, a, b)) = res.min_red {
        meta.push(("min_red_band_relative", crate::output::fmt_f64(r)));
        meta.push(("min_red_band_pair", format!("{a} {b}")));
    }
    let mut v_meta = meta.clone();
    v_meta.push(("units", "photons^2".into()));
    let mut r_meta = meta;
    r_meta.push(("units", "1 (nan where a single-channel variance vanishes)".into()));
    vec![
        matrix("pair_variance.dat", prov, &v_meta, d, d, &res.map.variance),
        matrix("pair_relative.dat", prov, &r_meta, d, d, &res.map.relative),
    ]
}

// ---------------------------------------------------------------- immunity

pub fn compute_immunity(analysis: &Analysis) -> Result<Vec<ImmunityPoint>, CliError> {
    let cfg = &analysis.setup.config;
    Ok(noise_immunity_scan(
        &analysis.jacobian,
        &cfg.immunity.pump_fanos,
        cfg.immunity.transmission,
        cfg.noise.occupied_threshold,
        &cfg.optimizer_options(),
    )?)
}

pub fn render_immunity(analysis: &Analysis, points: &[ImmunityPoint], prov: &Provenance) -> Artifact {
    let mut t = Table::new(
        "immunity.dat",
        &[
            ("pump_fano", "1"),
            ("pump_fano_db", "dB"),
            ("transmission", "1"),
            ("fano", "1"),
            ("fano_db", "dB"),
            ("vacuum_floor_db", "dB"),
            ("converged", "1"),
            ("mask", "channels"),
        ],
    );
    prov_meta_common(&mut t, &analysis.setup);
    t.meta("target_transmission", analysis.setup.config.immunity.transmission);
    t.meta("channel_axis", "channels.dat");
    for p in points {
        let r = &p.optimized.result;
        let floor_db = if r.transmitted_mean > 0.0 {
            to_decibels(p.vacuum_floor / r.transmitted_mean)
        } else {
            f64::NAN
        };
        t.row(vec![
            p.pump_fano.into(),
            to_decibels(p.pump_fano).into(),
            r.transmission_fraction.into(),
            r.fano.into(),
            r.fano_db.into(),
            floor_db.into(),
            p.optimized.converged.into(),
            p.optimized.mask.to_bit_string().into(),
        ]);
    }
    t.render(prov)
}

// ---------------------------------------------------------------- validate

/// Deliberate faults for exercising the validation suite.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Fault {
    /// Drops the 1/2 of the Wirtinger derivative.
    WirtingerFactor,
    /// Breaks the symmetry of the covariance matrix.
    CovarianceAsymmetry,
}

#[derive(Debug, Clone)]
pub struct Check {
    pub name: String,
    pub value: f64,
    pub limit: f64,
    pub passed: bool,
    pub detail: String,
}

impl Check {
    fn new(name: &str, value: f64, limit: f64, passed: bool, detail: String) -> Self {
        Self {
            name: name.into(),
            value,
            limit,
            passed,
            detail,
        }
    }
}

/// Linearized variance against sampling for one mask.
#[derive(Debug, Clone)]
pub struct OracleRow {
    pub label: String,
    pub mask: FilterMask,
    pub eq1_variance: f64,
    pub mc_variance: f64,
    pub mc_error: f64,
    pub mc_mean: f64,
    pub allowed: f64,
    pub passed: bool,
}

#[derive(Debug, Clone)]
pub struct Validation {
    pub checks: Vec<Check>,
    pub oracle: Vec<OracleRow>,
}

impl Validation {
    pub fn passed(&self) -> bool {
        self.checks.iter().all(|c| c.passed)
    }
}

/// Linearized total-photon Fano for a lossless linear system and coherent
/// input.
pub fn shot_noise_fano(
    system: &dyn qnoise::System,
    input: &Field,
    fault: Option<Fault>,
) -> Result<f64, CliError> {
    let n = input.grid().n_samples();
    let obs = [Observable::BinGroup((0..n).collect())];
    let mut jac = wirtinger_jacobian(system, input, &obs, &JacobianOptions::exhaustive())?;
    if fault == Some(Fault::WirtingerFactor) {
        jac = jac.scaled(2.0);
    }
    let var = variance_eq1(jac.row(0), &NoiseModel::coherent(n))?;
    Ok(var / jac.base_values[0])
}

/// Masks for the oracle comparison: all-pass, optimized masks spread over
/// the transmission grid, then random masks until `count` distinct ones.
pub fn oracle_masks(analysis: &Analysis, c: &CovarianceMatrix, count: usize) -> Vec<(String, FilterMask)> {
    let cfg = &analysis.setup.config;
    let dim = c.dim();
    let mut out: Vec<(String, FilterMask)> = vec![("all-pass".into(), FilterMask::all_pass(dim))];
    let ts = &cfg.min_noise.transmissions;
    let want_opt = count.saturating_sub(2).min(ts.len());
    for i in 0..want_opt {
        let t = ts[i * ts.len() / want_opt.max(1)];
        if let Ok(o) = optimize_filter(c, t, &cfg.optimizer_options()) {
            out.push((format!("optimized-{t}"), o.mask));
        }
    }
    let mut rng = sample_rng(cfg.run.seed, u64::MAX);
    let mut id = 0;
    while out.len() < count && id < 1000 {
        let bits: Vec<bool> = (0..dim).map(|_| rng.random::<bool>()).collect();
        out.push((format!("random-{id}"), FilterMask::from_bits(&bits)));
        id += 1;
    }
    let mut seen = std::collections::HashSet::new();
    out.retain(|(_, m)| seen.insert(m.to_bit_string()));
    out.truncate(count);
    out
}

pub fn compute_validation(analysis: &Analysis, fault: Option<Fault>) -> Result<Validation, CliError> {
    let s = &analysis.setup;
    let v = &s.config.validate;
    let mut checks = Vec::new();

    // Shot-noise fixed point on lossless linear systems.
    let coherent = &s.input;
    let f_id = shot_noise_fano(&Identity, coherent, fault)?;
    checks.push(Check::new(
        "shot_noise_identity",
        (f_id - 1.0).abs(),
        v.shot_noise_tolerance,
        (f_id - 1.0).abs() <= v.shot_noise_tolerance,
        format!("total-photon Fano {f_id:.6}"),
    ));
    let linear_fiber = FiberParams {
        gamma: 0.0,
        loss_alpha: 0.0,
        ..s.fiber
    };
    let dispersive = Propagator::new(s.grid.clone(), linear_fiber, SolverOptions::with_steps(1))?;
    let f_disp = shot_noise_fano(&dispersive, coherent, fault)?;
    checks.push(Check::new(
        "shot_noise_dispersive",
        (f_disp - 1.0).abs(),
        v.shot_noise_tolerance,
        (f_disp - 1.0).abs() <= v.shot_noise_tolerance,
        format!("total-photon Fano {f_disp:.6}"),
    ));

    // Photon-number (or energy) conservation of the base propagation.
    if s.fiber.loss_alpha == 0.0 {
        let (a, b) = if s.fiber.self_steepening {
            (
                exact_photon_number(&to_spectrum(&s.input)),
                exact_photon_number(&to_spectrum(&analysis.output)),
            )
        } else {
            (s.input.total_photons(), analysis.output.total_photons())
        };
        let drift = if a > 0.0 { (b - a).abs() / a } else { 0.0 };
        checks.push(Check::new(
            "photon_conservation",
            drift,
            v.conservation_tolerance,
            drift <= v.conservation_tolerance,
            if s.fiber.self_steepening {
                "frequency-weighted photon number".into()
            } else {
                "energy".into()
            },
        ));
    }

    // Probe-step halving.
    let flagged = analysis.jacobian.flagged.len();
    checks.push(Check::new(
        "jacobian_step_halving",
        flagged as f64,
        0.0,
        flagged == 0,
        format!(
            "{flagged} flagged entries, {} pruned columns, {} evaluations",
            analysis.jacobian.pruned.len(),
            analysis.jacobian.evaluations
        ),
    ));

    // Covariance invariants.
    let noise = analysis.noise(s.config.noise.pump_fano)?;
    let mut c = covariance_eq1(&analysis.jacobian, &noise)?;
    if fault == Some(Fault::CovarianceAsymmetry) && c.dim() > 1 {
        let v01 = c.get(0, 1) + 1e-3 * c.trace();
        c.set(0, 1, v01);
    }
    let scale = c.trace().abs().max(f64::MIN_POSITIVE);
    let asym = c.max_asymmetry() / scale;
    checks.push(Check::new(
        "covariance_symmetry",
        asym,
        v.symmetry_tolerance,
        asym <= v.symmetry_tolerance,
        "max |C_ab - C_ba| / trace".into(),
    ));
    let lmin = c.min_eigenvalue() / scale;
    checks.push(Check::new(
        "covariance_psd",
        lmin,
        -1e-8,
        lmin >= -1e-8,
        "smallest eigenvalue / trace".into(),
    ));

    // Bilinearity: filter algebra on C against the direct variance of the summed row.
    let mut rng = sample_rng(s.config.run.seed, u64::MAX - 1);
    let mut worst = 0.0f64;
    for _ in 0..v.bilinearity_masks {
        let bits: Vec<bool> = (0..c.dim()).map(|_| rng.random::<bool>()).collect();
        let mask = FilterMask::from_bits(&bits);
        let via_c = filter_noise(&c, &mask)?.variance;
        let direct = variance_eq1(&analysis.jacobian.combine(mask.values())?, &noise)?;
        let denom = direct.abs().max(f64::MIN_POSITIVE);
        worst = worst.max((via_c - direct).abs() / denom);
    }
    checks.push(Check::new(
        "bilinearity",
        worst,
        v.bilinearity_tolerance,
        worst <= v.bilinearity_tolerance,
        format!("{} random binary masks", v.bilinearity_masks),
    ));

    // Monte-Carlo oracle.
    let masks = oracle_masks(analysis, &c, v.mc_masks);
    let observables: Vec<Observable> = masks
        .iter()
        .map(|(_, m)| Observable::Filtered(analysis.fine_mask(m)))
        .collect();
    let mc = McConfig::new(s.input.clone(), noise.clone(), v.mc_samples, s.config.run.seed);
    let stats = mc_statistics(&mc, &s.propagator, &observables)?;
    let mut oracle = Vec::new();
    for (i, (label, mask)) in masks.into_iter().enumerate() {
        let eq1 = filter_noise(&c, &mask)?.variance;
        let (mv, me) = (stats.variances[i], stats.variance_errors[i]);
        let allowed = (v.mc_sigma * me).max(v.mc_relative * eq1.abs());
        let passed = (mv - eq1).abs() <= allowed;
        oracle.push(OracleRow {
            label,
            mask,
            eq1_variance: eq1,
            mc_variance: mv,
            mc_error: me,
            mc_mean: stats.means[i],
            allowed,
            passed,
        });
    }
    let worst_ratio = oracle
        .iter()
        .map(|o| (o.mc_variance - o.eq1_variance).abs() / o.allowed)
        .fold(0.0, f64::max);
    let n_ok = oracle.iter().filter(|o| o.passed).count();
    checks.push(Check::new(
        "monte_carlo_oracle",
        worst_ratio,
        1.0,
        n_ok == oracle.len(),
        format!(
            "{n_ok}/{} masks within max({}σ, {}%), {} samples, {} failed",
            oracle.len(),
            v.mc_sigma,
            v.mc_relative * 100.0,
            stats.n_samples,
            stats.failures
        ),
    ));

    Ok(Validation { checks, oracle })
}

pub fn render_validation(analysis: &Analysis, val: &Validation, prov: &Provenance) -> Vec<Artifact> {
    let mut t = Table::new(
        "validate.dat",
        &[("check", "1"), ("value", "1"), ("limit", "1"), ("passed", "1")],
    );
    prov_meta_common(&mut t, &analysis.setup);
    t.meta("passed", val.passed());
    for c in &val.checks {
        t.row(vec![
            c.name.clone().into(),
            c.value.into(),
            c.limit.into(),
            c.passed.into(),
        ]);
    }
    let mut o = Table::new(
        "validate_oracle.dat",
        &[
            ("mask_label", "1"),
            ("eq1_variance", "photons^2"),
            ("mc_variance", "photons^2"),
            ("mc_error", "photons^2"),
            ("mc_mean", "photons"),
            ("allowed", "photons^2"),
            ("passed", "1"),
            ("mask", "channels"),
        ],
    );
    o.meta("pump_fano", analysis.setup.config.noise.pump_fano);
    o.meta("mc_samples", analysis.setup.config.validate.mc_samples);
    for r in &val.oracle {
        o.row(vec![
            r.label.clone().into(),
            r.eq1_variance.into(),
            r.mc_variance.into(),
            r.mc_error.into(),
            r.mc_mean.into(),
            r.allowed.into(),
            r.passed.into(),
            r.mask.to_bit_string().into(),
        ]);
    }
    vec![t.render(prov), o.render(prov)]
}
