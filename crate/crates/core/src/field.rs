//! Grids, pulses and the photon-amplitude normalization shared by every
//! other module.
//!
//! Amplitudes are dimensionless: a time sample `a_j` carries
//! `|a_j|^2 = |A(t_j)|^2 dt / (hbar omega_0)` photons, where `A` is the field
//! envelope in sqrt(W). The spectral representation is the unitary DFT with
//! the optics sign convention `A(t) ~ exp(-i omega t)`, so bin `k` (natural
//! DFT order) sits at detuning `+2 pi k / T` for `k < n/2` and photon number is
//! identical in both representations.

use std::f64::consts::PI;
use std::fmt;
use std::sync::Arc;

use num_complex::Complex64;
use rustfft::{Fft, FftPlanner};

use crate::error::{invalid, Error, Result};

/// Reduced Planck constant, J s.
pub const HBAR: f64 = 1.054_571_817e-34;
/// Speed of light in vacuum, m/s.
pub const SPEED_OF_LIGHT: f64 = 299_792_458.0;

/// Discretized time window and its conjugate frequency axis.
#[derive(Clone)]
pub struct Grid {
    n_samples: usize,
    time_window: f64,
    dt: f64,
    center_wavelength: f64,
    carrier: f64,
    detunings: Vec<f64>,
    to_freq: Arc<dyn Fft<f64>>,
    to_time: Arc<dyn Fft<f64>>,
}

impl fmt::Debug for Grid {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("Grid")
            .field("n_samples", &self.n_samples)
            .field("time_window", &self.time_window)
            .field("dt", &self.dt)
            .field("center_wavelength", &self.center_wavelength)
            .finish()
    }
}

impl PartialEq for Grid {
    fn eq(&self, other: &Self) -> bool {
        self.n_samples == other.n_samples
            && self.time_window == other.time_window
            && self.center_wavelength == other.center_wavelength
    }
}

impl Grid {
    pub fn new(n_samples: usize, time_window: f64, center_wavelength: f64) -> Result<Self> {
        if n_samples < 2 || !n_samples.is_power_of_two() {
            return Err(invalid(format!(
                "n_samples must be a power of two >= 2, got {n_samples}"
            )));
        }
        if !(time_window > 0.0 && time_window.is_finite()) {
            return Err(invalid(format!("time_window must be positive, got {time_window}")));
        }
        if !(center_wavelength > 0.0 && center_wavelength.is_finite()) {
            return Err(invalid(format!(
                "center_wavelength must be positive, got {center_wavelength}"
            )));
        }
        let dt = time_window / n_samples as f64;
        let dw = 2.0 * PI / time_window;
        let half = n_samples / 2;
        let detunings = (0..n_samples)
            .map(|k| {
                if k < half {
                    k as f64 * dw
                } else {
                    (k as f64 - n_samples as f64) * dw
                }
            })
            .collect();
        let mut planner = FftPlanner::new();
        // Forward DFT (exp(-i...)) maps spectrum to time under the optics convention.
        let to_time = planner.plan_fft_forward(n_samples);
        let to_freq = planner.plan_fft_inverse(n_samples);
        Ok(Self {
            n_samples,
            time_window,
            dt,
            center_wavelength,
            carrier: 2.0 * PI * SPEED_OF_LIGHT / center_wavelength,
            detunings,
            to_freq,
            to_time,
        })
    }

    pub fn n_samples(&self) -> usize {
        self.n_samples
    }

    pub fn time_window(&self) -> f64 {
        self.time_window
    }

    pub fn dt(&self) -> f64 {
        self.dt
    }

    pub fn center_wavelength(&self) -> f64 {
        self.center_wavelength
    }

    /// Carrier angular frequency, rad/s.
    pub fn carrier(&self) -> f64 {
        self.carrier
    }

    /// Photon energy at the carrier, J.
    pub fn photon_energy(&self) -> f64 {
        HBAR * self.carrier
    }

    /// Frequency bin spacing, rad/s.
    pub fn bin_spacing(&self) -> f64 {
        2.0 * PI / self.time_window
    }

    /// Angular detuning of every bin from the carrier, natural DFT order.
    pub fn detunings(&self) -> &[f64] {
        &self.detunings
    }

    /// Absolute angular frequency of bin `k`.
    pub fn angular_frequency(&self, k: usize) -> f64 {
        self.carrier + self.detunings[k]
    }

    /// Vacuum wavelength of bin `k`, m.
    pub fn wavelength(&self, k: usize) -> f64 {
        2.0 * PI * SPEED_OF_LIGHT / self.angular_frequency(k)
    }

    /// Sample times, centered so the middle sample sits at t = 0.
    pub fn times(&self) -> Vec<f64> {
        let mid = (self.n_samples / 2) as f64;
        (0..self.n_samples)
            .map(|j| (j as f64 - mid) * self.dt)
            .collect()
    }

    /// Bin indices sorted by ascending detuning (negative to positive).
    pub fn shifted_order(&self) -> Vec<usize> {
        let half = self.n_samples / 2;
        (half..self.n_samples).chain(0..half).collect()
    }

    /// Unnormalized time -> frequency transform, in place.
    pub(crate) fn raw_to_freq(&self, buf: &mut [Complex64], scratch: &mut [Complex64]) {
        self.to_freq.process_with_scratch(buf, scratch);
    }

    /// Unnormalized frequency -> time transform, in place.
    pub(crate) fn raw_to_time(&self, buf: &mut [Complex64], scratch: &mut [Complex64]) {
        self.to_time.process_with_scratch(buf, scratch);
    }

    pub(crate) fn scratch_len(&self) -> usize {
        self.to_freq
            .get_inplace_scratch_len()
            .max(self.to_time.get_inplace_scratch_len())
    }

    fn unitary(&self, buf: &mut [Complex64], to_freq: bool) {
        let mut scratch = vec![Complex64::default(); self.scratch_len()];
        if to_freq {
            self.raw_to_freq(buf, &mut scratch);
        } else {
            self.raw_to_time(buf, &mut scratch);
        }
        let norm = 1.0 / (self.n_samples as f64).sqrt();
        buf.iter_mut().for_each(|x| *x *= norm);
    }
}

pub fn make_grid(n_samples: usize, time_window: f64, center_wavelength: f64) -> Result<Arc<Grid>> {
    Grid::new(n_samples, time_window, center_wavelength).map(Arc::new)
}

fn check_len(grid: &Grid, len: usize) -> Result<()> {
    if len != grid.n_samples {
        return Err(Error::ShapeMismatch {
            expected: grid.n_samples,
            found: len,
        });
    }
    Ok(())
}

/// Time-domain field in photon-amplitude units.
#[derive(Debug, Clone, PartialEq)]
pub struct Field {
    grid: Arc<Grid>,
    samples: Vec<Complex64>,
}

impl Field {
    pub fn new(grid: Arc<Grid>, samples: Vec<Complex64>) -> Result<Self> {
        check_len(&grid, samples.len())?;
        Ok(Self { grid, samples })
    }

    pub fn zeros(grid: Arc<Grid>) -> Self {
        let samples = vec![Complex64::default(); grid.n_samples];
        Self { grid, samples }
    }

    pub fn grid(&self) -> &Arc<Grid> {
        &self.grid
    }

    pub fn samples(&self) -> &[Complex64] {
        &self.samples
    }

    pub fn samples_mut(&mut self) -> &mut [Complex64] {
        &mut self.samples
    }

    pub fn into_samples(self) -> Vec<Complex64> {
        self.samples
    }

    pub fn total_photons(&self) -> f64 {
        self.samples.iter().map(|a| a.norm_sqr()).sum()
    }

    /// Instantaneous power |A(t)|^2 in watts.
    pub fn power(&self) -> Vec<f64> {
        let scale = self.grid.photon_energy() / self.grid.dt;
        self.samples.iter().map(|a| a.norm_sqr() * scale).collect()
    }
}

/// Frequency-domain field in photon-amplitude units per bin, natural DFT order.
#[derive(Debug, Clone, PartialEq)]
pub struct SpectralField {
    grid: Arc<Grid>,
    amplitudes: Vec<Complex64>,
}

impl SpectralField {
    pub fn new(grid: Arc<Grid>, amplitudes: Vec<Complex64>) -> Result<Self> {
        check_len(&grid, amplitudes.len())?;
        Ok(Self { grid, amplitudes })
    }

    pub fn grid(&self) -> &Arc<Grid> {
        &self.grid
    }

    pub fn amplitudes(&self) -> &[Complex64] {
        &self.amplitudes
    }

    pub fn amplitudes_mut(&mut self) -> &mut [Complex64] {
        &mut self.amplitudes
    }

    pub fn total_photons(&self) -> f64 {
        self.amplitudes.iter().map(|a| a.norm_sqr()).sum()
    }
}

pub fn to_spectrum(field: &Field) -> SpectralField {
    let mut amplitudes = field.samples.clone();
    field.grid.unitary(&mut amplitudes, true);
    SpectralField {
        grid: field.grid.clone(),
        amplitudes,
    }
}

pub fn from_spectrum(sf: &SpectralField) -> Field {
    let mut samples = sf.amplitudes.clone();
    sf.grid.unitary(&mut samples, false);
    Field {
        grid: sf.grid.clone(),
        samples,
    }
}

/// Per-bin photon numbers `|a_k|^2`, natural DFT order.
pub fn photon_numbers(sf: &SpectralField) -> Vec<f64> {
    sf.amplitudes.iter().map(|a| a.norm_sqr()).collect()
}

/// Photon count with each bin weighted by its own photon energy
/// (`omega_0 / omega_k`). This, not `sum |a_k|^2`, is what the
/// self-steepened Raman GNLSE conserves.
pub fn exact_photon_number(sf: &SpectralField) -> f64 {
    let grid = &sf.grid;
    sf.amplitudes
        .iter()
        .enumerate()
        .map(|(k, a)| a.norm_sqr() * grid.carrier / grid.angular_frequency(k))
        .sum()
}

/// Reorders a natural-order spectral array into ascending detuning.
pub fn shift_spectrum<T: Copy>(values: &[T]) -> Vec<T> {
    let half = values.len() / 2;
    values[half..].iter().chain(&values[..half]).copied().collect()
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum PulseShape {
    Sech,
    Gaussian,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PulseSpec {
    pub shape: PulseShape,
    /// Peak power, W.
    pub peak_power: f64,
    /// Intensity full width at half maximum, s.
    pub duration_fwhm: f64,
    /// Pulse center wavelength, m. May differ from the grid carrier.
    pub center_wavelength: f64,
}

impl PulseSpec {
    pub fn sech(peak_power: f64, duration_fwhm: f64, center_wavelength: f64) -> Self {
        Self {
            shape: PulseShape::Sech,
            peak_power,
            duration_fwhm,
            center_wavelength,
        }
    }

    /// Scale time T0 of the amplitude profile.
    pub fn scale_time(&self) -> f64 {
        match self.shape {
            PulseShape::Sech => self.duration_fwhm / (2.0 * 2f64.sqrt().acosh()),
            PulseShape::Gaussian => self.duration_fwhm / (2.0 * 2f64.ln().sqrt()),
        }
    }

    /// Pulse energy from the analytic intensity integral, J.
    pub fn energy(&self) -> f64 {
        let t0 = self.scale_time();
        match self.shape {
            PulseShape::Sech => 2.0 * self.peak_power * t0,
            PulseShape::Gaussian => PI.sqrt() * self.peak_power * t0,
        }
    }

    fn validate(&self) -> Result<()> {
        if !(self.peak_power >= 0.0 && self.peak_power.is_finite()) {
            return Err(invalid(format!("peak_power must be >= 0, got {}", self.peak_power)));
        }
        if !(self.duration_fwhm > 0.0 && self.duration_fwhm.is_finite()) {
            return Err(invalid(format!(
                "duration_fwhm must be positive, got {}",
                self.duration_fwhm
            )));
        }
        if !(self.center_wavelength > 0.0) {
            return Err(invalid("center_wavelength must be positive"));
        }
        Ok(())
    }

    fn envelope(&self, t: f64) -> f64 {
        let x = t / self.scale_time();
        match self.shape {
            PulseShape::Sech => 1.0 / x.cosh(),
            PulseShape::Gaussian => (-0.5 * x * x).exp(),
        }
    }
}

/// Builds the classical mean input field, centered in the window.
pub fn synthesize_pulse(spec: &PulseSpec, grid: &Arc<Grid>) -> Result<Field> {
    spec.validate()?;
    let times = grid.times();
    let edge = spec.envelope(times[0]).max(spec.envelope(*times.last().unwrap()));
    if spec.peak_power > 0.0 && edge >= 1e-6 {
        return Err(Error::PulseClipped { ratio: edge });
    }
    let peak = (spec.peak_power * grid.dt / grid.photon_energy()).sqrt();
    let offset = 2.0 * PI * SPEED_OF_LIGHT / spec.center_wavelength - grid.carrier;
    let samples = times
        .iter()
        .map(|&t| Complex64::from_polar(peak * spec.envelope(t), -offset * t))
        .collect();
    Field::new(grid.clone(), samples)
}

/// Peak power over the diffraction-limited spot area `pi lambda^2 / 4`, W/m^2.
pub fn focused_intensity(peak_power: f64, wavelength: f64) -> Result<f64> {
    if !(peak_power >= 0.0) || !(wavelength > 0.0) {
        return Err(invalid(format!(
            "focused_intensity needs peak_power >= 0 and wavelength > 0, got ({peak_power}, {wavelength})"
        )));
    }
    Ok(peak_power / (PI * wavelength * wavelength / 4.0))
}
