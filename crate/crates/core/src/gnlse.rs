//! Split-step propagation of the generalized nonlinear Schrodinger equation
//!
//! ```text
//! dA/dz = -(alpha/2) A - i (beta2/2) d2A/dT2 + (beta3/6) d3A/dT3
//!         + i gamma (1 + i s/omega0 d/dT) [A ((1 - fR)|A|^2 + fR (hR * |A|^2))]
//! ```
//!
//! Linear terms are applied exactly in the frequency domain; the nonlinear
//! substep is integrated with classical RK4 (or exactly, for pure Kerr).
//! Strang ordering makes the scheme second order in the step size.

use std::f64::consts::PI;
use std::sync::Arc;

use num_complex::Complex64;

use crate::error::{invalid, Error, Result};
use crate::field::{synthesize_pulse, to_spectrum, Field, Grid, PulseSpec, SpectralField};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FiberParams {
    /// Fiber length, m.
    pub length: f64,
    /// Group-velocity dispersion, s^2/m.
    pub beta2: f64,
    /// Third-order dispersion, s^3/m.
    pub beta3: f64,
    /// Kerr coefficient, 1/(W m).
    pub gamma: f64,
    pub raman_fraction: f64,
    /// Raman oscillation period parameter, s.
    pub raman_tau1: f64,
    /// Raman damping time, s.
    pub raman_tau2: f64,
    pub self_steepening: bool,
    /// Power attenuation coefficient, 1/m.
    pub loss_alpha: f64,
}

impl FiberParams {
    /// Standard fused-silica single-mode fiber near 1560 nm.
    pub fn silica(length: f64) -> Self {
        Self {
            length,
            beta2: -22e-27,
            beta3: 0.1e-39,
            gamma: 1.8e-3,
            raman_fraction: 0.18,
            raman_tau1: 12.2e-15,
            raman_tau2: 32e-15,
            self_steepening: true,
            loss_alpha: 0.0,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.length > 0.0 && self.length.is_finite()) {
            return Err(invalid(format!("fiber length must be positive, got {}", self.length)));
        }
        if !(self.gamma >= 0.0) {
            return Err(invalid(format!("gamma must be >= 0, got {}", self.gamma)));
        }
        if !(0.0..1.0).contains(&self.raman_fraction) {
            return Err(invalid(format!(
                "raman_fraction must lie in [0, 1), got {}",
                self.raman_fraction
            )));
        }
        if self.raman_fraction > 0.0 && !(self.raman_tau1 > 0.0 && self.raman_tau2 > 0.0) {
            return Err(invalid("raman_tau1 and raman_tau2 must be positive"));
        }
        if !(self.loss_alpha >= 0.0) {
            return Err(invalid(format!("loss_alpha must be >= 0, got {}", self.loss_alpha)));
        }
        if !self.beta2.is_finite() || !self.beta3.is_finite() {
            return Err(invalid("dispersion coefficients must be finite"));
        }
        Ok(())
    }

    /// Dispersion length T0^2 / |beta2| for a pulse of scale time `t0`.
    pub fn dispersion_length(&self, t0: f64) -> f64 {
        t0 * t0 / self.beta2.abs()
    }

    /// Fundamental soliton period (pi/2) L_D.
    pub fn soliton_period(&self, t0: f64) -> f64 {
        0.5 * PI * self.dispersion_length(t0)
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SolverOptions {
    /// Number of split steps over the fiber length.
    pub steps: usize,
    /// Upper bound on the step size, m. Raises the step count when set.
    pub max_step: Option<f64>,
    /// Relative change tolerated by [`check_step_convergence`].
    pub tolerance: f64,
    /// Allowed growth of edge-band spectral intensity, relative to the peak.
    pub edge_threshold: f64,
    /// Fraction of the spectral window treated as the edge band on each side.
    pub edge_band: f64,
}

impl Default for SolverOptions {
    fn default() -> Self {
        Self {
            steps: 1000,
            max_step: None,
            tolerance: 1e-3,
            edge_threshold: 1e-6,
            edge_band: 0.05,
        }
    }
}

impl SolverOptions {
    pub fn with_steps(steps: usize) -> Self {
        Self {
            steps,
            ..Self::default()
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.steps == 0 {
            return Err(invalid("steps must be >= 1"));
        }
        if let Some(h) = self.max_step {
            if !(h > 0.0) {
                return Err(invalid(format!("max_step must be positive, got {h}")));
            }
        }
        if !(self.tolerance > 0.0) {
            return Err(invalid("tolerance must be positive"));
        }
        if !(self.edge_threshold > 0.0) || !(0.0..0.5).contains(&self.edge_band) {
            return Err(invalid("edge_threshold must be positive and edge_band in [0, 0.5)"));
        }
        Ok(())
    }

    fn step_count(&self, length: f64) -> usize {
        match self.max_step {
            Some(h) => self.steps.max((length / h).ceil() as usize),
            None => self.steps,
        }
    }
}

/// Two-timescale damped-oscillator Raman response, 1/s. Causal and
/// normalized to unit area on [0, inf).
pub fn raman_response(t: f64, fiber: &FiberParams) -> f64 {
    if t < 0.0 {
        return 0.0;
    }
    let (t1, t2) = (fiber.raman_tau1, fiber.raman_tau2);
    (t1 * t1 + t2 * t2) / (t1 * t2 * t2) * (-t / t2).exp() * (t / t1).sin()
}

/// `sqrt(gamma P0 T0^2 / |beta2|)`; defined only for anomalous dispersion.
pub fn soliton_number(pulse: &PulseSpec, fiber: &FiberParams) -> Result<f64> {
    if !(fiber.beta2 < 0.0) {
        return Err(Error::NotApplicable(format!(
            "soliton number needs anomalous dispersion, beta2 = {}",
            fiber.beta2
        )));
    }
    let t0 = pulse.scale_time();
    Ok((fiber.gamma * pulse.peak_power * t0 * t0 / fiber.beta2.abs()).sqrt())
}

/// Peak power giving soliton number `n` for the pulse's duration.
pub fn peak_power_for_soliton_number(n: f64, pulse: &PulseSpec, fiber: &FiberParams) -> f64 {
    let t0 = pulse.scale_time();
    n * n * fiber.beta2.abs() / (fiber.gamma * t0 * t0)
}

/// Precomputed operators for one (grid, fiber, options) triple.
///
/// Cheap to share: `propagate` takes `&self` and allocates its own buffers,
/// so many propagations can run concurrently.
#[derive(Debug, Clone)]
pub struct Propagator {
    grid: Arc<Grid>,
    fiber: FiberParams,
    opts: SolverOptions,
    steps: usize,
    dz: f64,
    /// exp(L dz/2) / n and exp(L dz) / n, folding in the FFT round-trip factor.
    half_step: Vec<Complex64>,
    full_step: Vec<Complex64>,
    /// DFT of the normalized discrete Raman kernel, divided by n.
    raman_transfer: Vec<Complex64>,
    /// (1 + omega/omega0) / n.
    shock: Vec<f64>,
    /// gamma converted to act on |a|^2 in photons per sample.
    gamma_eff: f64,
    edge_bins: Vec<usize>,
}

struct Workspace {
    scratch: Vec<Complex64>,
    k: [Vec<Complex64>; 4],
    tmp: Vec<Complex64>,
    intensity: Vec<Complex64>,
}

impl Workspace {
    fn new(grid: &Grid) -> Self {
        let n = grid.n_samples();
        let z = || vec![Complex64::default(); n];
        Self {
            scratch: vec![Complex64::default(); grid.scratch_len()],
            k: [z(), z(), z(), z()],
            tmp: z(),
            intensity: z(),
        }
    }
}

impl Propagator {
    pub fn new(grid: Arc<Grid>, fiber: FiberParams, opts: SolverOptions) -> Result<Self> {
        fiber.validate()?;
        opts.validate()?;
        let n = grid.n_samples();
        let inv_n = 1.0 / n as f64;
        let steps = opts.step_count(fiber.length);
        let dz = fiber.length / steps as f64;

        let linear: Vec<Complex64> = grid
            .detunings()
            .iter()
            .map(|&w| {
                Complex64::new(
                    -0.5 * fiber.loss_alpha,
                    0.5 * fiber.beta2 * w * w + fiber.beta3 * w * w * w / 6.0,
                )
            })
            .collect();
        let half_step = linear.iter().map(|l| (l * 0.5 * dz).exp() * inv_n).collect();
        let full_step = linear.iter().map(|l| (l * dz).exp() * inv_n).collect();

        let raman_transfer = if fiber.raman_fraction > 0.0 {
            let dt = grid.dt();
            let mut kernel: Vec<Complex64> = (0..n)
                .map(|j| {
                    let h = if j < n / 2 { raman_response(j as f64 * dt, &fiber) } else { 0.0 };
                    Complex64::new(h, 0.0)
                })
                .collect();
            let area: f64 = kernel.iter().map(|c| c.re).sum();
            let mut scratch = vec![Complex64::default(); grid.scratch_len()];
            grid.raw_to_freq(&mut kernel, &mut scratch);
            kernel.iter_mut().for_each(|c| *c *= inv_n / area);
            kernel
        } else {
            Vec::new()
        };

        let s = if fiber.self_steepening { 1.0 } else { 0.0 };
        let shock = grid
            .detunings()
            .iter()
            .map(|&w| (1.0 + s * w / grid.carrier()) * inv_n)
            .collect();

        let gamma_eff = fiber.gamma * grid.photon_energy() / grid.dt();

        let order = grid.shifted_order();
        let band = ((opts.edge_band * n as f64).ceil() as usize).min(n / 2);
        let edge_bins = order[..band]
            .iter()
            .chain(&order[n - band..])
            .copied()
            .collect();

        Ok(Self {
            grid,
            fiber,
            opts,
            steps,
            dz,
            half_step,
            full_step,
            raman_transfer,
            shock,
            gamma_eff,
            edge_bins,
        })
    }

    pub fn grid(&self) -> &Arc<Grid> {
        &self.grid
    }

    pub fn fiber(&self) -> &FiberParams {
        &self.fiber
    }

    pub fn options(&self) -> &SolverOptions {
        &self.opts
    }

    pub fn steps(&self) -> usize {
        self.steps
    }

    /// Same fiber and grid, different step count.
    pub fn with_steps(&self, steps: usize) -> Result<Self> {
        let opts = SolverOptions {
            steps,
            max_step: None,
            ..self.opts
        };
        Self::new(self.grid.clone(), self.fiber, opts)
    }

    pub fn propagate(&self, field: &Field) -> Result<Field> {
        if field.grid().as_ref() != self.grid.as_ref() {
            return Err(invalid("field grid differs from propagator grid"));
        }
        let mut a = field.samples().to_vec();
        self.propagate_in_place(&mut a)?;
        Field::new(self.grid.clone(), a)
    }

    /// Like [`propagate`](Self::propagate) but without the edge-band monitor.
    /// Meant for small perturbations of a field whose own propagation was
    /// checked: a probe placed in an edge bin is not aliasing.
    pub fn propagate_unmonitored(&self, field: &Field) -> Result<Field> {
        if field.grid().as_ref() != self.grid.as_ref() {
            return Err(invalid("field grid differs from propagator grid"));
        }
        let mut a = field.samples().to_vec();
        self.run(&mut a, false)?;
        Field::new(self.grid.clone(), a)
    }

    /// Propagates time-domain samples over the full fiber length.
    pub fn propagate_in_place(&self, a: &mut [Complex64]) -> Result<()> {
        self.run(a, true)
    }

    fn run(&self, a: &mut [Complex64], monitor: bool) -> Result<()> {
        let mut ws = Workspace::new(&self.grid);
        let edge0 = self.linear_step(a, &self.half_step, &mut ws, 0.0, None)?;
        let edge0 = monitor.then_some(edge0);
        for s in 0..self.steps {
            self.nonlinear_step(a, &mut ws);
            let mult = if s + 1 == self.steps {
                &self.half_step
            } else {
                &self.full_step
            };
            self.linear_step(a, mult, &mut ws, (s + 1) as f64 * self.dz, edge0)?;
        }
        Ok(())
    }

    /// Applies a diagonal linear step; returns the edge-band intensity so later
    /// steps can detect growth above it, measured against the current peak.
    fn linear_step(
        &self,
        a: &mut [Complex64],
        mult: &[Complex64],
        ws: &mut Workspace,
        z: f64,
        edge0: Option<f64>,
    ) -> Result<f64> {
        self.grid.raw_to_freq(a, &mut ws.scratch);
        let mut peak = 0.0f64;
        let mut total = 0.0f64;
        for (x, m) in a.iter_mut().zip(mult) {
            *x *= m;
            let p = x.norm_sqr();
            peak = peak.max(p);
            total += p;
        }
        if !total.is_finite() {
            return Err(Error::NumericalBlowup { z });
        }
        let edge = self
            .edge_bins
            .iter()
            .map(|&k| a[k].norm_sqr())
            .fold(0.0, f64::max);
        if let Some(e0) = edge0 {
            if peak > 0.0 && edge - e0 > self.opts.edge_threshold * peak {
                return Err(Error::SpectralAliasing {
                    z,
                    ratio: edge / peak,
                });
            }
        }
        self.grid.raw_to_time(a, &mut ws.scratch);
        Ok(edge)
    }

    fn nonlinear_step(&self, a: &mut [Complex64], ws: &mut Workspace) {
        if self.fiber.gamma == 0.0 {
            return;
        }
        let dz = self.dz;
        if self.raman_transfer.is_empty() && !self.fiber.self_steepening {
            let g = self.gamma_eff * dz;
            for x in a.iter_mut() {
                *x *= Complex64::from_polar(1.0, g * x.norm_sqr());
            }
            return;
        }
        // RK4; k-buffers hold dA/dz at the four stages.
        let mut k = std::mem::take(&mut ws.k);
        let mut tmp = std::mem::take(&mut ws.tmp);
        self.rhs(a, &mut k[0], ws);
        let stage = |tmp: &mut Vec<Complex64>, kk: &[Complex64], c: f64| {
            for ((t, x), d) in tmp.iter_mut().zip(a.iter()).zip(kk) {
                *t = x + d * (c * dz);
            }
        };
        stage(&mut tmp, &k[0], 0.5);
        let (k0, rest) = k.split_at_mut(1);
        self.rhs(&tmp, &mut rest[0], ws);
        stage(&mut tmp, &rest[0], 0.5);
        self.rhs(&tmp, &mut rest[1], ws);
        stage(&mut tmp, &rest[1], 1.0);
        self.rhs(&tmp, &mut rest[2], ws);
        let w = dz / 6.0;
        for (j, x) in a.iter_mut().enumerate() {
            *x += (k0[0][j] + 2.0 * rest[0][j] + 2.0 * rest[1][j] + rest[2][j]) * w;
        }
        ws.k = k;
        ws.tmp = tmp;
    }

    /// Nonlinear right-hand side in the time domain.
    fn rhs(&self, a: &[Complex64], out: &mut [Complex64], ws: &mut Workspace) {
        let fr = self.fiber.raman_fraction;
        if self.raman_transfer.is_empty() {
            for (o, x) in out.iter_mut().zip(a) {
                *o = x * x.norm_sqr();
            }
        } else {
            let buf = &mut ws.intensity;
            for (b, x) in buf.iter_mut().zip(a) {
                *b = Complex64::new(x.norm_sqr(), 0.0);
            }
            self.grid.raw_to_freq(buf, &mut ws.scratch);
            for (b, h) in buf.iter_mut().zip(&self.raman_transfer) {
                *b *= h;
            }
            self.grid.raw_to_time(buf, &mut ws.scratch);
            for ((o, x), r) in out.iter_mut().zip(a).zip(buf.iter()) {
                let i = x.norm_sqr();
                *o = x * ((1.0 - fr) * i + fr * r.re);
            }
        }
        let ig = Complex64::new(0.0, self.gamma_eff);
        if self.fiber.self_steepening {
            self.grid.raw_to_freq(out, &mut ws.scratch);
            for (o, s) in out.iter_mut().zip(&self.shock) {
                *o *= ig * s;
            }
            self.grid.raw_to_time(out, &mut ws.scratch);
        } else {
            out.iter_mut().for_each(|o| *o *= ig);
        }
    }
}

pub fn propagate(field: &Field, fiber: &FiberParams, opts: &SolverOptions) -> Result<Field> {
    Propagator::new(field.grid().clone(), *fiber, *opts)?.propagate(field)
}

/// Relative L2 change of the output when the step count is doubled.
pub fn check_step_convergence(prop: &Propagator, field: &Field) -> Result<f64> {
    let coarse = prop.propagate(field)?;
    let fine = prop.with_steps(prop.steps() * 2)?.propagate(field)?;
    Ok(relative_l2(coarse.samples(), fine.samples()))
}

pub fn relative_l2(a: &[Complex64], b: &[Complex64]) -> f64 {
    let num: f64 = a.iter().zip(b).map(|(x, y)| (x - y).norm_sqr()).sum();
    let den: f64 = b.iter().map(|y| y.norm_sqr()).sum();
    if den == 0.0 {
        num.sqrt()
    } else {
        (num / den).sqrt()
    }
}

/// Output spectrum for each input peak power, the other pulse parameters held.
pub fn spectrum_vs_power(
    spec: &PulseSpec,
    prop: &Propagator,
    powers: &[f64],
) -> Result<Vec<SpectralField>> {
    use rayon::prelude::*;
    powers
        .par_iter()
        .map(|&p| {
            let pulse = PulseSpec {
                peak_power: p,
                ..*spec
            };
            synthesize_pulse(&pulse, prop.grid())
                .and_then(|f| prop.propagate(&f))
                .map(|f| to_spectrum(&f))
                .map_err(|e| Error::AtPower {
                    power_w: p,
                    source: Box::new(e),
                })
        })
        .collect()
}
