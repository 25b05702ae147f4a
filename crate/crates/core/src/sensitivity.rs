//! Linearized quantum noise from classical sensitivities.
//!
//! For input spectral amplitudes `alpha_i = x_i + i y_i` the sensitivity of an
//! observable is the Wirtinger derivative `dX/d alpha_i = (dX/dx_i - i dX/dy_i) / 2`
//! taken with `alpha_i*` held fixed. With phase-insensitive, uncorrelated input
//! noise of Fano factor `F_i` the output variance is
//! `Var(X) = sum_i F_i |dX/d alpha_i|^2`; a coherent state (`F = 1`) then gives
//! `Var(n) = <n>` exactly.

use std::sync::Arc;

use nalgebra::DMatrix;
use num_complex::Complex64;
use rayon::prelude::*;

use crate::error::{invalid, Error, Result};
use crate::field::{from_spectrum, photon_numbers, to_spectrum, Field, Grid, SpectralField};
use crate::gnlse::Propagator;

/// A deterministic map from input to output field.
pub trait System: Sync {
    fn apply(&self, input: &Field) -> Result<Field>;

    /// Evaluation of a slightly perturbed copy of an input that already went
    /// through [`apply`](Self::apply). Systems may skip checks that the
    /// perturbation itself would trip.
    fn apply_probe(&self, input: &Field) -> Result<Field> {
        self.apply(input)
    }
}

impl System for Propagator {
    fn apply(&self, input: &Field) -> Result<Field> {
        self.propagate(input)
    }

    fn apply_probe(&self, input: &Field) -> Result<Field> {
        self.propagate_unmonitored(input)
    }
}

/// The trivial system; output equals input.
#[derive(Debug, Clone, Copy, Default)]
pub struct Identity;

impl System for Identity {
    fn apply(&self, input: &Field) -> Result<Field> {
        Ok(input.clone())
    }
}

/// Diagonal linear system: multiplies every spectral bin by a fixed complex
/// transmission (dispersion, uniform attenuation, ...).
#[derive(Debug, Clone)]
pub struct SpectralMultiplier {
    pub transfer: Vec<Complex64>,
}

impl SpectralMultiplier {
    pub fn uniform(n: usize, amplitude: Complex64) -> Self {
        Self {
            transfer: vec![amplitude; n],
        }
    }
}

impl System for SpectralMultiplier {
    fn apply(&self, input: &Field) -> Result<Field> {
        let mut sf = to_spectrum(input);
        if sf.amplitudes().len() != self.transfer.len() {
            return Err(Error::ShapeMismatch {
                expected: self.transfer.len(),
                found: sf.amplitudes().len(),
            });
        }
        for (a, t) in sf.amplitudes_mut().iter_mut().zip(&self.transfer) {
            *a *= t;
        }
        Ok(from_spectrum(&sf))
    }
}

/// Lossless two-port mixer between signal bins and ancilla bins:
/// `s' = sqrt(eta) s + sqrt(1-eta) a`, `a' = sqrt(eta) a - sqrt(1-eta) s`.
/// With empty ancillas this is a physical attenuator; the ancilla vacuum
/// supplies the noise a bare amplitude scaling would drop.
#[derive(Debug, Clone)]
pub struct BeamSplitter {
    pub signal: Vec<usize>,
    pub ancilla: Vec<usize>,
    pub transmission: f64,
}

impl System for BeamSplitter {
    fn apply(&self, input: &Field) -> Result<Field> {
        if self.signal.len() != self.ancilla.len() || !(0.0..=1.0).contains(&self.transmission) {
            return Err(invalid("beam splitter needs paired ports and transmission in [0, 1]"));
        }
        let mut sf = to_spectrum(input);
        let (t, r) = (self.transmission.sqrt(), (1.0 - self.transmission).sqrt());
        let amps = sf.amplitudes_mut();
        for (&s, &a) in self.signal.iter().zip(&self.ancilla) {
            let (x, y) = (amps[s], amps[a]);
            amps[s] = x * t + y * r;
            amps[a] = y * t - x * r;
        }
        Ok(from_spectrum(&sf))
    }
}

impl<F> System for F
where
    F: Fn(&Field) -> Result<Field> + Sync,
{
    fn apply(&self, input: &Field) -> Result<Field> {
        self(input)
    }
}

/// Per-input-bin Fano factors.
#[derive(Debug, Clone, PartialEq)]
pub struct NoiseModel {
    fano: Vec<f64>,
}

impl NoiseModel {
    pub fn new(fano: Vec<f64>) -> Result<Self> {
        if let Some((i, f)) = fano.iter().enumerate().find(|(_, f)| !(**f >= 1.0 && f.is_finite())) {
            return Err(Error::InvalidNoiseModel(format!(
                "Fano factor of bin {i} is {f}; phase-insensitive noise needs F >= 1"
            )));
        }
        Ok(Self { fano })
    }

    /// Vacuum/coherent noise on every bin.
    pub fn coherent(n: usize) -> Self {
        Self {
            fano: vec![1.0; n],
        }
    }

    /// `f_pump` on bins whose input photon number exceeds `threshold` times
    /// the spectral peak, vacuum elsewhere.
    pub fn amplified_pump(input_photons: &[f64], f_pump: f64, threshold: f64) -> Result<Self> {
        let peak = input_photons.iter().cloned().fold(0.0, f64::max);
        let fano = input_photons
            .iter()
            .map(|&n| if peak > 0.0 && n > threshold * peak { f_pump } else { 1.0 })
            .collect();
        Self::new(fano)
    }

    pub fn fano(&self) -> &[f64] {
        &self.fano
    }

    pub fn len(&self) -> usize {
        self.fano.len()
    }

    pub fn is_empty(&self) -> bool {
        self.fano.is_empty()
    }

    /// Bins carrying excess (above-vacuum) noise.
    pub fn noisy_bins(&self) -> impl Iterator<Item = usize> + '_ {
        self.fano.iter().enumerate().filter(|(_, f)| **f > 1.0).map(|(i, _)| i)
    }
}

/// Photon-number observables evaluated on the output spectrum (natural order).
#[derive(Debug, Clone, PartialEq)]
pub enum Observable {
    /// `sum_k t_k n_k` for a transmission mask over output bins.
    Filtered(Vec<f64>),
    SingleBin(usize),
    Pair(usize, usize),
    /// Sum over a group of bins, e.g. one coarse spectral channel.
    BinGroup(Vec<usize>),
}

impl Observable {
    pub fn validate(&self, n: usize) -> Result<()> {
        let in_range = |k: usize| {
            if k < n {
                Ok(())
            } else {
                Err(invalid(format!("observable bin {k} outside 0..{n}")))
            }
        };
        match self {
            Observable::Filtered(t) => {
                if t.len() != n {
                    return Err(Error::ShapeMismatch {
                        expected: n,
                        found: t.len(),
                    });
                }
                if t.iter().any(|v| !(0.0..=1.0).contains(v)) {
                    return Err(invalid("mask entries must lie in [0, 1]"));
                }
                Ok(())
            }
            Observable::SingleBin(k) => in_range(*k),
            Observable::Pair(a, b) => in_range(*a).and(in_range(*b)),
            Observable::BinGroup(g) => g.iter().try_for_each(|&k| in_range(k)),
        }
    }

    pub fn evaluate(&self, photons: &[f64]) -> f64 {
        match self {
            Observable::Filtered(t) => t.iter().zip(photons).map(|(t, n)| t * n).sum(),
            Observable::SingleBin(k) => photons[*k],
            Observable::Pair(a, b) => photons[*a] + photons[*b],
            Observable::BinGroup(g) => g.iter().map(|&k| photons[k]).sum(),
        }
    }
}

/// Groups of natural-order DFT bins forming contiguous coarse spectral
/// channels, ordered by ascending frequency.
#[derive(Debug, Clone, PartialEq)]
pub struct SpectralBinning {
    groups: Vec<Vec<usize>>,
}

impl SpectralBinning {
    /// Splits the central `span` bins of the window into `n_bins` equal
    /// channels. `span` must be a multiple of `n_bins`.
    pub fn centered(grid: &Grid, n_bins: usize, span: usize) -> Result<Self> {
        let n = grid.n_samples();
        if n_bins == 0 || span == 0 || span > n || span % n_bins != 0 {
            return Err(invalid(format!(
                "cannot split {span} of {n} bins into {n_bins} channels"
            )));
        }
        let order = grid.shifted_order();
        let start = (n - span) / 2;
        let width = span / n_bins;
        let groups = (0..n_bins)
            .map(|b| order[start + b * width..start + (b + 1) * width].to_vec())
            .collect();
        Ok(Self { groups })
    }

    /// One channel per DFT bin, ascending frequency.
    pub fn identity(grid: &Grid) -> Self {
        Self {
            groups: grid.shifted_order().into_iter().map(|k| vec![k]).collect(),
        }
    }

    pub fn len(&self) -> usize {
        self.groups.len()
    }

    pub fn is_empty(&self) -> bool {
        self.groups.is_empty()
    }

    pub fn groups(&self) -> &[Vec<usize>] {
        &self.groups
    }

    pub fn observables(&self) -> Vec<Observable> {
        self.groups.iter().cloned().map(Observable::BinGroup).collect()
    }

    /// Sums per-bin photon numbers into channels.
    pub fn aggregate(&self, photons: &[f64]) -> Vec<f64> {
        self.groups
            .iter()
            .map(|g| g.iter().map(|&k| photons[k]).sum())
            .collect()
    }

    /// Mean angular detuning of each channel.
    pub fn center_detunings(&self, grid: &Grid) -> Vec<f64> {
        self.groups
            .iter()
            .map(|g| g.iter().map(|&k| grid.detunings()[k]).sum::<f64>() / g.len() as f64)
            .collect()
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Pruning {
    /// Columns on this stride are always computed and used as a coarse scan.
    pub stride: usize,
    /// Columns whose bracketing scan columns fall below this fraction of the
    /// row maximum are skipped.
    pub threshold: f64,
}

impl Default for Pruning {
    fn default() -> Self {
        Self {
            stride: 4,
            threshold: 1e-6,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct JacobianOptions {
    /// Probe step in photon-amplitude units. `None` uses
    /// `1e-3 * max(1, max_i |alpha_i|)`.
    pub probe_step: Option<f64>,
    /// Re-evaluate every `verify_stride`-th computed column at half the probe
    /// step and flag entries that move by more than `verify_tolerance`.
    /// Zero disables the check.
    pub verify_stride: usize,
    pub verify_tolerance: f64,
    pub pruning: Option<Pruning>,
}

impl Default for JacobianOptions {
    fn default() -> Self {
        Self {
            probe_step: None,
            verify_stride: 16,
            verify_tolerance: 0.01,
            pruning: Some(Pruning::default()),
        }
    }
}

impl JacobianOptions {
    /// Every column, no verification.
    pub fn exhaustive() -> Self {
        Self {
            verify_stride: 0,
            pruning: None,
            ..Self::default()
        }
    }
}

/// An entry whose value changed by more than the tolerance under step halving.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FlaggedEntry {
    pub row: usize,
    pub col: usize,
    pub relative_change: f64,
}

/// Wirtinger derivatives of observables (rows) w.r.t. input spectral bins
/// (columns, natural DFT order).
#[derive(Debug, Clone)]
pub struct SensitivityMatrix {
    rows: usize,
    cols: usize,
    entries: Vec<Complex64>,
    /// Observable values at the base input.
    pub base_values: Vec<f64>,
    /// Per-bin photon numbers of the base input spectrum.
    pub input_photons: Vec<f64>,
    pub probe_step: f64,
    pub pruned: Vec<usize>,
    pub flagged: Vec<FlaggedEntry>,
    /// Number of system evaluations spent.
    pub evaluations: usize,
}

impl SensitivityMatrix {
    pub fn from_entries(
        rows: usize,
        cols: usize,
        entries: Vec<Complex64>,
        base_values: Vec<f64>,
    ) -> Result<Self> {
        if entries.len() != rows * cols {
            return Err(Error::ShapeMismatch {
                expected: rows * cols,
                found: entries.len(),
            });
        }
        if base_values.len() != rows {
            return Err(Error::ShapeMismatch {
                expected: rows,
                found: base_values.len(),
            });
        }
        Ok(Self {
            rows,
            cols,
            entries,
            base_values,
            input_photons: vec![0.0; cols],
            probe_step: 0.0,
            pruned: Vec::new(),
            flagged: Vec::new(),
            evaluations: 0,
        })
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    /// Row-major entries.
    pub fn entries(&self) -> &[Complex64] {
        &self.entries
    }

    pub fn row(&self, r: usize) -> &[Complex64] {
        &self.entries[r * self.cols..(r + 1) * self.cols]
    }

    pub fn get(&self, r: usize, c: usize) -> Complex64 {
        self.entries[r * self.cols + c]
    }

    /// Sensitivity row of the linear combination `sum_r w_r X_r`.
    pub fn combine(&self, weights: &[f64]) -> Result<Vec<Complex64>> {
        if weights.len() != self.rows {
            return Err(Error::ShapeMismatch {
                expected: self.rows,
                found: weights.len(),
            });
        }
        let mut out = vec![Complex64::default(); self.cols];
        for (r, &w) in weights.iter().enumerate() {
            if w != 0.0 {
                for (o, j) in out.iter_mut().zip(self.row(r)) {
                    *o += j * w;
                }
            }
        }
        Ok(out)
    }

    /// Scales every entry; used by validation negative controls.
    pub fn scaled(&self, factor: f64) -> Self {
        let mut s = self.clone();
        s.entries.iter_mut().for_each(|e| *e *= factor);
        s
    }
}

fn evaluate_observables(
    system: &dyn System,
    grid: &Arc<Grid>,
    spectrum: &[Complex64],
    observables: &[Observable],
    probe: bool,
) -> Result<Vec<f64>> {
    let input = from_spectrum(&SpectralField::new(grid.clone(), spectrum.to_vec())?);
    let out = if probe {
        system.apply_probe(&input)?
    } else {
        system.apply(&input)?
    };
    let photons = photon_numbers(&to_spectrum(&out));
    Ok(observables.iter().map(|o| o.evaluate(&photons)).collect())
}

/// Central-difference Wirtinger derivatives for one input bin.
fn column(
    system: &dyn System,
    grid: &Arc<Grid>,
    base: &[Complex64],
    observables: &[Observable],
    bin: usize,
    h: f64,
) -> Result<Vec<Complex64>> {
    let mut probe = base.to_vec();
    let mut eval = |delta: Complex64| {
        probe[bin] = base[bin] + delta;
        evaluate_observables(system, grid, &probe, observables, true)
    };
    let xp = eval(Complex64::new(h, 0.0))?;
    let xm = eval(Complex64::new(-h, 0.0))?;
    let yp = eval(Complex64::new(0.0, h))?;
    let ym = eval(Complex64::new(0.0, -h))?;
    Ok((0..observables.len())
        .map(|r| {
            let dx = (xp[r] - xm[r]) / (2.0 * h);
            let dy = (yp[r] - ym[r]) / (2.0 * h);
            Complex64::new(0.5 * dx, -0.5 * dy)
        })
        .collect())
}

/// Finite-difference Wirtinger Jacobian of `observables` around `base`,
/// perturbing each input spectral bin (vacuum bins included).
pub fn wirtinger_jacobian(
    system: &dyn System,
    base: &Field,
    observables: &[Observable],
    opts: &JacobianOptions,
) -> Result<SensitivityMatrix> {
    let grid = base.grid().clone();
    let n = grid.n_samples();
    for o in observables {
        o.validate(n)?;
    }
    let spectrum = to_spectrum(base);
    let amps = spectrum.amplitudes().to_vec();
    let max_amp = amps.iter().map(|a| a.norm()).fold(0.0, f64::max);
    let h = match opts.probe_step {
        Some(h) if h > 0.0 => h,
        Some(h) => return Err(invalid(format!("probe_step must be positive, got {h}"))),
        None => 1e-3 * max_amp.max(1.0),
    };
    let rows = observables.len();
    let base_values = evaluate_observables(system, &grid, &amps, observables, false)?;
    let input_photons = photon_numbers(&spectrum);
    let peak_in = input_photons.iter().cloned().fold(0.0, f64::max);

    let compute = |bins: &[usize]| -> Result<Vec<Vec<Complex64>>> {
        bins.par_iter()
            .map(|&i| column(system, &grid, &amps, observables, i, h))
            .collect()
    };

    let mut cols: Vec<Option<Vec<Complex64>>> = vec![None; n];
    let mut evaluations = 1;
    let scan: Vec<usize> = match opts.pruning {
        Some(p) if p.stride > 1 => (0..n).step_by(p.stride).collect(),
        _ => (0..n).collect(),
    };
    for (i, c) in scan.iter().zip(compute(&scan)?) {
        cols[*i] = Some(c);
    }
    evaluations += 4 * scan.len();

    let mut pruned = Vec::new();
    if let Some(p) = opts.pruning.filter(|p| p.stride > 1) {
        let row_max: Vec<f64> = (0..rows)
            .map(|r| {
                scan.iter()
                    .map(|&i| cols[i].as_ref().unwrap()[r].norm())
                    .fold(0.0, f64::max)
            })
            .collect();
        let negligible = |i: usize| {
            let c = cols[i].as_ref().unwrap();
            (0..rows).all(|r| c[r].norm() <= p.threshold * row_max[r])
        };
        let mut todo = Vec::new();
        for i in 0..n {
            if cols[i].is_some() {
                continue;
            }
            let lo = i - i % p.stride;
            let hi = (lo + p.stride) % n;
            let occupied = peak_in > 0.0 && input_photons[i] > 1e-4 * peak_in;
            if !occupied && negligible(lo) && negligible(hi) {
                pruned.push(i);
            } else {
                todo.push(i);
            }
        }
        for (i, c) in todo.iter().zip(compute(&todo)?) {
            cols[*i] = Some(c);
        }
        evaluations += 4 * todo.len();
    }

    let mut flagged = Vec::new();
    if opts.verify_stride > 0 {
        let check: Vec<usize> = (0..n)
            .filter(|i| cols[*i].is_some() && !pruned.contains(i))
            .step_by(opts.verify_stride)
            .collect();
        let halved: Vec<Vec<Complex64>> = check
            .par_iter()
            .map(|&i| column(system, &grid, &amps, observables, i, 0.5 * h))
            .collect::<Result<_>>()?;
        evaluations += 4 * check.len();
        for (r, row_max) in (0..rows).map(|r| {
            let m = cols
                .iter()
                .flatten()
                .map(|c| c[r].norm())
                .fold(0.0, f64::max);
            (r, m)
        }) {
            for (&i, fine) in check.iter().zip(&halved) {
                let coarse = cols[i].as_ref().unwrap()[r];
                let scale = coarse.norm().max(1e-4 * row_max);
                if scale == 0.0 {
                    continue;
                }
                let change = (coarse - fine[r]).norm() / scale;
                if change > opts.verify_tolerance {
                    flagged.push(FlaggedEntry {
                        row: r,
                        col: i,
                        relative_change: change,
                    });
                }
            }
        }
    }

    let mut entries = vec![Complex64::default(); rows * n];
    for (i, c) in cols.iter().enumerate() {
        if let Some(c) = c {
            for r in 0..rows {
                entries[r * n + i] = c[r];
            }
        }
    }
    if entries.iter().any(|e| !e.re.is_finite() || !e.im.is_finite()) {
        return Err(Error::NumericalBlowup { z: f64::NAN });
    }
    Ok(SensitivityMatrix {
        rows,
        cols: n,
        entries,
        base_values,
        input_photons,
        probe_step: h,
        pruned,
        flagged,
        evaluations,
    })
}

fn check_noise(noise: &NoiseModel, cols: usize) -> Result<()> {
    NoiseModel::new(noise.fano.clone())?;
    if noise.len() != cols {
        return Err(Error::ShapeMismatch {
            expected: cols,
            found: noise.len(),
        });
    }
    Ok(())
}

/// `sum_i F_i |J_i|^2` for one sensitivity row.
pub fn variance_eq1(row: &[Complex64], noise: &NoiseModel) -> Result<f64> {
    check_noise(noise, row.len())?;
    Ok(row
        .iter()
        .zip(&noise.fano)
        .map(|(j, f)| f * j.norm_sqr())
        .sum())
}

/// Output intensity covariance over the observables of a sensitivity matrix.
#[derive(Debug, Clone, PartialEq)]
pub struct CovarianceMatrix {
    dim: usize,
    values: Vec<f64>,
    mean: Vec<f64>,
}

impl CovarianceMatrix {
    pub fn new(dim: usize, values: Vec<f64>, mean: Vec<f64>) -> Result<Self> {
        if values.len() != dim * dim {
            return Err(Error::ShapeMismatch {
                expected: dim * dim,
                found: values.len(),
            });
        }
        if mean.len() != dim {
            return Err(Error::ShapeMismatch {
                expected: dim,
                found: mean.len(),
            });
        }
        Ok(Self { dim, values, mean })
    }

    /// Independent shot noise per channel: `C = diag(scale * mean)`.
    pub fn diagonal(mean: Vec<f64>, scale: f64) -> Self {
        let dim = mean.len();
        let mut values = vec![0.0; dim * dim];
        for (i, m) in mean.iter().enumerate() {
            values[i * dim + i] = scale * m;
        }
        Self { dim, values, mean }
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn get(&self, a: usize, b: usize) -> f64 {
        self.values[a * self.dim + b]
    }

    pub fn set(&mut self, a: usize, b: usize, v: f64) {
        self.values[a * self.dim + b] = v;
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn mean(&self) -> &[f64] {
        &self.mean
    }

    pub fn total_mean(&self) -> f64 {
        self.mean.iter().sum()
    }

    pub fn trace(&self) -> f64 {
        (0..self.dim).map(|i| self.get(i, i)).sum()
    }

    /// `t . (C t)`
    pub fn quadratic_form(&self, t: &[f64]) -> f64 {
        (0..self.dim)
            .filter(|&a| t[a] != 0.0)
            .map(|a| {
                let row = &self.values[a * self.dim..(a + 1) * self.dim];
                t[a] * row.iter().zip(t).map(|(c, tb)| c * tb).sum::<f64>()
            })
            .sum()
    }

    pub fn max_asymmetry(&self) -> f64 {
        let mut worst = 0.0f64;
        for a in 0..self.dim {
            for b in 0..a {
                worst = worst.max((self.get(a, b) - self.get(b, a)).abs());
            }
        }
        worst
    }

    pub fn min_eigenvalue(&self) -> f64 {
        if self.dim == 0 {
            return 0.0;
        }
        let m = DMatrix::from_row_slice(self.dim, self.dim, &self.values);
        let sym = (&m + m.transpose()) * 0.5;
        sym.symmetric_eigenvalues().min()
    }

    /// Symmetric, non-negative diagonal and PSD to `-tol * trace`.
    pub fn check_invariants(&self, tol: f64) -> Result<()> {
        let trace = self.trace();
        let scale = trace.abs().max(f64::MIN_POSITIVE);
        let asym = self.max_asymmetry();
        if asym > tol * scale {
            return Err(invalid(format!("covariance not symmetric: max |C_ab - C_ba| = {asym:.3e}")));
        }
        if let Some(i) = (0..self.dim).find(|&i| self.get(i, i) < -tol * scale) {
            return Err(invalid(format!("negative variance on channel {i}")));
        }
        let lmin = self.min_eigenvalue();
        if lmin < -1e-8 * scale {
            return Err(invalid(format!(
                "covariance not positive semidefinite: smallest eigenvalue {lmin:.3e}, trace {trace:.3e}"
            )));
        }
        Ok(())
    }
}

/// `C_ab = sum_i F_i Re[J_ai conj(J_bi)]` over all rows of the Jacobian.
pub fn covariance_eq1(jac: &SensitivityMatrix, noise: &NoiseModel) -> Result<CovarianceMatrix> {
    check_noise(noise, jac.cols)?;
    let dim = jac.rows;
    let sqrt_f: Vec<f64> = noise.fano.iter().map(|f| f.sqrt()).collect();
    let weighted: Vec<Vec<Complex64>> = (0..dim)
        .map(|r| jac.row(r).iter().zip(&sqrt_f).map(|(j, s)| j * s).collect())
        .collect();
    let rows: Vec<Vec<f64>> = (0..dim)
        .into_par_iter()
        .map(|a| {
            (0..dim)
                .map(|b| {
                    if b < a {
                        return 0.0;
                    }
                    weighted[a]
                        .iter()
                        .zip(&weighted[b])
                        .map(|(x, y)| x.re * y.re + x.im * y.im)
                        .sum()
                })
                .collect()
        })
        .collect();
    let mut values = vec![0.0; dim * dim];
    for a in 0..dim {
        for b in a..dim {
            values[a * dim + b] = rows[a][b];
            values[b * dim + a] = rows[a][b];
        }
    }
    CovarianceMatrix::new(dim, values, jac.base_values.clone())
}

/// Output Fano factor, variance over mean.
pub fn fano_out(variance: f64, mean: f64) -> Result<f64> {
    if !(mean > 0.0) {
        return Err(Error::UndefinedNormalization { mean });
    }
    Ok(variance / mean)
}

/// `10 log10 F`; 0 dB is shot noise.
pub fn to_decibels(fano: f64) -> f64 {
    10.0 * fano.log10()
}
