//! Spectral filter algebra and optimization on an output covariance matrix.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

use crate::error::{invalid, Error, Result};
use crate::sensitivity::{covariance_eq1, to_decibels, CovarianceMatrix, NoiseModel, SensitivityMatrix};

/// Intensity transmission per output channel.
#[derive(Debug, Clone, PartialEq)]
pub struct FilterMask {
    t: Vec<f64>,
}

impl FilterMask {
    pub fn new(t: Vec<f64>) -> Result<Self> {
        if let Some((i, v)) = t.iter().enumerate().find(|(_, v)| !(0.0..=1.0).contains(*v)) {
            return Err(invalid(format!("mask entry {i} = {v} outside [0, 1]")));
        }
        Ok(Self { t })
    }

    pub fn from_bits(bits: &[bool]) -> Self {
        Self {
            t: bits.iter().map(|&b| if b { 1.0 } else { 0.0 }).collect(),
        }
    }

    pub fn uniform(len: usize, eta: f64) -> Result<Self> {
        Self::new(vec![eta; len])
    }

    pub fn all_pass(len: usize) -> Self {
        Self { t: vec![1.0; len] }
    }

    pub fn values(&self) -> &[f64] {
        &self.t
    }

    pub fn len(&self) -> usize {
        self.t.len()
    }

    pub fn is_empty(&self) -> bool {
        self.t.is_empty()
    }

    pub fn is_binary(&self) -> bool {
        self.t.iter().all(|&v| v == 0.0 || v == 1.0)
    }

    pub fn open_channels(&self) -> impl Iterator<Item = usize> + '_ {
        self.t.iter().enumerate().filter(|(_, v)| **v > 0.0).map(|(i, _)| i)
    }

    /// Compact `0`/`1` string; partial entries print as `~`.
    pub fn to_bit_string(&self) -> String {
        self.t
            .iter()
            .map(|&v| match v {
                v if v == 0.0 => '0',
                v if v == 1.0 => '1',
                _ => '~',
            })
            .collect()
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FilterResult {
    pub transmitted_mean: f64,
    pub variance: f64,
    pub fano: f64,
    pub fano_db: f64,
    pub transmission_fraction: f64,
}

/// `Var = t.(C t) + sum t(1-t) <n>`; the second term is the vacuum noise a
/// partially transmitting channel lets in and vanishes for binary masks.
pub fn filter_noise(c: &CovarianceMatrix, mask: &FilterMask) -> Result<FilterResult> {
    if mask.len() != c.dim() {
        return Err(Error::ShapeMismatch {
            expected: c.dim(),
            found: mask.len(),
        });
    }
    let t = mask.values();
    let mean = c.mean();
    let partial: f64 = t.iter().zip(mean).map(|(t, n)| t * (1.0 - t) * n).sum();
    let variance = c.quadratic_form(t) + partial;
    let transmitted_mean: f64 = t.iter().zip(mean).map(|(t, n)| t * n).sum();
    let total = c.total_mean();
    Ok(result_from(variance, transmitted_mean, total))
}

fn result_from(variance: f64, transmitted_mean: f64, total: f64) -> FilterResult {
    let fano = if transmitted_mean > 0.0 {
        variance / transmitted_mean
    } else {
        f64::NAN
    };
    FilterResult {
        transmitted_mean,
        variance,
        fano,
        fano_db: to_decibels(fano),
        transmission_fraction: if total > 0.0 { transmitted_mean / total } else { 0.0 },
    }
}

/// Fano factor after frequency-independent attenuation to transmission `eta`.
pub fn linear_loss_fano(f0: f64, eta: f64) -> Result<f64> {
    if !(f0 >= 1.0) || !(0.0..=1.0).contains(&eta) {
        return Err(invalid(format!(
            "linear_loss_fano needs f0 >= 1 and eta in [0, 1], got ({f0}, {eta})"
        )));
    }
    Ok(1.0 + eta * (f0 - 1.0))
}

#[derive(Debug, Clone, PartialEq)]
pub struct SweepEntry {
    pub id: usize,
    pub mask: FilterMask,
    pub result: FilterResult,
    /// Linear-loss Fano at the same transmission, from the unfiltered Fano.
    pub linear_loss_fano: f64,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SweepOptions {
    /// Largest on/off block width, in channels.
    pub max_block: usize,
}

impl Default for SweepOptions {
    fn default() -> Self {
        Self { max_block: 8 }
    }
}

/// Random binary mask made of contiguous on/off blocks of random widths.
fn random_block_mask<R: Rng>(rng: &mut R, dim: usize, max_block: usize) -> Vec<bool> {
    let duty: f64 = rng.random();
    let width_cap = rng.random_range(1..=max_block.max(1));
    let mut bits = Vec::with_capacity(dim);
    while bits.len() < dim {
        let on = rng.random::<f64>() < duty;
        let w = rng.random_range(1..=width_cap);
        bits.extend(std::iter::repeat_n(on, w.min(dim - bits.len())));
    }
    bits
}

fn substream(seed: u64, stream: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(stream);
    rng
}

pub fn random_filter_sweep(
    c: &CovarianceMatrix,
    n_filters: usize,
    seed: u64,
    opts: &SweepOptions,
) -> Result<Vec<SweepEntry>> {
    let total = c.total_mean();
    let unfiltered = filter_noise(c, &FilterMask::all_pass(c.dim()))?;
    let f0 = unfiltered.fano.max(1.0);
    (0..n_filters)
        .into_par_iter()
        .map(|id| {
            let mut rng = substream(seed, id as u64);
            let mask = FilterMask::from_bits(&random_block_mask(&mut rng, c.dim(), opts.max_block));
            let result = filter_noise(c, &mask)?;
            let eta = if total > 0.0 { result.transmission_fraction } else { 0.0 };
            Ok(SweepEntry {
                id,
                mask,
                result,
                linear_loss_fano: linear_loss_fano(f0, eta.clamp(0.0, 1.0))?,
            })
        })
        .collect()
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct OptimizerOptions {
    /// Allowed absolute deviation of the transmission fraction from target.
    pub tolerance: f64,
    /// Random restarts on top of the greedy seeds.
    pub restarts: usize,
    pub seed: u64,
    pub max_sweeps: usize,
}

impl Default for OptimizerOptions {
    fn default() -> Self {
        Self {
            tolerance: 0.02,
            restarts: 16,
            seed: 0x5eed,
            max_sweeps: 10_000,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct OptimizedFilter {
    pub mask: FilterMask,
    pub result: FilterResult,
    /// False when the local search hit `max_sweeps` before settling.
    pub converged: bool,
}

/// Incremental state of a binary selection: variance and `g_k = sum_{j in S} C_jk`.
#[derive(Clone)]
struct Selection<'a> {
    c: &'a CovarianceMatrix,
    on: Vec<bool>,
    g: Vec<f64>,
    var: f64,
    mean: f64,
}

impl<'a> Selection<'a> {
    fn new(c: &'a CovarianceMatrix, on: &[bool]) -> Self {
        let mut s = Self {
            c,
            on: vec![false; c.dim()],
            g: vec![0.0; c.dim()],
            var: 0.0,
            mean: 0.0,
        };
        for (k, &b) in on.iter().enumerate() {
            if b {
                s.add(k);
            }
        }
        s
    }

    fn add_delta(&self, k: usize) -> f64 {
        2.0 * self.g[k] + self.c.get(k, k)
    }

    fn remove_delta(&self, k: usize) -> f64 {
        -2.0 * self.g[k] + self.c.get(k, k)
    }

    fn swap_delta(&self, out: usize, inn: usize) -> f64 {
        self.remove_delta(out) + 2.0 * (self.g[inn] - self.c.get(out, inn)) + self.c.get(inn, inn)
    }

    fn add(&mut self, k: usize) {
        self.var += self.add_delta(k);
        self.mean += self.c.mean()[k];
        self.on[k] = true;
        for (j, g) in self.g.iter_mut().enumerate() {
            *g += self.c.get(k, j);
        }
    }

    fn remove(&mut self, k: usize) {
        self.var += self.remove_delta(k);
        self.mean -= self.c.mean()[k];
        self.on[k] = false;
        for (j, g) in self.g.iter_mut().enumerate() {
            *g -= self.c.get(k, j);
        }
    }
}

struct Problem<'a> {
    c: &'a CovarianceMatrix,
    total: f64,
    lo: f64,
    hi: f64,
    /// Channels with photons; empty channels change nothing.
    active: Vec<usize>,
}

impl Problem<'_> {
    fn feasible(&self, mean: f64) -> bool {
        mean >= self.lo && mean <= self.hi && mean > 0.0
    }

    /// Infeasibility first, then Fano.
    fn score(&self, var: f64, mean: f64) -> (f64, f64) {
        let gap = if mean < self.lo {
            self.lo - mean
        } else if mean > self.hi {
            mean - self.hi
        } else {
            0.0
        };
        let fano = if mean > 0.0 { var / mean } else { f64::INFINITY };
        (gap / self.total, fano)
    }

    fn better(a: (f64, f64), b: (f64, f64)) -> bool {
        a.0 < b.0 - 1e-15 || (a.0 <= b.0 + 1e-15 && a.1 < b.1 * (1.0 - 1e-12) - 1e-300)
    }

    /// Forward greedy: repeatedly open the channel that gives the lowest Fano
    /// until the transmission window is reached.
    fn greedy_forward(&self, start: Option<usize>) -> Vec<bool> {
        let mut s = Selection::new(self.c, &vec![false; self.c.dim()]);
        if let Some(k) = start {
            s.add(k);
        }
        let target = 0.5 * (self.lo + self.hi);
        while s.mean < self.lo {
            let best = self
                .active
                .iter()
                .filter(|&&k| !s.on[k])
                .map(|&k| {
                    let m = s.mean + self.c.mean()[k];
                    let over = (m - self.hi).max(0.0);
                    (k, (over, (s.var + s.add_delta(k)) / m))
                })
                .min_by(|a, b| a.1.partial_cmp(&b.1).unwrap());
            match best {
                Some((k, _)) => s.add(k),
                None => break,
            }
            if s.mean >= target {
                break;
            }
        }
        s.on
    }

    /// Backward greedy: start fully open and close channels.
    fn greedy_backward(&self) -> Vec<bool> {
        let mut s = Selection::new(self.c, &vec![true; self.c.dim()]);
        while s.mean > self.hi {
            let best = self
                .active
                .iter()
                .filter(|&&k| s.on[k])
                .map(|&k| {
                    let m = s.mean - self.c.mean()[k];
                    let under = (self.lo - m).max(0.0);
                    let fano = if m > 0.0 { (s.var + s.remove_delta(k)) / m } else { f64::INFINITY };
                    (k, (under, fano))
                })
                .min_by(|a, b| a.1.partial_cmp(&b.1).unwrap());
            match best {
                Some((k, _)) => s.remove(k),
                None => break,
            }
        }
        s.on
    }

    /// Best-improvement local search over single flips and swaps.
    fn local_search(&self, start: &[bool], max_sweeps: usize) -> (Vec<bool>, bool) {
        let mut s = Selection::new(self.c, start);
        for _ in 0..max_sweeps {
            let current = self.score(s.var, s.mean);
            let mut best: Option<((f64, f64), Move)> = None;
            let mut consider = |score: (f64, f64), mv: Move| {
                if Self::better(score, best.map_or(current, |b| b.0)) {
                    best = Some((score, mv));
                }
            };
            for &k in &self.active {
                let (var, mean) = if s.on[k] {
                    (s.var + s.remove_delta(k), s.mean - self.c.mean()[k])
                } else {
                    (s.var + s.add_delta(k), s.mean + self.c.mean()[k])
                };
                consider(self.score(var, mean), Move::Flip(k));
            }
            for &out in self.active.iter().filter(|&&k| s.on[k]) {
                for &inn in self.active.iter().filter(|&&k| !s.on[k]) {
                    let var = s.var + s.swap_delta(out, inn);
                    let mean = s.mean - self.c.mean()[out] + self.c.mean()[inn];
                    consider(self.score(var, mean), Move::Swap(out, inn));
                }
            }
            match best {
                Some((_, Move::Flip(k))) => {
                    if s.on[k] {
                        s.remove(k)
                    } else {
                        s.add(k)
                    }
                }
                Some((_, Move::Swap(out, inn))) => {
                    s.remove(out);
                    s.add(inn);
                }
                None => return (s.on, true),
            }
        }
        (s.on, false)
    }
}

#[derive(Clone, Copy)]
enum Move {
    Flip(usize),
    Swap(usize, usize),
}

/// Minimum-Fano binary mask whose transmission lies within
/// `target +- tolerance`: greedy seeds plus random restarts, each refined by
/// flip/swap local search.
pub fn optimize_filter(
    c: &CovarianceMatrix,
    target_transmission: f64,
    opts: &OptimizerOptions,
) -> Result<OptimizedFilter> {
    if !(target_transmission > 0.0 && target_transmission <= 1.0) {
        return Err(invalid(format!(
            "target transmission must lie in (0, 1], got {target_transmission}"
        )));
    }
    let total = c.total_mean();
    if !(total > 0.0) {
        return Err(Error::Infeasible("covariance has no mean photons".into()));
    }
    let active: Vec<usize> = (0..c.dim()).filter(|&k| c.mean()[k] > 0.0).collect();
    let problem = Problem {
        c,
        total,
        lo: (target_transmission - opts.tolerance).max(0.0) * total,
        hi: (target_transmission + opts.tolerance).min(1.0) * total,
        active,
    };

    let mut starts = vec![problem.greedy_forward(None), problem.greedy_backward()];
    // Greedy from the brightest channels and from random masks.
    let mut by_mean = problem.active.clone();
    by_mean.sort_by(|&a, &b| c.mean()[b].partial_cmp(&c.mean()[a]).unwrap());
    for &k in by_mean.iter().take(opts.restarts / 2) {
        starts.push(problem.greedy_forward(Some(k)));
    }
    for r in 0..opts.restarts {
        let mut rng = substream(opts.seed, r as u64);
        let p = target_transmission;
        starts.push(
            (0..c.dim())
                .map(|k| rng.random::<f64>() < p && c.mean()[k] > 0.0)
                .collect(),
        );
    }

    let candidates: Vec<(Vec<bool>, bool)> = starts
        .par_iter()
        .map(|s| problem.local_search(s, opts.max_sweeps))
        .collect();
    let mut best: Option<(Vec<bool>, bool, (f64, f64))> = None;
    for (bits, converged) in candidates {
        let s = Selection::new(c, &bits);
        let score = problem.score(s.var, s.mean);
        if best.as_ref().is_none_or(|b| Problem::better(score, b.2)) {
            best = Some((bits, converged, score));
        }
    }
    let (bits, converged, _) = best.expect("at least one start");
    let mask = FilterMask::from_bits(&bits);
    let result = filter_noise(c, &mask)?;
    if !problem.feasible(result.transmitted_mean) {
        return Err(Error::Infeasible(format!(
            "no binary mask reaches transmission {target_transmission} +- {} (best {:.4})",
            opts.tolerance, result.transmission_fraction
        )));
    }
    Ok(OptimizedFilter {
        mask,
        result,
        converged,
    })
}

/// Pair variance `V` and relative noise `R = V / min(C_aa, C_bb)` over all
/// channel pairs, row-major. Diagonal and zero-variance entries of `R` are NaN.
#[derive(Debug, Clone, PartialEq)]
pub struct PairNoiseMap {
    pub dim: usize,
    pub variance: Vec<f64>,
    pub relative: Vec<f64>,
}

impl PairNoiseMap {
    pub fn variance_at(&self, a: usize, b: usize) -> f64 {
        self.variance[a * self.dim + b]
    }

    pub fn relative_at(&self, a: usize, b: usize) -> Option<f64> {
        let r = self.relative[a * self.dim + b];
        (!r.is_nan()).then_some(r)
    }
}

pub fn pair_noise_map(c: &CovarianceMatrix) -> PairNoiseMap {
    let dim = c.dim();
    let mut variance = vec![f64::NAN; dim * dim];
    let mut relative = vec![f64::NAN; dim * dim];
    for a in 0..dim {
        for b in 0..dim {
            if a == b {
                continue;
            }
            let v = c.get(a, a) + c.get(b, b) + c.get(a, b) + c.get(b, a);
            variance[a * dim + b] = v;
            let floor = c.get(a, a).min(c.get(b, b));
            if floor > 0.0 {
                relative[a * dim + b] = v / floor;
            }
        }
    }
    PairNoiseMap {
        dim,
        variance,
        relative,
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ImmunityPoint {
    pub pump_fano: f64,
    pub optimized: OptimizedFilter,
    /// Variance floor from vacuum-only input bins for the optimized mask.
    pub vacuum_floor: f64,
}

/// Re-optimizes the filter for each pump Fano level, reusing the Jacobian and
/// rebuilding only the covariance.
pub fn noise_immunity_scan(
    jac: &SensitivityMatrix,
    fano_levels: &[f64],
    transmission: f64,
    occupied_threshold: f64,
    opts: &OptimizerOptions,
) -> Result<Vec<ImmunityPoint>> {
    fano_levels
        .iter()
        .map(|&f| {
            if !(f >= 1.0) {
                return Err(Error::InvalidNoiseModel(format!("pump Fano {f} < 1")));
            }
            let noise = NoiseModel::amplified_pump(&jac.input_photons, f, occupied_threshold)?;
            let c = covariance_eq1(jac, &noise)?;
            let optimized = optimize_filter(&c, transmission, opts)?;
            let vacuum_floor = vacuum_floor(jac, &noise, &optimized.mask)?;
            Ok(ImmunityPoint {
                pump_fano: f,
                optimized,
                vacuum_floor,
            })
        })
        .collect()
}

/// `sum_{i: F_i = 1} |dX/d alpha_i|^2` for the filtered observable of `mask`.
pub fn vacuum_floor(jac: &SensitivityMatrix, noise: &NoiseModel, mask: &FilterMask) -> Result<f64> {
    let row = jac.combine(mask.values())?;
    if noise.len() != row.len() {
        return Err(Error::ShapeMismatch {
            expected: row.len(),
            found: noise.len(),
        });
    }
    Ok(row
        .iter()
        .zip(noise.fano())
        .filter(|(_, f)| **f == 1.0)
        .map(|(j, _)| j.norm_sqr())
        .sum())
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    fn coherent(mean: &[f64], scale: f64) -> CovarianceMatrix {
        CovarianceMatrix::diagonal(mean.to_vec(), scale)
    }

    #[test]
    fn mask_validation() {
        assert!(FilterMask::new(vec![0.0, 1.1]).is_err());
        assert!(FilterMask::new(vec![-0.1]).is_err());
        let m = FilterMask::new(vec![0.0, 1.0, 0.5]).unwrap();
        assert!(!m.is_binary());
        assert_eq!(m.to_bit_string(), "01~");
        assert_eq!(m.open_channels().collect::<Vec<_>>(), vec![1, 2]);
    }

    #[test]
    fn coherent_light_stays_coherent_under_binary_masks() {
        let mean = [5.0, 0.0, 3.0, 7.0, 1.0];
        let c = coherent(&mean, 1.0);
        for bits in [[true, false, true, false, true], [false, false, false, true, false]] {
            let r = filter_noise(&c, &FilterMask::from_bits(&bits)).unwrap();
            assert_relative_eq!(r.fano, 1.0, max_relative = 1e-15);
        }
        let all = filter_noise(&c, &FilterMask::all_pass(5)).unwrap();
        assert_eq!(all.variance, 16.0);
        assert_eq!(all.transmission_fraction, 1.0);
    }

    #[test]
    fn uniform_attenuation_follows_linear_loss() {
        let mean = [2.0, 5.0, 9.0];
        let c = coherent(&mean, 10.0);
        for eta in [0.0001, 0.25, 0.5, 0.9, 1.0] {
            let r = filter_noise(&c, &FilterMask::uniform(3, eta).unwrap()).unwrap();
            let expected = linear_loss_fano(10.0, eta).unwrap();
            assert!((r.fano - expected).abs() <= 1e-10 * expected);
        }
        assert_eq!(linear_loss_fano(10.0, 1.0).unwrap(), 10.0);
        assert_eq!(linear_loss_fano(10.0, 0.5).unwrap(), 5.5);
        assert!(linear_loss_fano(10.0, 1e-9).unwrap() > 1.0);
        assert!(linear_loss_fano(0.5, 0.5).is_err());
        assert!(linear_loss_fano(2.0, 1.5).is_err());
    }

    #[test]
    fn dimension_mismatch() {
        let c = coherent(&[1.0, 2.0], 1.0);
        assert!(matches!(
            filter_noise(&c, &FilterMask::all_pass(3)),
            Err(Error::ShapeMismatch { .. })
        ));
    }

    #[test]
    fn sweep_is_deterministic() {
        let mean: Vec<f64> = (0..40).map(|k| (k % 7) as f64 + 1.0).collect();
        let c = coherent(&mean, 3.0);
        let a = random_filter_sweep(&c, 50, 7, &SweepOptions::default()).unwrap();
        let b = random_filter_sweep(&c, 50, 7, &SweepOptions::default()).unwrap();
        assert_eq!(format!("{a:?}"), format!("{b:?}"));
        let other = random_filter_sweep(&c, 50, 8, &SweepOptions::default()).unwrap();
        assert_ne!(format!("{a:?}"), format!("{other:?}"));
        let etas: Vec<f64> = a.iter().map(|e| e.result.transmission_fraction).collect();
        assert!(etas.iter().any(|&e| e < 0.3) && etas.iter().any(|&e| e > 0.7));
    }

    #[test]
    fn flat_landscape_optimizes_to_shot_noise() {
        let mean: Vec<f64> = (0..30).map(|k| 1.0 + (k % 5) as f64).collect();
        let c = coherent(&mean, 1.0);
        let r = optimize_filter(&c, 0.4, &OptimizerOptions::default()).unwrap();
        assert_relative_eq!(r.result.fano, 1.0, max_relative = 1e-12);
        assert!((r.result.transmission_fraction - 0.4).abs() <= 0.02);
    }

    #[test]
    fn optimizer_exploits_anticorrelation() {
        // Channels 0 and 1 anticorrelated, 2 and 3 noisy and independent.
        let mean = vec![10.0, 10.0, 10.0, 10.0];
        let mut c = CovarianceMatrix::diagonal(mean, 1.0);
        c.set(0, 1, -9.5);
        c.set(1, 0, -9.5);
        let r = optimize_filter(
            &c,
            0.5,
            &OptimizerOptions {
                tolerance: 0.01,
                ..Default::default()
            },
        )
        .unwrap();
        assert_eq!(r.mask.to_bit_string(), "1100");
        assert_relative_eq!(r.result.fano, 0.05, max_relative = 1e-12);
    }

    #[test]
    fn optimum_is_flip_local_minimum() {
        let dim = 24;
        let mean: Vec<f64> = (0..dim).map(|k| 1.0 + ((k * 7) % 5) as f64).collect();
        let mut c = CovarianceMatrix::diagonal(mean.clone(), 4.0);
        for a in 0..dim {
            for b in 0..dim {
                if a != b {
                    let v = -0.8 * ((a as f64 - b as f64) * 0.7).cos() * (mean[a] * mean[b]).sqrt() / 6.0;
                    c.set(a, b, v);
                }
            }
        }
        c.check_invariants(1e-9).unwrap();
        let opts = OptimizerOptions::default();
        let r = optimize_filter(&c, 0.5, &opts).unwrap();
        let total = c.total_mean();
        let bits: Vec<bool> = r.mask.values().iter().map(|&v| v == 1.0).collect();
        for k in 0..dim {
            let mut flipped = bits.clone();
            flipped[k] = !flipped[k];
            let alt = filter_noise(&c, &FilterMask::from_bits(&flipped)).unwrap();
            if (alt.transmitted_mean / total - 0.5).abs() <= opts.tolerance {
                assert!(alt.fano >= r.result.fano * (1.0 - 1e-12));
            }
        }
    }

    #[test]
    fn infeasible_target() {
        let c = coherent(&[10.0, 10.0], 1.0);
        let opts = OptimizerOptions {
            tolerance: 0.01,
            ..Default::default()
        };
        assert!(matches!(optimize_filter(&c, 0.25, &opts), Err(Error::Infeasible(_))));
        assert!(optimize_filter(&c, 0.0, &opts).is_err());
    }

    #[test]
    fn pair_map_limits() {
        let mut c = CovarianceMatrix::diagonal(vec![4.0, 4.0, 2.0], 1.0);
        let m = pair_noise_map(&c);
        assert_eq!(m.variance_at(0, 2), 6.0);
        assert_eq!(m.relative_at(0, 2), Some(3.0));
        assert!(m.relative_at(1, 1).is_none());
        c.set(0, 1, -4.0);
        c.set(1, 0, -4.0);
        let m = pair_noise_map(&c);
        assert_eq!(m.variance_at(0, 1), 0.0);
        assert_eq!(m.relative_at(0, 1), Some(0.0));
        for a in 0..3 {
            for b in 0..3 {
                if a != b {
                    assert_eq!(m.variance_at(a, b), m.variance_at(b, a));
                }
            }
        }
        let zero = CovarianceMatrix::diagonal(vec![0.0, 1.0], 1.0);
        assert!(pair_noise_map(&zero).relative_at(0, 1).is_none());
    }
}
