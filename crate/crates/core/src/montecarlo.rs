//! Brute-force check of the linearized noise formula: sample noisy inputs,
//! push every sample through the full nonlinear system and measure the
//! output statistics directly.

use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use rayon::prelude::*;

use crate::error::{invalid, Error, Result};
use crate::field::{from_spectrum, photon_numbers, to_spectrum, Field};
use crate::sensitivity::{NoiseModel, Observable, System};

#[derive(Debug, Clone)]
pub struct McConfig {
    pub n_samples: usize,
    pub seed: u64,
    pub noise: NoiseModel,
    pub base: Field,
    /// Multiplies the sampled fluctuation amplitude; 1 is physical.
    pub noise_scale: f64,
}

impl McConfig {
    pub fn new(base: Field, noise: NoiseModel, n_samples: usize, seed: u64) -> Self {
        Self {
            n_samples,
            seed,
            noise,
            base,
            noise_scale: 1.0,
        }
    }

    fn validate(&self) -> Result<()> {
        if self.n_samples < 2 {
            return Err(invalid(format!("need at least 2 samples, got {}", self.n_samples)));
        }
        if self.noise.len() != self.base.grid().n_samples() {
            return Err(Error::ShapeMismatch {
                expected: self.base.grid().n_samples(),
                found: self.noise.len(),
            });
        }
        Ok(())
    }
}

/// Independent RNG for sample `index`; results do not depend on scheduling.
pub fn sample_rng(seed: u64, index: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(index);
    rng
}

/// Adds symmetrized (Wigner) noise to every spectral bin: independent real
/// and imaginary Gaussian parts with variance `F_i / 4` each.
pub fn sample_input<R: Rng>(base: &Field, noise: &NoiseModel, scale: f64, rng: &mut R) -> Field {
    let mut sf = to_spectrum(base);
    for (a, f) in sf.amplitudes_mut().iter_mut().zip(noise.fano()) {
        let sigma = scale * 0.5 * f.sqrt();
        let re: f64 = rng.sample(StandardNormal);
        let im: f64 = rng.sample(StandardNormal);
        *a += Complex64::new(sigma * re, sigma * im);
    }
    from_spectrum(&sf)
}

#[derive(Debug, Clone, PartialEq)]
pub struct McStatistics {
    pub n_samples: usize,
    pub failures: usize,
    pub means: Vec<f64>,
    pub mean_errors: Vec<f64>,
    pub variances: Vec<f64>,
    /// Delete-one jackknife standard errors of the variances.
    pub variance_errors: Vec<f64>,
    /// Unbiased sample covariance, row-major.
    pub covariance: Vec<f64>,
}

impl McStatistics {
    pub fn covariance_at(&self, a: usize, b: usize) -> f64 {
        self.covariance[a * self.means.len() + b]
    }
}

/// Pairwise summation; the result depends only on the order of `values`.
pub fn pairwise_sum(values: &[f64]) -> f64 {
    if values.len() <= 32 {
        return values.iter().sum();
    }
    let mid = values.len() / 2;
    pairwise_sum(&values[..mid]) + pairwise_sum(&values[mid..])
}

/// Mean, variance and their jackknife errors for one series.
fn series_stats(x: &[f64]) -> (f64, f64, f64, f64) {
    let n = x.len() as f64;
    let mean = pairwise_sum(x) / n;
    let d: Vec<f64> = x.iter().map(|v| v - mean).collect();
    let sum_d = pairwise_sum(&d);
    let sq: Vec<f64> = d.iter().map(|v| v * v).collect();
    let sum_sq = pairwise_sum(&sq);
    let var = (sum_sq - sum_d * sum_d / n) / (n - 1.0);
    let mean_err = (var / n).sqrt();
    if x.len() < 3 {
        return (mean, var, mean_err, f64::NAN);
    }
    // Leave-one-out variances from the centered sums.
    let loo: Vec<f64> = d
        .iter()
        .map(|di| {
            let s1 = sum_d - di;
            let s2 = sum_sq - di * di;
            (s2 - s1 * s1 / (n - 1.0)) / (n - 2.0)
        })
        .collect();
    let loo_mean = pairwise_sum(&loo) / n;
    let dev: Vec<f64> = loo.iter().map(|v| (v - loo_mean).powi(2)).collect();
    let var_err = ((n - 1.0) / n * pairwise_sum(&dev)).sqrt();
    (mean, var, mean_err, var_err)
}

/// Statistics of `values[sample][observable]`.
pub fn summarize(values: &[Vec<f64>], failures: usize) -> McStatistics {
    let n = values.len();
    let m = values.first().map_or(0, |v| v.len());
    let columns: Vec<Vec<f64>> = (0..m).map(|j| values.iter().map(|v| v[j]).collect()).collect();
    let stats: Vec<_> = columns.iter().map(|c| series_stats(c)).collect();
    let means: Vec<f64> = stats.iter().map(|s| s.0).collect();
    let centered: Vec<Vec<f64>> = columns
        .iter()
        .zip(&means)
        .map(|(c, mu)| c.iter().map(|v| v - mu).collect())
        .collect();
    let mut covariance = vec![0.0; m * m];
    for a in 0..m {
        for b in a..m {
            let prod: Vec<f64> = centered[a].iter().zip(&centered[b]).map(|(x, y)| x * y).collect();
            let v = pairwise_sum(&prod) / (n as f64 - 1.0);
            covariance[a * m + b] = v;
            covariance[b * m + a] = v;
        }
    }
    McStatistics {
        n_samples: n,
        failures,
        means,
        mean_errors: stats.iter().map(|s| s.2).collect(),
        variances: stats.iter().map(|s| s.1).collect(),
        variance_errors: stats.iter().map(|s| s.3).collect(),
        covariance,
    }
}

/// Samples the noisy input ensemble through `system`. Fails when more than
/// 0.1% of the samples fail to propagate.
pub fn mc_statistics(
    config: &McConfig,
    system: &dyn System,
    observables: &[Observable],
) -> Result<McStatistics> {
    config.validate()?;
    let n = config.base.grid().n_samples();
    for o in observables {
        o.validate(n)?;
    }
    let outcomes: Vec<Result<Vec<f64>>> = (0..config.n_samples)
        .into_par_iter()
        .map(|i| {
            let mut rng = sample_rng(config.seed, i as u64);
            let input = sample_input(&config.base, &config.noise, config.noise_scale, &mut rng);
            let out = system.apply(&input)?;
            let photons = photon_numbers(&to_spectrum(&out));
            Ok(observables.iter().map(|o| o.evaluate(&photons)).collect())
        })
        .collect();
    let mut values = Vec::with_capacity(outcomes.len());
    let mut failures = 0;
    let mut last = None;
    for o in outcomes {
        match o {
            Ok(v) => values.push(v),
            Err(e) => {
                failures += 1;
                last = Some(e);
            }
        }
    }
    if failures * 1000 > config.n_samples || values.len() < 2 {
        return Err(Error::SampleFailures {
            failed: failures,
            total: config.n_samples,
            last: Box::new(last.expect("failures recorded")),
        });
    }
    Ok(summarize(&values, failures))
}
