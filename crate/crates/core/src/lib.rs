//! Quantum intensity noise of intense multimode light after nonlinear fiber
//! propagation and spectral filtering.
//!
//! The noise of any output observable `X` is predicted from classical
//! sensitivities alone: `Var(X) = sum_i F_i |dX/d alpha_i|^2`, where `alpha_i`
//! are the input spectral amplitudes and `F_i` their Fano factors.

pub mod error;
pub mod field;
pub mod filter;
pub mod gnlse;
pub mod montecarlo;
pub mod sensitivity;

pub use error::{Error, Result};
pub use field::{
    focused_intensity, from_spectrum, make_grid, photon_numbers, synthesize_pulse, to_spectrum,
    Field, Grid, PulseShape, PulseSpec, SpectralField,
};
pub use filter::{
    filter_noise, linear_loss_fano, noise_immunity_scan, optimize_filter, pair_noise_map,
    random_filter_sweep, FilterMask, FilterResult, OptimizerOptions,
};
pub use gnlse::{propagate, soliton_number, FiberParams, Propagator, SolverOptions};
pub use montecarlo::{mc_statistics, McConfig, McStatistics};
pub use sensitivity::{
    covariance_eq1, fano_out, to_decibels, variance_eq1, wirtinger_jacobian, CovarianceMatrix,
    BeamSplitter, Identity, JacobianOptions, NoiseModel, Observable, SensitivityMatrix,
    SpectralBinning, SpectralMultiplier, System,
};

pub use num_complex::Complex64;
