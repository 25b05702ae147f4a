use std::hint::black_box;

use criterion::{criterion_group, criterion_main, BenchmarkId, Criterion};
use qnoise::gnlse::peak_power_for_soliton_number;
use qnoise::{
    covariance_eq1, make_grid, optimize_filter, synthesize_pulse, to_spectrum, wirtinger_jacobian,
    FiberParams, JacobianOptions, NoiseModel, Observable, OptimizerOptions, Propagator, PulseSpec,
    SolverOptions, SpectralBinning,
};

fn fission_setup(n: usize) -> (Propagator, qnoise::Field) {
    let grid = make_grid(n, 8e-12, 1560e-9).unwrap();
    let fiber = FiberParams::silica(1.0);
    let mut pulse = PulseSpec::sech(0.0, 200e-15, 1560e-9);
    pulse.peak_power = peak_power_for_soliton_number(3.0, &pulse, &fiber);
    let input = synthesize_pulse(&pulse, &grid).unwrap();
    let prop = Propagator::new(grid, fiber, SolverOptions::with_steps(500)).unwrap();
    (prop, input)
}

fn propagate(c: &mut Criterion) {
    let mut g = c.benchmark_group("propagate");
    g.sample_size(10);
    for n in [512, 1024, 2048] {
        let (prop, input) = fission_setup(n);
        g.bench_with_input(BenchmarkId::from_parameter(n), &n, |b, _| {
            b.iter(|| prop.propagate(black_box(&input)).unwrap())
        });
    }
    g.finish();
}

fn transforms(c: &mut Criterion) {
    let (_, input) = fission_setup(1024);
    c.bench_function("to_spectrum/1024", |b| b.iter(|| to_spectrum(black_box(&input))));
}

fn jacobian_column_subset(c: &mut Criterion) {
    // A coarse grid keeps one Jacobian within a benchmark sample.
    let grid = make_grid(256, 4e-12, 1560e-9).unwrap();
    let fiber = FiberParams::silica(0.3);
    let mut pulse = PulseSpec::sech(0.0, 200e-15, 1560e-9);
    pulse.peak_power = peak_power_for_soliton_number(2.0, &pulse, &fiber);
    let input = synthesize_pulse(&pulse, &grid).unwrap();
    let prop = Propagator::new(grid.clone(), fiber, SolverOptions::with_steps(100)).unwrap();
    let obs: Vec<Observable> = SpectralBinning::centered(&grid, 32, 128).unwrap().observables();
    let mut g = c.benchmark_group("jacobian");
    g.sample_size(10);
    g.bench_function("n256_32ch", |b| {
        b.iter(|| wirtinger_jacobian(&prop, &input, &obs, &JacobianOptions::default()).unwrap())
    });
    g.finish();

    let jac = wirtinger_jacobian(&prop, &input, &obs, &JacobianOptions::default()).unwrap();
    let noise = NoiseModel::amplified_pump(&jac.input_photons, 10.0, 1e-4).unwrap();
    let cov = covariance_eq1(&jac, &noise).unwrap();
    c.bench_function("optimize_filter/32ch", |b| {
        b.iter(|| optimize_filter(&cov, 0.5, &OptimizerOptions::default()).unwrap())
    });
}

criterion_group!(benches, propagate, transforms, jacobian_column_subset);
criterion_main!(benches);
