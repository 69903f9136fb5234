use std::hint::black_box;

use criterion::{criterion_group, criterion_main, Criterion};
use gaplab_core::cocycle::{lyapunov, rotation_number};
use gaplab_core::frequency::{build_frequency, resonances};
use gaplab_core::rational_spectrum::spectrum_rational;
use gaplab_core::reducibility::scalar_homological_solve;
use gaplab_core::{CocycleSpec, Frequency, Period, Rational, TrigSeries};
use num_complex::Complex64;

fn golden(n: usize) -> gaplab_core::IrrationalFrequency {
    build_frequency(&vec![1; n]).unwrap()
}

fn spectrum(c: &mut Criterion) {
    let r = Rational::new(89, 144).unwrap();
    c.bench_function("spectrum_rational 89/144", |b| b.iter(|| spectrum_rational(black_box(0.5), r, 1e-13).unwrap()));
}

fn cocycle(c: &mut Criterion) {
    let spec = CocycleSpec::new(2.0, 0.3, Frequency::Irrational(golden(40)));
    c.bench_function("lyapunov 1e4 x 4", |b| b.iter(|| lyapunov(black_box(&spec), 10_000, 4, 1).unwrap()));
    let spec = CocycleSpec::new(0.5, 0.3, Frequency::Irrational(golden(40)));
    c.bench_function("rotation_number 1e4", |b| b.iter(|| rotation_number(black_box(&spec), 10_000, 0.1, 0.0).unwrap()));
}

fn resonance_scan(c: &mut Criterion) {
    let alpha = golden(60);
    c.bench_function("resonances k<=1e4", |b| b.iter(|| resonances(black_box(0.3090169943749474), 0.05, 10_000, &alpha).unwrap()));
}

fn homological(c: &mut Criterion) {
    let alpha = golden(40).value();
    let kappa = TrigSeries::from_fn(|x| Complex64::new((x * 6.0).cos().exp(), 0.0), 512, Period::One);
    c.bench_function("scalar_homological 512", |b| b.iter(|| scalar_homological_solve(black_box(&kappa), alpha, 1.0).unwrap()));
}

criterion_group!(benches, spectrum, cocycle, resonance_scan, homological);
criterion_main!(benches);
