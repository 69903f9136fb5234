use std::f64::consts::TAU;

use gaplab_core::cocycle::*;
use gaplab_core::frequency::{build_frequency, Frequency, Rational};
use gaplab_core::rational_spectrum::{ids_sturm, spectrum_rational};
use gaplab_core::reducibility::trig::{rotation_family, Period, TrigMat, TrigSeries};
use num_complex::Complex64;
use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn golden() -> Frequency {
    Frequency::Irrational(build_frequency(&[1; 40]).unwrap())
}

fn rat(p: i64, q: i64) -> Frequency {
    Frequency::Rational(Rational::new(p, q).unwrap())
}

/// Midpoints of the `k` widest bands of the `p/q` approximant.
fn band_midpoints(lambda: f64, p: i64, q: i64, k: usize) -> Vec<f64> {
    let s = spectrum_rational(lambda, Rational::new(p, q).unwrap(), 1e-12).unwrap();
    let mut b = s.bands.clone();
    b.sort_by(|x, y| (y.hi - y.lo).total_cmp(&(x.hi - x.lo)));
    b.iter().take(k).map(|b| 0.5 * (b.lo + b.hi)).collect()
}

fn gap_midpoints(lambda: f64, p: i64, q: i64) -> Vec<f64> {
    let s = spectrum_rational(lambda, Rational::new(p, q).unwrap(), 1e-12).unwrap();
    s.bands.windows(2).filter(|w| w[1].lo > w[0].hi).map(|w| 0.5 * (w[0].hi + w[1].lo)).collect()
}

#[test]
fn constant_elliptic_power() {
    let rho0: f64 = 0.1234;
    let spec = CocycleSpec::new(0.0, 2.0 * (TAU * rho0).cos(), golden());
    for n in [1, 7, 100, 1001] {
        let m = transfer_product(&spec, 0.3, n).unwrap().matrix();
        assert!((m.trace() - 2.0 * (TAU * n as f64 * rho0).cos()).abs() < 1e-9, "n={n}");
    }
}

#[test]
fn single_step_is_the_matrix() {
    let spec = CocycleSpec::new(0.7, 0.4, golden());
    let m = transfer_product(&spec, 0.21, 1).unwrap().matrix();
    assert!(m.max_abs_diff(&amo_matrix(0.7, 0.4, 0.21)) < 1e-15);
}

#[test]
fn determinant_stays_one() {
    let spec = CocycleSpec::new(2.0, 0.3, rat(3, 8));
    assert!((transfer_product(&spec, 0.1, 8).unwrap().det() - 1.0).abs() < 1e-12);
    // On the spectrum at subcritical coupling the norm stays moderate, so
    // the determinant is resolvable in double precision.
    let e = band_midpoints(0.5, 34, 55, 1)[0];
    let spec = CocycleSpec::new(0.5, e, golden());
    let mut p = ScaledProduct::identity();
    for j in 1..=50_000 {
        p.push_sl2(&spec.matrix(spec.alpha.phase(0.1, j - 1)));
        if j % 10_000 == 0 {
            assert!((p.det() - 1.0).abs() < 1e-9, "step {j}: {}", p.log_mag);
        }
    }
}

#[test]
fn lyapunov_large_coupling_on_spectrum() {
    for e in band_midpoints(2.0, 34, 55, 4) {
        let est = lyapunov(&CocycleSpec::new(2.0, e, golden()), 20_000, 4, 1).unwrap();
        assert!((est.mean - 2f64.ln()).abs() <= 0.02, "E={e}: {}", est.mean);
        assert!(est.max >= est.mean && est.min <= est.mean);
    }
}

#[test]
fn lyapunov_complexified_phase() {
    let eta = 2f64.ln() / TAU;
    let e = band_midpoints(0.5, 34, 55, 1)[0];
    for eps in [0.0, eta / 2.0, -eta, eta + 0.05] {
        let spec = CocycleSpec::new(0.5, e, golden()).with_im_offset(eps);
        let l = lyapunov(&spec, 20_000, 4, 2).unwrap().mean;
        let want = (0.5f64.ln() + TAU * eps.abs()).max(0.0);
        assert!((l - want).abs() <= 0.02, "ε={eps}: {l} vs {want}");
    }
}

#[test]
fn lyapunov_is_deterministic() {
    let spec = CocycleSpec::new(1.2, 0.1, golden());
    let a = lyapunov(&spec, 2000, 4, 9).unwrap();
    let b = lyapunov(&spec, 2000, 4, 9).unwrap();
    assert_eq!(a.samples, b.samples);
}

#[test]
fn complexified_lyapunov_even_and_convex() {
    let eta = 2f64.ln() / TAU;
    let e = band_midpoints(0.5, 34, 55, 1)[0];
    let grid: Vec<f64> = (-4..=4).map(|i| i as f64 * 0.5 * eta).collect();
    let l: Vec<f64> = grid
        .iter()
        .map(|&eps| lyapunov(&CocycleSpec::new(0.5, e, golden()).with_im_offset(eps), 10_000, 4, 3).unwrap().mean)
        .collect();
    for i in 0..4 {
        assert!((l[i] - l[8 - i]).abs() <= 0.02);
    }
    for i in 1..8 {
        assert!(l[i] <= 0.5 * (l[i - 1] + l[i + 1]) + 0.02);
    }
}

#[test]
fn free_rotation_numbers() {
    let r = rotation_number(&CocycleSpec::new(0.0, 0.0, golden()), 10_000, 0.0, 0.0).unwrap();
    assert!((r.rho - 0.25).abs() <= 5e-4, "{}", r.rho);
    let r = rotation_number(&CocycleSpec::new(0.0, 2.0 * (TAU * 0.1).cos(), golden()), 10_000, 0.0, 0.0).unwrap();
    assert!((r.rho - 0.1).abs() <= 5e-4, "{}", r.rho);
}

#[test]
fn rotation_outside_spectrum() {
    let below = rotation_number(&CocycleSpec::new(0.5, -3.5, golden()), 5000, 0.0, 0.0).unwrap();
    let above = rotation_number(&CocycleSpec::new(0.5, 3.5, golden()), 5000, 0.0, 0.0).unwrap();
    assert!((below.rho - 0.5).abs() <= 1e-3);
    assert!(above.rho.abs() <= 1e-3);
    assert_eq!(ids_from_rotation(0.5), 0.0);
    assert_eq!(ids_from_rotation(0.0), 1.0);
}

#[test]
fn rotation_nonincreasing_in_energy() {
    let n = 4000;
    let rhos: Vec<f64> = (0..50)
        .map(|i| {
            let e = -3.2 + 6.4 * i as f64 / 49.0;
            rotation_number(&CocycleSpec::new(0.5, e, golden()), n, 0.0, 0.0).unwrap().rho
        })
        .collect();
    assert!(rhos.windows(2).all(|w| w[1] <= w[0] + 5.0 / n as f64));
}

#[test]
fn rotation_ids_matches_sturm_in_gap() {
    let alpha = rat(5, 8);
    let (n, m) = (8000, 500);
    for e in gap_midpoints(0.5, 5, 8) {
        let rho = rotation_number_averaged(&CocycleSpec::new(0.5, e, alpha.clone()), n, 16).unwrap();
        let n_sturm = ids_sturm(e, 0.5, &alpha, 16, m);
        assert!((ids_from_rotation(rho) - n_sturm).abs() <= 2.0 / m as f64 + 5.0 / n as f64, "E={e}");
    }
}

#[test]
fn uh_large_energy_and_constant_cases() {
    let r = uniform_hyperbolicity_test(&CocycleSpec::new(0.5, 10.0, golden()), 400, 1.5).unwrap();
    assert_eq!(r.verdict, UhVerdict::Hyperbolic);
    assert!((r.min_rate / 10f64.ln() - 1.0).abs() <= 0.15);
    let r = uniform_hyperbolicity_test(&CocycleSpec::new(0.0, 3.0, golden()), 400, 1.5).unwrap();
    assert_eq!(r.verdict, UhVerdict::Hyperbolic);
    assert!((r.min_rate - ((3.0 + 5f64.sqrt()) / 2.0).ln()).abs() < 5e-3);
}

#[test]
fn uh_separates_bands_from_gaps() {
    for (p, q) in [(2, 5), (3, 8), (5, 13)] {
        let alpha = rat(p, q);
        for e in band_midpoints(0.5, p, q, q as usize) {
            let r = uniform_hyperbolicity_test(&CocycleSpec::new(0.5, e, alpha.clone()), 400 * q as usize, 1.0 + 1e-6).unwrap();
            assert_ne!(r.verdict, UhVerdict::Hyperbolic, "band E={e} q={q}");
        }
        for e in gap_midpoints(0.5, p, q) {
            let r = uniform_hyperbolicity_test(&CocycleSpec::new(0.5, e, alpha.clone()), 2000 * q as usize, 1.0 + 1e-6).unwrap();
            assert_eq!(r.verdict, UhVerdict::Hyperbolic, "gap E={e} q={q}: {r:?}");
        }
    }
}

fn c(v: f64) -> Complex64 {
    Complex64::new(v, 0.0)
}

/// `R_{kx/2}·[[1, f],[0, 1]]·[[1, 0],[g, 1]]` with random real period-1 `f`, `g`.
fn random_conjugacy(k: i64, rng: &mut ChaCha8Rng) -> TrigMat {
    let mut poly = || {
        let a: f64 = rng.gen_range(-0.3..0.3);
        let b: f64 = rng.gen_range(-0.3..0.3);
        let z = Complex64::new(0.5 * a, -0.5 * b);
        TrigSeries::from_pairs(&[(0, c(rng.gen_range(-0.5..0.5))), (1, z), (-1, z.conj())], Period::One)
    };
    let (f, g) = (poly(), poly());
    let one = |p| TrigSeries::constant(c(1.0), 0, p);
    let zero = |p| TrigSeries::zeros(0, p);
    let upper = TrigMat::new(one(Period::One), f, zero(Period::One), one(Period::One)).on_period_two();
    let lower = TrigMat::new(one(Period::One), zero(Period::One), g, one(Period::One)).on_period_two();
    let u = upper.mul(&lower, upper.trunc() + lower.trunc());
    let r = rotation_family(k);
    r.mul(&u, r.trunc() + u.trunc())
}

#[test]
fn conjugating_by_identity_is_noop() {
    let a = amo_trig(0.8, 0.3);
    let out = conjugate_cocycle(&TrigMat::identity(Period::One), &a, 0.377).unwrap();
    for x in [0.0, 0.3, 0.71] {
        assert!(out.eval(x).max_abs_diff(&a.eval(x)) < 1e-13);
    }
}

#[test]
fn rotation_family_shifts_constant_rotation() {
    let (theta, alpha) = (0.17, 0.381_966_011_250_105_1);
    let a = TrigMat::constant(&Mat2::rotation(theta), Period::One);
    for k in [-2, 1, 3] {
        let out = conjugate_cocycle(&rotation_family(k), &a, alpha).unwrap();
        let want = Mat2::rotation(theta - k as f64 * alpha / 2.0);
        for x in [0.0, 0.4, 1.3] {
            assert!(out.eval_real(x).max_abs_diff(&want) < 1e-12, "k={k}");
        }
    }
}

#[test]
fn conjugating_back_recovers_cocycle() {
    let mut rng = ChaCha8Rng::seed_from_u64(11);
    let alpha = 0.618_033_988_749_894_8;
    let a = amo_trig(0.6, -0.4);
    for k in [0, 1, -2] {
        let b = random_conjugacy(k, &mut rng);
        let there = conjugate_cocycle(&b, &a, alpha).unwrap();
        let back = conjugate_cocycle(&b.adj(), &there, alpha).unwrap();
        for x in [0.05, 0.5, 1.7] {
            assert!(back.eval(x).max_abs_diff(&a.eval(x)) < 1e-9, "k={k}");
        }
    }
}

#[test]
fn singular_conjugacy_is_rejected() {
    let big = TrigMat::constant(&Mat2::new(1e5, 0.0, 0.0, 1e-5), Period::One);
    assert!(conjugate_cocycle(&big, &amo_trig(1.0, 0.0), 0.3).is_err());
}

#[test]
fn degree_of_rotation_families_and_constants() {
    for k in -4..=4 {
        assert_eq!(degree(&rotation_family(k)).unwrap(), k);
    }
    assert_eq!(degree(&TrigMat::constant(&Mat2::new(2.0, 1.0, 1.0, 1.0), Period::One)).unwrap(), 0);
    let vanishing = TrigMat::constant(&Mat2::new(0.0, -1.0, 0.0, 0.0), Period::Two);
    assert!(degree(&vanishing).is_err());
}

#[test]
fn degree_is_additive() {
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    for _ in 0..8 {
        let (k1, k2) = (rng.gen_range(-3..=3), rng.gen_range(-3..=3));
        let (b1, b2) = (random_conjugacy(k1, &mut rng), random_conjugacy(k2, &mut rng));
        let prod = b1.mul(&b2, b1.trunc() + b2.trunc());
        assert_eq!(degree(&prod).unwrap(), degree(&b1).unwrap() + degree(&b2).unwrap());
        assert_eq!(degree(&prod).unwrap(), k1 + k2);
    }
}

#[test]
fn conjugation_shifts_rotation_number_by_degree() {
    let mut rng = ChaCha8Rng::seed_from_u64(17);
    let alpha_f = golden();
    let alpha = alpha_f.value();
    let n = 20_000;
    for k in [1, -1, 2] {
        let a = TrigMat::constant(&Mat2::rotation(0.13), Period::One);
        let b = random_conjugacy(k, &mut rng);
        let conj = conjugate_cocycle(&b, &a, alpha).unwrap();
        let f = |x: f64| conj.eval_real(x);
        let rho_a = rotation_number_of(&|x| a.eval_real(x), &alpha_f, n, 0.0, 0.0).unwrap();
        let rho_b = rotation_number_of(&f, &alpha_f, n, 0.0, 0.0).unwrap();
        let defect = 2.0 * rho_b - 2.0 * rho_a + k as f64 * alpha;
        assert!((defect - defect.round()).abs() <= 10.0 / n as f64, "k={k}: {defect}");
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(32))]

    #[test]
    fn products_have_unit_determinant(lambda in -3.0f64..3.0, e in -4.0f64..4.0, x in 0.0f64..1.0, n in 1usize..3000) {
        let spec = CocycleSpec::new(lambda, e, golden());
        let p = transfer_product(&spec, x, n).unwrap();
        // Entries carry relative error ε, so det carries ε‖A‖².
        let tol = 1e-9 + 8.0 * f64::EPSILON * (2.0 * p.log_mag).exp();
        prop_assert!((p.det() - 1.0).abs() <= tol || p.log_mag > 300.0);
    }
}
