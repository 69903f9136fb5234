use std::f64::consts::{PI, TAU};

use gaplab_core::cocycle::{amo_trig, uniform_hyperbolicity_test, CocycleSpec, Mat2, UhVerdict};
use gaplab_core::frequency::{build_frequency, Frequency, Rational};
use gaplab_core::localization::dual_eigenpairs;
use gaplab_core::rational_spectrum::{discriminant, gap_labels_with, spectrum_rational};
use gaplab_core::reducibility::trig::rotation_family;
use gaplab_core::reducibility::*;
use gaplab_core::GaplabError;
use num_complex::Complex64;
use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn golden() -> Frequency {
    Frequency::Irrational(build_frequency(&[1; 40]).unwrap())
}

fn c(re: f64) -> Complex64 {
    Complex64::new(re, 0.0)
}

fn random_series(rng: &mut ChaCha8Rng, n: usize, rate: f64, period: Period) -> TrigSeries {
    // Real function: ĉ_{−k} = conj(ĉ_k).
    let mut s = TrigSeries::zeros(n, period);
    for k in 0..=n as i64 {
        let amp = (-rate * k as f64).exp();
        let v = Complex64::new(rng.gen_range(-1.0..1.0), if k == 0 { 0.0 } else { rng.gen_range(-1.0..1.0) }) * amp;
        *s.coeff_mut(k) = v;
        *s.coeff_mut(-k) = v.conj();
    }
    s
}

fn random_traceless(rng: &mut ChaCha8Rng, n: usize, rate: f64, period: Period) -> TrigMat {
    let t11 = random_series(rng, n, rate, period);
    let t22 = t11.scale(c(-1.0));
    TrigMat::new(t11, random_series(rng, n, rate, period), random_series(rng, n, rate, period), t22)
}

// --- scalar homological equation ---

#[test]
fn scalar_cosine_forced_coefficients() {
    let a = golden().value();
    for sign in [1.0, -1.0] {
        let kappa = TrigSeries::from_pairs(&[(1, c(0.5)), (-1, c(0.5))], Period::One);
        let sol = scalar_homological_solve(&kappa, a, sign).unwrap();
        for k in [1i64, -1] {
            let expect = -sign * 0.5 / (1.0 - Complex64::from_polar(1.0, TAU * k as f64 * a));
            assert!((sol.phi.coeff(k) - expect).norm() < 1e-14);
        }
        assert_eq!(sol.phi.coeff(0), c(0.0));
        // On R/2Z the same function sits at index ±2 and the shift factor is e^{πikα}.
        let two = kappa.on_period_two();
        let sol2 = scalar_homological_solve(&two, a, sign).unwrap();
        let expect = -sign * 0.5 / (1.0 - Complex64::from_polar(1.0, PI * 2.0 * a));
        assert!((sol2.phi.coeff(2) - expect).norm() < 1e-14);
        assert!((sol2.phi.eval(0.3) - sol.phi.eval(0.3)).norm() < 1e-13);
    }
}

#[test]
fn scalar_constant_gives_zero() {
    let kappa = TrigSeries::constant(c(2.5), 3, Period::Two);
    let sol = scalar_homological_solve(&kappa, golden().value(), 1.0).unwrap();
    assert!(sol.phi.l1() == 0.0);
}

#[test]
fn scalar_residual_and_decay_golden() {
    let a = golden();
    let beta = a.as_irrational().unwrap().beta_hat();
    let mut rng = ChaCha8Rng::seed_from_u64(11);
    for _ in 0..5 {
        let kappa = random_series(&mut rng, 60, 0.5, Period::One);
        let sol = scalar_homological_solve(&kappa, a.value(), -1.0).unwrap();
        assert!(sol.residual <= 1e-10, "residual {}", sol.residual);
        let rate = sol.phi_decay.unwrap();
        assert!(rate >= 0.5 - 6.0 * beta - 0.05, "rate {rate}");
    }
}

#[test]
fn scalar_resonant_divisor_is_reported() {
    let kappa = TrigSeries::from_pairs(&[(4, c(1.0)), (-4, c(1.0))], Period::One);
    match scalar_homological_solve(&kappa, 0.25, 1.0) {
        Err(GaplabError::SmallDivisor(ks)) => assert_eq!(ks, vec![4]),
        other => panic!("expected small divisor, got {other:?}"),
    }
}

// --- matrix homological equation ---

#[test]
fn matrix_zero_and_constant_give_zero() {
    let z = ParabolicForm::new(1.0, 0.7).unwrap();
    let a = golden().value();
    let zero = TrigMat::constant(&Mat2::zero(), Period::One);
    let sol = matrix_homological_solve(&z, &zero, a, 16).unwrap();
    assert_eq!(sol.y.sup_on_grid(64), 0.0);
    let k = TrigMat::constant(&Mat2::new(0.3, 1.0, -2.0, -0.3), Period::Two);
    let sol = matrix_homological_solve(&z, &k, a, 16).unwrap();
    assert_eq!(sol.y.sup_on_grid(64), 0.0);
}

#[test]
fn matrix_solution_satisfies_equation_pointwise() {
    let alpha = golden();
    let a = alpha.value();
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    for (sign, shear) in [(1.0, 0.4), (-1.0, -1.3)] {
        let z = ParabolicForm::new(sign, shear).unwrap();
        let t = random_traceless(&mut rng, 40, 0.3, Period::Two);
        let sol = matrix_homological_solve(&z, &t, a, 40).unwrap();
        assert!(sol.residual <= 1e-9);
        assert!(sol.trace_defect <= 1e-9);
        let zm = z.matrix().to_complex();
        let t0 = t.mean();
        for _ in 0..20 {
            let x: f64 = rng.gen_range(0.0..2.0);
            let lhs = sol.y.eval(x + a) * zm - zm * sol.y.eval(x);
            let rhs = zm * (t.eval(x) - t0);
            assert!(lhs.max_abs_diff(&rhs) <= 1e-9 * (1.0 + rhs.frob()));
        }
    }
}

#[test]
fn matrix_divisor_powers() {
    // A single mode in each entry picks up (w−1)^{-1}, ^{-2}, ^{-2}, ^{-3}.
    let a = golden().value();
    let z = ParabolicForm::new(1.0, 1.0).unwrap();
    let k = 3i64;
    let w = Complex64::from_polar(1.0, TAU * k as f64 * a);
    let d = w - 1.0;
    let mode = |v: f64| TrigSeries::from_pairs(&[(k, c(v))], Period::One);
    let t = TrigMat::new(TrigSeries::zeros(k as usize, Period::One), TrigSeries::zeros(k as usize, Period::One), mode(1.0), TrigSeries::zeros(k as usize, Period::One));
    let y = matrix_homological_solve(&z, &t, a, 8).unwrap().y;
    let y21 = 1.0 / d;
    let y11 = (1.0 + y21) / d;
    let y22 = -w * y21 / d;
    let y12 = -(w * y11 - y22) / d;
    let e = &y.entries;
    assert!((e[1][0].coeff(k) - y21).norm() < 1e-12);
    assert!((e[0][0].coeff(k) - y11).norm() < 1e-12 * y11.norm());
    assert!((e[1][1].coeff(k) - y22).norm() < 1e-12 * y22.norm());
    assert!((e[0][1].coeff(k) - y12).norm() < 1e-12 * y12.norm());
}

#[test]
fn matrix_decay_loss_bounded_by_cubed_divisor() {
    let alpha = golden();
    let beta = alpha.as_irrational().unwrap().beta_hat();
    let mut rng = ChaCha8Rng::seed_from_u64(9);
    let t = random_traceless(&mut rng, 80, 0.5, Period::One);
    let z = ParabolicForm::new(1.0, 0.8).unwrap();
    let y = matrix_homological_solve(&z, &t, alpha.value(), 80).unwrap().y;
    for s in y.entries.iter().flatten() {
        let rate = s.decay_rate(1e-13).unwrap();
        assert!(rate >= 0.5 - 3.0 * (2.0 * beta) - 0.05, "rate {rate}");
    }
}

// --- exponential ---

#[test]
fn expm_known_values() {
    let t = 0.3;
    let gen = Mat2::new(0.0, -TAU * t, TAU * t, 0.0).to_complex();
    let r = expm_pade6(&gen);
    assert!(r.max_abs_diff(&Mat2::rotation(t).to_complex()) < 1e-14);
    let nil = Mat2::new(0.0, 2.5, 0.0, 0.0).to_complex();
    assert!(expm_pade6(&nil).max_abs_diff(&Mat2::new(1.0, 2.5, 0.0, 1.0).to_complex()) < 1e-15);
    let big = Mat2::new(3.0, 1.0, 2.0, -3.0).to_complex();
    // Hyperbolic generator: exp = cosh(μ)I + sinh(μ)/μ·G with μ² = −det G.
    let mu = 11.0f64.sqrt();
    let expect = Mat2::identity().scale(mu.cosh()) + Mat2::new(3.0, 1.0, 2.0, -3.0).scale(mu.sinh() / mu);
    assert!(expm_pade6(&big).max_abs_diff(&expect.to_complex()) < 1e-12 * expect.frob());
}

proptest! {
    #[test]
    fn expm_of_traceless_has_unit_det(a in -1.0f64..1.0, b in -1.0f64..1.0, cc in -1.0f64..1.0, eps in 0.0f64..1e-2) {
        let g = Mat2::new(a, b, cc, -a).scale(eps * 50.0).to_complex();
        prop_assert!((expm_pade6(&g).det() - 1.0).norm() <= 1e-10);
    }

    #[test]
    fn certificate_sign_matches_trace_test(
        shear in prop_oneof![-2.0f64..-0.1, 0.1f64..2.0],
        p11 in -1.0f64..1.0,
        p12 in -1.0f64..1.0,
        p21 in prop_oneof![-1.0f64..-0.1, 0.1f64..1.0],
        eps in prop_oneof![-1e-4f64..-1e-6, 1e-6f64..1e-4],
    ) {
        // [P] with tr(Z⁻¹[P]) = 0, so Z + ε[P] has det 1 to first order.
        let p22 = shear * p21 - p11;
        let p = Mat2::new(p11, p12, p21, p22);
        let z = ParabolicForm::new(1.0, shear).unwrap();
        let v = &gap_certificate(&z, &p, &[eps]).unwrap()[0];
        let m = z.matrix() + p.scale(eps);
        let tr = m.trace() / m.det().sqrt();
        let hyperbolic = tr.abs() > 2.0;
        prop_assert_eq!(v.kind == GapKind::Hyperbolic, hyperbolic);
        prop_assert!(v.consistent);
    }
}

// --- gap certificate ---

#[test]
fn certificate_zero_perturbation_is_marginal() {
    let z = ParabolicForm::new(-1.0, 0.5).unwrap();
    for v in gap_certificate(&z, &Mat2::zero(), &[1e-3, -1e-3, 0.0]).unwrap() {
        assert_eq!(v.kind, GapKind::Marginal);
        assert_eq!(v.d, 0.0);
    }
}

#[test]
fn certificate_negative_shear_opens_on_positive_side() {
    // P₂₁ = −s[B₁₁²] with [B₁₁²] = 1.
    let z = ParabolicForm::new(1.0, -0.8).unwrap();
    let p = Mat2::new(0.4, 0.1, -1.0, 0.4);
    let v = gap_certificate(&z, &p, &[1e-3, -1e-3]).unwrap();
    assert_eq!(v[0].kind, GapKind::Hyperbolic);
    assert_eq!(v[1].kind, GapKind::Elliptic);
    let pred = v[0].predicted_exponent.unwrap();
    assert!((pred - (0.8e-3f64).sqrt()).abs() < 0.05 * pred);
    assert!(v.iter().all(|x| x.consistent));
}

#[test]
fn certificate_rejects_zero_shear() {
    let z = ParabolicForm::new(1.0, 0.0).unwrap();
    assert!(gap_certificate(&z, &Mat2::identity(), &[1e-3]).is_err());
    assert!(ParabolicForm::new(0.5, 1.0).is_err());
}

#[test]
fn edge_certificate_matches_discriminant() {
    let lambda = 0.3;
    for (p, q) in [(1, 2), (2, 3), (3, 5)] {
        let r = Rational { p, q };
        let sp = spectrum_rational(lambda, r, 1e-13).unwrap();
        for band in &sp.bands {
            for edge in [&band.lo_edge, &band.hi_edge] {
                let cert = rational_edge_certificate(lambda, r, edge, 1e-6).unwrap();
                if cert.closed {
                    continue;
                }
                for v in &cert.verdicts {
                    let tr = discriminant(edge.energy + v.eps, edge.theta, lambda, r);
                    assert_eq!(v.kind == GapKind::Hyperbolic, tr.abs() > 2.0, "q={q} E={} eps={}", edge.energy, v.eps);
                }
            }
        }
    }
}

#[test]
fn edge_certificate_agrees_with_hyperbolicity_test() {
    let lambda = 0.3;
    let r = Rational { p: 2, q: 3 };
    let alpha = Frequency::Rational(r);
    let sp = spectrum_rational(lambda, r, 1e-13).unwrap();
    let eps = 1e-3;
    for band in &sp.bands {
        for edge in [&band.lo_edge, &band.hi_edge] {
            let cert = rational_edge_certificate(lambda, r, edge, eps).unwrap();
            assert!(!cert.closed);
            for v in &cert.verdicts {
                let spec = CocycleSpec::new(lambda, edge.energy + v.eps, alpha.clone());
                let uh = uniform_hyperbolicity_test(&spec, 100_000, 2e-4f64.exp()).unwrap();
                assert_eq!(v.kind == GapKind::Hyperbolic, uh.verdict == UhVerdict::Hyperbolic, "E={} eps={}", edge.energy, v.eps);
            }
        }
    }
}

// --- KAM step ---

fn synthetic_b() -> TrigMat {
    TrigMat::from_fn_real(
        |x| {
            let s1 = Mat2::new(1.0, 0.3 * (TAU * x).cos(), 0.0, 1.0);
            let s2 = Mat2::new(1.0, 0.0, 0.2 * (TAU * x).sin(), 1.0);
            Mat2::rotation(x) * s1 * s2
        },
        8,
        Period::One,
    )
}

#[test]
fn synthetic_kam_step_is_second_order() {
    let b = synthetic_b();
    let z = ParabolicForm::new(1.0, 0.7).unwrap();
    let k = Mat2::new(0.3, 1.0, -0.5, -0.3);
    let a = golden().value();
    let rep = kam_step_synthetic(&b, &z, &k, a, 1e-3, 64).unwrap();
    assert!(rep.precondition < 1e-12);
    assert!((3.5..=4.5).contains(&rep.richardson_ratio), "ratio {}", rep.richardson_ratio);
    assert!(rep.residual_after < 1e-2 * rep.residual_before);
    assert!(rep.exp_det_defect < 1e-10);
    assert!(rep.identity_check.is_none());
}

#[test]
fn kam_step_at_zero_epsilon_is_identity() {
    let b = synthetic_b();
    let z = ParabolicForm::new(-1.0, 0.4).unwrap();
    let k = Mat2::new(0.0, 1.0, 1.0, 0.0);
    let rep = kam_step_synthetic(&b, &z, &k, golden().value(), 0.0, 32).unwrap();
    assert!(rep.residual_after < 1e-13);
    let zc = z.matrix().to_complex();
    assert!(rep.conjugated.eval(0.37).max_abs_diff(&zc) < 1e-12);
}

#[test]
fn kam_step_rejects_non_reducing_conjugacy() {
    let b = TrigMat::identity(Period::One);
    let z = ParabolicForm::new(1.0, 1.0).unwrap();
    assert!(matches!(kam_step(&b, &z, 0.05, 0.5, golden().value(), 1e-3, 8), Err(GaplabError::Residual { .. })));
}

// --- Bloch vectors, realify, completion ---

#[test]
fn bloch_full_support_has_negligible_defect() {
    let alpha = golden();
    let pairs = dual_eigenpairs(0.05, &alpha, 0.13, 20, (-3.0, 3.0)).unwrap();
    let pair = pairs.iter().find(|p| p.center.abs() < 5).unwrap();
    let bv = bloch_vector(pair, pair.centered_range(), 0.05, &alpha).unwrap();
    assert!(bv.defect_sup < 1e-12, "defect {}", bv.defect_sup);
    assert!(bv.identity_residual < 1e-12);
}

#[test]
fn bloch_defect_lives_on_window_boundary() {
    let alpha = golden();
    let lambda = 0.1;
    let pairs = dual_eigenpairs(lambda, &alpha, 0.21, 60, (-3.0, 3.0)).unwrap();
    let pair = pairs.iter().find(|p| p.center.abs() < 10 && !p.boundary_contaminated).unwrap();
    let n = 12;
    let window = (-n / 2, n - n / 2);
    let bv = bloch_vector(pair, window, lambda, &alpha).unwrap();
    assert!(bv.interior_defect < 1e-12);
    let cut = [window.0, window.1].map(|k| pair.centered_log_abs(k).unwrap().exp());
    let worst = cut[0].max(cut[1]);
    // Boundary modes are λû at the cut or (E − 2cos)û there.
    for m in bv.boundary_modes {
        assert!(m <= (4.0 + bv.energy.abs() + 2.0 * lambda) * worst);
    }
    let rate = pair.decay_rate.unwrap();
    let h = rate / TAU;
    let envelope = 4.0 * (4.0 + bv.energy.abs() + 2.0 * lambda) * worst * (TAU * h / 3.0 * (n / 2 + 1) as f64).exp();
    assert!(bv.defect.strip_norm(h / 3.0) <= envelope + 1e-12);
}

#[test]
fn bloch_shrinking_window_changes_defect_by_dropped_terms() {
    let alpha = golden();
    let lambda = 0.2;
    let pairs = dual_eigenpairs(lambda, &alpha, 0.4, 40, (-3.0, 3.0)).unwrap();
    let pair = pairs.iter().find(|p| p.center.abs() < 10 && !p.boundary_contaminated).unwrap();
    let w = (-6, 7);
    let g1 = bloch_vector(pair, w, lambda, &alpha).unwrap();
    let g2 = bloch_vector(pair, (w.0, w.1 - 1), lambda, &alpha).unwrap();
    let dropped = pair.coeffs[(pair.center + w.1 + pair.m as i64) as usize];
    let theta = pair.centered_theta(&alpha);
    let diag = pair.energy - 2.0 * (TAU * alpha.phase(theta, w.1)).cos();
    let bound = (diag.abs() + 2.0 * lambda) * dropped.abs();
    let diff = g1.defect.sub(&g2.defect).l1();
    assert!(diff <= bound * (1.0 + 1e-12) + 1e-15, "diff {diff} bound {bound}");
    assert!(diff >= 0.5 * bound);
}

#[test]
fn bloch_rejects_window_outside_support() {
    let alpha = golden();
    let pairs = dual_eigenpairs(0.05, &alpha, 0.13, 10, (-3.0, 3.0)).unwrap();
    let (lo, hi) = pairs[0].centered_range();
    assert!(bloch_vector(&pairs[0], (lo - 1, hi), 0.05, &alpha).is_err());
}

#[test]
fn realify_real_column_collapses() {
    let u = TrigCol::new(
        TrigSeries::from_pairs(&[(1, c(0.5)), (-1, c(0.5))], Period::One),
        TrigSeries::constant(c(1.0), 0, Period::One),
    );
    assert!(matches!(realify(&u, 0), Err(GaplabError::ResonantCollapse(_))));
}

#[test]
fn realify_explicit_frame() {
    let r = 0.5f64.sqrt();
    let u = TrigCol::new(
        TrigSeries::from_pairs(&[(1, c(r))], Period::One),
        TrigSeries::from_pairs(&[(1, Complex64::new(0.0, r))], Period::One),
    );
    let re = realify(&u, 0).unwrap();
    // S = (cos, −sin)/√2, T = (sin, cos)/√2, det(S|T) = 1/2.
    assert!((re.det_min - 0.5).abs() < 1e-14 && (re.det_max - 0.5).abs() < 1e-14);
    assert_eq!(re.sign, 1.0);
    for x in [0.0, 0.1, 0.77] {
        let (s, co) = (TAU * x).sin_cos();
        let expect = Mat2::new(co, s, -s, co);
        assert!(re.w.eval_real(x).max_abs_diff(&expect) < 1e-14);
    }
    assert!(re.det_defect < 1e-14);
}

#[test]
fn completion_examples() {
    let half = c(0.5);
    let ih = Complex64::new(0.0, 0.5);
    let w = TrigCol::new(
        TrigSeries::from_pairs(&[(1, half), (-1, half)], Period::Two),
        TrigSeries::from_pairs(&[(1, -ih), (-1, ih)], Period::Two),
    );
    let b = complete_to_sl2(&w, 1e-6).unwrap();
    let rot = rotation_family(1);
    for x in [0.0, 0.3, 1.1, 1.7] {
        assert!(b.eval(x).max_abs_diff(&rot.eval(x)) < 1e-12);
    }
    let e1 = TrigCol::new(TrigSeries::constant(c(1.0), 0, Period::One), TrigSeries::zeros(0, Period::One));
    let id = complete_to_sl2(&e1, 1e-6).unwrap();
    assert!(id.eval(0.4).max_abs_diff(&Mat2::identity()) < 1e-14);
    let vanishing = TrigCol::new(TrigSeries::from_pairs(&[(1, half), (-1, half)], Period::Two), TrigSeries::zeros(0, Period::Two));
    assert!(matches!(complete_to_sl2(&vanishing, 1e-6), Err(GaplabError::VanishingColumn(_))));
}

#[test]
fn completion_of_generic_column_has_unit_det() {
    let w = TrigCol::new(
        TrigSeries::from_pairs(&[(0, c(1.2)), (1, c(0.3)), (-1, c(0.3)), (3, Complex64::new(0.0, 0.1)), (-3, Complex64::new(0.0, -0.1))], Period::Two),
        TrigSeries::from_pairs(&[(1, Complex64::new(0.0, -0.4)), (-1, Complex64::new(0.0, 0.4))], Period::Two),
    );
    let b = complete_to_sl2(&w, 1e-3).unwrap();
    assert!(b.det_defect(4096) < 1e-8);
    assert!((b.eval(0.9).a - w.u1.eval(0.9)).norm() < 1e-14);
    assert!(b.entries.iter().flatten().all(|s| s.reality_defect() < 1e-14));
}

#[test]
fn rotation_residual_of_constant_rotation() {
    let theta = 0.123;
    let a = TrigMat::constant(&Mat2::rotation(theta), Period::One);
    let r = rotation_residual(&TrigMat::identity(Period::One), &a, golden().value(), theta);
    assert!(r.residual < 1e-15);
    assert_eq!(r.sign, 1.0);
    let r = rotation_residual(&TrigMat::identity(Period::One), &a, golden().value(), -theta);
    assert_eq!(r.sign, -1.0);
}

// --- Wronskian ---

fn solve_recursion(v: &[f64], e: f64, step: usize, init: &[f64]) -> Vec<f64> {
    let mut f = init.to_vec();
    while f.len() < v.len() {
        let k = f.len() - step;
        let next = (e - v[k]) * f[k] - f[k - step];
        f.push(next);
    }
    f
}

#[test]
fn wronskian_constant_for_independent_solutions() {
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    let v: Vec<f64> = (0..400).map(|_| rng.gen_range(-0.5..0.5)).collect();
    let e = 0.3;
    for step in [1usize, 2] {
        let init_f: Vec<f64> = (0..2 * step).map(|i| if i == 0 { 1.0 } else { 0.2 * i as f64 }).collect();
        let init_g: Vec<f64> = (0..2 * step).map(|i| if i == step { 1.0 } else { -0.1 * i as f64 }).collect();
        let f = solve_recursion(&v, e, step, &init_f);
        let g = solve_recursion(&v, e, step, &init_g);
        let rep = wronskian(&f, &g, &v, e, step).unwrap();
        assert!(rep.constant, "step {step} drift {}", rep.drift);
        assert!(!rep.dependent);
        let same = wronskian(&f, &f, &v, e, step).unwrap();
        assert!(same.values.iter().all(|w| w.abs() <= 1e-12 * same.scale));
        assert!(same.dependent);
    }
}

#[test]
fn wronskian_of_decaying_solutions_vanishes() {
    // Off the spectrum of the free operator, f(n) = μ⁻ⁿ decays; two multiples are dependent.
    let e = 3.0;
    let mu = (e + (e * e - 4.0f64).sqrt()) / 2.0;
    let v = vec![0.0; 60];
    let f: Vec<f64> = (0..60).map(|n| mu.powi(-n)).collect();
    let g: Vec<f64> = f.iter().map(|x| 2.5 * x).collect();
    let rep = wronskian(&f, &g, &v, e, 1).unwrap();
    assert!(rep.dependent);
    assert!(rep.values.last().unwrap().abs() < 1e-20);
}

#[test]
fn wronskian_rejects_non_solutions() {
    let v = vec![0.0; 20];
    let f: Vec<f64> = (0..20).map(|n| n as f64).collect();
    assert!(matches!(wronskian(&f, &f, &v, 0.0, 1), Err(GaplabError::Residual { .. })));
    assert!(wronskian(&f, &f, &v, 0.0, 3).is_err());
}

// --- pipeline ---

fn label_one_gap(lambda: f64) -> (f64, f64) {
    let sp = gap_labels_with(&spectrum_rational(lambda, Rational { p: 144, q: 233 }, 1e-13).unwrap(), None);
    let g = sp.gaps.iter().find(|g| g.label == 1).unwrap();
    (g.lo, g.hi)
}

#[test]
fn pipeline_mid_band_gives_rotation() {
    let alpha = golden();
    let red = reduce_pipeline(0.05, &alpha, 1.0, &ReduceConfig::default()).unwrap();
    assert!(matches!(red.normal_form, NormalForm::Rotation { .. }));
    assert!(red.rho_check <= 1e-4, "rho check {}", red.rho_check);
    assert!(red.residual < 1e-10);
    assert!(red.b.det_defect(1024) < 1e-8);
    assert!(red.ledger.iter().any(|e| e.stage == "bloch"));
}

#[test]
fn pipeline_gap_edge_gives_parabolic_form() {
    let alpha = golden();
    let lambda = 0.05;
    let (lo, hi) = label_one_gap(lambda);
    for e in [lo, hi] {
        let red = reduce_pipeline(lambda, &alpha, e, &ReduceConfig::default()).unwrap();
        let NormalForm::Parabolic(z) = red.normal_form else { panic!("E={e}: {:?}", red.normal_form) };
        assert!(z.a.abs() > 1e-4, "shear {}", z.a);
        assert!(red.residual < 1e-10);
        assert!(red.rho_check <= 1e-3);
        assert!(red.resonance.unwrap().abs() == 1);
        let det = red.ledger.iter().find(|l| l.quantity == "det_defect").unwrap().value;
        assert!(det <= 1e-8);

        // One KAM step on the pipeline conjugacy.
        let rep = kam_step(&red.b, &z, lambda, red.energy, alpha.value(), 1e-3, 2 * red.b.trunc()).unwrap();
        assert!(rep.identity_check.unwrap() < 1e-8);
        assert!((3.5..=4.5).contains(&rep.richardson_ratio));
        // Moving into the gap is hyperbolic, into the band elliptic.
        let into_gap = if e == lo { 1e-3 } else { -1e-3 };
        let v = gap_certificate(&z, &rep.p_avg, &[into_gap, -into_gap]).unwrap();
        assert_eq!(v[0].kind, GapKind::Hyperbolic);
        assert_eq!(v[1].kind, GapKind::Elliptic);
    }
}

#[test]
fn pipeline_window_residual_decreases() {
    let alpha = golden();
    let mut last = f64::INFINITY;
    for n in [4usize, 8, 16] {
        let cfg = ReduceConfig { window: Some(n), ..ReduceConfig::default() };
        let red = reduce_pipeline(0.05, &alpha, 1.0, &cfg).unwrap();
        assert!(red.residual <= 10.0 * last, "n={n}: {} after {last}", red.residual);
        last = red.residual;
    }
    assert!(last < 1e-10);
}

#[test]
fn pipeline_degraded_window_shows_defect() {
    let alpha = golden();
    let cfg = ReduceConfig { window: Some(1), ..ReduceConfig::default() };
    let red = reduce_pipeline(0.05, &alpha, 1.0, &cfg).unwrap();
    let get = |q: &str| red.ledger.iter().find(|l| l.quantity == q).unwrap().value;
    let defect = get("defect_sup");
    assert!(defect > 1e-4);
    assert!(defect > 1e3 * get("eigen_residual"));
    assert!(red.residual > 1e-5);
}

#[test]
fn pipeline_rejects_rational_frequency() {
    let r = reduce_pipeline(0.05, &Frequency::Rational(Rational { p: 3, q: 5 }), 1.0, &ReduceConfig::default());
    assert!(r.is_err());
}

#[test]
fn pipeline_conjugacy_reduces_amo_cocycle() {
    let alpha = golden();
    let red = reduce_pipeline(0.05, &alpha, -1.2, &ReduceConfig::default()).unwrap();
    let conj = gaplab_core::cocycle::conjugate_cocycle(&red.b, &amo_trig(0.05, red.energy), alpha.value()).unwrap();
    let nf = red.normal_form.matrix().to_complex();
    for x in [0.05, 0.5, 0.91] {
        assert!(conj.eval(x).max_abs_diff(&nf) < 1e-9);
    }
}
