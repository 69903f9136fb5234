//! Acceptance suite: thirteen end-to-end checks, each returning a verdict and
//! the measured quantities behind it.

use std::f64::consts::TAU;
use std::time::Instant;

use num_complex::Complex64;
use num_traits::ToPrimitive;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::cocycle::{
    lyapunov, rotation_number_averaged, transfer_product_complex, uniform_hyperbolicity_test, CocycleSpec, Mat2,
    UhVerdict,
};
use crate::error::Result;
use crate::frequency::{
    beta_estimate, build_frequency, resonances, synth_beta_frequency, Frequency, IrrationalFrequency, Rational, SynthOptions,
};
use crate::localization::{attach_resonances, dual_eigenpairs, dual_lyapunov, resonance_epsilon, verify_strong_localization, Constants};
use crate::rational_spectrum::{
    chambers_check, gap_labels_with, hausdorff_distance, holder_fit, ids_sturm, spectrum_rational, Spectrum,
};
use crate::reducibility::homological::{matrix_homological_solve, scalar_homological_solve, ParabolicForm};
use crate::reducibility::kam::{kam_step, kam_step_synthetic, rational_edge_certificate, GapKind};
use crate::reducibility::pipeline::{reduce_pipeline, NormalForm, ReduceConfig};
use crate::reducibility::trig::{Period, TrigMat, TrigSeries};

const SPEC_TOL: f64 = 1e-13;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CriterionResult {
    pub id: u8,
    pub name: String,
    pub passed: bool,
    pub detail: String,
    pub seconds: f64,
}

pub const CRITERIA: [(u8, &str); 13] = [
    (1, "lyapunov identity"),
    (2, "complexified lyapunov"),
    (3, "ids consistency"),
    (4, "gap labeling"),
    (5, "aubry duality"),
    (6, "holder continuity"),
    (7, "strong localization"),
    (8, "resonance oracle"),
    (9, "homological solvers"),
    (10, "kam second order"),
    (11, "gap-opening certificate"),
    (12, "chambers structure"),
    (13, "transfer-norm bound"),
];

/// Run one criterion; computation errors count as failures.
pub fn run_criterion(id: u8) -> CriterionResult {
    let name = CRITERIA.iter().find(|c| c.0 == id).map_or("unknown", |c| c.1).to_string();
    let start = Instant::now();
    let out = match id {
        1 => lyapunov_identity(),
        2 => complexified_lyapunov(),
        3 => ids_consistency(),
        4 => gap_labeling(),
        5 => aubry_duality(),
        6 => holder_continuity(),
        7 => strong_localization(),
        8 => resonance_oracle(),
        9 => homological_solvers(),
        10 => kam_second_order(),
        11 => gap_opening_certificate(),
        12 => chambers_structure(),
        13 => transfer_norm_bound(),
        _ => Ok((false, format!("no criterion {id}"))),
    };
    let seconds = start.elapsed().as_secs_f64();
    let (passed, detail) = out.unwrap_or_else(|e| (false, format!("error: {e}")));
    CriterionResult { id, name, passed, detail, seconds }
}

pub fn run_suite() -> Vec<CriterionResult> {
    CRITERIA.iter().map(|c| run_criterion(c.0)).collect()
}

/// One line per criterion.
pub fn format_table(results: &[CriterionResult]) -> String {
    let mut out = String::new();
    for r in results {
        out.push_str(&format!(
            "{:>2} {:<24} {} {:>7.1}s  {}\n",
            r.id,
            r.name,
            if r.passed { "PASS" } else { "FAIL" },
            r.seconds,
            r.detail
        ));
    }
    out
}

type Outcome = Result<(bool, String)>;

fn golden(n: usize) -> Frequency {
    Frequency::Irrational(golden_ir(n))
}

fn golden_ir(n: usize) -> IrrationalFrequency {
    build_frequency(&vec![1; n]).expect("all-ones digits are valid")
}

/// `F_{n−1}/F_n` for `2 ≤ F_n ≤ q_max`.
pub fn golden_fractions(q_max: i64) -> Vec<Rational> {
    let (mut p, mut q) = (1i64, 2i64);
    let mut out = Vec::new();
    while q <= q_max {
        out.push(Rational { p, q });
        (p, q) = (q, p + q);
    }
    out
}

/// Midpoints of `k` bands spread evenly over the band index.
fn spread_midpoints(s: &Spectrum, k: usize) -> Vec<f64> {
    let n = s.bands.len();
    let k = k.min(n);
    (0..k)
        .map(|i| {
            let b = &s.bands[if k == 1 { 0 } else { i * (n - 1) / (k - 1) }];
            0.5 * (b.lo + b.hi)
        })
        .collect()
}

fn lyapunov_identity() -> Outcome {
    let start = Instant::now();
    let mut worst: f64 = 0.0;
    for lambda in [0.5f64, 2.0] {
        let bands = spectrum_rational(lambda, Rational { p: 34, q: 55 }, SPEC_TOL)?;
        let energies = spread_midpoints(&bands, 20);
        for alpha in [Frequency::Rational(Rational { p: 34, q: 55 }), golden(30)] {
            for (i, &e) in energies.iter().enumerate() {
                let est = lyapunov(&CocycleSpec::new(lambda, e, alpha.clone()), 100_000, 8, i as u64)?;
                worst = worst.max((est.mean - lambda.ln().max(0.0)).abs());
            }
        }
    }
    let secs = start.elapsed().as_secs_f64();
    Ok((worst <= 0.02 && secs < 60.0, format!("max |L − max(ln λ,0)| = {worst:.4}, {secs:.1}s")))
}

fn complexified_lyapunov() -> Outcome {
    let lambda = 0.5;
    let eta = 2f64.ln() / TAU;
    let alpha = golden(40);
    let bands = spectrum_rational(lambda, Rational { p: 34, q: 55 }, SPEC_TOL)?;
    let mut worst: f64 = 0.0;
    let mut beyond: f64 = 0.0;
    for (i, &e) in spread_midpoints(&bands, 3).iter().enumerate() {
        for eps in [0.0, eta / 2.0, -eta / 2.0, eta, -eta] {
            let spec = CocycleSpec::new(lambda, e, alpha.clone()).with_im_offset(eps);
            worst = worst.max(lyapunov(&spec, 100_000, 8, i as u64)?.mean.abs());
        }
        let spec = CocycleSpec::new(lambda, e, alpha.clone()).with_im_offset(eta + 0.05);
        let l = lyapunov(&spec, 100_000, 8, i as u64)?.mean;
        beyond = beyond.max((l - TAU * 0.05).abs());
    }
    Ok((worst <= 0.02 && beyond <= 0.02, format!("max |L(ε)| = {worst:.4} for |ε| ≤ η, |L(η+0.05) − 0.1π| = {beyond:.4}")))
}

fn ids_consistency() -> Outcome {
    let (lambda, m, n, phases) = (0.5, 2000usize, 100_000usize, 32usize);
    let alpha = Frequency::Rational(Rational { p: 5, q: 8 });
    let tol = 2.0 / m as f64 + 5.0 / n as f64;
    let energies: Vec<f64> = (0..50).map(|i| -3.2 + 6.4 * i as f64 / 49.0).collect();
    let errs: Vec<f64> = energies
        .iter()
        .map(|&e| -> Result<f64> {
            let rho = rotation_number_averaged(&CocycleSpec::new(lambda, e, alpha.clone()), n, phases)?;
            Ok(((1.0 - 2.0 * rho) - ids_sturm(e, lambda, &alpha, phases, m)).abs())
        })
        .collect::<Result<_>>()?;
    let worst = errs.iter().cloned().fold(0.0, f64::max);
    Ok((worst <= tol, format!("max |(1 − 2ρ) − N| = {worst:.2e}, bound {tol:.2e}")))
}

fn gap_labeling() -> Outcome {
    let lambda = 0.5;
    let (mut gaps, mut bad) = (0, 0);
    let m = 2000;
    for r in [Rational { p: 3, q: 5 }, Rational { p: 5, q: 8 }, Rational { p: 8, q: 13 }] {
        let s = gap_labels_with(&spectrum_rational(lambda, r, SPEC_TOL)?, Some((m, 8)));
        if s.gaps.len() != r.q as usize - 1 {
            bad += 1;
        }
        for g in &s.gaps {
            gaps += 1;
            let congruent = (g.label * r.p - g.j as i64).rem_euclid(r.q) == 0;
            let ids_ok = g.ids_sturm.is_some_and(|n| (n - g.ids_value()).abs() <= 2.0 / m as f64);
            if !congruent || !ids_ok {
                bad += 1;
            }
        }
    }
    Ok((bad == 0, format!("{gaps} gaps, {bad} exceptions")))
}

fn aubry_duality() -> Outcome {
    let mut worst: f64 = 0.0;
    for r in [Rational { p: 3, q: 5 }, Rational { p: 5, q: 8 }, Rational { p: 8, q: 13 }] {
        let strong = spectrum_rational(2.0, r, SPEC_TOL)?.intervals();
        let weak: Vec<(f64, f64)> = spectrum_rational(0.5, r, SPEC_TOL)?.intervals().iter().map(|&(a, b)| (2.0 * a, 2.0 * b)).collect();
        worst = worst.max(hausdorff_distance(&strong, &weak)?);
    }
    Ok((worst <= 1e-6, format!("max Hausdorff distance = {worst:.2e}")))
}

fn holder_continuity() -> Outcome {
    let fit = holder_fit(1.0, &golden_fractions(55), SPEC_TOL)?;
    Ok((
        fit.exponent >= 0.4,
        format!("fitted exponent {:.3} over {} pairs, max Dist/|Δα|^½ = {:.2}", fit.exponent, fit.points.len(), fit.half_constant),
    ))
}

fn strong_localization() -> Outcome {
    let start = Instant::now();
    let lambda: f64 = 0.05;
    let ir = golden_ir(90);
    let alpha = Frequency::Irrational(ir.clone());
    let consts = Constants::default();
    let eps0 = resonance_epsilon(lambda, &ir, &consts);
    let l = dual_lyapunov(lambda);
    let pairs = dual_eigenpairs(lambda, &alpha, 0.1, 2000, (-3.0, 3.0))?;
    let checks: Vec<(bool, bool, f64, f64)> = pairs
        .into_par_iter()
        .filter(|p| !p.boundary_contaminated)
        .map(|mut p| -> Result<(bool, bool, f64, f64)> {
            attach_resonances(&mut p, &ir, eps0)?;
            let r = verify_strong_localization(&p, consts.c0, l / consts.eps1_divisor)?;
            let checked = r.windows.iter().any(|w| w.log_c_min.is_some());
            let rate = r.fitted_rate.unwrap_or(f64::NAN);
            let ok = checked && r.log_c_u <= 1e3f64.ln() && rate >= 0.8 * l;
            Ok((checked, ok, r.log_c_u, rate))
        })
        .collect::<Result<_>>()?;
    let total = checks.len();
    let checked = checks.iter().filter(|c| c.0).count();
    let failed = checks.iter().filter(|c| c.0 && !c.1).count();
    let log_c = checks.iter().filter(|c| c.0).map(|c| c.2).fold(f64::NEG_INFINITY, f64::max);
    let rate = checks.iter().filter(|c| c.0).map(|c| c.3).fold(f64::INFINITY, f64::min);
    let secs = start.elapsed().as_secs_f64();
    Ok((
        total > 0 && checked == total && failed == 0 && secs < 120.0,
        format!(
            "{total} clean pairs, {checked} with checkable windows, {failed} violations; max C = {:.3e}, min rate {rate:.3} vs 0.8L = {:.3}, {secs:.1}s",
            log_c.exp(),
            0.8 * l
        ),
    ))
}

/// `‖2θ − kα‖` scan against a 60-bit golden convergent in `i128`, with the
/// minimality rule checked by prefix minima.
fn brute_resonances(theta: f64, eps0: f64, k_bound: i64) -> Option<Vec<i64>> {
    // 2θ = m·2^{-53}; golden α ≈ F_87/F_88.
    let m = (2.0 * theta * 2f64.powi(53)).round();
    if m != 2.0 * theta * 2f64.powi(53) {
        return None;
    }
    let (mut p, mut q) = (1i128, 1i128);
    for _ in 0..86 {
        (p, q) = (q, p + q);
    }
    let scale = 1i128 << 53;
    let den = q * scale;
    let base = m as i128 * q;
    let dist = |k: i64| {
        let r = (base - k as i128 * p * scale).rem_euclid(den);
        r.min(den - r)
    };
    let mut out = vec![0];
    let mut best = dist(0);
    for n in 1..=k_bound {
        let (dp, dm) = (dist(n), dist(-n));
        let (k, d) = if dm < dp { (-n, dm) } else { (n, dp) };
        if d < best {
            if (d as f64 / den as f64) <= (-eps0 * n as f64).exp() {
                out.push(k);
            }
            best = d;
        }
    }
    Some(out)
}

fn resonance_oracle() -> Outcome {
    let ir = golden_ir(120);
    let mut rng = ChaCha8Rng::seed_from_u64(8);
    let mut mismatches = 0;
    let mut sites = 0;
    for _ in 0..100 {
        let theta: f64 = rng.gen();
        let eps0 = 10f64.powf(rng.gen_range(-4.0..-0.5));
        let fast = resonances(theta, eps0, 2000, &ir)?.sites();
        let Some(brute) = brute_resonances(theta, eps0, 2000) else {
            mismatches += 1;
            continue;
        };
        sites += brute.len();
        if fast != brute {
            mismatches += 1;
        }
    }
    Ok((mismatches == 0, format!("100 cases, {sites} resonances, {mismatches} mismatches")))
}

fn random_series(rng: &mut ChaCha8Rng, n: usize, rate: f64, period: Period) -> TrigSeries {
    let mut s = TrigSeries::zeros(n, period);
    for k in 0..=n as i64 {
        let amp = (-rate * k as f64).exp();
        let v = Complex64::new(rng.gen_range(-1.0..1.0), if k == 0 { 0.0 } else { rng.gen_range(-1.0..1.0) }) * amp;
        *s.coeff_mut(k) = v;
        *s.coeff_mut(-k) = v.conj();
    }
    s
}

fn homological_solvers() -> Outcome {
    let n = 1024;
    let alpha = golden(60).value();
    let mut rng = ChaCha8Rng::seed_from_u64(9);
    let (mut scalar_worst, mut matrix_worst): (f64, f64) = (0.0, 0.0);
    for i in 0..50 {
        let period = if i % 2 == 0 { Period::One } else { Period::Two };
        let sign = if i % 4 < 2 { 1.0 } else { -1.0 };
        let kappa = random_series(&mut rng, n, 0.02, period);
        scalar_worst = scalar_worst.max(scalar_homological_solve(&kappa, alpha, sign)?.residual);
        let t = TrigMat::new(
            random_series(&mut rng, n, 0.02, period),
            random_series(&mut rng, n, 0.02, period),
            random_series(&mut rng, n, 0.02, period),
            random_series(&mut rng, n, 0.02, period),
        );
        let z = ParabolicForm::new(sign, rng.gen_range(-1.0..1.0))?;
        matrix_worst = matrix_worst.max(matrix_homological_solve(&z, &t, alpha, n)?.residual);
    }
    Ok((
        scalar_worst <= 1e-9 && matrix_worst <= 1e-9,
        format!("max relative residual: scalar {scalar_worst:.2e}, matrix {matrix_worst:.2e}"),
    ))
}

fn kam_second_order() -> Outcome {
    let alpha = golden(40);
    let b = TrigMat::from_fn_real(
        |x| {
            let s1 = Mat2::new(1.0, 0.3 * (TAU * x).cos(), 0.0, 1.0);
            let s2 = Mat2::new(1.0, 0.0, 0.2 * (TAU * x).sin(), 1.0);
            Mat2::rotation(x) * s1 * s2
        },
        8,
        Period::One,
    );
    let z = ParabolicForm::new(1.0, 0.7)?;
    let synth = kam_step_synthetic(&b, &z, &Mat2::new(0.3, 1.0, -0.5, -0.3), alpha.value(), 1e-3, 64)?.richardson_ratio;

    let lambda = 0.05;
    let approx = gap_labels_with(&spectrum_rational(lambda, Rational { p: 144, q: 233 }, SPEC_TOL)?, None);
    let gap = approx.gaps.iter().find(|g| g.label == 1).expect("label-one gap exists");
    let red = reduce_pipeline(lambda, &alpha, gap.lo, &ReduceConfig::default())?;
    let NormalForm::Parabolic(zp) = red.normal_form else {
        return Ok((false, format!("synthetic ratio {synth:.3}; pipeline gave a rotation at E = {}", red.energy)));
    };
    let pipe = kam_step(&red.b, &zp, lambda, red.energy, alpha.value(), 1e-3, 2 * red.b.trunc())?.richardson_ratio;
    let ok = |r: f64| (3.5..=4.5).contains(&r);
    Ok((ok(synth) && ok(pipe), format!("residual(ε)/residual(ε/2): synthetic {synth:.3}, pipeline {pipe:.3}")))
}

fn gap_opening_certificate() -> Outcome {
    let (lambda, eps) = (0.3, 1e-3);
    let mut edges = 0usize;
    let mut agree = 0usize;
    let mut misses = Vec::new();
    for r in golden_fractions(13) {
        let s = spectrum_rational(lambda, r, SPEC_TOL)?;
        let alpha = Frequency::Rational(r);
        for w in s.bands.windows(2) {
            for edge in [&w[0].hi_edge, &w[1].lo_edge] {
                let cert = rational_edge_certificate(lambda, r, edge, eps)?;
                if cert.closed {
                    continue;
                }
                edges += 1;
                let mut same = true;
                for v in &cert.verdicts {
                    let spec = CocycleSpec::new(lambda, edge.energy + v.eps, alpha.clone());
                    let uh = uniform_hyperbolicity_test(&spec, 100_000, 2e-4f64.exp())?;
                    same &= (v.kind == GapKind::Hyperbolic) == (uh.verdict == UhVerdict::Hyperbolic);
                }
                if same {
                    agree += 1;
                } else {
                    misses.push(format!("{}/{}@{:.4}", r.p, r.q, edge.energy));
                }
            }
        }
    }
    let frac = agree as f64 / edges.max(1) as f64;
    let mut detail = format!("{agree}/{edges} edges agree ({:.1}%)", 100.0 * frac);
    if !misses.is_empty() {
        detail.push_str(&format!("; disagree at {}", misses.join(" ")));
    }
    Ok((edges > 0 && frac >= 0.95, detail))
}

fn chambers_structure() -> Outcome {
    let (mut off, mut amp): (f64, f64) = (0.0, 0.0);
    for r in [Rational { p: 2, q: 3 }, Rational { p: 3, q: 5 }, Rational { p: 5, q: 8 }] {
        for lambda in [0.3f64, 0.7] {
            for e in [-2.5, -1.1, 0.0, 0.7, 1.9] {
                let c = chambers_check(e, lambda, r, 64)?;
                off = off.max(c.off_support_energy);
                amp = amp.max((c.amplitude - 2.0 * lambda.powi(r.q as i32)).abs());
            }
        }
    }
    Ok((off <= 1e-9 && amp <= 1e-8, format!("max off-support energy {off:.2e}, max amplitude error {amp:.2e}")))
}

fn transfer_norm_bound() -> Outcome {
    let lambda: f64 = 0.5;
    let eta = -lambda.ln() / TAU;
    let ir = synth_beta_frequency(0.2, 8, 13, &SynthOptions::default())?;
    // The early denominators are tiny, so the full-window estimate is ln 2;
    // the tail reflects the large digits.
    let beta_hat = beta_estimate(&ir, 4);
    let alpha = Frequency::Irrational(ir.clone());
    let approx = ir
        .denominators_up_to(200)
        .last()
        .map(|&(n, _)| {
            let (p, q) = ir.convergent(n);
            Rational::new(p.to_i64().unwrap_or(0), q.to_i64().unwrap_or(1))
        })
        .transpose()?
        .unwrap_or(Rational { p: 1, q: 2 });
    let energies = spread_midpoints(&spectrum_rational(lambda, approx, SPEC_TOL)?, 5);
    let k = 10_000;
    let worst = energies
        .par_iter()
        .map(|&e| {
            let mut w = f64::NEG_INFINITY;
            for i in 0..8 {
                for j in 0..8 {
                    let y = eta * (2.0 * j as f64 / 7.0 - 1.0);
                    let spec = CocycleSpec::new(lambda, e, alpha.clone()).with_im_offset(y);
                    w = w.max(transfer_product_complex(&spec, i as f64 / 8.0, k)?.log_norm() / k as f64);
                }
            }
            Ok(w)
        })
        .collect::<Result<Vec<f64>>>()?
        .into_iter()
        .fold(f64::NEG_INFINITY, f64::max);
    Ok((
        worst <= beta_hat + 0.1,
        format!("max (1/k)ln‖A_k‖ = {worst:.4}, β̂ = {beta_hat:.4}, approximant {}/{}", approx.p, approx.q),
    ))
}
