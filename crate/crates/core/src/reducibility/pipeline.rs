//! End-to-end reduction of `S_{λ,E}` from a dual eigenpair.
//!
//! Stages: pick the dual phase whose eigenvalue is closest to `E`, build the
//! Bloch vector, turn it into a real conjugacy, and read off a rotation or a
//! parabolic constant. Every stage appends its residuals to a ledger.

use num_complex::Complex64;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::bloch::{bloch_vector, complete_to_sl2, realify, rotation_residual};
use super::homological::{scalar_homological_solve, ParabolicForm};
use super::trig::{cis, grid_size, Period, TrigMat, TrigSeries};
use crate::cocycle::{amo_trig, conjugate_cocycle, degree, rotation_number, CocycleSpec, Mat2};
use crate::error::{GaplabError, Result};
use crate::frequency::Frequency;
use crate::localization::{dual_eigenpairs, DualEigenpair};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ReduceConfig {
    /// Dual truncation half-width.
    pub m: usize,
    /// Bloch window half-width; defaults to `3m/4`.
    pub window: Option<usize>,
    /// Equispaced phase candidates in `[0, 1)`.
    pub theta_grid: usize,
    /// Phases `(kα + j)/2` with `|k| ≤ k_max` are tried as parabolic candidates.
    pub k_max: i64,
    /// A parabolic candidate is preferred when its surrogate gap is below this.
    pub edge_tol: f64,
    /// Energy half-width searched around `E`.
    pub energy_window: f64,
    pub rho_iters: usize,
    pub norm_floor: f64,
}

impl Default for ReduceConfig {
    fn default() -> Self {
        Self {
            m: 200,
            window: None,
            theta_grid: 256,
            k_max: 12,
            edge_tol: 1e-4,
            energy_window: 0.1,
            rho_iters: 100_000,
            norm_floor: 1e-8,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub enum NormalForm {
    /// `R_{σθ̃}`.
    Rotation { theta: f64, sign: f64 },
    Parabolic(ParabolicForm),
}

impl NormalForm {
    pub fn matrix(&self) -> Mat2<f64> {
        match self {
            NormalForm::Rotation { theta, sign } => Mat2::rotation(sign * theta),
            NormalForm::Parabolic(p) => p.matrix(),
        }
    }

    /// `2θ̃` of the constant, up to sign and integers.
    fn double_angle(&self) -> f64 {
        match self {
            NormalForm::Rotation { theta, .. } => 2.0 * theta,
            NormalForm::Parabolic(_) => 0.0,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct LedgerEntry {
    pub stage: String,
    pub quantity: String,
    pub value: f64,
}

#[derive(Clone, Debug)]
pub struct Reduction {
    pub lambda: f64,
    /// Energy actually reduced: the dual eigenvalue.
    pub energy: f64,
    pub requested_energy: f64,
    pub surrogate_gap: f64,
    /// Centered dual phase.
    pub theta: f64,
    /// `k` with `2θ ≡ kα (mod 1)` in the parabolic case.
    pub resonance: Option<i64>,
    pub b: TrigMat,
    pub normal_form: NormalForm,
    /// `sup‖B(x+α)⁻¹A(x)B(x) − normal form‖`.
    pub residual: f64,
    pub degree: i64,
    pub rho: f64,
    /// `min_± ‖2ρ ∓ 2θ̃ − deg(B)α‖_{R/Z}`.
    pub rho_check: f64,
    /// Whether `B` was brought down to `R/Z`.
    pub period_one: bool,
    pub ledger: Vec<LedgerEntry>,
}

impl Reduction {
    pub fn to_json(&self) -> serde_json::Value {
        serde_json::json!({
            "lambda": self.lambda,
            "energy": self.energy,
            "requested_energy": self.requested_energy,
            "surrogate_gap": self.surrogate_gap,
            "theta": self.theta,
            "resonance": self.resonance,
            "normal_form": self.normal_form,
            "residual": self.residual,
            "degree": self.degree,
            "rho": self.rho,
            "rho_check": self.rho_check,
            "period_one": self.period_one,
            "ledger": self.ledger,
            "b": self.b.to_json(),
        })
    }
}

struct Candidate {
    pair: DualEigenpair,
    gap: f64,
    /// `k` of the phase `(kα + j)/2` before centering.
    k: Option<i64>,
}

fn pick_candidate(lambda: f64, alpha: &Frequency, energy: f64, cfg: &ReduceConfig) -> Result<Candidate> {
    let a = alpha.value();
    let mut thetas: Vec<(f64, Option<i64>)> = (0..cfg.theta_grid).map(|i| (i as f64 / cfg.theta_grid as f64, None)).collect();
    for k in -cfg.k_max..=cfg.k_max {
        let half = (0.5 * k as f64 * a).rem_euclid(1.0);
        thetas.push((half, Some(k)));
        thetas.push(((half + 0.5).rem_euclid(1.0), Some(k)));
    }
    let window = (energy - cfg.energy_window, energy + cfg.energy_window);
    let found: Vec<Candidate> = thetas
        .par_iter()
        .map(|&(theta, k)| -> Result<Option<Candidate>> {
            let pairs = dual_eigenpairs(lambda, alpha, theta, cfg.m, window)?;
            Ok(pairs
                .into_iter()
                .filter(|p| !p.boundary_contaminated)
                .map(|p| Candidate { gap: (p.energy - energy).abs(), pair: p, k })
                .min_by(|x, y| x.gap.total_cmp(&y.gap)))
        })
        .collect::<Result<Vec<_>>>()?
        .into_iter()
        .flatten()
        .collect();
    let best = |parabolic: bool| {
        found
            .iter()
            .enumerate()
            .filter(|(_, c)| !parabolic || c.k.is_some())
            .min_by(|x, y| x.1.gap.total_cmp(&y.1.gap))
            .map(|(i, _)| i)
    };
    let idx = match (best(true), best(false)) {
        (Some(p), _) if found[p].gap <= cfg.edge_tol => p,
        (_, Some(i)) => i,
        _ => return Err(GaplabError::invalid(format!("no clean dual eigenvalue within {} of E", cfg.energy_window))),
    };
    Ok(found.into_iter().nth(idx).expect("index from enumerate"))
}

/// Pointwise `sup‖B(x+α)⁻¹A(x)B(x) − Z‖`.
fn constant_residual(b: &TrigMat, a: &TrigMat, alpha: f64, z: &Mat2<f64>) -> f64 {
    let a = if b.period() == Period::Two { a.on_period_two() } else { a.clone() };
    let m = grid_size(2 * b.trunc() + a.trunc());
    let (now, next, av) = (b.eval_grid(m), b.shift(alpha).eval_grid(m), a.eval_grid(m));
    let zc = z.to_complex();
    (0..m).map(|j| (next[j].inv() * av[j] * now[j]).max_abs_diff(&zc)).fold(0.0, f64::max)
}

/// `B` on `R/Z` when its odd modes on `R/2Z` vanish.
fn to_period_one(b: &TrigMat) -> Option<TrigMat> {
    if b.period() == Period::One {
        return Some(b.clone());
    }
    let top = b.entries.iter().flatten().flat_map(|s| s.coeffs().iter().map(|c| c.norm())).fold(0.0, f64::max);
    let odd = b
        .entries
        .iter()
        .flatten()
        .flat_map(|s| s.iter().filter(|(k, _)| k % 2 != 0).map(|(_, c)| c.norm()))
        .fold(0.0, f64::max);
    if odd > 1e-12 * top {
        return None;
    }
    Some(b.map(|s| {
        let n = s.trunc() / 2;
        let mut out = TrigSeries::zeros(n, Period::One);
        for k in -(n as i64)..=(n as i64) {
            *out.coeff_mut(k) = s.coeff(2 * k);
        }
        out
    }))
}

fn dist_z(x: f64) -> f64 {
    (x - x.round()).abs()
}

/// Reduce `S_{λ,E}` near the spectrum at small coupling.
pub fn reduce_pipeline(lambda: f64, alpha: &Frequency, energy: f64, cfg: &ReduceConfig) -> Result<Reduction> {
    if alpha.as_irrational().is_none() {
        return Err(GaplabError::invalid("reduction needs an irrational frequency"));
    }
    let mut ledger = Vec::new();
    let mut log = |stage: &str, quantity: &str, value: f64| {
        ledger.push(LedgerEntry { stage: stage.into(), quantity: quantity.into(), value });
    };
    let a = alpha.value();

    let cand = pick_candidate(lambda, alpha, energy, cfg).map_err(|e| e.at("surrogate"))?;
    let pair = &cand.pair;
    log("surrogate", "gap", cand.gap);
    log("surrogate", "eigen_residual", pair.residual);
    log("surrogate", "boundary_mass", pair.boundary_mass);
    let resonance = cand.k.map(|k| k + 2 * pair.center);

    let half = cfg.window.unwrap_or(3 * cfg.m / 4) as i64;
    let (lo, hi) = pair.centered_range();
    let window = match resonance {
        // Symmetric about −k/2 so the twisted vector is real; both peaks
        // (0 and −k) get the full margin.
        Some(k) => {
            let x1 = (-half).min(-k - half).max(lo).max(-k - hi);
            (x1, -k - x1)
        }
        None => ((-half).max(lo), half.min(hi)),
    };
    let bv = bloch_vector(pair, window, lambda, alpha).map_err(|e| e.at("bloch"))?;
    log("bloch", "identity_residual", bv.identity_residual);
    log("bloch", "defect_sup", bv.defect_sup);
    log("bloch", "boundary_defect", bv.boundary_modes.iter().cloned().fold(0.0, f64::max));
    log("bloch", "interior_defect", bv.interior_defect);

    let amo = amo_trig(lambda, pair.energy);
    let (b, normal_form, residual) = match resonance {
        None => {
            let re = realify(&bv.column, 0).map_err(|e| e.at("realify"))?;
            log("realify", "det_min", re.det_min);
            log("realify", "det_spread", re.det_max - re.det_min);
            log("realify", "det_defect", re.det_defect);
            let rr = rotation_residual(&re.w, &amo, a, bv.theta);
            log("conjugation", "rotation_residual", rr.residual);
            (re.w, NormalForm::Rotation { theta: bv.theta, sign: rr.sign }, rr.residual)
        }
        Some(k) => {
            let ut = bv.column.twist(k);
            let m = grid_size(ut.trunc());
            let (g1, g2) = (ut.u1.eval_grid(m), ut.u2.eval_grid(m));
            let sq: Complex64 = g1.iter().chain(&g2).map(|v| v * v).sum();
            let rot = cis(-0.5 * sq.arg());
            let v = ut.map(|s| s.scale(rot));
            let imag = v.map(|s| s.sub(&s.conj()).scale(Complex64::new(0.0, -0.5)));
            let (_, vmax) = v.norm_range(m);
            log("realify", "imaginary_defect", imag.norm_range(m).1 / vmax);
            let v = v.map(TrigSeries::real_part);
            let b0 = complete_to_sl2(&v, cfg.norm_floor).map_err(|e| e.at("completion"))?;
            log("completion", "det_defect", b0.det_defect(grid_size(2 * b0.trunc())));
            let conj = conjugate_cocycle(&b0, &amo, a).map_err(|e| e.at("completion"))?;
            let cm = conj.mean();
            let sign = if cm.a.re >= 0.0 { 1.0 } else { -1.0 };
            let cg = conj.eval_grid(grid_size(conj.trunc()));
            let lower = cg.iter().map(|v| v.c.norm()).fold(0.0, f64::max);
            let diag = cg.iter().map(|v| (v.a - sign).norm().max((v.d - sign).norm())).fold(0.0, f64::max);
            log("completion", "lower_left", lower);
            log("completion", "diagonal", diag);
            let kappa = conj.entries[0][1].real_part();
            let sol = scalar_homological_solve(&kappa, a, sign).map_err(|e| e.at("homological"))?;
            log("homological", "min_divisor", sol.divisors.min);
            log("homological", "residual", sol.residual);
            let phi = sol.phi.real_part();
            let one = TrigSeries::constant(1.0.into(), 0, Period::Two);
            let zero = TrigSeries::zeros(0, Period::Two);
            let shear = TrigMat::new(one.clone(), phi, zero, one);
            let b = b0.mul(&shear, b0.trunc() + shear.trunc()).real_part();
            let form = ParabolicForm::new(sign, kappa.mean().re).map_err(|e| e.at("homological"))?;
            let res = constant_residual(&b, &amo, a, &form.matrix());
            log("conjugation", "parabolic_residual", res);
            log("conjugation", "shear", form.a);
            (b, NormalForm::Parabolic(form), res)
        }
    };

    let (b, period_one) = match to_period_one(&b) {
        Some(b1) if b.period() == Period::One => (b1, true),
        Some(b1) => {
            let r1 = constant_residual(&b1, &amo, a, &normal_form.matrix());
            if r1 <= 2.0 * residual.max(1e-14) {
                (b1, true)
            } else {
                (b, false)
            }
        }
        None => (b, false),
    };

    let deg = degree(&b).map_err(|e| e.at("bookkeeping"))?;
    let spec = CocycleSpec::new(lambda, pair.energy, alpha.clone());
    let rho = rotation_number(&spec, cfg.rho_iters, 0.0, 0.0).map_err(|e| e.at("bookkeeping"))?.rho;
    let two = normal_form.double_angle();
    let rho_check = dist_z(2.0 * rho - two - deg as f64 * a).min(dist_z(2.0 * rho + two - deg as f64 * a));
    log("bookkeeping", "degree", deg as f64);
    log("bookkeeping", "rho", rho);
    log("bookkeeping", "rho_check", rho_check);

    Ok(Reduction {
        lambda,
        energy: pair.energy,
        requested_energy: energy,
        surrogate_gap: cand.gap,
        theta: bv.theta,
        resonance,
        b,
        normal_form,
        residual,
        degree: deg,
        rho,
        rho_check,
        period_one,
        ledger,
    })
}
