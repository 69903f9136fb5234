//! Bloch vectors built from dual eigenvectors, their real frames, and the
//! completion of a column to an `SL(2,R)` conjugacy.

use std::f64::consts::TAU;

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use super::trig::{cis, grid_size, Period, TrigMat, TrigSeries};
use crate::cocycle::Mat2;
use crate::error::{GaplabError, Result};
use crate::frequency::Frequency;
use crate::localization::DualEigenpair;

/// Grid tolerance on the Bloch identity, relative to `max(1, sup|u|)`.
pub const BLOCH_TOL: f64 = 1e-10;
/// `det(S|T)` below this is a resonant collapse.
pub const COLLAPSE_FLOOR: f64 = 1e-13;
/// Target `|det B − 1|` for completions and normalized frames.
pub const DET_TARGET: f64 = 1e-10;

/// A complex column `(U₁, U₂)` of trigonometric series.
#[derive(Clone, Debug, PartialEq)]
pub struct TrigCol {
    pub u1: TrigSeries,
    pub u2: TrigSeries,
}

impl TrigCol {
    pub fn new(u1: TrigSeries, u2: TrigSeries) -> Self {
        assert_eq!(u1.period(), u2.period(), "period mismatch");
        Self { u1, u2 }
    }

    pub fn period(&self) -> Period {
        self.u1.period()
    }

    pub fn trunc(&self) -> usize {
        self.u1.trunc().max(self.u2.trunc())
    }

    pub fn map(&self, f: impl Fn(&TrigSeries) -> TrigSeries) -> Self {
        Self::new(f(&self.u1), f(&self.u2))
    }

    pub fn on_period_two(&self) -> Self {
        self.map(TrigSeries::on_period_two)
    }

    /// `e^{iπkx}·U` on `R/2Z`.
    pub fn twist(&self, k: i64) -> Self {
        let c = self.on_period_two();
        let tw = |s: &TrigSeries| {
            let n = s.trunc() + k.unsigned_abs() as usize;
            let mut out = TrigSeries::zeros(n, Period::Two);
            for (j, v) in s.iter() {
                *out.coeff_mut(j + k) = v;
            }
            out
        };
        c.map(tw)
    }

    /// Largest `|W(x)|` and smallest on a grid.
    pub fn norm_range(&self, m: usize) -> (f64, f64) {
        let a = self.u1.eval_grid(m);
        let b = self.u2.eval_grid(m);
        a.iter().zip(&b).fold((f64::INFINITY, 0.0f64), |(lo, hi), (x, y)| {
            let n = (x.norm_sqr() + y.norm_sqr()).sqrt();
            (lo.min(n), hi.max(n))
        })
    }
}

/// `U^I = (e^{2πiθ}u^I(x), u^I(x−α))` and its duality defect `g`.
#[derive(Clone, Debug)]
pub struct BlochVector {
    /// `u^I(x) = Σ_{k∈I} û_k e^{2πikx}`, in centered coordinates.
    pub u: TrigSeries,
    pub column: TrigCol,
    pub defect: TrigSeries,
    /// Centered phase `θ`.
    pub theta: f64,
    pub energy: f64,
    pub window: (i64, i64),
    /// Grid sup of `A·U − e^{2πiθ}U(·+α) − e^{2πiθ}(g, 0)`.
    pub identity_residual: f64,
    /// `sup|g|` and `|ĝ|` at the four boundary modes `x₁−1, x₁, x₂, x₂+1`.
    pub defect_sup: f64,
    pub boundary_modes: [f64; 4],
    /// `Σ|ĝ_k|` over the remaining (interior) modes.
    pub interior_defect: f64,
}

/// Bloch vector of a dual eigenpair over the centered window `[x₁, x₂]`.
///
/// The cocycle is `S_{λ,E}` with `E` the pair's eigenvalue, and
/// `ĝ_k = χ(k)(E − 2cos2π(θ+kα))û_k − λ(χ(k−1)û_{k−1} + χ(k+1)û_{k+1})`.
pub fn bloch_vector(pair: &DualEigenpair, window: (i64, i64), lambda: f64, alpha: &Frequency) -> Result<BlochVector> {
    let (x1, x2) = window;
    let (lo, hi) = pair.centered_range();
    if x1 > x2 || x1 < lo || x2 > hi {
        return Err(GaplabError::invalid(format!("window [{x1}, {x2}] outside the support [{lo}, {hi}]")));
    }
    let theta = pair.centered_theta(alpha);
    let a = alpha.value();
    let energy = pair.energy;
    let coef = |k: i64| -> f64 {
        if k < x1 || k > x2 {
            0.0
        } else {
            pair.coeffs[(pair.center + k + pair.m as i64) as usize]
        }
    };
    let n = x1.unsigned_abs().max(x2.unsigned_abs()) as usize + 1;
    let mut u = TrigSeries::zeros(n, Period::One);
    let mut g = TrigSeries::zeros(n, Period::One);
    for k in -(n as i64)..=(n as i64) {
        *u.coeff_mut(k) = coef(k).into();
        let diag = energy - 2.0 * (TAU * alpha.phase(theta, k)).cos();
        *g.coeff_mut(k) = (diag * coef(k) - lambda * (coef(k - 1) + coef(k + 1))).into();
    }
    let phase = cis(TAU * theta);
    let column = TrigCol::new(u.scale(phase), u.shift(-a));

    let m = grid_size(n + 1);
    let xs: Vec<f64> = (0..m).map(|j| j as f64 / m as f64).collect();
    let c1 = column.u1.eval_grid(m);
    let c2 = column.u2.eval_grid(m);
    let n1 = column.u1.shift(a).eval_grid(m);
    let n2 = column.u2.shift(a).eval_grid(m);
    let gv = g.eval_grid(m);
    let mut err: f64 = 0.0;
    for j in 0..m {
        let v = energy - 2.0 * lambda * (TAU * xs[j]).cos();
        let l1 = v * c1[j] - c2[j];
        let l2 = c1[j];
        err = err.max((l1 - phase * (n1[j] + gv[j])).norm()).max((l2 - phase * n2[j]).norm());
    }
    let scale = u.sup_on_grid(m).max(1.0);
    if err > BLOCH_TOL * scale {
        return Err(GaplabError::Residual { what: "Bloch identity".into(), residual: err, tol: BLOCH_TOL * scale });
    }
    let boundary = [x1 - 1, x1, x2, x2 + 1];
    let boundary_modes = boundary.map(|k| g.coeff(k).norm());
    let interior_defect = g.iter().filter(|(k, _)| !boundary.contains(k)).map(|(_, c)| c.norm()).sum();
    Ok(BlochVector {
        defect_sup: g.sup_on_grid(m),
        u,
        column,
        defect: g,
        theta,
        energy,
        window,
        identity_residual: err,
        boundary_modes,
        interior_defect,
    })
}

/// Real frame of a complex column.
#[derive(Clone, Debug)]
pub struct Realified {
    /// `S = Re Ũ`, `T = Im Ũ` on the real axis.
    pub s: TrigCol,
    pub t: TrigCol,
    /// `±1` so that `det(S | ±T) > 0`.
    pub sign: f64,
    /// `W = |det(S|T)|^{−1/2}(S | ±T)`.
    pub w: TrigMat,
    /// Smallest and largest `|det(S|T)|` on the grid.
    pub det_min: f64,
    pub det_max: f64,
    /// Grid sup of `|det W − 1|`.
    pub det_defect: f64,
}

fn real_and_imag(s: &TrigSeries) -> (TrigSeries, TrigSeries) {
    let re = s.real_part();
    let im = s.sub(&s.conj()).scale(Complex64::new(0.0, -0.5));
    (re, im)
}

/// Split `Ũ = e^{iπn_jx}U` into real and imaginary columns and normalize to
/// determinant one pointwise.
pub fn realify(u: &TrigCol, n_j: i64) -> Result<Realified> {
    let ut = if n_j == 0 { u.clone() } else { u.twist(n_j) };
    let period = ut.period();
    let (s1, t1) = real_and_imag(&ut.u1);
    let (s2, t2) = real_and_imag(&ut.u2);
    let n_in = ut.trunc();
    let m0 = grid_size(n_in);
    let dets: Vec<f64> = {
        let (a, b, c, d) = (s1.eval_grid(m0), s2.eval_grid(m0), t1.eval_grid(m0), t2.eval_grid(m0));
        (0..m0).map(|j| a[j].re * d[j].re - c[j].re * b[j].re).collect()
    };
    let det_min = dets.iter().fold(f64::INFINITY, |m, d| m.min(d.abs()));
    let det_max = dets.iter().fold(0.0f64, |m, d| m.max(d.abs()));
    let positive = dets.iter().filter(|d| **d > 0.0).count();
    if det_min < COLLAPSE_FLOOR || (positive != 0 && positive != dets.len()) {
        return Err(GaplabError::ResonantCollapse(det_min));
    }
    let sign = if positive > 0 { 1.0 } else { -1.0 };
    let (t1s, t2s) = (t1.scale(sign.into()), t2.scale(sign.into()));
    let frame = TrigMat::new(s1.clone(), t1s, s2.clone(), t2s);

    // Constant determinant needs no pointwise normalization.
    let (w, det_defect) = if (det_max - det_min) <= 1e-14 * det_max {
        let w = frame.scale(1.0 / det_max.sqrt());
        let dd = w.det_defect(grid_size(n_in));
        (w, dd)
    } else {
        let mut n_out = n_in.max(4);
        loop {
            let m = grid_size(n_out);
            let vals: Vec<Mat2<Complex64>> = frame
                .eval_grid(m)
                .into_iter()
                .map(|v| v.scale(1.0 / v.det().norm().sqrt()))
                .collect();
            let w = TrigMat::from_grid(&vals, n_out, period).real_part();
            let dd = w.det_defect(grid_size(2 * n_out));
            if dd <= DET_TARGET || n_out >= 64 * n_in.max(16) {
                break (w, dd);
            }
            n_out *= 2;
        }
    };
    Ok(Realified { s: TrigCol::new(s1, s2), t: TrigCol::new(t1, t2), sign, w, det_min, det_max, det_defect })
}

/// Complete a real column `W` to `B = (W | V)` with `det B = 1`.
///
/// `V` starts from `(−w₂, w₁)/|W|²` projected by DFT; each round applies the
/// Newton correction `V ← V − r(−w₂, w₁)/|W|²` with `r = det − 1` and widens
/// the truncation until the determinant defect is below [`DET_TARGET`].
pub fn complete_to_sl2(w: &TrigCol, min_norm_floor: f64) -> Result<TrigMat> {
    let period = w.period();
    let w1 = w.u1.real_part();
    let w2 = w.u2.real_part();
    let n_in = w.trunc();
    let (lo, _) = TrigCol::new(w1.clone(), w2.clone()).norm_range(grid_size(4 * n_in.max(4)));
    if lo < min_norm_floor {
        return Err(GaplabError::VanishingColumn(lo));
    }
    let mut n_out = n_in.max(4);
    let max_out = 64 * n_in.max(16);
    let mut last;
    loop {
        let m = grid_size(n_out.max(n_in));
        let (a, b) = (w1.eval_grid(m), w2.eval_grid(m));
        let perp: Vec<(Complex64, Complex64)> = a
            .iter()
            .zip(&b)
            .map(|(x, y)| {
                let n2 = x.re * x.re + y.re * y.re;
                (Complex64::new(-y.re / n2, 0.0), Complex64::new(x.re / n2, 0.0))
            })
            .collect();
        let mut v1 = TrigSeries::from_grid(&perp.iter().map(|p| p.0).collect::<Vec<_>>(), n_out, period);
        let mut v2 = TrigSeries::from_grid(&perp.iter().map(|p| p.1).collect::<Vec<_>>(), n_out, period);
        // Newton correction on det = w₁v₂ − w₂v₁ = 1.
        let (e1, e2) = (v1.eval_grid(m), v2.eval_grid(m));
        let c1: Vec<Complex64> = (0..m).map(|j| e1[j] - (a[j] * e2[j] - b[j] * e1[j] - 1.0) * perp[j].0).collect();
        let c2: Vec<Complex64> = (0..m).map(|j| e2[j] - (a[j] * e2[j] - b[j] * e1[j] - 1.0) * perp[j].1).collect();
        v1 = TrigSeries::from_grid(&c1, n_out, period).real_part();
        v2 = TrigSeries::from_grid(&c2, n_out, period).real_part();
        let bm = TrigMat::new(w1.clone(), v1, w2.clone(), v2);
        let defect = bm.det_defect(grid_size(n_out + n_in));
        if defect <= DET_TARGET {
            return Ok(bm);
        }
        last = defect;
        if n_out >= max_out {
            break;
        }
        n_out *= 2;
    }
    Err(GaplabError::Residual { what: "SL(2) completion did not converge".into(), residual: last, tol: DET_TARGET })
}

/// Residual of a rotation conjugacy and the sign achieving it.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct RotationResidual {
    pub residual: f64,
    /// `σ` with `W(x+α)⁻¹A(x)W(x) ≈ R_{σθ̃}`.
    pub sign: f64,
}

/// `min_± sup_x ‖W(x+α)⁻¹A(x)W(x) − R_{±θ̃}‖` on a grid.
pub fn rotation_residual(w: &TrigMat, a: &TrigMat, alpha: f64, theta_tilde: f64) -> RotationResidual {
    let period = w.period();
    let a = if period == Period::Two { a.on_period_two() } else { a.clone() };
    let m = grid_size(2 * w.trunc() + a.trunc());
    let now = w.eval_grid(m);
    let next = w.shift(alpha).eval_grid(m);
    let av = a.eval_grid(m);
    let plus = Mat2::rotation(theta_tilde).to_complex();
    let minus = Mat2::rotation(-theta_tilde).to_complex();
    let (mut rp, mut rm): (f64, f64) = (0.0, 0.0);
    for j in 0..m {
        let c = next[j].inv() * av[j] * now[j];
        rp = rp.max(c.max_abs_diff(&plus));
        rm = rm.max(c.max_abs_diff(&minus));
    }
    if rp <= rm {
        RotationResidual { residual: rp, sign: 1.0 }
    } else {
        RotationResidual { residual: rm, sign: -1.0 }
    }
}
