//! Scalar and parabolic-matrix homological equations, solved mode by mode.
//!
//! On a circle of length `P` the shift `x ↦ x + α` multiplies mode `k` by
//! `w_k = e^{2πikα/P}`, so every equation reduces to division by `w_k − 1`.

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use super::trig::{grid_size, TrigMat, TrigSeries};
use crate::cocycle::Mat2;
use crate::error::{GaplabError, Result};

/// Divisors `|w_k − 1|` below this are treated as resonant.
pub const DIVISOR_FLOOR: f64 = 1e-14;

/// `[[sign, a], [0, sign]]`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct ParabolicForm {
    pub sign: f64,
    pub a: f64,
}

impl ParabolicForm {
    pub fn new(sign: f64, a: f64) -> Result<Self> {
        if sign != 1.0 && sign != -1.0 {
            return Err(GaplabError::invalid(format!("parabolic sign must be ±1, got {sign}")));
        }
        Ok(Self { sign, a })
    }

    pub fn matrix(&self) -> Mat2<f64> {
        Mat2::new(self.sign, self.a, 0.0, self.sign)
    }

    /// Shear `a'` in `Z = sign·(I + a'N)`, `N = E₁₂`.
    pub fn shear(&self) -> f64 {
        self.sign * self.a
    }
}

/// Per-mode divisor record.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct DivisorStats {
    /// `min_{0<|k|≤N} |w_k − 1|`.
    pub min: f64,
    pub argmin: i64,
    /// `(k, |w_k − 1|)` for `k = 1..=N`; the divisor is even in `k`.
    pub by_k: Vec<(i64, f64)>,
}

fn shift_factor(k: i64, alpha: f64, period_len: f64) -> Complex64 {
    // Reduce kα mod P first so large k keep full precision in the angle.
    let t = (k as f64 * alpha).rem_euclid(period_len) / period_len;
    Complex64::from_polar(1.0, std::f64::consts::TAU * t)
}

fn divisors(n: usize, alpha: f64, period_len: f64) -> Result<DivisorStats> {
    let by_k: Vec<(i64, f64)> =
        (1..=n as i64).map(|k| (k, (shift_factor(k, alpha, period_len) - 1.0).norm())).collect();
    let bad: Vec<i64> = by_k.iter().filter(|(_, d)| *d < DIVISOR_FLOOR).map(|(k, _)| *k).collect();
    if !bad.is_empty() {
        return Err(GaplabError::SmallDivisor(bad));
    }
    let (argmin, min) = by_k.iter().cloned().fold((0, f64::INFINITY), |acc, (k, d)| if d < acc.1 { (k, d) } else { acc });
    Ok(DivisorStats { min, argmin, by_k })
}

#[derive(Clone, Debug)]
pub struct ScalarSolution {
    pub phi: TrigSeries,
    pub divisors: DivisorStats,
    /// Grid sup of `s·φ(x+α) − s·φ(x) − (κ − [κ])`, relative to `sup|κ|`.
    pub residual: f64,
    /// Fitted decay rates of `κ` and `φ` (per unit index), when measurable.
    pub kappa_decay: Option<f64>,
    pub phi_decay: Option<f64>,
}

/// Solve `s·φ(x+α) − s·φ(x) = κ(x) − [κ]` with `φ̂₀ = 0`.
pub fn scalar_homological_solve(kappa: &TrigSeries, alpha: f64, sign: f64) -> Result<ScalarSolution> {
    if sign != 1.0 && sign != -1.0 {
        return Err(GaplabError::invalid("sign must be ±1"));
    }
    let plen = kappa.period().length();
    let n = kappa.trunc();
    let divisors = divisors(n, alpha, plen)?;
    let phi = kappa.map_coeffs(|k, c| if k == 0 { Complex64::new(0.0, 0.0) } else { -sign * c / (1.0 - shift_factor(k, alpha, plen)) });

    let m = grid_size(n);
    let lhs = phi.shift(alpha).sub(&phi).scale(Complex64::new(sign, 0.0)).eval_grid(m);
    let mut rhs = kappa.clone();
    *rhs.coeff_mut(0) = Complex64::new(0.0, 0.0);
    let rhs = rhs.eval_grid(m);
    let err = lhs.iter().zip(&rhs).map(|(a, b)| (a - b).norm()).fold(0.0, f64::max);
    let scale = kappa.sup_on_grid(m).max(f64::MIN_POSITIVE);
    Ok(ScalarSolution {
        residual: err / scale,
        kappa_decay: kappa.decay_rate(1e-13),
        phi_decay: phi.decay_rate(1e-13),
        phi,
        divisors,
    })
}

#[derive(Clone, Debug)]
pub struct MatrixSolution {
    pub y: TrigMat,
    pub divisors: DivisorStats,
    /// Grid sup of `Y(x+α)Z − ZY(x) − Z(T − T̂₀)`, relative to `sup‖T‖`.
    pub residual: f64,
    /// Grid sup of `|tr Y|`.
    pub trace_defect: f64,
}

/// Solve `Y(x+α)Z − ZY(x) = Z(T − T̂₀)` for parabolic `Z` with `Ŷ₀ = 0`.
///
/// Writing `Z = s(I + aN)` and `R = T − T̂₀`, the triangular structure gives
/// `y₂₁` with one divisor, `y₁₁` and `y₂₂` with two, and `y₁₂` with three.
pub fn matrix_homological_solve(z: &ParabolicForm, t: &TrigMat, alpha: f64, n_trunc: usize) -> Result<MatrixSolution> {
    let period = t.period();
    let plen = period.length();
    let divisors = divisors(n_trunc, alpha, plen)?;
    let a = z.shear();
    let r = t.map(|s| s.resized(n_trunc));
    let e = &r.entries;
    let mut y: [TrigSeries; 4] = std::array::from_fn(|_| TrigSeries::zeros(n_trunc, period));
    for k in -(n_trunc as i64)..=(n_trunc as i64) {
        if k == 0 {
            continue;
        }
        let w = shift_factor(k, alpha, plen);
        let dv = w - 1.0;
        let (r11, r12, r21, r22) = (e[0][0].coeff(k), e[0][1].coeff(k), e[1][0].coeff(k), e[1][1].coeff(k));
        let y21 = r21 / dv;
        let y11 = (r11 + a * r21 + a * y21) / dv;
        let y22 = (r22 - a * w * y21) / dv;
        let y12 = (r12 + a * r22 - a * (w * y11 - y22)) / dv;
        *y[0].coeff_mut(k) = y11;
        *y[1].coeff_mut(k) = y12;
        *y[2].coeff_mut(k) = y21;
        *y[3].coeff_mut(k) = y22;
    }
    let [y11, y12, y21, y22] = y;
    let y = TrigMat::new(y11, y12, y21, y22);

    let m = grid_size(n_trunc);
    let zc = z.matrix().to_complex();
    let t0 = r.mean();
    let y_now = y.eval_grid(m);
    let y_next = y.shift(alpha).eval_grid(m);
    let r_vals = r.eval_grid(m);
    let mut err: f64 = 0.0;
    let mut tr: f64 = 0.0;
    let mut scale: f64 = 0.0;
    for j in 0..m {
        let lhs = y_next[j] * zc - zc * y_now[j];
        let rhs = zc * (r_vals[j] - t0);
        err = err.max(lhs.max_abs_diff(&rhs));
        tr = tr.max(y_now[j].trace().norm());
        scale = scale.max(r_vals[j].max_abs_diff(&Mat2::zero()));
    }
    Ok(MatrixSolution { y, divisors, residual: err / scale.max(f64::MIN_POSITIVE), trace_defect: tr })
}
