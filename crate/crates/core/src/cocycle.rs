//! Transfer-matrix cocycles: scaled products, Lyapunov exponents (real and
//! complexified phase), rotation numbers, hyperbolicity, conjugation and degree.

use std::f64::consts::{PI, TAU};
use std::fmt::Debug;
use std::ops::{Add, Mul, Neg, Sub};

use num_complex::Complex64;
use rand::Rng;
use rand_chacha::rand_core::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{GaplabError, Result};
use crate::frequency::Frequency;
use crate::linalg::pairwise_sum;
use crate::reducibility::trig::{grid_size, Period, TrigMat, TrigSeries};

/// Scalar field for [`Mat2`]: `f64` or `Complex64`.
pub trait Scalar:
    Copy
    + Debug
    + PartialEq
    + Send
    + Sync
    + Add<Output = Self>
    + Sub<Output = Self>
    + Mul<Output = Self>
    + Neg<Output = Self>
{
    fn zero() -> Self;
    fn one() -> Self;
    fn abs2(self) -> f64;
    fn scale(self, s: f64) -> Self;
    fn div(self, o: Self) -> Self;
}

impl Scalar for f64 {
    fn zero() -> Self {
        0.0
    }
    fn one() -> Self {
        1.0
    }
    fn abs2(self) -> f64 {
        self * self
    }
    fn scale(self, s: f64) -> Self {
        self * s
    }
    fn div(self, o: Self) -> Self {
        self / o
    }
}

impl Scalar for Complex64 {
    fn zero() -> Self {
        Complex64::new(0.0, 0.0)
    }
    fn one() -> Self {
        Complex64::new(1.0, 0.0)
    }
    fn abs2(self) -> f64 {
        self.norm_sqr()
    }
    fn scale(self, s: f64) -> Self {
        self * s
    }
    fn div(self, o: Self) -> Self {
        self / o
    }
}

/// 2×2 matrix `[[a, b], [c, d]]`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Mat2<T = f64> {
    pub a: T,
    pub b: T,
    pub c: T,
    pub d: T,
}

impl<T: Scalar> Mat2<T> {
    pub fn new(a: T, b: T, c: T, d: T) -> Self {
        Self { a, b, c, d }
    }

    pub fn identity() -> Self {
        Self::new(T::one(), T::zero(), T::zero(), T::one())
    }

    pub fn zero() -> Self {
        Self::new(T::zero(), T::zero(), T::zero(), T::zero())
    }

    pub fn det(&self) -> T {
        self.a * self.d - self.b * self.c
    }

    pub fn trace(&self) -> T {
        self.a + self.d
    }

    /// Inverse, dividing by the determinant.
    pub fn inv(&self) -> Self {
        let det = self.det();
        Self::new(self.d.div(det), (-self.b).div(det), (-self.c).div(det), self.a.div(det))
    }

    /// Adjugate, which equals the inverse for determinant one.
    pub fn adj(&self) -> Self {
        Self::new(self.d, -self.b, -self.c, self.a)
    }

    pub fn scale(&self, s: f64) -> Self {
        Self::new(self.a.scale(s), self.b.scale(s), self.c.scale(s), self.d.scale(s))
    }

    pub fn frob(&self) -> f64 {
        (self.a.abs2() + self.b.abs2() + self.c.abs2() + self.d.abs2()).sqrt()
    }

    /// Largest singular value.
    pub fn op_norm(&self) -> f64 {
        let f2 = self.a.abs2() + self.b.abs2() + self.c.abs2() + self.d.abs2();
        let det2 = self.det().abs2();
        let disc = (f2 * f2 - 4.0 * det2).max(0.0).sqrt();
        (0.5 * (f2 + disc)).sqrt()
    }

    pub fn max_abs_diff(&self, o: &Self) -> f64 {
        [self.a - o.a, self.b - o.b, self.c - o.c, self.d - o.d]
            .iter()
            .map(|v| v.abs2().sqrt())
            .fold(0.0, f64::max)
    }
}

impl<T: Scalar> Mul for Mat2<T> {
    type Output = Self;
    fn mul(self, o: Self) -> Self {
        Self::new(
            self.a * o.a + self.b * o.c,
            self.a * o.b + self.b * o.d,
            self.c * o.a + self.d * o.c,
            self.c * o.b + self.d * o.d,
        )
    }
}

impl<T: Scalar> Add for Mat2<T> {
    type Output = Self;
    fn add(self, o: Self) -> Self {
        Self::new(self.a + o.a, self.b + o.b, self.c + o.c, self.d + o.d)
    }
}

impl<T: Scalar> Sub for Mat2<T> {
    type Output = Self;
    fn sub(self, o: Self) -> Self {
        Self::new(self.a - o.a, self.b - o.b, self.c - o.c, self.d - o.d)
    }
}

impl Mat2<f64> {
    /// `R_θ = [[cos2πθ, −sin2πθ], [sin2πθ, cos2πθ]]`.
    pub fn rotation(theta: f64) -> Self {
        let (s, c) = (TAU * theta).sin_cos();
        Self::new(c, -s, s, c)
    }

    pub fn to_complex(&self) -> Mat2<Complex64> {
        Mat2::new(self.a.into(), self.b.into(), self.c.into(), self.d.into())
    }

    /// Direction angle (mod π) of the most expanded output direction.
    pub fn top_left_singular_angle(&self) -> f64 {
        let p = self.a * self.a + self.b * self.b;
        let r = self.c * self.c + self.d * self.d;
        let s = self.a * self.c + self.b * self.d;
        0.5 * (2.0 * s).atan2(p - r)
    }
}

/// Almost Mathieu cocycle matrix `S_{λ,E}(x) = [[E − 2λcos2πx, −1], [1, 0]]`.
pub fn amo_matrix(lambda: f64, energy: f64, x: f64) -> Mat2<f64> {
    Mat2::new(energy - 2.0 * lambda * (TAU * x).cos(), -1.0, 1.0, 0.0)
}

/// `S_{λ,E}(x + iε)`.
pub fn amo_matrix_complex(lambda: f64, energy: f64, x: f64, eps: f64) -> Mat2<Complex64> {
    let arg = Complex64::new(TAU * x, TAU * eps);
    let one = Complex64::new(1.0, 0.0);
    Mat2::new(Complex64::new(energy, 0.0) - 2.0 * lambda * arg.cos(), -one, one, Complex64::new(0.0, 0.0))
}

/// `(α, S_{λ,E})` evaluated at phase `x + iε`.
#[derive(Clone, Debug)]
pub struct CocycleSpec {
    pub lambda: f64,
    pub energy: f64,
    pub alpha: Frequency,
    pub im_offset: f64,
}

impl CocycleSpec {
    pub fn new(lambda: f64, energy: f64, alpha: Frequency) -> Self {
        Self { lambda, energy, alpha, im_offset: 0.0 }
    }

    pub fn with_im_offset(mut self, eps: f64) -> Self {
        self.im_offset = eps;
        self
    }

    pub fn matrix(&self, x: f64) -> Mat2<f64> {
        amo_matrix(self.lambda, self.energy, x)
    }

    pub fn matrix_complex(&self, x: f64) -> Mat2<Complex64> {
        amo_matrix_complex(self.lambda, self.energy, x, self.im_offset)
    }
}

/// A product `e^{log_mag} · unit` with `unit` of unit Frobenius norm.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct ScaledProduct<T = f64> {
    pub unit: Mat2<T>,
    pub log_mag: f64,
}

impl<T: Scalar> ScaledProduct<T> {
    pub fn identity() -> Self {
        let mut p = Self { unit: Mat2::identity(), log_mag: 0.0 };
        p.renormalize();
        p
    }

    fn renormalize(&mut self) {
        let f = self.unit.frob();
        if f > 0.0 && f.is_finite() {
            self.unit = self.unit.scale(1.0 / f);
            self.log_mag += f.ln();
        }
    }

    /// Left-multiply by `m`.
    pub fn push(&mut self, m: &Mat2<T>) {
        self.unit = *m * self.unit;
        self.renormalize();
    }

    /// Left-multiply by `m ∈ SL(2)` and restore `det = 1` by re-solving the
    /// entry opposite the largest one, which keeps the weak singular
    /// direction from dissolving into rounding noise.
    pub fn push_sl2(&mut self, m: &Mat2<T>) {
        self.push(m);
        let delta = T::one().scale((-2.0 * self.log_mag).exp());
        let u = &mut self.unit;
        let mags = [u.a.abs2(), u.b.abs2(), u.c.abs2(), u.d.abs2()];
        let big = (0..4).max_by(|&i, &j| mags[i].total_cmp(&mags[j])).unwrap_or(0);
        match big {
            0 => u.d = (delta + u.b * u.c).div(u.a),
            1 => u.c = (u.a * u.d - delta).div(u.b),
            2 => u.b = (u.a * u.d - delta).div(u.c),
            _ => u.a = (delta + u.b * u.c).div(u.d),
        }
    }

    /// `ln‖A‖` for the operator norm.
    pub fn log_norm(&self) -> f64 {
        self.log_mag + self.unit.op_norm().ln()
    }

    /// Determinant of the represented matrix.
    pub fn det(&self) -> T {
        self.unit.det().scale((2.0 * self.log_mag).exp())
    }

    /// The represented matrix; overflows for large `log_mag`.
    pub fn matrix(&self) -> Mat2<T> {
        self.unit.scale(self.log_mag.exp())
    }
}

/// `A(x+(n−1)α)⋯A(x)` for a matrix function with values in `SL(2)`.
pub fn product_with<T: Scalar>(
    alpha: &Frequency,
    x: f64,
    n: usize,
    mut f: impl FnMut(f64) -> Mat2<T>,
) -> ScaledProduct<T> {
    let mut p = ScaledProduct::identity();
    for j in 0..n {
        p.push_sl2(&f(alpha.phase(x, j as i64)));
    }
    p
}

/// Real transfer product `A_n(x)`; the imaginary offset must be zero.
pub fn transfer_product(spec: &CocycleSpec, x: f64, n: usize) -> Result<ScaledProduct<f64>> {
    if n == 0 {
        return Err(GaplabError::invalid("n must be ≥ 1"));
    }
    if spec.im_offset != 0.0 {
        return Err(GaplabError::invalid("use transfer_product_complex for ε ≠ 0"));
    }
    Ok(product_with(&spec.alpha, x, n, |t| spec.matrix(t)))
}

/// Transfer product at the complexified phase `x + iε`.
pub fn transfer_product_complex(spec: &CocycleSpec, x: f64, n: usize) -> Result<ScaledProduct<Complex64>> {
    if n == 0 {
        return Err(GaplabError::invalid("n must be ≥ 1"));
    }
    Ok(product_with(&spec.alpha, x, n, |t| spec.matrix_complex(t)))
}

/// `(1/n) ln‖A_n(x + iε)‖`.
pub fn growth_rate(spec: &CocycleSpec, x: f64, n: usize) -> f64 {
    let ln = if spec.im_offset == 0.0 {
        product_with(&spec.alpha, x, n, |t| spec.matrix(t)).log_norm()
    } else {
        product_with(&spec.alpha, x, n, |t| spec.matrix_complex(t)).log_norm()
    };
    ln / n as f64
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct LyapunovEstimate {
    /// Phase-averaged `(1/n) ln‖A_n‖`.
    pub mean: f64,
    /// Largest sample, an upper estimate by uniform convergence.
    pub max: f64,
    pub min: f64,
    pub phases: Vec<f64>,
    pub samples: Vec<f64>,
}

/// Lyapunov exponent from `n_phase_samples` seeded random phases.
pub fn lyapunov(spec: &CocycleSpec, n_iters: usize, n_phase_samples: usize, seed: u64) -> Result<LyapunovEstimate> {
    if n_iters == 0 || n_phase_samples == 0 {
        return Err(GaplabError::invalid("need n_iters ≥ 1 and at least one phase"));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let phases: Vec<f64> = (0..n_phase_samples).map(|_| rng.gen::<f64>()).collect();
    let samples: Vec<f64> = phases.par_iter().map(|&x| growth_rate(spec, x, n_iters)).collect();
    Ok(LyapunovEstimate {
        mean: pairwise_sum(&samples) / samples.len() as f64,
        max: samples.iter().cloned().fold(f64::NEG_INFINITY, f64::max),
        min: samples.iter().cloned().fold(f64::INFINITY, f64::min),
        phases,
        samples,
    })
}

/// Continuous lift of the polar angle `ψ(x)` of `A(x) = R_ψ P(x)`, `P > 0`.
struct PolarLift {
    grid: Vec<f64>,
}

impl PolarLift {
    const N: usize = 4096;

    fn new(a: &dyn Fn(f64) -> Mat2<f64>) -> Result<Self> {
        let mut grid = Vec::with_capacity(Self::N + 1);
        let mut prev: Option<f64> = None;
        for i in 0..=Self::N {
            let raw = polar_angle(&a(i as f64 / Self::N as f64));
            let v = match prev {
                None => raw,
                Some(p) => p + wrap_pi(raw - p),
            };
            grid.push(v);
            prev = Some(v);
        }
        if (grid[Self::N] - grid[0]).abs() > 1e-6 {
            return Err(GaplabError::invalid("cocycle is not homotopic to a constant (polar angle winds)"));
        }
        Ok(Self { grid })
    }

    fn at(&self, x: f64, m: &Mat2<f64>) -> f64 {
        let t = x.rem_euclid(1.0) * Self::N as f64;
        let i = (t.floor() as usize).min(Self::N - 1);
        let w = t - i as f64;
        let guess = (1.0 - w) * self.grid[i] + w * self.grid[i + 1];
        let raw = polar_angle(m);
        guess + wrap_pi(raw - guess)
    }
}

fn polar_angle(m: &Mat2<f64>) -> f64 {
    (m.c - m.b).atan2(m.a + m.d)
}

/// Reduce to `(−π, π]`.
fn wrap_pi(x: f64) -> f64 {
    let y = (x + PI).rem_euclid(TAU) - PI;
    if y <= -PI {
        y + TAU
    } else {
        y
    }
}

/// One projective step: returns the lifted angle increment.
fn projective_increment(m: &Mat2<f64>, psi: f64, phi: f64) -> f64 {
    let (s, c) = phi.sin_cos();
    let (ps, pc) = (-psi).sin_cos();
    // P = R_{−ψ} M is symmetric positive definite, so its increment lies in (−π/2, π/2).
    let pa = pc * m.a - ps * m.c;
    let pb = pc * m.b - ps * m.d;
    let pcc = ps * m.a + pc * m.c;
    let pd = ps * m.b + pc * m.d;
    let (vx, vy) = (pa * c + pb * s, pcc * c + pd * s);
    let cross = c * vy - s * vx;
    let dot = c * vx + s * vy;
    psi + cross.atan2(dot)
}

/// Rotation number of a general `SL(2,R)` cocycle homotopic to a constant,
/// from a single start `(x0, φ0)`; `φ0` is in units where `1/2` is a half turn.
pub fn rotation_number_of(
    a: &(dyn Fn(f64) -> Mat2<f64> + Sync),
    alpha: &Frequency,
    n_iters: usize,
    x0: f64,
    phi0: f64,
) -> Result<f64> {
    let lift = PolarLift::new(a)?;
    Ok(lifted_average(a, &lift, alpha, n_iters, x0, phi0))
}

fn lifted_average(
    a: &dyn Fn(f64) -> Mat2<f64>,
    lift: &PolarLift,
    alpha: &Frequency,
    n_iters: usize,
    x0: f64,
    phi0: f64,
) -> f64 {
    let mut phi = TAU * phi0;
    let mut total = 0.0;
    let mut comp = 0.0;
    for j in 0..n_iters {
        let x = alpha.phase(x0, j as i64);
        let m = a(x);
        let inc = projective_increment(&m, lift.at(x, &m), phi);
        let y = inc - comp;
        let t = total + y;
        comp = (t - total) - y;
        total = t;
        phi = (phi + inc).rem_euclid(PI);
    }
    total / (TAU * n_iters as f64)
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RotationEstimate {
    pub rho: f64,
    /// Spread over the four starts.
    pub spread: f64,
}

/// Fibered rotation number `ρ ∈ [0, 1/2]` of the almost Mathieu cocycle.
///
/// Four starts are compared: phase and angle both vary for irrational α;
/// only the angle varies for rational α, where `ρ` depends on the orbit.
pub fn rotation_number(spec: &CocycleSpec, n_iters: usize, x0: f64, phi0: f64) -> Result<RotationEstimate> {
    if spec.im_offset != 0.0 {
        return Err(GaplabError::invalid("rotation number needs a real phase"));
    }
    if n_iters == 0 {
        return Err(GaplabError::invalid("n_iters must be ≥ 1"));
    }
    let a = |x: f64| spec.matrix(x);
    let lift = PolarLift::new(&a)?;
    let rational = spec.alpha.as_rational().is_some();
    let starts: Vec<(f64, f64)> = (0..4)
        .map(|i| {
            let dx = if rational { 0.0 } else { 0.25 * i as f64 };
            (x0 + dx, phi0 + 0.125 * i as f64)
        })
        .collect();
    let rhos: Vec<f64> = starts
        .par_iter()
        .map(|&(x, p)| lifted_average(&a, &lift, &spec.alpha, n_iters, x, p))
        .collect();
    let lo = rhos.iter().cloned().fold(f64::INFINITY, f64::min);
    let hi = rhos.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    let spread = hi - lo;
    let tol = 5.0 / n_iters as f64;
    if spread > tol {
        return Err(GaplabError::NonConvergence { spread, tol });
    }
    let rho = (pairwise_sum(&rhos) / 4.0).clamp(0.0, 0.5);
    Ok(RotationEstimate { rho, spread })
}

/// Rotation number averaged over `n_x` equispaced starting phases.
pub fn rotation_number_averaged(spec: &CocycleSpec, n_iters: usize, n_x: usize) -> Result<f64> {
    let a = |x: f64| spec.matrix(x);
    let lift = PolarLift::new(&a)?;
    let rhos: Vec<f64> = (0..n_x)
        .into_par_iter()
        .map(|i| lifted_average(&a, &lift, &spec.alpha, n_iters, i as f64 / n_x as f64, 0.0))
        .collect();
    Ok((pairwise_sum(&rhos) / n_x as f64).clamp(0.0, 0.5))
}

/// `N = 1 − 2ρ`.
pub fn ids_from_rotation(rho: f64) -> f64 {
    1.0 - 2.0 * rho
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum UhVerdict {
    Hyperbolic,
    NotHyperbolic,
    Inconclusive,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct UhReport {
    pub verdict: UhVerdict,
    /// `min_x (1/n) ln‖A_n(x)‖` over the grid.
    pub min_rate: f64,
    pub growth_ok: bool,
    /// Largest angle between unstable-direction estimates at depths `n/2` and `n`.
    pub max_drift: f64,
    pub cone_ok: bool,
}

pub const UH_GRID: usize = 64;
pub const UH_CONE_TOL: f64 = 1e-4;

/// Uniform hyperbolicity by growth on a 64-point grid plus an invariant-cone
/// test on the most expanded output directions.
pub fn uniform_hyperbolicity_test(spec: &CocycleSpec, n: usize, gamma_floor: f64) -> Result<UhReport> {
    if spec.im_offset != 0.0 {
        return Err(GaplabError::invalid("hyperbolicity test needs a real phase"));
    }
    if n < 2 {
        return Err(GaplabError::invalid("n must be ≥ 2"));
    }
    let log_floor = gamma_floor.ln();
    let half = n / 2;
    let cells: Vec<(f64, f64)> = (0..UH_GRID)
        .into_par_iter()
        .map(|i| {
            let x = i as f64 / UH_GRID as f64;
            let full = product_with(&spec.alpha, spec.alpha.phase(x, -(n as i64)), n, |t| spec.matrix(t));
            let part = product_with(&spec.alpha, spec.alpha.phase(x, -(half as i64)), half, |t| spec.matrix(t));
            let rate = full.log_norm() / n as f64;
            let d = full.unit.top_left_singular_angle() - part.unit.top_left_singular_angle();
            let drift = (d - PI * (d / PI).round()).abs();
            (rate, drift)
        })
        .collect();
    let min_rate = cells.iter().map(|c| c.0).fold(f64::INFINITY, f64::min);
    let max_drift = cells.iter().map(|c| c.1).fold(0.0, f64::max);
    let growth_ok = min_rate >= log_floor;
    let cone_ok = max_drift <= UH_CONE_TOL;
    let verdict = match (growth_ok, cone_ok) {
        (true, true) => UhVerdict::Hyperbolic,
        (true, false) => UhVerdict::Inconclusive,
        (false, _) => UhVerdict::NotHyperbolic,
    };
    Ok(UhReport { verdict, min_rate, growth_ok, max_drift, cone_ok })
}

/// `S_{λ,E}` as a degree-one trigonometric matrix on `R/Z`.
pub fn amo_trig(lambda: f64, energy: f64) -> TrigMat {
    let c = |v: f64| Complex64::new(v, 0.0);
    let e11 = TrigSeries::from_pairs(&[(-1, c(-lambda)), (0, c(energy)), (1, c(-lambda))], Period::One);
    let k = |v: f64| TrigSeries::constant(c(v), 0, Period::One);
    TrigMat::new(e11, k(-1.0), k(1.0), k(0.0))
}

/// Condition bound above which a conjugacy is treated as singular.
pub const CONJ_MAX_COND: f64 = 1e8;

/// `x ↦ B(x+α)⁻¹ A(x) B(x)`, exact on a grid of at least four times the
/// output degree. `B` must have determinant one; its adjugate is used as the
/// inverse so polynomial inputs give a polynomial output.
pub fn conjugate_cocycle(b: &TrigMat, a: &TrigMat, alpha: f64) -> Result<TrigMat> {
    let period = b.period();
    let a = match (period, a.period()) {
        (Period::Two, Period::One) => a.on_period_two(),
        (p, q) if p == q => a.clone(),
        _ => return Err(GaplabError::invalid("a period-2 cocycle cannot be conjugated by a period-1 map")),
    };
    let n_out = 2 * b.trunc() + a.trunc();
    let m = grid_size(n_out);
    let b_now = b.eval_grid(m);
    let b_next = b.shift(alpha).eval_grid(m);
    let a_vals = a.eval_grid(m);
    let mut vals = Vec::with_capacity(m);
    for j in 0..m {
        let (bj, bn) = (b_now[j], b_next[j]);
        for v in [bj, bn] {
            let det = v.det();
            if (det - 1.0).norm() > 1e-8 {
                return Err(GaplabError::invalid(format!("conjugacy has det {det} at grid point {j}")));
            }
            let cond = v.frob().powi(2) / det.norm();
            if cond > CONJ_MAX_COND {
                return Err(GaplabError::NearSingular(format!("condition {cond:.3e} at grid point {j}")));
            }
        }
        vals.push(bn.adj() * a_vals[j] * bj);
    }
    Ok(TrigMat::from_grid(&vals, n_out, period))
}

/// Winding number of the first column of a real `B` on `R/2Z`, by angle
/// accumulation and by the argument principle for
/// `f(z) = z^N (b₁₁ + i b₂₁)(z)`, `z = e^{iπx}`. The two must agree.
pub fn degree(b: &TrigMat) -> Result<i64> {
    let b = b.on_period_two();
    let i = Complex64::new(0.0, 1.0);
    let w = b.entries[0][0].add(&b.entries[1][0].scale(i));
    let n = w.trunc();
    let m0 = grid_size(n).max(4096);
    let vals = w.eval_grid(m0);
    let (lo, hi) = vals.iter().fold((f64::INFINITY, 0.0f64), |(l, h), v| (l.min(v.norm()), h.max(v.norm())));
    if lo < 1e-8 {
        return Err(GaplabError::VanishingColumn(lo));
    }
    // The angle moves at most `π·N·max|w|/min|w|` per unit x; keep steps well below π/2.
    let m = ((8.0 * n as f64 * hi / lo).ceil() as usize).next_power_of_two().clamp(m0, 1 << 22);
    let vals = if m == m0 { vals } else { w.eval_grid(m) };
    let mut winding = 0.0;
    for j in 0..m {
        let step = (vals[(j + 1) % m] / vals[j]).arg();
        if step.abs() > 0.5 * PI {
            return Err(GaplabError::NearSingular(format!("angle step {step:.3} on a grid of {m}")));
        }
        winding += step;
    }
    let winding = (winding / TAU).round() as i64;
    // Argument principle: (1/2πi)∮ f'/f dz = mean over |z|=1 of z f'(z)/f(z).
    let dw = w.map_coeffs(|k, c| c * k as f64);
    let dvals = dw.eval_grid(m);
    let mean: f64 = vals.iter().zip(&dvals).map(|(v, d)| (d / v).re).sum::<f64>() / m as f64;
    let zeros = (mean + n as f64).round() as i64;
    if (mean + n as f64 - zeros as f64).abs() > 0.1 {
        return Err(GaplabError::NearSingular(format!("argument integral {mean:.4} is not an integer")));
    }
    let by_zeros = zeros - n as i64;
    if by_zeros != winding {
        return Err(GaplabError::DegreeDisagreement { winding, zeros: by_zeros });
    }
    Ok(winding)
}
