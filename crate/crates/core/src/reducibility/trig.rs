//! Scalar and 2×2 trigonometric series on `R/Z` or `R/2Z`.
//!
//! A series is `f(x) = Σ_{|k|≤N} ĉ_k e^{2πikx/P}` with period `P ∈ {1, 2}`.
//! On the grid `x_j = jP/M` this is a plain length-`M` DFT for either period.

use std::f64::consts::TAU;
use std::sync::Arc;

use num_complex::Complex64;
use rustfft::{Fft, FftPlanner};
use serde::{Deserialize, Serialize};
use serde_json::{json, Value};

use crate::cocycle::Mat2;
use crate::error::{GaplabError, Result};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum Period {
    One,
    Two,
}

impl Period {
    pub fn length(self) -> f64 {
        match self {
            Period::One => 1.0,
            Period::Two => 2.0,
        }
    }

    pub fn from_length(p: u64) -> Result<Self> {
        match p {
            1 => Ok(Period::One),
            2 => Ok(Period::Two),
            _ => Err(GaplabError::invalid(format!("period must be 1 or 2, got {p}"))),
        }
    }
}

pub(crate) fn fft_forward(buf: &mut [Complex64]) {
    plan(buf.len(), false).process(buf);
}

pub(crate) fn fft_inverse(buf: &mut [Complex64]) {
    plan(buf.len(), true).process(buf);
}

fn plan(n: usize, inverse: bool) -> Arc<dyn Fft<f64>> {
    thread_local! {
        static PLANNER: std::cell::RefCell<FftPlanner<f64>> = std::cell::RefCell::new(FftPlanner::new());
    }
    PLANNER.with(|p| {
        let mut p = p.borrow_mut();
        if inverse {
            p.plan_fft_inverse(n)
        } else {
            p.plan_fft_forward(n)
        }
    })
}

/// Grid size used to multiply or compose series of the given truncations.
pub fn grid_size(n_trunc: usize) -> usize {
    (4 * n_trunc + 4).next_power_of_two().max(16)
}

/// Scalar trigonometric series with coefficients `ĉ_{−N..=N}`.
#[derive(Clone, Debug, PartialEq)]
pub struct TrigSeries {
    coeffs: Vec<Complex64>,
    period: Period,
}

impl TrigSeries {
    pub fn zeros(n: usize, period: Period) -> Self {
        Self { coeffs: vec![Complex64::new(0.0, 0.0); 2 * n + 1], period }
    }

    pub fn constant(c: Complex64, n: usize, period: Period) -> Self {
        let mut s = Self::zeros(n, period);
        s.coeffs[n] = c;
        s
    }

    /// From coefficients indexed `−N..=N`.
    pub fn from_coeffs(coeffs: Vec<Complex64>, period: Period) -> Result<Self> {
        if coeffs.len().is_multiple_of(2) {
            return Err(GaplabError::invalid("coefficient vector must have odd length 2N+1"));
        }
        Ok(Self { coeffs, period })
    }

    /// From `(k, ĉ_k)` pairs.
    pub fn from_pairs(pairs: &[(i64, Complex64)], period: Period) -> Self {
        let n = pairs.iter().map(|(k, _)| k.unsigned_abs() as usize).max().unwrap_or(0);
        let mut s = Self::zeros(n, period);
        for &(k, c) in pairs {
            *s.coeff_mut(k) += c;
        }
        s
    }

    /// Sample `f` on a grid of `m ≥ 2N+1` points and keep `|k| ≤ N`.
    pub fn from_fn(f: impl Fn(f64) -> Complex64, n: usize, period: Period) -> Self {
        let m = grid_size(n);
        let vals: Vec<Complex64> = (0..m).map(|j| f(j as f64 * period.length() / m as f64)).collect();
        Self::from_grid(&vals, n, period)
    }

    /// Project grid samples `f(jP/M)` onto `|k| ≤ N`.
    pub fn from_grid(vals: &[Complex64], n: usize, period: Period) -> Self {
        let m = vals.len();
        let mut buf = vals.to_vec();
        fft_forward(&mut buf);
        let mut s = Self::zeros(n, period);
        for k in -(n as i64)..=(n as i64) {
            if (2 * k.unsigned_abs() as usize) < m {
                *s.coeff_mut(k) = buf[k.rem_euclid(m as i64) as usize] / m as f64;
            }
        }
        s
    }

    /// Fraction of the grid energy outside `|k| ≤ N` (aliasing monitor).
    pub fn tail_energy(vals: &[Complex64], n: usize) -> f64 {
        let m = vals.len();
        let mut buf = vals.to_vec();
        fft_forward(&mut buf);
        let total: f64 = buf.iter().map(|c| c.norm_sqr()).sum();
        if total == 0.0 {
            return 0.0;
        }
        let kept: f64 = (0..m)
            .filter(|&i| {
                let k = if i <= m / 2 { i } else { m - i };
                k <= n
            })
            .map(|i| buf[i].norm_sqr())
            .sum();
        ((total - kept) / total).max(0.0)
    }

    pub fn period(&self) -> Period {
        self.period
    }

    pub fn trunc(&self) -> usize {
        (self.coeffs.len() - 1) / 2
    }

    pub fn coeffs(&self) -> &[Complex64] {
        &self.coeffs
    }

    pub fn coeff(&self, k: i64) -> Complex64 {
        let n = self.trunc() as i64;
        if k.abs() > n {
            Complex64::new(0.0, 0.0)
        } else {
            self.coeffs[(k + n) as usize]
        }
    }

    pub fn coeff_mut(&mut self, k: i64) -> &mut Complex64 {
        let n = self.trunc() as i64;
        assert!(k.abs() <= n, "index {k} outside truncation {n}");
        &mut self.coeffs[(k + n) as usize]
    }

    /// `(k, ĉ_k)` over the stored range.
    pub fn iter(&self) -> impl Iterator<Item = (i64, Complex64)> + '_ {
        let n = self.trunc() as i64;
        self.coeffs.iter().enumerate().map(move |(i, &c)| (i as i64 - n, c))
    }

    fn freq(&self) -> f64 {
        TAU / self.period.length()
    }

    pub fn eval(&self, x: f64) -> Complex64 {
        let w = self.freq() * x;
        self.iter().map(|(k, c)| c * Complex64::from_polar(1.0, w * k as f64)).sum()
    }

    /// Values on the grid `jP/m`.
    pub fn eval_grid(&self, m: usize) -> Vec<Complex64> {
        assert!(m > 2 * self.trunc(), "grid of {m} points aliases truncation {}", self.trunc());
        let mut buf = vec![Complex64::new(0.0, 0.0); m];
        for (k, c) in self.iter() {
            buf[k.rem_euclid(m as i64) as usize] += c;
        }
        fft_inverse(&mut buf);
        buf
    }

    /// Mean value `ĉ_0`.
    pub fn mean(&self) -> Complex64 {
        self.coeff(0)
    }

    pub fn resized(&self, n: usize) -> Self {
        let mut s = Self::zeros(n, self.period);
        for (k, c) in self.iter() {
            if k.unsigned_abs() as usize <= n {
                *s.coeff_mut(k) = c;
            }
        }
        s
    }

    pub fn map_coeffs(&self, mut f: impl FnMut(i64, Complex64) -> Complex64) -> Self {
        let coeffs = self.iter().map(|(k, c)| f(k, c)).collect();
        Self { coeffs, period: self.period }
    }

    pub fn scale(&self, s: Complex64) -> Self {
        self.map_coeffs(|_, c| c * s)
    }

    /// `x ↦ f(x + t)`.
    pub fn shift(&self, t: f64) -> Self {
        let w = self.freq() * t;
        self.map_coeffs(|k, c| c * Complex64::from_polar(1.0, w * k as f64))
    }

    /// The same function viewed on `R/2Z`: index `k` becomes `2k`.
    pub fn on_period_two(&self) -> Self {
        match self.period {
            Period::Two => self.clone(),
            Period::One => {
                let mut s = Self::zeros(2 * self.trunc(), Period::Two);
                for (k, c) in self.iter() {
                    *s.coeff_mut(2 * k) = c;
                }
                s
            }
        }
    }

    pub fn conj(&self) -> Self {
        let n = self.trunc() as i64;
        let coeffs = (-n..=n).map(|k| self.coeff(-k).conj()).collect();
        Self { coeffs, period: self.period }
    }

    /// `(f + conj f)/2`.
    pub fn real_part(&self) -> Self {
        self.add(&self.conj()).scale(Complex64::new(0.5, 0.0))
    }

    /// Largest violation of `ĉ_{−k} = conj(ĉ_k)`.
    pub fn reality_defect(&self) -> f64 {
        self.iter().map(|(k, c)| (c - self.coeff(-k).conj()).norm()).fold(0.0, f64::max)
    }

    fn aligned(&self, o: &Self) -> (Self, Self) {
        assert_eq!(self.period, o.period, "period mismatch");
        let n = self.trunc().max(o.trunc());
        (self.resized(n), o.resized(n))
    }

    pub fn add(&self, o: &Self) -> Self {
        let (a, b) = self.aligned(o);
        let coeffs = a.coeffs.iter().zip(&b.coeffs).map(|(x, y)| x + y).collect();
        Self { coeffs, period: a.period }
    }

    pub fn sub(&self, o: &Self) -> Self {
        self.add(&o.scale(Complex64::new(-1.0, 0.0)))
    }

    /// Product truncated to `n_out`, computed on an unaliased grid.
    pub fn mul(&self, o: &Self, n_out: usize) -> Self {
        assert_eq!(self.period, o.period, "period mismatch");
        let m = grid_size(self.trunc() + o.trunc());
        let (a, b) = (self.eval_grid(m), o.eval_grid(m));
        let prod: Vec<Complex64> = a.iter().zip(&b).map(|(x, y)| x * y).collect();
        Self::from_grid(&prod, n_out, self.period)
    }

    /// `Σ|ĉ_k|` (bound on the sup norm on the real axis).
    pub fn l1(&self) -> f64 {
        self.coeffs.iter().map(|c| c.norm()).sum()
    }

    /// `Σ|ĉ_k| e^{2π|k|h/P}`, the norm on the strip `|Im x| < h`.
    pub fn strip_norm(&self, h: f64) -> f64 {
        let w = self.freq() * h;
        self.iter().map(|(k, c)| c.norm() * (w * k.abs() as f64).exp()).sum()
    }

    /// Max of `|f|` on a grid of `m` points.
    pub fn sup_on_grid(&self, m: usize) -> f64 {
        self.eval_grid(m.max(2 * self.trunc() + 1)).iter().map(|c| c.norm()).fold(0.0, f64::max)
    }

    /// Least-squares slope `r` of `ln|ĉ_k| ≈ c − r|k|` over coefficients above
    /// `floor` relative to the largest one, using the envelope `max(|ĉ_k|, |ĉ_{−k}|)`.
    pub fn decay_rate(&self, floor: f64) -> Option<f64> {
        let top = self.coeffs.iter().map(|c| c.norm()).fold(0.0, f64::max);
        if top == 0.0 {
            return None;
        }
        let pts: Vec<(f64, f64)> = (1..=self.trunc() as i64)
            .map(|k| (k as f64, self.coeff(k).norm().max(self.coeff(-k).norm())))
            .filter(|&(_, v)| v > floor * top)
            .map(|(k, v)| (k, v.ln()))
            .collect();
        fit_slope(&pts).map(|s| -s)
    }

    pub fn to_json(&self) -> Value {
        Value::Array(
            self.iter()
                .filter(|(_, c)| c.norm() > 0.0)
                .map(|(k, c)| json!({"k": k, "re": c.re, "im": c.im}))
                .collect(),
        )
    }

    pub fn from_json(v: &Value, period: Period) -> Result<Self> {
        let arr = v.as_array().ok_or_else(|| GaplabError::invalid("series must be an array"))?;
        let mut pairs = Vec::with_capacity(arr.len());
        for e in arr {
            let k = e.get("k").and_then(Value::as_i64);
            let re = e.get("re").and_then(Value::as_f64);
            let im = e.get("im").and_then(Value::as_f64).or(Some(0.0));
            match (k, re, im) {
                (Some(k), Some(re), Some(im)) => pairs.push((k, Complex64::new(re, im))),
                _ => return Err(GaplabError::invalid(format!("bad coefficient {e}"))),
            }
        }
        Ok(Self::from_pairs(&pairs, period))
    }
}

/// Least-squares slope of `y` against `x`.
pub fn fit_slope(pts: &[(f64, f64)]) -> Option<f64> {
    if pts.len() < 2 {
        return None;
    }
    let n = pts.len() as f64;
    let mx = pts.iter().map(|p| p.0).sum::<f64>() / n;
    let my = pts.iter().map(|p| p.1).sum::<f64>() / n;
    let sxx: f64 = pts.iter().map(|p| (p.0 - mx).powi(2)).sum();
    let sxy: f64 = pts.iter().map(|p| (p.0 - mx) * (p.1 - my)).sum();
    (sxx > 0.0).then(|| sxy / sxx)
}

/// 2×2 matrix of trigonometric series, `entries[i][j]`.
#[derive(Clone, Debug, PartialEq)]
pub struct TrigMat {
    pub entries: [[TrigSeries; 2]; 2],
}

impl TrigMat {
    pub fn new(e11: TrigSeries, e12: TrigSeries, e21: TrigSeries, e22: TrigSeries) -> Self {
        let p = e11.period;
        assert!([&e12, &e21, &e22].iter().all(|s| s.period == p), "period mismatch");
        Self { entries: [[e11, e12], [e21, e22]] }
    }

    pub fn constant(m: &Mat2<f64>, period: Period) -> Self {
        let c = |v: f64| TrigSeries::constant(Complex64::new(v, 0.0), 0, period);
        Self::new(c(m.a), c(m.b), c(m.c), c(m.d))
    }

    pub fn identity(period: Period) -> Self {
        Self::constant(&Mat2::identity(), period)
    }

    /// Sample a matrix function and project onto `|k| ≤ n`.
    pub fn from_fn(f: impl Fn(f64) -> Mat2<Complex64>, n: usize, period: Period) -> Self {
        let m = grid_size(n);
        let vals: Vec<Mat2<Complex64>> = (0..m).map(|j| f(j as f64 * period.length() / m as f64)).collect();
        Self::from_grid(&vals, n, period)
    }

    pub fn from_fn_real(f: impl Fn(f64) -> Mat2<f64>, n: usize, period: Period) -> Self {
        Self::from_fn(|x| f(x).to_complex(), n, period)
    }

    pub fn from_grid(vals: &[Mat2<Complex64>], n: usize, period: Period) -> Self {
        let pick = |sel: fn(&Mat2<Complex64>) -> Complex64| -> TrigSeries {
            let v: Vec<Complex64> = vals.iter().map(sel).collect();
            TrigSeries::from_grid(&v, n, period)
        };
        Self::new(pick(|m| m.a), pick(|m| m.b), pick(|m| m.c), pick(|m| m.d))
    }

    pub fn period(&self) -> Period {
        self.entries[0][0].period
    }

    pub fn trunc(&self) -> usize {
        self.entries.iter().flatten().map(TrigSeries::trunc).max().unwrap_or(0)
    }

    pub fn eval(&self, x: f64) -> Mat2<Complex64> {
        let e = &self.entries;
        Mat2::new(e[0][0].eval(x), e[0][1].eval(x), e[1][0].eval(x), e[1][1].eval(x))
    }

    /// Real part of the value at `x`.
    pub fn eval_real(&self, x: f64) -> Mat2<f64> {
        let m = self.eval(x);
        Mat2::new(m.a.re, m.b.re, m.c.re, m.d.re)
    }

    pub fn eval_grid(&self, m: usize) -> Vec<Mat2<Complex64>> {
        let g: Vec<Vec<Complex64>> = self.entries.iter().flatten().map(|s| s.eval_grid(m)).collect();
        (0..m).map(|j| Mat2::new(g[0][j], g[1][j], g[2][j], g[3][j])).collect()
    }

    pub fn map(&self, f: impl Fn(&TrigSeries) -> TrigSeries) -> Self {
        let e = &self.entries;
        Self::new(f(&e[0][0]), f(&e[0][1]), f(&e[1][0]), f(&e[1][1]))
    }

    pub fn shift(&self, t: f64) -> Self {
        self.map(|s| s.shift(t))
    }

    pub fn on_period_two(&self) -> Self {
        self.map(TrigSeries::on_period_two)
    }

    pub fn add(&self, o: &Self) -> Self {
        let (a, b) = (&self.entries, &o.entries);
        Self::new(a[0][0].add(&b[0][0]), a[0][1].add(&b[0][1]), a[1][0].add(&b[1][0]), a[1][1].add(&b[1][1]))
    }

    pub fn sub(&self, o: &Self) -> Self {
        self.add(&o.scale(-1.0))
    }

    pub fn scale(&self, s: f64) -> Self {
        self.map(|e| e.scale(Complex64::new(s, 0.0)))
    }

    /// Adjugate (inverse for determinant one).
    pub fn adj(&self) -> Self {
        let e = &self.entries;
        let neg = Complex64::new(-1.0, 0.0);
        Self::new(e[1][1].clone(), e[0][1].scale(neg), e[1][0].scale(neg), e[0][0].clone())
    }

    /// Product truncated to `n_out`.
    pub fn mul(&self, o: &Self, n_out: usize) -> Self {
        let m = grid_size(self.trunc() + o.trunc());
        let (a, b) = (self.eval_grid(m), o.eval_grid(m));
        let prod: Vec<Mat2<Complex64>> = a.iter().zip(&b).map(|(x, y)| *x * *y).collect();
        Self::from_grid(&prod, n_out, self.period())
    }

    /// Mean matrix `[M]`.
    pub fn mean(&self) -> Mat2<Complex64> {
        let e = &self.entries;
        Mat2::new(e[0][0].mean(), e[0][1].mean(), e[1][0].mean(), e[1][1].mean())
    }

    pub fn real_part(&self) -> Self {
        self.map(TrigSeries::real_part)
    }

    /// Largest `|det − 1|` on a grid of `m` points.
    pub fn det_defect(&self, m: usize) -> f64 {
        self.eval_grid(m).iter().map(|v| (v.det() - 1.0).norm()).fold(0.0, f64::max)
    }

    /// Max entrywise modulus on a grid of `m` points.
    pub fn sup_on_grid(&self, m: usize) -> f64 {
        self.eval_grid(m).iter().map(|v| v.max_abs_diff(&Mat2::zero())).fold(0.0, f64::max)
    }

    pub fn strip_norm(&self, h: f64) -> f64 {
        self.entries.iter().flatten().map(|s| s.strip_norm(h)).fold(0.0, f64::max)
    }

    pub fn to_json(&self) -> Value {
        let p = match self.period() {
            Period::One => 1,
            Period::Two => 2,
        };
        let rows: Vec<Value> = self
            .entries
            .iter()
            .map(|row| Value::Array(row.iter().map(TrigSeries::to_json).collect()))
            .collect();
        json!({"period": p, "entries": rows})
    }

    pub fn from_json(v: &Value) -> Result<Self> {
        let period = Period::from_length(v.get("period").and_then(Value::as_u64).unwrap_or(1))?;
        let rows = v
            .get("entries")
            .and_then(Value::as_array)
            .filter(|r| r.len() == 2)
            .ok_or_else(|| GaplabError::invalid("entries must be a 2×2 array"))?;
        let mut out = Vec::with_capacity(4);
        for row in rows {
            let row = row.as_array().filter(|r| r.len() == 2).ok_or_else(|| GaplabError::invalid("row must have two series"))?;
            for s in row {
                out.push(TrigSeries::from_json(s, period)?);
            }
        }
        let mut it = out.into_iter();
        let mut next = || it.next().expect("four entries");
        Ok(Self::new(next(), next(), next(), next()))
    }
}

/// `e^{iπkx}`-style helper: `e^{iφ}`.
pub fn cis(phi: f64) -> Complex64 {
    Complex64::from_polar(1.0, phi)
}

/// `R_{kx/2}` on `R/2Z`, a degree-`k` rotation family.
pub fn rotation_family(k: i64) -> TrigMat {
    let half = Complex64::new(0.5, 0.0);
    let ihalf = Complex64::new(0.0, 0.5);
    // cos(πkx) = (e^{iπkx} + e^{−iπkx})/2, sin(πkx) = (e^{iπkx} − e^{−iπkx})/(2i).
    let cos = TrigSeries::from_pairs(&[(k, half), (-k, half)], Period::Two);
    let sin = TrigSeries::from_pairs(&[(k, -ihalf), (-k, ihalf)], Period::Two);
    let neg_sin = sin.scale(Complex64::new(-1.0, 0.0));
    TrigMat::new(cos.clone(), neg_sin, sin, cos)
}
