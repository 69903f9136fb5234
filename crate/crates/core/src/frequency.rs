//! Continued-fraction frequencies.
//!
//! A frequency is stored by its digits and exact convergents. Torus distances
//! `‖kα‖` are evaluated in integer arithmetic against a deep convergent, which
//! keeps them accurate for `|k|` far beyond what a bare `f64` can resolve.

use std::cmp::Ordering;
use std::fmt;

use num_bigint::{BigInt, BigUint, Sign};
use num_integer::Integer;
use num_traits::{One, ToPrimitive, Zero};
use rand::Rng;
use rand_chacha::rand_core::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use serde_json::{json, Value};

use crate::error::{GaplabError, Result};

pub const DEFAULT_GUARD_BITS: u32 = 64;
pub const DEFAULT_BETA_WINDOW: usize = 10;
pub const DEFAULT_MAX_DIGIT_BITS: u64 = 1 << 16;

/// Reduced fraction `p/q` with `q ≥ 1`.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct Rational {
    pub p: i64,
    pub q: i64,
}

impl Rational {
    pub fn new(p: i64, q: i64) -> Result<Self> {
        if q <= 0 {
            return Err(GaplabError::invalid(format!("denominator must be positive, got {q}")));
        }
        if p.gcd(&q) != 1 {
            return Err(GaplabError::invalid(format!("{p}/{q} is not in lowest terms")));
        }
        Ok(Self { p, q })
    }

    pub fn value(&self) -> f64 {
        self.p as f64 / self.q as f64
    }
}

impl fmt::Display for Rational {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}/{}", self.p, self.q)
    }
}

/// An irrational frequency known through finitely many continued-fraction digits.
#[derive(Clone, Debug, PartialEq)]
pub struct IrrationalFrequency {
    digits: Vec<BigUint>,
    p: Vec<BigUint>,
    q: Vec<BigUint>,
    beta_hat: f64,
    guard_bits: u32,
    value: f64,
    truncated: bool,
}

impl IrrationalFrequency {
    /// Digit list `a_1..a_N`.
    pub fn digits(&self) -> &[BigUint] {
        &self.digits
    }

    /// Number of digits `N`; convergents are indexed `0..=N`.
    pub fn len(&self) -> usize {
        self.digits.len()
    }

    pub fn is_empty(&self) -> bool {
        self.digits.is_empty()
    }

    pub fn convergent(&self, n: usize) -> (&BigUint, &BigUint) {
        (&self.p[n], &self.q[n])
    }

    /// `q_n` when it fits in a `u64`.
    pub fn q_u64(&self, n: usize) -> Option<u64> {
        self.q.get(n).and_then(|q| q.to_u64())
    }

    /// Indices `n` with `q_n ≤ bound`, as `(n, q_n)`.
    pub fn denominators_up_to(&self, bound: u64) -> Vec<(usize, u64)> {
        (0..self.q.len())
            .filter_map(|n| self.q_u64(n).filter(|&q| q <= bound).map(|q| (n, q)))
            .collect()
    }

    pub fn beta_hat(&self) -> f64 {
        self.beta_hat
    }

    pub fn guard_bits(&self) -> u32 {
        self.guard_bits
    }

    pub fn with_guard_bits(mut self, bits: u32) -> Self {
        self.guard_bits = bits;
        self
    }

    /// Double-precision value of α.
    pub fn value(&self) -> f64 {
        self.value
    }

    /// True when digit extraction from a real sample stopped early because the
    /// next digit could not be certified.
    pub fn truncated(&self) -> bool {
        self.truncated
    }

    pub fn to_json(&self) -> Value {
        let digits: Vec<Value> = self
            .digits
            .iter()
            .map(|d| match d.to_u64() {
                Some(v) => json!(v),
                None => json!(d.to_string()),
            })
            .collect();
        json!({ "digits": digits, "guard_bits": self.guard_bits })
    }

    pub fn from_json(v: &Value) -> Result<Self> {
        let arr = v
            .get("digits")
            .and_then(Value::as_array)
            .ok_or_else(|| GaplabError::invalid("frequency JSON needs a \"digits\" array"))?;
        let mut digits = Vec::with_capacity(arr.len());
        for d in arr {
            let parsed = match d {
                Value::Number(n) => n.as_u64().map(BigUint::from),
                Value::String(s) => s.parse::<BigUint>().ok(),
                _ => None,
            };
            digits.push(parsed.ok_or_else(|| GaplabError::invalid(format!("bad digit {d}")))?);
        }
        let guard = v.get("guard_bits").and_then(Value::as_u64).unwrap_or(DEFAULT_GUARD_BITS as u64);
        Ok(build_frequency_big(digits)?.with_guard_bits(guard as u32))
    }

    /// Exact `frac(kα)` approximated through the deepest convergent.
    pub fn frac_multiple(&self, k: i64) -> f64 {
        let n = self.len();
        let (p, q) = (BigInt::from(self.p[n].clone()), BigInt::from(self.q[n].clone()));
        let r = (BigInt::from(k) * p).mod_floor(&q);
        ratio_to_f64(&r.magnitude().clone(), q.magnitude())
    }

    /// Convergent index `n` such that `|α − p_n/q_n|·kmax < 2^{-guard_bits}`,
    /// certified through `|α − p_n/q_n| < 1/(q_n q_{n+1})`.
    fn precision_index(&self, kmax: u64) -> Result<usize> {
        let need = BigUint::from(kmax.max(1)) << self.guard_bits;
        for n in 0..self.len() {
            if &self.q[n] * &self.q[n + 1] > need {
                return Ok(n);
            }
        }
        let have = &self.q[self.len()] * &self.q[self.len()].clone();
        let deficit_bits = need.bits().saturating_sub(have.bits()) as f64;
        // Worst case growth is Fibonacci: the product gains log2(φ²) bits per digit.
        let extra = (deficit_bits / (2.0 * 0.694_241_913_63)).ceil() as usize + 1;
        Err(GaplabError::PrecisionExhausted {
            required_digits: self.len() + extra,
            available: self.len(),
        })
    }
}

/// A frequency handle used throughout the crate.
#[derive(Clone, Debug, PartialEq)]
pub enum Frequency {
    Rational(Rational),
    Irrational(IrrationalFrequency),
}

impl Frequency {
    pub fn value(&self) -> f64 {
        match self {
            Frequency::Rational(r) => r.value(),
            Frequency::Irrational(f) => f.value(),
        }
    }

    /// `x + kα` reduced to `[0, 1)`.
    ///
    /// Rational frequencies are reduced exactly; irrational ones use double
    /// precision for `|k| ≤ 10⁶` and exact convergent arithmetic beyond.
    pub fn phase(&self, x: f64, k: i64) -> f64 {
        let shift = match self {
            Frequency::Rational(r) => {
                (k as i128 * r.p as i128).rem_euclid(r.q as i128) as f64 / r.q as f64
            }
            Frequency::Irrational(f) => {
                if k.unsigned_abs() <= 1_000_000 {
                    (k as f64 * f.value()).rem_euclid(1.0)
                } else {
                    f.frac_multiple(k)
                }
            }
        };
        let y = (x + shift).rem_euclid(1.0);
        if y >= 1.0 {
            0.0
        } else {
            y
        }
    }

    pub fn as_rational(&self) -> Option<Rational> {
        match self {
            Frequency::Rational(r) => Some(*r),
            Frequency::Irrational(_) => None,
        }
    }

    pub fn as_irrational(&self) -> Option<&IrrationalFrequency> {
        match self {
            Frequency::Irrational(f) => Some(f),
            Frequency::Rational(_) => None,
        }
    }

    /// Parse `p/q`, `golden:N`, `silver:N`, `synth:BETA:N[:SEED]`, a digit list
    /// such as `1,1,2` or `1x30`, or a decimal sample in `(0, 1)`.
    pub fn parse(spec: &str) -> Result<Self> {
        let s = spec.trim();
        if let Some((p, q)) = s.split_once('/') {
            let p = p.trim().parse::<i64>().map_err(|_| GaplabError::invalid(format!("bad numerator in {s}")))?;
            let q = q.trim().parse::<i64>().map_err(|_| GaplabError::invalid(format!("bad denominator in {s}")))?;
            return Ok(Frequency::Rational(Rational::new(p, q)?));
        }
        if let Some(rest) = s.strip_prefix("golden:") {
            let n = parse_count(rest)?;
            return Ok(Frequency::Irrational(build_frequency(&vec![1; n])?));
        }
        if let Some(rest) = s.strip_prefix("silver:") {
            let n = parse_count(rest)?;
            return Ok(Frequency::Irrational(build_frequency(&vec![2; n])?));
        }
        if let Some(rest) = s.strip_prefix("synth:") {
            let parts: Vec<&str> = rest.split(':').collect();
            if parts.len() < 2 || parts.len() > 3 {
                return Err(GaplabError::invalid("expected synth:BETA:N[:SEED]"));
            }
            let beta = parts[0].parse::<f64>().map_err(|_| GaplabError::invalid("bad beta"))?;
            let n = parse_count(parts[1])?;
            let seed = match parts.get(2) {
                Some(t) => t.parse::<u64>().map_err(|_| GaplabError::invalid("bad seed"))?,
                None => 0,
            };
            return Ok(Frequency::Irrational(synth_beta_frequency(beta, n, seed, &SynthOptions::default())?));
        }
        if s.contains('.') && !s.contains(',') {
            let x = s.parse::<f64>().map_err(|_| GaplabError::invalid(format!("bad sample {s}")))?;
            return match build_frequency_from_sample(x, 64)? {
                SampleFrequency::Irrational(f) => Ok(Frequency::Irrational(f)),
                SampleFrequency::Rational { p, q, .. } => {
                    Ok(Frequency::Rational(Rational::new(p as i64, q as i64)?))
                }
            };
        }
        Ok(Frequency::Irrational(build_frequency(&parse_digit_list(s)?)?))
    }
}

fn parse_count(s: &str) -> Result<usize> {
    s.trim().parse::<usize>().map_err(|_| GaplabError::invalid(format!("bad count {s}")))
}

/// Parse `1,1,2` or run-length items like `1x30` (mixable: `2x3,1x10`).
pub fn parse_digit_list(s: &str) -> Result<Vec<u64>> {
    let mut out = Vec::new();
    for item in s.split(',').map(str::trim).filter(|t| !t.is_empty()) {
        let (d, n) = match item.split_once('x') {
            Some((d, n)) => (d, parse_count(n)?),
            None => (item, 1),
        };
        let d = d.trim().parse::<u64>().map_err(|_| GaplabError::invalid(format!("bad digit {item}")))?;
        out.extend(std::iter::repeat_n(d, n));
    }
    if out.is_empty() {
        return Err(GaplabError::invalid("empty digit list"));
    }
    Ok(out)
}

/// Build a frequency from digits `a_1..a_N`.
pub fn build_frequency(digits: &[u64]) -> Result<IrrationalFrequency> {
    build_frequency_big(digits.iter().map(|&d| BigUint::from(d)).collect())
}

pub fn build_frequency_big(digits: Vec<BigUint>) -> Result<IrrationalFrequency> {
    if digits.is_empty() {
        return Err(GaplabError::invalid("at least one digit is required"));
    }
    if digits.iter().any(Zero::is_zero) {
        return Err(GaplabError::invalid("continued-fraction digits must be ≥ 1"));
    }
    let n = digits.len();
    let mut p = Vec::with_capacity(n + 1);
    let mut q = Vec::with_capacity(n + 1);
    p.push(BigUint::zero());
    q.push(BigUint::one());
    p.push(BigUint::one());
    q.push(digits[0].clone());
    for k in 2..=n {
        let a = &digits[k - 1];
        p.push(a * &p[k - 1] + &p[k - 2]);
        q.push(a * &q[k - 1] + &q[k - 2]);
    }
    let mut value = 0.0;
    for a in digits.iter().rev() {
        value = 1.0 / (big_to_f64(a) + value);
    }
    let mut f = IrrationalFrequency {
        digits,
        p,
        q,
        beta_hat: 0.0,
        guard_bits: DEFAULT_GUARD_BITS,
        value,
        truncated: false,
    };
    f.beta_hat = beta_estimate(&f, DEFAULT_BETA_WINDOW);
    Ok(f)
}

/// Outcome of digit extraction from a real sample.
#[derive(Clone, Debug)]
pub enum SampleFrequency {
    Irrational(IrrationalFrequency),
    /// The expansion terminated: `[0; digits] = p/q`.
    Rational { p: u64, q: u64, digits: Vec<u64> },
}

/// Gauss-map digit extraction with interval certification.
///
/// The sample carries one ulp of uncertainty. A digit is emitted only if the
/// whole interval for `1/α_{k-1}` has the same integer part. When the interval
/// collapses onto an integer the expansion is declared terminated.
pub fn build_frequency_from_sample(x: f64, digit_budget: usize) -> Result<SampleFrequency> {
    if !(x > 0.0 && x < 1.0) {
        return Err(GaplabError::invalid(format!("sample must lie in (0,1), got {x}")));
    }
    let ulp = f64::EPSILON * x;
    let (mut lo, mut hi) = (x - ulp, x + ulp);
    let mut digits: Vec<u64> = Vec::new();
    let mut truncated = false;
    let pad = 1.0 + 4.0 * f64::EPSILON;
    while digits.len() < digit_budget {
        let (rlo, rhi) = (1.0 / hi / pad, 1.0 / lo * pad);
        let (flo, fhi) = (rlo.floor(), rhi.floor());
        if flo == fhi {
            digits.push(flo as u64);
            lo = (rlo - flo).max(0.0);
            hi = rhi - flo;
            if lo <= 0.0 {
                truncated = true;
                break;
            }
            continue;
        }
        // The interval straddles the integer `fhi`.
        if fhi - flo == 1.0 && rhi - rlo < 1e-6 * rhi.max(1.0) {
            let mut all = digits.clone();
            all.push(fhi as u64);
            let f = build_frequency(&all)?;
            let (p, q) = f.convergent(f.len());
            if let (Some(p), Some(q)) = (p.to_u64(), q.to_u64()) {
                return Ok(SampleFrequency::Rational { p, q, digits: all });
            }
        }
        truncated = true;
        break;
    }
    if digits.is_empty() {
        return Err(GaplabError::invalid("no digit could be certified"));
    }
    let mut f = build_frequency(&digits)?;
    f.truncated = truncated;
    Ok(SampleFrequency::Irrational(f))
}

/// Exact nonnegative rational `num/den`.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct ExactDist {
    pub num: BigUint,
    pub den: BigUint,
}

impl ExactDist {
    pub fn to_f64(&self) -> f64 {
        ratio_to_f64(&self.num, &self.den)
    }
}

impl PartialOrd for ExactDist {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

impl Ord for ExactDist {
    fn cmp(&self, other: &Self) -> Ordering {
        if self.den == other.den {
            self.num.cmp(&other.num)
        } else {
            (&self.num * &other.den).cmp(&(&other.num * &self.den))
        }
    }
}

/// Evaluator of `‖s − kα‖` against a fixed convergent.
struct ShiftedDistance {
    p: BigInt,
    den: BigInt,
    scale: BigInt,
    base: BigInt,
}

impl ShiftedDistance {
    fn new(shift: f64, p: &BigUint, q: &BigUint) -> Self {
        let (m, e) = dyadic(shift.rem_euclid(1.0));
        let scale = BigInt::one() << (-e).max(0) as usize;
        let q = BigInt::from(q.clone());
        let base = if e >= 0 { BigInt::zero() } else { m * &q };
        Self { p: BigInt::from(p.clone()), den: q * &scale, scale, base }
    }

    fn dist(&self, k: i64) -> ExactDist {
        let num = &self.base - BigInt::from(k) * &self.p * &self.scale;
        let r = num.mod_floor(&self.den);
        let other = &self.den - &r;
        let near = if r < other { r } else { other };
        ExactDist { num: near.magnitude().clone(), den: self.den.magnitude().clone() }
    }
}

/// `‖kα‖_{R/Z}` with certified absolute error below `2^{-guard_bits}`.
pub fn torus_distance(k: i64, alpha: &IrrationalFrequency) -> Result<f64> {
    Ok(torus_distance_exact(k, alpha)?.to_f64())
}

pub fn torus_distance_exact(k: i64, alpha: &IrrationalFrequency) -> Result<ExactDist> {
    if k == 0 {
        return Err(GaplabError::invalid("torus_distance needs k ≠ 0"));
    }
    let n = alpha.precision_index(k.unsigned_abs())?;
    let (p, q) = alpha.convergent(n);
    Ok(ShiftedDistance::new(0.0, p, q).dist(k))
}

/// `‖s − kα‖_{R/Z}` for a double-precision shift `s`, taken as exact.
pub fn shifted_torus_distance(shift: f64, k: i64, alpha: &IrrationalFrequency) -> Result<f64> {
    let n = alpha.precision_index(k.unsigned_abs())?;
    let (p, q) = alpha.convergent(n);
    Ok(ShiftedDistance::new(shift, p, q).dist(k).to_f64())
}

/// Finite-window limsup estimate of `β = limsup ln q_{n+1}/q_n`.
///
/// Returns the maximum of `ln q_{n+1}/q_n` over the last `tail_window` indices
/// (clamped to the available ones). Growing the window can only raise or keep
/// the value, but the estimate is not monotone in the number of digits.
pub fn beta_estimate(alpha: &IrrationalFrequency, tail_window: usize) -> f64 {
    let n = alpha.len();
    let start = n.saturating_sub(tail_window.max(1));
    (start..n)
        .map(|i| {
            let qi = big_to_f64(&alpha.q[i]);
            if qi.is_finite() {
                big_ln(&alpha.q[i + 1]) / qi
            } else {
                0.0
            }
        })
        .fold(0.0, f64::max)
}

/// Options for [`synth_beta_frequency`].
#[derive(Clone, Debug)]
pub struct SynthOptions {
    /// Place large digits only at indices divisible by this stride; the rest
    /// are `1 + jitter` with jitter drawn from `{0, 1, 2}`.
    pub sparse_stride: Option<usize>,
    pub max_digit_bits: u64,
}

impl Default for SynthOptions {
    fn default() -> Self {
        Self { sparse_stride: None, max_digit_bits: DEFAULT_MAX_DIGIT_BITS }
    }
}

/// A frequency with `ln q_{n+1}/q_n ≈ β` along the large-digit indices.
///
/// Large digits are `a_{n+1} = max(1, ⌈(e^{βq_n} − q_{n-1})/q_n⌉)`, which makes
/// `q_{n+1}` the first denominator at or above `e^{βq_n}`.
pub fn synth_beta_frequency(
    beta_target: f64,
    n_digits: usize,
    seed: u64,
    opts: &SynthOptions,
) -> Result<IrrationalFrequency> {
    if !(beta_target > 0.0) || !beta_target.is_finite() {
        return Err(GaplabError::invalid("beta_target must be positive"));
    }
    if n_digits == 0 {
        return Err(GaplabError::invalid("n_digits must be ≥ 1"));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut digits = Vec::with_capacity(n_digits);
    let (mut q_prev, mut q) = (BigUint::zero(), BigUint::one());
    for i in 1..=n_digits {
        let big = match opts.sparse_stride {
            None => true,
            Some(s) => i % s.max(1) == 0,
        };
        let a = if big {
            let qf = big_to_f64(&q);
            let bits = beta_target * qf / std::f64::consts::LN_2;
            if !bits.is_finite() || bits > opts.max_digit_bits as f64 {
                return Err(GaplabError::DigitOverflow {
                    max_feasible: i - 1,
                    max_bits: opts.max_digit_bits,
                });
            }
            let target = exp_ceil(beta_target * qf);
            if target <= q_prev {
                BigUint::one()
            } else {
                let (d, r) = (&target - &q_prev).div_rem(&q);
                let d = if r.is_zero() { d } else { d + 1u32 };
                d.max(BigUint::one())
            }
        } else {
            BigUint::from(1u32 + rng.gen_range(0..3u32))
        };
        let next = &a * &q + &q_prev;
        q_prev = std::mem::replace(&mut q, next);
        digits.push(a);
    }
    build_frequency_big(digits)
}

/// `inf_{0<|j|≤k_max} ‖jα‖`.
pub fn smallest_divisor(k_max: u64, alpha: &IrrationalFrequency) -> Result<f64> {
    if k_max == 0 {
        return Err(GaplabError::invalid("k_max must be ≥ 1"));
    }
    let n = alpha.precision_index(k_max)?;
    let (p, q) = alpha.convergent(n);
    let eval = ShiftedDistance::new(0.0, p, q);
    let best = (1..=k_max as i64).map(|j| eval.dist(j)).min().expect("nonempty range");
    Ok(best.to_f64())
}

/// One resonance `n_j` with `dist = ‖2θ − n_jα‖`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Resonance {
    pub n: i64,
    pub dist: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ResonanceReport {
    pub theta: f64,
    pub epsilon0: f64,
    pub scan_bound: u64,
    pub entries: Vec<Resonance>,
    /// True when resonances beyond the scan bound would still be resolvable at
    /// the frequency's guard precision, so the bound rather than exhaustion
    /// ended the list.
    pub truncated: bool,
}

impl ResonanceReport {
    pub fn sites(&self) -> Vec<i64> {
        self.entries.iter().map(|r| r.n).collect()
    }
}

/// All `ε₀`-resonances of `θ` with `|k| ≤ K`.
///
/// `k` qualifies when `‖2θ − kα‖ ≤ e^{-ε₀|k|}` and the distance is the minimum
/// over `|j| ≤ |k|`. Exact ties go to the smaller `|j|`, then to positive `j`.
pub fn resonances(theta: f64, epsilon0: f64, k_bound: u64, alpha: &IrrationalFrequency) -> Result<ResonanceReport> {
    if !(epsilon0 > 0.0) {
        return Err(GaplabError::invalid("epsilon0 must be positive"));
    }
    if k_bound == 0 {
        return Err(GaplabError::invalid("scan bound must be ≥ 1"));
    }
    let n = alpha.precision_index(k_bound)?;
    let (p, q) = alpha.convergent(n);
    let eval = ShiftedDistance::new(2.0 * theta, p, q);
    let d0 = eval.dist(0);
    let mut entries = vec![Resonance { n: 0, dist: d0.to_f64() }];
    let mut best = d0;
    for m in 1..=k_bound as i64 {
        let (dp, dm) = (eval.dist(m), eval.dist(-m));
        let (k, d) = if dm < dp { (-m, dm) } else { (m, dp) };
        if d < best {
            let df = d.to_f64();
            if df <= (-epsilon0 * m as f64).exp() {
                entries.push(Resonance { n: k, dist: df });
            }
            best = d;
        }
    }
    let truncated = (-epsilon0 * (k_bound + 1) as f64).exp() >= (-(alpha.guard_bits() as f64)).exp2();
    Ok(ResonanceReport { theta, epsilon0, scan_bound: k_bound, entries, truncated })
}

fn dyadic(x: f64) -> (BigInt, i64) {
    if x == 0.0 {
        return (BigInt::zero(), 0);
    }
    let bits = x.to_bits();
    let exp = ((bits >> 52) & 0x7ff) as i64;
    let frac = bits & ((1u64 << 52) - 1);
    let (mant, e) = if exp == 0 { (frac, -1074) } else { (frac | (1u64 << 52), exp - 1075) };
    let sign = if x < 0.0 { Sign::Minus } else { Sign::Plus };
    (BigInt::from_biguint(sign, BigUint::from(mant)), e)
}

fn ldexp(mut v: f64, mut e: i64) -> f64 {
    while e < -1000 {
        v *= 2f64.powi(-1000);
        e += 1000;
    }
    while e > 1000 {
        v *= 2f64.powi(1000);
        e -= 1000;
    }
    v * 2f64.powi(e as i32)
}

pub(crate) fn ratio_to_f64(num: &BigUint, den: &BigUint) -> f64 {
    if num.is_zero() {
        return 0.0;
    }
    let shift = (den.bits() as i64 - num.bits() as i64 + 64).max(0);
    let quot = (num << shift as usize) / den;
    ldexp(big_to_f64(&quot), -shift)
}

pub(crate) fn big_to_f64(x: &BigUint) -> f64 {
    x.to_f64().unwrap_or(f64::INFINITY)
}

pub(crate) fn big_ln(x: &BigUint) -> f64 {
    let bits = x.bits();
    if bits <= 1000 {
        return big_to_f64(x).ln();
    }
    let shift = bits - 64;
    big_to_f64(&(x >> shift as usize)).ln() + shift as f64 * std::f64::consts::LN_2
}

/// `⌈e^x⌉` as a big integer (52 significant bits, rounded up).
fn exp_ceil(x: f64) -> BigUint {
    if x < 40.0 {
        return BigUint::from(x.exp().ceil() as u64);
    }
    let l = x / std::f64::consts::LN_2;
    let int = l.floor();
    let mant = (2f64.powf(l - int) * 2f64.powi(52)).ceil() as u64;
    let int = int as i64;
    if int >= 52 {
        BigUint::from(mant) << (int - 52) as usize
    } else {
        BigUint::from(mant) >> (52 - int) as usize
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn golden_denominators_are_fibonacci() {
        let f = build_frequency(&[1; 20]).unwrap();
        let mut fib = vec![1u64, 1];
        while fib.len() < 21 {
            let n = fib.len();
            fib.push(fib[n - 1] + fib[n - 2]);
        }
        for n in 0..=20 {
            assert_eq!(f.q_u64(n), Some(fib[n]));
        }
    }

    #[test]
    fn sqrt2_minus_one_digits_are_twos() {
        match build_frequency_from_sample(2f64.sqrt() - 1.0, 15).unwrap() {
            SampleFrequency::Irrational(f) => {
                assert_eq!(f.len(), 15);
                assert!(f.digits().iter().all(|d| *d == BigUint::from(2u32)));
            }
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn one_third_is_rational() {
        match build_frequency_from_sample(1.0 / 3.0, 20).unwrap() {
            SampleFrequency::Rational { p, q, digits } => {
                assert_eq!((p, q), (1, 3));
                assert_eq!(digits, vec![3]);
            }
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn sample_budget_stops_extraction() {
        match build_frequency_from_sample(2f64.sqrt() - 1.0, 40).unwrap() {
            SampleFrequency::Irrational(f) => {
                assert!(f.truncated());
                assert!(f.len() < 40);
            }
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn rejects_zero_digit() {
        assert!(build_frequency(&[1, 0, 2]).is_err());
    }

    #[test]
    fn precision_error_names_digit_count() {
        let f = build_frequency(&[1; 10]).unwrap();
        match torus_distance(1000, &f) {
            Err(GaplabError::PrecisionExhausted { required_digits, available }) => {
                assert_eq!(available, 10);
                assert!(required_digits > 10);
            }
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn smallest_divisor_at_one_is_norm_alpha() {
        let f = build_frequency(&[1; 80]).unwrap();
        let d = smallest_divisor(1, &f).unwrap();
        assert_eq!(d, torus_distance(1, &f).unwrap());
    }

    #[test]
    fn parse_forms() {
        assert_eq!(Frequency::parse("3/5").unwrap().as_rational(), Some(Rational { p: 3, q: 5 }));
        let g = Frequency::parse("golden:30").unwrap();
        assert_eq!(g.as_irrational().unwrap().len(), 30);
        assert_eq!(parse_digit_list("2x2,1x3").unwrap(), vec![2, 2, 1, 1, 1]);
        assert!(Frequency::parse("4/6").is_err());
    }

    #[test]
    fn json_round_trip() {
        let f = synth_beta_frequency(1.0, 3, 0, &SynthOptions::default()).unwrap();
        let back = IrrationalFrequency::from_json(&f.to_json()).unwrap();
        assert_eq!(back.digits(), f.digits());
    }
}
