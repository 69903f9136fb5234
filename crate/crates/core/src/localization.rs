//! Dual-model eigenproblem and the localization toolkit: `P_k` determinants,
//! Green functions by Cramer quotients, `(m,k)`-regularity, γ-uniformity of
//! phase sets, and decay verification of dual eigenvectors.
//!
//! Conventions: `Ĥ_{λ,α,θ}` has diagonal `2cos2π(θ+kα)` and off-diagonal `λ`;
//! `Ȟ = H_{1/λ}` has diagonal `(2/λ)cos2π(θ+kα)` and off-diagonal 1, so
//! `Ĥ = λȞ`. Functions taking a `coupling` act on `H_coupling` directly.

use std::f64::consts::{PI, TAU};

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::cocycle::{transfer_product, CocycleSpec};
use crate::error::{GaplabError, Result};
use crate::frequency::{resonances, Frequency, IrrationalFrequency, ResonanceReport};
use crate::linalg::Tridiag;
use crate::reducibility::trig::{fit_slope, TrigSeries};

/// Unpinned constants of the localization argument.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Constants {
    /// Window factor: bounds are checked on `C0|n_j| < |k| < |n_{j+1}|/C0`.
    pub c0: f64,
    /// `ε₀ = C1·β̂`.
    pub c1: f64,
    /// Regime `|λ| < e^{−C2·β̂}`.
    pub c2: f64,
    /// `ε₁ = L/eps1_divisor`.
    pub eps1_divisor: f64,
    /// Multiplier `s` of `q_n` in the `I₁ ∪ I₂` construction; `None` takes the
    /// largest `s` with `s·q_n ≤ y/8`.
    pub s: Option<i64>,
}

impl Default for Constants {
    fn default() -> Self {
        Self { c0: 3.0, c1: 40.0, c2: 400.0, eps1_divisor: 64.0, s: None }
    }
}

/// Eigenfunctions with more than this mass within `M/10` of the boundary are
/// flagged.
pub const BOUNDARY_MASS_TOL: f64 = 1e-8;

/// `(2M+1)`-site truncation of `Ĥ_{λ,α,θ}` on `[−M, M]`.
pub fn dual_matrix(lambda: f64, alpha: &Frequency, theta: f64, m: usize) -> Tridiag {
    let d = (-(m as i64)..=m as i64).map(|k| 2.0 * (TAU * alpha.phase(theta, k)).cos()).collect();
    Tridiag::new(d, vec![lambda; 2 * m])
}

/// `(2M+1)`-site truncation of `H_{coupling,α,θ}` on `[−M, M]`.
pub fn direct_matrix(coupling: f64, alpha: &Frequency, theta: f64, m: usize) -> Tridiag {
    let d = (-(m as i64)..=m as i64).map(|k| 2.0 * coupling * (TAU * alpha.phase(theta, k)).cos()).collect();
    Tridiag::new(d, vec![1.0; 2 * m])
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct DualEigenpair {
    pub energy: f64,
    /// Phase of the truncated operator the pair was computed for.
    pub theta: f64,
    /// Truncation half-width: sites `−M..=M`.
    pub m: usize,
    /// Site of `max|û_k|`.
    pub center: i64,
    /// `û_k` for `k = −M..=M`, scaled so `û_center = 1`.
    pub coeffs: Vec<f64>,
    /// `ln|û_k|`, finite far below the double-precision range.
    pub log_abs: Vec<f64>,
    /// `‖Ĥû − Eû‖/‖û‖`.
    pub residual: f64,
    /// Mass (squared, relative) within `M/10` of either end.
    pub boundary_mass: f64,
    pub boundary_contaminated: bool,
    /// Least-squares decay rate of `ln|û|` away from the center.
    pub decay_rate: Option<f64>,
    /// Resonances of the centered phase, when computed.
    pub resonance_ctx: Option<ResonanceReport>,
}

impl DualEigenpair {
    /// Phase for which the translated eigenfunction peaks at site 0.
    pub fn centered_theta(&self, alpha: &Frequency) -> f64 {
        alpha.phase(self.theta, self.center)
    }

    fn index(&self, k: i64) -> Option<usize> {
        let i = k + self.m as i64;
        (0..self.coeffs.len() as i64).contains(&i).then_some(i as usize)
    }

    /// `ln|û_{center+k}|`, the centered profile with `û_0 = 1`.
    pub fn centered_log_abs(&self, k: i64) -> Option<f64> {
        self.index(self.center + k).map(|i| self.log_abs[i])
    }

    /// Range of centered offsets inside the truncation.
    pub fn centered_range(&self) -> (i64, i64) {
        (-(self.m as i64) - self.center, self.m as i64 - self.center)
    }
}

/// Least-squares rate of `ln|û|` against distance from the center, skipping
/// the nearest 10% of the available range on each side.
fn decay_fit(log_abs: &[f64], center: usize) -> Option<f64> {
    let n = log_abs.len();
    let mut rates = Vec::new();
    for (len, step) in [(n - 1 - center, 1i64), (center, -1)] {
        if len < 4 {
            continue;
        }
        let skip = (len / 10).max(1);
        let pts: Vec<(f64, f64)> = (skip..=len)
            .map(|d| (d as f64, log_abs[(center as i64 + step * d as i64) as usize]))
            .filter(|(_, y)| y.is_finite())
            .collect();
        if let Some(s) = fit_slope(&pts) {
            rates.push(-s);
        }
    }
    rates.into_iter().reduce(f64::min)
}

/// Eigenpairs of the truncated dual operator with energies in `window`.
pub fn dual_eigenpairs(
    lambda: f64,
    alpha: &Frequency,
    theta: f64,
    m: usize,
    window: (f64, f64),
) -> Result<Vec<DualEigenpair>> {
    if lambda == 0.0 {
        return Err(GaplabError::invalid("dual coupling must be nonzero"));
    }
    if m < 1 {
        return Err(GaplabError::invalid("truncation half-width must be ≥ 1"));
    }
    let t = dual_matrix(lambda, alpha, theta, m);
    let (lo, hi) = window;
    let first = t.count_below(lo);
    let last = t.count_below(hi);
    let edge = (m / 10).max(1);
    let pairs = (first..last)
        .into_par_iter()
        .map(|idx| {
            let energy = t.eigenvalue(idx);
            let tv = t.twisted_eigenvector(energy);
            let peak = (0..tv.log_abs.len()).max_by(|&a, &b| tv.log_abs[a].total_cmp(&tv.log_abs[b])).unwrap_or(0);
            let shift = tv.log_abs[peak];
            let sign = tv.sign[peak];
            let log_abs: Vec<f64> = tv.log_abs.iter().map(|l| l - shift).collect();
            let coeffs: Vec<f64> = log_abs.iter().zip(&tv.sign).map(|(l, s)| s * sign * l.exp()).collect();
            let hu = t.apply(&coeffs);
            let norm2: f64 = coeffs.iter().map(|u| u * u).sum();
            let res2: f64 = hu.iter().zip(&coeffs).map(|(a, u)| (a - energy * u).powi(2)).sum();
            let n = coeffs.len();
            let outer: f64 = coeffs[..edge].iter().chain(&coeffs[n - edge..]).map(|u| u * u).sum();
            let boundary_mass = outer / norm2;
            DualEigenpair {
                energy,
                theta,
                m,
                center: peak as i64 - m as i64,
                decay_rate: decay_fit(&log_abs, peak),
                coeffs,
                log_abs,
                residual: (res2 / norm2).sqrt(),
                boundary_mass,
                boundary_contaminated: boundary_mass > BOUNDARY_MASS_TOL,
                resonance_ctx: None,
            }
        })
        .collect();
    Ok(pairs)
}

/// Lyapunov exponent `L = ln(1/|λ|)` governing dual decay for `0 < |λ| < 1`.
pub fn dual_lyapunov(lambda: f64) -> f64 {
    (-lambda.abs().ln()).max(0.0)
}

/// Resonance scale `ε₀ = max(C1·β̂, L/eps1_divisor)`.
///
/// For `β̂ → 0` the bare `C1·β̂` makes every running minimum of `‖2θ − kα‖`
/// a resonance out to the scan bound and leaves no window to check. Raising
/// `ε₀` only removes resonances, so the windows grow and the check is stricter.
pub fn resonance_epsilon(lambda: f64, alpha: &IrrationalFrequency, c: &Constants) -> f64 {
    (c.c1 * alpha.beta_hat()).max(dual_lyapunov(lambda) / c.eps1_divisor)
}

/// Attach the resonance report of the centered phase, scanning `|k| ≤ 2M`.
pub fn attach_resonances(pair: &mut DualEigenpair, alpha: &IrrationalFrequency, eps0: f64) -> Result<()> {
    let theta = Frequency::Irrational(alpha.clone()).phase(pair.theta, pair.center);
    let bound = (2 * pair.m) as u64;
    pair.resonance_ctx = Some(resonances(theta, eps0, bound, alpha)?);
    Ok(())
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct WindowReport {
    /// Open window `lo < |k| < hi` in the centered frame.
    pub lo: f64,
    pub hi: f64,
    /// Smallest `C` with `|û_k| ≤ C e^{−ε₁|k|}` on the window.
    pub c_min: Option<f64>,
    /// `ln C`, which stays finite where `c_min` underflows.
    pub log_c_min: Option<f64>,
    pub fitted_rate: Option<f64>,
    pub note: Option<String>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct LocalizationReport {
    pub eps1: f64,
    pub c0: f64,
    pub windows: Vec<WindowReport>,
    /// Largest `c_min` over checked windows.
    pub c_u: f64,
    /// `ln c_u`; `−∞` when no window was checked.
    pub log_c_u: f64,
    /// Rate fitted over all checked windows together.
    pub fitted_rate: Option<f64>,
}

/// Check `|û_k| ≤ C(û)e^{−ε₁|k|}` on every window `C0|n_j| < |k| < |n_{j+1}|/C0`
/// of the pair's resonance sequence, in the frame centered at the peak.
pub fn verify_strong_localization(pair: &DualEigenpair, c0: f64, eps1: f64) -> Result<LocalizationReport> {
    let ctx = pair
        .resonance_ctx
        .as_ref()
        .ok_or_else(|| GaplabError::invalid("resonance context missing; call attach_resonances first"))?;
    let (kmin, kmax) = pair.centered_range();
    let reach = kmin.unsigned_abs().max(kmax.unsigned_abs()) as f64;
    let mut sites: Vec<f64> = ctx.entries.iter().map(|r| r.n.unsigned_abs() as f64).collect();
    sites.sort_by(f64::total_cmp);
    sites.dedup();
    let mut bounds: Vec<(f64, f64)> = sites.windows(2).map(|w| (c0 * w[0], w[1] / c0)).collect();
    bounds.push((c0 * sites.last().copied().unwrap_or(0.0), f64::INFINITY));
    let mut windows = Vec::new();
    let mut all = Vec::new();
    for (lo, hi) in bounds {
        if lo >= reach {
            break;
        }
        if hi <= lo + 1.0 {
            windows.push(WindowReport { lo, hi, c_min: None, log_c_min: None, fitted_rate: None, note: Some("empty window".into()) });
            continue;
        }
        let pts: Vec<(f64, f64)> = (kmin..=kmax)
            .filter(|k| {
                let a = k.unsigned_abs() as f64;
                a > lo && a < hi
            })
            .filter_map(|k| pair.centered_log_abs(k).map(|l| (k.unsigned_abs() as f64, l)))
            .filter(|(_, l)| l.is_finite())
            .collect();
        if pts.is_empty() {
            windows.push(WindowReport { lo, hi, c_min: None, log_c_min: None, fitted_rate: None, note: Some("no sites inside truncation".into()) });
            continue;
        }
        let log_c = pts.iter().map(|(a, l)| l + eps1 * a).fold(f64::NEG_INFINITY, f64::max);
        let fitted_rate = fit_slope(&pts).map(|s| -s);
        all.extend(pts);
        windows.push(WindowReport { lo, hi, c_min: Some(log_c.exp()), log_c_min: Some(log_c), fitted_rate, note: None });
    }
    let log_c_u = windows.iter().filter_map(|w| w.log_c_min).fold(f64::NEG_INFINITY, f64::max);
    Ok(LocalizationReport { eps1, c0, windows, c_u: log_c_u.exp(), log_c_u, fitted_rate: fit_slope(&all).map(|s| -s) })
}

/// `m·e^{log_scale}` with `|m|` kept near one.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct ScaledValue {
    pub mantissa: f64,
    pub log_scale: f64,
}

impl ScaledValue {
    pub fn ln_abs(&self) -> f64 {
        self.mantissa.abs().ln() + self.log_scale
    }

    /// The value itself; over- or underflows outside the double range.
    pub fn value(&self) -> f64 {
        self.mantissa * self.log_scale.exp()
    }
}

/// `P_j(θ)` for `j = 0..=k`, `P_j = det(E − H_{[0,j−1]})` for `H = H_coupling`,
/// by `P_j = (E − v(θ+(j−1)α))P_{j−1} − P_{j−2}` with joint rescaling.
pub fn pk_sequence(k: usize, theta: f64, energy: f64, coupling: f64, alpha: &Frequency) -> Vec<ScaledValue> {
    let mut out = Vec::with_capacity(k + 1);
    let (mut prev, mut cur) = (0.0, 1.0);
    let mut log_scale = 0.0;
    out.push(ScaledValue { mantissa: 1.0, log_scale: 0.0 });
    for j in 1..=k {
        let v = 2.0 * coupling * (TAU * alpha.phase(theta, j as i64 - 1)).cos();
        let next = (energy - v) * cur - prev;
        prev = cur;
        cur = next;
        let s = cur.abs().max(prev.abs());
        if s > 1e100 || (s < 1e-100 && s > 0.0) {
            cur /= s;
            prev /= s;
            log_scale += s.ln();
        }
        out.push(ScaledValue { mantissa: cur, log_scale });
    }
    out
}

pub fn pk_determinant(k: usize, theta: f64, energy: f64, coupling: f64, alpha: &Frequency) -> ScaledValue {
    *pk_sequence(k, theta, energy, coupling, alpha).last().expect("nonempty")
}

/// Eigenvalues of `H_{[0,k−1]}` below `E` from sign agreements of consecutive
/// `P_j`.
pub fn sturm_count_from_pk(k: usize, theta: f64, energy: f64, coupling: f64, alpha: &Frequency) -> usize {
    let seq = pk_sequence(k, theta, energy, coupling, alpha);
    let mut prev_sign = 1.0;
    let mut count = 0;
    for v in &seq[1..] {
        let s = if v.mantissa == 0.0 { -prev_sign } else { v.mantissa.signum() };
        if s == prev_sign {
            count += 1;
        }
        prev_sign = s;
    }
    count
}

/// Cross-check of `tr A_k(θ) = P_k(θ) − P_{k−2}(θ+α)` for the cocycle of
/// `H_coupling`; returns `(trace, P_k − P_{k−2}, relative difference)`.
pub fn pk_trace_check(k: usize, theta: f64, energy: f64, coupling: f64, alpha: &Frequency) -> Result<(f64, f64, f64)> {
    if k < 2 {
        return Err(GaplabError::invalid("trace identity needs k ≥ 2"));
    }
    let spec = CocycleSpec::new(coupling, energy, alpha.clone());
    let prod = transfer_product(&spec, theta, k)?;
    let trace = prod.matrix().trace();
    let a = pk_determinant(k, theta, energy, coupling, alpha).value();
    let b = pk_determinant(k - 2, alpha.phase(theta, 1), energy, coupling, alpha).value();
    let combo = a - b;
    let scale = trace.abs().max(combo.abs()).max(1.0);
    Ok((trace, combo, (trace - combo).abs() / scale))
}

fn block(x1: i64, x2: i64, theta: f64, coupling: f64, alpha: &Frequency) -> Tridiag {
    let d = (x1..=x2).map(|j| 2.0 * coupling * (TAU * alpha.phase(theta, j)).cos()).collect();
    Tridiag::new(d, vec![1.0; (x2 - x1) as usize])
}

/// One row of Green-function data on `I = [x1, x2]`, for `G_I = (H_I − E)^{-1}`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct GreenRow {
    pub y: i64,
    /// `G_I(x1, y) = −P_{x2−y}(θ+(y+1)α)/P_k(θ+x1α)`.
    pub left: f64,
    /// `G_I(y, x2) = −P_{y−x1}(θ+x1α)/P_k(θ+x1α)`.
    pub right: f64,
    /// `ln|G_I(x1, y)|`, finite where `left` underflows.
    pub ln_left: f64,
    pub ln_right: f64,
    /// Largest relative difference to a direct tridiagonal solve, when the
    /// values are representable.
    pub direct_rel_err: Option<f64>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct GreenTable {
    pub x1: i64,
    pub x2: i64,
    pub energy: f64,
    pub theta: f64,
    pub rows: Vec<GreenRow>,
}

fn check_interval(x1: i64, x2: i64) -> Result<()> {
    if x2 < x1 {
        return Err(GaplabError::invalid(format!("empty interval [{x1}, {x2}]")));
    }
    Ok(())
}

/// `P_k(θ + x1α)` for the block, erroring when it is numerically zero.
fn block_det(x1: i64, x2: i64, theta: f64, energy: f64, coupling: f64, alpha: &Frequency) -> Result<ScaledValue> {
    let k = (x2 - x1 + 1) as usize;
    let d = pk_determinant(k, alpha.phase(theta, x1), energy, coupling, alpha);
    if !(d.ln_abs() > -690.0) {
        return Err(GaplabError::NearSingular(format!("P_{k}(θ+{x1}α) = e^{:.1} on [{x1}, {x2}]", d.ln_abs())));
    }
    Ok(d)
}

/// Green entries at `y ∈ [x1, x2]` by Cramer quotients, cross-checked against
/// a direct solve of `(H_I − E)g = e_{x1}` and `e_{x2}`.
pub fn green_entries(
    x1: i64,
    x2: i64,
    y: i64,
    energy: f64,
    theta: f64,
    coupling: f64,
    alpha: &Frequency,
) -> Result<GreenRow> {
    check_interval(x1, x2)?;
    if y < x1 || y > x2 {
        return Err(GaplabError::invalid(format!("{y} is outside [{x1}, {x2}]")));
    }
    let den = block_det(x1, x2, theta, energy, coupling, alpha)?;
    let quotient = |num: ScaledValue| {
        let ln = num.ln_abs() - den.ln_abs();
        (-(num.mantissa * den.mantissa).signum() * ln.exp(), ln)
    };
    let (left, ln_left) = quotient(pk_determinant((x2 - y) as usize, alpha.phase(theta, y + 1), energy, coupling, alpha));
    let (right, ln_right) = quotient(pk_determinant((y - x1) as usize, alpha.phase(theta, x1), energy, coupling, alpha));
    let direct_rel_err = if ln_left.abs() < 600.0 && ln_right.abs() < 600.0 {
        let t = block(x1, x2, theta, coupling, alpha);
        let n = t.len();
        let i = (y - x1) as usize;
        let mut e = vec![0.0; n];
        e[0] = 1.0;
        let g1 = t.solve_shifted(energy, &e)[i];
        e[0] = 0.0;
        e[n - 1] = 1.0;
        let g2 = t.solve_shifted(energy, &e)[i];
        let rel = |a: f64, b: f64| if a == 0.0 && b == 0.0 { 0.0 } else { (a - b).abs() / a.abs().max(b.abs()) };
        Some(rel(left, g1).max(rel(right, g2)))
    } else {
        None
    };
    Ok(GreenRow { y, left, right, ln_left, ln_right, direct_rel_err })
}

pub fn green_table(x1: i64, x2: i64, energy: f64, theta: f64, coupling: f64, alpha: &Frequency) -> Result<GreenTable> {
    check_interval(x1, x2)?;
    let rows = (x1..=x2)
        .map(|y| green_entries(x1, x2, y, energy, theta, coupling, alpha))
        .collect::<Result<Vec<_>>>()?;
    Ok(GreenTable { x1, x2, energy, theta, rows })
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RegularityVerdict {
    pub regular: bool,
    /// An interval satisfying both Green bounds.
    pub witness: Option<(i64, i64)>,
    /// Smallest over admissible intervals of
    /// `max_i (ln|G(y,x_i)| + m|y − x_i|)`; negative means regular.
    pub best_margin: f64,
}

/// Whether `y` is `(m,k)`-regular with `δ`: some `[x1, x1+k−1] ∋ y` with
/// `dist(y, x_i) ≥ δk` and `|G(y, x_i)| < e^{−m|y−x_i|}` at both ends.
#[allow(clippy::too_many_arguments)]
pub fn classify_regular(
    y: i64,
    m: f64,
    k: usize,
    delta: f64,
    energy: f64,
    theta: f64,
    coupling: f64,
    alpha: &Frequency,
) -> Result<RegularityVerdict> {
    if !(delta > 0.1 && delta < 0.5) {
        return Err(GaplabError::invalid(format!("δ = {delta} must lie in (1/10, 1/2)")));
    }
    if !(m > 0.0) {
        return Err(GaplabError::invalid("m must be positive"));
    }
    let k = k as i64;
    let min_dist = (delta * k as f64).ceil() as i64;
    let starts: Vec<i64> = (y - k + 1..=y).filter(|x1| y - x1 >= min_dist && x1 + k - 1 - y >= min_dist).collect();
    if starts.is_empty() {
        return Err(GaplabError::invalid(format!("no interval of length {k} keeps {y} at distance δk from both ends")));
    }
    let mut best = (f64::INFINITY, None);
    for x1 in starts {
        let x2 = x1 + k - 1;
        let margin = match green_entries(x1, x2, y, energy, theta, coupling, alpha) {
            Ok(row) => (row.ln_left + m * (y - x1) as f64).max(row.ln_right + m * (x2 - y) as f64),
            Err(GaplabError::NearSingular(_)) => f64::INFINITY,
            Err(e) => return Err(e),
        };
        if margin < best.0 {
            best = (margin, Some((x1, x2)));
        }
    }
    let regular = best.0 < 0.0;
    Ok(RegularityVerdict { regular, witness: if regular { best.1 } else { None }, best_margin: best.0 })
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Uniformity {
    pub uniform: bool,
    /// `ln` of the maximal Lagrange product.
    pub log_max: f64,
    /// `log_max / k`, the smallest γ the set could pass with.
    pub gamma_eff: f64,
    /// Node index and abscissa attaining the maximum.
    pub argmax: (usize, f64),
}

/// `max_{x∈[−1,1]} max_i ∏_{j≠i} |x − c_j|/|c_i − c_j|` with `c_j = cos2πθ_j`,
/// compared against `e^{kγ}` (`k + 1` phases).
pub fn gamma_uniform_test(thetas: &[f64], gamma: f64) -> Result<Uniformity> {
    let n = thetas.len();
    if n < 2 {
        return Err(GaplabError::invalid("need at least two phases"));
    }
    let k = n - 1;
    let c: Vec<f64> = thetas.iter().map(|t| (TAU * t).cos()).collect();
    let mut sorted = c.clone();
    sorted.sort_by(f64::total_cmp);
    let min_gap = sorted.windows(2).map(|w| w[1] - w[0]).fold(f64::INFINITY, f64::min);
    if min_gap <= 1e-12 {
        return Err(GaplabError::invalid(format!("nodes coincide to {min_gap:.3e}")));
    }
    let denom: Vec<f64> = (0..n)
        .into_par_iter()
        .map(|i| (0..n).filter(|&j| j != i).map(|j| (c[i] - c[j]).abs().ln()).sum())
        .collect();
    // ln of the largest basis polynomial at x.
    let eval = |x: f64| -> (f64, usize) {
        let logs: Vec<f64> = c.iter().map(|cj| (x - cj).abs().ln()).collect();
        let finite: f64 = logs.iter().filter(|l| l.is_finite()).sum();
        let zeros = logs.iter().filter(|l| !l.is_finite()).count();
        let mut best = (f64::NEG_INFINITY, 0);
        for i in 0..n {
            let num = match (zeros, logs[i].is_finite()) {
                (0, _) => finite - logs[i],
                (1, false) => finite,
                _ => f64::NEG_INFINITY,
            };
            let v = num - denom[i];
            if v > best.0 {
                best = (v, i);
            }
        }
        best
    };
    let grid = 8 * k.max(1);
    let mut xs: Vec<f64> = (0..grid).map(|j| (PI * (j as f64 + 0.5) / grid as f64).cos()).collect();
    xs.extend([-1.0, 1.0]);
    let vals: Vec<(f64, f64, usize)> = xs.par_iter().map(|&x| { let (v, i) = eval(x); (v, x, i) }).collect();
    let mut order: Vec<usize> = (0..vals.len()).collect();
    order.sort_by(|&a, &b| vals[b].0.total_cmp(&vals[a].0));
    let mut best = (vals[order[0]].0, vals[order[0]].1, vals[order[0]].2);
    // Refine the top candidates between their grid neighbours.
    let step = PI / grid as f64;
    for &idx in order.iter().take(8) {
        let x0 = vals[idx].1;
        let t0 = x0.clamp(-1.0, 1.0).acos();
        let (mut a, mut b) = ((t0 - step).max(0.0), (t0 + step).min(PI));
        let f = |t: f64| eval(t.cos()).0;
        let g = 0.5 * (5f64.sqrt() - 1.0);
        for _ in 0..60 {
            let (l, r) = (b - g * (b - a), a + g * (b - a));
            if f(l) > f(r) {
                b = r;
            } else {
                a = l;
            }
        }
        let x = (0.5 * (a + b)).cos();
        let (v, i) = eval(x);
        if v > best.0 {
            best = (v, x, i);
        }
    }
    let log_max = best.0;
    Ok(Uniformity { uniform: log_max < k as f64 * gamma, log_max, gamma_eff: log_max / k as f64, argmax: (best.2, best.1) })
}

/// Index set `I₁ ∪ I₂` (size `6sq_n`) for a target site `y > 0`, with
/// `q_n ≤ y/8 < q_{n+1}` and `s` the largest integer with `sq_n ≤ y/8` unless
/// given. `negative_resonance` selects `I₁ = [−2sq_n+1, 0]` over `[0, 2sq_n−1]`.
pub fn uniform_index_set(
    y: i64,
    negative_resonance: bool,
    alpha: &IrrationalFrequency,
    s: Option<i64>,
) -> Result<(Vec<i64>, i64, i64)> {
    if y < 8 {
        return Err(GaplabError::invalid("y must be at least 8"));
    }
    let bound = (y / 8) as u64;
    let (_, qn) = *alpha
        .denominators_up_to(bound)
        .last()
        .ok_or_else(|| GaplabError::invalid("no denominator below y/8"))?;
    let qn = qn as i64;
    let s = s.unwrap_or((y / 8) / qn).max(1);
    let w = 2 * s * qn;
    let i1: Vec<i64> = if negative_resonance { (-w + 1..=0).collect() } else { (0..w).collect() };
    let mut set = i1;
    set.extend(y - w + 1..=y + w);
    Ok((set, qn, s))
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SinSum {
    pub value: f64,
    pub q_n: u64,
    /// `value / q_n`; the two-sided bound asks this to stay in `[−C, C]`.
    pub ratio: f64,
    pub l0: u64,
}

/// `Σ_{ℓ≠ℓ₀} ln|sin π(x+ℓα)| + (q_n − 1)ln 2` over `0 ≤ ℓ < q_n`, with `ℓ₀`
/// the minimizing index.
pub fn sin_sum_check(x: f64, n: usize, alpha: &IrrationalFrequency) -> Result<SinSum> {
    let q_n = alpha.q_u64(n).ok_or_else(|| GaplabError::invalid(format!("q_{n} is unavailable or too large")))?;
    let f = Frequency::Irrational(alpha.clone());
    let logs: Vec<f64> = (0..q_n).map(|l| (PI * f.phase(x, l as i64)).sin().abs().ln()).collect();
    let l0 = (0..q_n as usize).min_by(|&a, &b| logs[a].total_cmp(&logs[b])).unwrap_or(0);
    let sum: f64 = logs.iter().enumerate().filter(|(i, _)| *i != l0).map(|(_, v)| v).sum();
    let value = sum + (q_n as f64 - 1.0) * 2f64.ln();
    Ok(SinSum { value, q_n, ratio: value / q_n as f64, l0: l0 as u64 })
}

/// Largest `|value|/q_n` over the sample phases: the fitted constant `C` of
/// the two-sided bound `±C·q_n`.
pub fn sin_sum_constant(xs: &[f64], n: usize, alpha: &IrrationalFrequency) -> Result<f64> {
    let vals = xs.iter().map(|&x| sin_sum_check(x, n, alpha).map(|s| s.ratio.abs())).collect::<Result<Vec<_>>>()?;
    Ok(vals.into_iter().fold(0.0, f64::max))
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct GridBound {
    /// Dense-grid sup refined near its peaks, never below `grid_sup`.
    pub sup_norm: f64,
    /// Sup over the orbit points `x0 + jα`, `0 ≤ j ≤ k`.
    pub grid_sup: f64,
    pub ratio: f64,
    /// Essential degree bound `k = r·q_n − 1`.
    pub k: i64,
}

/// Compare `‖p‖₀` with `sup_{0≤j≤k}|p(x0 + jα)|` for `p` of essential degree
/// at most `k = r·q_n − 1`.
pub fn polynomial_grid_bound_check(
    p: &TrigSeries,
    x0: f64,
    r: u64,
    n: usize,
    alpha: &IrrationalFrequency,
) -> Result<GridBound> {
    let q_n = alpha.q_u64(n).ok_or_else(|| GaplabError::invalid(format!("q_{n} unavailable")))?;
    let q_next = alpha.q_u64(n + 1).ok_or_else(|| GaplabError::invalid(format!("q_{} unavailable", n + 1)))?;
    if r < 1 || r > q_next / q_n {
        return Err(GaplabError::invalid(format!("r = {r} outside [1, {}]", q_next / q_n)));
    }
    let k = (r * q_n) as i64 - 1;
    let support: Vec<i64> = p.iter().filter(|(_, c)| c.norm() > 0.0).map(|(j, _)| j).collect();
    if let (Some(lo), Some(hi)) = (support.iter().min(), support.iter().max()) {
        if hi - lo > k {
            return Err(GaplabError::invalid(format!("essential degree {} exceeds {k}", hi - lo)));
        }
    }
    let f = Frequency::Irrational(alpha.clone());
    let grid_sup = (0..=k).map(|j| p.eval(f.phase(x0, j)).norm()).fold(0.0, f64::max);
    let m = (32 * (p.trunc() + 1)).next_power_of_two().max(1024);
    let dense = p.eval_grid(m);
    let mut order: Vec<usize> = (0..m).collect();
    order.sort_by(|&a, &b| dense[b].norm().total_cmp(&dense[a].norm()));
    let h = 1.0 / m as f64;
    let g = 0.5 * (5f64.sqrt() - 1.0);
    let mut sup_norm = grid_sup.max(dense[order[0]].norm());
    for &i in order.iter().take(8) {
        let (mut a, mut b) = ((i as f64 - 1.0) * h, (i as f64 + 1.0) * h);
        for _ in 0..50 {
            let (l, r) = (b - g * (b - a), a + g * (b - a));
            if p.eval(l).norm() > p.eval(r).norm() {
                b = r;
            } else {
                a = l;
            }
        }
        sup_norm = sup_norm.max(p.eval(0.5 * (a + b)).norm());
    }
    Ok(GridBound { sup_norm, grid_sup, ratio: sup_norm / grid_sup, k })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn scaled_value_roundtrip() {
        let v = ScaledValue { mantissa: -0.5, log_scale: 2.0 };
        assert!((v.value() + 0.5 * 2f64.exp()).abs() < 1e-15);
        assert!((v.ln_abs() - (2.0 + 0.5f64.ln())).abs() < 1e-15);
    }

    #[test]
    fn pk_small_cases() {
        let a = Frequency::Rational(crate::frequency::Rational { p: 1, q: 3 });
        assert_eq!(pk_determinant(0, 0.2, 0.7, 1.3, &a).value(), 1.0);
        let want = 0.7 - 2.0 * 1.3 * (TAU * 0.2).cos();
        assert!((pk_determinant(1, 0.2, 0.7, 1.3, &a).value() - want).abs() < 1e-15);
    }
}
