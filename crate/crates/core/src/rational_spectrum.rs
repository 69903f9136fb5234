//! Bands, gaps, gap labels and integrated density of states for rational
//! frequencies `α = p/q`.
//!
//! The spectrum is the union over all phases. Since the discriminant depends
//! on θ only through one harmonic, `Δ(E,θ) = D(E) + 2|c_q|cos(2πqθ + φ)`, band
//! edges are roots of `Δ = 2` at the phase minimizing `Δ` and of `Δ = −2` at the
//! phase maximizing it.

use std::f64::consts::TAU;
use std::fmt::Write as _;

use num_complex::Complex64;
use num_integer::Integer;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use serde_json::{json, Value};

use crate::cocycle::{amo_matrix, Mat2};
use crate::error::{GaplabError, Result};
use crate::frequency::{Frequency, Rational};
use crate::linalg::{pairwise_sum, Tridiag};
use crate::reducibility::trig::{fft_forward, fit_slope};

/// `tr A_q(θ)` for `α = p/q`.
pub fn discriminant(energy: f64, theta: f64, lambda: f64, r: Rational) -> f64 {
    monodromy(energy, theta, lambda, r).trace()
}

/// `A_q(θ) = S(θ+(q−1)α)⋯S(θ)` for `α = p/q`, with exact phase reduction.
pub fn monodromy(energy: f64, theta: f64, lambda: f64, r: Rational) -> Mat2<f64> {
    let alpha = Frequency::Rational(r);
    let mut m = Mat2::identity();
    for j in 0..r.q {
        m = amo_matrix(lambda, energy, alpha.phase(theta, j)) * m;
    }
    m
}

/// θ-DFT of the discriminant: `ĉ_k` for `k = 0..n`, with `ĉ_{n−k} = ĉ_{−k}`.
pub fn discriminant_dft(energy: f64, lambda: f64, r: Rational, n: usize) -> Vec<Complex64> {
    let mut buf: Vec<Complex64> = (0..n)
        .map(|j| Complex64::new(discriminant(energy, j as f64 / n as f64, lambda, r), 0.0))
        .collect();
    fft_forward(&mut buf);
    buf.iter().map(|c| c / n as f64).collect()
}

/// Single-harmonic structure of `θ ↦ Δ(E,θ)`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ChambersReport {
    /// Energy outside frequencies `{0, ±q}` relative to the total.
    pub off_support_energy: f64,
    /// `2|ĉ_q|`, the peak-to-mean swing of `Δ` in θ.
    pub amplitude: f64,
    /// `arg ĉ_q`.
    pub phase: f64,
}

pub fn chambers_check(energy: f64, lambda: f64, r: Rational, n: usize) -> Result<ChambersReport> {
    let q = r.q as usize;
    if n <= 2 * q {
        return Err(GaplabError::invalid(format!("grid of {n} points cannot resolve frequency {q}")));
    }
    let c = discriminant_dft(energy, lambda, r, n);
    let total: f64 = c.iter().map(|v| v.norm_sqr()).sum();
    let on: f64 = [0, q, n - q].iter().map(|&i| c[i].norm_sqr()).sum();
    let off_support_energy = if total > 0.0 { ((total - on) / total).max(0.0) } else { 0.0 };
    Ok(ChambersReport { off_support_energy, amplitude: 2.0 * c[q].norm(), phase: c[q].arg() })
}

/// One band edge: energy, the extremal phase realizing it and `Δ` there (±2).
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Edge {
    pub energy: f64,
    pub theta: f64,
    pub trace: f64,
    /// `|Δ(E,θ)| − 2` at the computed edge.
    pub residual: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Band {
    pub lo: f64,
    pub hi: f64,
    /// 1-based index from the bottom.
    pub index: usize,
    pub lo_edge: Edge,
    pub hi_edge: Edge,
    /// Narrower than the tolerance: reported with `lo = hi`.
    pub degenerate: bool,
}

impl Band {
    pub fn edge_residuals(&self) -> [f64; 2] {
        [self.lo_edge.residual, self.hi_edge.residual]
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct GapReport {
    pub lo: f64,
    pub hi: f64,
    pub length: f64,
    /// IDS in the gap is `j/q`.
    pub j: usize,
    pub q: usize,
    /// `ℓ` with `ℓp ≡ j (mod q)` and `|ℓ| ≤ q/2`.
    pub label: i64,
    pub open: bool,
    /// Sturm-count IDS at the gap midpoint, when cross-checked.
    pub ids_sturm: Option<f64>,
}

impl GapReport {
    pub fn ids_value(&self) -> f64 {
        self.j as f64 / self.q as f64
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Spectrum {
    pub lambda: f64,
    pub p: i64,
    pub q: i64,
    pub tol: f64,
    pub bands: Vec<Band>,
    pub gaps: Vec<GapReport>,
    /// Phase maximizing `Δ(E,·)`; the minimizing phase is `theta_max + 1/(2q)`.
    pub theta_max: f64,
    pub theta_min: f64,
    /// The two-phase reduction was confirmed on a `4q`-point θ grid.
    pub extremality_verified: bool,
}

impl Spectrum {
    pub fn rational(&self) -> Rational {
        Rational { p: self.p, q: self.q }
    }

    pub fn intervals(&self) -> Vec<(f64, f64)> {
        self.bands.iter().map(|b| (b.lo, b.hi)).collect()
    }

    pub fn to_json(&self) -> Value {
        json!({
            "lambda": self.lambda,
            "p": self.p,
            "q": self.q,
            "bands": self.bands.iter().map(|b| json!({"lo": b.lo, "hi": b.hi})).collect::<Vec<_>>(),
            "gaps": self.gaps.iter().map(|g| json!({
                "lo": g.lo, "hi": g.hi, "ids": format!("{}/{}", g.j, g.q), "label": g.label, "open": g.open
            })).collect::<Vec<_>>(),
        })
    }

    /// CSV band table with a header row.
    pub fn bands_csv(&self) -> String {
        let mut out = String::from("index,lo,hi,width,degenerate\n");
        for b in &self.bands {
            let _ = writeln!(out, "{},{:.16e},{:.16e},{:.16e},{}", b.index, b.lo, b.hi, b.hi - b.lo, b.degenerate);
        }
        out
    }
}

/// Phases maximizing and minimizing `Δ(E,·)` from the θ-DFT at one energy.
fn extremal_phases(lambda: f64, r: Rational) -> (f64, f64) {
    let q = r.q as usize;
    let n = 4 * q.max(1);
    let c = discriminant_dft(0.3, lambda, r, n);
    let phase = c[q % n].arg();
    let qf = r.q as f64;
    let theta_max = (-phase / (TAU * qf)).rem_euclid(1.0 / qf);
    let theta_min = (theta_max + 0.5 / qf).rem_euclid(1.0);
    (theta_max, theta_min)
}

fn verify_extremality(lambda: f64, r: Rational, theta_max: f64, theta_min: f64) -> bool {
    let n = 4 * r.q as usize;
    let bound = 2.0 + 2.0 * lambda.abs();
    [-0.7 * bound, 0.1, 0.55 * bound].iter().all(|&e| {
        let vals: Vec<f64> = (0..n).map(|j| discriminant(e, j as f64 / n as f64, lambda, r)).collect();
        let scale = vals.iter().map(|v| v.abs()).fold(1.0, f64::max);
        let slack = 1e-9 * scale;
        let dmax = discriminant(e, theta_max, lambda, r);
        let dmin = discriminant(e, theta_min, lambda, r);
        vals.iter().all(|&v| v <= dmax + slack && v >= dmin - slack)
    })
}

/// Dirichlet eigenvalues on sites `1..q−1` at phase θ.
fn dirichlet_eigenvalues(lambda: f64, r: Rational, theta: f64) -> Vec<f64> {
    let q = r.q as usize;
    if q < 2 {
        return Vec::new();
    }
    let alpha = Frequency::Rational(r);
    let d = (1..q).map(|n| 2.0 * lambda * (TAU * alpha.phase(theta, n as i64)).cos()).collect();
    Tridiag::new(d, vec![1.0; q - 2]).eigenvalues()
}

/// Root of `f` in `[lo, hi]` by bisection, where `f(lo)` is expected to have
/// sign `s_lo` and `f(hi)` the opposite. An endpoint whose computed sign
/// disagrees sits on a root up to rounding and is returned as is.
fn bisect(f: impl Fn(f64) -> f64, mut lo: f64, mut hi: f64, s_lo: f64, tol: f64) -> f64 {
    let flo = f(lo);
    if flo == 0.0 || flo.signum() != s_lo {
        return lo;
    }
    let fhi = f(hi);
    if fhi == 0.0 || fhi.signum() == s_lo {
        return hi;
    }
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        if hi - lo <= tol || mid <= lo || mid >= hi {
            break;
        }
        let fm = f(mid);
        if fm == 0.0 {
            return mid;
        }
        if fm.signum() == s_lo {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    0.5 * (lo + hi)
}

/// Roots of `Δ(E,θ) = target` (target = ±2), one per Dirichlet bracket.
///
/// Each bracket `[μ_i, μ_{i+1}]` holds one band of `H_θ`; `Δ` at `μ_i` has the
/// sign of the gap above band `i`, which is `(−1)^{q−i}`.
fn edge_roots(lambda: f64, r: Rational, theta: f64, target: f64, tol: f64) -> Vec<f64> {
    let bound = 3.0 + 2.0 * lambda.abs();
    let mut cuts = vec![-bound];
    cuts.extend(dirichlet_eigenvalues(lambda, r, theta));
    cuts.push(bound);
    let f = |e: f64| discriminant(e, theta, lambda, r) - target;
    let q = r.q as usize;
    cuts.windows(2)
        .enumerate()
        .map(|(i, w)| {
            let s_lo = if (q - i).rem_euclid(2) == 0 { 1.0 } else { -1.0 };
            bisect(f, w[0], w[1], s_lo, tol)
        })
        .collect()
}

/// Bands of `Σ_{λ,p/q}` (union over phases), sorted upward. Gaps are left
/// empty; see [`gap_labels`].
pub fn spectrum_rational(lambda: f64, r: Rational, tol: f64) -> Result<Spectrum> {
    if lambda == 0.0 {
        return Err(GaplabError::invalid("coupling must be nonzero"));
    }
    if r.p.gcd(&r.q) != 1 || r.q < 1 {
        return Err(GaplabError::invalid(format!("{r} is not reduced")));
    }
    if !(tol > 0.0) {
        return Err(GaplabError::invalid("tolerance must be positive"));
    }
    let (theta_max, theta_min) = extremal_phases(lambda, r);
    let extremality_verified = verify_extremality(lambda, r, theta_max, theta_min);
    let bisect_tol = (tol * 1e-3).max(f64::MIN_POSITIVE);
    let plus = edge_roots(lambda, r, theta_min, 2.0, bisect_tol);
    let minus = edge_roots(lambda, r, theta_max, -2.0, bisect_tol);
    let edge = |energy: f64, theta: f64, trace: f64| -> Edge {
        let residual = discriminant(energy, theta, lambda, r).abs() - 2.0;
        Edge { energy, theta, trace, residual }
    };
    let mut bands = Vec::with_capacity(r.q as usize);
    for (i, (&a, &b)) in plus.iter().zip(&minus).enumerate() {
        let ea = edge(a, theta_min, 2.0);
        let eb = edge(b, theta_max, -2.0);
        let (lo_edge, hi_edge) = if ea.energy <= eb.energy { (ea, eb) } else { (eb, ea) };
        let (mut lo, mut hi) = (lo_edge.energy, hi_edge.energy);
        let degenerate = hi - lo < tol;
        if degenerate {
            let mid = 0.5 * (lo + hi);
            lo = mid;
            hi = mid;
        }
        bands.push(Band { lo, hi, index: i + 1, lo_edge, hi_edge, degenerate });
    }
    bands.sort_by(|x, y| x.lo.total_cmp(&y.lo));
    for (i, b) in bands.iter_mut().enumerate() {
        b.index = i + 1;
    }
    Ok(Spectrum {
        lambda,
        p: r.p,
        q: r.q,
        tol,
        bands,
        gaps: Vec::new(),
        theta_max,
        theta_min,
        extremality_verified,
    })
}

/// `ℓ` with `ℓp ≡ j (mod q)`, `|ℓ| ≤ q/2`, ties to positive. `j ∈ {0, q}` gives 0.
pub fn gap_label(j: i64, r: Rational) -> i64 {
    let q = r.q;
    if j.rem_euclid(q) == 0 {
        return 0;
    }
    let p_inv = modular_inverse(r.p.rem_euclid(q), q).expect("p and q are coprime");
    let mut l = (j * p_inv).rem_euclid(q);
    if 2 * l > q {
        l -= q;
    }
    l
}

fn modular_inverse(a: i64, m: i64) -> Option<i64> {
    if m == 1 {
        return Some(0);
    }
    let e = a.extended_gcd(&m);
    (e.gcd == 1).then(|| e.x.rem_euclid(m))
}

/// Default truncation and phase grid for the gap IDS cross-check.
pub const GAP_CHECK_M: usize = 500;
pub const GAP_CHECK_THETAS: usize = 8;

/// Populate gaps with IDS values `j/q`, labels and a Sturm-count cross-check.
pub fn gap_labels(spec: &Spectrum) -> Spectrum {
    gap_labels_with(spec, Some((GAP_CHECK_M, GAP_CHECK_THETAS)))
}

pub fn gap_labels_with(spec: &Spectrum, check: Option<(usize, usize)>) -> Spectrum {
    let r = spec.rational();
    let q = r.q as usize;
    let alpha = Frequency::Rational(r);
    let gaps = spec
        .bands
        .windows(2)
        .enumerate()
        .map(|(i, w)| {
            let j = i + 1;
            let (lo, hi) = (w[0].hi, w[1].lo);
            let length = (hi - lo).max(0.0);
            let mid = 0.5 * (lo + hi);
            let ids_sturm = check.map(|(m, t)| ids_sturm(mid, spec.lambda, &alpha, t, m));
            GapReport {
                lo,
                hi: hi.max(lo),
                length,
                j,
                q,
                label: gap_label(j as i64, r),
                open: length > 10.0 * spec.tol,
                ids_sturm,
            }
        })
        .collect();
    Spectrum { gaps, ..spec.clone() }
}

/// Integrated density of states by Sturm counts on the `(2M+1)`-site Dirichlet
/// truncation, averaged over `theta_grid` phases `i/theta_grid`.
///
/// The truncation error is `O(1/M)`: boundary states shift each count by at
/// most a few eigenvalues.
pub fn ids_sturm(energy: f64, lambda: f64, alpha: &Frequency, theta_grid: usize, m: usize) -> f64 {
    let size = 2 * m + 1;
    let counts: Vec<f64> = (0..theta_grid.max(1))
        .into_par_iter()
        .map(|i| {
            let theta = i as f64 / theta_grid.max(1) as f64;
            let d = (-(m as i64)..=m as i64)
                .map(|n| 2.0 * lambda * (TAU * alpha.phase(theta, n)).cos())
                .collect();
            Tridiag::new(d, vec![1.0; size - 1]).count_below(energy) as f64 / size as f64
        })
        .collect();
    pairwise_sum(&counts) / counts.len() as f64
}

/// Hausdorff distance between two finite unions of closed intervals.
pub fn hausdorff_distance(a: &[(f64, f64)], b: &[(f64, f64)]) -> Result<f64> {
    if a.is_empty() || b.is_empty() {
        return Err(GaplabError::invalid("Hausdorff distance needs nonempty sets"));
    }
    Ok(directed(a, b).max(directed(b, a)))
}

fn merged(s: &[(f64, f64)]) -> Vec<(f64, f64)> {
    let mut v: Vec<(f64, f64)> = s.iter().map(|&(l, h)| (l.min(h), l.max(h))).collect();
    v.sort_by(|x, y| x.0.total_cmp(&y.0));
    let mut out: Vec<(f64, f64)> = Vec::with_capacity(v.len());
    for (l, h) in v {
        match out.last_mut() {
            Some(last) if l <= last.1 => last.1 = last.1.max(h),
            _ => out.push((l, h)),
        }
    }
    out
}

fn dist_to(x: f64, s: &[(f64, f64)]) -> f64 {
    s.iter()
        .map(|&(l, h)| if x < l { l - x } else if x > h { x - h } else { 0.0 })
        .fold(f64::INFINITY, f64::min)
}

/// `sup_{x∈A} dist(x, B)`: attained at endpoints of A or at midpoints of gaps
/// of B that fall inside A.
fn directed(a: &[(f64, f64)], b: &[(f64, f64)]) -> f64 {
    let (a, b) = (merged(a), merged(b));
    let mut best: f64 = 0.0;
    for &(l, h) in &a {
        best = best.max(dist_to(l, &b)).max(dist_to(h, &b));
        for w in b.windows(2) {
            let mid = 0.5 * (w[0].1 + w[1].0);
            if mid >= l && mid <= h {
                best = best.max(dist_to(mid, &b));
            }
        }
    }
    best
}

/// Total length of a union of intervals.
pub fn lebesgue_measure(s: &[(f64, f64)]) -> f64 {
    merged(s).iter().map(|(l, h)| h - l).sum()
}

/// `(p/q, spectrum)` for all reduced `p/q ∈ [0,1)` with `q ≤ qmax`.
pub fn butterfly(lambda: f64, qmax: i64, tol: f64) -> Result<Vec<Spectrum>> {
    let fracs: Vec<Rational> = (1..=qmax)
        .flat_map(|q| (0..q).filter(move |p| p.gcd(&q) == 1).map(move |p| Rational { p, q }))
        .collect();
    fracs.par_iter().map(|&r| spectrum_rational(lambda, r, tol)).collect()
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct HolderPoint {
    pub a: Rational,
    pub b: Rational,
    pub delta_alpha: f64,
    pub dist: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct HolderFit {
    pub lambda: f64,
    pub points: Vec<HolderPoint>,
    /// Least-squares slope of `ln Dist` against `ln|Δα|`.
    pub exponent: f64,
    /// `max Dist/|Δα|^{1/2}` over the points.
    pub half_constant: f64,
}

/// Fit `Dist(Σ_{λ,α₁}, Σ_{λ,α₂}) ≈ C|α₁ − α₂|^γ` over consecutive fractions.
pub fn holder_fit(lambda: f64, fracs: &[Rational], tol: f64) -> Result<HolderFit> {
    if fracs.len() < 3 {
        return Err(GaplabError::invalid("need at least three fractions for a fit"));
    }
    let specs: Vec<Spectrum> = fracs.par_iter().map(|&r| spectrum_rational(lambda, r, tol)).collect::<Result<_>>()?;
    let mut points = Vec::with_capacity(fracs.len() - 1);
    for (w, s) in fracs.windows(2).zip(specs.windows(2)) {
        let delta_alpha = (w[0].value() - w[1].value()).abs();
        if delta_alpha == 0.0 {
            return Err(GaplabError::invalid("repeated fraction"));
        }
        let dist = hausdorff_distance(&s[0].intervals(), &s[1].intervals())?;
        points.push(HolderPoint { a: w[0], b: w[1], delta_alpha, dist });
    }
    let logs: Vec<(f64, f64)> = points.iter().map(|p| (p.delta_alpha.ln(), p.dist.max(f64::MIN_POSITIVE).ln())).collect();
    let exponent = fit_slope(&logs).ok_or_else(|| GaplabError::invalid("degenerate Hölder fit"))?;
    let half_constant = points.iter().map(|p| p.dist / p.delta_alpha.sqrt()).fold(0.0, f64::max);
    Ok(HolderFit { lambda, points, exponent, half_constant })
}
