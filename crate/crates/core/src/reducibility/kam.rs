//! One KAM averaging step around a parabolic constant and the gap-opening
//! certificate read off from the averaged perturbation.

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use super::homological::{matrix_homological_solve, DivisorStats, ParabolicForm};
use super::trig::{grid_size, TrigMat};
use crate::cocycle::{amo_matrix, Mat2};
use crate::error::{GaplabError, Result};
use crate::frequency::{Frequency, Rational};
use crate::rational_spectrum::{monodromy, Edge};

/// Tolerance on `‖B(x+α)⁻¹A(x)B(x) − Z‖` required before a KAM step.
pub const KAM_PRECONDITION_TOL: f64 = 1e-6;
/// `|d|` at or below this is reported as marginal.
pub const MARGINAL_TOL: f64 = 1e-14;

fn row_norm(m: &Mat2<Complex64>) -> f64 {
    (m.a.norm() + m.b.norm()).max(m.c.norm() + m.d.norm())
}

/// Matrix exponential by scaling and squaring with the diagonal `[6/6]` Padé
/// approximant.
pub fn expm_pade6(m: &Mat2<Complex64>) -> Mat2<Complex64> {
    const C: [f64; 7] = [1.0, 0.5, 5.0 / 44.0, 1.0 / 66.0, 1.0 / 792.0, 1.0 / 15840.0, 1.0 / 665280.0];
    let norm = row_norm(m);
    let squarings = if norm > 0.5 { (norm / 0.5).log2().ceil() as i32 } else { 0 };
    let a = m.scale(0.5f64.powi(squarings));
    let id = Mat2::<Complex64>::identity();
    let a2 = a * a;
    let a4 = a2 * a2;
    let a6 = a4 * a2;
    let u = a * (id.scale(C[1]) + a2.scale(C[3]) + a4.scale(C[5]));
    let v = id.scale(C[0]) + a2.scale(C[2]) + a4.scale(C[4]) + a6.scale(C[6]);
    let mut r = (v - u).inv() * (v + u);
    for _ in 0..squarings {
        r = r * r;
    }
    r
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum GapKind {
    Hyperbolic,
    Elliptic,
    Marginal,
}

/// Certificate at one `ε`: `D = Z₀ + εZ₁ = [[d₁, d₂], [d₃, −d₁]]`, `d = det D`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct GapVerdict {
    pub eps: f64,
    pub d1: f64,
    pub d2: f64,
    pub d3: f64,
    pub d: f64,
    pub kind: GapKind,
    /// `√(−d)` on the hyperbolic side.
    pub predicted_exponent: Option<f64>,
    /// Leading term `−a'ε·P'₂₁` of `d`.
    pub first_order: f64,
    pub consistent: bool,
}

/// First-order logarithm of `Z + ε[P]` for `Z = s(I + a'N)` and its
/// determinant at each `ε`.
///
/// With `P' = s[P]`, `log(I + a'N + εP') = a'N + εZ₁ + O(ε²)` where
/// `Z₁ = P' − a'(NP' + P'N)/2 + (a'²/3)P'₂₁N`.
pub fn gap_certificate(z: &ParabolicForm, p_avg: &Mat2<f64>, eps: &[f64]) -> Result<Vec<GapVerdict>> {
    if z.a == 0.0 {
        return Err(GaplabError::invalid("parabolic form with a = 0 is ±I; no gap to certify"));
    }
    let a = z.shear();
    let p = p_avg.scale(z.sign);
    let z1 = Mat2::new(
        p.a - 0.5 * a * p.c,
        p.b - 0.5 * a * (p.a + p.d) + a * a / 3.0 * p.c,
        p.c,
        p.d - 0.5 * a * p.c,
    );
    Ok(eps
        .iter()
        .map(|&e| {
            let dm = Mat2::new(e * z1.a, a + e * z1.b, e * z1.c, e * z1.d);
            let d1 = 0.5 * (dm.a - dm.d);
            let d = dm.det();
            let kind = if d.abs() <= MARGINAL_TOL {
                GapKind::Marginal
            } else if d < 0.0 {
                GapKind::Hyperbolic
            } else {
                GapKind::Elliptic
            };
            let first_order = -a * e * p.c;
            let consistent = kind == GapKind::Marginal || d.signum() == first_order.signum();
            GapVerdict {
                eps: e,
                d1,
                d2: dm.b,
                d3: dm.c,
                d,
                kind,
                predicted_exponent: (kind == GapKind::Hyperbolic).then(|| (-d).sqrt()),
                first_order,
                consistent,
            }
        })
        .collect())
}

#[derive(Clone, Debug)]
pub struct KamStepReport {
    pub z: ParabolicForm,
    pub eps: f64,
    pub n_trunc: usize,
    pub y: TrigMat,
    pub divisors: DivisorStats,
    /// Relative residual of the homological equation.
    pub homological_residual: f64,
    /// `sup‖B(x+α)⁻¹A(x)B(x) − Z‖` before perturbing.
    pub precondition: f64,
    /// `sup|B₂₁(x+α) − s·B₁₁(x)|` for the Schrödinger form.
    pub identity_check: Option<f64>,
    pub p_avg: Mat2<f64>,
    /// Distance of the perturbed conjugated cocycle to `Z + ε[P]` before and
    /// after the `exp(εY)` conjugation.
    pub residual_before: f64,
    pub residual_after: f64,
    /// `residual_after` at `ε/2` and the ratio, which is ≈ 4 for a second-order step.
    pub residual_half: f64,
    pub richardson_ratio: f64,
    /// `sup|det exp(εY) − 1|`.
    pub exp_det_defect: f64,
    /// `B₁(x+α)⁻¹(A + εG)B₁` after the step, projected to `n_trunc`.
    pub conjugated: TrigMat,
    pub certificate: GapVerdict,
}

impl KamStepReport {
    pub fn discriminant(&self) -> f64 {
        self.certificate.d
    }
}

/// Shared step: `A` is the unperturbed cocycle, `G` the direction of
/// perturbation, `B` the conjugacy to `Z`.
fn kam_core(
    z: &ParabolicForm,
    b: &TrigMat,
    a_fn: &dyn Fn(f64) -> Mat2<f64>,
    g_fn: &dyn Fn(f64) -> Mat2<f64>,
    alpha: f64,
    eps: f64,
    n_trunc: usize,
    schrodinger: bool,
) -> Result<KamStepReport> {
    let period = b.period();
    let plen = period.length();
    let n_p = 2 * b.trunc();
    let m = grid_size(n_trunc.max(n_p));
    let xs: Vec<f64> = (0..m).map(|j| j as f64 * plen / m as f64).collect();
    let b_now = b.eval_grid(m);
    let b_next = b.shift(alpha).eval_grid(m);
    let zc = z.matrix().to_complex();

    let mut precondition: f64 = 0.0;
    let mut ident: f64 = 0.0;
    let mut c0 = Vec::with_capacity(m);
    let mut p_vals = Vec::with_capacity(m);
    for j in 0..m {
        let inv_next = b_next[j].inv();
        let c = inv_next * a_fn(xs[j]).to_complex() * b_now[j];
        precondition = precondition.max(c.max_abs_diff(&zc));
        ident = ident.max((b_next[j].c - b_now[j].a * z.sign).norm());
        p_vals.push(inv_next * g_fn(xs[j]).to_complex() * b_now[j]);
        c0.push(c);
    }
    let p = TrigMat::from_grid(&p_vals, n_p, period);
    let pm = p.mean();
    let p_avg = Mat2::new(pm.a.re, pm.b.re, pm.c.re, pm.d.re);

    let zinv = zc.inv();
    let t_vals: Vec<Mat2<Complex64>> = p_vals.iter().map(|v| zinv * *v).collect();
    let t = TrigMat::from_grid(&t_vals, n_p, period);
    let sol = matrix_homological_solve(z, &t, alpha, n_trunc)?;

    let y_now = sol.y.eval_grid(m);
    let y_next = sol.y.shift(alpha).eval_grid(m);
    let target = |e: f64| zc + p_avg.to_complex().scale(e);
    let mut exp_det_defect: f64 = 0.0;
    let mut step = |e: f64, keep: bool| -> (f64, f64, Vec<Mat2<Complex64>>) {
        let tgt = target(e);
        let mut before: f64 = 0.0;
        let mut after: f64 = 0.0;
        let mut vals = Vec::with_capacity(if keep { m } else { 0 });
        for j in 0..m {
            let c = c0[j] + p_vals[j].scale(e);
            before = before.max(c.max_abs_diff(&tgt));
            let b1 = expm_pade6(&y_now[j].scale(e));
            let b1n = expm_pade6(&y_next[j].scale(e));
            exp_det_defect = exp_det_defect.max((b1.det() - 1.0).norm());
            let out = b1n.inv() * c * b1;
            after = after.max(out.max_abs_diff(&tgt));
            if keep {
                vals.push(out);
            }
        }
        (before, after, vals)
    };
    let (residual_before, residual_after, vals) = step(eps, true);
    let (_, residual_half, _) = step(0.5 * eps, false);
    let conjugated = TrigMat::from_grid(&vals, n_trunc.max(n_p), period);
    let certificate = if z.a != 0.0 {
        gap_certificate(z, &p_avg, &[eps])?.remove(0)
    } else {
        GapVerdict {
            eps,
            d1: 0.0,
            d2: 0.0,
            d3: 0.0,
            d: 0.0,
            kind: GapKind::Marginal,
            predicted_exponent: None,
            first_order: 0.0,
            consistent: true,
        }
    };
    Ok(KamStepReport {
        z: *z,
        eps,
        n_trunc,
        y: sol.y,
        divisors: sol.divisors,
        homological_residual: sol.residual,
        precondition,
        identity_check: schrodinger.then_some(ident),
        p_avg,
        residual_before,
        residual_after,
        residual_half,
        richardson_ratio: residual_after / residual_half,
        exp_det_defect,
        conjugated,
        certificate,
    })
}

/// KAM step for `S_{λ,E₀+ε}`, given `B` reducing `S_{λ,E₀}` to `Z`.
///
/// The perturbation is `εE₁₁`, so `P = B(x+α)⁻¹E₁₁B(x)`.
pub fn kam_step(
    b: &TrigMat,
    z: &ParabolicForm,
    lambda: f64,
    e0: f64,
    alpha: f64,
    eps: f64,
    n_trunc: usize,
) -> Result<KamStepReport> {
    let a_fn = |x: f64| amo_matrix(lambda, e0, x);
    let g_fn = |_: f64| Mat2::new(1.0, 0.0, 0.0, 0.0);
    let report = kam_core(z, b, &a_fn, &g_fn, alpha, eps, n_trunc, true)?;
    if report.precondition > KAM_PRECONDITION_TOL {
        return Err(GaplabError::Residual {
            what: "B does not reduce the cocycle to Z".into(),
            residual: report.precondition,
            tol: KAM_PRECONDITION_TOL,
        });
    }
    Ok(report)
}

/// KAM step on the synthetic cocycle `A = B(x+α)ZB(x)⁻¹` perturbed to
/// `A(x)(I + εK)` with `K` traceless.
pub fn kam_step_synthetic(
    b: &TrigMat,
    z: &ParabolicForm,
    k: &Mat2<f64>,
    alpha: f64,
    eps: f64,
    n_trunc: usize,
) -> Result<KamStepReport> {
    if k.trace().abs() > 1e-12 {
        return Err(GaplabError::invalid("perturbation direction must be traceless"));
    }
    let zm = z.matrix().to_complex();
    let shifted = b.shift(alpha);
    let a_fn = |x: f64| {
        let v = shifted.eval(x) * zm * b.eval(x).inv();
        Mat2::new(v.a.re, v.b.re, v.c.re, v.d.re)
    };
    let g_fn = |x: f64| a_fn(x) * *k;
    kam_core(z, b, &a_fn, &g_fn, alpha, eps, n_trunc, false)
}

/// Certificate at a band edge of a rational approximant, built on the
/// periodic orbit through the extremal phase.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct EdgeCertificate {
    pub energy: f64,
    pub theta: f64,
    /// Sign of the monodromy trace.
    pub sign: f64,
    /// `(U⁻¹MU)₁₂`.
    pub a: f64,
    /// Per-step form on the orbit.
    pub step_form: ParabolicForm,
    pub p_avg: Mat2<f64>,
    /// Verdicts at `+ε` and `−ε`; empty for a closed gap.
    pub verdicts: Vec<GapVerdict>,
    pub closed: bool,
}

/// Shear below which the monodromy is treated as `±I` (closed gap).
pub const CLOSED_GAP_SHEAR: f64 = 1e-7;

/// With `U⁻¹MU = s[[1, a], [0, 1]]` and `Z̃ = [[1, sa/q], [0, 1]]`, the frames
/// `B₀ = U`, `B_{j+1} = A_jB_jZ̃⁻¹` satisfy `B_q = sB₀`, so the orbit is
/// reduced to `Z̃` and `[P]` is the orbit mean of `B_{j+1}⁻¹E₁₁B_j`.
pub fn rational_edge_certificate(lambda: f64, r: Rational, edge: &Edge, eps: f64) -> Result<EdgeCertificate> {
    let (e0, theta) = (edge.energy, edge.theta);
    let m = monodromy(e0, theta, lambda, r);
    let sign = if m.trace() >= 0.0 { 1.0 } else { -1.0 };
    let nil = m - Mat2::identity().scale(sign);
    let (c1, c2) = ((nil.a, nil.c), (nil.b, nil.d));
    let n1 = c1.0.hypot(c1.1);
    let n2 = c2.0.hypot(c2.1);
    let (w, wn) = if n1 >= n2 { (c1, n1) } else { (c2, n2) };
    let closed_result = |a: f64| EdgeCertificate {
        energy: e0,
        theta,
        sign,
        a,
        step_form: ParabolicForm { sign: 1.0, a: 0.0 },
        p_avg: Mat2::zero(),
        verdicts: Vec::new(),
        closed: true,
    };
    if wn < CLOSED_GAP_SHEAR {
        return Ok(closed_result(0.0));
    }
    let v = (w.0 / wn, w.1 / wn);
    let u = Mat2::new(v.0, -v.1, v.1, v.0);
    let a = (u.inv() * m * u).b;
    if a.abs() < CLOSED_GAP_SHEAR {
        return Ok(closed_result(a));
    }
    let q = r.q as usize;
    let step_form = ParabolicForm { sign: 1.0, a: sign * a / q as f64 };
    let zt_inv = Mat2::new(1.0, -step_form.a, 0.0, 1.0);
    let alpha = Frequency::Rational(r);
    let e11 = Mat2::new(1.0, 0.0, 0.0, 0.0);
    let mut bj = u;
    let mut sum = Mat2::zero();
    for j in 0..q {
        let next = amo_matrix(lambda, e0, alpha.phase(theta, j as i64)) * bj * zt_inv;
        sum = sum + next.inv() * e11 * bj;
        bj = next;
    }
    let closure = bj.max_abs_diff(&u.scale(sign));
    if closure > 1e-6 * u.frob().max(1.0) * m.frob() {
        return Err(GaplabError::Residual { what: "orbit frame does not close".into(), residual: closure, tol: 1e-6 });
    }
    let p_avg = sum.scale(1.0 / q as f64);
    let verdicts = gap_certificate(&step_form, &p_avg, &[eps, -eps])?;
    Ok(EdgeCertificate { energy: e0, theta, sign, a, step_form, p_avg, verdicts, closed: false })
}
