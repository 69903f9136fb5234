//! Wronskians of three-term recursions `f(k+s) + f(k−s) + V(k)f(k) = Ef(k)`
//! with lattice step `s ∈ {1, 2}`.

use serde::{Deserialize, Serialize};

use crate::error::{GaplabError, Result};

/// Relative recursion residual accepted for inputs.
pub const RECURSION_TOL: f64 = 1e-10;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct WronskianReport {
    /// `W_n` for consecutive admissible `n`, starting at `first_n`.
    pub values: Vec<f64>,
    pub first_n: usize,
    /// `max_n |W_n − W_first|`.
    pub drift: f64,
    /// Largest relative recursion residual of either input.
    pub recursion_residual: f64,
    /// `max|f|·max|g|`, the scale `W` is compared against.
    pub scale: f64,
    pub constant: bool,
    /// `W ≡ 0` up to tolerance: the two solutions are linearly dependent.
    pub dependent: bool,
}

fn recursion_residual(f: &[f64], v: &[f64], energy: f64, step: usize) -> f64 {
    let scale = f.iter().fold(0.0f64, |m, x| m.max(x.abs())).max(f64::MIN_POSITIVE);
    (step..f.len().saturating_sub(step))
        .map(|k| (f[k + step] + f[k - step] + (v[k] - energy) * f[k]).abs())
        .fold(0.0, f64::max)
        / scale
}

/// `W_n` in step-1 form `f(n)g(n+1) − g(n)f(n+1)` or step-2 form
/// `f(n)g(n+2) + f(n−1)g(n+1) − g(n)f(n+2) − g(n−1)f(n+1)`.
///
/// `f`, `g` and `v` share indexing; both sequences must solve the recursion.
pub fn wronskian(f: &[f64], g: &[f64], v: &[f64], energy: f64, step: usize) -> Result<WronskianReport> {
    if step != 1 && step != 2 {
        return Err(GaplabError::invalid(format!("lattice step must be 1 or 2, got {step}")));
    }
    if f.len() != g.len() || f.len() != v.len() {
        return Err(GaplabError::invalid("f, g and V must have equal length"));
    }
    if f.len() < 2 * step + 2 {
        return Err(GaplabError::invalid("sequences too short"));
    }
    let res = recursion_residual(f, v, energy, step).max(recursion_residual(g, v, energy, step));
    if res > RECURSION_TOL {
        return Err(GaplabError::Residual { what: "input does not solve the recursion".into(), residual: res, tol: RECURSION_TOL });
    }
    let first_n = step - 1;
    let values: Vec<f64> = (first_n..f.len() - step)
        .map(|n| match step {
            1 => f[n] * g[n + 1] - g[n] * f[n + 1],
            _ => f[n] * g[n + 2] + f[n - 1] * g[n + 1] - g[n] * f[n + 2] - g[n - 1] * f[n + 1],
        })
        .collect();
    let w0 = values[0];
    let drift = values.iter().map(|w| (w - w0).abs()).fold(0.0, f64::max);
    let fmax = f.iter().fold(0.0f64, |m, x| m.max(x.abs()));
    let gmax = g.iter().fold(0.0f64, |m, x| m.max(x.abs()));
    let scale = (fmax * gmax).max(f64::MIN_POSITIVE);
    let steps = values.len() as f64;
    let tol = 1e-10 * (steps / 1000.0).max(1.0) * scale;
    let wmax = values.iter().fold(0.0f64, |m, w| m.max(w.abs()));
    Ok(WronskianReport {
        constant: drift <= tol,
        dependent: wmax <= tol,
        values,
        first_n,
        drift,
        recursion_residual: res,
        scale,
    })
}
