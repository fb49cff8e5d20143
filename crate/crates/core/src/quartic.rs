//! Largest root of the quartic that determines `y1 = p1 / p4` in the fully
//! asymmetric four-point case `0 < v1 < v2 < v3 < v4 < v1 + v2 + v3`.
//!
//! The root is evaluated from the closed-form radical expression in complex
//! arithmetic (principal branches throughout), and the real part is accepted
//! only if it lies above 1 and passes a scaled residual check. Otherwise the
//! unique root in `(1, Y)` is isolated by bisection, using `h(1) < 0` and
//! `h(Y) > 0` for the Cauchy-type bound `Y = 1 + sum|c_i| / c4`.

use num_complex::Complex64;

use crate::error::{DesignError, Result};

/// Acceptance threshold for the radical root: `|h(y)| <= RESIDUAL_TOL * max|c_i| * y^4`.
pub const RESIDUAL_TOL: f64 = 1e-9;

const BISECTION_MAX_ITER: usize = 400;

/// Coefficients `c0..c4` of `h(y) = c0 + c1 y + c2 y^2 + c3 y^3 + c4 y^4` for
/// sorted `v`.
pub fn quartic_coefficients(v: &[f64; 4]) -> [f64; 5] {
    let [v1, v2, v3, v4] = *v;
    let c0 = 2.0 * v1.powi(3) * (-v1 + v2 + v3 + v4);
    let c1 = v1 * v1 * ((-v1 - v2 + v3 + v4).powi(2) + 4.0 * (v4 - v1) * (v2 + v4));
    let c2 = 2.0 * v1 * v4 * (2.0 * (v1 - v4).powi(2) - (v2 - v3).powi(2) - (v1 + v4) * (v2 + v3));
    let c3 = v4 * v4 * ((v1 - v2 + v3 - v4).powi(2) - 4.0 * (v4 - v1) * (v1 + v2));
    let c4 = 2.0 * (v1 + v2 + v3 - v4) * v4.powi(3);
    [c0, c1, c2, c3, c4]
}

pub fn eval_quartic(c: &[f64; 5], y: f64) -> f64 {
    c.iter().rev().fold(0.0, |acc, &ci| acc * y + ci)
}

/// Intermediates of the radical formula, kept for diagnostics.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct QuarticSolveState {
    pub c: [f64; 5],
    /// `a_i = c_i / c4` for `i = 0..3`.
    pub a: [f64; 4],
    pub e1: Complex64,
    pub f1: Complex64,
    pub g1: Complex64,
    pub a1: Complex64,
    pub c1: Complex64,
    /// Complex value of the radical expression before taking the real part.
    pub radical: Complex64,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct QuarticRoot {
    pub y1: f64,
    /// `|h(y1)| / (max|c_i| * y1^4)`.
    pub scaled_residual: f64,
    /// True when the radical value was rejected and bisection supplied the root.
    pub fallback: bool,
    pub state: QuarticSolveState,
}

fn principal_cbrt(z: Complex64) -> Complex64 {
    if z == Complex64::new(0.0, 0.0) {
        z
    } else {
        z.powf(1.0 / 3.0)
    }
}

/// Evaluates the radical expression for the largest root.
pub fn radical_state(c: &[f64; 5]) -> QuarticSolveState {
    let a = [c[0] / c[4], c[1] / c[4], c[2] / c[4], c[3] / c[4]];
    let [a0, a1, a2, a3] = a.map(|v| Complex64::new(v, 0.0));
    let e1 = 12.0 * a0 + a2 * a2 - 3.0 * a1 * a3;
    let f1 = 27.0 * a1 * a1 - 72.0 * a0 * a2 + 2.0 * a2 * a2 * a2 - 9.0 * a1 * a2 * a3
        + 27.0 * a0 * a3 * a3;
    let disc = (f1 * f1 - 4.0 * e1 * e1 * e1).sqrt();
    let g1 = principal_cbrt(f1 - disc) + principal_cbrt(f1 + disc);
    let cbrt2 = 2f64.cbrt();
    let big_a = -2.0 * a2 / 3.0 + a3 * a3 / 4.0 + g1 / (3.0 * cbrt2);
    let sqrt_a = big_a.sqrt();
    let big_c = -4.0 * a2 / 3.0 + a3 * a3 / 2.0 - g1 / (3.0 * cbrt2)
        + (-8.0 * a1 + 4.0 * a2 * a3 - a3 * a3 * a3) / (4.0 * sqrt_a);
    let radical = -a3 / 4.0 + sqrt_a / 2.0 + big_c.sqrt() / 2.0;
    QuarticSolveState { c: *c, a, e1, f1, g1, a1: big_a, c1: big_c, radical }
}

fn scaled_residual(c: &[f64; 5], y: f64) -> f64 {
    let scale = c.iter().fold(0.0f64, |m, v| m.max(v.abs())) * y.powi(4);
    eval_quartic(c, y).abs() / scale
}

/// The unique root of `h` above 1.
///
/// Requires `c0 > 0` and `c4 > 0`; bracketing additionally needs `h(1) < 0`,
/// which holds for every strictly ordered case-(v) coefficient set.
pub fn quartic_largest_root(c: &[f64; 5]) -> Result<QuarticRoot> {
    if c.iter().any(|v| !v.is_finite()) {
        return Err(DesignError::NonFinite("quartic coefficients"));
    }
    if !(c[0] > 0.0 && c[4] > 0.0) {
        return Err(DesignError::Domain(format!(
            "quartic needs c0 > 0 and c4 > 0 (c0 = {}, c4 = {})",
            c[0], c[4]
        )));
    }
    let state = radical_state(c);
    let y = state.radical.re;
    if y.is_finite() && y > 1.0 {
        let r = scaled_residual(c, y);
        if r <= RESIDUAL_TOL {
            return Ok(QuarticRoot { y1: y, scaled_residual: r, fallback: false, state });
        }
    }
    let y1 = bisect_above_one(c)?;
    Ok(QuarticRoot { y1, scaled_residual: scaled_residual(c, y1), fallback: true, state })
}

fn bisect_above_one(c: &[f64; 5]) -> Result<f64> {
    let mut lo = 1.0;
    let mut hi = 1.0 + c.iter().map(|v| v.abs()).sum::<f64>() / c[4];
    let (h_lo, h_hi) = (eval_quartic(c, lo), eval_quartic(c, hi));
    if !(h_lo < 0.0 && h_hi > 0.0) {
        return Err(DesignError::Numerical(format!(
            "quartic root not bracketed on (1, {hi}): h(1) = {h_lo}, h(Y) = {h_hi}"
        )));
    }
    for _ in 0..BISECTION_MAX_ITER {
        let mid = 0.5 * (lo + hi);
        if mid <= lo || mid >= hi {
            break;
        }
        if eval_quartic(c, mid) < 0.0 {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    Ok(0.5 * (lo + hi))
}
