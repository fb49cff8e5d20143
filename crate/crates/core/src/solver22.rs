//! Closed-form maximizer of `f(p) = sum_i v_i prod_{j != i} p_j` over the
//! 4-point simplex.
//!
//! With `v` sorted ascending the cases are:
//!
//! * (i)   `v4 >= v1 + v2 + v3`: `p = (1/3, 1/3, 1/3, 0)`;
//! * (ii)  `v1 = v2`, (iii) `v2 = v3`, (iv) `v3 = v4`: quadratic closed forms;
//! * (v)   strictly ordered: `y1 = p1/p4` is the largest root of a quartic,
//!   then `y2`, `y3` follow by back-substitution.
//!
//! A single zero coefficient is routed to the one-zero formulas shared with
//! [`crate::twofactor`]; they are not the limit of case (v).

use crate::design::Allocation;
use crate::error::{DesignError, Result};
use crate::objective::leave_one_out_polynomial;
use crate::quartic::{quartic_coefficients, quartic_largest_root, QuarticRoot};
use crate::report::SolveReport;

/// Two coefficients are tied when they differ by at most this fraction of
/// the largest one. Also the threshold below which a coefficient counts as 0.
pub const TIE_TOL: f64 = 1e-9;

/// Relative slack on the `v4 >= v1 + v2 + v3` boundary test.
pub const BOUNDARY_TOL: f64 = 1e-12;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct VCoefficients {
    sorted: [f64; 4],
    perm: [usize; 4],
}

impl VCoefficients {
    pub fn new(v: [f64; 4]) -> Result<Self> {
        if v.iter().any(|x| !x.is_finite()) {
            return Err(DesignError::NonFinite("v coefficients"));
        }
        if let Some(x) = v.iter().find(|&&x| x < 0.0) {
            return Err(DesignError::Domain(format!("negative v coefficient {x}")));
        }
        let (sorted, perm) = sort4(&v);
        Ok(Self { sorted, perm })
    }

    /// Coefficients in ascending order.
    pub fn sorted(&self) -> &[f64; 4] {
        &self.sorted
    }

    /// Sorted position `k` holds input index `perm()[k]`.
    pub fn perm(&self) -> &[usize; 4] {
        &self.perm
    }

    pub fn original(&self) -> [f64; 4] {
        let mut v = [0.0; 4];
        for (k, &i) in self.perm.iter().enumerate() {
            v[i] = self.sorted[k];
        }
        v
    }
}

pub(crate) fn sort4(v: &[f64; 4]) -> ([f64; 4], [usize; 4]) {
    let mut perm = [0, 1, 2, 3];
    perm.sort_by(|&a, &b| v[a].total_cmp(&v[b]).then(a.cmp(&b)));
    (perm.map(|i| v[i]), perm)
}

fn tied(a: f64, b: f64) -> bool {
    (a - b).abs() <= TIE_TOL
}

/// D-optimal allocation for the reduced four-point problem.
pub fn solve_22(v: &VCoefficients) -> Result<SolveReport> {
    let s = v.sorted;
    let max = s[3];
    if max <= 0.0 {
        return Err(DesignError::Degenerate("all v coefficients are zero".into()));
    }
    let vn = s.map(|x| x / max);
    let zeros = vn.iter().filter(|&&x| x <= TIE_TOL).count();
    if zeros > 1 {
        return Err(DesignError::Degenerate(
            "more than one zero coefficient: use the two-factor rank analysis".into(),
        ));
    }

    let mut report = if zeros == 1 {
        let (p, case) = one_zero_case(&[0.0, vn[1], vn[2], vn[3]]);
        SolveReport::new(Allocation::new(p.to_vec())?, 0.0, format!("2x2-zero-{case}"))
    } else if vn[3] >= (vn[0] + vn[1] + vn[2]) * (1.0 - BOUNDARY_TOL) {
        let third = 1.0 / 3.0;
        let alloc = Allocation::new(vec![third, third, third, 0.0])
            .or_else(|_| Allocation::normalized(vec![third, third, third, 0.0]))?;
        SolveReport::new(alloc, 0.0, "2x2-case-i")
    } else if tied(vn[0], vn[1]) {
        SolveReport::new(Allocation::normalized(case_ii(&vn).to_vec())?, 0.0, "2x2-case-ii")
    } else if tied(vn[1], vn[2]) {
        SolveReport::new(Allocation::normalized(case_iii(&vn).to_vec())?, 0.0, "2x2-case-iii")
    } else if tied(vn[2], vn[3]) {
        SolveReport::new(Allocation::normalized(case_iv(&vn).to_vec())?, 0.0, "2x2-case-iv")
    } else {
        let cv = solve_case_v(&vn)?;
        SolveReport::new(cv.allocation, 0.0, "2x2-case-v")
            .with("y1", cv.y1)
            .with("y2", cv.y2)
            .with("y3", cv.y3)
            .with("quartic_residual", cv.root.scaled_residual)
            .with("quartic_fallback", if cv.root.fallback { 1.0 } else { 0.0 })
    };

    let p = report.allocation.as_slice();
    report.objective = if report.case_label == "2x2-case-i" {
        s[3] / 27.0
    } else {
        leave_one_out_polynomial(&s, p)
    };
    if p.iter().all(|&x| x > 0.0) {
        let r = kkt_residual(&s, &report.allocation)?;
        report.insert("kkt_residual", r);
    }
    Ok(report.unsort(&v.perm))
}

/// Case (ii), `v1 = v2`.
fn case_ii(v: &[f64; 4]) -> [f64; 4] {
    let [v1, _, v3, v4] = *v;
    let delta = v3 + v4 - 4.0 * v1;
    let denom = -2.0 * delta + (delta * delta + 12.0 * v3 * v4).sqrt();
    let p12 = 2.0 * v1 / denom;
    [
        p12,
        p12,
        0.5 + (v4 - v3 - 4.0 * v1) / (2.0 * denom),
        0.5 - (v4 - v3 + 4.0 * v1) / (2.0 * denom),
    ]
}

/// Case (iii), `v2 = v3`.
fn case_iii(v: &[f64; 4]) -> [f64; 4] {
    let [v1, v2, _, v4] = *v;
    let delta = v1 + v4 - 4.0 * v2;
    let denom = -2.0 * delta + (delta * delta + 12.0 * v1 * v4).sqrt();
    let p23 = 2.0 * v2 / denom;
    [
        0.5 + (v4 - v1 - 4.0 * v2) / (2.0 * denom),
        p23,
        p23,
        0.5 - (v4 - v1 + 4.0 * v2) / (2.0 * denom),
    ]
}

/// Case (iv), `v3 = v4`.
fn case_iv(v: &[f64; 4]) -> [f64; 4] {
    let [v1, v2, v3, _] = *v;
    let delta = v1 + v2 - 4.0 * v3;
    let denom = -2.0 * delta + (delta * delta + 12.0 * v1 * v2).sqrt();
    let p34 = 2.0 * v3 / denom;
    [
        0.5 + (v2 - v1 - 4.0 * v3) / (2.0 * denom),
        0.5 - (v2 - v1 + 4.0 * v3) / (2.0 * denom),
        p34,
        p34,
    ]
}

/// Allocation when exactly one coefficient vanishes. `u` is sorted with
/// `u[0] = 0`; returns the allocation and the sub-case tag `2a`..`2d`.
pub(crate) fn one_zero_case(u: &[f64; 4]) -> ([f64; 4], &'static str) {
    let (p, case) = one_zero_formula(u);
    // p1 = 1/3 exactly, the rest rescaled to 2/3
    let rest = p[1] + p[2] + p[3];
    let k = (2.0 / 3.0) / rest;
    ([p[0], p[1] * k, p[2] * k, p[3] * k], case)
}

fn one_zero_formula(u: &[f64; 4]) -> ([f64; 4], &'static str) {
    let [_, u2, u3, u4] = *u;
    let third = 1.0 / 3.0;
    if u4 >= (u2 + u3) * (1.0 - BOUNDARY_TOL) {
        ([third, third, third, 0.0], "2a")
    } else if tied(u2, u3) {
        let p23 = 2.0 * u2 / (3.0 * (4.0 * u2 - u4));
        ([third, p23, p23, 0.5 - (4.0 * u2 + u4) / (6.0 * (4.0 * u2 - u4))], "2b")
    } else if tied(u3, u4) {
        let p34 = 2.0 * u3 / (3.0 * (4.0 * u3 - u2));
        ([third, 0.5 - (u2 + 4.0 * u3) / (6.0 * (4.0 * u3 - u2)), p34, p34], "2c")
    } else {
        let delta = case_2d_delta(u2, u3, u4);
        (
            [
                third,
                2.0 * u2 * (u3 + u4 - u2) / (3.0 * delta),
                2.0 * u3 * (u2 + u4 - u3) / (3.0 * delta),
                2.0 * u4 * (u2 + u3 - u4) / (3.0 * delta),
            ],
            "2d",
        )
    }
}

/// `2 u2 u3 + 2 u2 u4 + 2 u3 u4 - u2^2 - u3^2 - u4^2`.
pub fn case_2d_delta(u2: f64, u3: f64, u4: f64) -> f64 {
    2.0 * u2 * u3 + 2.0 * u2 * u4 + 2.0 * u3 * u4 - u2 * u2 - u3 * u3 - u4 * u4
}

/// Case-(v) intermediates.
#[derive(Debug, Clone, PartialEq)]
pub struct CaseV {
    pub y1: f64,
    pub y2: f64,
    pub y3: f64,
    pub root: QuarticRoot,
    pub allocation: Allocation,
}

/// Runs the case-(v) pipeline on sorted `v` without checking which case
/// applies. Meaningful for `0 < v1 < v2 < v3 < v4 < v1 + v2 + v3`.
pub fn solve_case_v(v: &[f64; 4]) -> Result<CaseV> {
    let c = quartic_coefficients(v);
    let root = quartic_largest_root(&c)?;
    let (y2, y3, allocation) = back_substitute(root.y1, v)?;
    Ok(CaseV { y1: root.y1, y2, y3, root, allocation })
}

/// `y2` and `y3` from `y1`, and the allocation `p_i = y_i / (1 + y1 + y2 + y3)`,
/// `p4 = 1 / (1 + y1 + y2 + y3)`. `v` is sorted.
pub fn back_substitute(y1: f64, v: &[f64; 4]) -> Result<(f64, f64, Allocation)> {
    let [v1, v2, v3, v4] = *v;
    let s = v1 + v4 * y1;
    // D2 = A^2 + v1 P, every factor of P positive in case (v)
    let a = (v2 + v3 - v4) * y1 * s;
    let big_p = (v1 + 2.0 * v4 * y1) * (v1 + (v3 + v4 - v2) * y1) * (v1 + (v2 - v3 + v4) * y1);
    let d2 = a * a + v1 * big_p;
    if !(d2 >= 0.0 && d2.is_finite()) {
        return Err(DesignError::Numerical(format!(
            "invalid discriminant D2 = {d2} at y1 = {y1}"
        )));
    }
    let root = d2.sqrt();
    // (sqrt(D2) - A) / v1
    let lifted = if a >= 0.0 { big_p / (root + a) } else { (root - a) / v1 };
    let y2 = 0.5 + (v3 - v2) * y1 / (2.0 * s) + lifted / (2.0 * s);
    let y3 = 1.0 + (v4 - v3) * y1 * y2 / (v2 * y1 + v1 * y2);
    let total = 1.0 + y1 + y2 + y3;
    let p = vec![y1 / total, y2 / total, y3 / total, 1.0 / total];
    Ok((y2, y3, Allocation::normalized(p)?))
}

/// Partial derivatives of `sum_i v_i prod_{j != i} p_j`.
pub fn simplex_gradient(v: &[f64], p: &[f64]) -> Vec<f64> {
    let n = v.len();
    (0..n)
        .map(|i| {
            (0..n)
                .filter(|&k| k != i)
                .map(|k| {
                    v[k] * (0..n).filter(|&j| j != i && j != k).map(|j| p[j]).product::<f64>()
                })
                .sum()
        })
        .collect()
}

/// `max_{i,j} |df/dp_i - df/dp_j|`, zero at an interior optimum.
///
/// Undefined when some `p_i = 0` (boundary solutions satisfy a different
/// optimality condition).
pub fn kkt_residual(v: &[f64], p: &Allocation) -> Result<f64> {
    if v.len() != p.len() {
        return Err(DesignError::DimensionMismatch {
            what: "v vs. allocation",
            expected: v.len(),
            actual: p.len(),
        });
    }
    if let Some(i) = p.as_slice().iter().position(|&x| x == 0.0) {
        return Err(DesignError::BoundaryAllocation(i));
    }
    let g = simplex_gradient(v, p.as_slice());
    let hi = g.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    let lo = g.iter().cloned().fold(f64::INFINITY, f64::min);
    Ok(hi - lo)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn solve(v: [f64; 4]) -> SolveReport {
        solve_22(&VCoefficients::new(v).unwrap()).unwrap()
    }

    fn assert_alloc(r: &SolveReport, expected: &[f64], tol: f64) {
        for (a, b) in r.allocation.as_slice().iter().zip(expected) {
            assert!((a - b).abs() <= tol, "{:?} vs {:?}", r.allocation, expected);
        }
    }

    #[test]
    fn case_i_saturates() {
        let r = solve([1.0, 2.0, 3.0, 7.0]);
        assert_eq!(r.case_label, "2x2-case-i");
        let t = 1.0 / 3.0;
        assert_eq!(r.allocation.as_slice(), &[t, t, t, 0.0]);
        assert_eq!(r.objective, 7.0 / 27.0);
        assert!(r.diagnostic("kkt_residual").is_none());
    }

    #[test]
    fn case_ii_matches_extended_precision() {
        let r = solve([1.0, 1.0, 2.0, 3.0]);
        assert_eq!(r.case_label, "2x2-case-ii");
        assert_alloc(
            &r,
            &[0.305_623_296_965_725_54, 0.305_623_296_965_725_54, 0.270_782_527_275_705_84, 0.117_970_878_792_843_07],
            1e-15,
        );
        assert!(r.diagnostic("kkt_residual").unwrap() <= 1e-12);
        assert!((r.objective - 0.117_442_032_263_275_19).abs() < 1e-15);
    }

    #[test]
    fn full_symmetry_is_uniform() {
        let r = solve([1.0, 1.0, 1.0, 1.0]);
        assert_alloc(&r, &[0.25; 4], 1e-16);
        assert_eq!(r.diagnostic("kkt_residual").unwrap(), 0.0);
    }

    #[test]
    fn case_v_interior() {
        let r = solve([1.0, 2.0, 3.0, 4.0]);
        assert_eq!(r.case_label, "2x2-case-v");
        assert_alloc(
            &r,
            &[0.311_163_403_768_959_72, 0.284_907_253_136_121_44, 0.250_823_458_098_327_3, 0.153_105_884_996_591_53],
            1e-13,
        );
        assert!(r.diagnostic("y2").unwrap() > 1.0 && r.diagnostic("y3").unwrap() > 1.0);
        assert_eq!(r.diagnostic("quartic_fallback"), Some(0.0));
    }

    #[test]
    fn near_saturation_boundary() {
        let r = solve([1.0, 2.0, 3.0, 5.9]);
        assert_eq!(r.case_label, "2x2-case-v");
        let p = r.allocation.as_slice();
        assert!(p[3] > 0.0 && p[3] < 0.01);
        assert!((p[3] - 0.009_007_721_440_802_040_8).abs() < 1e-12);
        let boundary = 5.9 / 27.0;
        assert!((r.objective - boundary).abs() / boundary < 0.01);
    }

    #[test]
    fn one_zero_routes_to_shared_formulas() {
        let r = solve([0.0, 1.0, 2.0, 2.5]);
        assert_eq!(r.case_label, "2x2-zero-2d");
        assert_alloc(&r, &[1.0 / 3.0, 7.0 / 23.25, 6.0 / 23.25, 2.5 / 23.25], 1e-15);
    }

    #[test]
    fn errors() {
        assert!(matches!(
            solve_22(&VCoefficients::new([0.0, 0.0, 1.0, 2.0]).unwrap()),
            Err(DesignError::Degenerate(_))
        ));
        assert!(matches!(VCoefficients::new([-1.0, 1.0, 1.0, 1.0]), Err(DesignError::Domain(_))));
    }

    #[test]
    fn kkt_residual_behaviour() {
        let v = [1.0, 2.0, 3.0, 4.0];
        assert!(kkt_residual(&v, &Allocation::uniform(4)).unwrap() > 0.0);
        let p = Allocation::new(vec![0.5, 0.5, 0.0, 0.0]).unwrap();
        assert_eq!(kkt_residual(&v, &p), Err(DesignError::BoundaryAllocation(2)));
    }

    #[test]
    fn input_order_is_restored() {
        let r = solve([4.0, 1.0, 3.0, 2.0]);
        let s = solve([1.0, 2.0, 3.0, 4.0]);
        let (a, b) = (r.allocation.as_slice(), s.allocation.as_slice());
        assert_eq!([a[1], a[3], a[2], a[0]], [b[0], b[1], b[2], b[3]]);
    }
}
