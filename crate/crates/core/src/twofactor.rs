//! Four distinct design points of a two-factor main-effects model.
//!
//! `|X'WX| = w1 w2 w3 w4 (u1 p2 p3 p4 + p1 u2 p3 p4 + p1 p2 u3 p4 + p1 p2 p3 u4)`
//! with `u_j = |X[-j]|^2 / w_j`, where `X[-j]` drops row `j`. The zero
//! pattern of the minors decides the case: all zero (rank 2, every
//! allocation is optimal), exactly one zero (one point is a combination of
//! two others), or none (same form as the 2x2 model).

use crate::design::{Allocation, DesignProblem};
use crate::error::{DesignError, Result};
use crate::linalg;
use crate::objective::leave_one_out_polynomial;
use crate::report::SolveReport;
use crate::solver22::{one_zero_case, solve_22, sort4, VCoefficients};

/// A minor is structurally zero below this fraction of the largest |minor|.
pub const MINOR_ZERO_TOL: f64 = 1e-12;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum RankCase {
    Rank2,
    Rank3OneZero,
    Rank3General,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct UCoefficients {
    /// `u_j` in input order; structural zeros are exactly 0.
    pub u: [f64; 4],
    /// Signed 3x3 minors `|X[-j]|`.
    pub minors: [f64; 4],
    pub rank_case: RankCase,
}

impl UCoefficients {
    /// Ascending `u` and the permutation back to input order.
    pub fn sorted(&self) -> ([f64; 4], [usize; 4]) {
        sort4(&self.u)
    }
}

pub fn compute_u(problem: &DesignProblem) -> Result<UCoefficients> {
    if problem.n() != 4 || problem.d() != 3 {
        return Err(DesignError::Unsupported(format!(
            "two-factor solver needs a 4x3 design matrix, got {}x{}",
            problem.n(),
            problem.d()
        )));
    }
    if !problem.has_intercept() {
        return Err(DesignError::Domain("first column of X must be all ones".into()));
    }
    let m = linalg::leave_one_out_minors(problem.x());
    let minors = [m[0], m[1], m[2], m[3]];
    let scale = minors.iter().fold(0.0f64, |a, v| a.max(v.abs()));
    let w = problem.weights();
    let mut u = [0.0; 4];
    let mut zeros = 0;
    for j in 0..4 {
        if scale == 0.0 || minors[j].abs() <= MINOR_ZERO_TOL * scale {
            zeros += 1;
        } else {
            u[j] = minors[j] * minors[j] / w[j];
        }
    }
    let rank_case = match zeros {
        0 => RankCase::Rank3General,
        1 => RankCase::Rank3OneZero,
        4 => RankCase::Rank2,
        k => {
            return Err(DesignError::Numerical(format!(
                "{k} vanishing minors is impossible for distinct points with an intercept"
            )))
        }
    };
    Ok(UCoefficients { u, minors, rank_case })
}

/// D-optimal allocation on the four points of `problem`.
///
/// The reported objective is `|X'WX|`; `reduced_objective` in the
/// diagnostics is the bracketed polynomial in `u`.
pub fn solve_fourpoint(problem: &DesignProblem) -> Result<SolveReport> {
    let uc = compute_u(problem)?;
    let w = problem.weights();
    let wprod: f64 = w.iter().product();

    let mut report = match uc.rank_case {
        RankCase::Rank2 => {
            return Ok(SolveReport::new(Allocation::uniform(4), 0.0, "twofactor-degenerate-rank2"));
        }
        RankCase::Rank3OneZero => {
            let (sorted, perm) = uc.sorted();
            let max = sorted[3];
            let un = sorted.map(|x| x / max);
            let (p, case) = one_zero_case(&un);
            SolveReport::new(Allocation::new(p.to_vec())?, 0.0, format!("twofactor-{case}"))
                .unsort(&perm)
        }
        RankCase::Rank3General => {
            let mut r = solve_22(&VCoefficients::new(uc.u)?)?;
            r.case_label = format!("twofactor-3-{}", r.case_label.trim_start_matches("2x2-"));
            r
        }
    };
    let reduced = leave_one_out_polynomial(&uc.u, report.allocation.as_slice());
    report.objective = wprod * reduced;
    report.insert("reduced_objective", reduced);
    for (j, &uj) in uc.u.iter().enumerate() {
        report.insert(&format!("u{}", j + 1), uj);
    }
    Ok(report)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::design::two_by_two_matrix;
    use nalgebra::DMatrix;

    #[test]
    fn two_by_two_minors() {
        let w = vec![0.1, 0.2, 0.3, 0.4];
        let p = DesignProblem::with_weights(two_by_two_matrix(), w.clone()).unwrap();
        let uc = compute_u(&p).unwrap();
        assert_eq!(uc.rank_case, RankCase::Rank3General);
        for j in 0..4 {
            assert!((uc.minors[j].abs() - 4.0).abs() < 1e-14);
            assert!((uc.u[j] - 16.0 / w[j]).abs() < 1e-12);
        }
    }

    #[test]
    fn rectangle_corner_minors() {
        let (a1, b1, a2, b2) = (-1.0, 1.0, -1.0, 1.0);
        let x = DMatrix::from_row_slice(4, 3, &[1.0, b1, b2, 1.0, b1, a2, 1.0, a1, b2, 1.0, a1, a2]);
        let uc = compute_u(&DesignProblem::with_weights(x, vec![1.0; 4]).unwrap()).unwrap();
        let area = (b1 - a1) * (b2 - a2);
        // |X[1,2,3]| = |X[1,2,4]| = -area, |X[1,3,4]| = |X[2,3,4]| = area
        assert!((uc.minors[3] + area).abs() < 1e-14);
        assert!((uc.minors[2] + area).abs() < 1e-14);
        assert!((uc.minors[1] - area).abs() < 1e-14);
        assert!((uc.minors[0] - area).abs() < 1e-14);
    }

    #[test]
    fn collinear_fourth_point_zeroes_u1() {
        // row4 = 0.3 row2 + 0.7 row3
        let (r2, r3) = ([1.0, 2.0, -1.0], [1.0, -1.0, 3.0]);
        let r4: Vec<f64> = r2.iter().zip(&r3).map(|(a, b)| 0.3 * a + 0.7 * b).collect();
        let x = DMatrix::from_row_slice(
            4,
            3,
            &[1.0, 0.0, 0.0, r2[0], r2[1], r2[2], r3[0], r3[1], r3[2], r4[0], r4[1], r4[2]],
        );
        let uc = compute_u(&DesignProblem::with_weights(x, vec![1.0; 4]).unwrap()).unwrap();
        assert_eq!(uc.rank_case, RankCase::Rank3OneZero);
        assert_eq!(uc.u[0], 0.0);
        assert!(uc.u[1..].iter().all(|&u| u > 0.0));
    }

    #[test]
    fn rank_two_is_uniform() {
        let x = DMatrix::from_row_slice(4, 3, &[1.0, 0.0, 1.0, 1.0, 1.0, 3.0, 1.0, 2.0, 5.0, 1.0, 4.0, 9.0]);
        let r = solve_fourpoint(&DesignProblem::with_weights(x, vec![1.0; 4]).unwrap()).unwrap();
        assert_eq!(r.case_label, "twofactor-degenerate-rank2");
        assert_eq!(r.allocation, Allocation::uniform(4));
        assert_eq!(r.objective, 0.0);
    }

    #[test]
    fn one_zero_subcases() {
        let t = 1.0 / 3.0;
        let cases: [([f64; 4], &str, [f64; 4]); 3] = [
            ([0.0, 1.0, 1.0, 3.0], "2a", [t, t, t, 0.0]),
            ([0.0, 1.0, 1.0, 1.0], "2b", [t, 2.0 / 9.0, 2.0 / 9.0, 2.0 / 9.0]),
            ([0.0, 1.0, 2.0, 2.5], "2d", [t, 7.0 / 23.25, 6.0 / 23.25, 2.5 / 23.25]),
        ];
        for (u, tag, expected) in cases {
            let (p, case) = one_zero_case(&u);
            assert_eq!(case, tag);
            for (a, b) in p.iter().zip(&expected) {
                assert!((a - b).abs() < 1e-15, "{u:?}: {p:?}");
            }
        }
        let (p, case) = one_zero_case(&[0.0, 1.0, 3.0, 3.0]);
        assert_eq!(case, "2c");
        assert!((p.iter().sum::<f64>() - 1.0).abs() < 1e-15);
        assert_eq!(p[2], p[3]);
    }

    #[test]
    fn non_intercept_or_wrong_shape_rejected() {
        let x = DMatrix::from_row_slice(4, 3, &[2.0, 1.0, 1.0, 1.0, 1.0, -1.0, 1.0, -1.0, 1.0, 1.0, -1.0, -1.0]);
        assert!(compute_u(&DesignProblem::with_weights(x, vec![1.0; 4]).unwrap()).is_err());
    }
}
