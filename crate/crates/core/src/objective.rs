//! The D-optimality objective `|X' W X|` and its homogeneous-polynomial
//! expansion over `d`-subsets of design points.

use crate::design::{Allocation, DesignProblem};
use crate::error::{DesignError, Result};
use crate::linalg;

/// Default cap on the number of subsets enumerated by [`objective_expansion`]
/// (`C(20, 10)`, the largest count reachable with 20 points).
pub const DEFAULT_EXPANSION_LIMIT: u128 = 184_756;

fn check_len(problem: &DesignProblem, p: &Allocation) -> Result<()> {
    if p.len() != problem.n() {
        return Err(DesignError::DimensionMismatch {
            what: "allocation length vs. design points",
            expected: problem.n(),
            actual: p.len(),
        });
    }
    Ok(())
}

/// `det(X' W X)` with `W = diag(p_i w_i)`, by pivoted elimination.
///
/// Exactly zero when fewer than `d` points carry mass; negative round-off on
/// a singular information matrix is clamped to zero.
pub fn objective_det(problem: &DesignProblem, p: &Allocation) -> Result<f64> {
    check_len(problem, p)?;
    let support = p.as_slice().iter().filter(|&&v| v > 0.0).count();
    if support < problem.d() {
        return Ok(0.0);
    }
    let q: Vec<f64> = p.as_slice().iter().zip(problem.weights()).map(|(a, b)| a * b).collect();
    let m = linalg::information_matrix(problem.x(), &q);
    Ok(linalg::det(&m).max(0.0))
}

/// `ln det(X' W X)`; `-inf` when the information matrix is singular.
///
/// Stays finite where [`objective_det`] would under- or overflow.
pub fn ln_objective_det(problem: &DesignProblem, p: &Allocation) -> Result<f64> {
    check_len(problem, p)?;
    let support = p.as_slice().iter().filter(|&&v| v > 0.0).count();
    if support < problem.d() {
        return Ok(f64::NEG_INFINITY);
    }
    let q: Vec<f64> = p.as_slice().iter().zip(problem.weights()).map(|(a, b)| a * b).collect();
    Ok(linalg::ln_abs_det(linalg::information_matrix(problem.x(), &q)))
}

#[derive(Debug, Clone, PartialEq)]
pub struct ExpansionTerm {
    pub indices: Vec<usize>,
    pub coefficient: f64,
}

/// Every `d`-subset `S` of points with coefficient `|X[S]|^2 prod_{i in S} w_i`.
pub fn objective_expansion(problem: &DesignProblem) -> Result<Vec<ExpansionTerm>> {
    objective_expansion_limited(problem, DEFAULT_EXPANSION_LIMIT)
}

pub fn objective_expansion_limited(problem: &DesignProblem, limit: u128) -> Result<Vec<ExpansionTerm>> {
    let (n, d) = (problem.n(), problem.d());
    let subsets = binomial(n, d);
    if subsets > limit {
        return Err(DesignError::ExpansionTooLarge { subsets, limit });
    }
    let w = problem.weights();
    let mut out = Vec::with_capacity(subsets as usize);
    let mut idx: Vec<usize> = (0..d).collect();
    loop {
        let minor = linalg::det(&linalg::select_rows(problem.x(), &idx));
        let coefficient = minor * minor * idx.iter().map(|&i| w[i]).product::<f64>();
        out.push(ExpansionTerm { indices: idx.clone(), coefficient });
        if !next_combination(&mut idx, n) {
            break;
        }
    }
    Ok(out)
}

/// `sum_S coeff_S prod_{i in S} p_i`.
pub fn evaluate_expansion(terms: &[ExpansionTerm], p: &Allocation) -> f64 {
    terms
        .iter()
        .map(|t| t.coefficient * t.indices.iter().map(|&i| p[i]).product::<f64>())
        .sum()
}

/// `sum_i v_i prod_{j != i} p_j`, the reduced objective of the four-point and
/// saturated problems.
pub fn leave_one_out_polynomial(v: &[f64], p: &[f64]) -> f64 {
    let n = v.len();
    debug_assert_eq!(n, p.len());
    // prefix[i] = p_0 ... p_{i-1}, suffix[i] = p_{i+1} ... p_{n-1}
    let mut prefix = vec![1.0; n];
    for i in 1..n {
        prefix[i] = prefix[i - 1] * p[i - 1];
    }
    let mut total = 0.0;
    let mut suffix = 1.0;
    for i in (0..n).rev() {
        total += v[i] * prefix[i] * suffix;
        suffix *= p[i];
    }
    total
}

fn binomial(n: usize, k: usize) -> u128 {
    if k > n {
        return 0;
    }
    let k = k.min(n - k);
    (0..k).fold(1u128, |acc, i| acc * (n - i) as u128 / (i + 1) as u128)
}

fn next_combination(idx: &mut [usize], n: usize) -> bool {
    let k = idx.len();
    for pos in (0..k).rev() {
        if idx[pos] < n - k + pos {
            idx[pos] += 1;
            for later in pos + 1..k {
                idx[later] = idx[later - 1] + 1;
            }
            return true;
        }
    }
    false
}
