//! Design problems, allocations and design-matrix builders.

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use crate::error::{DesignError, Result};
use crate::weight::WeightFunction;

/// Tolerance on `sum(p) = 1` for a valid allocation.
pub const SIMPLEX_TOL: f64 = 1e-12;

/// Resolution used to decide whether two design points coincide.
const ROW_ROUNDING: f64 = 1e-12;

/// A locally optimal design problem: candidate points, assumed parameters and
/// the information weights they induce.
#[derive(Debug, Clone, PartialEq)]
pub struct DesignProblem {
    x: DMatrix<f64>,
    beta: Vec<f64>,
    weight_fn: Option<WeightFunction>,
    w: Vec<f64>,
}

impl DesignProblem {
    /// Builds a problem with `w_i = nu(x_i' beta)`.
    pub fn new(x: DMatrix<f64>, beta: Vec<f64>, weight_fn: WeightFunction) -> Result<Self> {
        if beta.len() != x.ncols() {
            return Err(DesignError::DimensionMismatch {
                what: "beta length vs. columns of X",
                expected: x.ncols(),
                actual: beta.len(),
            });
        }
        if beta.iter().any(|b| !b.is_finite()) {
            return Err(DesignError::NonFinite("beta"));
        }
        validate_matrix(&x)?;
        let mut w = Vec::with_capacity(x.nrows());
        for (i, row) in x.row_iter().enumerate() {
            let eta: f64 = row.iter().zip(&beta).map(|(a, b)| a * b).sum();
            let wi = weight_fn
                .eval(eta)
                .map_err(|_| DesignError::BadWeight { index: i, eta })?;
            w.push(wi);
        }
        Ok(Self { x, beta, weight_fn: Some(weight_fn), w })
    }

    /// Builds a problem from weights given directly (no `beta`, no link).
    pub fn with_weights(x: DMatrix<f64>, w: Vec<f64>) -> Result<Self> {
        if w.len() != x.nrows() {
            return Err(DesignError::DimensionMismatch {
                what: "weights vs. rows of X",
                expected: x.nrows(),
                actual: w.len(),
            });
        }
        validate_matrix(&x)?;
        if let Some(i) = w.iter().position(|&v| !(v.is_finite() && v > 0.0)) {
            return Err(DesignError::BadWeight { index: i, eta: f64::NAN });
        }
        Ok(Self { x, beta: Vec::new(), weight_fn: None, w })
    }

    pub fn n(&self) -> usize {
        self.x.nrows()
    }

    pub fn d(&self) -> usize {
        self.x.ncols()
    }

    pub fn x(&self) -> &DMatrix<f64> {
        &self.x
    }

    /// Empty when the problem was built from explicit weights.
    pub fn beta(&self) -> &[f64] {
        &self.beta
    }

    pub fn weight_fn(&self) -> Option<&WeightFunction> {
        self.weight_fn.as_ref()
    }

    pub fn weights(&self) -> &[f64] {
        &self.w
    }

    /// True when the first column of `X` is all ones.
    pub fn has_intercept(&self) -> bool {
        self.d() > 0 && self.x.column(0).iter().all(|&v| v == 1.0)
    }

    /// Reorders points: row `k` of the result is row `perm[k]` of `self`.
    pub fn permuted(&self, perm: &[usize]) -> Result<Self> {
        check_permutation(perm, self.n())?;
        let x = DMatrix::from_fn(self.n(), self.d(), |r, c| self.x[(perm[r], c)]);
        let w = perm.iter().map(|&i| self.w[i]).collect();
        Ok(Self { x, beta: self.beta.clone(), weight_fn: self.weight_fn.clone(), w })
    }
}

fn validate_matrix(x: &DMatrix<f64>) -> Result<()> {
    if x.iter().any(|v| !v.is_finite()) {
        return Err(DesignError::NonFinite("design matrix"));
    }
    let (n, d) = x.shape();
    if d == 0 || n < d {
        return Err(DesignError::TooFewPoints { n, d });
    }
    let keys: Vec<Vec<f64>> = x
        .row_iter()
        .map(|r| r.iter().map(|v| (v / ROW_ROUNDING).round()).collect())
        .collect();
    for i in 0..n {
        for j in (i + 1)..n {
            if keys[i] == keys[j] {
                return Err(DesignError::DuplicateRows(i, j));
            }
        }
    }
    Ok(())
}

pub(crate) fn check_permutation(perm: &[usize], n: usize) -> Result<()> {
    let mut seen = vec![false; n];
    if perm.len() != n {
        return Err(DesignError::DimensionMismatch { what: "permutation", expected: n, actual: perm.len() });
    }
    for &i in perm {
        if i >= n || seen[i] {
            return Err(DesignError::Domain("not a permutation".into()));
        }
        seen[i] = true;
    }
    Ok(())
}

/// A probability vector over the design points.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(transparent)]
pub struct Allocation(Vec<f64>);

impl Allocation {
    pub fn new(p: Vec<f64>) -> Result<Self> {
        if p.is_empty() {
            return Err(DesignError::Domain("empty allocation".into()));
        }
        if p.iter().any(|v| !v.is_finite()) {
            return Err(DesignError::NonFinite("allocation"));
        }
        if let Some(v) = p.iter().find(|&&v| v < 0.0) {
            return Err(DesignError::Domain(format!("negative allocation entry {v}")));
        }
        let total: f64 = p.iter().sum();
        if (total - 1.0).abs() > SIMPLEX_TOL {
            return Err(DesignError::Domain(format!("allocation sums to {total}, not 1")));
        }
        Ok(Self(p))
    }

    pub fn uniform(n: usize) -> Self {
        Self(vec![1.0 / n as f64; n])
    }

    /// Clamps tiny negative round-off to zero and rescales to unit sum.
    pub(crate) fn normalized(mut p: Vec<f64>) -> Result<Self> {
        for v in p.iter_mut() {
            if *v < 0.0 && *v > -1e-14 {
                *v = 0.0;
            }
        }
        let total: f64 = p.iter().sum();
        if total.is_finite() && total > 0.0 {
            p.iter_mut().for_each(|v| *v /= total);
        }
        Self::new(p)
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.0
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn into_vec(self) -> Vec<f64> {
        self.0
    }

    /// Entry `k` of the result is entry `perm[k]` of `self`.
    pub fn permuted(&self, perm: &[usize]) -> Result<Self> {
        check_permutation(perm, self.len())?;
        Ok(Self(perm.iter().map(|&i| self.0[i]).collect()))
    }
}

impl std::ops::Index<usize> for Allocation {
    type Output = f64;
    fn index(&self, i: usize) -> &f64 {
        &self.0[i]
    }
}

/// All `2^k` combinations of `k` two-level factors coded as +1/-1.
///
/// The first factor varies slowest and `+1` comes first, so `k = 2` gives
/// `(1,1), (1,-1), (-1,1), (-1,-1)`.
pub fn full_factorial_points(k: usize) -> Vec<Vec<f64>> {
    (0..1usize << k)
        .map(|idx| {
            (0..k)
                .map(|j| if (idx >> (k - 1 - j)) & 1 == 0 { 1.0 } else { -1.0 })
                .collect()
        })
        .collect()
}

/// Intercept plus one column per factor.
pub fn main_effects_terms(k: usize) -> Vec<Vec<usize>> {
    std::iter::once(Vec::new()).chain((0..k).map(|j| vec![j])).collect()
}

/// Every interaction of `k` factors except the order-`k` one, intercept
/// first, ordered by interaction order then lexicographically.
pub fn saturated_factorial_terms(k: usize) -> Vec<Vec<usize>> {
    let mut terms: Vec<Vec<usize>> = (0..(1usize << k) - 1)
        .map(|mask| (0..k).filter(|j| mask & (1 << j) != 0).collect())
        .collect();
    terms.sort_by(|a, b| a.len().cmp(&b.len()).then_with(|| a.cmp(b)));
    terms
}

/// Builds `X` whose column `c` is the product of the factors in `terms[c]`
/// (an empty term is the intercept).
pub fn model_matrix(points: &[Vec<f64>], terms: &[Vec<usize>]) -> Result<DMatrix<f64>> {
    let k = points.first().map_or(0, Vec::len);
    for p in points {
        if p.len() != k {
            return Err(DesignError::DimensionMismatch { what: "factor count", expected: k, actual: p.len() });
        }
    }
    if let Some(&bad) = terms.iter().flatten().find(|&&j| j >= k) {
        return Err(DesignError::Domain(format!("model term uses factor {bad}, only {k} factors")));
    }
    Ok(DMatrix::from_fn(points.len(), terms.len(), |r, c| {
        terms[c].iter().map(|&j| points[r][j]).product()
    }))
}

/// The 4x3 matrix of the 2x2 main-effects model.
pub fn two_by_two_matrix() -> DMatrix<f64> {
    model_matrix(&full_factorial_points(2), &main_effects_terms(2)).expect("static shape")
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn two_by_two_layout() {
        let x = two_by_two_matrix();
        let expected = DMatrix::from_row_slice(
            4,
            3,
            &[1.0, 1.0, 1.0, 1.0, 1.0, -1.0, 1.0, -1.0, 1.0, 1.0, -1.0, -1.0],
        );
        assert_eq!(x, expected);
    }

    #[test]
    fn saturated_terms_shape() {
        let t = saturated_factorial_terms(3);
        assert_eq!(t.len(), 7);
        assert_eq!(t[0], Vec::<usize>::new());
        assert_eq!(t[1..4], [vec![0], vec![1], vec![2]]);
        assert!(t.iter().all(|s| s.len() < 3));
    }

    #[test]
    fn rejects_duplicates_and_short_designs() {
        let x = DMatrix::from_row_slice(3, 2, &[1.0, 0.0, 1.0, 1.0, 1.0, 1.0 + 1e-14]);
        assert_eq!(
            DesignProblem::with_weights(x, vec![1.0; 3]),
            Err(DesignError::DuplicateRows(1, 2))
        );
        let x = DMatrix::from_row_slice(1, 2, &[1.0, 0.0]);
        assert!(matches!(
            DesignProblem::with_weights(x, vec![1.0]),
            Err(DesignError::TooFewPoints { .. })
        ));
    }

    #[test]
    fn weights_follow_linear_predictor() {
        let p = DesignProblem::new(two_by_two_matrix(), vec![0.0, 1.0, 1.0], WeightFunction::LogPoisson)
            .unwrap();
        let w = p.weights();
        assert!((w[0] - 2f64.exp()).abs() < 1e-15);
        assert_eq!(w[1], 1.0);
        assert_eq!(w[2], 1.0);
        assert!((w[3] - (-2f64).exp()).abs() < 1e-15);
        assert!(p.has_intercept());
    }

    #[test]
    fn beta_length_is_checked() {
        let r = DesignProblem::new(two_by_two_matrix(), vec![0.0, 1.0], WeightFunction::Logit);
        assert!(matches!(r, Err(DesignError::DimensionMismatch { .. })));
    }

    #[test]
    fn allocation_validation() {
        assert!(Allocation::new(vec![0.5, 0.5]).is_ok());
        assert!(Allocation::new(vec![0.6, 0.5]).is_err());
        assert!(Allocation::new(vec![1.5, -0.5]).is_err());
        let a = Allocation::normalized(vec![2.0, 2.0, -1e-16]).unwrap();
        assert_eq!(a.as_slice(), &[0.5, 0.5, 0.0]);
    }
}
