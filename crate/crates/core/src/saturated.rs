//! `n` design points with `n - 1` parameters.
//!
//! `|X'WX| = f(p) = sum_j v_j prod_{i != j} p_i` with
//! `v_j = |X[-j]|^2 prod_{i != j} w_i`. For sorted `v`:
//!
//! * if `v_n >= sum_{j<n} v_j` the optimum is `1/(n-1)` on the first `n - 1`
//!   points and nothing on the last;
//! * otherwise the interior optimum satisfies `p_i (1/(n-1) - p_i) / v_i = mu / (4 (n-1)^2)`,
//!   giving `p_i = (1 +- sqrt(1 - mu v_i)) / (2 (n-1))`, with at most the last
//!   point on the minus branch. `mu` is the root of `h1(mu) = n - 2` or
//!   `h2(mu) = n - 2` depending on the sign of `sum_{j<n} sqrt(1 - v_j / v_n) - (n - 2)`.
//!
//! Points whose `v` vanishes (their removal leaves a singular matrix) get
//! exactly `1/(n-1)`.
//!
//! All root finding runs on `v / v_n`, so `mu` is found in `(0, 1]` and
//! rescaled on output; the `v` themselves are formed in log space, which
//! keeps `2^k` full-factorial problems up to `k = 6` representable.

use crate::design::{Allocation, DesignProblem};
use crate::error::{DesignError, Result};
use crate::linalg;
use crate::objective::leave_one_out_polynomial;
use crate::report::SolveReport;

/// Minors below this fraction of the largest |minor| are structural zeros.
pub const MINOR_ZERO_TOL: f64 = 1e-12;

/// Relative slack on the `v_n >= sum_{j<n} v_j` test.
pub const BOUNDARY_TOL: f64 = 1e-12;

const MAX_BISECTIONS: usize = 200;

#[derive(Debug, Clone, PartialEq)]
pub struct SaturatedProblem {
    /// Ascending, divided by the largest entry (so the last entry is 1).
    v: Vec<f64>,
    /// Sorted position `k` holds input index `perm[k]`.
    perm: Vec<usize>,
    /// Number of zero entries (the leading ones after sorting).
    l: usize,
    /// `ln max_j v_j`.
    ln_scale: f64,
}

impl SaturatedProblem {
    pub fn from_v(v: &[f64]) -> Result<Self> {
        if v.iter().any(|x| !x.is_finite()) {
            return Err(DesignError::NonFinite("v coefficients"));
        }
        if let Some(x) = v.iter().find(|&&x| x < 0.0) {
            return Err(DesignError::Domain(format!("negative v coefficient {x}")));
        }
        let ln_v: Vec<f64> = v.iter().map(|x| x.ln()).collect();
        Self::from_ln_v(&ln_v)
    }

    /// Builds from `ln v_j` (`-inf` for a zero entry).
    pub fn from_ln_v(ln_v: &[f64]) -> Result<Self> {
        let n = ln_v.len();
        if n < 3 {
            return Err(DesignError::TooFewPoints { n, d: n.saturating_sub(1) });
        }
        if ln_v.iter().any(|x| x.is_nan() || *x == f64::INFINITY) {
            return Err(DesignError::NonFinite("v coefficients"));
        }
        let ln_scale = ln_v.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
        if ln_scale == f64::NEG_INFINITY {
            return Err(DesignError::Degenerate("all v coefficients are zero".into()));
        }
        let mut perm: Vec<usize> = (0..n).collect();
        perm.sort_by(|&a, &b| ln_v[a].total_cmp(&ln_v[b]).then(a.cmp(&b)));
        let zero_cut = MINOR_ZERO_TOL.ln() * 2.0;
        let v: Vec<f64> = perm
            .iter()
            .map(|&i| {
                let rel = ln_v[i] - ln_scale;
                if rel < zero_cut {
                    0.0
                } else {
                    rel.exp()
                }
            })
            .collect();
        let l = v.iter().take_while(|&&x| x == 0.0).count();
        if l > n - 3 {
            return Err(DesignError::RankDeficient { rank: n - l, expected: n - 1 });
        }
        Ok(Self { v, perm, l, ln_scale })
    }

    pub fn n(&self) -> usize {
        self.v.len()
    }

    pub fn zero_count(&self) -> usize {
        self.l
    }

    /// Normalized ascending coefficients (largest = 1).
    pub fn normalized_v(&self) -> &[f64] {
        &self.v
    }

    pub fn perm(&self) -> &[usize] {
        &self.perm
    }

    pub fn ln_scale(&self) -> f64 {
        self.ln_scale
    }

    /// Ascending coefficients in original units.
    pub fn sorted_v(&self) -> Vec<f64> {
        let s = self.ln_scale.exp();
        self.v.iter().map(|x| x * s).collect()
    }

    /// True when the dichotomy selects the minus branch for the last point.
    pub fn uses_h2(&self) -> bool {
        let n = self.n();
        let sum: f64 = self.v[..n - 1].iter().map(|x| (1.0 - x).sqrt()).sum();
        sum > (n - 2) as f64
    }

    fn is_boundary(&self) -> bool {
        let n = self.n();
        let rest: f64 = self.v[..n - 1].iter().sum();
        self.v[n - 1] >= rest * (1.0 - BOUNDARY_TOL)
    }
}

/// Reduces an `n x (n-1)` problem to `v` form.
pub fn compute_v(problem: &DesignProblem) -> Result<SaturatedProblem> {
    let (n, d) = (problem.n(), problem.d());
    if n != d + 1 {
        return Err(DesignError::Unsupported(format!(
            "saturated solver needs n = d + 1, got n = {n}, d = {d}"
        )));
    }
    let ln_minor = linalg::ln_abs_leave_one_out_minors(problem.x());
    let top = ln_minor.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    if top == f64::NEG_INFINITY {
        return Err(DesignError::RankDeficient { rank: linalg::rank(problem.x(), 1e-12), expected: d });
    }
    let ln_w: Vec<f64> = problem.weights().iter().map(|w| w.ln()).collect();
    let ln_w_total: f64 = ln_w.iter().sum();
    let ln_v: Vec<f64> = (0..n)
        .map(|j| {
            if ln_minor[j] - top < MINOR_ZERO_TOL.ln() {
                f64::NEG_INFINITY
            } else {
                2.0 * ln_minor[j] + ln_w_total - ln_w[j]
            }
        })
        .collect();
    SaturatedProblem::from_ln_v(&ln_v)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Branch {
    H1,
    H2,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MuSolve {
    /// Root in the units of the supplied `v`.
    pub mu: f64,
    /// Root for `v / v_n`, in `(0, 1]`.
    pub mu_normalized: f64,
    pub branch: Branch,
    pub iterations: usize,
    /// `|h(mu) - (n - 2)|`.
    pub residual: f64,
}

fn check_mu(mu: f64, v: &[f64]) -> Result<f64> {
    let vn = v.iter().cloned().fold(0.0, f64::max);
    if !mu.is_finite() || mu < 0.0 || mu * vn > 1.0 + 1e-15 {
        return Err(DesignError::Domain(format!("mu = {mu} outside [0, 1/v_n]")));
    }
    Ok(vn)
}

fn root_term(mu: f64, v: f64) -> f64 {
    (1.0 - mu * v).max(0.0).sqrt()
}

/// `h1(mu) = sum_j sqrt(1 - mu v_j)`.
pub fn h1_eval(mu: f64, v: &[f64]) -> Result<f64> {
    check_mu(mu, v)?;
    Ok(v.iter().map(|&x| root_term(mu, x)).sum())
}

/// `h2(mu) = sum_{j<n} sqrt(1 - mu v_j) - sqrt(1 - mu v_n)`, `v` ascending.
pub fn h2_eval(mu: f64, v: &[f64]) -> Result<f64> {
    check_mu(mu, v)?;
    let (last, rest) = v.split_last().ok_or(DesignError::Domain("empty v".into()))?;
    Ok(rest.iter().map(|&x| root_term(mu, x)).sum::<f64>() - root_term(mu, *last))
}

/// Bisection for an increasing `g` with `g(lo) < 0 <= g(hi)`, down to
/// adjacent doubles. Returns the endpoint with the smaller |g| and the
/// iteration count.
fn bisect_increasing(g: impl Fn(f64) -> f64, mut lo: f64, mut hi: f64) -> (f64, usize) {
    let mut iterations = 0;
    while iterations < MAX_BISECTIONS {
        let mid = 0.5 * (lo + hi);
        if mid <= lo || mid >= hi {
            break;
        }
        iterations += 1;
        if g(mid) < 0.0 {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    let best = if g(lo).abs() <= g(hi).abs() { lo } else { hi };
    (best, iterations)
}

/// Solves for `mu` on the branch selected by the dichotomy.
pub fn root_mu(sp: &SaturatedProblem) -> Result<MuSolve> {
    if sp.is_boundary() {
        return Err(DesignError::Domain(
            "mu is only defined when v_n < sum of the other coefficients".into(),
        ));
    }
    let v = &sp.v;
    let n = v.len();
    let target = (n - 2) as f64;
    let h1 = |mu: f64| v.iter().map(|&x| root_term(mu, x)).sum::<f64>();
    let h2 = |mu: f64| v[..n - 1].iter().map(|&x| root_term(mu, x)).sum::<f64>() - root_term(mu, 1.0);

    let (mu, iterations, branch, residual) = if !sp.uses_h2() {
        // h1 strictly decreasing from n at 0 to at most n - 2 at 1
        let (mu, it) = bisect_increasing(|m| target - h1(m), 0.0, 1.0);
        (mu, it, Branch::H1, (h1(mu) - target).abs())
    } else {
        // h2' has the sign of g2, which increases from negative at 0 to 1 at mu -> 1
        let g2 = |mu: f64| {
            1.0 - v[..n - 1]
                .iter()
                .map(|&x| x * ((1.0 - mu) / (1.0 - mu * x)).sqrt())
                .sum::<f64>()
        };
        let upper = 1.0 - f64::EPSILON;
        if !(g2(0.0) < 0.0 && g2(upper) > 0.0) {
            return Err(DesignError::Numerical(format!(
                "stationary point of h2 not bracketed: g2(0) = {}, g2(1-) = {}",
                g2(0.0),
                g2(upper)
            )));
        }
        let (mu_star, it1) = bisect_increasing(g2, 0.0, upper);
        if !(h2(mu_star) < target && h2(1.0) > target) {
            return Err(DesignError::Numerical(format!(
                "h2 root not bracketed on [{mu_star}, 1]: h2 = {} .. {}",
                h2(mu_star),
                h2(1.0)
            )));
        }
        let (mu, it2) = bisect_increasing(|m| h2(m) - target, mu_star, 1.0);
        (mu, it1 + it2, Branch::H2, (h2(mu) - target).abs())
    };
    Ok(MuSolve {
        mu: (mu.ln() - sp.ln_scale).exp(),
        mu_normalized: mu,
        branch,
        iterations,
        residual,
    })
}

/// D-optimal allocation for a saturated problem, in input order.
///
/// `objective` is `f(p)` in the units of the supplied `v` (equal to
/// `|X'WX|` when built by [`compute_v`]); `ln_objective` is always finite.
pub fn solve_saturated(sp: &SaturatedProblem) -> Result<SolveReport> {
    let v = &sp.v;
    let n = v.len();
    let m1 = (n - 1) as f64;

    if sp.is_boundary() {
        let mut p = vec![1.0 / m1; n];
        p[n - 1] = 0.0;
        let ln_f = sp.ln_scale - m1 * m1.ln();
        let report = SolveReport::new(Allocation::normalized(p)?, ln_f.exp(), "saturated-boundary")
            .with("ln_objective", ln_f);
        return Ok(report.unsort(&sp.perm));
    }

    let mu = root_mu(sp)?;
    let mut p: Vec<f64> = v
        .iter()
        .enumerate()
        .map(|(i, &x)| if i < sp.l { 1.0 / m1 } else { (1.0 + root_term(mu.mu_normalized, x)) / (2.0 * m1) })
        .collect();
    if mu.branch == Branch::H2 {
        p[n - 1] = (1.0 - root_term(mu.mu_normalized, v[n - 1])) / (2.0 * m1);
    }
    let alloc = Allocation::normalized(p)?;
    let p = alloc.as_slice();

    let f_direct = leave_one_out_polynomial(v, p);
    let prod: f64 = p.iter().product();
    // f = prod(p) [v_i / p_i + 4 (n-1)^2 p_i / mu] for any i; use the largest p
    let f_stationary = prod * (v[0] / p[0] + 4.0 * m1 * m1 * p[0] / mu.mu_normalized);
    let lambda = 4.0 * m1 * m1 * prod / mu.mu_normalized;
    let ln_f = f_direct.ln() + sp.ln_scale;

    let label = match mu.branch {
        Branch::H1 => "saturated-h1",
        Branch::H2 => "saturated-h2",
    };
    let mut report = SolveReport::new(alloc.clone(), ln_f.exp(), label)
        .with("mu", mu.mu)
        .with("mu_normalized", mu.mu_normalized)
        .with("h_residual", mu.residual)
        .with("iterations", mu.iterations as f64)
        .with("ln_objective", ln_f)
        .with("lambda", (lambda.ln() + sp.ln_scale).exp())
        .with("objective_stationary", (f_stationary.ln() + sp.ln_scale).exp())
        .with("stationarity_spread", stationarity_spread(v, p, sp.l))
        .with("zero_count", sp.l as f64);
    if sp.l > 0 {
        let f_degenerate = 4.0 * m1 * prod / mu.mu_normalized;
        report.insert("objective_degenerate", (f_degenerate.ln() + sp.ln_scale).exp());
    }
    Ok(report.unsort(&sp.perm))
}

/// Relative spread of `p_i (1/(n-1) - p_i) / v_i` over positive-`v` points.
fn stationarity_spread(v: &[f64], p: &[f64], l: usize) -> f64 {
    let m1 = (v.len() - 1) as f64;
    let ratios: Vec<f64> = (l..v.len()).map(|i| p[i] * (1.0 / m1 - p[i]) / v[i]).collect();
    let hi = ratios.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    let lo = ratios.iter().cloned().fold(f64::INFINITY, f64::min);
    (hi - lo) / hi
}

#[cfg(test)]
mod tests {
    use super::*;

    const EXAMPLE_P: [f64; 8] = [
        0.1394693827, 0.1359038626, 0.1321292663, 0.1281038353, 0.1237697284, 0.1190427279,
        0.1137915161, 0.1077896806,
    ];

    fn example() -> SaturatedProblem {
        SaturatedProblem::from_v(&[1.0, 2.0, 3.0, 4.0, 5.0, 6.0, 7.0, 8.0]).unwrap()
    }

    #[test]
    fn eight_point_example() {
        let sp = example();
        let mu = root_mu(&sp).unwrap();
        assert_eq!(mu.branch, Branch::H1);
        assert!((mu.mu - 0.092_607_808_638_118_38).abs() < 1e-15);
        let r = solve_saturated(&sp).unwrap();
        for (a, b) in r.allocation.as_slice().iter().zip(EXAMPLE_P) {
            assert!((a - b).abs() < 1e-10);
        }
        // extended-precision maximum
        assert!((r.objective - 1.753_019_050_234_433e-5).abs() < 1e-14 * 1.76e-5);
        let fs = r.diagnostic("objective_stationary").unwrap();
        assert!((fs - r.objective).abs() < 1e-12 * r.objective);
        assert!((h1_eval(mu.mu, &sp.sorted_v()).unwrap() - 6.0).abs() < 1e-12);
        assert!((h1_eval(0.092_607_808_64, &sp.sorted_v()).unwrap() - 6.0).abs() < 1e-9);
    }

    #[test]
    fn h_functions_at_endpoints() {
        let v = [1.0, 2.0, 4.0];
        assert_eq!(h1_eval(0.0, &v).unwrap(), 3.0);
        assert_eq!(h2_eval(0.0, &v).unwrap(), 1.0);
        let at_end = h1_eval(0.25, &v).unwrap();
        assert!((at_end - (0.75f64.sqrt() + 0.5f64.sqrt())).abs() < 1e-15);
        assert!(h1_eval(0.3, &v).is_err());
        assert!(h1_eval(-0.1, &v).is_err());
    }

    #[test]
    fn branch_dichotomy() {
        let plus = solve_saturated(&SaturatedProblem::from_v(&[5.0, 5.0, 6.0, 7.0]).unwrap()).unwrap();
        assert_eq!(plus.case_label, "saturated-h1");
        assert!(plus.allocation[3] >= 1.0 / 6.0);
        let minus = solve_saturated(&SaturatedProblem::from_v(&[1.0, 1.0, 2.0, 3.0]).unwrap()).unwrap();
        assert_eq!(minus.case_label, "saturated-h2");
        assert!(minus.allocation[3] < 1.0 / 6.0);
        assert!((minus.allocation[3] - 0.117_970_878_792_843_07).abs() < 1e-12);
    }

    #[test]
    fn boundary_case() {
        let r = solve_saturated(&SaturatedProblem::from_v(&[1.0, 2.0, 3.0, 7.0]).unwrap()).unwrap();
        assert_eq!(r.case_label, "saturated-boundary");
        let t = 1.0 / 3.0;
        assert_eq!(r.allocation.as_slice(), &[t, t, t, 0.0]);
        assert!((r.objective - 7.0 / 27.0).abs() < 1e-15);
    }

    #[test]
    fn equal_coefficients() {
        for n in 3..12 {
            let sp = SaturatedProblem::from_v(&vec![2.5; n]).unwrap();
            let mu = root_mu(&sp).unwrap();
            let nf = n as f64;
            let closed = (1.0 - ((nf - 2.0) / nf).powi(2)) / 2.5;
            assert!((mu.mu - closed).abs() < 1e-14, "n = {n}");
            let r = solve_saturated(&sp).unwrap();
            for &p in r.allocation.as_slice() {
                assert!((p - 1.0 / nf).abs() < 1e-14);
            }
        }
    }

    #[test]
    fn zero_coefficients_get_one_over_n_minus_one() {
        let r = solve_saturated(&SaturatedProblem::from_v(&[0.0, 2.0, 3.0, 1.0, 2.5, 0.0]).unwrap()).unwrap();
        assert!((r.allocation[0] - 0.2).abs() < 1e-15);
        assert!((r.allocation[5] - 0.2).abs() < 1e-15);
        let fd = r.diagnostic("objective_degenerate").unwrap();
        assert!((fd - r.objective).abs() < 1e-12 * r.objective);
        assert!(SaturatedProblem::from_v(&[0.0, 0.0, 1.0, 1.0]).is_err());
    }

    #[test]
    fn factorial_minors_are_equal() {
        use crate::design::{full_factorial_points, model_matrix, saturated_factorial_terms};
        let x = model_matrix(&full_factorial_points(3), &saturated_factorial_terms(3)).unwrap();
        let w: Vec<f64> = (1..=8).map(|j| 0.1 * j as f64).collect();
        let sp = compute_v(&DesignProblem::with_weights(x, w.clone()).unwrap()).unwrap();
        // |X[-j]|^2 = 2^(k (2^k - 2)) = 2^18
        let wprod: f64 = w.iter().product();
        let v = sp.sorted_v();
        for (k, &j) in sp.perm().iter().enumerate() {
            let expected = 262_144.0 * wprod / w[j];
            assert!((v[k] - expected).abs() < 1e-10 * expected);
        }
    }

    #[test]
    fn dependent_rows_give_zero_coefficients() {
        use nalgebra::DMatrix;
        let mut x = DMatrix::from_row_slice(
            6,
            5,
            &[
                1.0, 0.3, -0.2, 0.8, 0.1, //
                1.0, -0.7, 0.5, 0.2, -0.4, //
                0.0, 0.0, 0.0, 0.0, 0.0, //
                1.0, 0.9, 0.4, -0.6, 0.3, //
                1.0, -0.1, -0.9, 0.4, 0.7, //
                1.0, 0.5, 0.6, -0.3, -0.8, //
            ],
        );
        let row = x.row(4) * 0.4 + x.row(5) * 0.6;
        x.set_row(2, &row);
        let sp = compute_v(&DesignProblem::with_weights(x, vec![1.0; 6]).unwrap()).unwrap();
        // deleting any row outside {2, 4, 5} keeps the dependency
        assert_eq!(sp.zero_count(), 3);
        let mut zeros: Vec<usize> = sp.perm()[..3].to_vec();
        zeros.sort();
        assert_eq!(zeros, vec![0, 1, 3]);
        let r = solve_saturated(&sp).unwrap();
        for j in [0, 1, 3] {
            assert!((r.allocation[j] - 0.2).abs() < 1e-15);
        }
    }
}
