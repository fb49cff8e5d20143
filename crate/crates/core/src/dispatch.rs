//! Chooses a solver from the shape of the problem.

use serde::{Deserialize, Serialize};

use crate::design::{Allocation, DesignProblem};
use crate::error::{DesignError, Result};
use crate::liftone::{liftone_maximize, LiftOneConfig};
use crate::objective::{ln_objective_det, objective_det};
use crate::report::SolveReport;
use crate::saturated::{compute_v, solve_saturated};
use crate::twofactor::solve_fourpoint;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Method {
    /// Closed form when one applies, lift-one otherwise.
    #[default]
    Auto,
    /// Closed form or an `Unsupported` error.
    Analytic,
    LiftOne,
}

impl std::str::FromStr for Method {
    type Err = DesignError;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "auto" => Ok(Self::Auto),
            "analytic" => Ok(Self::Analytic),
            "liftone" | "lift-one" => Ok(Self::LiftOne),
            other => Err(DesignError::Domain(format!("unknown method {other:?}"))),
        }
    }
}

/// Which closed form, if any, covers this problem.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Family {
    /// Four points, intercept plus two factors.
    FourPoint,
    /// `n = d + 1`.
    Saturated,
    /// `n = d`: every point is needed, so the uniform allocation is optimal.
    Square,
}

pub fn family(problem: &DesignProblem) -> Option<Family> {
    let (n, d) = (problem.n(), problem.d());
    if n == 4 && d == 3 && problem.has_intercept() {
        Some(Family::FourPoint)
    } else if n == d + 1 {
        Some(Family::Saturated)
    } else if n == d {
        Some(Family::Square)
    } else {
        None
    }
}

fn analytic(problem: &DesignProblem, fam: Family) -> Result<SolveReport> {
    match fam {
        Family::FourPoint => solve_fourpoint(problem),
        Family::Saturated => solve_saturated(&compute_v(problem)?),
        Family::Square => {
            let p = Allocation::uniform(problem.n());
            if !ln_objective_det(problem, &p)?.is_finite() {
                return Err(DesignError::RankDeficient {
                    rank: crate::linalg::rank(problem.x(), 1e-12),
                    expected: problem.d(),
                });
            }
            Ok(SolveReport::new(p, 0.0, "square-uniform"))
        }
    }
}

/// Solves with the requested method. The reported objective is always
/// `|X'WX|` at the returned allocation, with `ln_objective` alongside.
pub fn solve(problem: &DesignProblem, method: Method, config: &LiftOneConfig) -> Result<SolveReport> {
    let fam = family(problem);
    let mut report = match (method, fam) {
        (Method::LiftOne, _) | (Method::Auto, None) => liftone_maximize(problem, config)?,
        (_, Some(f)) => analytic(problem, f)?,
        (Method::Analytic, None) => {
            return Err(DesignError::Unsupported(format!(
                "no closed form for {} points and {} parameters; use lift-one",
                problem.n(),
                problem.d()
            )))
        }
    };
    report.objective = objective_det(problem, &report.allocation)?;
    let ln_f = ln_objective_det(problem, &report.allocation)?;
    report.insert("ln_objective", ln_f);
    Ok(report)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::design::{full_factorial_points, main_effects_terms, model_matrix, two_by_two_matrix};
    use crate::weight::WeightFunction;

    #[test]
    fn routes_by_shape() {
        let cfg = LiftOneConfig::default();
        let p22 = DesignProblem::new(two_by_two_matrix(), vec![-2.0, 1.0, 0.5], WeightFunction::Logit).unwrap();
        assert!(solve(&p22, Method::Auto, &cfg).unwrap().case_label.starts_with("twofactor"));
        assert_eq!(solve(&p22, Method::LiftOne, &cfg).unwrap().case_label, "liftone");

        let x = model_matrix(&full_factorial_points(3), &main_effects_terms(3)).unwrap();
        let p23 = DesignProblem::new(x, vec![0.1, 0.2, -0.3, 0.4], WeightFunction::Logit).unwrap();
        assert_eq!(solve(&p23, Method::Auto, &cfg).unwrap().case_label, "liftone");
        assert!(matches!(solve(&p23, Method::Analytic, &cfg), Err(DesignError::Unsupported(_))));
    }

    #[test]
    fn method_names() {
        assert_eq!("liftone".parse::<Method>().unwrap(), Method::LiftOne);
        assert!("newton".parse::<Method>().is_err());
    }
}
