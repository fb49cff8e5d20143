//! Problem files.
//!
//! ```json
//! {
//!   "link": "logit",
//!   "beta": [-2.0, 1.0, 0.5],
//!   "design_points": [[1, 1], [1, -1], [-1, 1], [-1, -1]],
//!   "model_terms": "main-effects"
//! }
//! ```
//!
//! `model_terms` is `"main-effects"` (the default), `"saturated-factorial"`
//! (every factor product except the highest-order one) or
//! `{"columns": [[], [0], [1], [0, 1]]}`, each column the product of the
//! listed factors (`[]` is the intercept). `weights` replaces `beta` and the
//! link with explicit per-point weights; `table` holds `[eta, weight]` knots
//! for the `user_tabulated` link. With `bounds: [a1, b1, a2, b2]` the problem
//! is continuous in two factors and `design_points` may be omitted.

use glmdesign::boundary::ContinuousProblem;
use glmdesign::design::{main_effects_terms, model_matrix, saturated_factorial_terms};
use glmdesign::{DesignProblem, WeightFunction};
use serde::{Deserialize, Serialize};

use crate::error::{CliError, CliResult};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum ModelTerms {
    Named(String),
    Columns { columns: Vec<Vec<usize>> },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ProblemFile {
    pub link: String,
    #[serde(default)]
    pub beta: Vec<f64>,
    #[serde(default)]
    pub design_points: Vec<Vec<f64>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub model_terms: Option<ModelTerms>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub bounds: Option<[f64; 4]>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub weights: Option<Vec<f64>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub table: Option<Vec<(f64, f64)>>,
}

impl ProblemFile {
    pub fn from_json(text: &str) -> CliResult<Self> {
        let de = &mut serde_json::Deserializer::from_str(text);
        serde_path_to_error::deserialize(de).map_err(|e| {
            let path = e.path().to_string();
            CliError::input(format!("{path}: {}", e.into_inner()))
        })
    }

    pub fn read(path: &std::path::Path) -> CliResult<Self> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| CliError::input(format!("{}: {e}", path.display())))?;
        Self::from_json(&text)
    }

    pub fn weight_fn(&self) -> CliResult<WeightFunction> {
        if self.link == "user_tabulated" {
            let table = self
                .table
                .as_ref()
                .ok_or_else(|| CliError::input("table: required for the user_tabulated link"))?;
            return WeightFunction::tabulated(table).map_err(|e| CliError::input(format!("table: {e}")));
        }
        WeightFunction::from_name(&self.link).ok_or_else(|| {
            CliError::input(format!(
                "link: unknown weight function {:?} (expected logit, log_poisson, probit, identity_constant or user_tabulated)",
                self.link
            ))
        })
    }

    /// Design points, or the rectangle corners in continuous mode.
    pub fn points(&self) -> CliResult<Vec<Vec<f64>>> {
        if let Some(cp) = self.continuous()? {
            if self.design_points.is_empty() {
                return Ok(cp.corners().iter().map(|&(a, b)| vec![a, b]).collect());
            }
        }
        if self.design_points.is_empty() {
            return Err(CliError::input("design_points: at least one point is required"));
        }
        let k = self.design_points[0].len();
        for (i, p) in self.design_points.iter().enumerate() {
            if p.len() != k {
                return Err(CliError::input(format!(
                    "design_points[{i}]: expected {k} factor levels, got {}",
                    p.len()
                )));
            }
        }
        Ok(self.design_points.clone())
    }

    pub fn terms(&self, factors: usize) -> CliResult<Vec<Vec<usize>>> {
        match &self.model_terms {
            None => Ok(main_effects_terms(factors)),
            Some(ModelTerms::Named(name)) => match name.as_str() {
                "main-effects" => Ok(main_effects_terms(factors)),
                "saturated-factorial" => Ok(saturated_factorial_terms(factors)),
                other => Err(CliError::input(format!(
                    "model_terms: unknown recipe {other:?} (expected \"main-effects\", \"saturated-factorial\" or {{\"columns\": [...]}})"
                ))),
            },
            Some(ModelTerms::Columns { columns }) => {
                for (c, col) in columns.iter().enumerate() {
                    if let Some(&f) = col.iter().find(|&&f| f >= factors) {
                        return Err(CliError::input(format!(
                            "model_terms.columns[{c}]: factor {f} out of range (problem has {factors} factors)"
                        )));
                    }
                }
                Ok(columns.clone())
            }
        }
    }

    pub fn continuous(&self) -> CliResult<Option<ContinuousProblem>> {
        let Some(bounds) = self.bounds else { return Ok(None) };
        if self.beta.len() != 3 {
            return Err(CliError::input(format!(
                "beta: continuous mode needs 3 entries (intercept and two factors), got {}",
                self.beta.len()
            )));
        }
        let beta = [self.beta[0], self.beta[1], self.beta[2]];
        ContinuousProblem::new(beta, bounds, self.weight_fn()?)
            .map(Some)
            .map_err(|e| CliError::input(format!("bounds: {e}")))
    }

    /// Builds the design problem, with `beta` optionally overridden.
    pub fn design_problem_with_beta(&self, beta: &[f64]) -> CliResult<DesignProblem> {
        let points = self.points()?;
        let terms = self.terms(points[0].len())?;
        let x = model_matrix(&points, &terms).map_err(|e| CliError::input(format!("design_points: {e}")))?;
        if let Some(w) = &self.weights {
            if w.len() != x.nrows() {
                return Err(CliError::input(format!(
                    "weights: expected {} entries (one per design point), got {}",
                    x.nrows(),
                    w.len()
                )));
            }
            return DesignProblem::with_weights(x, w.clone()).map_err(|e| CliError::input(format!("weights: {e}")));
        }
        if beta.len() != x.ncols() {
            return Err(CliError::input(format!(
                "beta: expected {} entries (one per model column), got {}",
                x.ncols(),
                beta.len()
            )));
        }
        let wf = self.weight_fn()?;
        DesignProblem::new(x, beta.to_vec(), wf).map_err(|e| CliError::input(format!("beta: {e}")))
    }

    pub fn design_problem(&self) -> CliResult<DesignProblem> {
        self.design_problem_with_beta(&self.beta)
    }
}
