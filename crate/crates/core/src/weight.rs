//! GLM information weights `nu(eta)`.
//!
//! `nu = ((g^-1)')^2 / Var(Y)` is the per-observation information contributed
//! at linear predictor `eta`. Only `nu` matters for D-optimality, so a link
//! outside the catalog is supplied as a table of `(eta, nu)` knots.

use serde::{Deserialize, Serialize};
use libm::erfc;
use std::f64::consts::{FRAC_1_SQRT_2, PI};

use crate::error::{DesignError, Result};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", tag = "kind")]
pub enum WeightFunction {
    /// Binary response, logit link: `e^eta / (1 + e^eta)^2`.
    Logit,
    /// Poisson response, log link: `e^eta`.
    LogPoisson,
    /// Binary response, probit link: `phi(eta)^2 / (Phi(eta) (1 - Phi(eta)))`.
    Probit,
    /// Linear model with constant variance; the weight is 1 everywhere.
    IdentityConstant,
    /// Piecewise-linear interpolation between knots, held constant outside.
    UserTabulated(TabulatedWeight),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TabulatedWeight {
    eta: Vec<f64>,
    w: Vec<f64>,
}

impl TabulatedWeight {
    pub fn new(knots: &[(f64, f64)]) -> Result<Self> {
        if knots.is_empty() {
            return Err(DesignError::Domain("weight table has no knots".into()));
        }
        let mut eta = Vec::with_capacity(knots.len());
        let mut w = Vec::with_capacity(knots.len());
        for &(e, v) in knots {
            if !e.is_finite() || !v.is_finite() {
                return Err(DesignError::NonFinite("weight table"));
            }
            if v <= 0.0 {
                return Err(DesignError::Domain(format!(
                    "weight table value {v} at eta = {e} is not positive"
                )));
            }
            if let Some(&last) = eta.last() {
                if e <= last {
                    return Err(DesignError::Domain(
                        "weight table eta knots must be strictly increasing".into(),
                    ));
                }
            }
            eta.push(e);
            w.push(v);
        }
        Ok(Self { eta, w })
    }

    fn eval(&self, x: f64) -> f64 {
        let n = self.eta.len();
        if x <= self.eta[0] {
            return self.w[0];
        }
        if x >= self.eta[n - 1] {
            return self.w[n - 1];
        }
        // first knot strictly greater than x; 1 <= hi <= n - 1 here
        let hi = self.eta.partition_point(|&e| e <= x);
        let lo = hi - 1;
        let t = (x - self.eta[lo]) / (self.eta[hi] - self.eta[lo]);
        self.w[lo] + t * (self.w[hi] - self.w[lo])
    }
}

impl WeightFunction {
    pub fn tabulated(knots: &[(f64, f64)]) -> Result<Self> {
        TabulatedWeight::new(knots).map(Self::UserTabulated)
    }

    /// Parses a catalog name. Tabulated weights need [`WeightFunction::tabulated`].
    pub fn from_name(name: &str) -> Option<Self> {
        match name {
            "logit" => Some(Self::Logit),
            "log_poisson" | "log" | "poisson" => Some(Self::LogPoisson),
            "probit" => Some(Self::Probit),
            "identity_constant" | "identity" => Some(Self::IdentityConstant),
            _ => None,
        }
    }

    pub fn name(&self) -> &'static str {
        match self {
            Self::Logit => "logit",
            Self::LogPoisson => "log_poisson",
            Self::Probit => "probit",
            Self::IdentityConstant => "identity_constant",
            Self::UserTabulated(_) => "user_tabulated",
        }
    }

    /// Evaluates `nu(eta)`.
    ///
    /// Fails for non-finite `eta`, and when the weight under- or overflows
    /// double precision (|eta| beyond roughly 745 for logit, 709 for the log
    /// link, 38 for probit).
    pub fn eval(&self, eta: f64) -> Result<f64> {
        if !eta.is_finite() {
            return Err(DesignError::Domain(format!("linear predictor {eta} is not finite")));
        }
        let w = match self {
            Self::Logit => {
                let t = (-eta.abs()).exp();
                t / ((1.0 + t) * (1.0 + t))
            }
            Self::LogPoisson => eta.exp(),
            Self::Probit => {
                let density = (-0.5 * eta * eta).exp() / (2.0 * PI).sqrt();
                let lower = 0.5 * erfc(-eta * FRAC_1_SQRT_2);
                let upper = 0.5 * erfc(eta * FRAC_1_SQRT_2);
                density * density / (lower * upper)
            }
            Self::IdentityConstant => 1.0,
            Self::UserTabulated(table) => table.eval(eta),
        };
        if w.is_finite() && w > 0.0 {
            Ok(w)
        } else {
            Err(DesignError::Domain(format!(
                "{} weight is not representable at eta = {eta}",
                self.name()
            )))
        }
    }
}
