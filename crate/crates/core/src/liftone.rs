//! Lift-one: coordinate ascent on the simplex.
//!
//! Moving coordinate `i` to `z` and rescaling the others by
//! `(1 - z) / (1 - p_i)` turns the objective into
//! `f_i(z) = alpha z (1 - z)^(d-1) + beta (1 - z)^d`, because `|X'WX|` is
//! multilinear in `p` with `d` distinct indices per monomial. The profile is
//! maximized in closed form at `z* = (alpha - d beta) / (d (alpha - beta))`.
//!
//! Inside a sweep the information matrix is updated in rank one and the
//! profile is evaluated through the determinant lemma,
//! `|M - p_i w_i x_i x_i'| = |M| (1 - p_i w_i x_i' M^-1 x_i)`, so every value
//! is a ratio to the current objective and nothing underflows. The matrix is
//! rebuilt from scratch at the start of every sweep.

use nalgebra::{DMatrix, DVector};
use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::design::{Allocation, DesignProblem};
use crate::error::{DesignError, Result};
use crate::linalg;
use crate::objective::{ln_objective_det, objective_det};
use crate::report::SolveReport;

const DRIFT_TOL: f64 = 1e-13;

/// Below this `1 - p_i` the profile comes from two direct determinants.
const NEAR_VERTEX: f64 = 1e-6;

#[derive(Debug, Clone, PartialEq)]
pub enum Init {
    Uniform,
    User(Allocation),
}

#[derive(Debug, Clone, PartialEq)]
pub struct LiftOneConfig {
    /// Stop once a full sweep improves the objective by less than this, relatively.
    pub tol: f64,
    pub max_sweeps: usize,
    pub init: Init,
    /// Visit coordinates in a freshly shuffled order each sweep.
    pub shuffle_seed: Option<u64>,
}

impl Default for LiftOneConfig {
    fn default() -> Self {
        Self { tol: 1e-12, max_sweeps: 500, init: Init::Uniform, shuffle_seed: None }
    }
}

impl LiftOneConfig {
    pub fn with_tol(tol: f64) -> Self {
        Self { tol, ..Self::default() }
    }

    fn validate(&self) -> Result<()> {
        if !(self.tol > 0.0 && self.tol.is_finite()) {
            return Err(DesignError::Domain(format!("tol must be positive, got {}", self.tol)));
        }
        if self.max_sweeps == 0 {
            return Err(DesignError::Domain("max_sweeps must be at least 1".into()));
        }
        Ok(())
    }
}

/// Value of the two-term profile at `z`.
pub fn profile_value(alpha: f64, beta: f64, d: usize, z: f64) -> f64 {
    let one_minus = 1.0 - z;
    alpha * z * one_minus.powi(d as i32 - 1) + beta * one_minus.powi(d as i32)
}

/// Maximizer of the profile on `[0, 1]`, the stationary point clamped or 0.
pub fn profile_argmax(alpha: f64, beta: f64, d: usize) -> f64 {
    let df = d as f64;
    let candidate = if alpha > df * beta && alpha != beta {
        ((alpha - df * beta) / (df * (alpha - beta))).clamp(0.0, 1.0)
    } else {
        0.0
    };
    if profile_value(alpha, beta, d, candidate) >= profile_value(alpha, beta, d, 0.0) {
        candidate
    } else {
        0.0
    }
}

/// `(alpha, beta)` of the profile through coordinate `i`, from two direct
/// objective evaluations: `beta = f_i(0)`, `alpha = 2^d f_i(1/2) - beta`.
pub fn fi_profile(problem: &DesignProblem, p: &Allocation, i: usize) -> Result<(f64, f64)> {
    if i >= p.len() || p.len() != problem.n() {
        return Err(DesignError::DimensionMismatch {
            what: "coordinate index / allocation length",
            expected: problem.n(),
            actual: p.len().max(i + 1),
        });
    }
    let beta = objective_det(problem, &moved(p, i, 0.0)?)?;
    let half = objective_det(problem, &moved(p, i, 0.5)?)?;
    Ok((2f64.powi(problem.d() as i32) * half - beta, beta))
}

/// `p` with coordinate `i` set to `z` and the rest rescaled onto the simplex.
pub fn moved(p: &Allocation, i: usize, z: f64) -> Result<Allocation> {
    let pi = p[i];
    if pi >= 1.0 {
        return Err(DesignError::Degenerate(format!("coordinate {i} carries all the mass")));
    }
    let c = (1.0 - z) / (1.0 - pi);
    let q: Vec<f64> = (0..p.len()).map(|j| if j == i { z } else { p[j] * c }).collect();
    Allocation::normalized(q)
}

/// Coordinate-ascent state: the current allocation and its information matrix.
#[derive(Debug, Clone)]
pub struct LiftOneState<'a> {
    problem: &'a DesignProblem,
    p: Vec<f64>,
    m: DMatrix<f64>,
    steps: usize,
}

impl<'a> LiftOneState<'a> {
    /// Fails when the objective vanishes at `p`.
    pub fn new(problem: &'a DesignProblem, p: Allocation) -> Result<Self> {
        if p.len() != problem.n() {
            return Err(DesignError::DimensionMismatch {
                what: "initial allocation length",
                expected: problem.n(),
                actual: p.len(),
            });
        }
        if !ln_objective_det(problem, &p)?.is_finite() {
            return Err(DesignError::Degenerate("objective is zero at the starting allocation".into()));
        }
        let mut s = Self { problem, p: p.into_vec(), m: DMatrix::zeros(0, 0), steps: 0 };
        s.rebuild();
        Ok(s)
    }

    pub fn allocation(&self) -> &[f64] {
        &self.p
    }

    /// Number of accepted coordinate moves so far.
    pub fn steps(&self) -> usize {
        self.steps
    }

    /// Recomputes the information matrix from the current allocation.
    pub fn rebuild(&mut self) {
        let q: Vec<f64> = self.p.iter().zip(self.problem.weights()).map(|(a, b)| a * b).collect();
        self.m = linalg::information_matrix(self.problem.x(), &q);
    }

    fn row(&self, i: usize) -> DVector<f64> {
        self.problem.x().row(i).transpose()
    }

    /// Profile coefficients divided by the current objective.
    fn relative_profile(&self, i: usize) -> Result<(f64, f64)> {
        let d = self.problem.d() as i32;
        let pi = self.p[i];
        if pi >= 1.0 {
            return Err(DesignError::Degenerate(format!("coordinate {i} carries all the mass")));
        }
        if 1.0 - pi < NEAR_VERTEX {
            let p = Allocation::normalized(self.p.clone())?;
            let f = objective_det(self.problem, &p)?;
            let (alpha, beta) = fi_profile(self.problem, &p, i)?;
            return Ok((alpha / f, beta / f));
        }
        let x = self.row(i);
        let chol = self.m.clone().cholesky().ok_or_else(|| {
            DesignError::Numerical("information matrix lost positive definiteness".into())
        })?;
        let delta = self.problem.weights()[i] * x.dot(&chol.solve(&x));
        let beta = ((1.0 - pi * delta) / (1.0 - pi).powi(d)).max(0.0);
        let half = (1.0 + (1.0 - 2.0 * pi) * delta) / (2.0 * (1.0 - pi)).powi(d);
        Ok((2f64.powi(d) * half - beta, beta))
    }

    /// Moves coordinate `i` to its profile maximizer if that improves the
    /// objective; returns the relative gain (0 when the move is rejected).
    pub fn step(&mut self, i: usize) -> Result<f64> {
        let d = self.problem.d();
        let rest: f64 = self.p.iter().enumerate().filter(|&(j, _)| j != i).map(|(_, v)| v).sum();
        if i < self.p.len() && rest <= 4.0 * f64::EPSILON {
            // the other coordinates hold only rounding residue
            return Ok(0.0);
        }
        let (alpha, beta) = self.relative_profile(i)?;
        let z = profile_argmax(alpha, beta, d);
        let ratio = profile_value(alpha, beta, d, z);
        if !(ratio.is_finite() && alpha.is_finite()) {
            return Err(DesignError::Numerical(format!("non-finite lift-one profile at coordinate {i}")));
        }
        if ratio <= 1.0 || z == self.p[i] {
            return Ok(0.0);
        }
        let pi = self.p[i];
        let c = (1.0 - z) / (1.0 - pi);
        let x = self.row(i);
        let wi = self.problem.weights()[i];
        self.m = (&self.m - (&x * x.transpose()) * (pi * wi)) * c + (&x * x.transpose()) * (z * wi);
        for (j, pj) in self.p.iter_mut().enumerate() {
            *pj = if j == i { z } else { *pj * c };
        }
        let sum: f64 = self.p.iter().sum();
        if (sum - 1.0).abs() > DRIFT_TOL {
            self.p.iter_mut().for_each(|v| *v /= sum);
            self.rebuild();
        }
        self.steps += 1;
        Ok(ratio - 1.0)
    }
}

/// Maximizes `|X'WX|` over the simplex by lift-one sweeps.
///
/// Diagnostics: `sweeps`, `steps`, `converged` (1 or 0) and `ln_objective`.
pub fn liftone_maximize(problem: &DesignProblem, config: &LiftOneConfig) -> Result<SolveReport> {
    config.validate()?;
    let n = problem.n();
    let start = match &config.init {
        Init::Uniform => Allocation::uniform(n),
        Init::User(p) => p.clone(),
    };
    let mut state = LiftOneState::new(problem, start.clone())?;
    let mut ln_f = ln_objective_det(problem, &start)?;
    let mut order: Vec<usize> = (0..n).collect();
    let mut rng = config.shuffle_seed.map(ChaCha8Rng::seed_from_u64);
    let mut sweeps = 0;
    let mut converged = false;
    while sweeps < config.max_sweeps {
        sweeps += 1;
        if let Some(rng) = rng.as_mut() {
            order.shuffle(rng);
        }
        state.rebuild();
        for &i in &order {
            state.step(i)?;
        }
        let ln_new = ln_objective_det(problem, &Allocation::normalized(state.p.clone())?)?;
        let gain = (ln_new - ln_f).exp_m1();
        ln_f = ln_new.max(ln_f);
        if gain < config.tol {
            converged = true;
            break;
        }
    }
    let alloc = Allocation::normalized(state.p)?;
    let objective = objective_det(problem, &alloc)?;
    let ln_objective = ln_objective_det(problem, &alloc)?;
    Ok(SolveReport::new(alloc, objective, "liftone")
        .with("sweeps", sweeps as f64)
        .with("steps", state.steps as f64)
        .with("converged", if converged { 1.0 } else { 0.0 })
        .with("ln_objective", ln_objective))
}
