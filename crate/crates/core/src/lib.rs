//! Locally D-optimal approximate designs for generalized linear models.
//!
//! Given a set of candidate design points (the rows of a design matrix `X`),
//! assumed parameter values `beta` and a GLM information weight `nu(eta)`,
//! the crate finds the allocation `p` on the simplex that maximizes
//! `det(X' W X)` with `W = diag(p_i * w_i)`.
//!
//! Several closed-form solvers are provided:
//!
//! * [`solver22`]: four design points, three parameters, in reduced
//!   `v`-form (the 2x2 main-effects model and anything that reduces to it),
//!   including the quartic root used for the fully asymmetric case.
//! * [`twofactor`]: any four distinct points of a two-factor main-effects
//!   model, dispatched on the rank structure of the 3x3 minors.
//! * [`saturated`]: `n` points with `n - 1` parameters, solved through a
//!   scalar root of a monotone function.
//!
//! [`liftone`] is a coordinate-ascent maximizer used both as a general solver
//! and as the numerical reference the analytic solvers are checked against.
//! [`boundary`] decides whether, for two continuous factors on a rectangle,
//! the four corners alone support a D-optimal design.

pub mod boundary;
pub mod design;
pub mod dispatch;
pub mod error;
pub mod linalg;
pub mod liftone;
pub mod objective;
pub mod quartic;
pub mod report;
pub mod saturated;
pub mod solver22;
pub mod twofactor;
pub mod weight;

pub use design::{Allocation, DesignProblem};
pub use dispatch::{solve, Method};
pub use error::{DesignError, Result};
pub use report::SolveReport;
pub use weight::WeightFunction;
