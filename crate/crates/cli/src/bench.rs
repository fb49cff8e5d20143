//! Analytic-versus-lift-one benchmark on seeded random parameters.
//!
//! Instances are drawn sequentially from ChaCha8 seeded with `seed`, one
//! `beta` vector per instance with entries i.i.d. from the chosen
//! distribution, so the stream is identical on every platform and for any
//! thread count. Efficiency is `f(p_liftone) / f(p_analytic)`, computed from
//! log determinants.

use std::time::Instant;

use glmdesign::design::{full_factorial_points, main_effects_terms, model_matrix, saturated_factorial_terms};
use glmdesign::liftone::LiftOneConfig;
use glmdesign::{solve, DesignProblem, Method, SolveReport, WeightFunction};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use rayon::prelude::*;

use crate::error::{CliError, CliResult};
use crate::output::{finish, real};

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum BetaDistribution {
    Uniform { lo: f64, hi: f64 },
    Normal { sigma: f64 },
}

impl BetaDistribution {
    /// `uniform:lo:hi` or `normal:sigma`.
    pub fn parse(text: &str) -> CliResult<Self> {
        let bad = || CliError::input(format!("--dist: expected uniform:lo:hi or normal:sigma, got {text:?}"));
        let parts: Vec<&str> = text.split(':').collect();
        let num = |s: &str| s.trim().parse::<f64>().ok().filter(|v| v.is_finite()).ok_or_else(bad);
        match parts.as_slice() {
            ["uniform", lo, hi] => {
                let (lo, hi) = (num(lo)?, num(hi)?);
                if lo >= hi {
                    return Err(bad());
                }
                Ok(Self::Uniform { lo, hi })
            }
            ["normal", sigma] => {
                let sigma = num(sigma)?;
                if sigma <= 0.0 {
                    return Err(bad());
                }
                Ok(Self::Normal { sigma })
            }
            _ => Err(bad()),
        }
    }
}

/// `2x2` (main effects) or `2^k` (every interaction below order `k`).
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum BenchModel {
    TwoByTwo,
    Factorial(usize),
}

impl BenchModel {
    pub fn parse(text: &str) -> CliResult<Self> {
        if text == "2x2" {
            return Ok(Self::TwoByTwo);
        }
        let k = text
            .strip_prefix("2^")
            .and_then(|k| k.parse::<usize>().ok())
            .filter(|k| (2..=6).contains(k))
            .ok_or_else(|| CliError::input(format!("--model: expected 2x2 or 2^k with k in 2..=6, got {text:?}")))?;
        Ok(Self::Factorial(k))
    }

    fn matrix(&self) -> glmdesign::Result<(Vec<Vec<f64>>, Vec<Vec<usize>>)> {
        Ok(match *self {
            Self::TwoByTwo => (full_factorial_points(2), main_effects_terms(2)),
            Self::Factorial(k) => (full_factorial_points(k), saturated_factorial_terms(k)),
        })
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct BenchSpec {
    pub n_instances: usize,
    pub distribution: BetaDistribution,
    pub seed: u64,
    pub model: BenchModel,
    pub tol: f64,
}

impl BenchSpec {
    pub fn two_by_two(n_instances: usize, seed: u64) -> Self {
        Self {
            n_instances,
            distribution: BetaDistribution::Uniform { lo: -3.0, hi: 3.0 },
            seed,
            model: BenchModel::TwoByTwo,
            tol: 1e-12,
        }
    }
}

/// Seeded parameter vectors, `d` entries each.
pub fn instance_stream(spec: &BenchSpec, d: usize) -> Vec<Vec<f64>> {
    let mut rng = ChaCha8Rng::seed_from_u64(spec.seed);
    let normal = match spec.distribution {
        BetaDistribution::Normal { sigma } => Some(Normal::new(0.0, sigma).expect("validated sigma")),
        BetaDistribution::Uniform { .. } => None,
    };
    (0..spec.n_instances)
        .map(|_| {
            (0..d)
                .map(|_| match (spec.distribution, &normal) {
                    (BetaDistribution::Uniform { lo, hi }, _) => rng.random_range(lo..hi),
                    (_, Some(n)) => n.sample(&mut rng),
                    _ => unreachable!(),
                })
                .collect()
        })
        .collect()
}

#[derive(Debug, Clone, PartialEq)]
pub struct MethodSummary {
    pub method: String,
    pub instances: usize,
    pub failures: usize,
    pub seconds: f64,
    /// Instances whose quartic root came from the bisection fallback.
    pub quartic_fallbacks: usize,
    pub mean_efficiency: f64,
    pub min_efficiency: f64,
    pub p01_efficiency: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct BenchSummary {
    pub analytic: MethodSummary,
    pub liftone: MethodSummary,
}

fn run_method(
    problems: &[Option<DesignProblem>],
    method: Method,
    cfg: &LiftOneConfig,
) -> (Vec<Option<SolveReport>>, f64) {
    let start = Instant::now();
    let out = problems
        .par_iter()
        .map(|p| p.as_ref().and_then(|p| solve(p, method, cfg).ok()))
        .collect();
    (out, start.elapsed().as_secs_f64())
}

fn summarize(name: &str, reports: &[Option<SolveReport>], seconds: f64, eff: &[f64]) -> MethodSummary {
    let mut sorted = eff.to_vec();
    sorted.sort_by(f64::total_cmp);
    let mean = if sorted.is_empty() { f64::NAN } else { sorted.iter().sum::<f64>() / sorted.len() as f64 };
    MethodSummary {
        method: name.to_string(),
        instances: reports.len(),
        failures: reports.iter().filter(|r| r.is_none()).count(),
        seconds,
        quartic_fallbacks: reports
            .iter()
            .flatten()
            .filter(|r| r.diagnostic("quartic_fallback") == Some(1.0))
            .count(),
        mean_efficiency: mean,
        min_efficiency: sorted.first().copied().unwrap_or(f64::NAN),
        p01_efficiency: sorted.get(sorted.len().saturating_sub(1) / 100).copied().unwrap_or(f64::NAN),
    }
}

fn ln_f(r: &SolveReport) -> f64 {
    r.diagnostic("ln_objective").unwrap_or(f64::NEG_INFINITY)
}

/// Runs both methods over the same instance stream. Failures (including
/// instances whose weights are not representable) are counted, not fatal.
pub fn bench(spec: &BenchSpec) -> CliResult<BenchSummary> {
    if spec.n_instances == 0 {
        return Err(CliError::input("--instances: need at least 1"));
    }
    let (points, terms) = spec.model.matrix()?;
    let x = model_matrix(&points, &terms)?;
    let betas = instance_stream(spec, x.ncols());
    let problems: Vec<Option<DesignProblem>> = betas
        .into_iter()
        .map(|b| DesignProblem::new(x.clone(), b, WeightFunction::Logit).ok())
        .collect();
    let cfg = LiftOneConfig::with_tol(spec.tol);
    let (analytic, t_a) = run_method(&problems, Method::Analytic, &cfg);
    let (liftone, t_l) = run_method(&problems, Method::LiftOne, &cfg);

    let mut eff_a = Vec::new();
    let mut eff_l = Vec::new();
    for (a, l) in analytic.iter().zip(&liftone) {
        if let Some(a) = a {
            eff_a.push(1.0);
            if let Some(l) = l {
                eff_l.push((ln_f(l) - ln_f(a)).exp());
            }
        }
    }
    Ok(BenchSummary {
        analytic: summarize("analytic", &analytic, t_a, &eff_a),
        liftone: summarize("liftone", &liftone, t_l, &eff_l),
    })
}

/// CSV with one row per method.
pub fn cmd_bench(spec: &BenchSpec) -> CliResult<String> {
    let s = bench(spec)?;
    let mut w = csv::Writer::from_writer(Vec::new());
    w.write_record([
        "method",
        "instances",
        "failures",
        "seconds",
        "quartic_fallbacks",
        "mean_efficiency",
        "min_efficiency",
        "p01_efficiency",
    ])?;
    for m in [&s.analytic, &s.liftone] {
        w.write_record([
            m.method.clone(),
            m.instances.to_string(),
            m.failures.to_string(),
            real(m.seconds),
            m.quartic_fallbacks.to_string(),
            real(m.mean_efficiency),
            real(m.min_efficiency),
            real(m.p01_efficiency),
        ])?;
    }
    finish(w)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn parses_flags() {
        assert_eq!(BetaDistribution::parse("uniform:-3:3").unwrap(), BetaDistribution::Uniform { lo: -3.0, hi: 3.0 });
        assert_eq!(BetaDistribution::parse("normal:1").unwrap(), BetaDistribution::Normal { sigma: 1.0 });
        assert!(BetaDistribution::parse("normal:-1").is_err());
        assert!(BetaDistribution::parse("cauchy:1").is_err());
        assert_eq!(BenchModel::parse("2^3").unwrap(), BenchModel::Factorial(3));
        assert!(BenchModel::parse("2^7").is_err());
    }

    #[test]
    fn stream_is_reproducible() {
        let spec = BenchSpec::two_by_two(50, 42);
        assert_eq!(instance_stream(&spec, 3), instance_stream(&spec, 3));
        let other = BenchSpec { seed: 43, ..spec.clone() };
        assert_ne!(instance_stream(&spec, 3), instance_stream(&other, 3));
    }
}
