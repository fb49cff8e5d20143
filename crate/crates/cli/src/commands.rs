//! The `solve`, `sweep-beta` and `region` commands. Each returns the text
//! to print.

use glmdesign::boundary::{
    check_boundary_optimal, region_sweep, rescale_problem, BoundaryConfig, RegionGrid, RegionSpec,
};
use glmdesign::liftone::LiftOneConfig;
use glmdesign::{solve, Method, SolveReport, WeightFunction};
use serde::{Deserialize, Serialize};

use crate::error::{CliError, CliResult};
use crate::output::{finish, real, report_csv, report_json};
use crate::problem::ProblemFile;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Format {
    #[default]
    Json,
    Csv,
}

impl std::str::FromStr for Format {
    type Err = CliError;

    fn from_str(s: &str) -> CliResult<Self> {
        match s {
            "json" => Ok(Self::Json),
            "csv" => Ok(Self::Csv),
            other => Err(CliError::input(format!("--format: expected json or csv, got {other:?}"))),
        }
    }
}

/// Solves a problem file. In continuous mode the four rectangle corners are
/// solved and the boundary-optimality verdict is added to the diagnostics.
pub fn solve_problem(file: &ProblemFile, method: Method, tol: f64) -> CliResult<SolveReport> {
    let problem = file.design_problem()?;
    let mut report = solve(&problem, method, &LiftOneConfig::with_tol(tol))?;
    if let Some(cp) = file.continuous()? {
        let (unit, _) = rescale_problem(&cp);
        let verdict = check_boundary_optimal(&unit)?;
        report.insert("boundary_optimal", if verdict.boundary_optimal { 1.0 } else { 0.0 });
        report.insert("boundary_min_s", verdict.min_s);
        report.insert("boundary_argmin_a", verdict.argmin.0);
        report.insert("boundary_argmin_b", verdict.argmin.1);
    }
    Ok(report)
}

pub fn cmd_solve(file: &ProblemFile, method: Method, tol: f64, format: Format) -> CliResult<String> {
    let report = solve_problem(file, method, tol)?;
    match format {
        Format::Json => report_json(&report),
        Format::Csv => report_csv(&report),
    }
}

/// `lo:hi:steps`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Range {
    pub lo: f64,
    pub hi: f64,
    pub steps: usize,
}

impl Range {
    pub fn parse(text: &str, flag: &str) -> CliResult<Self> {
        let parts: Vec<&str> = text.split(':').collect();
        let bad = || CliError::input(format!("{flag}: expected lo:hi:steps, got {text:?}"));
        if parts.len() != 3 {
            return Err(bad());
        }
        let lo: f64 = parts[0].trim().parse().map_err(|_| bad())?;
        let hi: f64 = parts[1].trim().parse().map_err(|_| bad())?;
        let steps: usize = parts[2].trim().parse().map_err(|_| bad())?;
        if !(lo.is_finite() && hi.is_finite()) || steps == 0 || (steps > 1 && lo > hi) {
            return Err(bad());
        }
        Ok(Self { lo, hi, steps })
    }

    /// Evenly spaced values, exactly symmetric about the midpoint.
    pub fn values(&self) -> Vec<f64> {
        glmdesign::boundary::symmetric_nodes(self.lo, self.hi, self.steps)
    }
}

/// One solve per grid value of `beta[vary]`; CSV `beta,p1..pn,objective,case_label`.
pub fn cmd_sweep_beta(file: &ProblemFile, vary: usize, range: Range, method: Method, tol: f64) -> CliResult<String> {
    if vary >= file.beta.len() {
        return Err(CliError::input(format!(
            "--vary: index {vary} out of range for beta of length {}",
            file.beta.len()
        )));
    }
    let rows = sweep_beta(file, vary, range, method, tol)?;
    let n = rows.first().map_or(0, |r| r.1.allocation.len());
    let mut w = csv::Writer::from_writer(Vec::new());
    let mut header = vec!["beta".to_string()];
    header.extend((1..=n).map(|i| format!("p{i}")));
    header.push("objective".into());
    header.push("case_label".into());
    w.write_record(&header)?;
    for (b, r) in &rows {
        let mut row = vec![real(*b)];
        row.extend(r.allocation.as_slice().iter().map(|&p| real(p)));
        row.push(real(r.objective));
        row.push(r.case_label.clone());
        w.write_record(&row)?;
    }
    finish(w)
}

pub fn sweep_beta(
    file: &ProblemFile,
    vary: usize,
    range: Range,
    method: Method,
    tol: f64,
) -> CliResult<Vec<(f64, SolveReport)>> {
    let cfg = LiftOneConfig::with_tol(tol);
    range
        .values()
        .into_iter()
        .map(|b| {
            let mut beta = file.beta.clone();
            beta[vary] = b;
            let problem = file.design_problem_with_beta(&beta)?;
            Ok((b, solve(&problem, method, &cfg)?))
        })
        .collect()
}

#[derive(Debug, Clone, PartialEq)]
pub struct RegionArgs {
    pub beta0: f64,
    pub lo: f64,
    pub hi: f64,
    pub steps: usize,
    pub link: WeightFunction,
    pub grid_steps: usize,
}

pub fn region(args: &RegionArgs) -> CliResult<RegionGrid> {
    if !(args.beta0.is_finite() && args.lo.is_finite() && args.hi.is_finite()) || args.steps == 0 || args.lo > args.hi {
        return Err(CliError::input("--beta0/--range/--steps: need finite values, lo <= hi and steps >= 1"));
    }
    if args.grid_steps < 2 {
        return Err(CliError::input("--grid-steps: need at least 2"));
    }
    Ok(region_sweep(&RegionSpec {
        beta0: args.beta0,
        beta1_range: (args.lo, args.hi),
        beta2_range: (args.lo, args.hi),
        steps: args.steps,
        weight_fn: args.link.clone(),
        boundary: BoundaryConfig { grid_steps: args.grid_steps, ..BoundaryConfig::default() },
    }))
}

/// CSV `beta1,beta2,min_s,verdict`, or with `boundary` the zero contour as
/// `piece,index,beta1,beta2`. Failed nodes leave `min_s` and `verdict` empty.
pub fn cmd_region(args: &RegionArgs, boundary: bool) -> CliResult<String> {
    let grid = region(args)?;
    let mut w = csv::Writer::from_writer(Vec::new());
    if boundary {
        w.write_record(["piece", "index", "beta1", "beta2"])?;
        for (k, line) in grid.boundary_polylines().iter().enumerate() {
            for (i, &(b1, b2)) in line.iter().enumerate() {
                w.write_record([k.to_string(), i.to_string(), real(b1), real(b2)])?;
            }
        }
    } else {
        w.write_record(["beta1", "beta2", "min_s", "verdict"])?;
        for node in &grid.nodes {
            w.write_record([
                real(node.beta1),
                real(node.beta2),
                node.min_s.map(real).unwrap_or_default(),
                node.verdict.map(|v| v.to_string()).unwrap_or_default(),
            ])?;
        }
    }
    finish(w)
}
