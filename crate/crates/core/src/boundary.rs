//! Two continuous factors on a rectangle: when do the four corners alone
//! support a D-optimal design?
//!
//! After rescaling the rectangle to `[-1, 1]^2`, the corner design with the
//! closed-form four-point allocation `p4` is D-optimal if and only if
//!
//! `s(a, b) = 3/4 f(p4) - nu(beta0 + a beta1 + b beta2) h(a, b) >= 0`
//!
//! for every candidate fifth point `(a, b)` in the square. `s` is minimized
//! on a dense grid and the best grid cells are then polished by compass
//! search. Corners are numbered `(1,1), (1,-1), (-1,1), (-1,-1)`.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::design::Allocation;
use crate::error::{DesignError, Result};
use crate::solver22::{solve_22, VCoefficients};
use crate::weight::WeightFunction;

/// Verdict tolerance relative to `f(p4)`.
pub const VERDICT_TOL: f64 = 1e-10;

/// Compass search stops once its step drops below this.
pub const POLISH_TOL: f64 = 1e-10;

pub const CORNERS: [(f64, f64); 4] = [(1.0, 1.0), (1.0, -1.0), (-1.0, 1.0), (-1.0, -1.0)];

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ContinuousProblem {
    pub beta: [f64; 3],
    /// `(a1, b1, a2, b2)` with `x1 in [a1, b1]`, `x2 in [a2, b2]`.
    pub bounds: [f64; 4],
    pub weight_fn: WeightFunction,
}

impl ContinuousProblem {
    pub fn new(beta: [f64; 3], bounds: [f64; 4], weight_fn: WeightFunction) -> Result<Self> {
        if beta.iter().chain(&bounds).any(|v| !v.is_finite()) {
            return Err(DesignError::NonFinite("beta or bounds"));
        }
        if !(bounds[0] < bounds[1] && bounds[2] < bounds[3]) {
            return Err(DesignError::Domain(format!("bounds {bounds:?} are not ordered")));
        }
        Ok(Self { beta, bounds, weight_fn })
    }

    /// On the unit square.
    pub fn unit(beta: [f64; 3], weight_fn: WeightFunction) -> Self {
        Self { beta, bounds: [-1.0, 1.0, -1.0, 1.0], weight_fn }
    }

    pub fn eta(&self, x1: f64, x2: f64) -> f64 {
        self.beta[0] + self.beta[1] * x1 + self.beta[2] * x2
    }

    /// The four rectangle corners in the standard order.
    pub fn corners(&self) -> [(f64, f64); 4] {
        let [a1, b1, a2, b2] = self.bounds;
        [(b1, b2), (b1, a2), (a1, b2), (a1, a2)]
    }

    pub fn corner_weights(&self) -> Result<[f64; 4]> {
        let c = self.corners();
        let mut w = [0.0; 4];
        for (k, &(x1, x2)) in c.iter().enumerate() {
            w[k] = self.weight_fn.eval(self.eta(x1, x2))?;
        }
        Ok(w)
    }

    fn is_unit(&self) -> bool {
        self.bounds == [-1.0, 1.0, -1.0, 1.0]
    }
}

/// Affine map between a rectangle and `[-1, 1]^2`: `x = mid + x* half`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Transform {
    pub mid: [f64; 2],
    pub half: [f64; 2],
}

impl Transform {
    pub fn to_original(&self, xs: (f64, f64)) -> (f64, f64) {
        (self.mid[0] + xs.0 * self.half[0], self.mid[1] + xs.1 * self.half[1])
    }

    pub fn to_unit(&self, x: (f64, f64)) -> (f64, f64) {
        ((x.0 - self.mid[0]) / self.half[0], (x.1 - self.mid[1]) / self.half[1])
    }

    /// Determinant of the map taking original model rows `(1, x1, x2)` to
    /// unit-square rows: `4 / ((b1 - a1)(b2 - a2))`.
    pub fn det(&self) -> f64 {
        1.0 / (self.half[0] * self.half[1])
    }
}

/// Equivalent problem on `[-1, 1]^2` with the same linear predictor at
/// corresponding points.
pub fn rescale_problem(cp: &ContinuousProblem) -> (ContinuousProblem, Transform) {
    let [a1, b1, a2, b2] = cp.bounds;
    let t = Transform { mid: [(a1 + b1) / 2.0, (a2 + b2) / 2.0], half: [(b1 - a1) / 2.0, (b2 - a2) / 2.0] };
    let [b0, bt1, bt2] = cp.beta;
    let beta = [b0 + bt1 * t.mid[0] + bt2 * t.mid[1], bt1 * t.half[0], bt2 * t.half[1]];
    (ContinuousProblem::unit(beta, cp.weight_fn.clone()), t)
}

/// `h(a, b)` for corner allocation `p` and corner weights `w`.
pub fn h_ab(a: f64, b: f64, p: &[f64; 4], w: &[f64; 4]) -> f64 {
    let q = |i: usize, j: usize| p[i] * p[j] * w[i] * w[j];
    let (q12, q13, q14, q23, q24, q34) = (q(0, 1), q(0, 2), q(0, 3), q(1, 2), q(1, 3), q(2, 3));
    q12 + q13 + q24 + q34
        + b * b * (q13 + q23 + q14 + q24)
        + 2.0 * b * (-q13 + q24)
        + a * a * (q12 + q23 + q14 + q34)
        + 2.0 * a * (-q12 + q34)
        + 2.0 * a * b * (q23 - q14)
}

/// `f(p4) = 16 (q1 q2 q3 + q1 q2 q4 + q1 q3 q4 + q2 q3 q4)`, `q_i = p_i w_i`.
pub fn corner_objective(p: &[f64; 4], w: &[f64; 4]) -> f64 {
    let q: Vec<f64> = p.iter().zip(w).map(|(a, b)| a * b).collect();
    16.0 * (q[0] * q[1] * q[2] + q[0] * q[1] * q[3] + q[0] * q[2] * q[3] + q[1] * q[2] * q[3])
}

/// Everything `s(a, b)` needs, for a problem on the unit square.
#[derive(Debug, Clone, PartialEq)]
pub struct SFunction {
    beta: [f64; 3],
    weight_fn: WeightFunction,
    p4: [f64; 4],
    w: [f64; 4],
    f_p4: f64,
}

impl SFunction {
    /// Uses the closed-form optimum for the corner weights.
    pub fn new(cp: &ContinuousProblem) -> Result<Self> {
        if !cp.is_unit() {
            return Err(DesignError::Domain("boundary check expects the unit square; rescale first".into()));
        }
        let w = cp.corner_weights()?;
        let report = solve_22(&VCoefficients::new(w.map(|x| 1.0 / x))?)?;
        let p = report.allocation.as_slice();
        Ok(Self::with_allocation(cp, [p[0], p[1], p[2], p[3]], w))
    }

    /// Uses an arbitrary corner allocation.
    pub fn with_allocation(cp: &ContinuousProblem, p4: [f64; 4], w: [f64; 4]) -> Self {
        Self { beta: cp.beta, weight_fn: cp.weight_fn.clone(), p4, w, f_p4: corner_objective(&p4, &w) }
    }

    pub fn p4(&self) -> [f64; 4] {
        self.p4
    }

    pub fn f_p4(&self) -> f64 {
        self.f_p4
    }

    pub fn eval(&self, a: f64, b: f64) -> Result<f64> {
        let w5 = self.weight_fn.eval(self.beta[0] + a * self.beta[1] + b * self.beta[2])?;
        Ok(0.75 * self.f_p4 - w5 * h_ab(a, b, &self.p4, &self.w))
    }
}

/// `s(a, b)` for a unit-square problem at its closed-form `p4`.
pub fn s_ab(cp: &ContinuousProblem, a: f64, b: f64) -> Result<f64> {
    SFunction::new(cp)?.eval(a, b)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BoundaryVerdict {
    pub boundary_optimal: bool,
    pub min_s: f64,
    pub argmin: (f64, f64),
    pub p4: Allocation,
    pub f_p4: f64,
}

impl BoundaryVerdict {
    /// `min_s / f(p4)`.
    pub fn relative_margin(&self) -> f64 {
        self.min_s / self.f_p4
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct BoundaryConfig {
    /// Nodes per side of the `(a, b)` grid.
    pub grid_steps: usize,
    /// Number of best grid local minima to polish.
    pub polish_starts: usize,
}

impl Default for BoundaryConfig {
    fn default() -> Self {
        Self { grid_steps: 201, polish_starts: 8 }
    }
}

/// `steps` nodes from `lo` to `hi`, exactly symmetric about the midpoint.
pub fn symmetric_nodes(lo: f64, hi: f64, steps: usize) -> Vec<f64> {
    if steps <= 1 {
        return vec![lo];
    }
    let mid = 0.5 * (lo + hi);
    let half = 0.5 * (hi - lo);
    let last = (steps - 1) as f64;
    (0..steps)
        .map(|i| {
            let t = (2 * i) as f64 - last;
            if t == 0.0 {
                mid
            } else {
                mid + half * t / last
            }
        })
        .collect()
}

/// Decides boundary optimality of a unit-square problem.
pub fn check_boundary_optimal(cp: &ContinuousProblem) -> Result<BoundaryVerdict> {
    check_boundary_optimal_with(cp, &BoundaryConfig::default())
}

pub fn check_boundary_optimal_with(cp: &ContinuousProblem, config: &BoundaryConfig) -> Result<BoundaryVerdict> {
    let s = SFunction::new(cp)?;
    let (min_s, argmin) = minimize_s(&s, config)?;
    let p4 = Allocation::new(s.p4.to_vec())?;
    Ok(BoundaryVerdict {
        boundary_optimal: min_s >= -VERDICT_TOL * s.f_p4,
        min_s,
        argmin,
        p4,
        f_p4: s.f_p4,
    })
}

/// Global minimum of `s` over the square: grid, then compass search from
/// the best grid local minima and from the corners.
pub fn minimize_s(s: &SFunction, config: &BoundaryConfig) -> Result<(f64, (f64, f64))> {
    let steps = config.grid_steps.max(2);
    let nodes = symmetric_nodes(-1.0, 1.0, steps);
    let mut grid = vec![0.0; steps * steps];
    for (i, &a) in nodes.iter().enumerate() {
        for (j, &b) in nodes.iter().enumerate() {
            grid[i * steps + j] = s.eval(a, b)?;
        }
    }
    let mut minima: Vec<(f64, usize, usize)> = Vec::new();
    for i in 0..steps {
        for j in 0..steps {
            let v = grid[i * steps + j];
            let lower = |ii: usize, jj: usize| grid[ii * steps + jj] < v;
            let neighbours = [
                (i.wrapping_sub(1), j),
                (i + 1, j),
                (i, j.wrapping_sub(1)),
                (i, j + 1),
            ];
            if neighbours.iter().all(|&(ii, jj)| ii >= steps || jj >= steps || !lower(ii, jj)) {
                minima.push((v, i, j));
            }
        }
    }
    minima.sort_by(|x, y| x.0.total_cmp(&y.0));
    let spacing = 2.0 / (steps - 1) as f64;
    let mut starts: Vec<(f64, f64)> =
        minima.iter().take(config.polish_starts.max(1)).map(|&(_, i, j)| (nodes[i], nodes[j])).collect();
    starts.extend_from_slice(&CORNERS);

    let mut best = (f64::INFINITY, (0.0, 0.0));
    for start in starts {
        let (v, at) = compass_search(s, start, spacing)?;
        if v < best.0 {
            best = (v, at);
        }
    }
    Ok(best)
}

fn compass_search(s: &SFunction, start: (f64, f64), initial_step: f64) -> Result<(f64, (f64, f64))> {
    let clamp = |x: f64| x.clamp(-1.0, 1.0);
    let mut at = start;
    let mut value = s.eval(at.0, at.1)?;
    let mut step = initial_step;
    while step >= POLISH_TOL {
        let mut moved = false;
        for (da, db) in [(1.0, 0.0), (-1.0, 0.0), (0.0, 1.0), (0.0, -1.0)] {
            let cand = (clamp(at.0 + da * step), clamp(at.1 + db * step));
            if cand == at {
                continue;
            }
            let v = s.eval(cand.0, cand.1)?;
            if v < value {
                value = v;
                at = cand;
                moved = true;
                break;
            }
        }
        if !moved {
            step *= 0.5;
        }
    }
    Ok((value, at))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RegionNode {
    pub beta1: f64,
    pub beta2: f64,
    /// `None` when the node failed (for example a non-positive weight).
    pub min_s: Option<f64>,
    pub f_p4: Option<f64>,
    pub verdict: Option<bool>,
}

impl RegionNode {
    /// `min_s / f(p4) + tol`: non-negative exactly when the verdict is true.
    pub fn margin(&self) -> Option<f64> {
        Some(self.min_s? / self.f_p4? + VERDICT_TOL)
    }
}

/// Verdicts over a `(beta1, beta2)` grid; `nodes` is row-major with `beta1`
/// varying slowest.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RegionGrid {
    pub beta0: f64,
    pub beta1: Vec<f64>,
    pub beta2: Vec<f64>,
    pub nodes: Vec<RegionNode>,
}

impl RegionGrid {
    pub fn node(&self, i: usize, j: usize) -> &RegionNode {
        &self.nodes[i * self.beta2.len() + j]
    }

    pub fn true_count(&self) -> usize {
        self.nodes.iter().filter(|n| n.verdict == Some(true)).count()
    }

    /// Connected (4-neighbour) components of verdict-true nodes.
    pub fn true_components(&self) -> usize {
        let (r, c) = (self.beta1.len(), self.beta2.len());
        let mut seen = vec![false; r * c];
        let mut count = 0;
        for start in 0..r * c {
            if seen[start] || self.nodes[start].verdict != Some(true) {
                continue;
            }
            count += 1;
            let mut stack = vec![start];
            seen[start] = true;
            while let Some(k) = stack.pop() {
                let (i, j) = (k / c, k % c);
                let mut visit = |ii: usize, jj: usize| {
                    let kk = ii * c + jj;
                    if !seen[kk] && self.nodes[kk].verdict == Some(true) {
                        seen[kk] = true;
                        stack.push(kk);
                    }
                };
                if i > 0 {
                    visit(i - 1, j);
                }
                if i + 1 < r {
                    visit(i + 1, j);
                }
                if j > 0 {
                    visit(i, j - 1);
                }
                if j + 1 < c {
                    visit(i, j + 1);
                }
            }
        }
        count
    }

    /// Zero contour of the margin by marching squares, joined into polylines
    /// of `(beta1, beta2)` points. Cells touching a failed node are skipped.
    pub fn boundary_polylines(&self) -> Vec<Vec<(f64, f64)>> {
        let segments = self.contour_segments();
        join_segments(segments)
    }

    fn contour_segments(&self) -> Vec<[(f64, f64); 2]> {
        let (r, c) = (self.beta1.len(), self.beta2.len());
        let mut out = Vec::new();
        if r < 2 || c < 2 {
            return out;
        }
        for i in 0..r - 1 {
            for j in 0..c - 1 {
                let corner = [(i, j), (i + 1, j), (i + 1, j + 1), (i, j + 1)];
                let vals: Option<Vec<f64>> = corner.iter().map(|&(a, b)| self.node(a, b).margin()).collect();
                let Some(vals) = vals else { continue };
                let pts: Vec<(f64, f64)> = corner.iter().map(|&(a, b)| (self.beta1[a], self.beta2[b])).collect();
                let mut crossings = Vec::new();
                for e in 0..4 {
                    let (k, l) = (e, (e + 1) % 4);
                    let (va, vb) = (vals[k], vals[l]);
                    if (va >= 0.0) != (vb >= 0.0) {
                        let t = va / (va - vb);
                        crossings.push((
                            pts[k].0 + t * (pts[l].0 - pts[k].0),
                            pts[k].1 + t * (pts[l].1 - pts[k].1),
                        ));
                    }
                }
                match crossings.len() {
                    2 => out.push([crossings[0], crossings[1]]),
                    4 => {
                        // saddle: pair by the sign of the cell centre
                        let centre = vals.iter().sum::<f64>() / 4.0;
                        if (centre >= 0.0) == (vals[0] >= 0.0) {
                            out.push([crossings[0], crossings[3]]);
                            out.push([crossings[1], crossings[2]]);
                        } else {
                            out.push([crossings[0], crossings[1]]);
                            out.push([crossings[2], crossings[3]]);
                        }
                    }
                    _ => {}
                }
            }
        }
        out
    }
}

fn close(a: (f64, f64), b: (f64, f64)) -> bool {
    (a.0 - b.0).abs() < 1e-12 && (a.1 - b.1).abs() < 1e-12
}

fn join_segments(mut segments: Vec<[(f64, f64); 2]>) -> Vec<Vec<(f64, f64)>> {
    let mut lines = Vec::new();
    while let Some([a, b]) = segments.pop() {
        let mut line = vec![a, b];
        loop {
            let tail = *line.last().expect("non-empty");
            let head = line[0];
            if let Some(k) = segments.iter().position(|s| close(s[0], tail) || close(s[1], tail)) {
                let s = segments.swap_remove(k);
                line.push(if close(s[0], tail) { s[1] } else { s[0] });
            } else if let Some(k) = segments.iter().position(|s| close(s[0], head) || close(s[1], head)) {
                let s = segments.swap_remove(k);
                line.insert(0, if close(s[0], head) { s[1] } else { s[0] });
            } else {
                break;
            }
        }
        lines.push(line);
    }
    lines
}

#[derive(Debug, Clone, PartialEq)]
pub struct RegionSpec {
    pub beta0: f64,
    pub beta1_range: (f64, f64),
    pub beta2_range: (f64, f64),
    pub steps: usize,
    pub weight_fn: WeightFunction,
    pub boundary: BoundaryConfig,
}

/// Boundary-optimality verdicts over a `(beta1, beta2)` grid on the unit
/// square. Nodes are evaluated in parallel on the current rayon pool; the
/// output order does not depend on the thread count.
pub fn region_sweep(spec: &RegionSpec) -> RegionGrid {
    let beta1 = symmetric_nodes(spec.beta1_range.0, spec.beta1_range.1, spec.steps);
    let beta2 = symmetric_nodes(spec.beta2_range.0, spec.beta2_range.1, spec.steps);
    let pairs: Vec<(f64, f64)> = beta1.iter().flat_map(|&a| beta2.iter().map(move |&b| (a, b))).collect();
    let nodes = pairs
        .par_iter()
        .map(|&(b1, b2)| {
            let cp = ContinuousProblem::unit([spec.beta0, b1, b2], spec.weight_fn.clone());
            match check_boundary_optimal_with(&cp, &spec.boundary) {
                Ok(v) => RegionNode {
                    beta1: b1,
                    beta2: b2,
                    min_s: Some(v.min_s),
                    f_p4: Some(v.f_p4),
                    verdict: Some(v.boundary_optimal),
                },
                Err(_) => RegionNode { beta1: b1, beta2: b2, min_s: None, f_p4: None, verdict: None },
            }
        })
        .collect();
    RegionGrid { beta0: spec.beta0, beta1, beta2, nodes }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn identity_rescale() {
        let cp = ContinuousProblem::new([0.3, -1.0, 2.0], [-1.0, 1.0, -1.0, 1.0], WeightFunction::Logit).unwrap();
        let (u, t) = rescale_problem(&cp);
        assert_eq!(u.beta, cp.beta);
        assert_eq!(t.det(), 1.0);
    }

    #[test]
    fn shifted_rescale() {
        let cp = ContinuousProblem::new([1.0, 1.0, 1.0], [0.0, 2.0, 0.0, 4.0], WeightFunction::Logit).unwrap();
        let (u, t) = rescale_problem(&cp);
        assert_eq!(u.beta, [4.0, 1.0, 2.0]);
        assert_eq!(t.det(), 0.5);
        let x = (0.7, 3.1);
        let xs = t.to_unit(x);
        assert!((cp.eta(x.0, x.1) - u.eta(xs.0, xs.1)).abs() < 1e-12);
    }

    #[test]
    fn h_at_origin_with_equal_weights() {
        let w = 0.7;
        let p = [0.25; 4];
        assert!((h_ab(0.0, 0.0, &p, &[w; 4]) - w * w / 4.0).abs() < 1e-15);
    }

    #[test]
    fn h_point_symmetry() {
        let p = [0.3, 0.2, 0.2, 0.3];
        let w = [0.4, 0.9, 0.9, 0.4];
        for (a, b) in [(0.3, -0.8), (1.0, 1.0), (-0.2, 0.5)] {
            assert!((h_ab(a, b, &p, &w) - h_ab(-a, -b, &p, &w)).abs() < 1e-15);
        }
    }

    #[test]
    fn constant_weight_is_boundary_optimal() {
        let cp = ContinuousProblem::unit([0.5, 1.0, -2.0], WeightFunction::IdentityConstant);
        let v = check_boundary_optimal(&cp).unwrap();
        assert!(v.boundary_optimal);
        for &p in v.p4.as_slice() {
            assert!((p - 0.25).abs() < 1e-14);
        }
    }

    #[test]
    fn symmetric_logit_is_boundary_optimal() {
        let cp = ContinuousProblem::unit([-1.0, 0.0, 0.0], WeightFunction::Logit);
        assert!(check_boundary_optimal(&cp).unwrap().boundary_optimal);
    }

    #[test]
    fn corners_are_consistent() {
        for beta in [[-1.0, 0.5, 1.5], [0.2, -2.0, 0.7], [1.0, 1.0, 1.0]] {
            let s = SFunction::new(&ContinuousProblem::unit(beta, WeightFunction::Logit)).unwrap();
            for (a, b) in CORNERS {
                assert!(s.eval(a, b).unwrap() >= -VERDICT_TOL * s.f_p4());
            }
        }
    }

    #[test]
    fn symmetric_nodes_are_symmetric() {
        let n = symmetric_nodes(-2.0, 2.0, 41);
        for i in 0..41 {
            assert_eq!(n[i], -n[40 - i]);
        }
        assert_eq!(n[20], 0.0);
        assert_eq!(symmetric_nodes(-2.0, 2.0, 1), vec![-2.0]);
    }
}
