use std::io::Write;
use std::path::Path;
use std::process::{Command, Output};

use glmdesign::liftone::{liftone_maximize, LiftOneConfig};
use glmdesign::SolveReport;
use glmdesign_cli::bench::{bench, BenchModel, BenchSpec, BetaDistribution};
use glmdesign_cli::commands::{cmd_solve, region, solve_problem, sweep_beta, Format, Range, RegionArgs};
use glmdesign_cli::ProblemFile;
use glmdesign::{Method, WeightFunction};
use proptest::prelude::*;
use tempfile::NamedTempFile;

fn glmdesign(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_glmdesign")).args(args).output().expect("binary runs")
}

fn docs(name: &str) -> String {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("../../docs/problems").join(name).display().to_string()
}

fn temp_problem(json: &str) -> NamedTempFile {
    let mut f = NamedTempFile::new().unwrap();
    f.write_all(json.as_bytes()).unwrap();
    f
}

fn two_by_two(beta: [f64; 3]) -> ProblemFile {
    ProblemFile::from_json(&format!(
        r#"{{"link": "logit", "beta": [{}, {}, {}], "design_points": [[1, 1], [1, -1], [-1, 1], [-1, -1]], "model_terms": "main-effects"}}"#,
        beta[0], beta[1], beta[2]
    ))
    .unwrap()
}

#[test]
fn solve_exits_zero_and_prints_json() {
    let out = glmdesign(&["solve", &docs("two_by_two_logit.json")]);
    assert_eq!(out.status.code(), Some(0));
    let r: SolveReport = serde_json::from_slice(&out.stdout).unwrap();
    assert_eq!(r.allocation.len(), 4);
    assert!(r.case_label.starts_with("2x2-") || r.case_label.starts_with("twofactor-"));
}

#[test]
fn eight_point_file_reproduces_mu() {
    let out = glmdesign(&["solve", &docs("saturated_eight_points.json")]);
    assert_eq!(out.status.code(), Some(0));
    let r: SolveReport = serde_json::from_slice(&out.stdout).unwrap();
    assert!((r.diagnostic("mu").unwrap() - 0.09260780864).abs() < 1e-9);
    assert!((r.allocation.as_slice()[0] - 0.1394693827).abs() < 1e-8);
    assert!((r.allocation.as_slice()[7] - 0.1077896806).abs() < 1e-8);
}

#[test]
fn continuous_file_reports_a_verdict() {
    let out = glmdesign(&["solve", &docs("continuous_rectangle.json")]);
    assert_eq!(out.status.code(), Some(0));
    let r: SolveReport = serde_json::from_slice(&out.stdout).unwrap();
    assert!(r.diagnostic("boundary_optimal").is_some());
}

#[test]
fn bad_input_exits_two() {
    let f = temp_problem(r#"{"link": "logit", "beta": [1.0, 2.0], "design_points": [[1, 1], [1, -1], [-1, 1], [-1, -1]], "model_terms": "main-effects"}"#);
    let out = glmdesign(&["solve", f.path().to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(2));
    assert!(!out.stderr.is_empty());

    let out = glmdesign(&["solve", "/nonexistent/problem.json"]);
    assert_eq!(out.status.code(), Some(2));

    let out = glmdesign(&["solve", &docs("two_by_two_logit.json"), "--method", "simplex"]);
    assert_eq!(out.status.code(), Some(2));
}

#[test]
fn analytic_on_unsupported_shape_exits_three() {
    let f = temp_problem(
        r#"{"link": "logit", "beta": [0.5, 1.0, -1.0], "design_points": [[1, 1], [1, -1], [-1, 1], [-1, -1], [0, 0]], "model_terms": "main-effects"}"#,
    );
    let out = glmdesign(&["solve", f.path().to_str().unwrap(), "--method", "analytic"]);
    assert_eq!(out.status.code(), Some(3));
    let out = glmdesign(&["solve", f.path().to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(0));
}

#[test]
fn csv_output_has_header_and_row() {
    let text = cmd_solve(&two_by_two([-2.0, 1.0, 0.5]), Method::Auto, 1e-12, Format::Csv).unwrap();
    let lines: Vec<&str> = text.lines().collect();
    assert_eq!(lines.len(), 2);
    assert!(lines[0].starts_with("case_label,objective,p1,p2,p3,p4"));
}

#[test]
fn analytic_agrees_with_liftone_through_the_cli() {
    let file = two_by_two([-2.0, 1.0, 0.5]);
    let a = solve_problem(&file, Method::Analytic, 1e-12).unwrap();
    let l = liftone_maximize(&file.design_problem().unwrap(), &LiftOneConfig::default()).unwrap();
    assert!((a.objective - l.objective).abs() <= 1e-9 * a.objective);
}

#[test]
fn sweep_is_smooth_symmetric_and_matches_solve() {
    let file = two_by_two([-2.0, 1.0, 0.0]);
    let range = Range::parse("-1:1:201", "--range").unwrap();
    let rows = sweep_beta(&file, 2, range, Method::Analytic, 1e-12).unwrap();
    assert_eq!(rows.len(), 201);
    let max_jump = rows
        .windows(2)
        .map(|w| (w[1].1.allocation.as_slice()[0] - w[0].1.allocation.as_slice()[0]).abs())
        .fold(0.0, f64::max);
    assert!(max_jump <= 5.0 * 2.0 / 201.0, "{max_jump}");

    // beta2 = 0 makes the points (x1, 1) and (x1, -1) interchangeable
    let (b, mid) = &rows[100];
    assert_eq!(*b, 0.0);
    let p = mid.allocation.as_slice();
    assert!((p[0] - p[1]).abs() < 1e-12 && (p[2] - p[3]).abs() < 1e-12);

    for (b, r) in [&rows[0], &rows[200]] {
        let direct = solve_problem(&two_by_two([-2.0, 1.0, *b]), Method::Analytic, 1e-12).unwrap();
        assert_eq!(r.allocation, direct.allocation);
    }
}

#[test]
fn sweep_subcommand_writes_csv() {
    let out = glmdesign(&["sweep-beta", &docs("two_by_two_logit.json"), "--vary", "1", "--range", "-1:1:5"]);
    assert_eq!(out.status.code(), Some(0));
    let text = String::from_utf8(out.stdout).unwrap();
    assert_eq!(text.lines().next().unwrap(), "beta,p1,p2,p3,p4,objective,case_label");
    assert_eq!(text.lines().count(), 6);

    let out = glmdesign(&["sweep-beta", &docs("two_by_two_logit.json"), "--vary", "7", "--range", "-1:1:5"]);
    assert_eq!(out.status.code(), Some(2));
}

#[test]
fn region_single_step_and_symmetry() {
    let args = RegionArgs { beta0: -1.0, lo: -2.0, hi: 2.0, steps: 1, link: WeightFunction::Logit, grid_steps: 51 };
    let g = region(&args).unwrap();
    assert_eq!(g.nodes.len(), 1);

    let g = region(&RegionArgs { steps: 9, ..args }).unwrap();
    let m = g.beta1.len();
    for i in 0..m {
        for j in 0..m {
            let v = g.node(i, j).verdict;
            assert_eq!(v, g.node(j, i).verdict);
            assert_eq!(v, g.node(m - 1 - i, m - 1 - j).verdict);
        }
    }
    assert_eq!(g.node(4, 4).verdict, Some(true));
}

#[test]
fn region_subcommand_rows() {
    let out = glmdesign(&["region", "--beta0", "-1", "--steps", "3", "--grid-steps", "21"]);
    assert_eq!(out.status.code(), Some(0));
    let text = String::from_utf8(out.stdout).unwrap();
    assert_eq!(text.lines().next().unwrap(), "beta1,beta2,min_s,verdict");
    assert_eq!(text.lines().count(), 10);

    let out = glmdesign(&["region", "--beta0", "-1", "--range", "2:-2"]);
    assert_eq!(out.status.code(), Some(2));
}

#[test]
fn bench_is_deterministic_for_a_seed() {
    let spec = BenchSpec::two_by_two(200, 9);
    let a = bench(&spec).unwrap();
    let b = bench(&spec).unwrap();
    assert_eq!(a.liftone.mean_efficiency, b.liftone.mean_efficiency);
    assert_eq!(a.liftone.min_efficiency, b.liftone.min_efficiency);
    assert_eq!(a.analytic.failures, 0);
}

#[test]
fn bench_on_a_saturated_factorial() {
    let spec = BenchSpec {
        n_instances: 200,
        distribution: BetaDistribution::Normal { sigma: 1.0 },
        seed: 1,
        model: BenchModel::Factorial(3),
        tol: 1e-12,
    };
    let s = bench(&spec).unwrap();
    assert_eq!(s.analytic.failures, 0);
    assert_eq!(s.liftone.failures, 0);
    assert!(s.liftone.min_efficiency > 1.0 - 1e-8);
}

#[test]
fn bench_subcommand_prints_two_rows() {
    let out = glmdesign(&["bench", "--instances", "50", "--seed", "3", "--threads", "2"]);
    assert_eq!(out.status.code(), Some(0));
    let text = String::from_utf8(out.stdout).unwrap();
    assert_eq!(text.lines().count(), 3);
    assert!(text.lines().nth(1).unwrap().starts_with("analytic,50,0,"));
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn json_report_round_trips_exactly(beta in prop::array::uniform3(-3.0f64..3.0)) {
        let text = cmd_solve(&two_by_two(beta), Method::Auto, 1e-12, Format::Json).unwrap();
        let parsed: SolveReport = serde_json::from_str(&text).unwrap();
        prop_assert_eq!(serde_json::to_string_pretty(&parsed).unwrap() + "\n", text);
    }
}
