mod common;

use common::origin;
use rand::rngs::StdRng;
use rand::SeedableRng;
use smoothfwd::experiment::{DayOptions, MarketData, SpreadSpec};
use smoothfwd::ipm::constraint_errors;
use smoothfwd::{
    eval_w, seed_default, seed_random, solve_curve, CashFlowSchedule, CurveGrid, CurveProblem, LogPriceBounds,
    SmoothnessWeights, SolverParams, Termination,
};

fn zero_coupon(n: usize, rho: f64, spread: f64) -> CurveProblem<f64> {
    let grid = CurveGrid::daily(origin(), n, 365.0);
    let sched = CashFlowSchedule::new("Z", vec![n], vec![1.0]).unwrap();
    let bounds = LogPriceBounds { rho_b: rho - spread / 2.0, rho_a: rho + spread / 2.0 };
    CurveProblem::new(grid, vec![sched], vec![bounds], SmoothnessWeights::df(), true).unwrap()
}

fn monday(weights: SmoothnessWeights<f64>, spread: f64) -> CurveProblem<f64> {
    let opts = DayOptions { weights, ..DayOptions::default() };
    MarketData::sample().day_problem(origin(), &SpreadSpec::uniform(spread), &opts).unwrap().problem
}

#[test]
fn single_zero_coupon_gives_a_flat_curve() {
    let n = 730;
    let rho = (0.92f64).ln();
    let p = zero_coupon(n, rho, 0.0);
    let sol = solve_curve(&p, seed_default(&p), &SolverParams::default()).unwrap();
    // A constant curve has W = 0, so the run ends on the straight-line test.
    assert_eq!(sol.report.termination, Termination::StraightLine);
    // The payment at stage n discounts through stage n - 1.
    let level = -rho / p.grid.xi[..n - 1].iter().sum::<f64>();
    let dev = sol.curve.f.iter().map(|f| (f - level).abs()).fold(0.0, f64::max);
    assert!(dev <= 1e-6 * level, "deviation {dev}");
}

#[test]
fn flat_case_in_single_precision() {
    let grid = CurveGrid::from_lengths(origin(), vec![0.25f32; 20], 365.0).unwrap();
    let sched = CashFlowSchedule::new("Z", vec![20], vec![1.0f32]).unwrap();
    let rho = (0.8f32).ln();
    let bounds = LogPriceBounds { rho_b: rho, rho_a: rho };
    let p = CurveProblem::new(grid, vec![sched], vec![bounds], SmoothnessWeights::df(), true).unwrap();
    // The barrier tilts the free last stage by about mu * xi / (gamma f).
    let params = SolverParams { mu_min: 1e-8, mu_max: 1e-7, eps_max: 1e-5, w_zero: 1e-14, ..SolverParams::default() };
    let sol = solve_curve(&p, seed_default(&p), &params).unwrap();
    assert!(sol.report.is_solved());
    let level = -rho / (19.0 * 0.25);
    assert!(sol.curve.f.iter().all(|f| (f - level).abs() <= 1e-4 * level));
}

#[test]
fn iterates_stay_interior_and_barriers_only_shrink() {
    let p = monday(SmoothnessWeights::ad(), 0.01);
    let sol = solve_curve(&p, seed_default(&p), &SolverParams::default()).unwrap();
    assert!(sol.curve.f.iter().all(|&f| f > 0.0));
    assert!(p.bounds.iter().zip(&sol.rho).all(|(b, r)| b.rho_b < *r && *r < b.rho_a));
    for w in sol.report.trace.windows(2) {
        assert!(w[1].mu <= w[0].mu && w[1].mu_tilde <= w[0].mu_tilde);
        assert!(w[1].alpha > 0.0 && w[1].alpha <= 1.0);
    }
    let (eps, _) = constraint_errors(&p, &sol.curve.f, &sol.rho);
    assert_eq!(eps, sol.report.eps);
}

#[test]
fn reported_w_is_the_smoothness_of_the_returned_curve() {
    let p = monday(SmoothnessWeights::df(), 0.01);
    let sol = solve_curve(&p, seed_default(&p), &SolverParams::default()).unwrap();
    assert_eq!(sol.report.w, eval_w(&sol.curve, &p.weights));
    assert_eq!(sol.report.trace.last().unwrap().w, sol.report.w);
}

#[test]
fn solves_are_deterministic() {
    let p = monday(SmoothnessWeights::from_sqrt_ratio(1.0).unwrap(), 0.005);
    let params = SolverParams::default();
    let a = solve_curve(&p, seed_default(&p), &params).unwrap();
    let b = solve_curve(&p, seed_default(&p), &params).unwrap();
    assert_eq!(a.curve.f, b.curve.f);
    assert_eq!(a.report.trace, b.report.trace);
}

#[test]
fn strict_step_policy_also_converges() {
    let p = monday(SmoothnessWeights::df(), 0.01);
    let params = SolverParams { strict_paper_step: true, ..SolverParams::default() };
    let sol = solve_curve(&p, seed_default(&p), &params).unwrap();
    assert!(sol.report.is_solved());
    assert_eq!(sol.report.undamped_steps, 0);
    assert!(sol.report.trace.iter().all(|t| t.alpha < 1.0));
}

#[test]
fn iteration_cap_is_reported() {
    let p = monday(SmoothnessWeights::df(), 0.01);
    let params = SolverParams { n_min: 1, n_max: 3, ..SolverParams::default() };
    let sol = solve_curve(&p, seed_default(&p), &params).unwrap();
    assert_eq!(sol.report.termination, Termination::MaxIterations);
    assert_eq!(sol.report.iterations, 3);
    assert!(!sol.report.is_solved());
}

#[test]
fn random_seeds_reach_the_same_curve() {
    let p = monday(SmoothnessWeights::df(), 0.01);
    let params = SolverParams { delta_ln_w_max: 1e-8, n_max: 200, ..SolverParams::default() };
    let base = solve_curve(&p, seed_default(&p), &params).unwrap();
    let mut rng = StdRng::seed_from_u64(1);
    for _ in 0..3 {
        let sol = solve_curve(&p, seed_random(&p, &mut rng), &params).unwrap();
        assert!((sol.report.w / base.report.w - 1.0).abs() < 1e-6);
    }
}

#[test]
fn dropping_a_constraint_cannot_raise_w() {
    let p = monday(SmoothnessWeights::ad(), 0.005);
    let params = SolverParams { delta_ln_w_max: 1e-8, n_max: 200, ..SolverParams::default() };
    let full = solve_curve(&p, seed_default(&p), &params).unwrap();
    for j in [0, 5, 10] {
        let q = p.without(j);
        let loo = solve_curve(&q, seed_default(&q), &params).unwrap();
        assert!(loo.report.w <= full.report.w + 1e-9);
    }
}

#[test]
fn rejects_a_seed_outside_the_domain() {
    let p = monday(SmoothnessWeights::df(), 0.01);
    let mut seed = seed_default(&p);
    seed.f[10] = -0.01;
    assert!(solve_curve(&p, seed, &SolverParams::default()).is_err());
}
