//! Interior-point Newton loop: linearize, solve the banded subproblem, damp
//! the step to stay interior, shrink the barriers, test termination.

use std::time::Instant;

use rand::Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::curve::{eval_w, integrated, residual_from_integrated, ForwardCurve};
use crate::dp::{dp_solve_refined, OpCounters};
use crate::error::{Error, Result};
use crate::linearize::{build_model, BarrierWeights};
use crate::market::LogPriceBounds;
use crate::problem::CurveProblem;
use crate::scalar::Real;

/// Tuning of the outer loop. Field names follow the usual symbols.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SolverParams {
    pub beta: f64,
    pub l: f64,
    pub xi_psi: f64,
    pub mu0: f64,
    pub mu_tilde0: f64,
    pub mu_min: f64,
    pub mu_tilde_min: f64,
    pub mu_max: f64,
    pub mu_tilde_max: f64,
    pub eps_max: f64,
    pub delta_ln_w_max: f64,
    pub w_zero: f64,
    pub n_min: usize,
    pub n_max: usize,
    pub positivity_enabled: bool,
    /// When off, every log price is held at its interval midpoint.
    pub spread_barrier_enabled: bool,
    /// Always take `beta * alpha_max`, even when the full step is interior.
    pub strict_paper_step: bool,
    /// Start `mu_tilde` at `n / (2 m) * mu0` instead of `mu_tilde0`.
    pub balanced_barriers: bool,
    /// Iterative refinement sweeps applied to each Newton step.
    pub refine_sweeps: usize,
}

impl Default for SolverParams {
    fn default() -> Self {
        SolverParams {
            beta: 0.9,
            l: 1e-2,
            xi_psi: 1.0,
            mu0: 1e-1,
            mu_tilde0: 1e1,
            mu_min: 1e-10,
            mu_tilde_min: 1e-10,
            mu_max: 1e-6,
            mu_tilde_max: 1e-6,
            eps_max: 1e-8,
            delta_ln_w_max: 1e-2,
            w_zero: 1e-9,
            n_min: 5,
            n_max: 60,
            positivity_enabled: true,
            spread_barrier_enabled: true,
            strict_paper_step: false,
            balanced_barriers: false,
            refine_sweeps: 1,
        }
    }
}

impl SolverParams {
    pub fn validate(&self) -> Result<()> {
        let bad = |what: &str| Err(Error::InvalidParams(what.to_string()));
        if !(self.beta > 0.0 && self.beta < 1.0) {
            return bad("beta must lie in (0, 1)");
        }
        if !(self.l > 0.0 && self.l < 1.0) {
            return bad("l must lie in (0, 1)");
        }
        if !(self.xi_psi > 0.0) {
            return bad("xi_psi must be positive");
        }
        if !(self.mu0 > 0.0 && self.mu_tilde0 > 0.0) {
            return bad("initial barriers must be positive");
        }
        if !(self.mu_min > 0.0 && self.mu_min < self.mu_max) || !(self.mu_tilde_min > 0.0 && self.mu_tilde_min < self.mu_tilde_max) {
            return bad("barrier floors must be positive and below the caps");
        }
        if !(self.eps_max > 0.0 && self.delta_ln_w_max > 0.0 && self.w_zero >= 0.0) {
            return bad("tolerances must be positive");
        }
        if self.n_min >= self.n_max {
            return bad("n_min must be below n_max");
        }
        Ok(())
    }

    /// Parses a TOML table; absent keys keep their defaults.
    pub fn from_toml_str(text: &str) -> Result<Self> {
        let p: SolverParams = toml::from_str(text).map_err(|e| Error::InvalidParams(e.to_string()))?;
        p.validate()?;
        Ok(p)
    }
}

/// Barrier shrink factor `(1 - l)(1 - alpha)^xi + l`.
pub fn psi(alpha: f64, params: &SolverParams) -> f64 {
    (1.0 - params.l) * (1.0 - alpha).max(0.0).powf(params.xi_psi) + params.l
}

pub fn update_barriers<T: Real>(w: BarrierWeights<T>, alpha: T, params: &SolverParams) -> BarrierWeights<T> {
    let k = T::lit(psi(alpha.as_f64(), params));
    BarrierWeights {
        mu: (k * w.mu).max(T::lit(params.mu_min)),
        mu_tilde: (k * w.mu_tilde).max(T::lit(params.mu_tilde_min)),
    }
}

/// Outcome of the step-length rule.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Step<T> {
    pub alpha: T,
    /// Largest step keeping the inequalities, capped at 1.
    pub alpha_max: T,
    /// True when the full Newton step was taken.
    pub undamped: bool,
}

/// Step length for the move `f + alpha delta`, `rho + alpha sigma`.
///
/// `alpha_max` is the smallest boundary ratio over the components the full
/// step would push out of the feasible set, and 1 when there are none.
/// A full step that keeps every distance to the boundary above `1 - beta`
/// times its current value is taken as is (unless `strict`); any other step
/// is `beta * alpha_max`.
pub fn step_length<T: Real>(
    positivity: bool,
    bounds: &[LogPriceBounds<T>],
    f: &[T],
    rho: &[T],
    delta: &[T],
    sigma: &[T],
    beta: T,
    strict: bool,
) -> Step<T> {
    let mut alpha_max = T::one();
    let mut margin = true;
    let keep = T::one() - beta;
    if positivity {
        for (fr, dr) in f.iter().zip(delta) {
            let trial = *fr + *dr;
            if !(trial > T::zero()) {
                alpha_max = alpha_max.min(-*fr / *dr);
            }
            if !(trial >= keep * *fr) {
                margin = false;
            }
        }
    }
    for ((b, r), s) in bounds.iter().zip(rho).zip(sigma) {
        if b.is_degenerate() {
            continue;
        }
        let trial = *r + *s;
        if !(trial > b.rho_b) {
            alpha_max = alpha_max.min((b.rho_b - *r) / *s);
        }
        if !(trial < b.rho_a) {
            alpha_max = alpha_max.min((b.rho_a - *r) / *s);
        }
        if !(trial - b.rho_b >= keep * (*r - b.rho_b)) || !(b.rho_a - trial >= keep * (b.rho_a - *r)) {
            margin = false;
        }
    }
    if margin && !strict {
        Step { alpha: T::one(), alpha_max, undamped: true }
    } else {
        Step { alpha: beta * alpha_max, alpha_max, undamped: false }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Termination {
    Converged,
    /// `W` fell below `w_zero`: the curve is a straight line for all purposes.
    StraightLine,
    MaxIterations,
}

/// State after one Newton iteration.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct TraceRow {
    pub iteration: usize,
    pub w: f64,
    pub eps: f64,
    pub mu: f64,
    pub mu_tilde: f64,
    pub alpha: f64,
    pub delta_ln_w: f64,
}

/// `ln W - ln W_prev`, with `0/0 -> 0` and `x/0 -> inf`.
pub fn delta_ln_w(w: f64, w_prev: f64) -> f64 {
    if w == w_prev {
        0.0
    } else if w_prev == 0.0 || w == 0.0 {
        f64::INFINITY
    } else {
        w.ln() - w_prev.ln()
    }
}

/// Which barrier caps take part in the termination test.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct ActiveBarriers {
    pub positivity: bool,
    pub spread: bool,
}

/// Termination decision after the last row of `trace`.
pub fn check_termination(trace: &[TraceRow], active: ActiveBarriers, params: &SolverParams) -> Option<Termination> {
    let n_it = trace.len();
    let last = trace.last()?;
    let straight = last.w < params.w_zero;
    let flat = n_it >= 2
        && last.delta_ln_w.abs() < params.delta_ln_w_max
        && trace[n_it - 2].delta_ln_w.abs() < params.delta_ln_w_max;
    let done = (straight || flat)
        && n_it > params.n_min
        && (!active.positivity || last.mu < params.mu_max)
        && (!active.spread || last.mu_tilde < params.mu_tilde_max)
        && last.eps < params.eps_max;
    if done {
        Some(if straight { Termination::StraightLine } else { Termination::Converged })
    } else if n_it >= params.n_max {
        Some(Termination::MaxIterations)
    } else {
        None
    }
}

/// Starting point of the iteration.
#[derive(Debug, Clone, PartialEq)]
pub struct Seed<T> {
    pub f: Vec<T>,
    pub rho: Vec<T>,
}

pub const DEFAULT_SEED_RATE: f64 = 0.04;

/// Flat `0.04 / year` and every log price at the middle of its interval.
pub fn seed_default<T: Real>(problem: &CurveProblem<T>) -> Seed<T> {
    Seed { f: vec![T::lit(DEFAULT_SEED_RATE); problem.n()], rho: problem.bounds.iter().map(|b| b.mid()).collect() }
}

/// Flat `0.04 / year` and log prices drawn uniformly inside their intervals.
pub fn seed_random<T: Real, R: Rng>(problem: &CurveProblem<T>, rng: &mut R) -> Seed<T> {
    let rho = problem
        .bounds
        .iter()
        .map(|b| {
            let x = rng.gen_range(0.01..0.99);
            if b.is_degenerate() {
                b.mid()
            } else {
                b.rho_b + T::lit(x) * b.spread()
            }
        })
        .collect();
    Seed { f: vec![T::lit(DEFAULT_SEED_RATE); problem.n()], rho }
}

/// Iterate of the loop.
#[derive(Debug, Clone)]
pub struct SolverState<T> {
    pub s: usize,
    pub f: Vec<T>,
    pub rho: Vec<T>,
    pub barriers: BarrierWeights<T>,
    pub lambda: Vec<T>,
}

#[derive(Debug, Clone, Serialize)]
pub struct SolveReport {
    pub termination: Termination,
    pub iterations: usize,
    /// Set when the iteration limit was hit.
    pub alarm: bool,
    pub w_initial: f64,
    pub w: f64,
    pub eps: f64,
    /// Log-price residual per constraint at the final iterate.
    pub residuals: Vec<f64>,
    pub trace: Vec<TraceRow>,
    pub undamped_steps: usize,
    pub ridged_pivots: usize,
    /// Operation counts of the last subproblem solve.
    pub counters: OpCounters,
    pub warnings: Vec<String>,
    pub wall_time_s: f64,
}

impl SolveReport {
    pub fn is_solved(&self) -> bool {
        self.termination != Termination::MaxIterations
    }
}

#[derive(Debug, Clone)]
pub struct Solution<T> {
    pub curve: ForwardCurve<T>,
    pub rho: Vec<T>,
    pub lambda: Vec<T>,
    pub report: SolveReport,
}

/// Largest absolute log-price residual and all residuals.
pub fn constraint_errors<T: Real>(problem: &CurveProblem<T>, f: &[T], rho: &[T]) -> (f64, Vec<f64>) {
    let s = integrated(f, &problem.grid.xi);
    let res: Vec<f64> = problem
        .schedules
        .iter()
        .zip(rho)
        .map(|(sched, r)| residual_from_integrated(&s, *r, sched).value.as_f64())
        .collect();
    (res.iter().fold(0.0, |m, x| m.max(x.abs())), res)
}

/// The problem as the loop sees it once the parameter switches are applied.
pub fn effective_problem<T: Real>(problem: &CurveProblem<T>, params: &SolverParams) -> CurveProblem<T> {
    let mut p = problem.clone();
    p.positivity = problem.positivity && params.positivity_enabled;
    if !params.spread_barrier_enabled {
        for b in &mut p.bounds {
            let mid = b.mid();
            *b = LogPriceBounds { rho_b: mid, rho_a: mid };
        }
    }
    p
}

fn initial_barriers<T: Real>(problem: &CurveProblem<T>, params: &SolverParams) -> BarrierWeights<T> {
    let mu_tilde = if params.balanced_barriers && problem.m() > 0 {
        problem.n() as f64 / (2.0 * problem.m() as f64) * params.mu0
    } else {
        params.mu_tilde0
    };
    BarrierWeights { mu: T::lit(params.mu0), mu_tilde: T::lit(mu_tilde) }
}

pub fn solve_curve<T: Real>(problem: &CurveProblem<T>, seed: Seed<T>, params: &SolverParams) -> Result<Solution<T>> {
    params.validate()?;
    let start = Instant::now();
    let problem = effective_problem(problem, params);
    if seed.f.len() != problem.n() || seed.rho.len() != problem.m() {
        return Err(Error::Domain("seed dimensions do not match the problem".into()));
    }
    let mut rho = seed.rho;
    for (r, b) in rho.iter_mut().zip(&problem.bounds) {
        if b.is_degenerate() {
            *r = b.mid();
        }
    }
    let active = ActiveBarriers {
        positivity: problem.positivity,
        spread: problem.bounds.iter().any(|b| !b.is_degenerate()),
    };
    let mut state = SolverState {
        s: 0,
        f: seed.f,
        rho,
        barriers: initial_barriers(&problem, params),
        lambda: vec![T::zero(); problem.m()],
    };
    let beta = T::lit(params.beta);
    let w_of = |f: &[T]| eval_w(&ForwardCurve { grid: problem.grid.clone(), f: f.to_vec() }, &problem.weights).as_f64();
    let w_initial = w_of(&state.f);
    let mut w_prev = w_initial;
    let mut trace = Vec::new();
    let mut undamped_steps = 0;
    let mut ridged_pivots = 0;
    let mut counters;
    let mut warnings = Vec::new();

    let termination = loop {
        let model = build_model(&problem, &state.f, &state.rho, state.barriers)?;
        let sol = dp_solve_refined(&model, params.refine_sweeps)?;
        if sol.ridged > 0 {
            ridged_pivots += sol.ridged;
            warnings.push(format!("iteration {}: {} near-zero pivots regularized", state.s + 1, sol.ridged));
        }
        counters = sol.counters;
        let step = step_length(
            problem.positivity,
            &problem.bounds,
            &state.f,
            &state.rho,
            &sol.delta,
            &sol.sigma,
            beta,
            params.strict_paper_step,
        );
        if step.undamped {
            undamped_steps += 1;
        }
        for (x, d) in state.f.iter_mut().zip(&sol.delta) {
            *x += step.alpha * *d;
        }
        for (x, d) in state.rho.iter_mut().zip(&sol.sigma) {
            *x += step.alpha * *d;
        }
        state.barriers = update_barriers(state.barriers, step.alpha, params);
        state.lambda = sol.lambda;
        state.s += 1;

        let w = w_of(&state.f);
        let (eps, _) = constraint_errors(&problem, &state.f, &state.rho);
        if !w.is_finite() || !eps.is_finite() {
            return Err(Error::InfeasibleIterate(format!("non-finite iterate at iteration {}", state.s)));
        }
        trace.push(TraceRow {
            iteration: state.s,
            w,
            eps,
            mu: state.barriers.mu.as_f64(),
            mu_tilde: state.barriers.mu_tilde.as_f64(),
            alpha: step.alpha.as_f64(),
            delta_ln_w: delta_ln_w(w, w_prev),
        });
        w_prev = w;
        if let Some(t) = check_termination(&trace, active, params) {
            break t;
        }
    };

    let (eps, residuals) = constraint_errors(&problem, &state.f, &state.rho);
    let alarm = termination == Termination::MaxIterations;
    if alarm {
        warnings.push(format!("iteration limit {} reached without convergence", params.n_max));
    }
    let report = SolveReport {
        termination,
        iterations: state.s,
        alarm,
        w_initial,
        w: w_prev,
        eps,
        residuals,
        trace,
        undamped_steps,
        ridged_pivots,
        counters,
        warnings,
        wall_time_s: start.elapsed().as_secs_f64(),
    };
    let curve = ForwardCurve { grid: problem.grid.clone(), f: state.f };
    Ok(Solution { curve, rho: state.rho, lambda: state.lambda, report })
}

/// Order-preserving parallel map over independent tasks.
pub fn par_map<I, O, F>(items: &[I], f: F) -> Vec<O>
where
    I: Sync,
    O: Send,
    F: Fn(&I) -> O + Sync + Send,
{
    items.par_iter().map(f).collect()
}
