use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::curve::ForwardCurve;
use crate::error::{Error, Result};
use crate::ipm::{seed_default, solve_curve, Solution, SolverParams};
use crate::problem::CurveProblem;
use crate::scalar::Real;

/// How the curve continues past the last constraining cash flow.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum Extrapolation {
    /// Hold the last fitted rate.
    #[serde(rename = "constant")]
    Constant,
    /// Extend the grid and let the smoothness measure shape the tail.
    #[serde(rename = "w")]
    WGenerated,
}

impl fmt::Display for Extrapolation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Extrapolation::Constant => "constant",
            Extrapolation::WGenerated => "w",
        })
    }
}

impl FromStr for Extrapolation {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "constant" => Ok(Extrapolation::Constant),
            "w" | "w-generated" => Ok(Extrapolation::WGenerated),
            _ => Err(Error::Domain(format!("unknown extrapolation {s:?} (expected constant or w)"))),
        }
    }
}

fn check_target(n: usize, target: usize) -> Result<()> {
    if target <= n {
        return Err(Error::Domain(format!("target stage {target} must exceed the grid length {n}")));
    }
    Ok(())
}

/// `f_r = f_n` for `n < r <= target`.
pub fn extrapolate_constant<T: Real>(curve: &ForwardCurve<T>, target: usize) -> Result<ForwardCurve<T>> {
    check_target(curve.n(), target)?;
    let last = *curve.f.last().ok_or_else(|| Error::Domain("empty curve".into()))?;
    let mut f = curve.f.clone();
    f.resize(target, last);
    ForwardCurve::new(curve.grid.resized(target), f)
}

/// Re-solves `problem` on a grid of `target` stages with the same constraints.
pub fn extrapolate_w<T: Real>(problem: &CurveProblem<T>, target: usize, params: &SolverParams) -> Result<Solution<T>> {
    check_target(problem.n(), target)?;
    let extended = problem.with_grid_len(target)?;
    solve_curve(&extended, seed_default(&extended), params)
}

/// Extends `curve`, fitted to `problem`, to `target` stages.
pub fn extrapolate<T: Real>(
    curve: &ForwardCurve<T>,
    problem: &CurveProblem<T>,
    mode: Extrapolation,
    target: usize,
    params: &SolverParams,
) -> Result<ForwardCurve<T>> {
    match mode {
        Extrapolation::Constant => extrapolate_constant(curve, target),
        Extrapolation::WGenerated => Ok(extrapolate_w(problem, target, params)?.curve),
    }
}
