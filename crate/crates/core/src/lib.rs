//! Smooth, positive forward-rate curves fitted to coupon-bond prices.
//!
//! The curve minimizes a weighted first/second-difference roughness measure
//! subject to each bond's log price lying in its bid/ask interval. Inequalities
//! are handled with log barriers; every Newton subproblem is a banded
//! equality-constrained QP solved stage by stage in `O(n)`.
//!
//! The numerical core is generic over [`Real`] (`f32` or `f64`); the aliases
//! at the bottom of this file fix it to `f64`.

// Comparisons are written `!(x > y)` on purpose so that NaN fails them.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod curve;
pub mod dp;
pub mod error;
pub mod experiment;
pub mod ipm;
pub mod linearize;
pub mod market;
pub mod problem;
pub mod scalar;

pub use curve::{
    constraint_residual, eval_w, map_dates_to_stages, price_from_curve, ConstraintResidual, CurveGrid, ForwardCurve,
    SmoothnessWeights,
};
pub use dp::{backward_pass, bandwidth, dp_solve, dp_solve_refined, forward_pass, solve_multipliers, DPSolution, DPWorkspace, OpCounters};
pub use error::{Error, Result};
pub use ipm::{
    check_termination, seed_default, seed_random, solve_curve, step_length, update_barriers, Seed, SolveReport,
    SolverParams, SolverState, Solution, Termination, TraceRow,
};
pub use linearize::{build_model, eval_z, BarrierWeights, QuadraticModel, SymBand};
pub use market::{BondSpec, CalendarDate, CashFlowSchedule, LogPriceBounds, QuoteRow, SpreadPolicy};
pub use problem::{assemble, CurveProblem, DayProblem, PricedBond, ProblemConfig};
pub use scalar::Real;

pub type Curve = ForwardCurve<f64>;
pub type Grid = CurveGrid<f64>;
pub type Weights = SmoothnessWeights<f64>;
pub type Problem = CurveProblem<f64>;
pub type Model = QuadraticModel<f64>;
pub type Schedule = CashFlowSchedule<f64>;
pub type Bounds = LogPriceBounds<f64>;
pub type Barriers = BarrierWeights<f64>;
pub type CurveSolution = Solution<f64>;
