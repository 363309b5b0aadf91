//! Experiment harness: scenario runs, leave-one-out sweeps, extrapolation and
//! plot-ready exports.

mod data;
mod export;
mod extrapolate;
mod loo;
mod scenario;

pub use data::{DayOptions, MarketData, SpreadSpec, SAMPLE_BONDS_CSV, SAMPLE_QUOTES_CSV};
pub use export::{convergence_csv, BondFit, CurveReport, CONVERGENCE_HEADER};
pub use extrapolate::{extrapolate, extrapolate_constant, extrapolate_w, Extrapolation};
pub use loo::{
    aggregate, default_sqrt_ratios, format_sqrt_ratio, loo_csv, loo_summary_csv, run_loo, LooConfig, LooResult,
    LooSummary, DEFAULT_SPREADS, LOO_HEADER, LOO_SUMMARY_HEADER, MONOTONE_W_TOL,
};
pub use scenario::{fig3_patterns, run_scenario, ScenarioOutcome, ScenarioSpec, SpreadPattern};
