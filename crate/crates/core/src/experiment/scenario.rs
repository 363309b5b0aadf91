use super::data::{DayOptions, MarketData, SpreadSpec};
use super::export::CurveReport;
use crate::curve::SmoothnessWeights;
use crate::error::Result;
use crate::ipm::{seed_default, solve_curve, Solution, SolverParams};
use crate::market::CalendarDate;
use crate::problem::DayProblem;

/// One curve build: date, measure, spreads and switches.
#[derive(Debug, Clone)]
pub struct ScenarioSpec {
    pub date: CalendarDate,
    pub weights: SmoothnessWeights<f64>,
    pub spreads: SpreadSpec,
    pub positivity: bool,
}

impl ScenarioSpec {
    pub fn new(date: CalendarDate, weights: SmoothnessWeights<f64>, spreads: SpreadSpec, positivity: bool) -> Self {
        ScenarioSpec { date, weights, spreads, positivity }
    }
}

/// Named spread assignment across the bond set.
#[derive(Debug, Clone, PartialEq)]
pub struct SpreadPattern {
    pub name: &'static str,
    pub spreads: SpreadSpec,
}

/// The three patterns: exact prices everywhere; exact prices for SO 1043 and
/// SO 1034 with 5% elsewhere; 1% everywhere.
pub fn fig3_patterns() -> Vec<SpreadPattern> {
    vec![
        SpreadPattern { name: "a", spreads: SpreadSpec::uniform(0.0) },
        SpreadPattern {
            name: "b",
            spreads: SpreadSpec::uniform(0.05).with_override("SO 1043", 0.0).with_override("SO 1034", 0.0),
        },
        SpreadPattern { name: "c", spreads: SpreadSpec::uniform(0.01) },
    ]
}

#[derive(Debug, Clone)]
pub struct ScenarioOutcome {
    pub day: DayProblem,
    pub solution: Solution<f64>,
}

impl ScenarioOutcome {
    pub fn report(&self) -> Result<CurveReport> {
        CurveReport::new(self.day.settlement, &self.day, &self.solution)
    }
}

pub fn run_scenario(
    data: &MarketData,
    spec: &ScenarioSpec,
    opts: &DayOptions,
    params: &SolverParams,
) -> Result<ScenarioOutcome> {
    let opts = DayOptions { weights: spec.weights, positivity: spec.positivity, ..opts.clone() };
    let day = data.day_problem(spec.date, &spec.spreads, &opts)?;
    let solution = solve_curve(&day.problem, seed_default(&day.problem), params)?;
    Ok(ScenarioOutcome { day, solution })
}
