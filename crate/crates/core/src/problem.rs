//! Curve-fitting problem assembled from market data.

use crate::curve::{map_dates_to_stages, CurveGrid, SmoothnessWeights};
use crate::error::{Error, Result};
use crate::market::{
    coupon_schedule, log_price_bounds, price_from_quote, BondSpec, CalendarDate, CashFlowSchedule, LogPriceBounds,
    QuoteRow, SpreadPolicy,
};
use crate::scalar::Real;

/// Everything the solver needs: grid, constraints, bounds and weights.
#[derive(Debug, Clone)]
pub struct CurveProblem<T> {
    pub grid: CurveGrid<T>,
    pub schedules: Vec<CashFlowSchedule<T>>,
    pub bounds: Vec<LogPriceBounds<T>>,
    pub weights: SmoothnessWeights<T>,
    /// Enforce `f_r >= 0` with a log barrier.
    pub positivity: bool,
}

impl<T: Real> CurveProblem<T> {
    pub fn new(
        grid: CurveGrid<T>,
        schedules: Vec<CashFlowSchedule<T>>,
        bounds: Vec<LogPriceBounds<T>>,
        weights: SmoothnessWeights<T>,
        positivity: bool,
    ) -> Result<Self> {
        if schedules.len() != bounds.len() {
            return Err(Error::Domain("one bound per schedule required".into()));
        }
        if grid.n() < 2 {
            return Err(Error::Domain("curve grid needs at least two stages".into()));
        }
        for s in &schedules {
            if s.last_stage() > grid.n() {
                return Err(Error::BeyondGrid { stage: s.last_stage(), n: grid.n() });
            }
        }
        for b in &bounds {
            if !(b.rho_a >= b.rho_b) {
                return Err(Error::Domain("bid log-price above ask".into()));
            }
        }
        Ok(CurveProblem { grid, schedules, bounds, weights, positivity })
    }

    pub fn n(&self) -> usize {
        self.grid.n()
    }

    /// Number of price constraints.
    pub fn m(&self) -> usize {
        self.schedules.len()
    }

    /// Stage of the latest constraining cash flow.
    pub fn last_constrained_stage(&self) -> usize {
        self.schedules.iter().map(|s| s.last_stage()).max().unwrap_or(1)
    }

    /// Same constraints on a grid resized to `n` stages.
    pub fn with_grid_len(&self, n: usize) -> Result<Self> {
        CurveProblem::new(
            self.grid.resized(n),
            self.schedules.clone(),
            self.bounds.clone(),
            self.weights,
            self.positivity,
        )
    }

    /// Drops constraint `j`, keeping the grid.
    pub fn without(&self, j: usize) -> Self {
        let mut p = self.clone();
        p.schedules.remove(j);
        p.bounds.remove(j);
        p
    }
}

/// One bond's contribution to a day's problem, kept for reporting.
#[derive(Debug, Clone)]
pub struct PricedBond {
    pub bond: BondSpec,
    pub quoted_rate: f64,
    pub market_price: f64,
    pub spread: f64,
}

/// Per-day inputs turned into constraints.
#[derive(Debug, Clone)]
pub struct DayProblem {
    pub settlement: CalendarDate,
    pub bonds: Vec<PricedBond>,
    pub problem: CurveProblem<f64>,
}

/// How to turn a set of quotes into a problem.
#[derive(Debug, Clone)]
pub struct ProblemConfig {
    pub weights: SmoothnessWeights<f64>,
    pub positivity: bool,
    pub spread_policy: SpreadPolicy,
    pub days_per_year: f64,
    /// Grid length override; by default the grid ends at the last constraining flow.
    pub grid_len: Option<usize>,
}

impl Default for ProblemConfig {
    fn default() -> Self {
        ProblemConfig {
            weights: SmoothnessWeights::df(),
            positivity: true,
            spread_policy: SpreadPolicy::Symmetric,
            days_per_year: 365.0,
            grid_len: None,
        }
    }
}

/// Builds the problem for `settlement` from `(bond, quote, spread)` triples.
pub fn assemble(
    settlement: CalendarDate,
    quoted: &[(&BondSpec, &QuoteRow, f64)],
    cfg: &ProblemConfig,
) -> Result<DayProblem> {
    let mut schedules = Vec::with_capacity(quoted.len());
    let mut bounds = Vec::with_capacity(quoted.len());
    let mut bonds = Vec::with_capacity(quoted.len());
    for (bond, quote, spread) in quoted {
        let payments = coupon_schedule(bond, settlement)?;
        let sched = map_dates_to_stages(&bond.id, &payments, settlement)?;
        let price = price_from_quote(bond, quote.quoted_rate, settlement)?;
        let b = log_price_bounds(price, bond.nominal, *spread, cfg.spread_policy)?;
        schedules.push(sched);
        bounds.push(b);
        bonds.push(PricedBond {
            bond: (*bond).clone(),
            quoted_rate: quote.quoted_rate,
            market_price: price,
            spread: *spread,
        });
    }
    let last = schedules.iter().map(|s: &CashFlowSchedule<f64>| s.last_stage()).max().unwrap_or(2);
    let n = cfg.grid_len.unwrap_or(last).max(2);
    let grid = CurveGrid::daily(settlement, n, cfg.days_per_year);
    let problem = CurveProblem::new(grid, schedules, bounds, cfg.weights, cfg.positivity)?;
    Ok(DayProblem { settlement, bonds, problem })
}
