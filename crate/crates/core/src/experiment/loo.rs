use std::collections::BTreeMap;
use std::fmt::Write;

use super::data::{DayOptions, MarketData, SpreadSpec};
use super::extrapolate::{extrapolate_constant, Extrapolation};
use crate::curve::{fmt_sig, price_from_curve, SmoothnessWeights};
use crate::error::{Error, Result};
use crate::ipm::{par_map, seed_default, solve_curve, Solution, SolverParams};
use crate::market::CalendarDate;
use crate::problem::{CurveProblem, DayProblem};

pub const DEFAULT_SPREADS: [f64; 3] = [0.0, 0.005, 0.01];

/// Slack allowed when checking that dropping a constraint does not raise `W`.
pub const MONOTONE_W_TOL: f64 = 1e-9;

pub const LOO_HEADER: &str =
    "date,bond,sqrt_gamma_over_phi,spread,extrapolation,rel_error,status,predicted_price,market_price,w_full,w_loo";

pub const LOO_SUMMARY_HEADER: &str =
    "bond,sqrt_gamma_over_phi,spread,extrapolation,days,mean_abs_rel_error,mean_rel_error";

/// `sqrt(gamma/phi)` in per-year units: the two pure measures and three points between.
pub fn default_sqrt_ratios() -> Vec<f64> {
    vec![0.0, 0.5, 1.0, 2.0, f64::INFINITY]
}

pub fn format_sqrt_ratio(k: f64) -> String {
    if k.is_infinite() {
        "inf".to_string()
    } else {
        format!("{k}")
    }
}

#[derive(Debug, Clone)]
pub struct LooConfig {
    pub dates: Vec<CalendarDate>,
    pub sqrt_ratios: Vec<f64>,
    pub spreads: Vec<f64>,
    /// Modes tried for the longest bond; the others never leave the grid.
    pub extrapolations: Vec<Extrapolation>,
    /// Bonds to leave out; all quoted bonds when `None`.
    pub bonds: Option<Vec<String>>,
    pub opts: DayOptions,
    pub params: SolverParams,
}

impl LooConfig {
    pub fn new(dates: Vec<CalendarDate>) -> Self {
        LooConfig {
            dates,
            sqrt_ratios: default_sqrt_ratios(),
            spreads: DEFAULT_SPREADS.to_vec(),
            extrapolations: vec![Extrapolation::Constant, Extrapolation::WGenerated],
            bonds: None,
            opts: DayOptions::default(),
            params: SolverParams::default(),
        }
    }
}

/// One leave-one-out cell.
#[derive(Debug, Clone)]
pub struct LooResult {
    pub date: CalendarDate,
    pub left_out_bond: String,
    pub sqrt_ratio: f64,
    pub spread: f64,
    /// Set only for the bond whose cash flows extend past the refit grid.
    pub extrapolation: Option<Extrapolation>,
    pub predicted_price: f64,
    pub market_price: f64,
    /// `(P_pred - P_market) / P_market`; NaN when the refit failed.
    pub rel_error: f64,
    /// `converged`, `straight_line`, `max_iterations` or `error: ...`.
    pub status: String,
    pub w_full: f64,
    pub w_loo: f64,
    /// `W_loo <= W_full + tol`; `None` unless both fits terminated normally.
    pub monotone_w: Option<bool>,
    /// Every remaining constraint is met to `eps_max` with its log price in bounds.
    pub constraints_met: Option<bool>,
}

impl LooResult {
    pub fn is_solved(&self) -> bool {
        self.status == "converged" || self.status == "straight_line"
    }
}

fn status_of(sol: &Solution<f64>) -> String {
    serde_json::to_value(sol.report.termination)
        .ok()
        .and_then(|v| v.as_str().map(str::to_string))
        .unwrap_or_default()
}

fn constraints_met(problem: &CurveProblem<f64>, sol: &Solution<f64>, params: &SolverParams) -> bool {
    sol.report.eps < params.eps_max && problem.bounds.iter().zip(&sol.rho).all(|(b, r)| b.contains(*r))
}

struct Task {
    date: CalendarDate,
    k: f64,
    spread: f64,
}

fn solve(problem: &CurveProblem<f64>, params: &SolverParams) -> Result<Solution<f64>> {
    solve_curve(problem, seed_default(problem), params)
}

fn refit(
    day: &DayProblem,
    j: usize,
    mode: Option<Extrapolation>,
    params: &SolverParams,
) -> Result<(Solution<f64>, CurveProblem<f64>, f64)> {
    let without = day.problem.without(j);
    let target = day.problem.schedules[j].last_stage();
    let nominal = day.bonds[j].bond.nominal;
    match mode {
        Some(Extrapolation::Constant) => {
            let short = without.with_grid_len(without.last_constrained_stage().max(2))?;
            let sol = solve(&short, params)?;
            let curve = if target > short.n() { extrapolate_constant(&sol.curve, target)? } else { sol.curve.clone() };
            let price = price_from_curve(&curve, &day.problem.schedules[j], nominal)?;
            Ok((sol, short, price))
        }
        _ => {
            let sol = solve(&without, params)?;
            let price = price_from_curve(&sol.curve, &day.problem.schedules[j], nominal)?;
            Ok((sol, without, price))
        }
    }
}

fn run_task(data: &MarketData, cfg: &LooConfig, task: &Task) -> Vec<LooResult> {
    let weights = match SmoothnessWeights::from_sqrt_ratio(task.k) {
        Ok(w) => w,
        Err(e) => return vec![failed_row(task, "", None, f64::NAN, f64::NAN, &e)],
    };
    let opts = DayOptions { weights, ..cfg.opts.clone() };
    let day = match data.day_problem(task.date, &SpreadSpec::uniform(task.spread), &opts) {
        Ok(d) => d,
        Err(e) => return vec![failed_row(task, "", None, f64::NAN, f64::NAN, &e)],
    };
    let full = solve(&day.problem, &cfg.params);
    let (w_full, full_ok) = match &full {
        Ok(s) => (s.report.w, s.report.is_solved()),
        Err(_) => (f64::NAN, false),
    };
    let longest = (0..day.problem.m()).max_by_key(|&j| day.problem.schedules[j].last_stage());
    let mut rows = Vec::new();
    for (j, priced) in day.bonds.iter().enumerate() {
        if let Some(ids) = &cfg.bonds {
            if !ids.contains(&priced.bond.id) {
                continue;
            }
        }
        let modes: Vec<Option<Extrapolation>> = if Some(j) == longest && day.problem.m() > 1 {
            cfg.extrapolations.iter().copied().map(Some).collect()
        } else {
            vec![None]
        };
        for mode in modes {
            let market = priced.market_price;
            if day.problem.m() < 2 {
                let e = Error::MissingData("leave-one-out needs at least two bonds".into());
                rows.push(failed_row(task, &priced.bond.id, mode, market, w_full, &e));
                continue;
            }
            match refit(&day, j, mode, &cfg.params) {
                Ok((sol, problem, predicted)) => {
                    let status = status_of(&sol);
                    let solved = sol.report.is_solved();
                    rows.push(LooResult {
                        date: task.date,
                        left_out_bond: priced.bond.id.clone(),
                        sqrt_ratio: task.k,
                        spread: task.spread,
                        extrapolation: mode,
                        predicted_price: predicted,
                        market_price: market,
                        rel_error: (predicted - market) / market,
                        status,
                        w_full,
                        w_loo: sol.report.w,
                        monotone_w: (solved && full_ok).then_some(sol.report.w <= w_full + MONOTONE_W_TOL),
                        constraints_met: solved.then(|| constraints_met(&problem, &sol, &cfg.params)),
                    });
                }
                Err(e) => rows.push(failed_row(task, &priced.bond.id, mode, market, w_full, &e)),
            }
        }
    }
    rows
}

fn failed_row(task: &Task, bond: &str, mode: Option<Extrapolation>, market: f64, w_full: f64, e: &Error) -> LooResult {
    LooResult {
        date: task.date,
        left_out_bond: bond.to_string(),
        sqrt_ratio: task.k,
        spread: task.spread,
        extrapolation: mode,
        predicted_price: f64::NAN,
        market_price: market,
        rel_error: f64::NAN,
        status: format!("error: {e}"),
        w_full,
        w_loo: f64::NAN,
        monotone_w: None,
        constraints_met: None,
    }
}

/// Runs every (date, weight, spread) cell, fanning out over the thread pool.
/// Rows come back ordered by date, weight, spread and bond.
pub fn run_loo(data: &MarketData, cfg: &LooConfig) -> Vec<LooResult> {
    let mut tasks = Vec::new();
    for &date in &cfg.dates {
        for &k in &cfg.sqrt_ratios {
            for &spread in &cfg.spreads {
                tasks.push(Task { date, k, spread });
            }
        }
    }
    par_map(&tasks, |t| run_task(data, cfg, t)).into_iter().flatten().collect()
}

fn opt_num(x: f64) -> String {
    if x.is_finite() {
        fmt_sig(x)
    } else {
        String::new()
    }
}

fn mode_name(mode: Option<Extrapolation>) -> String {
    mode.map_or_else(|| "none".to_string(), |m| m.to_string())
}

fn csv_field(s: &str) -> String {
    if s.contains([',', '"', '\n']) {
        format!("\"{}\"", s.replace('"', "\"\""))
    } else {
        s.to_string()
    }
}

pub fn loo_csv(rows: &[LooResult]) -> String {
    let mut out = format!("{LOO_HEADER}\n");
    for r in rows {
        let _ = writeln!(
            out,
            "{},{},{},{},{},{},{},{},{},{},{}",
            r.date,
            csv_field(&r.left_out_bond),
            format_sqrt_ratio(r.sqrt_ratio),
            r.spread,
            mode_name(r.extrapolation),
            opt_num(r.rel_error),
            csv_field(&r.status),
            opt_num(r.predicted_price),
            opt_num(r.market_price),
            opt_num(r.w_full),
            opt_num(r.w_loo),
        );
    }
    out
}

/// Mean absolute and mean signed relative error over days for one cell.
#[derive(Debug, Clone, PartialEq)]
pub struct LooSummary {
    pub bond: String,
    pub sqrt_ratio: f64,
    pub spread: f64,
    pub extrapolation: Option<Extrapolation>,
    pub days: usize,
    pub mean_abs_rel_error: f64,
    pub mean_rel_error: f64,
}

/// Aggregates solved rows per (bond, weight, spread, extrapolation), in first-seen order.
pub fn aggregate(rows: &[LooResult]) -> Vec<LooSummary> {
    let mut order: Vec<LooSummary> = Vec::new();
    let mut index: BTreeMap<(String, u64, u64, String), usize> = BTreeMap::new();
    for r in rows.iter().filter(|r| r.is_solved()) {
        let key = (r.left_out_bond.clone(), r.sqrt_ratio.to_bits(), r.spread.to_bits(), mode_name(r.extrapolation));
        let i = *index.entry(key).or_insert_with(|| {
            order.push(LooSummary {
                bond: r.left_out_bond.clone(),
                sqrt_ratio: r.sqrt_ratio,
                spread: r.spread,
                extrapolation: r.extrapolation,
                days: 0,
                mean_abs_rel_error: 0.0,
                mean_rel_error: 0.0,
            });
            order.len() - 1
        });
        let s = &mut order[i];
        s.days += 1;
        s.mean_abs_rel_error += r.rel_error.abs();
        s.mean_rel_error += r.rel_error;
    }
    for s in &mut order {
        s.mean_abs_rel_error /= s.days as f64;
        s.mean_rel_error /= s.days as f64;
    }
    order
}

pub fn loo_summary_csv(summary: &[LooSummary]) -> String {
    let mut out = format!("{LOO_SUMMARY_HEADER}\n");
    for s in summary {
        let _ = writeln!(
            out,
            "{},{},{},{},{},{},{}",
            csv_field(&s.bond),
            format_sqrt_ratio(s.sqrt_ratio),
            s.spread,
            mode_name(s.extrapolation),
            s.days,
            fmt_sig(s.mean_abs_rel_error),
            fmt_sig(s.mean_rel_error)
        );
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    fn row(bond: &str, e: f64, status: &str) -> LooResult {
        LooResult {
            date: CalendarDate::from_dmy(9, 7, 2001).unwrap(),
            left_out_bond: bond.into(),
            sqrt_ratio: f64::INFINITY,
            spread: 0.0,
            extrapolation: None,
            predicted_price: 1.0 + e,
            market_price: 1.0,
            rel_error: e,
            status: status.into(),
            w_full: 1.0,
            w_loo: 0.5,
            monotone_w: Some(true),
            constraints_met: Some(true),
        }
    }

    #[test]
    fn aggregates_skip_failures() {
        let rows = vec![row("A", 0.02, "converged"), row("A", -0.01, "straight_line"), row("A", 9.0, "max_iterations")];
        let s = aggregate(&rows);
        assert_eq!(s.len(), 1);
        assert_eq!(s[0].days, 2);
        assert!((s[0].mean_abs_rel_error - 0.015).abs() < 1e-15);
        assert!((s[0].mean_rel_error - 0.005).abs() < 1e-15);
    }

    #[test]
    fn csv_schema() {
        let text = loo_csv(&[row("SO 1033", 0.001, "converged")]);
        let mut lines = text.lines();
        assert_eq!(lines.next().unwrap(), LOO_HEADER);
        let fields: Vec<&str> = lines.next().unwrap().split(',').collect();
        assert_eq!(fields.len(), LOO_HEADER.split(',').count());
        assert_eq!(&fields[..5], &["2001-07-09", "SO 1033", "inf", "0", "none"]);
        let mut failed = row("SO 1033", f64::NAN, "error: x, y");
        failed.predicted_price = f64::NAN;
        let text = loo_csv(&[failed]);
        assert!(text.lines().nth(1).unwrap().contains(",,\"error: x, y\","));
    }

    #[test]
    fn default_grid_spans_both_measures() {
        let ks = default_sqrt_ratios();
        let ends = (
            SmoothnessWeights::<f64>::from_sqrt_ratio(ks[0]).unwrap(),
            SmoothnessWeights::<f64>::from_sqrt_ratio(*ks.last().unwrap()).unwrap(),
        );
        assert_eq!(ends.0, SmoothnessWeights::ad());
        assert_eq!(ends.1, SmoothnessWeights::df());
    }
}
