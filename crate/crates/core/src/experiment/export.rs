use std::fmt::Write;

use serde::Serialize;

use crate::curve::{fmt_sig, price_from_curve};
use crate::error::Result;
use crate::ipm::{SolveReport, Solution};
use crate::market::CalendarDate;
use crate::problem::DayProblem;

pub const CONVERGENCE_HEADER: &str = "date,iteration,w,eps,mu,mu_tilde,alpha";

/// Per-iteration rows of `report`, one line each.
pub fn convergence_csv(date: CalendarDate, report: &SolveReport, with_header: bool) -> String {
    let mut out = String::new();
    if with_header {
        out.push_str(CONVERGENCE_HEADER);
        out.push('\n');
    }
    for r in &report.trace {
        let _ = writeln!(
            out,
            "{date},{},{},{},{},{},{}",
            r.iteration,
            fmt_sig(r.w),
            fmt_sig(r.eps),
            fmt_sig(r.mu),
            fmt_sig(r.mu_tilde),
            fmt_sig(r.alpha)
        );
    }
    out
}

/// Fit quality for one constraining bond.
#[derive(Debug, Clone, Serialize)]
pub struct BondFit {
    pub bond: String,
    pub market_price: f64,
    pub fitted_price: f64,
    pub rho: f64,
    pub rho_b: f64,
    pub rho_a: f64,
    pub residual: f64,
    pub within_bounds: bool,
}

/// Contents of `report.json`.
#[derive(Debug, Clone, Serialize)]
pub struct CurveReport {
    pub date: CalendarDate,
    pub settlement: CalendarDate,
    pub gamma: f64,
    pub phi: f64,
    pub positivity: bool,
    pub n: usize,
    pub min_f: f64,
    pub max_f: f64,
    pub bonds: Vec<BondFit>,
    pub report: SolveReport,
}

impl CurveReport {
    pub fn new(date: CalendarDate, day: &DayProblem, sol: &Solution<f64>) -> Result<Self> {
        let p = &day.problem;
        let mut bonds = Vec::with_capacity(p.m());
        for (j, priced) in day.bonds.iter().enumerate() {
            let b = p.bounds[j];
            let rho = sol.rho[j];
            bonds.push(BondFit {
                bond: priced.bond.id.clone(),
                market_price: priced.market_price,
                fitted_price: price_from_curve(&sol.curve, &p.schedules[j], priced.bond.nominal)?,
                rho,
                rho_b: b.rho_b,
                rho_a: b.rho_a,
                residual: sol.report.residuals[j],
                within_bounds: b.contains(rho),
            });
        }
        Ok(CurveReport {
            date,
            settlement: day.settlement,
            gamma: p.weights.gamma,
            phi: p.weights.phi,
            positivity: p.positivity,
            n: p.n(),
            min_f: sol.curve.min(),
            max_f: sol.curve.max(),
            bonds,
            report: sol.report.clone(),
        })
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("report serializes")
    }
}
