//! The discrete curve: grid, forward rates, smoothness measure, pricing and
//! the log-price consistency residual.

use std::fmt::Write as _;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::market::{CalendarDate, CashFlowSchedule, Payment};
use crate::scalar::Real;

/// Stage lengths (years) starting at `origin`. Stage `r` (1-based) covers
/// `[t_r, t_r + xi[r-1])`.
#[derive(Debug, Clone, PartialEq)]
pub struct CurveGrid<T> {
    pub xi: Vec<T>,
    pub origin: CalendarDate,
    /// Calendar days per year used to build and label the grid.
    pub days_per_year: f64,
}

impl<T: Real> CurveGrid<T> {
    /// Uniform grid of `n` one-day stages.
    pub fn daily(origin: CalendarDate, n: usize, days_per_year: f64) -> Self {
        CurveGrid {
            xi: vec![T::lit(1.0 / days_per_year); n],
            origin,
            days_per_year,
        }
    }

    pub fn from_lengths(origin: CalendarDate, xi: Vec<T>, days_per_year: f64) -> Result<Self> {
        if xi.iter().any(|x| !(*x > T::zero())) {
            return Err(Error::Domain("stage lengths must be positive".into()));
        }
        Ok(CurveGrid { xi, origin, days_per_year })
    }

    pub fn n(&self) -> usize {
        self.xi.len()
    }

    /// Time in years at the start of each stage.
    pub fn times(&self) -> Vec<T> {
        let mut t = T::zero();
        self.xi
            .iter()
            .map(|x| {
                let cur = t;
                t += *x;
                cur
            })
            .collect()
    }

    /// The same grid extended (or truncated) to `n` stages; new stages reuse the last length.
    pub fn resized(&self, n: usize) -> Self {
        let mut xi = self.xi.clone();
        let last = xi.last().copied().unwrap_or_else(|| T::lit(1.0 / self.days_per_year));
        xi.resize(n, last);
        CurveGrid { xi, origin: self.origin, days_per_year: self.days_per_year }
    }
}

/// Discrete forward curve `f_r` (per year) on a grid.
#[derive(Debug, Clone, PartialEq)]
pub struct ForwardCurve<T> {
    pub grid: CurveGrid<T>,
    pub f: Vec<T>,
}

impl<T: Real> ForwardCurve<T> {
    pub fn new(grid: CurveGrid<T>, f: Vec<T>) -> Result<Self> {
        if f.len() != grid.n() {
            return Err(Error::Domain(format!("curve has {} values for {} stages", f.len(), grid.n())));
        }
        Ok(ForwardCurve { grid, f })
    }

    pub fn flat(grid: CurveGrid<T>, level: T) -> Self {
        let n = grid.n();
        ForwardCurve { grid, f: vec![level; n] }
    }

    pub fn n(&self) -> usize {
        self.f.len()
    }

    pub fn min(&self) -> T {
        self.f.iter().copied().fold(T::infinity(), T::min)
    }

    pub fn max(&self) -> T {
        self.f.iter().copied().fold(T::neg_infinity(), T::max)
    }

    /// `S[k] = sum_{r=1}^{k} f_r xi_r`, with `S[0] = 0`.
    pub fn integrated(&self) -> Vec<T> {
        integrated(&self.f, &self.grid.xi)
    }

    /// Export with header `stage,date,t_years,f_per_year`, 12 significant digits.
    pub fn to_csv(&self) -> String {
        let mut out = String::from("stage,date,t_years,f_per_year\n");
        for (r, (t, f)) in self.grid.times().iter().zip(&self.f).enumerate() {
            let days = (t.as_f64() * self.grid.days_per_year).round() as i64;
            let date = self.grid.origin.add_days(days);
            let _ = writeln!(out, "{},{},{},{}", r + 1, date, fmt_sig(t.as_f64()), fmt_sig(f.as_f64()));
        }
        out
    }
}

/// Twelve significant digits in scientific notation.
pub fn fmt_sig(x: f64) -> String {
    format!("{x:.11e}")
}

pub(crate) fn integrated<T: Real>(f: &[T], xi: &[T]) -> Vec<T> {
    let mut s = Vec::with_capacity(f.len() + 1);
    let mut acc = T::zero();
    s.push(acc);
    for (fr, x) in f.iter().zip(xi) {
        acc += *fr * *x;
        s.push(acc);
    }
    s
}

/// Weights of the first-difference (`gamma`, year^3) and second-difference
/// (`phi`, year^5) penalties.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SmoothnessWeights<T> {
    pub gamma: T,
    pub phi: T,
}

impl<T: Real> SmoothnessWeights<T> {
    pub fn new(gamma: T, phi: T) -> Result<Self> {
        if !(gamma >= T::zero()) || !(phi >= T::zero()) || !(gamma + phi > T::zero()) {
            return Err(Error::Domain(format!("weights gamma={gamma}, phi={phi} must be >= 0 and not both 0")));
        }
        Ok(SmoothnessWeights { gamma, phi })
    }

    /// First-difference measure, `gamma = 1 yr^3`.
    pub fn df() -> Self {
        SmoothnessWeights { gamma: T::one(), phi: T::zero() }
    }

    /// Second-difference measure, `phi = 1 yr^5`.
    pub fn ad() -> Self {
        SmoothnessWeights { gamma: T::zero(), phi: T::one() }
    }

    /// Weights for a given `sqrt(gamma/phi)` (per year): `gamma = k^2, phi = 1`
    /// for `k <= 1`, and `gamma = 1, phi = 1/k^2` above. Infinity maps to the
    /// first-difference measure.
    pub fn from_sqrt_ratio(k: T) -> Result<Self> {
        if !(k >= T::zero()) {
            return Err(Error::Domain(format!("sqrt(gamma/phi) = {k} must be nonnegative")));
        }
        if k.is_infinite() {
            Ok(Self::df())
        } else if k <= T::one() {
            Ok(SmoothnessWeights { gamma: k * k, phi: T::one() })
        } else {
            Ok(SmoothnessWeights { gamma: T::one(), phi: T::one() / (k * k) })
        }
    }

    pub fn sqrt_ratio(&self) -> T {
        if self.phi == T::zero() {
            T::infinity()
        } else {
            (self.gamma / self.phi).sqrt()
        }
    }
}

/// The smoothness measure `W` of a curve.
pub fn eval_w<T: Real>(curve: &ForwardCurve<T>, w: &SmoothnessWeights<T>) -> T {
    let f = &curve.f;
    let xi = &curve.grid.xi;
    let n = f.len();
    let half = T::lit(0.5);
    let two = T::lit(2.0);
    let mut first = T::zero();
    for r in 0..n.saturating_sub(1) {
        let slope = (f[r + 1] - f[r]) / xi[r];
        first += slope * slope * xi[r];
    }
    let mut second = T::zero();
    for r in 1..n.saturating_sub(1) {
        let curv = two / (xi[r - 1] + xi[r]) * ((f[r + 1] - f[r]) / xi[r] - (f[r] - f[r - 1]) / xi[r - 1]);
        second += curv * curv * xi[r];
    }
    w.gamma * half * first + w.phi * half * second
}

/// Price implied by the curve: `N * sum_i alpha_i exp(-S_{R_i - 1})`.
pub fn price_from_curve<T: Real>(curve: &ForwardCurve<T>, sched: &CashFlowSchedule<T>, nominal: T) -> Result<T> {
    check_on_grid(sched, curve.n())?;
    let s = curve.integrated();
    Ok(nominal
        * sched
            .stages
            .iter()
            .zip(&sched.alphas)
            .map(|(&stage, &a)| a * (-s[stage - 1]).exp())
            .sum::<T>())
}

fn check_on_grid<T>(sched: &CashFlowSchedule<T>, n: usize) -> Result<()> {
    let last = *sched.stages.last().ok_or_else(|| Error::Domain("empty schedule".into()))?;
    if last > n {
        return Err(Error::BeyondGrid { stage: last, n });
    }
    Ok(())
}

/// Left side of the log-price consistency equation and the coupon sum `v_j`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ConstraintResidual<T> {
    pub value: T,
    pub v: T,
}

/// Coupon sum `v = sum_i alpha_i exp(S_{R_n - 1} - S_{R_i - 1})` from an integrated curve.
pub(crate) fn coupon_sum<T: Real>(s: &[T], sched: &CashFlowSchedule<T>) -> T {
    let end = s[sched.last_stage() - 1];
    sched
        .stages
        .iter()
        .zip(&sched.alphas)
        .map(|(&stage, &a)| a * (end - s[stage - 1]).exp())
        .sum()
}

pub(crate) fn residual_from_integrated<T: Real>(s: &[T], rho: T, sched: &CashFlowSchedule<T>) -> ConstraintResidual<T> {
    let v = coupon_sum(s, sched);
    ConstraintResidual { value: rho + s[sched.last_stage() - 1] - v.ln(), v }
}

pub fn constraint_residual<T: Real>(
    curve: &ForwardCurve<T>,
    rho: T,
    sched: &CashFlowSchedule<T>,
) -> Result<ConstraintResidual<T>> {
    check_on_grid(sched, curve.n())?;
    Ok(residual_from_integrated(&curve.integrated(), rho, sched))
}

/// Places payments on a daily grid: stage `1 + days(origin, date)`.
pub fn map_dates_to_stages<T: Real>(
    bond_id: &str,
    payments: &[Payment],
    origin: CalendarDate,
) -> Result<CashFlowSchedule<T>> {
    let mut stages = Vec::with_capacity(payments.len());
    let mut alphas = Vec::with_capacity(payments.len());
    for p in payments {
        let days = origin.days_until(&p.date);
        if days < 0 {
            return Err(Error::PaymentBeforeOrigin { date: p.date.to_string(), origin: origin.to_string() });
        }
        stages.push(1 + days as usize);
        alphas.push(T::lit(p.amount));
    }
    CashFlowSchedule::new(bond_id, stages, alphas)
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn origin() -> CalendarDate {
        CalendarDate::from_dmy(6, 7, 2001).unwrap()
    }

    fn unit_grid(n: usize) -> CurveGrid<f64> {
        CurveGrid { xi: vec![1.0; n], origin: origin(), days_per_year: 1.0 }
    }

    fn w(gamma: f64, phi: f64) -> SmoothnessWeights<f64> {
        SmoothnessWeights::new(gamma, phi).unwrap()
    }

    #[test]
    fn w_examples() {
        let flat = ForwardCurve::flat(unit_grid(7), 0.3);
        assert_eq!(eval_w(&flat, &w(2.0, 3.0)), 0.0);
        let line = ForwardCurve::new(unit_grid(4), vec![1.0, 2.0, 3.0, 4.0]).unwrap();
        assert_eq!(eval_w(&line, &w(1.0, 0.0)), 1.5);
        assert_eq!(eval_w(&line, &w(0.0, 1.0)), 0.0);
    }

    #[test]
    fn w_second_difference_by_hand() {
        // f = [0, 0, 1]: one curvature term (2/2 * (1 - 0))^2 * 1 / 2.
        let c = ForwardCurve::new(unit_grid(3), vec![0.0, 0.0, 1.0]).unwrap();
        assert_eq!(eval_w(&c, &w(0.0, 1.0)), 0.5);
    }

    #[test]
    fn weights_validation() {
        assert!(SmoothnessWeights::new(0.0, 0.0).is_err());
        assert!(SmoothnessWeights::new(-1.0, 1.0).is_err());
        let k = SmoothnessWeights::<f64>::from_sqrt_ratio(0.5).unwrap();
        assert_eq!((k.gamma, k.phi), (0.25, 1.0));
        let k = SmoothnessWeights::<f64>::from_sqrt_ratio(2.0).unwrap();
        assert_eq!((k.gamma, k.phi), (1.0, 0.25));
        assert_eq!(SmoothnessWeights::<f64>::from_sqrt_ratio(f64::INFINITY).unwrap(), SmoothnessWeights::df());
        assert_eq!(SmoothnessWeights::<f64>::from_sqrt_ratio(0.0).unwrap(), SmoothnessWeights::ad());
    }

    #[test]
    fn pricing_flat_and_zero() {
        let sched = CashFlowSchedule::new("Z", vec![11], vec![1.0]).unwrap();
        let zero = ForwardCurve::flat(unit_grid(12), 0.0);
        assert_eq!(price_from_curve(&zero, &sched, 100.0).unwrap(), 100.0);
        let flat = ForwardCurve::flat(unit_grid(12), 0.02);
        let p = price_from_curve(&flat, &sched, 100.0).unwrap();
        assert!((p - 100.0 * (-0.02f64 * 10.0).exp()).abs() < 1e-12);
        let coupon = CashFlowSchedule::new("C", vec![3, 6, 12], vec![0.05, 0.05, 1.05]).unwrap();
        assert!((price_from_curve(&zero, &coupon, 1.0).unwrap() - 1.15).abs() < 1e-15);
    }

    #[test]
    fn beyond_grid_is_an_error() {
        let sched = CashFlowSchedule::new("Z", vec![13], vec![1.0]).unwrap();
        let c = ForwardCurve::flat(unit_grid(12), 0.0);
        assert_eq!(price_from_curve(&c, &sched, 1.0), Err(Error::BeyondGrid { stage: 13, n: 12 }));
        assert!(constraint_residual(&c, 0.0, &sched).is_err());
    }

    #[test]
    fn residual_examples() {
        let c = ForwardCurve::new(unit_grid(5), vec![0.1, 0.2, 0.3, 0.4, 0.5]).unwrap();
        let zc = CashFlowSchedule::new("Z", vec![4], vec![1.0]).unwrap();
        let r = constraint_residual(&c, -0.6, &zc).unwrap();
        assert!(r.value.abs() < 1e-15);
        assert_eq!(r.v, 1.0);
        let zero = ForwardCurve::flat(unit_grid(5), 0.0);
        let cp = CashFlowSchedule::new("C", vec![2, 5], vec![0.1, 1.1]).unwrap();
        let r = constraint_residual(&zero, 0.3, &cp).unwrap();
        assert!((r.value - (0.3 - 1.2f64.ln())).abs() < 1e-15);
        assert!((r.v - 1.2).abs() < 1e-15);
    }

    #[test]
    fn stage_mapping() {
        let o = origin();
        let s: CashFlowSchedule<f64> =
            map_dates_to_stages("A", &[Payment { date: o.add_days(1), amount: 1.0 }], o).unwrap();
        assert_eq!(s.stages, vec![2]);
        let s: CashFlowSchedule<f64> = map_dates_to_stages("A", &[Payment { date: o, amount: 1.0 }], o).unwrap();
        assert_eq!(s.stages, vec![1]);
        // SO 1041 matures 05/05/2014: 4686 calendar days after 06/07/2001.
        let m = CalendarDate::from_dmy(5, 5, 2014).unwrap();
        let s: CashFlowSchedule<f64> = map_dates_to_stages("SO 1041", &[Payment { date: m, amount: 1.0675 }], o).unwrap();
        assert_eq!(s.stages, vec![4687]);
        let early = Payment { date: o.add_days(-1), amount: 1.0 };
        assert!(map_dates_to_stages::<f64>("A", &[early], o).is_err());
    }

    #[test]
    fn csv_export_format() {
        let grid = CurveGrid::<f64>::daily(origin(), 2, 365.0);
        let c = ForwardCurve::new(grid, vec![0.04, 0.05]).unwrap();
        let csv = c.to_csv();
        let lines: Vec<_> = csv.lines().collect();
        assert_eq!(lines[0], "stage,date,t_years,f_per_year");
        assert_eq!(lines[1], "1,2001-07-06,0.00000000000e0,4.00000000000e-2");
        assert_eq!(lines[2], "2,2001-07-07,2.73972602740e-3,5.00000000000e-2");
    }

    #[test]
    fn works_in_single_precision() {
        let c = ForwardCurve::new(
            CurveGrid { xi: vec![1.0f32; 4], origin: origin(), days_per_year: 1.0 },
            vec![1.0, 2.0, 3.0, 4.0],
        )
        .unwrap();
        assert_eq!(eval_w(&c, &SmoothnessWeights::df()), 1.5f32);
    }

    fn arb_curve() -> impl Strategy<Value = (Vec<f64>, Vec<f64>)> {
        (3usize..30).prop_flat_map(|n| {
            (
                proptest::collection::vec(-0.1f64..0.2, n),
                proptest::collection::vec(0.1f64..2.0, n),
            )
        })
    }

    proptest! {
        #[test]
        fn w_nonnegative_and_scale_invariant((f, xi) in arb_curve(), g in 0.0f64..3.0, p in 0.0f64..3.0, k in prop_oneof![Just(2.0), Just(365.0), 0.01f64..50.0]) {
            prop_assume!(g + p > 0.0);
            let curve = ForwardCurve::new(CurveGrid { xi: xi.clone(), origin: origin(), days_per_year: 365.0 }, f.clone()).unwrap();
            let base = eval_w(&curve, &w(g, p));
            prop_assert!(base >= 0.0);
            let scaled = ForwardCurve::new(
                CurveGrid { xi: xi.iter().map(|x| x * k).collect(), origin: origin(), days_per_year: 365.0 },
                f.iter().map(|x| x / k).collect(),
            ).unwrap();
            let other = eval_w(&scaled, &w(g * k.powi(3), p * k.powi(5)));
            prop_assert!((other - base).abs() <= 1e-12 * base.abs().max(1e-300), "{base} vs {other}");
        }

        #[test]
        fn affine_curves_have_no_curvature(a in -1.0f64..1.0, b in -1.0f64..1.0, xi in proptest::collection::vec(0.1f64..2.0, 3..20)) {
            let t = CurveGrid { xi: xi.clone(), origin: origin(), days_per_year: 365.0 }.times();
            let curve = ForwardCurve::new(
                CurveGrid { xi, origin: origin(), days_per_year: 365.0 },
                t.iter().map(|t| a + b * t).collect(),
            ).unwrap();
            let ad = eval_w(&curve, &w(0.0, 1.0));
            prop_assert!(ad < 1e-20, "{ad}");
        }

        #[test]
        fn residual_round_trips_through_price(
            (f, xi) in arb_curve(),
            gaps in proptest::collection::vec(1usize..4, 1..5),
            coupon in 0.0f64..0.12,
        ) {
            let n = f.len();
            let mut stages = Vec::new();
            let mut stage = 1;
            for g in gaps {
                stage += g;
                if stage > n { break; }
                stages.push(stage);
            }
            prop_assume!(!stages.is_empty());
            let mut alphas = vec![coupon.max(1e-3); stages.len()];
            *alphas.last_mut().unwrap() = 1.0 + coupon;
            let sched = CashFlowSchedule::new("X", stages, alphas).unwrap();
            let curve = ForwardCurve::new(CurveGrid { xi, origin: origin(), days_per_year: 365.0 }, f).unwrap();
            let p = price_from_curve(&curve, &sched, 1.0).unwrap();
            let r = constraint_residual(&curve, p.ln(), &sched).unwrap();
            prop_assert!(r.value.abs() < 1e-12, "{}", r.value);
        }

        #[test]
        fn coupon_sum_at_least_final_flow(f in proptest::collection::vec(0.0f64..0.2, 10), coupon in 0.0f64..0.12) {
            let curve = ForwardCurve::new(unit_grid(10), f).unwrap();
            let sched = CashFlowSchedule::new("X", vec![3, 6, 9], vec![coupon.max(1e-4), coupon.max(1e-4), 1.0 + coupon]).unwrap();
            let r = constraint_residual(&curve, 0.0, &sched).unwrap();
            prop_assert!(r.v >= 1.0 + coupon - 1e-15);
        }
    }
}
