//! Bond descriptions, quoted-rate pricing and log-price bounds.

use serde::{Deserialize, Serialize};

use super::date::{daycount_30e360, CalendarDate};
use crate::error::{Error, Result};
use crate::scalar::Real;

/// Nominal used for every bond unless configured otherwise (SEK 40 million).
pub const DEFAULT_NOMINAL: f64 = 40_000_000.0;

/// Annual-coupon bullet bond.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BondSpec {
    pub id: String,
    pub maturity: CalendarDate,
    /// Coupon in percent per annum.
    pub coupon_rate: f64,
    pub nominal: f64,
}

impl BondSpec {
    pub fn new(id: impl Into<String>, maturity: CalendarDate, coupon_rate: f64) -> Self {
        BondSpec {
            id: id.into(),
            maturity,
            coupon_rate,
            nominal: DEFAULT_NOMINAL,
        }
    }

    pub fn with_nominal(mut self, nominal: f64) -> Self {
        self.nominal = nominal;
        self
    }
}

/// One quoted rate (percent per annum) for one bond on one trade date.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct QuoteRow {
    pub trade_date: CalendarDate,
    pub bond_id: String,
    pub quoted_rate: f64,
}

/// A payment expressed as a fraction of the nominal.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Payment {
    pub date: CalendarDate,
    pub amount: f64,
}

/// Remaining payments after `settlement`: coupons on maturity anniversaries,
/// the last one paid together with the nominal. Amounts are normalized by
/// the nominal.
pub fn coupon_schedule(bond: &BondSpec, settlement: CalendarDate) -> Result<Vec<Payment>> {
    if settlement >= bond.maturity {
        return Err(Error::MaturedInstrument {
            bond: bond.id.clone(),
            settlement: settlement.to_string(),
        });
    }
    let coupon = bond.coupon_rate / 100.0;
    let mut out = Vec::new();
    let mut k = 0;
    loop {
        let date = bond.maturity.minus_years(k);
        if date <= settlement {
            break;
        }
        let amount = if k == 0 { 1.0 + coupon } else { coupon };
        out.push(Payment { date, amount });
        k += 1;
    }
    out.reverse();
    Ok(out)
}

/// Price from a quoted annually compounded rate, with 30E/360 year
/// fractions measured from `settlement`.
pub fn price_from_quote(bond: &BondSpec, quoted_rate: f64, settlement: CalendarDate) -> Result<f64> {
    if !(quoted_rate > -100.0) || !quoted_rate.is_finite() {
        return Err(Error::Domain(format!("quoted rate {quoted_rate} must be finite and > -100")));
    }
    let schedule = coupon_schedule(bond, settlement)?;
    let base = 1.0 + quoted_rate / 100.0;
    Ok(schedule
        .iter()
        .map(|p| p.amount * bond.nominal / base.powf(daycount_30e360(settlement, p.date)))
        .sum())
}

/// How a single quoted price is widened into a bid/ask interval.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum SpreadPolicy {
    /// Quoted log-price at the midpoint.
    #[default]
    Symmetric,
    /// Quoted log-price is the bid.
    BidAnchored,
}

/// Admissible interval for the log price `ln(P/N)`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LogPriceBounds<T> {
    pub rho_b: T,
    pub rho_a: T,
}

impl<T: Real> LogPriceBounds<T> {
    pub fn spread(&self) -> T {
        self.rho_a - self.rho_b
    }

    pub fn mid(&self) -> T {
        (self.rho_a + self.rho_b) * T::lit(0.5)
    }

    /// Zero-width interval: the log price is pinned.
    pub fn is_degenerate(&self) -> bool {
        self.rho_a <= self.rho_b
    }

    pub fn contains(&self, rho: T) -> bool {
        rho >= self.rho_b && rho <= self.rho_a
    }
}

pub fn log_price_bounds<T: Real>(
    price: T,
    nominal: T,
    spread: T,
    policy: SpreadPolicy,
) -> Result<LogPriceBounds<T>> {
    if !(price > T::zero()) || !(nominal > T::zero()) {
        return Err(Error::Domain(format!("price {price} and nominal {nominal} must be positive")));
    }
    if !(spread >= T::zero()) {
        return Err(Error::Domain(format!("spread {spread} must be nonnegative")));
    }
    let mid = (price / nominal).ln();
    Ok(match policy {
        SpreadPolicy::Symmetric => {
            let half = spread * T::lit(0.5);
            LogPriceBounds {
                rho_b: mid - half,
                rho_a: mid + half,
            }
        }
        SpreadPolicy::BidAnchored => LogPriceBounds {
            rho_b: mid,
            rho_a: mid + spread,
        },
    })
}
