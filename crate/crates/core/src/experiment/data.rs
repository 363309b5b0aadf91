use std::collections::BTreeMap;
use std::path::Path;

use crate::curve::SmoothnessWeights;
use crate::error::{Error, Result};
use crate::market::{
    parse_bond_table_with_nominal, parse_quote_table, quote_dates, quotes_on, BondSpec, CalendarDate, QuoteRow,
    SpreadPolicy, DEFAULT_NOMINAL,
};
use crate::problem::{assemble, DayProblem, ProblemConfig};

/// Eleven government bonds with their maturities and coupons.
pub const SAMPLE_BONDS_CSV: &str = include_str!("../../data/bonds.csv");
/// Their quoted yields over ten trading days in July 2001.
pub const SAMPLE_QUOTES_CSV: &str = include_str!("../../data/quotes.csv");

/// Bond table and quotes.
#[derive(Debug, Clone, PartialEq)]
pub struct MarketData {
    pub bonds: Vec<BondSpec>,
    pub quotes: Vec<QuoteRow>,
}

/// Per-bond spreads: a default and explicit overrides by bond id.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct SpreadSpec {
    pub default: f64,
    pub overrides: BTreeMap<String, f64>,
}

impl SpreadSpec {
    pub fn uniform(spread: f64) -> Self {
        SpreadSpec { default: spread, overrides: BTreeMap::new() }
    }

    pub fn with_override(mut self, bond: &str, spread: f64) -> Self {
        self.overrides.insert(bond.to_string(), spread);
        self
    }

    pub fn for_bond(&self, id: &str) -> f64 {
        self.overrides.get(id).copied().unwrap_or(self.default)
    }

    pub fn validate(&self, bonds: &[BondSpec]) -> Result<()> {
        for (id, s) in std::iter::once((&String::new(), &self.default)).chain(&self.overrides) {
            if !id.is_empty() && !bonds.iter().any(|b| &b.id == id) {
                return Err(Error::UnknownBond(id.clone()));
            }
            if !(*s >= 0.0 && s.is_finite()) {
                return Err(Error::Domain(format!("spread {s} must be finite and nonnegative")));
            }
        }
        Ok(())
    }
}

/// How a trade date turns into a curve problem.
#[derive(Debug, Clone)]
pub struct DayOptions {
    pub weights: SmoothnessWeights<f64>,
    pub positivity: bool,
    pub spread_policy: SpreadPolicy,
    pub days_per_year: f64,
    /// Settlement lag in weekdays after the trade date.
    pub settlement_lag: u32,
    pub grid_len: Option<usize>,
}

impl Default for DayOptions {
    fn default() -> Self {
        DayOptions {
            weights: SmoothnessWeights::df(),
            positivity: true,
            spread_policy: SpreadPolicy::Symmetric,
            days_per_year: 365.0,
            settlement_lag: 0,
            grid_len: None,
        }
    }
}

impl MarketData {
    pub fn sample() -> Self {
        MarketData::from_texts(SAMPLE_BONDS_CSV, SAMPLE_QUOTES_CSV, DEFAULT_NOMINAL).expect("bundled data parses")
    }

    pub fn from_texts(bonds: &str, quotes: &str, nominal: f64) -> Result<Self> {
        let bonds = parse_bond_table_with_nominal(bonds, nominal)?;
        let quotes = parse_quote_table(quotes, &bonds)?;
        Ok(MarketData { bonds, quotes })
    }

    pub fn load(bonds: &Path, quotes: &Path, nominal: f64) -> Result<Self> {
        let b = std::fs::read_to_string(bonds).map_err(|e| Error::Io(format!("{}: {e}", bonds.display())))?;
        let q = std::fs::read_to_string(quotes).map_err(|e| Error::Io(format!("{}: {e}", quotes.display())))?;
        MarketData::from_texts(&b, &q, nominal)
    }

    pub fn dates(&self) -> Vec<CalendarDate> {
        quote_dates(&self.quotes)
    }

    pub fn bond(&self, id: &str) -> Result<&BondSpec> {
        self.bonds.iter().find(|b| b.id == id).ok_or_else(|| Error::UnknownBond(id.to_string()))
    }

    /// Constraints from every bond quoted on `date` and not yet matured.
    pub fn day_problem(&self, date: CalendarDate, spreads: &SpreadSpec, opts: &DayOptions) -> Result<DayProblem> {
        spreads.validate(&self.bonds)?;
        let quotes = quotes_on(&self.quotes, &self.bonds, date);
        if quotes.is_empty() {
            return Err(Error::MissingData(date.to_string()));
        }
        let settlement = date.add_business_days(opts.settlement_lag);
        let triples: Vec<(&BondSpec, &QuoteRow, f64)> = quotes
            .iter()
            .filter_map(|q| {
                let b = self.bonds.iter().find(|b| b.id == q.bond_id)?;
                (b.maturity > settlement).then(|| (b, *q, spreads.for_bond(&b.id)))
            })
            .collect();
        if triples.is_empty() {
            return Err(Error::MissingData(format!("no live bonds on {date}")));
        }
        let cfg = ProblemConfig {
            weights: opts.weights,
            positivity: opts.positivity,
            spread_policy: opts.spread_policy,
            days_per_year: opts.days_per_year,
            grid_len: opts.grid_len,
        };
        assemble(settlement, &triples, &cfg)
    }
}
