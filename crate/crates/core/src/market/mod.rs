//! Market data ingestion: dates, bonds, quotes and price bounds.

mod bond;
mod date;
mod schedule;
mod table;

pub use bond::{
    coupon_schedule, log_price_bounds, price_from_quote, BondSpec, LogPriceBounds, Payment, QuoteRow,
    SpreadPolicy, DEFAULT_NOMINAL,
};
pub use date::{daycount_30e360, CalendarDate};
pub use schedule::CashFlowSchedule;
pub use table::{
    parse_bond_table, parse_bond_table_with_nominal, parse_quote_table, quote_dates, quotes_on,
    serialize_bond_table, serialize_quote_table,
};
