//! CSV bond and quote tables.
//!
//! `bonds.csv` has header `id,maturity,coupon_pct` with maturities as
//! `dd/mm/yyyy` (ISO dates are accepted too). `quotes.csv` has header
//! `date,bond_id,rate_pct` with ISO dates; an empty rate means the bond was
//! not quoted that day.

use std::collections::{BTreeSet, HashSet};

use super::bond::{BondSpec, QuoteRow, DEFAULT_NOMINAL};
use super::date::CalendarDate;
use crate::error::{Error, Result};

fn reader(text: &str) -> csv::Reader<&[u8]> {
    csv::ReaderBuilder::new()
        .trim(csv::Trim::All)
        .has_headers(true)
        .from_reader(text.as_bytes())
}

fn expect_header(rdr: &mut csv::Reader<&[u8]>, expected: &[&str]) -> Result<()> {
    let headers = rdr.headers()?;
    if headers.is_empty() {
        return Ok(());
    }
    let got: Vec<&str> = headers.iter().collect();
    if got != expected {
        return Err(Error::Parse {
            line: 1,
            message: format!("expected header {:?}, found {:?}", expected.join(","), got.join(",")),
        });
    }
    Ok(())
}

fn line_of(record: &csv::StringRecord) -> usize {
    record.position().map(|p| p.line() as usize).unwrap_or(0)
}

fn field<'a>(record: &'a csv::StringRecord, idx: usize, name: &str) -> Result<&'a str> {
    record.get(idx).ok_or_else(|| Error::Parse {
        line: line_of(record),
        message: format!("missing field {name}"),
    })
}

fn number(record: &csv::StringRecord, idx: usize, name: &str) -> Result<f64> {
    let raw = field(record, idx, name)?;
    raw.parse::<f64>()
        .ok()
        .filter(|x| x.is_finite())
        .ok_or_else(|| Error::Parse {
            line: line_of(record),
            message: format!("{name}: not a finite number: {raw:?}"),
        })
}

/// Parses a bond table; every bond receives `DEFAULT_NOMINAL`.
pub fn parse_bond_table(text: &str) -> Result<Vec<BondSpec>> {
    parse_bond_table_with_nominal(text, DEFAULT_NOMINAL)
}

pub fn parse_bond_table_with_nominal(text: &str, nominal: f64) -> Result<Vec<BondSpec>> {
    if !(nominal > 0.0) {
        return Err(Error::Domain(format!("nominal {nominal} must be positive")));
    }
    let mut rdr = reader(text);
    expect_header(&mut rdr, &["id", "maturity", "coupon_pct"])?;
    let mut out = Vec::new();
    let mut seen = HashSet::new();
    for record in rdr.records() {
        let record = record?;
        let line = line_of(&record);
        let id = field(&record, 0, "id")?.to_string();
        let maturity = CalendarDate::parse_any(field(&record, 1, "maturity")?)
            .map_err(|e| Error::Parse { line, message: e.to_string() })?;
        let coupon = number(&record, 2, "coupon_pct")?;
        if coupon < 0.0 {
            return Err(Error::Parse { line, message: format!("negative coupon {coupon}") });
        }
        if !seen.insert(id.clone()) {
            return Err(Error::Parse { line, message: format!("duplicate bond id {id:?}") });
        }
        out.push(BondSpec::new(id, maturity, coupon).with_nominal(nominal));
    }
    Ok(out)
}

/// Parses a quote table, rejecting ids not present in `bonds` and repeated
/// `(date, bond)` pairs.
pub fn parse_quote_table(text: &str, bonds: &[BondSpec]) -> Result<Vec<QuoteRow>> {
    let known: HashSet<&str> = bonds.iter().map(|b| b.id.as_str()).collect();
    let mut rdr = reader(text);
    expect_header(&mut rdr, &["date", "bond_id", "rate_pct"])?;
    let mut out = Vec::new();
    let mut seen = HashSet::new();
    for record in rdr.records() {
        let record = record?;
        let line = line_of(&record);
        let trade_date = CalendarDate::parse_iso(field(&record, 0, "date")?)
            .map_err(|e| Error::Parse { line, message: e.to_string() })?;
        let bond_id = field(&record, 1, "bond_id")?.to_string();
        if !known.contains(bond_id.as_str()) {
            return Err(Error::UnknownBond(bond_id));
        }
        if !seen.insert((trade_date, bond_id.clone())) {
            return Err(Error::DuplicateQuote { date: trade_date.to_string(), bond: bond_id });
        }
        if field(&record, 2, "rate_pct")?.is_empty() {
            continue;
        }
        let quoted_rate = number(&record, 2, "rate_pct")?;
        out.push(QuoteRow { trade_date, bond_id, quoted_rate });
    }
    Ok(out)
}

pub fn serialize_bond_table(bonds: &[BondSpec]) -> String {
    let mut s = String::from("id,maturity,coupon_pct\n");
    for b in bonds {
        s.push_str(&format!("{},{},{}\n", b.id, b.maturity.to_dmy_string(), b.coupon_rate));
    }
    s
}

pub fn serialize_quote_table(quotes: &[QuoteRow]) -> String {
    let mut s = String::from("date,bond_id,rate_pct\n");
    for q in quotes {
        s.push_str(&format!("{},{},{}\n", q.trade_date, q.bond_id, q.quoted_rate));
    }
    s
}

/// Distinct trade dates in ascending order.
pub fn quote_dates(quotes: &[QuoteRow]) -> Vec<CalendarDate> {
    quotes.iter().map(|q| q.trade_date).collect::<BTreeSet<_>>().into_iter().collect()
}

/// Quotes for one trade date, in bond-table order.
pub fn quotes_on<'a>(quotes: &'a [QuoteRow], bonds: &[BondSpec], date: CalendarDate) -> Vec<&'a QuoteRow> {
    bonds
        .iter()
        .filter_map(|b| quotes.iter().find(|q| q.trade_date == date && q.bond_id == b.id))
        .collect()
}
