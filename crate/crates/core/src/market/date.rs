//! Calendar dates and the ISMA 30E/360 day count.

use std::fmt;
use std::str::FromStr;

use chrono::{Datelike, Duration, NaiveDate, Weekday};
use serde::{Deserialize, Deserializer, Serialize, Serializer};

use crate::error::{Error, Result};

/// A Gregorian calendar day. Ordering follows the calendar.
#[derive(Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct CalendarDate(NaiveDate);

impl CalendarDate {
    pub fn from_dmy(day: u32, month: u32, year: i32) -> Result<Self> {
        NaiveDate::from_ymd_opt(year, month, day)
            .map(CalendarDate)
            .ok_or_else(|| Error::InvalidDate(format!("{day:02}/{month:02}/{year:04}")))
    }

    pub fn day(&self) -> u32 {
        self.0.day()
    }

    pub fn month(&self) -> u32 {
        self.0.month()
    }

    pub fn year(&self) -> i32 {
        self.0.year()
    }

    /// Parses `yyyy-mm-dd`.
    pub fn parse_iso(s: &str) -> Result<Self> {
        NaiveDate::parse_from_str(s.trim(), "%Y-%m-%d")
            .map(CalendarDate)
            .map_err(|_| Error::InvalidDate(s.to_string()))
    }

    /// Parses `dd/mm/yyyy`.
    pub fn parse_dmy(s: &str) -> Result<Self> {
        NaiveDate::parse_from_str(s.trim(), "%d/%m/%Y")
            .map(CalendarDate)
            .map_err(|_| Error::InvalidDate(s.to_string()))
    }

    /// Accepts either `yyyy-mm-dd` or `dd/mm/yyyy`.
    pub fn parse_any(s: &str) -> Result<Self> {
        if s.contains('/') {
            Self::parse_dmy(s)
        } else {
            Self::parse_iso(s)
        }
    }

    pub fn to_dmy_string(&self) -> String {
        self.0.format("%d/%m/%Y").to_string()
    }

    pub fn add_days(&self, days: i64) -> Self {
        CalendarDate(self.0 + Duration::days(days))
    }

    /// Signed number of calendar days from `self` to `other`.
    pub fn days_until(&self, other: &CalendarDate) -> i64 {
        (other.0 - self.0).num_days()
    }

    /// Same day and month `years` years earlier; 29 February falls back to the 28th.
    pub fn minus_years(&self, years: i32) -> Self {
        let y = self.year() - years;
        let d = NaiveDate::from_ymd_opt(y, self.month(), self.day())
            .or_else(|| NaiveDate::from_ymd_opt(y, self.month(), self.day() - 1))
            .expect("only 29 February can be invalid after a year shift");
        CalendarDate(d)
    }

    /// Steps forward `k` weekdays. Holidays are not modelled.
    pub fn add_business_days(&self, k: u32) -> Self {
        let mut d = self.0;
        let mut left = k;
        while left > 0 {
            d += Duration::days(1);
            if !matches!(d.weekday(), Weekday::Sat | Weekday::Sun) {
                left -= 1;
            }
        }
        CalendarDate(d)
    }
}

impl fmt::Display for CalendarDate {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.0.format("%Y-%m-%d"))
    }
}

impl fmt::Debug for CalendarDate {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "CalendarDate({self})")
    }
}

impl FromStr for CalendarDate {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        Self::parse_any(s)
    }
}

impl Serialize for CalendarDate {
    fn serialize<S: Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        s.collect_str(self)
    }
}

impl<'de> Deserialize<'de> for CalendarDate {
    fn deserialize<D: Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        let s = String::deserialize(d)?;
        Self::parse_any(&s).map_err(serde::de::Error::custom)
    }
}

/// ISMA 30E/360 year fraction from `d1` to `d2`. Day 31 is clamped to 30 on
/// both dates; the result is signed.
pub fn daycount_30e360(d1: CalendarDate, d2: CalendarDate) -> f64 {
    let day1 = d1.day().min(30) as i64;
    let day2 = d2.day().min(30) as i64;
    let months = d2.month() as i64 - d1.month() as i64;
    let years = (d2.year() - d1.year()) as f64;
    years + (30 * months + day2 - day1) as f64 / 360.0
}
