//! UTC calendar helpers. Days are counted from 1970-01-01.

use chrono::{DateTime, Datelike, NaiveDate};

pub const SECONDS_PER_DAY: i64 = 86_400;

/// Whole UTC days since the epoch.
pub type Day = i64;

pub fn day_of(created_utc: i64) -> Day {
    created_utc.div_euclid(SECONDS_PER_DAY)
}

fn epoch() -> NaiveDate {
    NaiveDate::from_ymd_opt(1970, 1, 1).expect("epoch is a valid date")
}

pub fn date_of(day: Day) -> NaiveDate {
    epoch() + chrono::Duration::days(day)
}

pub fn day_from_date(date: NaiveDate) -> Day {
    (date - epoch()).num_days()
}

pub fn iso_date(day: Day) -> String {
    date_of(day).format("%Y-%m-%d").to_string()
}

pub fn parse_iso_date(s: &str) -> Option<Day> {
    NaiveDate::parse_from_str(s.trim(), "%Y-%m-%d")
        .ok()
        .map(day_from_date)
}

/// A calendar month.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, serde::Serialize, serde::Deserialize)]
pub struct Month {
    pub year: i32,
    pub month: u32,
}

impl Month {
    pub fn new(year: i32, month: u32) -> Option<Self> {
        (1..=12).contains(&month).then_some(Month { year, month })
    }

    pub fn containing(day: Day) -> Self {
        let d = date_of(day);
        Month {
            year: d.year(),
            month: d.month(),
        }
    }

    /// First day of the month.
    pub fn first_day(self) -> Day {
        day_from_date(NaiveDate::from_ymd_opt(self.year, self.month, 1).expect("valid month"))
    }
}

impl std::fmt::Display for Month {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "{:04}-{:02}", self.year, self.month)
    }
}

pub fn timestamp_of_day(day: Day) -> i64 {
    day * SECONDS_PER_DAY
}

pub fn iso_timestamp(created_utc: i64) -> String {
    DateTime::from_timestamp(created_utc, 0)
        .map(|t| t.format("%Y-%m-%dT%H:%M:%SZ").to_string())
        .unwrap_or_default()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn day_boundaries_are_utc() {
        assert_eq!(day_of(0), 0);
        assert_eq!(day_of(86_399), 0);
        assert_eq!(day_of(86_400), 1);
        assert_eq!(day_of(-1), -1);
    }

    #[test]
    fn month_start() {
        let d = parse_iso_date("2016-03-17").unwrap();
        let m = Month::containing(d);
        assert_eq!(m, Month::new(2016, 3).unwrap());
        assert_eq!(iso_date(m.first_day()), "2016-03-01");
        assert_eq!(m.to_string(), "2016-03");
        assert!(Month::new(2016, 13).is_none());
    }
}
