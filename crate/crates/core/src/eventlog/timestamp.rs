use std::fmt;

use chrono::{DateTime, Datelike, NaiveDate, NaiveDateTime, Timelike};
use serde::{Deserialize, Serialize};

/// An absolute instant in milliseconds since the Unix epoch, interpreted as UTC.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Default, Serialize, Deserialize)]
pub struct Timestamp(i64);

const NAIVE_FORMATS: &[&str] = &[
    "%Y-%m-%dT%H:%M:%S%.f",
    "%Y-%m-%d %H:%M:%S%.f",
    "%Y-%m-%dT%H:%M",
    "%Y-%m-%d %H:%M",
    "%Y/%m/%d %H:%M:%S%.f",
    "%d-%m-%Y %H:%M:%S",
    "%d-%m-%Y %H:%M",
];

const OFFSET_FORMATS: &[&str] = &[
    "%Y-%m-%d %H:%M:%S%.f%:z",
    "%Y-%m-%d %H:%M:%S%.f%z",
    "%Y-%m-%dT%H:%M:%S%.f%z",
];

impl Timestamp {
    pub const fn from_millis(ms: i64) -> Self {
        Timestamp(ms)
    }

    pub fn from_secs_f64(secs: f64) -> Self {
        Timestamp((secs * 1000.0).round() as i64)
    }

    pub const fn millis(self) -> i64 {
        self.0
    }

    pub fn as_secs_f64(self) -> f64 {
        self.0 as f64 / 1000.0
    }

    /// Seconds elapsed from `earlier` to `self` (negative if `earlier` is later).
    pub fn secs_since(self, earlier: Timestamp) -> f64 {
        (self.0 - earlier.0) as f64 / 1000.0
    }

    /// Shifts by a possibly fractional number of seconds, rounded to milliseconds.
    pub fn add_secs(self, secs: f64) -> Timestamp {
        Timestamp(self.0 + (secs * 1000.0).round() as i64)
    }

    fn to_datetime(self) -> NaiveDateTime {
        DateTime::from_timestamp_millis(self.0)
            .map(|d| d.naive_utc())
            .unwrap_or_default()
    }

    /// Seconds since the preceding UTC midnight, fractional milliseconds included.
    pub fn secs_since_midnight(self) -> f64 {
        let dt = self.to_datetime();
        dt.num_seconds_from_midnight() as f64 + (dt.and_utc().timestamp_subsec_millis() as f64) / 1000.0
    }

    /// Day of week in UTC, Monday = 0.
    pub fn weekday(self) -> u32 {
        self.to_datetime().weekday().num_days_from_monday()
    }

    /// Parses ISO-8601 (with or without offset) and `dd-MM-yyyy HH:mm:ss`.
    ///
    /// Timestamps without an offset are taken as UTC.
    pub fn parse(text: &str) -> Option<Timestamp> {
        let s = text.trim();
        if s.is_empty() {
            return None;
        }
        if let Ok(dt) = DateTime::parse_from_rfc3339(s) {
            return Some(Timestamp(dt.timestamp_millis()));
        }
        for fmt in OFFSET_FORMATS {
            if let Ok(dt) = DateTime::parse_from_str(s, fmt) {
                return Some(Timestamp(dt.timestamp_millis()));
            }
        }
        for fmt in NAIVE_FORMATS {
            if let Ok(dt) = NaiveDateTime::parse_from_str(s, fmt) {
                return Some(Timestamp(dt.and_utc().timestamp_millis()));
            }
        }
        NaiveDate::parse_from_str(s, "%Y-%m-%d")
            .ok()
            .and_then(|d| d.and_hms_opt(0, 0, 0))
            .map(|dt| Timestamp(dt.and_utc().timestamp_millis()))
    }

    /// Parses with an explicit chrono format string, as UTC.
    pub fn parse_with_format(text: &str, fmt: &str) -> Option<Timestamp> {
        let s = text.trim();
        if let Ok(dt) = DateTime::parse_from_str(s, fmt) {
            return Some(Timestamp(dt.timestamp_millis()));
        }
        NaiveDateTime::parse_from_str(s, fmt)
            .ok()
            .map(|dt| Timestamp(dt.and_utc().timestamp_millis()))
    }
}

impl fmt::Display for Timestamp {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}Z", self.to_datetime().format("%Y-%m-%dT%H:%M:%S%.3f"))
    }
}
