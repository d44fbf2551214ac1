//! Trading calendar with month-end extraction.
//!
//! Every monthly series in the crate is keyed by a month-end trading day taken
//! from this calendar. Months with no trading days simply have no month end;
//! nothing downstream interpolates across such a gap.

use chrono::{Datelike, NaiveDate};
use serde::Serialize;

use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct TradingCalendar {
    days: Vec<NaiveDate>,
    month_ends: Vec<NaiveDate>,
}

impl TradingCalendar {
    /// Build a calendar from sorted, deduplicated trading days.
    pub fn new(days: Vec<NaiveDate>) -> Result<Self> {
        if days.is_empty() {
            return Err(Error::Calendar("no trading days supplied".into()));
        }
        if let Some(w) = days.windows(2).find(|w| w[0] >= w[1]) {
            return Err(Error::Calendar(format!(
                "trading days must be strictly increasing ({} followed by {})",
                w[0], w[1]
            )));
        }
        let mut month_ends = Vec::new();
        for w in days.windows(2) {
            if (w[0].year(), w[0].month()) != (w[1].year(), w[1].month()) {
                month_ends.push(w[0]);
            }
        }
        month_ends.push(*days.last().expect("non-empty"));
        Ok(TradingCalendar { days, month_ends })
    }

    /// Build from arbitrary dates, sorting and dropping duplicates first.
    pub fn from_unsorted(mut days: Vec<NaiveDate>) -> Result<Self> {
        days.sort_unstable();
        days.dedup();
        Self::new(days)
    }

    pub fn days(&self) -> &[NaiveDate] {
        &self.days
    }

    pub fn month_ends(&self) -> &[NaiveDate] {
        &self.month_ends
    }

    pub fn first_day(&self) -> NaiveDate {
        self.days[0]
    }

    pub fn last_day(&self) -> NaiveDate {
        *self.days.last().expect("non-empty")
    }

    pub fn is_trading_day(&self, date: NaiveDate) -> bool {
        self.days.binary_search(&date).is_ok()
    }

    pub fn is_month_end(&self, date: NaiveDate) -> bool {
        self.month_ends.binary_search(&date).is_ok()
    }

    /// First trading day strictly after `date`.
    pub fn next_trading_day_after(&self, date: NaiveDate) -> Option<NaiveDate> {
        let idx = self.days.partition_point(|d| *d <= date);
        self.days.get(idx).copied()
    }

    /// Last trading day strictly before `date`.
    pub fn previous_trading_day_before(&self, date: NaiveDate) -> Option<NaiveDate> {
        let idx = self.days.partition_point(|d| *d < date);
        idx.checked_sub(1).map(|i| self.days[i])
    }

    /// First month end on or after `date`.
    pub fn month_end_on_or_after(&self, date: NaiveDate) -> Option<NaiveDate> {
        let idx = self.month_ends.partition_point(|d| *d < date);
        self.month_ends.get(idx).copied()
    }

    /// Position of `month_end` in [`Self::month_ends`].
    pub fn month_index(&self, month_end: NaiveDate) -> Option<usize> {
        self.month_ends.binary_search(&month_end).ok()
    }

    /// The month end immediately preceding `month_end` in the calendar.
    pub fn previous_month_end(&self, month_end: NaiveDate) -> Option<NaiveDate> {
        let idx = self.month_ends.partition_point(|d| *d < month_end);
        idx.checked_sub(1).map(|i| self.month_ends[i])
    }

    /// The month end immediately following `month_end` in the calendar.
    pub fn next_month_end(&self, month_end: NaiveDate) -> Option<NaiveDate> {
        let idx = self.month_ends.partition_point(|d| *d <= month_end);
        self.month_ends.get(idx).copied()
    }

    /// Month ends falling inside the inclusive date range.
    pub fn month_ends_between(&self, start: NaiveDate, end: NaiveDate) -> &[NaiveDate] {
        let lo = self.month_ends.partition_point(|d| *d < start);
        let hi = self.month_ends.partition_point(|d| *d <= end);
        &self.month_ends[lo..hi.max(lo)]
    }

    /// True if some calendar month between the first and last month end has no trading days.
    pub fn has_gaps(&self) -> bool {
        self.month_ends.windows(2).any(|w| !crate::types::is_next_month(w[0], w[1]))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn d(s: &str) -> NaiveDate {
        NaiveDate::parse_from_str(s, "%Y-%m-%d").unwrap()
    }

    #[test]
    fn month_ends_are_last_day_per_month() {
        let cal =
            TradingCalendar::new(vec![d("2020-01-30"), d("2020-01-31"), d("2020-02-27"), d("2020-02-28")]).unwrap();
        assert_eq!(cal.month_ends(), &[d("2020-01-31"), d("2020-02-28")]);
    }

    #[test]
    fn singleton_calendar() {
        let cal = TradingCalendar::new(vec![d("2020-03-16")]).unwrap();
        assert_eq!(cal.month_ends(), &[d("2020-03-16")]);
    }

    #[test]
    fn empty_month_is_absent_not_interpolated() {
        let cal =
            TradingCalendar::new(vec![d("2020-01-02"), d("2020-01-31"), d("2020-03-02"), d("2020-03-31")]).unwrap();
        assert_eq!(cal.month_ends().len(), 2);
        assert!(cal.has_gaps());
        assert_eq!(cal.next_month_end(d("2020-01-31")), Some(d("2020-03-31")));
    }

    #[test]
    fn rejects_empty_and_unsorted() {
        assert!(matches!(TradingCalendar::new(vec![]), Err(Error::Calendar(_))));
        assert!(TradingCalendar::new(vec![d("2020-01-03"), d("2020-01-02")]).is_err());
        assert!(TradingCalendar::new(vec![d("2020-01-02"), d("2020-01-02")]).is_err());
        let cal = TradingCalendar::from_unsorted(vec![d("2020-01-03"), d("2020-01-02"), d("2020-01-03")]).unwrap();
        assert_eq!(cal.days().len(), 2);
    }

    #[test]
    fn lookups() {
        let cal =
            TradingCalendar::new(vec![d("2020-01-30"), d("2020-01-31"), d("2020-02-03"), d("2020-02-28")]).unwrap();
        assert_eq!(cal.next_trading_day_after(d("2020-01-31")), Some(d("2020-02-03")));
        assert_eq!(cal.next_trading_day_after(d("2020-02-01")), Some(d("2020-02-03")));
        assert_eq!(cal.next_trading_day_after(d("2020-02-28")), None);
        assert_eq!(cal.previous_trading_day_before(d("2020-02-03")), Some(d("2020-01-31")));
        assert_eq!(cal.month_end_on_or_after(d("2020-02-01")), Some(d("2020-02-28")));
        assert_eq!(cal.previous_month_end(d("2020-02-28")), Some(d("2020-01-31")));
        assert_eq!(cal.month_ends_between(d("2020-02-01"), d("2020-12-31")), &[d("2020-02-28")]);
    }
}
