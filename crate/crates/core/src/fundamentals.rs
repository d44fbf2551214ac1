//! Quarterly filings: point-in-time lagging and monthly forward-fill.
//!
//! A filing becomes usable on the first trading day strictly after its report
//! date and is attached to the first month end on or after that day. It is then
//! carried forward month by month until a newer filing arrives or it becomes
//! staler than the configured limit.

use std::collections::BTreeMap;

use chrono::NaiveDate;
use serde::{Deserialize, Serialize};

use crate::calendar::TradingCalendar;
use crate::types::{months_between, DiagnosticKind, Diagnostics, FirmId};

/// One 10-Q style filing. Currency fields are in the vendor's units.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct QuarterlyFiling {
    pub firm_id: FirmId,
    pub report_date: NaiveDate,
    pub total_assets: Option<f64>,
    pub cash_holdings: Option<f64>,
    pub total_debt: Option<f64>,
    pub earnings: Option<f64>,
    pub rnd_expense: Option<f64>,
    pub interest_expense: Option<f64>,
    pub dividends_paid: Option<f64>,
}

impl QuarterlyFiling {
    /// Check the balance-sheet sanity rules; returns a reason on failure.
    pub fn validate(&self) -> Result<(), String> {
        if let Some(a) = self.total_assets {
            if a < 0.0 {
                return Err(format!("negative total assets {a}"));
            }
        }
        if let Some(c) = self.cash_holdings {
            if c < 0.0 {
                return Err(format!("negative cash holdings {c}"));
            }
            if let Some(a) = self.total_assets {
                if c > a {
                    return Err(format!("cash holdings {c} exceed total assets {a}"));
                }
            }
        }
        Ok(())
    }
}

/// A filing together with the dates at which it became public to the strategy.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EffectiveFiling {
    pub filing: QuarterlyFiling,
    /// First trading day strictly after the report date.
    pub effective_date: NaiveDate,
    /// First month end on or after `effective_date`.
    pub effective_month: NaiveDate,
}

/// Forward-filled fundamentals for one firm at one month end.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MonthlyFundamentals {
    pub firm_id: FirmId,
    pub month_end: NaiveDate,
    pub current: EffectiveFiling,
    /// The filing that `current` superseded, if any.
    pub previous: Option<EffectiveFiling>,
    /// Calendar months since `current` became effective.
    pub staleness_months: i32,
}

/// Apply the t+1 trading-day lag and map each filing to its effective month end.
///
/// Filings whose lagged date falls beyond the calendar are dropped. Output is
/// sorted by `(firm_id, effective_date, report_date)`.
pub fn apply_pit_lag(
    filings: &[QuarterlyFiling],
    calendar: &TradingCalendar,
    diag: &mut Diagnostics,
) -> Vec<EffectiveFiling> {
    let mut out = Vec::with_capacity(filings.len());
    for filing in filings {
        let effective = calendar
            .next_trading_day_after(filing.report_date)
            .and_then(|day| calendar.month_end_on_or_after(day).map(|m| (day, m)));
        match effective {
            Some((effective_date, effective_month)) => {
                out.push(EffectiveFiling { filing: filing.clone(), effective_date, effective_month })
            }
            None => diag.push(
                DiagnosticKind::FilingAfterCalendar,
                format!(
                    "{} filing reported {} has no trading day after it in the calendar",
                    filing.firm_id, filing.report_date
                ),
            ),
        }
    }
    out.sort_by(|a, b| {
        (&a.filing.firm_id, a.effective_date, a.filing.report_date).cmp(&(
            &b.filing.firm_id,
            b.effective_date,
            b.filing.report_date,
        ))
    });
    out
}

/// Carry the latest effective filing forward over the calendar's month ends.
///
/// When several filings become effective in the same month, the one reported
/// last wins and the earlier ones are skipped entirely. Rows staler than
/// `max_staleness_months` are not emitted.
pub fn forward_fill_monthly(
    filings: &[EffectiveFiling],
    calendar: &TradingCalendar,
    max_staleness_months: u32,
) -> Vec<MonthlyFundamentals> {
    let mut by_firm: BTreeMap<&FirmId, Vec<&EffectiveFiling>> = BTreeMap::new();
    for f in filings {
        by_firm.entry(&f.filing.firm_id).or_default().push(f);
    }

    let mut out = Vec::new();
    for (firm, mut list) in by_firm {
        list.sort_by_key(|f| (f.effective_month, f.effective_date, f.filing.report_date));
        // one filing per effective month: the last one reported
        let mut chain: Vec<&EffectiveFiling> = Vec::with_capacity(list.len());
        for f in list {
            match chain.last() {
                Some(last) if last.effective_month == f.effective_month => {
                    *chain.last_mut().expect("non-empty") = f;
                }
                _ => chain.push(f),
            }
        }

        let first = chain[0].effective_month;
        let mut idx = 0usize;
        for &month_end in calendar.month_ends().iter().filter(|m| **m >= first) {
            while idx + 1 < chain.len() && chain[idx + 1].effective_month <= month_end {
                idx += 1;
            }
            let current = chain[idx];
            let staleness = months_between(current.effective_month, month_end);
            if staleness > max_staleness_months as i32 {
                continue;
            }
            out.push(MonthlyFundamentals {
                firm_id: firm.clone(),
                month_end,
                current: current.clone(),
                previous: idx.checked_sub(1).map(|i| chain[i].clone()),
                staleness_months: staleness,
            });
        }
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use chrono::Datelike;

    fn d(s: &str) -> NaiveDate {
        NaiveDate::parse_from_str(s, "%Y-%m-%d").unwrap()
    }

    fn weekdays(from: &str, to: &str) -> TradingCalendar {
        let mut days = Vec::new();
        let mut x = d(from);
        while x <= d(to) {
            if x.weekday().num_days_from_monday() < 5 {
                days.push(x);
            }
            x = x.succ_opt().unwrap();
        }
        TradingCalendar::new(days).unwrap()
    }

    fn filing(firm: &str, rdq: &str, cash: f64) -> QuarterlyFiling {
        QuarterlyFiling {
            firm_id: FirmId::new(firm),
            report_date: d(rdq),
            total_assets: Some(1000.0),
            cash_holdings: Some(cash),
            total_debt: Some(100.0),
            earnings: Some(10.0),
            rnd_expense: None,
            interest_expense: None,
            dividends_paid: None,
        }
    }

    #[test]
    fn month_end_report_rolls_to_next_month() {
        let cal = weekdays("2020-01-01", "2020-03-31");
        let mut diag = Diagnostics::new();
        // 2020-01-31 is a Friday and the January month end
        let eff = apply_pit_lag(&[filing("A", "2020-01-31", 5.0)], &cal, &mut diag);
        assert_eq!(eff[0].effective_date, d("2020-02-03"));
        assert_eq!(eff[0].effective_month, d("2020-02-28"));
    }

    #[test]
    fn mid_month_report_stays_in_month() {
        let cal = weekdays("2020-01-01", "2020-03-31");
        let mut diag = Diagnostics::new();
        let eff = apply_pit_lag(&[filing("A", "2020-01-15", 5.0)], &cal, &mut diag);
        assert_eq!(eff[0].effective_date, d("2020-01-16"));
        assert_eq!(eff[0].effective_month, d("2020-01-31"));
    }

    #[test]
    fn holiday_weekend_pushes_to_tuesday() {
        // Friday 2020-02-14 is a non-trading day here, as is Monday 2020-02-17.
        let days: Vec<NaiveDate> = weekdays("2020-02-01", "2020-02-29")
            .days()
            .iter()
            .copied()
            .filter(|x| *x != d("2020-02-14") && *x != d("2020-02-17"))
            .collect();
        let cal = TradingCalendar::new(days).unwrap();
        let mut diag = Diagnostics::new();
        let eff = apply_pit_lag(&[filing("A", "2020-02-14", 5.0)], &cal, &mut diag);
        assert_eq!(eff[0].effective_date, d("2020-02-18"));
    }

    #[test]
    fn report_after_calendar_is_dropped() {
        let cal = weekdays("2020-01-01", "2020-01-31");
        let mut diag = Diagnostics::new();
        let eff = apply_pit_lag(&[filing("A", "2020-01-31", 5.0)], &cal, &mut diag);
        assert!(eff.is_empty());
        assert_eq!(diag.count(DiagnosticKind::FilingAfterCalendar), 1);
    }

    #[test]
    fn forward_fill_carries_and_replaces() {
        let cal = weekdays("2020-01-01", "2020-07-31");
        let mut diag = Diagnostics::new();
        let eff = apply_pit_lag(&[filing("A", "2020-03-10", 5.0), filing("A", "2020-06-10", 7.0)], &cal, &mut diag);
        let rows = forward_fill_monthly(&eff, &cal, 6);
        let months: Vec<(NaiveDate, f64)> =
            rows.iter().map(|r| (r.month_end, r.current.filing.cash_holdings.unwrap())).collect();
        assert_eq!(
            months,
            vec![
                (d("2020-03-31"), 5.0),
                (d("2020-04-30"), 5.0),
                (d("2020-05-29"), 5.0),
                (d("2020-06-30"), 7.0),
                (d("2020-07-31"), 7.0),
            ]
        );
        assert!(rows[2].previous.is_none());
        assert_eq!(rows[3].previous.as_ref().unwrap().filing.cash_holdings, Some(5.0));
    }

    #[test]
    fn stale_rows_are_dropped() {
        let cal = weekdays("2020-01-01", "2020-09-30");
        let mut diag = Diagnostics::new();
        let eff = apply_pit_lag(&[filing("A", "2020-01-10", 5.0)], &cal, &mut diag);
        let rows = forward_fill_monthly(&eff, &cal, 6);
        assert!(rows.iter().all(|r| r.month_end <= d("2020-07-31")));
        assert!(!rows.iter().any(|r| r.month_end == d("2020-09-30")));
        assert_eq!(rows.last().unwrap().staleness_months, 6);
    }

    #[test]
    fn forward_fill_is_idempotent() {
        let cal = weekdays("2019-01-01", "2020-12-31");
        let mut diag = Diagnostics::new();
        let filings: Vec<QuarterlyFiling> = ["2019-02-11", "2019-05-13", "2019-05-20", "2019-08-12", "2020-03-02"]
            .iter()
            .enumerate()
            .map(|(i, r)| filing("A", r, i as f64))
            .chain(std::iter::once(filing("B", "2019-04-30", 3.0)))
            .collect();
        let eff = apply_pit_lag(&filings, &cal, &mut diag);
        let once = forward_fill_monthly(&eff, &cal, 6);
        let refeed: Vec<EffectiveFiling> =
            once.iter().flat_map(|r| std::iter::once(r.current.clone()).chain(r.previous.clone())).collect();
        let twice = forward_fill_monthly(&refeed, &cal, 6);
        assert_eq!(once, twice);
    }

    #[test]
    fn delta_cash_telescopes() {
        let cal = weekdays("2019-01-01", "2021-12-31");
        let mut diag = Diagnostics::new();
        let cash = [10.0, 12.5, 9.0, 30.25, 31.0, 4.0];
        let rdq = ["2019-02-11", "2019-05-13", "2019-08-12", "2019-11-11", "2020-02-10", "2020-05-11"];
        let filings: Vec<QuarterlyFiling> = rdq.iter().zip(cash).map(|(r, c)| filing("A", r, c)).collect();
        let eff = apply_pit_lag(&filings, &cal, &mut diag);
        let rows = forward_fill_monthly(&eff, &cal, 6);
        let mut total = 0.0;
        let mut seen = std::collections::BTreeSet::new();
        for r in &rows {
            if let Some(p) = &r.previous {
                if seen.insert(r.current.effective_month) {
                    total += r.current.filing.cash_holdings.unwrap() - p.filing.cash_holdings.unwrap();
                }
            }
        }
        assert!((total - (cash[5] - cash[0])).abs() <= 1e-9 * cash[0].abs().max(1.0));
    }

    #[test]
    fn validation_rules() {
        let mut f = filing("A", "2020-01-10", 5.0);
        assert!(f.validate().is_ok());
        f.cash_holdings = Some(2000.0);
        assert!(f.validate().is_err());
        f.cash_holdings = Some(-1.0);
        assert!(f.validate().is_err());
    }
}
