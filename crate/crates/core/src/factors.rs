//! Daily factor and risk-free series compounded to month ends.

use std::collections::BTreeMap;

use chrono::NaiveDate;
use serde::Serialize;

use crate::calendar::TradingCalendar;
use crate::prices::compound;

/// One day of market, size, value, momentum and risk-free returns.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DailyFactorRow {
    pub date: NaiveDate,
    pub mkt_excess: f64,
    pub smb: f64,
    pub hml: f64,
    pub umd: Option<f64>,
    pub rf: f64,
}

/// Monthly factor returns. `mkt` is the compounded market return less the compounded rate.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct FactorMonth {
    pub mkt: f64,
    pub smb: f64,
    pub hml: f64,
    pub umd: Option<f64>,
    pub rf: f64,
}

impl FactorMonth {
    /// Compounded total market return.
    pub fn market_total(&self) -> f64 {
        self.mkt + self.rf
    }
}

/// Compound daily factors over `(previous month end, month end]`.
///
/// Months without observations are absent; momentum is absent for a month
/// if any day in it lacks a value.
pub fn monthly_factors(daily: &[DailyFactorRow], calendar: &TradingCalendar) -> BTreeMap<NaiveDate, FactorMonth> {
    let mut buckets: BTreeMap<NaiveDate, Vec<DailyFactorRow>> = BTreeMap::new();
    let mut sorted = daily.to_vec();
    sorted.sort_by_key(|r| r.date);
    for row in sorted {
        if let Some(m) = calendar.month_end_on_or_after(row.date) {
            buckets.entry(m).or_default().push(row);
        }
    }
    buckets
        .into_iter()
        .map(|(month, rows)| {
            let rf: Vec<f64> = rows.iter().map(|r| r.rf).collect();
            let total: Vec<f64> = rows.iter().map(|r| r.mkt_excess + r.rf).collect();
            let col = |f: fn(&DailyFactorRow) -> f64| compound(&rows.iter().map(f).collect::<Vec<_>>());
            let umd: Option<Vec<f64>> = rows.iter().map(|r| r.umd).collect();
            let rf_m = compound(&rf);
            (
                month,
                FactorMonth {
                    mkt: compound(&total) - rf_m,
                    smb: col(|r| r.smb),
                    hml: col(|r| r.hml),
                    umd: umd.map(|u| compound(&u)),
                    rf: rf_m,
                },
            )
        })
        .collect()
}

pub fn risk_free_by_month(factors: &BTreeMap<NaiveDate, FactorMonth>) -> BTreeMap<NaiveDate, f64> {
    factors.iter().map(|(m, f)| (*m, f.rf)).collect()
}
