//! Daily price ingestion, corporate-action adjustment and monthly standardization.

use std::collections::BTreeMap;

use chrono::NaiveDate;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::calendar::TradingCalendar;
use crate::types::{is_next_month, DiagnosticKind, Diagnostics, SecurityId};

/// One row of the daily security file.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DailyPriceBar {
    pub security_id: SecurityId,
    pub date: NaiveDate,
    pub raw_price: Option<f64>,
    pub daily_return: Option<f64>,
    pub shares_outstanding: Option<f64>,
    pub cfacpr: Option<f64>,
    pub cfacshr: Option<f64>,
}

/// A daily bar after split/distribution adjustment.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct AdjustedBar {
    pub date: NaiveDate,
    pub adj_price: f64,
    pub adj_shares: f64,
    pub market_cap: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MonthlyEquityRow {
    pub security_id: SecurityId,
    pub month_end: NaiveDate,
    pub adj_price: f64,
    pub adj_shares: f64,
    pub market_cap: f64,
    /// Compounded from daily returns in the month; falls back to the price
    /// change from the previous month end; absent when neither exists.
    pub monthly_return: Option<f64>,
}

/// Keep the last row for each `(security, date)` pair, preserving input order otherwise.
pub fn dedup_bars(bars: Vec<DailyPriceBar>, diag: &mut Diagnostics) -> Vec<DailyPriceBar> {
    let mut latest: BTreeMap<(SecurityId, NaiveDate), DailyPriceBar> = BTreeMap::new();
    for bar in bars {
        let key = (bar.security_id.clone(), bar.date);
        if latest.insert(key, bar).is_some() {
            diag.push(DiagnosticKind::DuplicateRow, "duplicate (security, date) row; keeping the last one");
        }
    }
    latest.into_values().collect()
}

/// Adjust a single bar. Returns `None` (and records why) if it cannot be used.
pub fn adjust_bar(bar: &DailyPriceBar, diag: &mut Diagnostics) -> Option<AdjustedBar> {
    let price = bar.raw_price?;
    let (Some(cfacpr), Some(cfacshr)) = (bar.cfacpr, bar.cfacshr) else {
        diag.push(
            DiagnosticKind::NonPositiveAdjustment,
            format!("{} {}: missing adjustment factor", bar.security_id, bar.date),
        );
        return None;
    };
    if !(cfacpr > 0.0 && cfacshr > 0.0) {
        diag.push(
            DiagnosticKind::NonPositiveAdjustment,
            format!(
                "{} {}: nonpositive adjustment factor (cfacpr {cfacpr}, cfacshr {cfacshr})",
                bar.security_id, bar.date
            ),
        );
        return None;
    }
    let Some(shares) = bar.shares_outstanding.filter(|s| *s >= 0.0) else {
        diag.push(
            DiagnosticKind::MissingCriticalField,
            format!("{} {}: shares outstanding missing or negative", bar.security_id, bar.date),
        );
        return None;
    };
    if !(price > 0.0) {
        diag.push(DiagnosticKind::MissingPrice, format!("{} {}: nonpositive price", bar.security_id, bar.date));
        return None;
    }
    let adj_price = price / cfacpr;
    let adj_shares = shares * cfacshr;
    Some(AdjustedBar { date: bar.date, adj_price, adj_shares, market_cap: adj_price * adj_shares })
}

/// Adjust every bar that carries a price.
pub fn adjust_prices(bars: &[DailyPriceBar], diag: &mut Diagnostics) -> Vec<AdjustedBar> {
    bars.iter().filter_map(|b| adjust_bar(b, diag)).collect()
}

/// Gross-product compounding: `prod(1 + r) - 1`.
pub fn compound(returns: &[f64]) -> f64 {
    returns.iter().fold(1.0, |acc, r| acc * (1.0 + r)) - 1.0
}

/// Compound dated daily returns into one return per month end.
///
/// The window for month end `m` is `(previous month end, m]`. Months with no
/// observations are absent. Daily returns `<= -1` are rejected.
pub fn compound_monthly_returns(
    daily: &[(NaiveDate, f64)],
    calendar: &TradingCalendar,
    diag: &mut Diagnostics,
) -> BTreeMap<NaiveDate, f64> {
    let mut gross: BTreeMap<NaiveDate, f64> = BTreeMap::new();
    let mut sorted: Vec<(NaiveDate, f64)> = daily.to_vec();
    sorted.sort_by_key(|(d, _)| *d);
    for (date, r) in sorted {
        if !(r > -1.0) || !r.is_finite() {
            diag.push(DiagnosticKind::TotalLossReturn, format!("{date}: daily return {r} rejected"));
            continue;
        }
        let Some(month_end) = calendar.month_end_on_or_after(date) else {
            continue;
        };
        *gross.entry(month_end).or_insert(1.0) *= 1.0 + r;
    }
    gross.into_iter().map(|(m, g)| (m, g - 1.0)).collect()
}

/// Sample adjusted prices on month-end days and attach a monthly return.
///
/// `adjusted` must belong to one security. Compounded returns win over the
/// price-change fallback when both exist.
pub fn sample_month_end(
    security_id: &SecurityId,
    adjusted: &[AdjustedBar],
    compounded: &BTreeMap<NaiveDate, f64>,
    calendar: &TradingCalendar,
) -> Vec<MonthlyEquityRow> {
    let mut rows: Vec<MonthlyEquityRow> = Vec::new();
    for bar in adjusted.iter().filter(|b| calendar.is_month_end(b.date)) {
        let from_prices = rows
            .last()
            .filter(|prev| is_next_month(prev.month_end, bar.date))
            .map(|prev| bar.adj_price / prev.adj_price - 1.0);
        let monthly_return = compounded.get(&bar.date).copied().or(from_prices);
        rows.push(MonthlyEquityRow {
            security_id: security_id.clone(),
            month_end: bar.date,
            adj_price: bar.adj_price,
            adj_shares: bar.adj_shares,
            market_cap: bar.market_cap,
            monthly_return,
        });
    }
    rows
}

/// Full daily-to-monthly pipeline for many securities.
///
/// Output is ordered by `(security_id, month_end)`; securities are processed in
/// parallel but diagnostics are merged in security order.
pub fn build_monthly_equity(
    bars: Vec<DailyPriceBar>,
    calendar: &TradingCalendar,
    diag: &mut Diagnostics,
) -> Vec<MonthlyEquityRow> {
    let bars = dedup_bars(bars, diag);
    let mut by_security: BTreeMap<SecurityId, Vec<DailyPriceBar>> = BTreeMap::new();
    for bar in bars {
        by_security.entry(bar.security_id.clone()).or_default().push(bar);
    }
    let groups: Vec<(SecurityId, Vec<DailyPriceBar>)> = by_security.into_iter().collect();
    let results: Vec<(Vec<MonthlyEquityRow>, Diagnostics)> = groups
        .par_iter()
        .map(|(id, bars)| {
            let mut local = Diagnostics::with_message_limit(20);
            let adjusted = adjust_prices(bars, &mut local);
            let daily: Vec<(NaiveDate, f64)> =
                bars.iter().filter_map(|b| b.daily_return.map(|r| (b.date, r))).collect();
            let compounded = compound_monthly_returns(&daily, calendar, &mut local);
            (sample_month_end(id, &adjusted, &compounded, calendar), local)
        })
        .collect();
    let mut out = Vec::new();
    for (rows, local) in results {
        out.extend(rows);
        diag.merge(local);
    }
    out
}
