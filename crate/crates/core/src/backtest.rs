//! Monthly long-only backtest on the lookback-averaged signal.
//!
//! At each formation month `t` every security with a signal in all of the
//! last `L` calendar months gets its mean signal; those with a positive mean
//! are held with weights proportional to it, and the portfolio earns the
//! weighted returns of the next calendar month end.

use std::collections::BTreeMap;

use chrono::NaiveDate;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::prices::MonthlyEquityRow;
use crate::signal::SignalSeries;
use crate::types::{month_number, DiagnosticKind, Diagnostics, SecurityId};

/// Realized monthly returns keyed by month end, then security.
pub type ReturnPanel = BTreeMap<NaiveDate, BTreeMap<SecurityId, f64>>;

pub fn returns_by_month(equity: &[MonthlyEquityRow]) -> ReturnPanel {
    let mut out: ReturnPanel = BTreeMap::new();
    for row in equity {
        if let Some(r) = row.monthly_return {
            out.entry(row.month_end).or_default().insert(row.security_id.clone(), r);
        }
    }
    out
}

/// Selectable signals laid out densely by calendar month for fast window means.
#[derive(Debug, Clone, Default)]
pub struct SignalPanel {
    first_month: i32,
    /// `NaN` marks a month without a signal.
    series: BTreeMap<SecurityId, Vec<f64>>,
}

impl SignalPanel {
    pub fn from_map(signals: &BTreeMap<NaiveDate, BTreeMap<SecurityId, f64>>) -> Self {
        let (Some(first), Some(last)) = (signals.keys().next(), signals.keys().next_back()) else {
            return SignalPanel::default();
        };
        let first_month = month_number(*first);
        let len = (month_number(*last) - first_month + 1) as usize;
        let mut series: BTreeMap<SecurityId, Vec<f64>> = BTreeMap::new();
        for (month, row) in signals {
            let idx = (month_number(*month) - first_month) as usize;
            for (sec, b) in row {
                series.entry(sec.clone()).or_insert_with(|| vec![f64::NAN; len])[idx] = *b;
            }
        }
        SignalPanel { first_month, series }
    }

    pub fn from_series(signals: &SignalSeries) -> Self {
        Self::from_map(&signals.selectable())
    }

    pub fn is_empty(&self) -> bool {
        self.series.is_empty()
    }
}

/// Mean signal over the `lookback` calendar months ending at `t`.
///
/// Only securities with a signal in every month of the window are returned.
pub fn lookback_average(panel: &SignalPanel, lookback: usize, t: NaiveDate) -> BTreeMap<SecurityId, f64> {
    let mut out = BTreeMap::new();
    if lookback == 0 {
        return out;
    }
    let end = month_number(t) - panel.first_month;
    let start = end - lookback as i32 + 1;
    if start < 0 {
        return out;
    }
    let (start, end) = (start as usize, end as usize);
    for (sec, values) in &panel.series {
        if end >= values.len() {
            continue;
        }
        let window = &values[start..=end];
        if window.iter().any(|v| v.is_nan()) {
            continue;
        }
        let sum: f64 = window.iter().sum();
        out.insert(sec.clone(), sum / lookback as f64);
    }
    out
}

/// Positive-signal securities weighted by signal over the sum of signals.
pub fn select_and_weight(avg_signals: &BTreeMap<SecurityId, f64>) -> Vec<(SecurityId, f64)> {
    let chosen: Vec<(&SecurityId, f64)> =
        avg_signals.iter().filter(|(_, s)| **s > 0.0).map(|(id, s)| (id, *s)).collect();
    let total: f64 = chosen.iter().map(|(_, s)| s).sum();
    chosen.into_iter().map(|(id, s)| (id.clone(), s / total)).collect()
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct PortfolioSnapshot {
    /// Formation month.
    pub month_end: NaiveDate,
    /// Sorted by security id.
    pub holdings: Vec<(SecurityId, f64)>,
    pub lookback_used: usize,
}

/// `sum(w_i * r_i)`; held securities without a return contribute 0 and are listed.
pub fn portfolio_return(
    snapshot: &PortfolioSnapshot,
    next_returns: Option<&BTreeMap<SecurityId, f64>>,
) -> (f64, Vec<SecurityId>) {
    let mut total = 0.0;
    let mut missing = Vec::new();
    for (sec, w) in &snapshot.holdings {
        match next_returns.and_then(|r| r.get(sec)) {
            Some(r) => total += w * r,
            None => missing.push(sec.clone()),
        }
    }
    (total, missing)
}

/// Cumulative return `exp(sum log(1 + r)) - 1` at every step.
pub fn cumulative_returns(monthly: &[f64]) -> Result<Vec<f64>> {
    let mut acc = 0.0;
    monthly
        .iter()
        .enumerate()
        .map(|(i, r)| {
            if !(*r > -1.0) {
                return Err(Error::TotalLoss(i));
            }
            acc += r.ln_1p();
            Ok(acc.exp_m1())
        })
        .collect()
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum EmptyMonthPolicy {
    /// Uninvested months earn nothing.
    #[default]
    Zero,
    /// Uninvested months earn the risk-free rate.
    RiskFree,
}

impl std::str::FromStr for EmptyMonthPolicy {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "zero" => Ok(EmptyMonthPolicy::Zero),
            "risk_free" => Ok(EmptyMonthPolicy::RiskFree),
            other => Err(Error::Config(format!("unknown empty-month policy `{other}`"))),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BacktestConfig {
    pub lookback: usize,
    /// Inclusive range of realization months, matched by calendar month so any
    /// day inside a month selects it; `None` uses every month with a predecessor.
    pub period: Option<(NaiveDate, NaiveDate)>,
    pub empty_month: EmptyMonthPolicy,
}

/// One realized month of the strategy.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct MonthlyReturn {
    /// Month the return is earned in.
    pub month_end: NaiveDate,
    /// Month the portfolio was formed at.
    pub formation_month: NaiveDate,
    pub portfolio_return: f64,
    pub cumulative_return: f64,
    pub n_holdings: usize,
    pub n_missing_returns: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct BacktestResult {
    pub lookback: usize,
    pub period: (NaiveDate, NaiveDate),
    pub empty_month: EmptyMonthPolicy,
    pub months: Vec<MonthlyReturn>,
    /// One per realized month, indexed like `months`.
    pub snapshots: Vec<PortfolioSnapshot>,
    pub missing_returns: usize,
    pub empty_months: usize,
}

impl BacktestResult {
    pub fn returns(&self) -> Vec<f64> {
        self.months.iter().map(|m| m.portfolio_return).collect()
    }

    pub fn dated_returns(&self) -> Vec<(NaiveDate, f64)> {
        self.months.iter().map(|m| (m.month_end, m.portfolio_return)).collect()
    }

    /// Portfolio return minus the monthly risk-free rate; every month needs a rate.
    pub fn excess_returns(&self, rf: &BTreeMap<NaiveDate, f64>) -> Result<Vec<f64>> {
        self.months
            .iter()
            .map(|m| {
                rf.get(&m.month_end).map(|r| m.portfolio_return - r).ok_or_else(|| Error::Coverage {
                    start: m.month_end,
                    end: m.month_end,
                    detail: "no risk-free rate for this month".into(),
                })
            })
            .collect()
    }
}

/// Realization months inside `period`, each paired with its formation month.
pub fn realization_months(
    month_ends: &[NaiveDate],
    period: Option<(NaiveDate, NaiveDate)>,
) -> Result<Vec<(NaiveDate, NaiveDate)>> {
    if month_ends.len() < 2 {
        return Err(Error::Coverage {
            start: month_ends.first().copied().unwrap_or_default(),
            end: month_ends.last().copied().unwrap_or_default(),
            detail: "need at least two month ends".into(),
        });
    }
    let (first, last) = (month_ends[1], *month_ends.last().expect("non-empty"));
    let (start, end) = period.unwrap_or((first, last));
    if start > end {
        return Err(Error::Coverage { start, end, detail: "period start is after its end".into() });
    }
    if month_number(start) < month_number(first) || month_number(end) > month_number(last) {
        return Err(Error::Coverage {
            start,
            end,
            detail: format!("data supports realization months {first} to {last}"),
        });
    }
    let pairs: Vec<(NaiveDate, NaiveDate)> = month_ends
        .windows(2)
        .filter(|w| (month_number(start)..=month_number(end)).contains(&month_number(w[1])))
        .map(|w| (w[1], w[0]))
        .collect();
    if pairs.is_empty() {
        return Err(Error::Coverage { start, end, detail: "no month ends inside the period".into() });
    }
    Ok(pairs)
}

/// Form at each month end, earn at the next one, for every realization month in the period.
pub fn run_backtest(
    signals: &SignalPanel,
    returns: &ReturnPanel,
    month_ends: &[NaiveDate],
    risk_free: &BTreeMap<NaiveDate, f64>,
    config: &BacktestConfig,
    diag: &mut Diagnostics,
) -> Result<BacktestResult> {
    if config.lookback == 0 {
        return Err(Error::Config("lookback must be at least 1".into()));
    }
    let pairs = realization_months(month_ends, config.period)?;
    let mut months = Vec::with_capacity(pairs.len());
    let mut snapshots = Vec::with_capacity(pairs.len());
    let mut missing_total = 0;
    let mut empty_months = 0;
    for &(realized, formed) in &pairs {
        let avg = lookback_average(signals, config.lookback, formed);
        let snapshot =
            PortfolioSnapshot { month_end: formed, holdings: select_and_weight(&avg), lookback_used: config.lookback };
        let (mut ret, missing) = portfolio_return(&snapshot, returns.get(&realized));
        for sec in &missing {
            diag.push(
                DiagnosticKind::MissingNextReturn,
                format!("{sec}: held at {formed} with no return for {realized}"),
            );
        }
        if snapshot.holdings.is_empty() {
            empty_months += 1;
            diag.push(DiagnosticKind::EmptyPortfolio, format!("{formed}: no positive signals"));
            if config.empty_month == EmptyMonthPolicy::RiskFree {
                ret = match risk_free.get(&realized) {
                    Some(r) => *r,
                    None => {
                        diag.push(DiagnosticKind::MissingRiskFree, format!("{realized}: no risk-free rate"));
                        0.0
                    }
                };
            }
        }
        missing_total += missing.len();
        months.push(MonthlyReturn {
            month_end: realized,
            formation_month: formed,
            portfolio_return: ret,
            cumulative_return: 0.0,
            n_holdings: snapshot.holdings.len(),
            n_missing_returns: missing.len(),
        });
        snapshots.push(snapshot);
    }
    let rets: Vec<f64> = months.iter().map(|m| m.portfolio_return).collect();
    for (m, c) in months.iter_mut().zip(cumulative_returns(&rets)?) {
        m.cumulative_return = c;
    }
    Ok(BacktestResult {
        lookback: config.lookback,
        period: (pairs[0].0, pairs[pairs.len() - 1].0),
        empty_month: config.empty_month,
        months,
        snapshots,
        missing_returns: missing_total,
        empty_months,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn d(s: &str) -> NaiveDate {
        NaiveDate::parse_from_str(s, "%Y-%m-%d").unwrap()
    }

    fn sid(s: &str) -> SecurityId {
        SecurityId::new(s)
    }

    fn months3() -> Vec<NaiveDate> {
        vec![d("2020-01-31"), d("2020-02-28"), d("2020-03-31")]
    }

    fn panel(entries: &[(&str, &str, f64)]) -> SignalPanel {
        let mut m: BTreeMap<NaiveDate, BTreeMap<SecurityId, f64>> = BTreeMap::new();
        for (month, sec, b) in entries {
            m.entry(d(month)).or_default().insert(sid(sec), *b);
        }
        SignalPanel::from_map(&m)
    }

    #[test]
    fn lookback_mean_and_coverage() {
        let p = panel(&[
            ("2020-01-31", "A", 0.1),
            ("2020-02-29", "A", 0.2),
            ("2020-03-31", "A", 0.3),
            ("2020-01-31", "B", 0.1),
            ("2020-03-31", "B", 0.3),
        ]);
        let avg = lookback_average(&p, 3, d("2020-03-31"));
        assert!((avg[&sid("A")] - 0.2).abs() < 1e-15);
        assert!(!avg.contains_key(&sid("B")));
        let one = lookback_average(&p, 1, d("2020-03-31"));
        assert_eq!(one[&sid("B")], 0.3);
        assert!(lookback_average(&p, 4, d("2020-03-31")).is_empty());
    }

    #[test]
    fn weights_examples() {
        let avg: BTreeMap<SecurityId, f64> = [(sid("A"), 2.0), (sid("B"), 3.0), (sid("C"), 5.0)].into();
        let w = select_and_weight(&avg);
        assert_eq!(w, vec![(sid("A"), 0.2), (sid("B"), 0.3), (sid("C"), 0.5)]);
        let avg: BTreeMap<SecurityId, f64> = [(sid("A"), 1.0), (sid("B"), -1.0)].into();
        assert_eq!(select_and_weight(&avg), vec![(sid("A"), 1.0)]);
        let avg: BTreeMap<SecurityId, f64> = [(sid("A"), -1.0), (sid("B"), 0.0)].into();
        assert!(select_and_weight(&avg).is_empty());
    }

    #[test]
    fn portfolio_return_examples() {
        let snap = PortfolioSnapshot {
            month_end: d("2020-01-31"),
            holdings: vec![(sid("A"), 0.5), (sid("B"), 0.5)],
            lookback_used: 1,
        };
        let r: BTreeMap<SecurityId, f64> = [(sid("A"), 0.10), (sid("B"), -0.02)].into();
        assert!((portfolio_return(&snap, Some(&r)).0 - 0.04).abs() < 1e-15);
        let partial: BTreeMap<SecurityId, f64> = [(sid("A"), 0.10)].into();
        let (ret, missing) = portfolio_return(&snap, Some(&partial));
        assert!((ret - 0.05).abs() < 1e-15);
        assert_eq!(missing, vec![sid("B")]);
        let empty = PortfolioSnapshot { holdings: vec![], ..snap };
        assert_eq!(portfolio_return(&empty, Some(&r)).0, 0.0);
    }

    #[test]
    fn cumulative_examples() {
        let c = cumulative_returns(&[0.1, -0.1]).unwrap();
        assert!((c[0] - 0.1).abs() < 1e-15);
        assert!((c[1] + 0.01).abs() < 1e-15);
        assert_eq!(cumulative_returns(&[0.0; 4]).unwrap(), vec![0.0; 4]);
        assert!(matches!(cumulative_returns(&[0.1, -1.0]), Err(Error::TotalLoss(1))));
    }

    #[test]
    fn single_firm_tracks_its_return() {
        let p = panel(&[("2020-01-31", "A", 0.3), ("2020-02-29", "A", 0.1), ("2020-03-31", "A", 0.2)]);
        let mut returns = ReturnPanel::new();
        returns.entry(d("2020-02-28")).or_default().insert(sid("A"), 0.05);
        returns.entry(d("2020-03-31")).or_default().insert(sid("A"), -0.03);
        let cfg = BacktestConfig { lookback: 1, period: None, empty_month: EmptyMonthPolicy::Zero };
        let mut diag = Diagnostics::new();
        let res = run_backtest(&p, &returns, &months3(), &BTreeMap::new(), &cfg, &mut diag).unwrap();
        assert_eq!(res.returns(), vec![0.05, -0.03]);
        assert_eq!(res.snapshots[0].month_end, d("2020-01-31"));
        assert_eq!(res.months[0].month_end, d("2020-02-28"));
        assert!((res.months[1].cumulative_return - (1.05 * 0.97 - 1.0)).abs() < 1e-15);
    }

    #[test]
    fn missing_return_is_logged_not_renormalized() {
        let p = panel(&[("2020-01-31", "A", 1.0), ("2020-01-31", "B", 1.0)]);
        let mut returns = ReturnPanel::new();
        returns.entry(d("2020-02-28")).or_default().insert(sid("A"), 0.10);
        let cfg = BacktestConfig {
            lookback: 1,
            period: Some((d("2020-02-01"), d("2020-02-28"))),
            empty_month: EmptyMonthPolicy::Zero,
        };
        let mut diag = Diagnostics::new();
        let res = run_backtest(&p, &returns, &months3(), &BTreeMap::new(), &cfg, &mut diag).unwrap();
        assert!((res.months[0].portfolio_return - 0.05).abs() < 1e-15);
        assert_eq!(res.missing_returns, 1);
        assert_eq!(diag.count(DiagnosticKind::MissingNextReturn), 1);
    }

    #[test]
    fn empty_month_policy() {
        let p = panel(&[("2020-01-31", "A", -1.0)]);
        let rf: BTreeMap<NaiveDate, f64> = [(d("2020-02-28"), 0.001), (d("2020-03-31"), 0.002)].into();
        let mut cfg = BacktestConfig { lookback: 1, period: None, empty_month: EmptyMonthPolicy::Zero };
        let mut diag = Diagnostics::new();
        let res = run_backtest(&p, &ReturnPanel::new(), &months3(), &rf, &cfg, &mut diag).unwrap();
        assert_eq!(res.returns(), vec![0.0, 0.0]);
        assert_eq!(res.empty_months, 2);
        cfg.empty_month = EmptyMonthPolicy::RiskFree;
        let res = run_backtest(&p, &ReturnPanel::new(), &months3(), &rf, &cfg, &mut diag).unwrap();
        assert_eq!(res.returns(), vec![0.001, 0.002]);
    }

    #[test]
    fn period_outside_coverage_is_an_error() {
        assert!(realization_months(&months3(), Some((d("2020-01-01"), d("2020-03-31")))).is_err());
        assert!(realization_months(&months3(), Some((d("2020-02-01"), d("2020-04-30")))).is_err());
        let ok = realization_months(&months3(), Some((d("2020-03-01"), d("2020-03-31")))).unwrap();
        assert_eq!(ok, vec![(d("2020-03-31"), d("2020-02-28"))]);
    }

    #[test]
    fn period_bounds_select_whole_months() {
        let months = vec![d("2020-01-31"), d("2020-02-27"), d("2020-03-30")];
        let got = realization_months(&months, Some((d("2020-02-28"), d("2020-03-15")))).unwrap();
        assert_eq!(got, vec![(d("2020-02-27"), d("2020-01-31")), (d("2020-03-30"), d("2020-02-27"))]);
    }

    proptest! {
        #[test]
        fn selection_is_scale_invariant(
            signals in prop::collection::vec(-1.0f64..1.0, 1..30),
            c in 1e-3f64..1e3,
        ) {
            let a: BTreeMap<SecurityId, f64> =
                signals.iter().enumerate().map(|(i, s)| (SecurityId::new(format!("{i:03}")), *s)).collect();
            let b: BTreeMap<SecurityId, f64> = a.iter().map(|(k, v)| (k.clone(), v * c)).collect();
            let wa = select_and_weight(&a);
            let wb = select_and_weight(&b);
            prop_assert_eq!(wa.len(), wb.len());
            for ((ia, xa), (ib, xb)) in wa.iter().zip(&wb) {
                prop_assert_eq!(ia, ib);
                prop_assert!((xa - xb).abs() <= 1e-12);
            }
            if !wa.is_empty() {
                let total: f64 = wa.iter().map(|(_, w)| w).sum();
                prop_assert!((total - 1.0).abs() <= 1e-12);
                prop_assert!(wa.iter().all(|(_, w)| *w > 0.0));
            }
        }

        #[test]
        fn cumulative_round_trips_monthly(rets in prop::collection::vec(-0.5f64..0.5, 1..120)) {
            let cum = cumulative_returns(&rets).unwrap();
            let mut prev = 0.0;
            for (r, c) in rets.iter().zip(&cum) {
                let back = (1.0 + c) / (1.0 + prev) - 1.0;
                prop_assert!((back - r).abs() <= 1e-10);
                prev = *c;
            }
        }
    }
}
