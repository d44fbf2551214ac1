//! Merge forward-filled fundamentals with monthly equity data into the
//! regression-ready firm-month panel.
//!
//! Every change is filing over filing (the current forward-filled filing
//! minus the filing it superseded) and is scaled by the lagged market cap.

use std::collections::BTreeMap;

use chrono::NaiveDate;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::fundamentals::{MonthlyFundamentals, QuarterlyFiling};
use crate::prices::MonthlyEquityRow;
use crate::types::{is_next_month, DiagnosticKind, Diagnostics, FirmId, SecurityId};
use crate::universe::Universe;

pub const N_REGRESSORS: usize = 11;

/// Column names of the eleven regressors, in order.
pub const REGRESSOR_NAMES: [&str; N_REGRESSORS] = [
    "d_cash",
    "d_earnings",
    "d_noncash_assets",
    "d_rnd",
    "d_interest",
    "d_dividends",
    "lag_cash",
    "leverage",
    "d_debt_plus_cap",
    "d_cash_x_size",
    "d_cash_x_leverage",
];

/// Index of the lagged cash-to-market-cap regressor.
pub const LAG_CASH: usize = 6;
/// Index of the leverage regressor.
pub const LEVERAGE: usize = 7;

/// Filing values after missing-data treatment.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FilingValues {
    pub report_date: NaiveDate,
    pub total_assets: f64,
    pub cash_holdings: f64,
    pub total_debt: f64,
    pub earnings: f64,
    pub rnd_expense: f64,
    pub interest_expense: f64,
    pub dividends_paid: f64,
}

impl FilingValues {
    /// Cash, total assets and earnings are required; debt, R&D, interest and
    /// dividends are imputed as zero when missing.
    pub fn from_filing(f: &QuarterlyFiling, diag: &mut Diagnostics) -> Option<Self> {
        let (Some(total_assets), Some(cash_holdings), Some(earnings)) = (f.total_assets, f.cash_holdings, f.earnings)
        else {
            diag.push(
                DiagnosticKind::MissingCriticalField,
                format!("{} filing {}: missing cash, assets or earnings", f.firm_id, f.report_date),
            );
            return None;
        };
        let mut impute = |v: Option<f64>, field: &str| {
            v.unwrap_or_else(|| {
                diag.push(
                    DiagnosticKind::ImputedZero,
                    format!("{} filing {}: {field} imputed 0", f.firm_id, f.report_date),
                );
                0.0
            })
        };
        Some(FilingValues {
            report_date: f.report_date,
            total_assets,
            cash_holdings,
            total_debt: impute(f.total_debt, "total_debt"),
            earnings,
            rnd_expense: impute(f.rnd_expense, "rnd_expense"),
            interest_expense: impute(f.interest_expense, "interest_expense"),
            dividends_paid: impute(f.dividends_paid, "dividends_paid"),
        })
    }
}

/// One firm-month of the merged point-in-time panel.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FirmMonthRow {
    pub firm_id: FirmId,
    pub security_id: SecurityId,
    pub month_end: NaiveDate,
    pub monthly_return: f64,
    pub risk_free: f64,
    pub excess_return: f64,
    pub market_cap: f64,
    pub lagged_market_cap: f64,
    pub fundamentals: FilingValues,
    pub lagged_fundamentals: FilingValues,
    pub regressors: [f64; N_REGRESSORS],
}

impl FirmMonthRow {
    pub fn leverage(&self) -> f64 {
        self.regressors[LEVERAGE]
    }

    pub fn lag_cash_ratio(&self) -> f64 {
        self.regressors[LAG_CASH]
    }
}

/// `TotalDebt / (TotalDebt + M)`; `None` when the denominator is not positive.
pub fn leverage(total_debt: f64, market_cap: f64) -> Option<f64> {
    let denom = total_debt + market_cap;
    (denom > 0.0).then(|| total_debt / denom)
}

/// Growth of debt plus market value between the two filings.
///
/// Numerator reads the change as `(D_t + M_t) - (D_{t-1} + M_{t-1})`; the
/// denominator is `D_{t-1} + M_{t-1}`. The alternative reading holds `M_{t-1}`
/// fixed inside the change, which reduces the numerator to `D_t - D_{t-1}`.
pub fn debt_plus_cap_growth(debt_now: f64, cap_now: f64, debt_prev: f64, cap_prev: f64) -> Option<f64> {
    let base = debt_prev + cap_prev;
    (base > 0.0).then(|| ((debt_now + cap_now) - base) / base)
}

/// Compute the eleven scaled regressors.
pub fn compute_regressors(
    current: &FilingValues,
    previous: &FilingValues,
    cap_now: f64,
    cap_prev: f64,
) -> Result<[f64; N_REGRESSORS], DiagnosticKind> {
    if !(cap_prev > 0.0) {
        return Err(DiagnosticKind::NonPositiveLaggedCap);
    }
    if !(cap_now > 0.0) {
        return Err(DiagnosticKind::DegenerateDenominator);
    }
    let d_cash = current.cash_holdings - previous.cash_holdings;
    let d_earnings = current.earnings - previous.earnings;
    let d_noncash = (current.total_assets - current.cash_holdings) - (previous.total_assets - previous.cash_holdings);
    let d_rnd = current.rnd_expense - previous.rnd_expense;
    let d_interest = current.interest_expense - previous.interest_expense;
    let d_dividends = current.dividends_paid - previous.dividends_paid;
    let lev = leverage(current.total_debt, cap_now).ok_or(DiagnosticKind::DegenerateDenominator)?;
    let growth = debt_plus_cap_growth(current.total_debt, cap_now, previous.total_debt, cap_prev)
        .ok_or(DiagnosticKind::DegenerateDenominator)?;
    let x = [
        d_cash / cap_prev,
        d_earnings / cap_prev,
        d_noncash / cap_prev,
        d_rnd / cap_prev,
        d_interest / cap_prev,
        d_dividends / cap_prev,
        previous.cash_holdings / cap_prev,
        lev,
        growth,
        cap_prev * d_cash / (cap_now * cap_now),
        lev * d_cash / cap_now,
    ];
    if x.iter().all(|v| v.is_finite()) {
        Ok(x)
    } else {
        Err(DiagnosticKind::NonFiniteRegressor)
    }
}

type EquityIndex<'a> = BTreeMap<&'a SecurityId, BTreeMap<NaiveDate, &'a MonthlyEquityRow>>;

fn panel_row(
    m: &MonthlyFundamentals,
    security: &SecurityId,
    equity: &EquityIndex<'_>,
    risk_free: &BTreeMap<NaiveDate, f64>,
    diag: &mut Diagnostics,
) -> Option<FirmMonthRow> {
    let previous = m.previous.as_ref()?;
    let series = equity.get(security)?;
    let now = series.get(&m.month_end)?;
    let Some(monthly_return) = now.monthly_return else {
        diag.push(DiagnosticKind::MissingPrice, format!("{security} {}: no monthly return", m.month_end));
        return None;
    };
    let lagged =
        series.range(..m.month_end).next_back().map(|(_, r)| *r).filter(|r| is_next_month(r.month_end, m.month_end));
    let Some(lagged) = lagged else {
        diag.push(
            DiagnosticKind::MissingLaggedEquity,
            format!("{security} {}: no prior-month market cap", m.month_end),
        );
        return None;
    };
    let Some(&rf) = risk_free.get(&m.month_end) else {
        diag.push(DiagnosticKind::MissingRiskFree, format!("{}: no risk-free rate", m.month_end));
        return None;
    };
    let current = FilingValues::from_filing(&m.current.filing, diag)?;
    let prev = FilingValues::from_filing(&previous.filing, diag)?;
    match compute_regressors(&current, &prev, now.market_cap, lagged.market_cap) {
        Ok(regressors) => Some(FirmMonthRow {
            firm_id: m.firm_id.clone(),
            security_id: security.clone(),
            month_end: m.month_end,
            monthly_return,
            risk_free: rf,
            excess_return: monthly_return - rf,
            market_cap: now.market_cap,
            lagged_market_cap: lagged.market_cap,
            fundamentals: current,
            lagged_fundamentals: prev,
            regressors,
        }),
        Err(kind) => {
            diag.push(kind, format!("{} / {security} {}: row excluded", m.firm_id, m.month_end));
            None
        }
    }
}

/// Assemble the panel. Output is ordered by `(firm_id, month_end, security_id)`.
///
/// Only universe links active at the month end are used. `risk_free` holds
/// the compounded monthly risk-free rate per month end.
pub fn build_panel(
    fundamentals: &[MonthlyFundamentals],
    equity: &[MonthlyEquityRow],
    risk_free: &BTreeMap<NaiveDate, f64>,
    universe: &Universe,
    diag: &mut Diagnostics,
) -> Vec<FirmMonthRow> {
    let mut index: EquityIndex<'_> = BTreeMap::new();
    for row in equity {
        index.entry(&row.security_id).or_default().insert(row.month_end, row);
    }
    let links = universe.links_by_firm();

    let mut by_firm: BTreeMap<&FirmId, Vec<&MonthlyFundamentals>> = BTreeMap::new();
    for m in fundamentals {
        if links.contains_key(&m.firm_id) {
            by_firm.entry(&m.firm_id).or_default().push(m);
        }
    }
    let groups: Vec<(&FirmId, Vec<&MonthlyFundamentals>)> = by_firm.into_iter().collect();

    let results: Vec<(Vec<FirmMonthRow>, Diagnostics)> = groups
        .par_iter()
        .map(|(firm, months)| {
            let mut local = Diagnostics::with_message_limit(20);
            let firm_links = &links[*firm];
            let mut rows = Vec::new();
            for m in months {
                let mut securities: Vec<&SecurityId> =
                    firm_links.iter().filter(|l| l.is_active(m.month_end)).map(|l| &l.security_id).collect();
                securities.sort();
                securities.dedup();
                for s in securities {
                    if let Some(row) = panel_row(m, s, &index, risk_free, &mut local) {
                        rows.push(row);
                    }
                }
            }
            rows.sort_by(|a, b| (a.month_end, &a.security_id).cmp(&(b.month_end, &b.security_id)));
            (rows, local)
        })
        .collect();

    let mut out = Vec::new();
    for (rows, local) in results {
        out.extend(rows);
        diag.merge(local);
    }
    out
}
