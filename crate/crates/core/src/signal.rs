//! Cash-return signal.
//!
//! Each month a pooled regression of excess returns on the eleven panel
//! regressors is fitted on rows dated on or before that month. Its intercept,
//! lagged-cash and leverage coefficients give the marginal value of a unit of
//! cash for each firm; multiplied by current cash this is the average cash
//! value, and the monthly percentage change of that value is the raw signal.
//! The raw signal is winsorized cross-sectionally each month.

use std::collections::BTreeMap;

use chrono::NaiveDate;
use nalgebra::{DMatrix, DVector};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::ols::{fit_ols, DesignMatrix, RegressionFit, INTERCEPT};
use crate::panel::{FirmMonthRow, LAG_CASH, LEVERAGE, N_REGRESSORS, REGRESSOR_NAMES};
use crate::types::{is_next_month, months_between, DiagnosticKind, Diagnostics, FirmId, SecurityId};

/// Rows used for each monthly fit.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum FitWindow {
    /// Every row dated on or before the as-of month.
    Expanding,
    /// Rows from the trailing `n` calendar months, as-of month included.
    Rolling(u32),
}

impl std::str::FromStr for FitWindow {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        let s = s.trim();
        if s == "expanding" {
            return Ok(FitWindow::Expanding);
        }
        let inner = s.strip_prefix("rolling(").and_then(|r| r.strip_suffix(')')).or_else(|| s.strip_prefix("rolling:"));
        match inner.map(|v| v.trim().parse::<u32>()) {
            Some(Ok(n)) if n > 0 => Ok(FitWindow::Rolling(n)),
            _ => Err(Error::Config(format!("bad signal window `{s}`"))),
        }
    }
}

impl std::fmt::Display for FitWindow {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            FitWindow::Expanding => f.write_str("expanding"),
            FitWindow::Rolling(n) => write!(f, "rolling({n})"),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SignalConfig {
    pub window: FitWindow,
    pub min_obs: usize,
    /// Lower and upper winsorization percentiles, in `[0, 100]`.
    pub winsor: (f64, f64),
    pub allow_negative_acv_base: bool,
    /// Refit every this many panel months (1 = monthly).
    pub refit_every: usize,
}

impl Default for SignalConfig {
    fn default() -> Self {
        SignalConfig {
            window: FitWindow::Expanding,
            min_obs: 60,
            winsor: (1.0, 99.0),
            allow_negative_acv_base: false,
            refit_every: 1,
        }
    }
}

/// A fitted cash-value regression together with the regressors it dropped.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct FwFit {
    pub as_of: NaiveDate,
    pub fit: RegressionFit,
    /// Regressors that were constant in the window; their coefficient is taken as 0.
    pub dropped: Vec<String>,
}

impl FwFit {
    /// Coefficient by name, 0 for dropped regressors.
    pub fn gamma(&self, name: &str) -> f64 {
        self.fit.coefficient(name).unwrap_or(0.0)
    }

    pub fn alpha(&self) -> f64 {
        self.gamma(INTERCEPT)
    }
}

fn in_window(row_month: NaiveDate, as_of: NaiveDate, window: FitWindow) -> bool {
    if row_month > as_of {
        return false;
    }
    match window {
        FitWindow::Expanding => true,
        FitWindow::Rolling(n) => months_between(row_month, as_of) < n as i32,
    }
}

/// Pooled OLS of excess return on the regressors using rows dated `<= as_of`.
pub fn fit_fw_regression(panel: &[FirmMonthRow], as_of: NaiveDate, config: &SignalConfig) -> Result<FwFit> {
    let rows: Vec<&FirmMonthRow> = panel.iter().filter(|r| in_window(r.month_end, as_of, config.window)).collect();
    fit_rows(&rows, as_of, config.min_obs)
}

fn fit_rows(rows: &[&FirmMonthRow], as_of: NaiveDate, min_obs: usize) -> Result<FwFit> {
    if rows.len() < min_obs.max(1) {
        return Err(Error::InsufficientObservations { as_of, have: rows.len(), need: min_obs });
    }
    let mut kept: Vec<usize> = Vec::with_capacity(N_REGRESSORS);
    let mut dropped = Vec::new();
    for (j, name) in REGRESSOR_NAMES.iter().enumerate() {
        let first = rows[0].regressors[j];
        if rows.iter().all(|r| r.regressors[j] == first) {
            dropped.push(name.to_string());
        } else {
            kept.push(j);
        }
    }
    let n = rows.len();
    let k = kept.len() + 1;
    if n < k + 1 {
        return Err(Error::InsufficientObservations { as_of, have: n, need: k + 1 });
    }
    let values = DMatrix::from_fn(n, k, |i, c| if c == 0 { 1.0 } else { rows[i].regressors[kept[c - 1]] });
    let response = DVector::from_iterator(n, rows.iter().map(|r| r.excess_return));
    let mut names = vec![INTERCEPT.to_string()];
    names.extend(kept.iter().map(|j| REGRESSOR_NAMES[*j].to_string()));
    let design = DesignMatrix::new(names, values, response)?;
    let fit = fit_ols(&design)?;
    Ok(FwFit { as_of, fit, dropped })
}

/// `alpha + gamma_lag_cash * lag_cash + gamma_leverage * leverage`.
///
/// Uses the lagged cash ratio and current leverage; swapping in another
/// timing convention only touches this function.
pub fn marginal_cash_value(fit: &FwFit, row: &FirmMonthRow) -> f64 {
    fit.alpha()
        + fit.gamma(REGRESSOR_NAMES[LAG_CASH]) * row.regressors[LAG_CASH]
        + fit.gamma(REGRESSOR_NAMES[LEVERAGE]) * row.regressors[LEVERAGE]
}

pub fn average_cash_value(marginal: f64, cash_holdings: f64) -> f64 {
    marginal * cash_holdings
}

/// Cash return for one month, with flags describing its base.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CashReturn {
    pub month_end: NaiveDate,
    pub value: f64,
    pub negative_base: bool,
}

/// Relative threshold below which a previous average cash value is treated as zero.
pub const ACV_EPS_RELATIVE: f64 = 1e-9;
/// Absolute floor for that threshold.
pub const ACV_EPS_FLOOR: f64 = 1e-12;

fn median(values: &mut [f64]) -> f64 {
    values.sort_by(f64::total_cmp);
    let n = values.len();
    if n % 2 == 1 {
        values[n / 2]
    } else {
        0.5 * (values[n / 2 - 1] + values[n / 2])
    }
}

/// Percentage change of average cash value between consecutive calendar months.
///
/// `series` holds one firm's `(month_end, acv)` pairs in date order. The
/// near-zero threshold uses the median of `|acv|` over months up to and
/// including the current one, so no later value influences an earlier return.
/// Returns the computed values and the months skipped for a near-zero base.
pub fn cash_return(series: &[(NaiveDate, f64)]) -> (Vec<CashReturn>, Vec<NaiveDate>) {
    let mut out = Vec::new();
    let mut skipped = Vec::new();
    let mut seen: Vec<f64> = Vec::with_capacity(series.len());
    for (i, &(month, acv)) in series.iter().enumerate() {
        seen.push(acv.abs());
        if i == 0 {
            continue;
        }
        let (prev_month, prev) = series[i - 1];
        if !is_next_month(prev_month, month) {
            continue;
        }
        let eps = (ACV_EPS_RELATIVE * median(&mut seen.clone())).max(ACV_EPS_FLOOR);
        if !(prev.abs() >= eps) {
            skipped.push(month);
            continue;
        }
        out.push(CashReturn { month_end: month, value: (acv - prev) / prev, negative_base: prev < 0.0 });
    }
    (out, skipped)
}

/// Linear-interpolation percentile of sorted data, `p` in `[0, 100]`.
pub fn percentile_linear(sorted: &[f64], p: f64) -> f64 {
    let n = sorted.len();
    let h = p / 100.0 * (n - 1) as f64;
    let lo = h.floor() as usize;
    let hi = (lo + 1).min(n - 1);
    sorted[lo] + (h - lo as f64) * (sorted[hi] - sorted[lo])
}

/// Clamp values to the `[p_low, p_high]` percentile bounds; also returns the bounds.
pub fn winsorize_with_bounds(values: &[f64], p_low: f64, p_high: f64) -> Result<(Vec<f64>, f64, f64)> {
    if values.is_empty() {
        return Err(Error::InvalidInput("winsorize: empty input".into()));
    }
    if !(0.0 <= p_low && p_low < p_high && p_high <= 100.0) {
        return Err(Error::InvalidInput(format!("winsorize: need 0 <= low < high <= 100, got ({p_low}, {p_high})")));
    }
    if values.iter().any(|v| !v.is_finite()) {
        return Err(Error::InvalidInput("winsorize: non-finite value".into()));
    }
    let mut sorted = values.to_vec();
    sorted.sort_by(f64::total_cmp);
    let lo = percentile_linear(&sorted, p_low);
    let hi = percentile_linear(&sorted, p_high);
    Ok((clamp_to_bounds(values, lo, hi), lo, hi))
}

/// Clamp every value into `[lo, hi]`.
pub fn clamp_to_bounds(values: &[f64], lo: f64, hi: f64) -> Vec<f64> {
    values.iter().map(|v| v.clamp(lo, hi)).collect()
}

pub fn winsorize(values: &[f64], p_low: f64, p_high: f64) -> Result<Vec<f64>> {
    winsorize_with_bounds(values, p_low, p_high).map(|(v, _, _)| v)
}

/// One firm-security-month of the signal.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SignalRow {
    pub firm_id: FirmId,
    pub security_id: SecurityId,
    pub month_end: NaiveDate,
    pub marginal_cash_value: f64,
    pub average_cash_value: f64,
    pub b_raw: Option<f64>,
    pub b_winsorized: Option<f64>,
    pub negative_acv_base: bool,
    pub small_acv_base: bool,
    /// As-of month of the fit that produced this row.
    pub fit_id: NaiveDate,
}

impl SignalRow {
    pub fn flags(&self) -> String {
        let mut f = Vec::new();
        if self.negative_acv_base {
            f.push("negative_acv_base");
        }
        if self.small_acv_base {
            f.push("small_acv_base");
        }
        f.join("|")
    }
}

/// Summary of one monthly fit, kept for reporting.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct FitSummary {
    pub as_of: NaiveDate,
    pub n_obs: usize,
    pub r_squared: f64,
    pub names: Vec<String>,
    pub coefficients: Vec<f64>,
    pub dropped: Vec<String>,
}

#[derive(Debug, Clone, Serialize)]
pub struct SignalSeries {
    /// Ordered by `(month_end, firm_id, security_id)`.
    pub rows: Vec<SignalRow>,
    pub fits: Vec<FitSummary>,
    pub allow_negative_acv_base: bool,
}

impl SignalSeries {
    /// Winsorized signals usable for portfolio selection, by month.
    ///
    /// Rows with a negative base carry no winsorized value unless they are allowed.
    pub fn selectable(&self) -> BTreeMap<NaiveDate, BTreeMap<SecurityId, f64>> {
        let mut out: BTreeMap<NaiveDate, BTreeMap<SecurityId, f64>> = BTreeMap::new();
        for r in &self.rows {
            let Some(b) = r.b_winsorized else { continue };
            if r.negative_acv_base && !self.allow_negative_acv_base {
                continue;
            }
            out.entry(r.month_end).or_default().insert(r.security_id.clone(), b);
        }
        out
    }

    pub fn months(&self) -> Vec<NaiveDate> {
        let mut m: Vec<NaiveDate> = self.rows.iter().map(|r| r.month_end).collect();
        m.dedup();
        m
    }
}

/// Fit, evaluate and winsorize the signal for every panel month.
pub fn compute_signal_series(
    panel: &[FirmMonthRow],
    config: &SignalConfig,
    diag: &mut Diagnostics,
) -> Result<SignalSeries> {
    if config.refit_every == 0 {
        return Err(Error::Config("signal.refit_every must be at least 1".into()));
    }
    let mut by_month: BTreeMap<NaiveDate, Vec<&FirmMonthRow>> = BTreeMap::new();
    for row in panel {
        by_month.entry(row.month_end).or_default().push(row);
    }
    let months: Vec<NaiveDate> = by_month.keys().copied().collect();
    let fit_months: Vec<NaiveDate> = months.iter().step_by(config.refit_every).copied().collect();

    let fit_results: Vec<(NaiveDate, Result<FwFit>)> = fit_months
        .par_iter()
        .map(|&as_of| {
            let rows: Vec<&FirmMonthRow> = by_month
                .range(..=as_of)
                .filter(|(m, _)| in_window(**m, as_of, config.window))
                .flat_map(|(_, rows)| rows.iter().copied())
                .collect();
            let fit = fit_rows(&rows, as_of, config.min_obs).map(|mut f| {
                f.fit.residuals = Vec::new();
                f
            });
            (as_of, fit)
        })
        .collect();

    let mut fits: BTreeMap<NaiveDate, FwFit> = BTreeMap::new();
    let mut summaries = Vec::new();
    for (as_of, res) in fit_results {
        match res {
            Ok(f) => {
                if !f.dropped.is_empty() {
                    diag.push(
                        DiagnosticKind::ZeroVarianceRegressor,
                        format!("{as_of}: dropped constant regressors {}", f.dropped.join(", ")),
                    );
                }
                summaries.push(FitSummary {
                    as_of,
                    n_obs: f.fit.n_obs,
                    r_squared: f.fit.r_squared,
                    names: f.fit.names.clone(),
                    coefficients: f.fit.coefficients.clone(),
                    dropped: f.dropped.clone(),
                });
                fits.insert(as_of, f);
            }
            Err(e @ Error::InsufficientObservations { .. }) => {
                diag.push(DiagnosticKind::NoFit, e.to_string());
            }
            Err(e @ Error::SingularFit { .. }) => {
                log::warn!("{as_of}: {e}; keeping the previous fit");
                diag.push(DiagnosticKind::NoFit, format!("{as_of}: {e}"));
            }
            Err(e) => return Err(e),
        }
    }

    // (firm, security) -> [(month, marginal, acv, fit_id)]
    type Key = (FirmId, SecurityId);
    let mut series: BTreeMap<Key, Vec<(NaiveDate, f64, f64, NaiveDate)>> = BTreeMap::new();
    for (&month, rows) in &by_month {
        let Some((_, fit)) = fits.range(..=month).next_back() else {
            continue;
        };
        for row in rows {
            let mcv = marginal_cash_value(fit, row);
            let acv = average_cash_value(mcv, row.fundamentals.cash_holdings);
            series
                .entry((row.firm_id.clone(), row.security_id.clone()))
                .or_default()
                .push((month, mcv, acv, fit.as_of));
        }
    }

    let mut rows: Vec<SignalRow> = Vec::new();
    for ((firm, security), points) in &series {
        let acvs: Vec<(NaiveDate, f64)> = points.iter().map(|p| (p.0, p.2)).collect();
        let (returns, skipped) = cash_return(&acvs);
        let by_month: BTreeMap<NaiveDate, CashReturn> = returns.into_iter().map(|r| (r.month_end, r)).collect();
        for &(month, mcv, acv, fit_id) in points {
            let b = by_month.get(&month);
            let small = skipped.contains(&month);
            if small {
                diag.push(
                    DiagnosticKind::SmallAcvBase,
                    format!("{firm}/{security} {month}: previous average cash value near zero"),
                );
            }
            if b.is_some_and(|b| b.negative_base) {
                diag.push(
                    DiagnosticKind::NegativeAcvBase,
                    format!("{firm}/{security} {month}: negative previous average cash value"),
                );
            }
            rows.push(SignalRow {
                firm_id: firm.clone(),
                security_id: security.clone(),
                month_end: month,
                marginal_cash_value: mcv,
                average_cash_value: acv,
                b_raw: b.map(|b| b.value),
                b_winsorized: None,
                negative_acv_base: b.is_some_and(|b| b.negative_base),
                small_acv_base: small,
                fit_id,
            });
        }
    }
    rows.sort_by(|a, b| (a.month_end, &a.firm_id, &a.security_id).cmp(&(b.month_end, &b.firm_id, &b.security_id)));

    // cross-sectional winsorization per month, over the rows eligible for selection
    let mut start = 0;
    while start < rows.len() {
        let month = rows[start].month_end;
        let end = start + rows[start..].iter().take_while(|r| r.month_end == month).count();
        let idx: Vec<usize> = (start..end)
            .filter(|&i| rows[i].b_raw.is_some() && (config.allow_negative_acv_base || !rows[i].negative_acv_base))
            .collect();
        if !idx.is_empty() {
            let raw: Vec<f64> = idx.iter().map(|&i| rows[i].b_raw.expect("filtered")).collect();
            let clamped = winsorize(&raw, config.winsor.0, config.winsor.1)?;
            for (&i, v) in idx.iter().zip(clamped) {
                rows[i].b_winsorized = Some(v);
            }
        }
        start = end;
    }

    Ok(SignalSeries { rows, fits: summaries, allow_negative_acv_base: config.allow_negative_acv_base })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::panel::FilingValues;
    use proptest::prelude::*;

    fn d(s: &str) -> NaiveDate {
        NaiveDate::parse_from_str(s, "%Y-%m-%d").unwrap()
    }

    fn row(month: NaiveDate, x: [f64; N_REGRESSORS], y: f64, cash: f64) -> FirmMonthRow {
        let v = FilingValues {
            report_date: month,
            total_assets: 1000.0,
            cash_holdings: cash,
            total_debt: 0.0,
            earnings: 0.0,
            rnd_expense: 0.0,
            interest_expense: 0.0,
            dividends_paid: 0.0,
        };
        FirmMonthRow {
            firm_id: FirmId::new("F"),
            security_id: SecurityId::new("S"),
            month_end: month,
            monthly_return: y,
            risk_free: 0.0,
            excess_return: y,
            market_cap: 100.0,
            lagged_market_cap: 100.0,
            fundamentals: v,
            lagged_fundamentals: v,
            regressors: x,
        }
    }

    fn fw_fit(alpha: f64, g7: f64, g8: f64) -> FwFit {
        let names = vec![INTERCEPT.to_string(), "lag_cash".into(), "leverage".into()];
        FwFit {
            as_of: d("2020-01-31"),
            fit: RegressionFit {
                names,
                coefficients: vec![alpha, g7, g8],
                std_errors: vec![0.0; 3],
                t_stats: vec![0.0; 3],
                p_values: vec![0.0; 3],
                r_squared: 0.0,
                adj_r_squared: 0.0,
                residuals: vec![],
                n_obs: 0,
                df_resid: 0,
                sigma: 0.0,
                condition_number: 1.0,
            },
            dropped: vec![],
        }
    }

    #[test]
    fn planted_single_regressor_fit() {
        let mut panel = Vec::new();
        let month = d("2020-01-31");
        for i in 0..80 {
            let mut x = [0.0; N_REGRESSORS];
            x[0] = (i as f64 * 0.37).sin() * 0.1;
            x[LEVERAGE] = 0.25;
            panel.push(row(month, x, 0.01 + 0.5 * x[0], 10.0));
        }
        let fit = fit_fw_regression(&panel, month, &SignalConfig::default()).unwrap();
        assert!((fit.alpha() - 0.01).abs() < 1e-12);
        assert!((fit.gamma("d_cash") - 0.5).abs() < 1e-12);
        assert_eq!(fit.dropped.len(), 10);
        assert_eq!(fit.gamma("leverage"), 0.0);
    }

    #[test]
    fn too_few_rows_is_no_fit() {
        let panel: Vec<FirmMonthRow> = (0..10).map(|_| row(d("2020-01-31"), [0.0; 11], 0.0, 1.0)).collect();
        assert!(matches!(
            fit_fw_regression(&panel, d("2020-01-31"), &SignalConfig::default()),
            Err(Error::InsufficientObservations { have: 10, need: 60, .. })
        ));
    }

    #[test]
    fn marginal_value_examples() {
        let mut x = [0.0; N_REGRESSORS];
        x[LAG_CASH] = 0.2;
        x[LEVERAGE] = 0.4;
        let r = row(d("2020-01-31"), x, 0.0, 1.0);
        assert!((marginal_cash_value(&fw_fit(0.01, 0.5, -0.3), &r) - (-0.01)).abs() < 1e-15);
        assert_eq!(marginal_cash_value(&fw_fit(0.07, 0.0, 0.0), &r), 0.07);
        let zero = row(d("2020-01-31"), [0.0; N_REGRESSORS], 0.0, 1.0);
        assert_eq!(marginal_cash_value(&fw_fit(0.07, 0.5, -0.3), &zero), 0.07);
    }

    #[test]
    fn average_value_examples() {
        assert!((average_cash_value(1.2, 100.0) - 120.0).abs() < 1e-12);
        assert_eq!(average_cash_value(1.2, 0.0), 0.0);
        assert_eq!(average_cash_value(-0.5, 10.0), -5.0);
    }

    #[test]
    fn cash_return_examples() {
        let (r, _) = cash_return(&[(d("2020-01-31"), 100.0), (d("2020-02-28"), 110.0)]);
        assert!((r[0].value - 0.10).abs() < 1e-15);
        let (r, _) = cash_return(&[(d("2020-01-31"), 50.0), (d("2020-02-28"), 50.0)]);
        assert_eq!(r[0].value, 0.0);
        let (r, skipped) = cash_return(&[(d("2020-01-31"), 1e-15), (d("2020-02-28"), 1.0)]);
        assert!(r.is_empty());
        assert_eq!(skipped, vec![d("2020-02-28")]);
        // non-consecutive months produce nothing
        let (r, _) = cash_return(&[(d("2020-01-31"), 1.0), (d("2020-03-31"), 2.0)]);
        assert!(r.is_empty());
        let (r, _) = cash_return(&[(d("2020-01-31"), -2.0), (d("2020-02-28"), -1.0)]);
        assert!(r[0].negative_base);
        assert!((r[0].value + 0.5).abs() < 1e-15);
    }

    #[test]
    fn winsorize_examples() {
        let v = winsorize(&[-10.0, 1.0, 2.0, 3.0, 100.0], 20.0, 80.0).unwrap();
        // sorted: h = 0.8 -> -10 + 0.8 * 11; h = 3.2 -> 3 + 0.2 * 97
        assert!((v[0] - (-1.2)).abs() < 1e-12);
        assert_eq!(&v[1..4], &[1.0, 2.0, 3.0]);
        assert!((v[4] - 22.4).abs() < 1e-12);
        assert_eq!(winsorize(&[3.0; 4], 1.0, 99.0).unwrap(), vec![3.0; 4]);
        let xs = [5.0, -1.0, 2.5, 9.0];
        assert_eq!(winsorize(&xs, 0.0, 100.0).unwrap(), xs.to_vec());
        assert!(winsorize(&[], 1.0, 99.0).is_err());
        assert!(winsorize(&xs, 50.0, 50.0).is_err());
    }

    #[test]
    fn winsorize_leaves_interior_points() {
        let xs = [0.1, 0.2, 0.3, 0.4, 0.5];
        let v = winsorize(&xs, 1.0, 99.0).unwrap();
        assert_eq!(&v[1..4], &xs[1..4]);
    }

    #[test]
    fn window_parsing() {
        assert_eq!("expanding".parse::<FitWindow>().unwrap(), FitWindow::Expanding);
        assert_eq!("rolling(36)".parse::<FitWindow>().unwrap(), FitWindow::Rolling(36));
        assert!("rolling(0)".parse::<FitWindow>().is_err());
        assert_eq!(FitWindow::Rolling(12).to_string(), "rolling(12)");
    }

    #[test]
    fn recomputed_bounds_are_not_idempotent_in_general() {
        // clamping moves the order statistics the interpolated bound depends on
        let xs = [-631.7075644957046, 0.0];
        let (once, lo, hi) = winsorize_with_bounds(&xs, 10.0, 60.0).unwrap();
        let (_, lo2, _) = winsorize_with_bounds(&once, 10.0, 60.0).unwrap();
        assert_ne!(lo, lo2);
        assert_eq!(clamp_to_bounds(&once, lo, hi), once);
    }

    proptest! {
        #[test]
        fn winsorize_is_idempotent_and_monotone(
            xs in prop::collection::vec(-1e3f64..1e3, 1..80),
            lo in 0.0f64..40.0,
            width in 1.0f64..60.0,
        ) {
            let hi = (lo + width).min(100.0);
            let (once, lo_b, hi_b) = winsorize_with_bounds(&xs, lo, hi).unwrap();
            prop_assert_eq!(&clamp_to_bounds(&once, lo_b, hi_b), &once);
            for i in 0..xs.len() {
                for j in 0..xs.len() {
                    if xs[i] <= xs[j] {
                        prop_assert!(once[i] <= once[j]);
                    }
                }
            }
        }
    }
}
