//! Summary metrics, factor-alpha regression and benchmark comparison.

use std::collections::BTreeMap;

use chrono::NaiveDate;
use serde::Serialize;

use crate::backtest::cumulative_returns;
use crate::error::{Error, Result};
use crate::factors::FactorMonth;
use crate::ols::{fit_ols, scale_features, ColumnScaling, DesignMatrix, RegressionFit, INTERCEPT};
use crate::optimize::sharpe_ratio;

pub const MIN_SUMMARY_MONTHS: usize = 12;
pub const MIN_ALPHA_MONTHS: usize = 24;
pub const MONTHS_PER_YEAR: f64 = 12.0;

pub const MARKET: &str = "market_factor";
pub const SIZE: &str = "size_factor";
pub const VALUE: &str = "value_factor";
pub const MOMENTUM: &str = "momentum_factor";

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Metrics {
    pub mean: f64,
    pub volatility: f64,
    pub sharpe: f64,
}

/// Mean, sample volatility and Sharpe ratio of `returns - rf`.
///
/// With `annualize` the mean is scaled by 12 and volatility and Sharpe by `sqrt(12)`.
pub fn summarize(returns: &[f64], rf: &[f64], annualize: bool) -> Result<Metrics> {
    if returns.len() != rf.len() {
        return Err(Error::InvalidInput(format!("{} returns but {} risk-free rates", returns.len(), rf.len())));
    }
    let n = returns.len();
    if n < MIN_SUMMARY_MONTHS {
        return Err(Error::InvalidInput(format!("{n} months, need at least {MIN_SUMMARY_MONTHS}")));
    }
    let excess: Vec<f64> = returns.iter().zip(rf).map(|(r, f)| r - f).collect();
    let mean = excess.iter().sum::<f64>() / n as f64;
    let volatility = (excess.iter().map(|e| (e - mean).powi(2)).sum::<f64>() / (n - 1) as f64).sqrt();
    let sharpe = sharpe_ratio(&excess)?;
    Ok(if annualize {
        let root = MONTHS_PER_YEAR.sqrt();
        Metrics { mean: mean * MONTHS_PER_YEAR, volatility: volatility * root, sharpe: sharpe * root }
    } else {
        Metrics { mean, volatility, sharpe }
    })
}

/// Factor regression on scaled factors together with the scale used for each.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct FactorAlpha {
    pub fit: RegressionFit,
    pub scaling: BTreeMap<String, ColumnScaling>,
    pub months: Vec<NaiveDate>,
}

impl FactorAlpha {
    pub fn alpha(&self) -> f64 {
        self.fit.intercept().expect("factor fit has an intercept")
    }

    /// Slope per unit of the unscaled factor.
    pub fn raw_beta(&self, name: &str) -> Option<f64> {
        Some(self.fit.coefficient(name)? / self.scaling.get(name)?.scale)
    }

    pub fn raw_std_error(&self, name: &str) -> Option<f64> {
        Some(self.fit.std_error(name)? / self.scaling.get(name)?.scale)
    }
}

/// OLS of monthly excess returns on market, size, value and optionally momentum.
///
/// Each factor is divided by its sample standard deviation before fitting;
/// the intercept is left on the return scale and reported as alpha.
pub fn factor_alpha(
    excess_returns: &[(NaiveDate, f64)],
    factors: &BTreeMap<NaiveDate, FactorMonth>,
    include_momentum: bool,
) -> Result<FactorAlpha> {
    let mut missing = Vec::new();
    let mut rows = Vec::with_capacity(excess_returns.len());
    for (month, r) in excess_returns {
        match factors.get(month) {
            Some(f) if !include_momentum || f.umd.is_some() => rows.push((*month, *r, *f)),
            _ => missing.push(*month),
        }
    }
    if !missing.is_empty() {
        return Err(Error::Misaligned(missing));
    }
    if rows.len() < MIN_ALPHA_MONTHS {
        return Err(Error::InsufficientObservations {
            as_of: rows.last().map(|r| r.0).unwrap_or_default(),
            have: rows.len(),
            need: MIN_ALPHA_MONTHS,
        });
    }
    let mut names = vec![MARKET, SIZE, VALUE];
    let mut columns = vec![
        rows.iter().map(|r| r.2.mkt).collect::<Vec<_>>(),
        rows.iter().map(|r| r.2.smb).collect(),
        rows.iter().map(|r| r.2.hml).collect(),
    ];
    if include_momentum {
        names.push(MOMENTUM);
        columns.push(rows.iter().map(|r| r.2.umd.expect("checked above")).collect());
    }
    let design = DesignMatrix::with_intercept(&names, &columns, rows.iter().map(|r| r.1).collect())?;
    let (scaled, scaling) = scale_features(&design)?;
    let fit = fit_ols(&scaled)?;
    debug_assert_eq!(fit.names[0], INTERCEPT);
    Ok(FactorAlpha { fit, scaling, months: rows.iter().map(|r| r.0).collect() })
}

/// Month-aligned cumulative returns of several series.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Comparison {
    pub months: Vec<NaiveDate>,
    /// `(name, cumulative series)`, portfolio first and risk-free last.
    pub columns: Vec<(String, Vec<f64>)>,
}

/// Cumulative returns of the portfolio, each benchmark and the risk-free rate over their common months.
pub fn compare_benchmarks(
    portfolio: &[(NaiveDate, f64)],
    benchmarks: &[(String, BTreeMap<NaiveDate, f64>)],
    risk_free: &BTreeMap<NaiveDate, f64>,
) -> Result<Comparison> {
    let months: Vec<NaiveDate> = portfolio
        .iter()
        .map(|(m, _)| *m)
        .filter(|m| risk_free.contains_key(m) && benchmarks.iter().all(|(_, b)| b.contains_key(m)))
        .collect();
    if months.is_empty() {
        return Err(Error::Coverage {
            start: portfolio.first().map(|p| p.0).unwrap_or_default(),
            end: portfolio.last().map(|p| p.0).unwrap_or_default(),
            detail: "portfolio, benchmarks and risk-free rate share no month".into(),
        });
    }
    let port: BTreeMap<NaiveDate, f64> = portfolio.iter().copied().collect();
    let pick = |series: &BTreeMap<NaiveDate, f64>| -> Vec<f64> { months.iter().map(|m| series[m]).collect() };
    let mut columns = vec![("portfolio".to_string(), cumulative_returns(&pick(&port))?)];
    for (name, series) in benchmarks {
        columns.push((name.clone(), cumulative_returns(&pick(series))?));
    }
    columns.push(("risk_free".to_string(), cumulative_returns(&pick(risk_free))?));
    Ok(Comparison { months, columns })
}

/// One asset's metrics; fields are absent when the series is too short or flat.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct MetricRow {
    pub asset: String,
    pub n_months: usize,
    pub mean: Option<f64>,
    pub volatility: Option<f64>,
    pub sharpe: Option<f64>,
    pub alpha: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct PerformanceReport {
    pub monthly: Vec<MetricRow>,
    pub annualized: Vec<MetricRow>,
    /// Factor regression of the portfolio's excess returns.
    pub alpha_regression: Option<FactorAlpha>,
    pub include_momentum: bool,
}

fn metric_rows(
    asset: &str,
    series: &[(NaiveDate, f64)],
    factors: &BTreeMap<NaiveDate, FactorMonth>,
    include_momentum: bool,
) -> (MetricRow, MetricRow, Option<FactorAlpha>) {
    let aligned: Vec<(NaiveDate, f64, f64)> =
        series.iter().filter_map(|(m, r)| factors.get(m).map(|f| (*m, *r, f.rf))).collect();
    let rets: Vec<f64> = aligned.iter().map(|a| a.1).collect();
    let rf: Vec<f64> = aligned.iter().map(|a| a.2).collect();
    let excess: Vec<(NaiveDate, f64)> = aligned.iter().map(|a| (a.0, a.1 - a.2)).collect();
    let fa = match factor_alpha(&excess, factors, include_momentum) {
        Ok(fa) => Some(fa),
        Err(e) => {
            log::info!("{asset}: no factor alpha ({e})");
            None
        }
    };
    let alpha = fa.as_ref().map(FactorAlpha::alpha);
    let row = |annualize: bool| {
        let m = summarize(&rets, &rf, annualize);
        if let Err(e) = &m {
            log::info!("{asset}: no summary metrics ({e})");
        }
        let m = m.ok();
        MetricRow {
            asset: asset.to_string(),
            n_months: rets.len(),
            mean: m.map(|m| m.mean),
            volatility: m.map(|m| m.volatility),
            sharpe: m.map(|m| m.sharpe),
            alpha,
        }
    };
    (row(false), row(true), fa)
}

/// Metrics for the portfolio and each benchmark, plus the portfolio's factor regression.
pub fn performance_report(
    portfolio: &[(NaiveDate, f64)],
    benchmarks: &[(String, BTreeMap<NaiveDate, f64>)],
    factors: &BTreeMap<NaiveDate, FactorMonth>,
    include_momentum: bool,
) -> PerformanceReport {
    let (m, a, fit) = metric_rows("portfolio", portfolio, factors, include_momentum);
    let mut monthly = vec![m];
    let mut annualized = vec![a];
    for (name, series) in benchmarks {
        let aligned: Vec<(NaiveDate, f64)> =
            portfolio.iter().filter_map(|(month, _)| series.get(month).map(|r| (*month, *r))).collect();
        let (m, a, _) = metric_rows(name, &aligned, factors, include_momentum);
        monthly.push(m);
        annualized.push(a);
    }
    PerformanceReport { monthly, annualized, alpha_regression: fit, include_momentum }
}
