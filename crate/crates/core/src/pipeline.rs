//! End-to-end orchestration from raw inputs to result files.
//!
//! Every command rebuilds what it needs from the raw inputs, so commands can
//! run in any order and repeated runs give identical files.

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};

use chrono::NaiveDate;
use serde::Serialize;

use crate::backtest::{
    returns_by_month, run_backtest, BacktestConfig, BacktestResult, EmptyMonthPolicy, ReturnPanel, SignalPanel,
};
use crate::calendar::TradingCalendar;
use crate::config::{LookbackChoice, RunConfig};
use crate::error::{Error, Result};
use crate::factors::{monthly_factors, risk_free_by_month, DailyFactorRow, FactorMonth};
use crate::fundamentals::{apply_pit_lag, forward_fill_monthly, QuarterlyFiling};
use crate::io::{self, fmt_num, CsvOut, FileReport};
use crate::optimize::{optimize_lookback, sharpe_ratio, OptimizationResult};
use crate::panel::{build_panel, FirmMonthRow};
use crate::performance::{compare_benchmarks, performance_report, Comparison, MetricRow, PerformanceReport};
use crate::prices::{build_monthly_equity, compound_monthly_returns, DailyPriceBar, MonthlyEquityRow};
use crate::signal::{compute_signal_series, SignalConfig, SignalSeries};
use crate::types::{month_number, DiagnosticKind, Diagnostics};
use crate::universe::{filter_universe, LinkRow, Universe, UniverseReport};

/// Name of the always-present benchmark built from the market factor plus the risk-free rate.
pub const MARKET_BENCHMARK: &str = "market";

/// All inputs, already parsed.
#[derive(Debug, Clone, Default)]
pub struct RawData {
    pub calendar_days: Vec<NaiveDate>,
    pub prices: Vec<DailyPriceBar>,
    pub filings: Vec<QuarterlyFiling>,
    pub links: Vec<LinkRow>,
    pub factors: Vec<DailyFactorRow>,
    /// Daily benchmark returns by series name.
    pub benchmarks: BTreeMap<String, Vec<(NaiveDate, f64)>>,
}

#[derive(Debug, Clone, Default, Serialize)]
pub struct IngestReport {
    pub prices: FileReport,
    pub fundamentals: FileReport,
    pub link_rows: usize,
    pub factor_days: usize,
    pub trading_days: usize,
    pub month_ends: usize,
    pub calendar_has_gaps: bool,
    pub invalid_filings: usize,
    pub monthly_equity_rows: usize,
    pub universe: UniverseReport,
    pub monthly_fundamental_rows: usize,
    pub panel_rows: usize,
    pub diagnostics: BTreeMap<DiagnosticKind, usize>,
}

fn trading_days(cfg: &RunConfig, prices: Option<&[DailyPriceBar]>) -> Result<Vec<NaiveDate>> {
    if let Some(path) = &cfg.data.calendar {
        return io::read_calendar(path);
    }
    let mut days: Vec<NaiveDate> = match prices {
        Some(p) => p.iter().map(|b| b.date).collect(),
        None => {
            let mut scratch = Diagnostics::new();
            io::read_prices(&cfg.data.prices, &mut scratch)?.0.iter().map(|b| b.date).collect()
        }
    };
    days.sort();
    days.dedup();
    Ok(days)
}

/// Read every input file named in the configuration.
pub fn load_raw(cfg: &RunConfig, diag: &mut Diagnostics) -> Result<(RawData, IngestReport)> {
    let (prices, price_report) = io::read_prices(&cfg.data.prices, diag)?;
    let (filings, fundamentals_report) = io::read_fundamentals(&cfg.data.fundamentals, diag)?;
    let links = io::read_links(&cfg.data.link)?;
    let factors = io::read_factors(&cfg.data.factors)?;
    let benchmarks = match &cfg.data.benchmarks {
        Some(p) => io::read_benchmarks(p)?,
        None => BTreeMap::new(),
    };
    let calendar_days = trading_days(cfg, Some(&prices))?;
    let report = IngestReport {
        prices: price_report,
        fundamentals: fundamentals_report,
        link_rows: links.len(),
        factor_days: factors.len(),
        ..Default::default()
    };
    Ok((RawData { calendar_days, prices, filings, links, factors, benchmarks }, report))
}

/// Monthly data, universe and firm-month panel built from raw inputs.
#[derive(Debug, Clone)]
pub struct Prepared {
    pub calendar: TradingCalendar,
    pub equity: Vec<MonthlyEquityRow>,
    pub factors: BTreeMap<NaiveDate, FactorMonth>,
    pub risk_free: BTreeMap<NaiveDate, f64>,
    pub universe: Universe,
    pub panel: Vec<FirmMonthRow>,
    /// Monthly benchmark returns, market first.
    pub benchmarks: Vec<(String, BTreeMap<NaiveDate, f64>)>,
    pub report: IngestReport,
}

fn monthly_benchmarks(
    raw: &BTreeMap<String, Vec<(NaiveDate, f64)>>,
    factors: &BTreeMap<NaiveDate, FactorMonth>,
    calendar: &TradingCalendar,
    diag: &mut Diagnostics,
) -> Vec<(String, BTreeMap<NaiveDate, f64>)> {
    let mut out = vec![(MARKET_BENCHMARK.to_string(), factors.iter().map(|(m, f)| (*m, f.market_total())).collect())];
    for (name, daily) in raw {
        if name == MARKET_BENCHMARK {
            log::warn!("benchmark series `{name}` clashes with the built-in market series and is skipped");
            continue;
        }
        out.push((name.clone(), compound_monthly_returns(daily, calendar, diag)));
    }
    out
}

/// Calendar, monthly equity, factors, universe and panel.
pub fn prepare(raw: RawData, cfg: &RunConfig, mut report: IngestReport, diag: &mut Diagnostics) -> Result<Prepared> {
    let calendar = TradingCalendar::from_unsorted(raw.calendar_days)?;
    if calendar.has_gaps() {
        log::warn!("calendar has months without trading days; they are treated as missing");
    }
    let mut filings = Vec::with_capacity(raw.filings.len());
    for f in raw.filings {
        match f.validate() {
            Ok(()) => filings.push(f),
            Err(reason) => {
                report.invalid_filings += 1;
                diag.push(DiagnosticKind::InvalidFiling, format!("{} {}: {reason}", f.firm_id, f.report_date));
            }
        }
    }
    let equity = build_monthly_equity(raw.prices, &calendar, diag);
    let factors = monthly_factors(&raw.factors, &calendar);
    let risk_free = risk_free_by_month(&factors);
    let universe = filter_universe(&raw.links, &filings, &equity, &cfg.universe)?;
    let firms: std::collections::BTreeSet<_> = universe.links.iter().map(|l| l.firm_id.clone()).collect();
    filings.retain(|f| firms.contains(&f.firm_id));
    let effective = apply_pit_lag(&filings, &calendar, diag);
    let monthly = forward_fill_monthly(&effective, &calendar, cfg.max_staleness_months);
    let panel = build_panel(&monthly, &equity, &risk_free, &universe, diag);
    let benchmarks = monthly_benchmarks(&raw.benchmarks, &factors, &calendar, diag);

    report.trading_days = calendar.days().len();
    report.month_ends = calendar.month_ends().len();
    report.calendar_has_gaps = calendar.has_gaps();
    report.monthly_equity_rows = equity.len();
    report.universe = universe.report.clone();
    report.monthly_fundamental_rows = monthly.len();
    report.panel_rows = panel.len();
    report.diagnostics = diag.counts().clone();
    Ok(Prepared { calendar, equity, factors, risk_free, universe, panel, benchmarks, report })
}

pub fn compute_signals(prep: &Prepared, signal: &SignalConfig, diag: &mut Diagnostics) -> Result<SignalSeries> {
    compute_signal_series(&prep.panel, signal, diag)
}

/// Realization months for which both a signal and returns can exist.
pub fn available_period(
    signals: &SignalSeries,
    returns: &ReturnPanel,
    month_ends: &[NaiveDate],
) -> Result<(NaiveDate, NaiveDate)> {
    let first_signal = signals.selectable().keys().next().copied();
    let last_return = returns.keys().next_back().copied();
    let (Some(first_signal), Some(last_return)) = (first_signal, last_return) else {
        return Err(Error::Coverage {
            start: month_ends.first().copied().unwrap_or_default(),
            end: month_ends.last().copied().unwrap_or_default(),
            detail: "no usable signal or no monthly returns".into(),
        });
    };
    let start = month_ends.iter().copied().find(|m| *m > first_signal);
    match start {
        Some(start) if start <= last_return => Ok((start, last_return)),
        _ => Err(Error::Coverage {
            start: first_signal,
            end: last_return,
            detail: "no month with returns follows the first signal".into(),
        }),
    }
}

/// Everything a backtest run needs besides the lookback and period.
pub struct StrategyInputs<'a> {
    pub signals: SignalPanel,
    pub returns: ReturnPanel,
    pub month_ends: &'a [NaiveDate],
    pub risk_free: &'a BTreeMap<NaiveDate, f64>,
    pub empty_month: EmptyMonthPolicy,
}

impl<'a> StrategyInputs<'a> {
    pub fn new(prep: &'a Prepared, signals: &SignalSeries, empty_month: EmptyMonthPolicy) -> Self {
        StrategyInputs {
            signals: SignalPanel::from_series(signals),
            returns: returns_by_month(&prep.equity),
            month_ends: prep.calendar.month_ends(),
            risk_free: &prep.risk_free,
            empty_month,
        }
    }

    pub fn backtest(
        &self,
        lookback: usize,
        period: (NaiveDate, NaiveDate),
        diag: &mut Diagnostics,
    ) -> Result<BacktestResult> {
        let cfg = BacktestConfig { lookback, period: Some(period), empty_month: self.empty_month };
        run_backtest(&self.signals, &self.returns, self.month_ends, self.risk_free, &cfg, diag)
    }

    /// Monthly Sharpe ratio of excess returns over `period`.
    pub fn sharpe(&self, lookback: usize, period: (NaiveDate, NaiveDate)) -> Result<f64> {
        let mut scratch = Diagnostics::with_message_limit(0);
        let result = self.backtest(lookback, period, &mut scratch)?;
        sharpe_ratio(&result.excess_returns(self.risk_free)?)
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct StrategyRun {
    pub result: BacktestResult,
    pub optimization: Option<OptimizationResult>,
    pub train: Option<(NaiveDate, NaiveDate)>,
}

fn optimize_on_train(
    inputs: &StrategyInputs<'_>,
    cfg: &RunConfig,
) -> Result<((NaiveDate, NaiveDate), OptimizationResult)> {
    let Some(train) = cfg.train else {
        return Err(Error::Config("optimizing the lookback needs a training period".into()));
    };
    let opt = optimize_lookback(|l| inputs.sharpe(l, train), cfg.lookback_bounds, &cfg.powell)?;
    log::info!(
        "training {} to {}: best lookback {} with monthly Sharpe {:.4}",
        train.0,
        train.1,
        opt.best_lookback,
        opt.best_sharpe
    );
    Ok((train, opt))
}

/// Optimize the lookback on the training period.
pub fn run_optimization(
    prep: &Prepared,
    signals: &SignalSeries,
    cfg: &RunConfig,
) -> Result<((NaiveDate, NaiveDate), OptimizationResult)> {
    let inputs = StrategyInputs::new(prep, signals, cfg.empty_month);
    optimize_on_train(&inputs, cfg)
}

/// Backtest with a fixed or optimized lookback over the test period.
///
/// Without an explicit test period the run covers all available months, or
/// the months after the training period when the lookback is optimized.
pub fn run_strategy(
    prep: &Prepared,
    signals: &SignalSeries,
    cfg: &RunConfig,
    diag: &mut Diagnostics,
) -> Result<StrategyRun> {
    let inputs = StrategyInputs::new(prep, signals, cfg.empty_month);
    let available = available_period(signals, &inputs.returns, inputs.month_ends)?;
    let (lookback, optimization, train) = match cfg.lookback {
        LookbackChoice::Fixed(l) => (l, None, cfg.train),
        LookbackChoice::Optimize => {
            let (train, opt) = optimize_on_train(&inputs, cfg)?;
            (opt.best_lookback, Some(opt), Some(train))
        }
    };
    let period = match (cfg.test, train) {
        (Some(test), _) => test,
        (None, Some(train)) if optimization.is_some() => {
            let start =
                inputs.month_ends.iter().copied().find(|m| month_number(*m) > month_number(train.1)).ok_or_else(
                    || Error::Coverage {
                        start: train.1,
                        end: available.1,
                        detail: "no months after the training period".into(),
                    },
                )?;
            (start, available.1)
        }
        _ => available,
    };
    let result = inputs.backtest(lookback, period, diag)?;
    Ok(StrategyRun { result, optimization, train })
}

/// `(left edge, right edge, count)` for `bins` equal-width bins spanning the data.
///
/// The last bin is closed on the right. A constant series gets a unit-width range around its value.
pub fn histogram(values: &[f64], bins: usize) -> Vec<(f64, f64, usize)> {
    if values.is_empty() || bins == 0 {
        return Vec::new();
    }
    let mut lo = values.iter().copied().fold(f64::INFINITY, f64::min);
    let mut hi = values.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    if lo == hi {
        lo -= 0.5;
        hi += 0.5;
    }
    let width = (hi - lo) / bins as f64;
    let mut counts = vec![0usize; bins];
    for v in values {
        let idx = (((v - lo) / width).floor() as usize).min(bins - 1);
        counts[idx] += 1;
    }
    (0..bins)
        .map(|i| {
            let left = lo + width * i as f64;
            let right = if i + 1 == bins { hi } else { lo + width * (i + 1) as f64 };
            (left, right, counts[i])
        })
        .collect()
}

#[derive(Debug, Clone, Serialize)]
struct RegressionTerm {
    name: String,
    coef: f64,
    std_err: f64,
    t: f64,
    p_value: f64,
    ci_lower: f64,
    ci_upper: f64,
    scale: Option<f64>,
}

#[derive(Debug, Clone, Serialize)]
struct RegressionTable {
    n_obs: usize,
    r_squared: f64,
    adj_r_squared: f64,
    residual_std_error: f64,
    factor_scaling: &'static str,
    terms: Vec<RegressionTerm>,
}

#[derive(Debug, Clone, Serialize)]
struct PerformanceFile<'a> {
    annualization: &'static str,
    monthly: &'a [MetricRow],
    annualized: &'a [MetricRow],
    regression: Option<RegressionTable>,
}

fn regression_table(report: &PerformanceReport) -> Option<RegressionTable> {
    let fa = report.alpha_regression.as_ref()?;
    let fit = &fa.fit;
    let ci = fit.conf_int(0.95);
    Some(RegressionTable {
        n_obs: fit.n_obs,
        r_squared: fit.r_squared,
        adj_r_squared: fit.adj_r_squared,
        residual_std_error: fit.sigma,
        factor_scaling: "each factor divided by its sample standard deviation, not centered",
        terms: fit
            .names
            .iter()
            .enumerate()
            .map(|(i, name)| RegressionTerm {
                name: name.clone(),
                coef: fit.coefficients[i],
                std_err: fit.std_errors[i],
                t: fit.t_stats[i],
                p_value: fit.p_values[i],
                ci_lower: ci[i].0,
                ci_upper: ci[i].1,
                scale: fa.scaling.get(name).map(|s| s.scale),
            })
            .collect(),
    })
}

fn opt_num(v: Option<f64>) -> String {
    v.map(fmt_num).unwrap_or_default()
}

/// `performance.json` and the long-format `performance.csv`.
pub fn write_performance(out: &Path, report: &PerformanceReport) -> Result<Vec<PathBuf>> {
    let table = regression_table(report);
    let json = out.join("performance.json");
    io::write_json(
        &json,
        &PerformanceFile {
            annualization: "monthly: raw monthly excess-return statistics; annualized: mean x 12, volatility and Sharpe x sqrt(12); alpha is the monthly factor-regression intercept in both panels",
            monthly: &report.monthly,
            annualized: &report.annualized,
            regression: table.clone(),
        },
    )?;
    let mut csv = CsvOut::new(out.join("performance.csv"), &["section", "name", "field", "value"]);
    for (section, rows) in [("monthly", &report.monthly), ("annualized", &report.annualized)] {
        for r in rows.iter() {
            csv.row([section, &r.asset, "n_months", &r.n_months.to_string()]);
            for (field, v) in [("mean", r.mean), ("volatility", r.volatility), ("sharpe", r.sharpe), ("alpha", r.alpha)]
            {
                csv.row([section, r.asset.as_str(), field, &opt_num(v)]);
            }
        }
    }
    if let Some(t) = &table {
        for (field, v) in [("n_obs", t.n_obs as f64), ("r_squared", t.r_squared), ("adj_r_squared", t.adj_r_squared)] {
            csv.row(["regression", "model", field, &fmt_num(v)]);
        }
        for term in &t.terms {
            for (field, v) in [
                ("coef", term.coef),
                ("std_err", term.std_err),
                ("t", term.t),
                ("p_value", term.p_value),
                ("ci_lower", term.ci_lower),
                ("ci_upper", term.ci_upper),
            ] {
                csv.row(["regression", term.name.as_str(), field, &fmt_num(v)]);
            }
        }
    }
    Ok(vec![json, csv.finish()?])
}

/// Cumulative comparison, return histogram and monthly return line.
pub fn write_plots(
    out: &Path,
    returns: &[(NaiveDate, f64)],
    comparison: Option<&Comparison>,
    bins: usize,
) -> Result<Vec<PathBuf>> {
    let mut written = Vec::new();
    if let Some(c) = comparison {
        let mut header = vec!["month_end"];
        header.extend(c.columns.iter().map(|(n, _)| n.as_str()));
        let mut csv = CsvOut::new(out.join("plot_cumulative.csv"), &header);
        for (i, m) in c.months.iter().enumerate() {
            let mut row = vec![m.to_string()];
            row.extend(c.columns.iter().map(|(_, v)| fmt_num(v[i])));
            csv.row(row);
        }
        written.push(csv.finish()?);
    }
    let values: Vec<f64> = returns.iter().map(|r| r.1).collect();
    let mut csv = CsvOut::new(out.join("plot_monthly_hist.csv"), &["bin_left", "bin_right", "count"]);
    for (l, r, n) in histogram(&values, bins) {
        csv.row([fmt_num(l), fmt_num(r), n.to_string()]);
    }
    written.push(csv.finish()?);
    let mut csv = CsvOut::new(out.join("plot_monthly_line.csv"), &["month_end", "portfolio_return"]);
    for (m, r) in returns {
        csv.row([m.to_string(), fmt_num(*r)]);
    }
    written.push(csv.finish()?);
    Ok(written)
}

#[derive(Debug, Serialize)]
struct RunMetadata<'a> {
    lookback: usize,
    lookback_source: &'static str,
    period: (NaiveDate, NaiveDate),
    train: Option<(NaiveDate, NaiveDate)>,
    months: usize,
    empty_month: EmptyMonthPolicy,
    empty_months: usize,
    missing_next_returns: usize,
    universe_mode: crate::universe::UniverseMode,
    universe: &'a UniverseReport,
    signal: &'a SignalConfig,
}

fn report_and_plots(
    out: &Path,
    returns: &[(NaiveDate, f64)],
    prep_benchmarks: &[(String, BTreeMap<NaiveDate, f64>)],
    factors: &BTreeMap<NaiveDate, FactorMonth>,
    cfg: &RunConfig,
) -> Result<Vec<PathBuf>> {
    let report = performance_report(returns, prep_benchmarks, factors, cfg.include_momentum);
    let mut written = write_performance(out, &report)?;
    let rf = risk_free_by_month(factors);
    let comparison = match compare_benchmarks(returns, prep_benchmarks, &rf) {
        Ok(c) => Some(c),
        Err(e) => {
            log::warn!("no cumulative comparison: {e}");
            None
        }
    };
    written.extend(write_plots(out, returns, comparison.as_ref(), cfg.hist_bins)?);
    Ok(written)
}

/// Build the panel and write it with an ingestion report.
pub fn cmd_ingest(cfg: &RunConfig) -> Result<Vec<PathBuf>> {
    let mut diag = Diagnostics::new();
    let (raw, report) = load_raw(cfg, &mut diag)?;
    let prep = prepare(raw, cfg, report, &mut diag)?;
    diag.log_summary("ingest");
    let out = &cfg.out_dir;
    let report_path = out.join("ingest_report.json");
    io::write_json(&report_path, &prep.report)?;
    Ok(vec![io::write_panel(&out.join("panel.csv"), &prep.panel)?, report_path])
}

pub fn cmd_signal(cfg: &RunConfig) -> Result<Vec<PathBuf>> {
    let mut diag = Diagnostics::new();
    let (raw, report) = load_raw(cfg, &mut diag)?;
    let prep = prepare(raw, cfg, report, &mut diag)?;
    let signals = compute_signals(&prep, &cfg.signal, &mut diag)?;
    diag.log_summary("signal");
    let out = &cfg.out_dir;
    let fits = out.join("signal_fits.json");
    io::write_json(&fits, &signals.fits)?;
    Ok(vec![io::write_signals(&out.join("signals.csv"), &signals)?, fits])
}

fn require_training(cfg: &RunConfig) -> Result<()> {
    if cfg.train.is_none() {
        return Err(Error::Config("optimizing the lookback needs a training period".into()));
    }
    Ok(())
}

pub fn cmd_optimize(cfg: &RunConfig) -> Result<Vec<PathBuf>> {
    require_training(cfg)?;
    let mut diag = Diagnostics::new();
    let (raw, report) = load_raw(cfg, &mut diag)?;
    let prep = prepare(raw, cfg, report, &mut diag)?;
    let signals = compute_signals(&prep, &cfg.signal, &mut diag)?;
    let (_, opt) = run_optimization(&prep, &signals, cfg)?;
    diag.log_summary("optimize");
    let path = cfg.out_dir.join("optimization.json");
    io::write_json(&path, &opt)?;
    Ok(vec![path])
}

/// Signal, backtest, performance and plot files.
pub fn cmd_backtest(cfg: &RunConfig) -> Result<Vec<PathBuf>> {
    if cfg.lookback == LookbackChoice::Optimize {
        require_training(cfg)?;
    }
    let mut diag = Diagnostics::new();
    let (raw, report) = load_raw(cfg, &mut diag)?;
    let prep = prepare(raw, cfg, report, &mut diag)?;
    let signals = compute_signals(&prep, &cfg.signal, &mut diag)?;
    let run = run_strategy(&prep, &signals, cfg, &mut diag)?;
    diag.log_summary("backtest");
    let out = &cfg.out_dir;
    let r = &run.result;
    let mut written = vec![
        io::write_signals(&out.join("signals.csv"), &signals)?,
        io::write_backtest_returns(&out.join("backtest_returns.csv"), r)?,
        io::write_holdings(&out.join("holdings.csv"), r)?,
    ];
    if let Some(opt) = &run.optimization {
        let p = out.join("optimization.json");
        io::write_json(&p, opt)?;
        written.push(p);
    }
    let meta = out.join("run_metadata.json");
    io::write_json(
        &meta,
        &RunMetadata {
            lookback: r.lookback,
            lookback_source: if run.optimization.is_some() { "optimized" } else { "fixed" },
            period: r.period,
            train: run.train,
            months: r.months.len(),
            empty_month: r.empty_month,
            empty_months: r.empty_months,
            missing_next_returns: r.missing_returns,
            universe_mode: cfg.universe.mode,
            universe: &prep.universe.report,
            signal: &cfg.signal,
        },
    )?;
    written.push(meta);
    written.extend(report_and_plots(out, &r.dated_returns(), &prep.benchmarks, &prep.factors, cfg)?);
    Ok(written)
}

/// Performance and plot files from an existing `backtest_returns.csv` in the output directory.
pub fn cmd_report(cfg: &RunConfig) -> Result<Vec<PathBuf>> {
    let out = &cfg.out_dir;
    let results = out.join("backtest_returns.csv");
    if !results.exists() {
        return Err(Error::Coverage {
            start: NaiveDate::default(),
            end: NaiveDate::default(),
            detail: format!("{} not found; run `backtest` first", results.display()),
        });
    }
    let returns = io::read_backtest_returns(&results)?;
    let calendar = TradingCalendar::from_unsorted(trading_days(cfg, None)?)?;
    let factors = monthly_factors(&io::read_factors(&cfg.data.factors)?, &calendar);
    let raw_bench = match &cfg.data.benchmarks {
        Some(p) => io::read_benchmarks(p)?,
        None => BTreeMap::new(),
    };
    let mut diag = Diagnostics::new();
    let benchmarks = monthly_benchmarks(&raw_bench, &factors, &calendar, &mut diag);
    report_and_plots(out, &returns, &benchmarks, &factors, cfg)
}
