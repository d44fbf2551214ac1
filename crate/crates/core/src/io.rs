//! CSV input and output.
//!
//! Readers check headers and every field, failing with the file, line and
//! column of the first problem. Empty cells, `NA` and `NaN` read as missing
//! for optional fields. Numbers are written in shortest round-trip form.

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};

use chrono::NaiveDate;
use csv::StringRecord;
use serde::Serialize;

use crate::backtest::BacktestResult;
use crate::error::{Error, Result};
use crate::factors::DailyFactorRow;
use crate::fundamentals::QuarterlyFiling;
use crate::panel::{FirmMonthRow, REGRESSOR_NAMES};
use crate::prices::DailyPriceBar;
use crate::signal::SignalSeries;
use crate::types::{DiagnosticKind, Diagnostics, FirmId, SecurityId};
use crate::universe::LinkRow;

pub const PRICES_COLUMNS: [&str; 7] = ["permno", "date", "prc", "ret", "shrout", "cfacpr", "cfacshr"];
pub const FUNDAMENTALS_COLUMNS: [&str; 9] = ["gvkey", "rdq", "atq", "cheq", "dlttq", "ibq", "xrdq", "xintq", "dvq"];
pub const LINK_COLUMNS: [&str; 5] = ["gvkey", "permno", "sic", "linkdt", "linkenddt"];
pub const FACTOR_COLUMNS: [&str; 6] = ["date", "mktrf", "smb", "hml", "umd", "rf"];
pub const BENCHMARK_COLUMNS: [&str; 3] = ["date", "series", "ret"];

/// A parsed CSV file with its header positions.
struct Table {
    file: String,
    columns: BTreeMap<String, usize>,
    records: Vec<(u64, StringRecord)>,
}

impl Table {
    fn read(path: &Path, required: &[&str]) -> Result<Self> {
        let file = path.display().to_string();
        let text = fs::read(path).map_err(|e| Error::io(path, e))?;
        let mut reader = csv::ReaderBuilder::new().trim(csv::Trim::All).flexible(false).from_reader(text.as_slice());
        let headers = reader.headers().map_err(|e| csv_error(&file, e))?.clone();
        let columns: BTreeMap<String, usize> =
            headers.iter().enumerate().map(|(i, h)| (h.to_ascii_lowercase(), i)).collect();
        for name in required {
            if !columns.contains_key(*name) {
                return Err(Error::Schema {
                    file,
                    line: 1,
                    column: (*name).to_string(),
                    message: "required column is missing from the header".into(),
                });
            }
        }
        let mut records = Vec::new();
        for rec in reader.records() {
            let rec = rec.map_err(|e| csv_error(&file, e))?;
            let line = rec.position().map_or(0, |p| p.line());
            records.push((line, rec));
        }
        Ok(Table { file, columns, records })
    }

    fn has(&self, name: &str) -> bool {
        self.columns.contains_key(name)
    }

    fn field<'r>(&self, rec: &'r StringRecord, name: &str) -> Option<&'r str> {
        let idx = *self.columns.get(name)?;
        rec.get(idx).filter(|s| !is_missing(s))
    }

    fn schema(&self, line: u64, column: &str, message: impl Into<String>) -> Error {
        Error::Schema { file: self.file.clone(), line, column: column.to_string(), message: message.into() }
    }

    fn text(&self, line: u64, rec: &StringRecord, name: &str) -> Result<String> {
        self.field(rec, name).map(str::to_string).ok_or_else(|| self.schema(line, name, "required value is empty"))
    }

    fn date(&self, line: u64, rec: &StringRecord, name: &str) -> Result<NaiveDate> {
        let raw = self.field(rec, name).ok_or_else(|| self.schema(line, name, "required date is empty"))?;
        parse_date(raw).ok_or_else(|| self.schema(line, name, format!("`{raw}` is not a date")))
    }

    fn opt_date(&self, line: u64, rec: &StringRecord, name: &str) -> Result<Option<NaiveDate>> {
        match self.field(rec, name) {
            None => Ok(None),
            Some(raw) => {
                parse_date(raw).map(Some).ok_or_else(|| self.schema(line, name, format!("`{raw}` is not a date")))
            }
        }
    }

    fn opt_num(&self, line: u64, rec: &StringRecord, name: &str) -> Result<Option<f64>> {
        match self.field(rec, name) {
            None => Ok(None),
            Some(raw) => match raw.parse::<f64>() {
                Ok(v) if v.is_finite() => Ok(Some(v)),
                _ => Err(self.schema(line, name, format!("`{raw}` is not a finite number"))),
            },
        }
    }

    fn num(&self, line: u64, rec: &StringRecord, name: &str) -> Result<f64> {
        self.opt_num(line, rec, name)?.ok_or_else(|| self.schema(line, name, "required number is empty"))
    }

    /// Count of missing cells per listed column.
    fn missing_counts(&self, names: &[&str]) -> BTreeMap<String, usize> {
        names
            .iter()
            .map(|n| {
                let count = self.records.iter().filter(|(_, r)| self.field(r, n).is_none()).count();
                ((*n).to_string(), count)
            })
            .collect()
    }
}

fn csv_error(file: &str, e: csv::Error) -> Error {
    Error::Csv { file: file.to_string(), message: e.to_string() }
}

fn is_missing(s: &str) -> bool {
    s.is_empty() || s.eq_ignore_ascii_case("na") || s.eq_ignore_ascii_case("nan") || s == "."
}

/// Accepts `YYYY-MM-DD` and `YYYYMMDD`.
pub fn parse_date(s: &str) -> Option<NaiveDate> {
    NaiveDate::parse_from_str(s, "%Y-%m-%d").or_else(|_| NaiveDate::parse_from_str(s, "%Y%m%d")).ok()
}

/// Rows read from one input file and its per-column missing counts.
#[derive(Debug, Clone, Default, PartialEq, Serialize)]
pub struct FileReport {
    pub rows_read: usize,
    pub rows_rejected: usize,
    pub missing_by_field: BTreeMap<String, usize>,
}

pub fn read_calendar(path: &Path) -> Result<Vec<NaiveDate>> {
    let t = Table::read(path, &["date"])?;
    t.records.iter().map(|(line, r)| t.date(*line, r, "date")).collect()
}

/// Daily bars; negative prices are taken as absolute values and counted.
pub fn read_prices(path: &Path, diag: &mut Diagnostics) -> Result<(Vec<DailyPriceBar>, FileReport)> {
    let t = Table::read(path, &PRICES_COLUMNS)?;
    let mut out = Vec::with_capacity(t.records.len());
    for (line, r) in &t.records {
        let line = *line;
        let mut raw_price = t.opt_num(line, r, "prc")?;
        if let Some(p) = raw_price.filter(|p| *p < 0.0) {
            diag.push(DiagnosticKind::NegativePrice, format!("{}:{line}: negative price {p} used as {}", t.file, -p));
            raw_price = Some(-p);
        }
        out.push(DailyPriceBar {
            security_id: SecurityId::new(t.text(line, r, "permno")?),
            date: t.date(line, r, "date")?,
            raw_price,
            daily_return: t.opt_num(line, r, "ret")?,
            shares_outstanding: t.opt_num(line, r, "shrout")?,
            cfacpr: t.opt_num(line, r, "cfacpr")?,
            cfacshr: t.opt_num(line, r, "cfacshr")?,
        });
    }
    let report = FileReport {
        rows_read: t.records.len(),
        rows_rejected: 0,
        missing_by_field: t.missing_counts(&PRICES_COLUMNS),
    };
    Ok((out, report))
}

/// Quarterly filings; rows without a report date are rejected and counted.
pub fn read_fundamentals(path: &Path, diag: &mut Diagnostics) -> Result<(Vec<QuarterlyFiling>, FileReport)> {
    let t = Table::read(path, &FUNDAMENTALS_COLUMNS)?;
    let mut out = Vec::with_capacity(t.records.len());
    let mut rejected = 0;
    for (line, r) in &t.records {
        let line = *line;
        let firm_id = FirmId::new(t.text(line, r, "gvkey")?);
        let Some(report_date) = t.opt_date(line, r, "rdq")? else {
            diag.push(DiagnosticKind::MissingReportDate, format!("{}:{line}: {firm_id} has no report date", t.file));
            rejected += 1;
            continue;
        };
        out.push(QuarterlyFiling {
            firm_id,
            report_date,
            total_assets: t.opt_num(line, r, "atq")?,
            cash_holdings: t.opt_num(line, r, "cheq")?,
            total_debt: t.opt_num(line, r, "dlttq")?,
            earnings: t.opt_num(line, r, "ibq")?,
            rnd_expense: t.opt_num(line, r, "xrdq")?,
            interest_expense: t.opt_num(line, r, "xintq")?,
            dividends_paid: t.opt_num(line, r, "dvq")?,
        });
    }
    let report = FileReport {
        rows_read: t.records.len(),
        rows_rejected: rejected,
        missing_by_field: t.missing_counts(&FUNDAMENTALS_COLUMNS),
    };
    Ok((out, report))
}

pub fn read_links(path: &Path) -> Result<Vec<LinkRow>> {
    let t = Table::read(path, &LINK_COLUMNS)?;
    t.records
        .iter()
        .map(|(line, r)| {
            let line = *line;
            let sic_raw = t.text(line, r, "sic")?;
            let sic_code =
                sic_raw.parse::<u16>().map_err(|_| t.schema(line, "sic", format!("`{sic_raw}` is not a SIC code")))?;
            Ok(LinkRow {
                firm_id: FirmId::new(t.text(line, r, "gvkey")?),
                security_id: SecurityId::new(t.text(line, r, "permno")?),
                sic_code,
                link_start: t.opt_date(line, r, "linkdt")?,
                link_end: t.opt_date(line, r, "linkenddt")?,
            })
        })
        .collect()
}

/// Daily factors; the momentum column may be absent or blank.
pub fn read_factors(path: &Path) -> Result<Vec<DailyFactorRow>> {
    let t = Table::read(path, &["date", "mktrf", "smb", "hml", "rf"])?;
    let has_umd = t.has("umd");
    t.records
        .iter()
        .map(|(line, r)| {
            let line = *line;
            Ok(DailyFactorRow {
                date: t.date(line, r, "date")?,
                mkt_excess: t.num(line, r, "mktrf")?,
                smb: t.num(line, r, "smb")?,
                hml: t.num(line, r, "hml")?,
                umd: if has_umd { t.opt_num(line, r, "umd")? } else { None },
                rf: t.num(line, r, "rf")?,
            })
        })
        .collect()
}

/// Long-format daily benchmark returns: `date,series,ret`.
pub fn read_benchmarks(path: &Path) -> Result<BTreeMap<String, Vec<(NaiveDate, f64)>>> {
    let t = Table::read(path, &BENCHMARK_COLUMNS)?;
    let mut out: BTreeMap<String, Vec<(NaiveDate, f64)>> = BTreeMap::new();
    for (line, r) in &t.records {
        let line = *line;
        out.entry(t.text(line, r, "series")?).or_default().push((t.date(line, r, "date")?, t.num(line, r, "ret")?));
    }
    Ok(out)
}

/// Shortest representation that parses back to the same `f64`.
pub fn fmt_num(v: f64) -> String {
    if v == 0.0 {
        "0".to_string()
    } else {
        format!("{v}")
    }
}

fn fmt_opt(v: Option<f64>) -> String {
    v.map(fmt_num).unwrap_or_default()
}

/// Writes a CSV file with a header row, creating parent directories.
pub struct CsvOut {
    path: PathBuf,
    buf: String,
}

impl CsvOut {
    pub fn new(path: impl Into<PathBuf>, header: &[&str]) -> Self {
        let mut buf = header.join(",");
        buf.push('\n');
        CsvOut { path: path.into(), buf }
    }

    pub fn row<I, S>(&mut self, fields: I)
    where
        I: IntoIterator<Item = S>,
        S: AsRef<str>,
    {
        let mut first = true;
        for f in fields {
            if !first {
                self.buf.push(',');
            }
            first = false;
            let f = f.as_ref();
            if f.contains([',', '"', '\n']) {
                let _ = write!(self.buf, "\"{}\"", f.replace('"', "\"\""));
            } else {
                self.buf.push_str(f);
            }
        }
        self.buf.push('\n');
    }

    pub fn finish(self) -> Result<PathBuf> {
        write_text(&self.path, &self.buf)?;
        Ok(self.path)
    }
}

pub fn write_text(path: &Path, text: &str) -> Result<()> {
    if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
        fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    }
    fs::write(path, text).map_err(|e| Error::io(path, e))
}

pub fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<()> {
    let mut text = serde_json::to_string_pretty(value)?;
    text.push('\n');
    write_text(path, &text)
}

pub fn write_signals(path: &Path, signals: &SignalSeries) -> Result<PathBuf> {
    let mut out = CsvOut::new(
        path,
        &["gvkey", "permno", "month_end", "marginal_cash_value", "avg_cash_value", "b_raw", "b_winsorized", "flags"],
    );
    for r in &signals.rows {
        out.row([
            r.firm_id.to_string(),
            r.security_id.to_string(),
            r.month_end.to_string(),
            fmt_num(r.marginal_cash_value),
            fmt_num(r.average_cash_value),
            fmt_opt(r.b_raw),
            fmt_opt(r.b_winsorized),
            r.flags(),
        ]);
    }
    out.finish()
}

pub fn write_backtest_returns(path: &Path, result: &BacktestResult) -> Result<PathBuf> {
    let mut out = CsvOut::new(path, &["month_end", "portfolio_return", "cumulative_return", "n_holdings"]);
    for m in &result.months {
        out.row([
            m.month_end.to_string(),
            fmt_num(m.portfolio_return),
            fmt_num(m.cumulative_return),
            m.n_holdings.to_string(),
        ]);
    }
    out.finish()
}

/// Holdings labelled by formation month.
pub fn write_holdings(path: &Path, result: &BacktestResult) -> Result<PathBuf> {
    let mut out = CsvOut::new(path, &["month_end", "permno", "weight"]);
    for s in &result.snapshots {
        for (sec, w) in &s.holdings {
            out.row([s.month_end.to_string(), sec.to_string(), fmt_num(*w)]);
        }
    }
    out.finish()
}

pub fn write_panel(path: &Path, panel: &[FirmMonthRow]) -> Result<PathBuf> {
    let mut header = vec![
        "gvkey",
        "permno",
        "month_end",
        "monthly_return",
        "risk_free",
        "excess_return",
        "market_cap",
        "lagged_market_cap",
        "cash",
        "total_assets",
        "total_debt",
        "earnings",
    ];
    header.extend(REGRESSOR_NAMES);
    let mut out = CsvOut::new(path, &header);
    for r in panel {
        let mut fields = vec![
            r.firm_id.to_string(),
            r.security_id.to_string(),
            r.month_end.to_string(),
            fmt_num(r.monthly_return),
            fmt_num(r.risk_free),
            fmt_num(r.excess_return),
            fmt_num(r.market_cap),
            fmt_num(r.lagged_market_cap),
            fmt_num(r.fundamentals.cash_holdings),
            fmt_num(r.fundamentals.total_assets),
            fmt_num(r.fundamentals.total_debt),
            fmt_num(r.fundamentals.earnings),
        ];
        fields.extend(r.regressors.iter().map(|v| fmt_num(*v)));
        out.row(fields);
    }
    out.finish()
}

/// Reads back `backtest_returns.csv` as `(month_end, portfolio_return)` pairs.
pub fn read_backtest_returns(path: &Path) -> Result<Vec<(NaiveDate, f64)>> {
    let t = Table::read(path, &["month_end", "portfolio_return"])?;
    t.records
        .iter()
        .map(|(line, r)| Ok((t.date(*line, r, "month_end")?, t.num(*line, r, "portfolio_return")?)))
        .collect()
}
