//! Run configuration.
//!
//! A TOML file with `[data]`, `[universe]`, `[pit]`, `[signal]`,
//! `[backtest]` and `[optimizer]` tables. Relative paths resolve against the
//! file's directory. Every key has a default.

use std::path::{Path, PathBuf};

use chrono::NaiveDate;
use serde::{Deserialize, Serialize};

use crate::backtest::EmptyMonthPolicy;
use crate::error::{Error, Result};
use crate::optimize::PowellOptions;
use crate::signal::{FitWindow, SignalConfig};
use crate::types::month_number;
use crate::universe::{UniverseConfig, UniverseMode};

pub const DEFAULT_LOOKBACK_BOUNDS: (usize, usize) = (1, 24);
pub const DEFAULT_MAX_STALENESS: u32 = 6;
pub const DEFAULT_HIST_BINS: usize = 20;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub enum LookbackChoice {
    Fixed(usize),
    Optimize,
}

impl std::str::FromStr for LookbackChoice {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        let s = s.trim();
        if s == "optimize" {
            return Ok(LookbackChoice::Optimize);
        }
        match s.parse::<usize>() {
            Ok(n) if n > 0 => Ok(LookbackChoice::Fixed(n)),
            _ => Err(Error::Config(format!("lookback must be a positive integer or `optimize`, got `{s}`"))),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct DataPaths {
    pub prices: PathBuf,
    pub fundamentals: PathBuf,
    pub link: PathBuf,
    pub factors: PathBuf,
    /// Trading days; when absent the distinct price dates are used.
    pub calendar: Option<PathBuf>,
    /// Optional long-format daily benchmark returns.
    pub benchmarks: Option<PathBuf>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RunConfig {
    pub data: DataPaths,
    pub universe: UniverseConfig,
    pub max_staleness_months: u32,
    pub signal: SignalConfig,
    pub lookback: LookbackChoice,
    pub lookback_bounds: (usize, usize),
    pub train: Option<(NaiveDate, NaiveDate)>,
    pub test: Option<(NaiveDate, NaiveDate)>,
    pub empty_month: EmptyMonthPolicy,
    pub include_momentum: bool,
    pub powell: PowellOptions,
    pub out_dir: PathBuf,
    pub seed: u64,
    pub hist_bins: usize,
}

#[derive(Debug, Default, Deserialize)]
#[serde(default, deny_unknown_fields)]
struct FileConfig {
    data: DataSection,
    universe: UniverseSection,
    pit: PitSection,
    signal: SignalSection,
    backtest: BacktestSection,
    optimizer: OptimizerSection,
    report: ReportSection,
    out: Option<PathBuf>,
    seed: Option<u64>,
}

#[derive(Debug, Default, Deserialize)]
#[serde(default, deny_unknown_fields)]
struct DataSection {
    prices: Option<PathBuf>,
    fundamentals: Option<PathBuf>,
    link: Option<PathBuf>,
    factors: Option<PathBuf>,
    calendar: Option<PathBuf>,
    benchmarks: Option<PathBuf>,
}

#[derive(Debug, Default, Deserialize)]
#[serde(default, deny_unknown_fields)]
struct UniverseSection {
    mode: Option<String>,
    ids: Vec<String>,
    exclude_sic_from: Option<u16>,
    exclude_sic_to: Option<u16>,
    /// Set to false to keep financials.
    exclude_sic: Option<bool>,
    coverage_start: Option<DateValue>,
    coverage_end: Option<DateValue>,
}

#[derive(Debug, Default, Deserialize)]
#[serde(default, deny_unknown_fields)]
struct PitSection {
    max_staleness_months: Option<u32>,
}

#[derive(Debug, Default, Deserialize)]
#[serde(default, deny_unknown_fields)]
struct SignalSection {
    window: Option<String>,
    min_obs: Option<usize>,
    winsor: Option<[f64; 2]>,
    allow_negative_acv_base: Option<bool>,
    refit_every: Option<usize>,
}

#[derive(Debug, Deserialize)]
#[serde(untagged)]
enum LookbackValue {
    Number(i64),
    Text(String),
}

#[derive(Debug, Default, Deserialize)]
#[serde(default, deny_unknown_fields)]
struct BacktestSection {
    lookback: Option<LookbackValue>,
    lookback_min: Option<usize>,
    lookback_max: Option<usize>,
    empty_month: Option<String>,
    train_start: Option<DateValue>,
    train_end: Option<DateValue>,
    test_start: Option<DateValue>,
    test_end: Option<DateValue>,
}

#[derive(Debug, Default, Deserialize)]
#[serde(default, deny_unknown_fields)]
struct OptimizerSection {
    ftol: Option<f64>,
    xtol: Option<f64>,
    maxiter: Option<usize>,
}

#[derive(Debug, Default, Deserialize)]
#[serde(default, deny_unknown_fields)]
struct ReportSection {
    include_momentum: Option<bool>,
    hist_bins: Option<usize>,
}

/// A date written either as a TOML date or as a string.
#[derive(Debug, Deserialize)]
#[serde(untagged)]
enum DateValue {
    Toml(toml::value::Datetime),
    Text(String),
}

impl DateValue {
    fn to_date(&self) -> Result<NaiveDate> {
        let text = match self {
            DateValue::Toml(d) => d.to_string(),
            DateValue::Text(s) => s.clone(),
        };
        crate::io::parse_date(text.trim()).ok_or_else(|| Error::Config(format!("`{text}` is not a date")))
    }
}

fn pair(start: Option<DateValue>, end: Option<DateValue>, what: &str) -> Result<Option<(NaiveDate, NaiveDate)>> {
    let start = start.map(|d| d.to_date()).transpose()?;
    let end = end.map(|d| d.to_date()).transpose()?;
    match (start, end) {
        (None, None) => Ok(None),
        (Some(s), Some(e)) => Ok(Some((s, e))),
        _ => Err(Error::Config(format!("{what} needs both a start and an end"))),
    }
}

impl RunConfig {
    /// Defaults with inputs named `prices.csv`, `fundamentals.csv`, ... inside `dir`.
    pub fn with_data_dir(dir: &Path) -> Self {
        RunConfig {
            data: DataPaths {
                prices: dir.join("prices.csv"),
                fundamentals: dir.join("fundamentals.csv"),
                link: dir.join("link.csv"),
                factors: dir.join("factors.csv"),
                calendar: Some(dir.join("calendar.csv")).filter(|p| p.exists()),
                benchmarks: Some(dir.join("benchmarks.csv")).filter(|p| p.exists()),
            },
            universe: UniverseConfig::default(),
            max_staleness_months: DEFAULT_MAX_STALENESS,
            signal: SignalConfig::default(),
            lookback: LookbackChoice::Optimize,
            lookback_bounds: DEFAULT_LOOKBACK_BOUNDS,
            train: None,
            test: None,
            empty_month: EmptyMonthPolicy::Zero,
            include_momentum: true,
            powell: PowellOptions::default(),
            out_dir: PathBuf::from("out"),
            seed: 0,
            hist_bins: DEFAULT_HIST_BINS,
        }
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::Config(format!("{}: {e}", path.display())))?;
        let base = path.parent().unwrap_or(Path::new("."));
        Self::from_toml_str(&text, base).map_err(|e| match e {
            Error::Config(m) => Error::Config(format!("{}: {m}", path.display())),
            other => other,
        })
    }

    /// Parse TOML; relative paths are joined onto `base`.
    pub fn from_toml_str(text: &str, base: &Path) -> Result<Self> {
        let file: FileConfig = toml::from_str(text).map_err(|e| Error::Config(e.to_string()))?;
        let mut cfg = RunConfig::with_data_dir(base);
        let resolve = |p: PathBuf| if p.is_absolute() { p } else { base.join(p) };
        let d = file.data;
        if let Some(p) = d.prices {
            cfg.data.prices = resolve(p);
        }
        if let Some(p) = d.fundamentals {
            cfg.data.fundamentals = resolve(p);
        }
        if let Some(p) = d.link {
            cfg.data.link = resolve(p);
        }
        if let Some(p) = d.factors {
            cfg.data.factors = resolve(p);
        }
        if let Some(p) = d.calendar {
            cfg.data.calendar = Some(resolve(p));
        }
        if let Some(p) = d.benchmarks {
            cfg.data.benchmarks = Some(resolve(p));
        }

        let u = file.universe;
        if let Some(m) = u.mode {
            cfg.universe.mode = m.parse()?;
        }
        cfg.universe.ids = u.ids;
        let (lo, hi) = cfg.universe.exclude_sic.unwrap_or((6000, 6799));
        cfg.universe.exclude_sic = Some((u.exclude_sic_from.unwrap_or(lo), u.exclude_sic_to.unwrap_or(hi)));
        if u.exclude_sic == Some(false) {
            cfg.universe.exclude_sic = None;
        }
        cfg.universe.coverage = pair(u.coverage_start, u.coverage_end, "universe coverage")?;

        if let Some(s) = file.pit.max_staleness_months {
            cfg.max_staleness_months = s;
        }

        let s = file.signal;
        if let Some(w) = s.window {
            cfg.signal.window = w.parse::<FitWindow>()?;
        }
        if let Some(n) = s.min_obs {
            cfg.signal.min_obs = n;
        }
        if let Some([lo, hi]) = s.winsor {
            cfg.signal.winsor = (lo, hi);
        }
        if let Some(b) = s.allow_negative_acv_base {
            cfg.signal.allow_negative_acv_base = b;
        }
        if let Some(n) = s.refit_every {
            cfg.signal.refit_every = n;
        }

        let b = file.backtest;
        match b.lookback {
            None => {}
            Some(LookbackValue::Number(n)) if n > 0 => cfg.lookback = LookbackChoice::Fixed(n as usize),
            Some(LookbackValue::Number(n)) => return Err(Error::Config(format!("lookback must be positive, got {n}"))),
            Some(LookbackValue::Text(t)) => cfg.lookback = t.parse()?,
        }
        cfg.lookback_bounds =
            (b.lookback_min.unwrap_or(DEFAULT_LOOKBACK_BOUNDS.0), b.lookback_max.unwrap_or(DEFAULT_LOOKBACK_BOUNDS.1));
        if let Some(p) = b.empty_month {
            cfg.empty_month = p.parse()?;
        }
        cfg.train = pair(b.train_start, b.train_end, "training period")?;
        cfg.test = pair(b.test_start, b.test_end, "test period")?;

        let o = file.optimizer;
        cfg.powell = PowellOptions {
            ftol: o.ftol.unwrap_or(cfg.powell.ftol),
            xtol: o.xtol.unwrap_or(cfg.powell.xtol),
            maxiter: o.maxiter.unwrap_or(cfg.powell.maxiter),
        };
        if let Some(m) = file.report.include_momentum {
            cfg.include_momentum = m;
        }
        if let Some(n) = file.report.hist_bins {
            cfg.hist_bins = n;
        }
        if let Some(out) = file.out {
            cfg.out_dir = resolve(out);
        }
        if let Some(seed) = file.seed {
            cfg.seed = seed;
        }
        Ok(cfg)
    }

    /// Check ranges, periods and that every referenced input exists.
    pub fn validate(&self) -> Result<()> {
        let (lo, hi) = self.signal.winsor;
        if !(0.0 <= lo && lo < hi && hi <= 100.0) {
            return Err(Error::Config(format!("winsor bounds need 0 <= low < high <= 100, got ({lo}, {hi})")));
        }
        if self.signal.refit_every == 0 {
            return Err(Error::Config("signal.refit_every must be at least 1".into()));
        }
        let (a, b) = self.lookback_bounds;
        if a == 0 || a > b {
            return Err(Error::Config(format!("lookback bounds need 1 <= min <= max, got [{a}, {b}]")));
        }
        if self.hist_bins == 0 {
            return Err(Error::Config("report.hist_bins must be at least 1".into()));
        }
        if self.universe.mode == UniverseMode::Handpicked && self.universe.ids.is_empty() {
            return Err(Error::Config("handpicked universe needs universe.ids".into()));
        }
        for (name, period) in [("training", self.train), ("test", self.test)] {
            if let Some((s, e)) = period {
                if s > e {
                    return Err(Error::Config(format!("{name} period starts after it ends")));
                }
            }
        }
        if let (Some((_, train_end)), Some((test_start, _))) = (self.train, self.test) {
            if month_number(train_end) >= month_number(test_start) {
                return Err(Error::Config(format!(
                    "training period ends {train_end}, which does not precede test start {test_start}"
                )));
            }
        }
        let d = &self.data;
        let mut paths = vec![&d.prices, &d.fundamentals, &d.link, &d.factors];
        paths.extend(d.calendar.iter());
        paths.extend(d.benchmarks.iter());
        for p in paths {
            if !p.exists() {
                return Err(Error::Config(format!("input file {} does not exist", p.display())));
            }
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn parses_all_sections() {
        let text = r#"
            out = "results"
            seed = 7
            [data]
            prices = "p.csv"
            [universe]
            mode = "handpicked"
            ids = ["1001", "1002"]
            [pit]
            max_staleness_months = 4
            [signal]
            window = "rolling(36)"
            winsor = [5.0, 95.0]
            [backtest]
            lookback = 6
            empty_month = "risk_free"
            train_start = 2010-01-01
            train_end = 2014-12-31
            test_start = 2015-01-01
            test_end = 2023-12-31
        "#;
        let cfg = RunConfig::from_toml_str(text, Path::new("/data")).unwrap();
        assert_eq!(cfg.data.prices, PathBuf::from("/data/p.csv"));
        assert_eq!(cfg.out_dir, PathBuf::from("/data/results"));
        assert_eq!(cfg.universe.mode, UniverseMode::Handpicked);
        assert_eq!(cfg.max_staleness_months, 4);
        assert_eq!(cfg.signal.window, FitWindow::Rolling(36));
        assert_eq!(cfg.signal.winsor, (5.0, 95.0));
        assert_eq!(cfg.lookback, LookbackChoice::Fixed(6));
        assert_eq!(cfg.empty_month, EmptyMonthPolicy::RiskFree);
        assert_eq!(cfg.seed, 7);
    }

    #[test]
    fn lookback_text_and_unknown_keys() {
        let cfg = RunConfig::from_toml_str("[backtest]\nlookback = \"optimize\"\n", Path::new(".")).unwrap();
        assert_eq!(cfg.lookback, LookbackChoice::Optimize);
        assert!(RunConfig::from_toml_str("[signal]\nwindw = \"x\"\n", Path::new(".")).is_err());
        assert!(RunConfig::from_toml_str("[backtest]\nlookback = 0\n", Path::new(".")).is_err());
    }

    #[test]
    fn overlapping_periods_are_rejected() {
        let text = "[backtest]\ntrain_start = 2010-01-01\ntrain_end = 2015-01-31\ntest_start = 2015-01-01\ntest_end = 2020-12-31\n";
        let cfg = RunConfig::from_toml_str(text, Path::new("/nonexistent")).unwrap();
        match cfg.validate() {
            Err(Error::Config(m)) => assert!(m.contains("does not precede")),
            other => panic!("unexpected {other:?}"),
        }
    }
}
