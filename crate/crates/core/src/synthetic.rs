//! Seeded synthetic data for tests, benchmarks and demos.
//!
//! [`SyntheticMarket`] produces raw inputs in the same shape the file readers
//! return; [`write_inputs`] writes them as CSV files. The planted generators
//! produce inputs with known regression coefficients.

use std::collections::BTreeMap;
use std::path::Path;

use chrono::{Datelike, Days, NaiveDate, Weekday};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};

use crate::error::Result;
use crate::factors::{DailyFactorRow, FactorMonth};
use crate::fundamentals::QuarterlyFiling;
use crate::io::{fmt_num, CsvOut};
use crate::panel::{FilingValues, FirmMonthRow, N_REGRESSORS};
use crate::pipeline::RawData;
use crate::prices::DailyPriceBar;
use crate::types::{FirmId, SecurityId};
use crate::universe::LinkRow;

fn normal(mean: f64, sd: f64) -> Normal<f64> {
    Normal::new(mean, sd).expect("valid normal parameters")
}

/// Weekdays from `start` to `end` inclusive, without Jan 1, Jul 4 and Dec 25.
pub fn weekday_calendar(start: NaiveDate, end: NaiveDate) -> Vec<NaiveDate> {
    start
        .iter_days()
        .take_while(|d| *d <= end)
        .filter(|d| !matches!(d.weekday(), Weekday::Sat | Weekday::Sun))
        .filter(|d| !matches!((d.month(), d.day()), (1, 1) | (7, 4) | (12, 25)))
        .collect()
}

/// Shape of a generated market.
#[derive(Debug, Clone)]
pub struct SyntheticMarket {
    pub n_firms: usize,
    pub start: NaiveDate,
    pub end: NaiveDate,
    pub seed: u64,
    /// Fraction of firms given a financial SIC code.
    pub financial_share: f64,
    /// Fraction of firms that list after `start` or delist before `end`.
    pub partial_history_share: f64,
    /// Add a daily benchmark series besides the market.
    pub with_benchmark: bool,
}

impl SyntheticMarket {
    pub fn new(n_firms: usize, start: NaiveDate, end: NaiveDate, seed: u64) -> Self {
        SyntheticMarket {
            n_firms,
            start,
            end,
            seed,
            financial_share: 0.1,
            partial_history_share: 0.2,
            with_benchmark: true,
        }
    }

    pub fn generate(&self) -> RawData {
        let mut rng = ChaCha8Rng::seed_from_u64(self.seed);
        let days = weekday_calendar(self.start, self.end);
        let factors = daily_factors(&days, &mut rng);
        let mut prices = Vec::with_capacity(self.n_firms * days.len());
        let mut filings = Vec::new();
        let mut links = Vec::with_capacity(self.n_firms);
        const SICS: [u16; 8] = [2834, 3571, 3674, 3845, 4813, 5812, 7372, 7389];
        for i in 0..self.n_firms {
            let firm = FirmId::new(format!("{:06}", 1001 + i));
            let security = SecurityId::new(format!("{}", 10001 + i));
            let sic = if rng.random::<f64>() < self.financial_share {
                rng.random_range(6000..=6799)
            } else {
                SICS[rng.random_range(0..SICS.len())]
            };
            let (first, last) = if rng.random::<f64>() < self.partial_history_share {
                let cut = rng.random_range(0..days.len() / 2);
                if rng.random::<bool>() {
                    (cut, days.len() - 1)
                } else {
                    (0, days.len() - 1 - cut)
                }
            } else {
                (0, days.len() - 1)
            };
            links.push(LinkRow {
                firm_id: firm.clone(),
                security_id: security.clone(),
                sic_code: sic,
                link_start: Some(days[first]),
                link_end: if last + 1 < days.len() { Some(days[last]) } else { None },
            });
            let firm_days = &days[first..=last];
            let firm_factors = &factors[first..=last];
            let caps = firm_prices(&security, firm_days, firm_factors, &mut rng, &mut prices);
            firm_filings(&firm, firm_days, &caps, &mut rng, &mut filings);
        }
        let mut benchmarks = BTreeMap::new();
        if self.with_benchmark {
            let noise = normal(0.0, 0.002);
            let series =
                factors.iter().map(|f| (f.date, 1.1 * (f.mkt_excess + f.rf) + noise.sample(&mut rng))).collect();
            benchmarks.insert("tech_composite".to_string(), series);
        }
        RawData { calendar_days: days, prices, filings, links, factors, benchmarks }
    }
}

fn daily_factors(days: &[NaiveDate], rng: &mut ChaCha8Rng) -> Vec<DailyFactorRow> {
    let mkt = normal(0.0003, 0.01);
    let style = normal(0.0, 0.005);
    days.iter()
        .map(|&date| DailyFactorRow {
            date,
            mkt_excess: mkt.sample(rng),
            smb: style.sample(rng),
            hml: style.sample(rng),
            umd: Some(style.sample(rng)),
            rf: 0.00008,
        })
        .collect()
}

/// Append daily bars for one security; returns the market cap on each day.
fn firm_prices(
    security: &SecurityId,
    days: &[NaiveDate],
    factors: &[DailyFactorRow],
    rng: &mut ChaCha8Rng,
    out: &mut Vec<DailyPriceBar>,
) -> Vec<f64> {
    let beta = rng.random_range(0.6..1.6);
    let size_load = rng.random_range(-0.5..1.0);
    let idio = normal(0.0002, rng.random_range(0.01..0.03));
    let mut price: f64 = rng.random_range(5.0..120.0);
    let shares: f64 = rng.random_range(2_000.0..200_000.0);
    let split_at = (rng.random::<f64>() < 0.1).then(|| rng.random_range(1..days.len().max(2)));
    let mut caps = Vec::with_capacity(days.len());
    for (k, (&date, f)) in days.iter().zip(factors).enumerate() {
        let ret = if k == 0 {
            None
        } else {
            let r = (f.rf + beta * f.mkt_excess + size_load * f.smb + idio.sample(rng)).max(-0.5);
            price *= 1.0 + r;
            Some(r)
        };
        // Before a 2:1 split raw prices are doubled and raw shares halved.
        let factor = match split_at {
            Some(s) if k < s => 2.0,
            _ => 1.0,
        };
        let mut raw_price = price * factor;
        if rng.random::<f64>() < 0.001 {
            raw_price = -raw_price;
        }
        caps.push(price * shares);
        out.push(DailyPriceBar {
            security_id: security.clone(),
            date,
            raw_price: Some(raw_price),
            daily_return: ret,
            shares_outstanding: Some(shares / factor),
            cfacpr: Some(factor),
            cfacshr: Some(factor),
        });
    }
    caps
}

fn quarter_end(year: i32, quarter: u32) -> NaiveDate {
    let month = quarter * 3;
    let next =
        if month == 12 { NaiveDate::from_ymd_opt(year + 1, 1, 1) } else { NaiveDate::from_ymd_opt(year, month + 1, 1) };
    next.and_then(|d| d.pred_opt()).expect("valid quarter end")
}

/// Quarterly filings reported 25 to 50 days after each fiscal quarter end.
fn firm_filings(firm: &FirmId, days: &[NaiveDate], caps: &[f64], rng: &mut ChaCha8Rng, out: &mut Vec<QuarterlyFiling>) {
    let (Some(&first), Some(&last)) = (days.first(), days.last()) else {
        return;
    };
    let book_to_market = rng.random_range(0.3..1.2);
    let mut cash_ratio: f64 = rng.random_range(0.05..0.4);
    let debt_ratio: f64 = rng.random_range(0.0..0.5);
    let pays_dividends = rng.random::<bool>();
    let shock = normal(0.0, 0.03);
    let mut assets = caps[0] * book_to_market;
    let mut year = first.year();
    let mut quarter = 1;
    loop {
        let qe = quarter_end(year, quarter);
        let rdq = qe + Days::new(rng.random_range(25..=50));
        if rdq > last {
            break;
        }
        if qe >= first {
            let idx = days.partition_point(|d| *d <= qe).saturating_sub(1);
            let cap = caps[idx];
            assets = 0.8 * assets + 0.2 * cap * book_to_market;
            cash_ratio = (cash_ratio + shock.sample(rng)).clamp(0.01, 0.6);
            let earnings = assets * (0.01 + 0.5 * shock.sample(rng));
            let debt = assets * debt_ratio;
            out.push(QuarterlyFiling {
                firm_id: firm.clone(),
                report_date: rdq,
                total_assets: Some(assets),
                cash_holdings: Some(assets * cash_ratio),
                total_debt: (rng.random::<f64>() > 0.05).then_some(debt),
                earnings: Some(earnings),
                rnd_expense: (rng.random::<f64>() > 0.2).then(|| assets * rng.random_range(0.0..0.02)),
                interest_expense: Some(debt * 0.012),
                dividends_paid: Some(if pays_dividends { earnings.max(0.0) * 0.3 } else { 0.0 }),
            });
        }
        quarter += 1;
        if quarter == 5 {
            quarter = 1;
            year += 1;
        }
    }
}

fn opt(v: Option<f64>) -> String {
    v.map(fmt_num).unwrap_or_default()
}

/// Write `calendar.csv`, `prices.csv`, `fundamentals.csv`, `link.csv`,
/// `factors.csv` and, when present, `benchmarks.csv` into `dir`.
pub fn write_inputs(raw: &RawData, dir: &Path) -> Result<()> {
    let mut cal = CsvOut::new(dir.join("calendar.csv"), &["date"]);
    for d in &raw.calendar_days {
        cal.row([d.to_string()]);
    }
    cal.finish()?;
    let mut prices =
        CsvOut::new(dir.join("prices.csv"), &["permno", "date", "prc", "ret", "shrout", "cfacpr", "cfacshr"]);
    for b in &raw.prices {
        prices.row([
            b.security_id.as_str().to_string(),
            b.date.to_string(),
            opt(b.raw_price),
            opt(b.daily_return),
            opt(b.shares_outstanding),
            opt(b.cfacpr),
            opt(b.cfacshr),
        ]);
    }
    prices.finish()?;
    let mut fund = CsvOut::new(
        dir.join("fundamentals.csv"),
        &["gvkey", "rdq", "atq", "cheq", "dlttq", "ibq", "xrdq", "xintq", "dvq"],
    );
    for f in &raw.filings {
        fund.row([
            f.firm_id.as_str().to_string(),
            f.report_date.to_string(),
            opt(f.total_assets),
            opt(f.cash_holdings),
            opt(f.total_debt),
            opt(f.earnings),
            opt(f.rnd_expense),
            opt(f.interest_expense),
            opt(f.dividends_paid),
        ]);
    }
    fund.finish()?;
    let mut link = CsvOut::new(dir.join("link.csv"), &["gvkey", "permno", "sic", "linkdt", "linkenddt"]);
    for l in &raw.links {
        link.row([
            l.firm_id.as_str().to_string(),
            l.security_id.as_str().to_string(),
            l.sic_code.to_string(),
            l.link_start.map(|d| d.to_string()).unwrap_or_default(),
            l.link_end.map(|d| d.to_string()).unwrap_or_default(),
        ]);
    }
    link.finish()?;
    let mut fac = CsvOut::new(dir.join("factors.csv"), &["date", "mktrf", "smb", "hml", "umd", "rf"]);
    for f in &raw.factors {
        fac.row([f.date.to_string(), fmt_num(f.mkt_excess), fmt_num(f.smb), fmt_num(f.hml), opt(f.umd), fmt_num(f.rf)]);
    }
    fac.finish()?;
    if !raw.benchmarks.is_empty() {
        let mut bench = CsvOut::new(dir.join("benchmarks.csv"), &["date", "series", "ret"]);
        for (name, series) in &raw.benchmarks {
            for (d, r) in series {
                bench.row([d.to_string(), name.clone(), fmt_num(*r)]);
            }
        }
        bench.finish()?;
    }
    Ok(())
}

/// Month ends (last calendar day) of `n` consecutive months starting at `first`.
pub fn calendar_month_ends(first: NaiveDate, n: usize) -> Vec<NaiveDate> {
    let mut out = Vec::with_capacity(n);
    let (mut y, mut m) = (first.year(), first.month());
    for _ in 0..n {
        let next = if m == 12 { NaiveDate::from_ymd_opt(y + 1, 1, 1) } else { NaiveDate::from_ymd_opt(y, m + 1, 1) };
        out.push(next.and_then(|d| d.pred_opt()).expect("valid month"));
        if m == 12 {
            y += 1;
            m = 1;
        } else {
            m += 1;
        }
    }
    out
}

/// Typical standard deviations of the eleven regressors; the interaction
/// terms are derived from the draws instead.
const REGRESSOR_SCALES: [f64; 9] = [0.05, 0.03, 0.08, 0.005, 0.003, 0.003, 0.0, 0.0, 0.1];

/// Firm-month rows whose excess return is `alpha + gamma . x + N(0, sigma)`.
///
/// Lagged cash and leverage are uniform on `[0.02, 0.5]` and `[0, 0.8]`; the
/// two interaction terms are products of the drawn change in cash with a
/// lagged-to-current size ratio and with leverage.
pub fn planted_fw_panel(
    n_firms: usize,
    n_months: usize,
    alpha: f64,
    gamma: &[f64; N_REGRESSORS],
    sigma: f64,
    rng: &mut impl Rng,
) -> Vec<FirmMonthRow> {
    let months = calendar_month_ends(NaiveDate::from_ymd_opt(2000, 1, 1).expect("date"), n_months);
    let noise = normal(0.0, sigma);
    let values = FilingValues {
        report_date: months[0],
        total_assets: 1.0,
        cash_holdings: 0.1,
        total_debt: 0.0,
        earnings: 0.0,
        rnd_expense: 0.0,
        interest_expense: 0.0,
        dividends_paid: 0.0,
    };
    let mut rows = Vec::with_capacity(n_firms * n_months);
    for &month_end in &months {
        for f in 0..n_firms {
            let mut x = [0.0; N_REGRESSORS];
            for (j, s) in REGRESSOR_SCALES.iter().enumerate() {
                if *s > 0.0 {
                    x[j] = normal(0.0, *s).sample(rng);
                }
            }
            x[6] = rng.random_range(0.02..0.5);
            x[7] = rng.random_range(0.0..0.8);
            let size_ratio: f64 = rng.random_range(0.7..1.4);
            x[9] = x[0] * size_ratio;
            x[10] = x[7] * x[0] * size_ratio;
            let y = alpha + gamma.iter().zip(&x).map(|(g, v)| g * v).sum::<f64>() + noise.sample(rng);
            rows.push(FirmMonthRow {
                firm_id: FirmId::new(format!("F{f:05}")),
                security_id: SecurityId::new(format!("{}", 10001 + f)),
                month_end,
                monthly_return: y,
                risk_free: 0.0,
                excess_return: y,
                market_cap: 1.0,
                lagged_market_cap: 1.0,
                fundamentals: values,
                lagged_fundamentals: values,
                regressors: x,
            });
        }
    }
    rows
}

/// Monthly factors and excess returns `alpha + beta . factors + N(0, sigma)`.
///
/// Factor draws are normal with monthly-sized moments; momentum is included
/// when `beta` has four entries.
pub fn planted_factor_returns(
    n_months: usize,
    alpha: f64,
    beta: &[f64],
    sigma: f64,
    rng: &mut impl Rng,
) -> (Vec<(NaiveDate, f64)>, BTreeMap<NaiveDate, FactorMonth>) {
    let months = calendar_month_ends(NaiveDate::from_ymd_opt(2010, 1, 1).expect("date"), n_months);
    let mkt = normal(0.006, 0.045);
    let style = normal(0.0, 0.03);
    let noise = normal(0.0, sigma);
    let mut excess = Vec::with_capacity(n_months);
    let mut factors = BTreeMap::new();
    for m in months {
        let f = FactorMonth {
            mkt: mkt.sample(rng),
            smb: style.sample(rng),
            hml: style.sample(rng),
            umd: Some(style.sample(rng)),
            rf: 0.001,
        };
        let x = [f.mkt, f.smb, f.hml, f.umd.unwrap_or(0.0)];
        let y = alpha + beta.iter().zip(x).map(|(b, v)| b * v).sum::<f64>() + noise.sample(rng);
        excess.push((m, y));
        factors.insert(m, f);
    }
    (excess, factors)
}

/// A seeded RNG for callers that do not carry their own.
pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}
