//! Security/firm link table and universe selection.

use std::collections::{BTreeMap, BTreeSet};

use chrono::NaiveDate;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::fundamentals::QuarterlyFiling;
use crate::prices::MonthlyEquityRow;
use crate::types::{month_number, FirmId, SecurityId};

/// One row of the firm/security link table.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct LinkRow {
    pub firm_id: FirmId,
    pub security_id: SecurityId,
    pub sic_code: u16,
    /// `None` means the link has no recorded start.
    pub link_start: Option<NaiveDate>,
    /// `None` means the link is still active.
    pub link_end: Option<NaiveDate>,
}

impl LinkRow {
    pub fn is_active(&self, date: NaiveDate) -> bool {
        self.link_start.is_none_or(|s| s <= date) && self.link_end.is_none_or(|e| date <= e)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "lowercase")]
pub enum UniverseMode {
    /// Every linked non-financial firm in the input files.
    #[default]
    Nasdaq,
    /// Only the explicitly listed ids (matched against firm or security id).
    Handpicked,
}

impl std::str::FromStr for UniverseMode {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "nasdaq" => Ok(UniverseMode::Nasdaq),
            "handpicked" => Ok(UniverseMode::Handpicked),
            other => Err(Error::Config(format!("unknown universe mode `{other}`"))),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct UniverseConfig {
    pub mode: UniverseMode,
    pub ids: Vec<String>,
    /// Inclusive SIC range to exclude (financials by default).
    pub exclude_sic: Option<(u16, u16)>,
    /// Require price coverage spanning this inclusive month range.
    pub coverage: Option<(NaiveDate, NaiveDate)>,
}

impl Default for UniverseConfig {
    fn default() -> Self {
        UniverseConfig { mode: UniverseMode::Nasdaq, ids: Vec::new(), exclude_sic: Some((6000, 6799)), coverage: None }
    }
}

/// Per-filter exclusion counts, in the order the filters are applied.
#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize)]
pub struct UniverseReport {
    pub links_in: usize,
    pub excluded_sic: usize,
    pub excluded_not_selected: usize,
    pub excluded_no_fundamentals: usize,
    pub excluded_no_prices: usize,
    pub excluded_coverage: usize,
    pub admitted_links: usize,
    pub admitted_pairs: usize,
}

impl UniverseReport {
    fn summary(&self) -> String {
        format!(
            "links {}, sic {}, not selected {}, no fundamentals {}, no prices {}, coverage {}",
            self.links_in,
            self.excluded_sic,
            self.excluded_not_selected,
            self.excluded_no_fundamentals,
            self.excluded_no_prices,
            self.excluded_coverage
        )
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Universe {
    /// Admitted link rows; a pair may appear more than once with different date ranges.
    pub links: Vec<LinkRow>,
    pub report: UniverseReport,
}

impl Universe {
    pub fn pairs(&self) -> BTreeSet<(FirmId, SecurityId)> {
        self.links.iter().map(|l| (l.firm_id.clone(), l.security_id.clone())).collect()
    }

    /// Links grouped by firm for quick lookup during panel assembly.
    pub fn links_by_firm(&self) -> BTreeMap<FirmId, Vec<LinkRow>> {
        let mut map: BTreeMap<FirmId, Vec<LinkRow>> = BTreeMap::new();
        for l in &self.links {
            map.entry(l.firm_id.clone()).or_default().push(l.clone());
        }
        map
    }
}

pub fn is_excluded_sic(sic: u16, range: Option<(u16, u16)>) -> bool {
    range.is_some_and(|(lo, hi)| (lo..=hi).contains(&sic))
}

/// Apply the SIC exclusion, selection mode, data-availability and coverage filters.
pub fn filter_universe(
    links: &[LinkRow],
    filings: &[QuarterlyFiling],
    equity: &[MonthlyEquityRow],
    config: &UniverseConfig,
) -> Result<Universe> {
    let firms_with_filings: BTreeSet<&FirmId> = filings.iter().map(|f| &f.firm_id).collect();
    let mut spans: BTreeMap<&SecurityId, (NaiveDate, NaiveDate)> = BTreeMap::new();
    for row in equity {
        spans
            .entry(&row.security_id)
            .and_modify(|(lo, hi)| {
                *lo = (*lo).min(row.month_end);
                *hi = (*hi).max(row.month_end);
            })
            .or_insert((row.month_end, row.month_end));
    }
    let wanted: BTreeSet<&str> = config.ids.iter().map(String::as_str).collect();

    let mut report = UniverseReport { links_in: links.len(), ..Default::default() };
    let mut admitted = Vec::new();
    for link in links {
        if is_excluded_sic(link.sic_code, config.exclude_sic) {
            report.excluded_sic += 1;
            continue;
        }
        if config.mode == UniverseMode::Handpicked
            && !wanted.contains(link.firm_id.as_str())
            && !wanted.contains(link.security_id.as_str())
        {
            report.excluded_not_selected += 1;
            continue;
        }
        if !firms_with_filings.contains(&link.firm_id) {
            report.excluded_no_fundamentals += 1;
            continue;
        }
        let Some(&(first, last)) = spans.get(&link.security_id) else {
            report.excluded_no_prices += 1;
            continue;
        };
        if let Some((from, to)) = config.coverage {
            if month_number(first) > month_number(from) || month_number(last) < month_number(to) {
                report.excluded_coverage += 1;
                continue;
            }
        }
        admitted.push(link.clone());
    }
    report.admitted_links = admitted.len();
    let mut universe = Universe { links: admitted, report };
    universe.report.admitted_pairs = universe.pairs().len();
    if universe.report.admitted_pairs == 0 {
        return Err(Error::EmptyUniverse { summary: universe.report.summary() });
    }
    Ok(universe)
}
