//! Identifier newtypes, month arithmetic and the diagnostics collector.

use std::collections::BTreeMap;
use std::fmt;

use chrono::{Datelike, NaiveDate};
use serde::{Deserialize, Serialize};

/// Security identifier (the CRSP PERMNO role).
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(transparent)]
pub struct SecurityId(pub String);

/// Firm identifier (the Compustat GVKEY role).
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(transparent)]
pub struct FirmId(pub String);

impl SecurityId {
    pub fn new(id: impl Into<String>) -> Self {
        SecurityId(id.into())
    }
    pub fn as_str(&self) -> &str {
        &self.0
    }
}

impl FirmId {
    pub fn new(id: impl Into<String>) -> Self {
        FirmId(id.into())
    }
    pub fn as_str(&self) -> &str {
        &self.0
    }
}

impl fmt::Display for SecurityId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.0)
    }
}

impl fmt::Display for FirmId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.0)
    }
}

/// Absolute month number (`year * 12 + month0`), used to measure gaps in calendar months.
pub fn month_number(date: NaiveDate) -> i32 {
    date.year() * 12 + date.month0() as i32
}

/// Number of calendar months from `earlier` to `later` (negative if reversed).
pub fn months_between(earlier: NaiveDate, later: NaiveDate) -> i32 {
    month_number(later) - month_number(earlier)
}

/// True when `later` falls in the calendar month immediately after `earlier`.
pub fn is_next_month(earlier: NaiveDate, later: NaiveDate) -> bool {
    months_between(earlier, later) == 1
}

/// Categories of non-fatal data problems encountered while processing.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum DiagnosticKind {
    DuplicateRow,
    NegativePrice,
    MissingPrice,
    NonPositiveAdjustment,
    TotalLossReturn,
    MissingReportDate,
    InvalidFiling,
    FilingAfterCalendar,
    StaleFundamentals,
    MissingCriticalField,
    ImputedZero,
    NonPositiveLaggedCap,
    DegenerateDenominator,
    NonFiniteRegressor,
    MissingLaggedEquity,
    MissingRiskFree,
    MissingNextReturn,
    EmptyPortfolio,
    ZeroVarianceRegressor,
    SmallAcvBase,
    NegativeAcvBase,
    NoFit,
}

/// A single non-fatal event, kept for audit trails.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Diagnostic {
    pub kind: DiagnosticKind,
    pub message: String,
}

/// Collects diagnostics and keeps per-kind counts for reports.
///
/// Messages beyond `max_messages` are counted but not stored.
#[derive(Debug, Clone, Default, Serialize)]
pub struct Diagnostics {
    counts: BTreeMap<DiagnosticKind, usize>,
    messages: Vec<Diagnostic>,
    #[serde(skip)]
    max_messages: Option<usize>,
}

impl Diagnostics {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn with_message_limit(limit: usize) -> Self {
        Diagnostics { max_messages: Some(limit), ..Self::default() }
    }

    pub fn push(&mut self, kind: DiagnosticKind, message: impl Into<String>) {
        *self.counts.entry(kind).or_insert(0) += 1;
        if self.max_messages.is_none_or(|m| self.messages.len() < m) {
            self.messages.push(Diagnostic { kind, message: message.into() });
        }
    }

    pub fn count(&self, kind: DiagnosticKind) -> usize {
        self.counts.get(&kind).copied().unwrap_or(0)
    }

    pub fn counts(&self) -> &BTreeMap<DiagnosticKind, usize> {
        &self.counts
    }

    pub fn messages(&self) -> &[Diagnostic] {
        &self.messages
    }

    pub fn is_empty(&self) -> bool {
        self.counts.is_empty()
    }

    pub fn merge(&mut self, other: Diagnostics) {
        for (k, v) in other.counts {
            *self.counts.entry(k).or_insert(0) += v;
        }
        for m in other.messages {
            if self.max_messages.is_none_or(|l| self.messages.len() < l) {
                self.messages.push(m);
            }
        }
    }

    /// Log a one-line summary per kind at warn level.
    pub fn log_summary(&self, stage: &str) {
        for (kind, n) in &self.counts {
            log::warn!("{stage}: {n} x {kind:?}");
        }
    }
}
