//! Cash-productivity signal construction and monthly backtesting.
//!
//! The pipeline runs from daily prices and quarterly filings through a
//! point-in-time firm-month panel, a pooled cash-value regression, a
//! cross-sectional cash-return signal, signal-weighted long-only portfolios,
//! lookback optimization and performance attribution.

// `!(x > 0.0)` is used on purpose so that NaN fails the check too.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod backtest;
pub mod calendar;
pub mod config;
pub mod error;
pub mod factors;
pub mod fundamentals;
pub mod io;
pub mod ols;
pub mod optimize;
pub mod panel;
pub mod performance;
pub mod pipeline;
pub mod prices;
pub mod signal;
pub mod synthetic;
pub mod types;
pub mod universe;

pub use backtest::{run_backtest, BacktestConfig, BacktestResult, EmptyMonthPolicy, SignalPanel};
pub use calendar::TradingCalendar;
pub use config::{LookbackChoice, RunConfig};
pub use error::{Error, ErrorClass, Result};
pub use ols::{fit_ols, DesignMatrix, RegressionFit};
pub use optimize::{optimize_lookback, powell_minimize, OptimizationResult, PowellOptions};
pub use panel::FirmMonthRow;
pub use pipeline::RawData;
pub use signal::{SignalConfig, SignalSeries};
pub use types::{Diagnostic, DiagnosticKind, Diagnostics, FirmId, SecurityId};
