//! `cashfactor` command-line interface.

use std::path::PathBuf;
use std::process::ExitCode;

use cashfactor::config::{LookbackChoice, RunConfig};
use cashfactor::pipeline;
use cashfactor::universe::UniverseMode;
use cashfactor::{Error, Result};
use chrono::NaiveDate;
use clap::{Args, Parser, Subcommand};

const DEFAULTS: &str = "\
Defaults (overridden by the config file, then by flags):
  data files           prices.csv, fundamentals.csv, link.csv, factors.csv in --data
                       (calendar.csv and benchmarks.csv are used when present)
  universe             nasdaq, excluding SIC 6000-6799
  max staleness        6 months of forward-filled fundamentals
  signal window        expanding, refit every month, min_obs 60
  winsor               1,99
  lookback             optimize over [1, 24] on the training period
  empty month          zero return
  report               momentum factor included, 20 histogram bins
  out                  out/

Environment:
  CASHFACTOR_LOG       log level filter (error, warn, info, debug, trace); default info

Exit codes: 0 success, 2 configuration error, 3 data or schema error, 4 numerical failure";

#[derive(Debug, Parser)]
#[command(name = "cashfactor", version, about = "Cash-productivity signal backtester", after_help = DEFAULTS)]
struct Cli {
    #[command(subcommand)]
    command: Command,
    #[command(flatten)]
    opts: Overrides,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Build the point-in-time firm-month panel and an ingestion report.
    Ingest,
    /// Compute the cash-return signal.
    Signal,
    /// Run the strategy and write returns, holdings, performance and plot data.
    Backtest,
    /// Choose the lookback on the training period.
    Optimize,
    /// Rebuild performance and plot data from saved backtest returns.
    Report,
}

#[derive(Debug, Args)]
struct Overrides {
    /// TOML configuration file.
    #[arg(long, global = true, value_name = "PATH")]
    config: Option<PathBuf>,
    /// Directory holding the input files when no config file is given.
    #[arg(long, global = true, value_name = "DIR")]
    data: Option<PathBuf>,
    /// Fixed lookback in months, or `optimize`.
    #[arg(long, global = true, value_name = "N|optimize")]
    lookback: Option<LookbackChoice>,
    #[arg(long, global = true, value_name = "YYYY-MM-DD")]
    train_start: Option<NaiveDate>,
    #[arg(long, global = true, value_name = "YYYY-MM-DD")]
    train_end: Option<NaiveDate>,
    #[arg(long, global = true, value_name = "YYYY-MM-DD")]
    test_start: Option<NaiveDate>,
    #[arg(long, global = true, value_name = "YYYY-MM-DD")]
    test_end: Option<NaiveDate>,
    /// Winsorization percentiles.
    #[arg(long, global = true, value_name = "LOW,HIGH", value_parser = parse_winsor)]
    winsor: Option<(f64, f64)>,
    /// Output directory.
    #[arg(long, global = true, value_name = "DIR")]
    out: Option<PathBuf>,
    #[arg(long, global = true, value_name = "nasdaq|handpicked")]
    universe: Option<UniverseMode>,
}

fn parse_winsor(s: &str) -> std::result::Result<(f64, f64), String> {
    let (lo, hi) = s.split_once(',').ok_or("expected LOW,HIGH")?;
    let num = |t: &str| t.trim().parse::<f64>().map_err(|e| format!("`{t}`: {e}"));
    Ok((num(lo)?, num(hi)?))
}

fn pair(
    start: Option<NaiveDate>,
    end: Option<NaiveDate>,
    current: Option<(NaiveDate, NaiveDate)>,
    what: &str,
) -> Result<Option<(NaiveDate, NaiveDate)>> {
    match (start.or(current.map(|p| p.0)), end.or(current.map(|p| p.1))) {
        (Some(s), Some(e)) => Ok(Some((s, e))),
        (None, None) => Ok(None),
        _ => Err(Error::Config(format!("{what} period needs both a start and an end"))),
    }
}

fn build_config(o: &Overrides) -> Result<RunConfig> {
    let mut cfg = match &o.config {
        Some(path) => RunConfig::load(path)?,
        None => {
            let dir = o.data.clone().unwrap_or_else(|| PathBuf::from("."));
            let mut cfg = RunConfig::with_data_dir(&dir);
            cfg.out_dir = dir.join("out");
            cfg
        }
    };
    if o.config.is_some() && o.data.is_some() {
        return Err(Error::Config("--data cannot be combined with --config".into()));
    }
    if let Some(l) = o.lookback {
        cfg.lookback = l;
    }
    cfg.train = pair(o.train_start, o.train_end, cfg.train, "training")?;
    cfg.test = pair(o.test_start, o.test_end, cfg.test, "test")?;
    if let Some(w) = o.winsor {
        cfg.signal.winsor = w;
    }
    if let Some(out) = &o.out {
        cfg.out_dir = out.clone();
    }
    if let Some(u) = o.universe {
        cfg.universe.mode = u;
    }
    cfg.validate()?;
    Ok(cfg)
}

fn run(cli: &Cli) -> Result<Vec<PathBuf>> {
    let cfg = build_config(&cli.opts)?;
    log::debug!("configuration: {cfg:?}");
    match cli.command {
        Command::Ingest => pipeline::cmd_ingest(&cfg),
        Command::Signal => pipeline::cmd_signal(&cfg),
        Command::Backtest => pipeline::cmd_backtest(&cfg),
        Command::Optimize => pipeline::cmd_optimize(&cfg),
        Command::Report => pipeline::cmd_report(&cfg),
    }
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::new().filter_or("CASHFACTOR_LOG", "info"))
        .format_timestamp(None)
        .init();
    let cli = Cli::parse();
    match run(&cli) {
        Ok(paths) => {
            for p in paths {
                println!("{}", p.display());
            }
            ExitCode::SUCCESS
        }
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.class().exit_code() as u8)
        }
    }
}
