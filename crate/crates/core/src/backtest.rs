//! Signal-gated hold/exit strategy against buy-and-hold.
//!
//! The strategy holds the index and steps aside the day after a warning:
//! `position[t] = 1 - signal[t - 1]`. Returns are daily log returns in
//! percent, so `expected_return` is the mean daily log return.

use std::io::Write;

use chrono::NaiveDate;
use serde::{Deserialize, Serialize};

use crate::data::{log_returns, PriceSeries};
use crate::error::{Error, Result};
use crate::pipeline::WarningRecord;

#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
#[serde(default)]
pub struct BacktestConfig {
    /// Daily risk-free rate in percent.
    pub rf: f64,
    /// Charged in percent on every day the position changes.
    pub cost: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BacktestResult {
    pub expected_return: f64,
    pub stdev: f64,
    /// `None` when the return series has no variation.
    pub sharpe: Option<f64>,
    pub n_days: usize,
    pub n_exits: usize,
}

fn summarize(returns: &[f64], rf: f64, n_exits: usize) -> Result<BacktestResult> {
    if returns.len() < 2 {
        return Err(Error::InsufficientData {
            needed: 2,
            got: returns.len(),
        });
    }
    let n = returns.len() as f64;
    let mean = returns.iter().sum::<f64>() / n;
    let var = returns.iter().map(|r| (r - mean).powi(2)).sum::<f64>() / (n - 1.0);
    let sd = var.sqrt();
    Ok(BacktestResult {
        expected_return: mean,
        stdev: sd,
        sharpe: (sd > 0.0).then(|| (mean - rf) / sd),
        n_days: returns.len(),
        n_exits,
    })
}

/// Strategy returns from market returns and the positions held on each day.
/// The position before the first day is taken to be invested.
pub fn strategy_returns(market: &[f64], positions: &[u8], cost: f64) -> Result<Vec<f64>> {
    if market.len() != positions.len() {
        return Err(Error::validation(format!(
            "{} returns vs {} positions",
            market.len(),
            positions.len()
        )));
    }
    let mut prev = 1u8;
    Ok(market
        .iter()
        .zip(positions)
        .map(|(&r, &p)| {
            let fee = if p != prev { cost } else { 0.0 };
            prev = p;
            f64::from(p) * r - fee
        })
        .collect())
}

/// `signals` has one entry per price date; the last one has no day to act on.
pub fn run_backtest(prices: &PriceSeries, signals: &[u8], rf: f64) -> Result<BacktestResult> {
    run_backtest_with(prices, signals, &BacktestConfig { rf, cost: 0.0 })
}

pub fn run_backtest_with(prices: &PriceSeries, signals: &[u8], cfg: &BacktestConfig) -> Result<BacktestResult> {
    if signals.len() != prices.len() {
        return Err(Error::validation(format!(
            "{} signals for {} price dates",
            signals.len(),
            prices.len()
        )));
    }
    if signals.iter().any(|&s| s > 1) {
        return Err(Error::validation("signals must be 0 or 1"));
    }
    let market = log_returns(prices)?;
    let positions: Vec<u8> = signals[..signals.len() - 1].iter().map(|s| 1 - s).collect();
    let mut prev = 1u8;
    let exits = positions
        .iter()
        .filter(|&&p| {
            let exit = prev == 1 && p == 0;
            prev = p;
            exit
        })
        .count();
    let r = strategy_returns(market.values(), &positions, cfg.cost)?;
    summarize(&r, cfg.rf, exits)
}

/// Buy-and-hold statistics of the same price series.
pub fn market_portfolio(prices: &PriceSeries, rf: f64) -> Result<BacktestResult> {
    summarize(log_returns(prices)?.values(), rf, 0)
}

/// Warning signals placed on `dates` by decision day; days without a
/// record (or with a suppressed one) carry no warning.
pub fn signals_on_dates(dates: &[NaiveDate], records: &[WarningRecord]) -> Vec<u8> {
    let mut out = vec![0u8; dates.len()];
    for r in records {
        if let Ok(i) = dates.binary_search(&r.date) {
            out[i] = r.signal;
        }
    }
    out
}

/// One row of the strategy comparison table.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TableRow {
    pub model: String,
    pub expected_return: f64,
    pub stdev: f64,
    pub sharpe: Option<f64>,
}

impl TableRow {
    pub fn new(model: impl Into<String>, r: &BacktestResult) -> TableRow {
        TableRow {
            model: model.into(),
            expected_return: r.expected_return,
            stdev: r.stdev,
            sharpe: r.sharpe,
        }
    }
}

/// Delimited table: `model,expected_return,stdev,sharpe`, three decimals.
/// An undefined Sharpe ratio is written as `NA`.
pub fn write_table<W: Write>(rows: &[TableRow], writer: W) -> Result<()> {
    let mut w = csv::Writer::from_writer(writer);
    w.write_record(["model", "expected_return", "stdev", "sharpe"])?;
    for r in rows {
        w.write_record([
            r.model.clone(),
            format!("{:.3}", r.expected_return),
            format!("{:.3}", r.stdev),
            r.sharpe.map_or("NA".into(), |s| format!("{s:.3}")),
        ])?;
    }
    w.flush()?;
    Ok(())
}
