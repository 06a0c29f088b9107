//! Synthetic market panels with known regimes.
//!
//! Returns come from [`simulate_swarch`]; the explanatory columns are
//! mean-reverting levels loosely tied to the return path so that the panel has the
//! same shape as a real one (three price-derived columns, four daily and
//! four monthly macro series).

use chrono::{Datelike, NaiveDate};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};

use crate::data::{
    build_feature_panel, business_days, compound_prices, default_start, DatedColumn, FeaturePanel, PriceSeries,
};
use crate::error::Result;
use crate::regime::{simulate_swarch, SimulatedPath, SwarchParams};
use crate::seed::derive_seed;

pub const DAILY_COLUMNS: [&str; 4] = ["foreign_index", "exchange_rate", "gold", "oil"];
pub const MONTHLY_COLUMNS: [&str; 4] = ["interest_rate", "m1", "m2", "cpi"];
/// Name of the ground-truth column written next to synthetic panels.
pub const STATE_COLUMN: &str = "state";

const DAILY_PHI: f64 = 0.98;
const MONTHLY_PHI: f64 = 0.8;

#[derive(Debug, Clone)]
pub struct SyntheticPanel {
    /// Eleven explanatory columns, no ground truth.
    pub panel: FeaturePanel,
    pub prices: PriceSeries,
    /// 1 where the simulated regime is the high-volatility one, per panel row.
    pub states: Vec<u8>,
    pub path: SimulatedPath,
}

impl SyntheticPanel {
    /// The panel with the ground-truth column appended.
    pub fn with_states(&self) -> Result<FeaturePanel> {
        self.panel
            .clone()
            .with_column(STATE_COLUMN, self.states.iter().map(|&s| f64::from(s)).collect())
    }
}

fn normal(sd: f64) -> Normal<f64> {
    Normal::new(0.0, sd).expect("positive standard deviation")
}

/// Log-level AR(1) around `ln(start)` driven by `steps` plus noise (both in
/// percent). Mean reversion keeps the level inside a band, so the series
/// look like index levels over a few years without trending off to values
/// the training range never saw.
fn mean_reverting(rng: &mut ChaCha8Rng, start: f64, steps: &[f64], noise: f64, phi: f64) -> Vec<f64> {
    let dist = normal(noise);
    let anchor = start.ln();
    let mut dev = 0.0;
    steps
        .iter()
        .map(|s| {
            dev = phi * dev + (s + dist.sample(rng)) / 100.0;
            (anchor + dev).exp()
        })
        .collect()
}

/// Simulates `length` returns and builds the matching feature panel. The
/// panel loses its first row to the realized-volatility warm-up, so it has
/// `length - 1` rows.
pub fn synthetic_panel(params: &SwarchParams, length: usize, seed: u64) -> Result<SyntheticPanel> {
    let path = simulate_swarch(params, length, derive_seed(seed, "returns"))?;
    let mut rng = ChaCha8Rng::seed_from_u64(derive_seed(seed, "covariates"));
    let y = path.returns.values();
    let dates = business_days(default_start(), length + 1);
    let prices = PriceSeries::new(dates.clone(), compound_prices(100.0, y))?;
    let ret_dates = dates[1..].to_vec();

    let high: Vec<f64> = path.states.iter().map(|&s| if s == 2 { 1.0 } else { 0.0 }).collect();
    let scaled = |k: f64| y.iter().map(|r| k * r).collect::<Vec<_>>();
    let zeros = vec![0.0; y.len()];
    let stress: Vec<f64> = high.iter().map(|h| 0.3 * h).collect();
    let daily = vec![
        DatedColumn::new(DAILY_COLUMNS[0], ret_dates.clone(), mean_reverting(&mut rng, 3000.0, &scaled(0.5), 0.8, DAILY_PHI)),
        DatedColumn::new(DAILY_COLUMNS[1], ret_dates.clone(), mean_reverting(&mut rng, 6.5, &zeros, 0.2, DAILY_PHI)),
        DatedColumn::new(DAILY_COLUMNS[2], ret_dates.clone(), mean_reverting(&mut rng, 1200.0, &stress, 0.9, DAILY_PHI)),
        DatedColumn::new(DAILY_COLUMNS[3], ret_dates.clone(), mean_reverting(&mut rng, 60.0, &scaled(0.3), 1.8, DAILY_PHI)),
    ];

    let first = dates[0];
    let last = *dates.last().expect("non-empty axis");
    let mut months = Vec::new();
    let mut m = NaiveDate::from_ymd_opt(first.year(), first.month(), 1).expect("valid month start");
    while m <= last {
        months.push(m);
        m = m.checked_add_months(chrono::Months::new(1)).expect("date in range");
    }
    let n = months.len();
    let zeros_m = vec![0.0; n];
    let rate_noise = normal(0.05);
    let mut rate = 3.0;
    let rates: Vec<f64> = (0..n)
        .map(|_| {
            rate = 3.0 + MONTHLY_PHI * (rate - 3.0) + rate_noise.sample(&mut rng);
            rate
        })
        .collect();
    let monthly = vec![
        DatedColumn::new(MONTHLY_COLUMNS[0], months.clone(), rates),
        DatedColumn::new(MONTHLY_COLUMNS[1], months.clone(), mean_reverting(&mut rng, 4e5, &zeros_m, 0.5, MONTHLY_PHI)),
        DatedColumn::new(MONTHLY_COLUMNS[2], months.clone(), mean_reverting(&mut rng, 1.2e6, &zeros_m, 0.4, MONTHLY_PHI)),
        DatedColumn::new(MONTHLY_COLUMNS[3], months, mean_reverting(&mut rng, 100.0, &zeros_m, 0.3, MONTHLY_PHI)),
    ];

    let panel = build_feature_panel(&prices, &daily, &monthly)?;
    let offset = length - panel.n_rows();
    let states = high[offset..].iter().map(|&h| h as u8).collect();
    Ok(SyntheticPanel {
        panel,
        prices,
        states,
        path,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn params() -> SwarchParams {
        SwarchParams {
            u: 0.05,
            theta1: 0.05,
            alpha0: 0.3,
            alpha1: 0.2,
            gamma2: 16.0,
            p11: 0.99,
            p22: 0.97,
        }
    }

    #[test]
    fn panel_shape_and_alignment() {
        let s = synthetic_panel(&params(), 300, 1).unwrap();
        assert_eq!(s.panel.n_rows(), 299);
        assert_eq!(s.panel.n_cols(), 11);
        assert_eq!(s.states.len(), 299);
        let r = s.panel.column("log_return").unwrap();
        for (a, b) in r.iter().zip(&s.path.returns.values()[1..]) {
            assert!((a - b).abs() < 1e-10);
        }
        assert_eq!(s.with_states().unwrap().n_cols(), 12);
    }

    #[test]
    fn deterministic() {
        let a = synthetic_panel(&params(), 120, 5).unwrap();
        let b = synthetic_panel(&params(), 120, 5).unwrap();
        assert_eq!(a.panel, b.panel);
        assert_ne!(a.panel, synthetic_panel(&params(), 120, 6).unwrap().panel);
    }
}
