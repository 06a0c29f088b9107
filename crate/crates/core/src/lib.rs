//! Stock-market turbulence early warning.
//!
//! A two-regime switching ARCH model labels each trading day as turbulent or
//! tranquil through a data-driven cutoff on the real-time high-volatility
//! probability; an LSTM (or a feedforward baseline) then predicts the next
//! day's label from a window of explanatory variables.

pub mod backtest;
pub mod data;
pub mod error;
pub mod eval;
pub mod neural;
pub mod optim;
pub mod pipeline;
pub mod regime;
pub mod seed;
pub mod synthetic;
pub mod threshold;

pub use error::{Error, Result};
