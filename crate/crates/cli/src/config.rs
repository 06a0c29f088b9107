use std::path::Path;

use ews_core::backtest::BacktestConfig;
use ews_core::pipeline::EwsConfig;
use ews_core::regime::SwarchParams;
use serde::{Deserialize, Serialize};

use crate::CliError;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct SimulateConfig {
    /// Panel rows to produce.
    pub t: usize,
    pub params: SwarchParams,
}

impl Default for SimulateConfig {
    fn default() -> Self {
        Self {
            t: 2000,
            params: SwarchParams {
                u: 0.05,
                theta1: 0.05,
                alpha0: 0.3,
                alpha1: 0.2,
                gamma2: 16.0,
                p11: 0.99,
                p22: 0.97,
            },
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct EvaluateConfig {
    pub horizon: usize,
    /// Score only records whose target day is in the test range.
    pub test_only: bool,
}

impl Default for EvaluateConfig {
    fn default() -> Self {
        Self {
            horizon: 5,
            test_only: true,
        }
    }
}

/// The config file: pipeline settings at the top level, one table per
/// auxiliary subcommand.
#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(default)]
pub struct CliConfig {
    #[serde(flatten)]
    pub ews: EwsConfig,
    pub simulate: SimulateConfig,
    pub evaluate: EvaluateConfig,
    pub backtest: BacktestConfig,
}

impl CliConfig {
    pub fn load(path: Option<&Path>) -> Result<CliConfig, CliError> {
        let Some(path) = path else {
            return Ok(CliConfig::default());
        };
        let text = std::fs::read_to_string(path).map_err(|e| CliError::Io(format!("{}: {e}", path.display())))?;
        let cfg: CliConfig =
            toml::from_str(&text).map_err(|e| CliError::Usage(format!("{}: {e}", path.display())))?;
        Ok(cfg)
    }

    pub fn to_toml(&self) -> String {
        toml::to_string(self).expect("config serializes")
    }
}
