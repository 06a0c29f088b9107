//! AR(1)-SWARCH(2,1): a two-regime switching ARCH model for percent log
//! returns.
//!
//! ```text
//! y_t = u + theta1 * y_{t-1} + eps_t,          eps_t ~ N(0, h_t^2)
//! h_t^2 = gamma_{s_t} * (alpha0 + alpha1 * eps_{t-1}^2 / gamma_{s_{t-1}})
//! ```
//!
//! with `gamma_1 = 1`, `gamma_2 >= 1`, so state 2 is the high-volatility
//! regime, and a two-state Markov chain `p_ij = P(s_t = j | s_{t-1} = i)`.

mod estimate;
mod filter;
mod simulate;

pub use estimate::{estimate_swarch, estimate_swarch_with, EstimateConfig, FitDiagnostics, SwarchFit};
pub use filter::{hamilton_filter, hamilton_filter_from, log_likelihood, FilterOutput};
pub use simulate::{simulate_swarch, SimulatedPath};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SwarchParams {
    /// Mean of the AR(1) return equation, in percent.
    pub u: f64,
    pub theta1: f64,
    pub alpha0: f64,
    pub alpha1: f64,
    /// Variance scale of the high-volatility regime.
    pub gamma2: f64,
    pub p11: f64,
    pub p22: f64,
}

impl SwarchParams {
    pub fn validate(&self) -> Result<()> {
        let ok = self.u.is_finite()
            && self.theta1.abs() < 1.0
            && self.alpha0 > 0.0
            && self.alpha0.is_finite()
            && self.alpha1 >= 0.0
            && self.alpha1.is_finite()
            && self.gamma2 >= 1.0
            && self.gamma2.is_finite()
            && self.p11 > 0.0
            && self.p11 < 1.0
            && self.p22 > 0.0
            && self.p22 < 1.0;
        if ok {
            Ok(())
        } else {
            Err(Error::validation(format!("invalid SWARCH parameters {self:?}")))
        }
    }

    /// `transition()[i][j] = P(s_t = j+1 | s_{t-1} = i+1)`.
    pub fn transition(&self) -> [[f64; 2]; 2] {
        [[self.p11, 1.0 - self.p11], [1.0 - self.p22, self.p22]]
    }

    pub fn gammas(&self) -> [f64; 2] {
        [1.0, self.gamma2]
    }

    pub fn to_toml(&self) -> String {
        toml::to_string(self).expect("plain struct serializes")
    }

    pub fn from_toml(s: &str) -> Result<Self> {
        let p: SwarchParams =
            toml::from_str(s).map_err(|e| Error::validation(format!("bad SWARCH parameters: {e}")))?;
        p.validate()?;
        Ok(p)
    }
}

/// Stationary distribution `(pi1, pi2)` of the regime chain.
pub fn ergodic_distribution(p11: f64, p22: f64) -> Result<(f64, f64)> {
    let denom = 2.0 - p11 - p22;
    if !(0.0..=1.0).contains(&p11) || !(0.0..=1.0).contains(&p22) {
        return Err(Error::validation(format!("transition probabilities out of range: {p11}, {p22}")));
    }
    if denom <= 0.0 {
        return Err(Error::DegenerateChain { p11, p22 });
    }
    let pi1 = (1.0 - p22) / denom;
    Ok((pi1, 1.0 - pi1))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn ergodic_examples() {
        let (a, b) = ergodic_distribution(0.5, 0.5).unwrap();
        assert!((a - 0.5).abs() < 1e-15 && (b - 0.5).abs() < 1e-15);
        let (a, b) = ergodic_distribution(0.9, 0.8).unwrap();
        assert!((a - 2.0 / 3.0).abs() < 1e-12 && (b - 1.0 / 3.0).abs() < 1e-12);
        let (a, _) = ergodic_distribution(0.99, 0.99).unwrap();
        assert!((a - 0.5).abs() < 1e-12);
        assert!(matches!(
            ergodic_distribution(1.0, 1.0),
            Err(Error::DegenerateChain { .. })
        ));
    }

    #[test]
    fn ergodic_is_stationary() {
        for &(p11, p22) in &[(0.98, 0.95), (0.1, 0.7), (0.5, 0.999)] {
            let (pi1, pi2) = ergodic_distribution(p11, p22).unwrap();
            let next1 = pi1 * p11 + pi2 * (1.0 - p22);
            assert!((next1 - pi1).abs() < 1e-12);
        }
    }

    #[test]
    fn params_toml_round_trip() {
        let p = SwarchParams {
            u: 0.01,
            theta1: 0.05,
            alpha0: 0.5,
            alpha1: 0.3,
            gamma2: 4.0,
            p11: 0.98,
            p22: 0.95,
        };
        assert_eq!(SwarchParams::from_toml(&p.to_toml()).unwrap(), p);
        let bad = SwarchParams { gamma2: 0.5, ..p };
        assert!(SwarchParams::from_toml(&bad.to_toml()).is_err());
    }
}
