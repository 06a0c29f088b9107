use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

use super::{ergodic_distribution, SwarchParams};
use crate::data::ReturnSeries;
use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq)]
pub struct SimulatedPath {
    pub returns: ReturnSeries,
    /// Regime per date, 1 = low volatility, 2 = high volatility.
    pub states: Vec<u8>,
    pub innovations: Vec<f64>,
    pub seed: u64,
}

/// Draws a path of `length` returns. The chain starts from its ergodic
/// distribution; the pre-sample lag sits at the unconditional mean with the
/// low-regime unconditional variance.
pub fn simulate_swarch(params: &SwarchParams, length: usize, seed: u64) -> Result<SimulatedPath> {
    params.validate()?;
    if length < 10 {
        return Err(Error::InsufficientData {
            needed: 10,
            got: length,
        });
    }
    let (pi1, _) = ergodic_distribution(params.p11, params.p22)?;
    let gamma = params.gammas();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);

    let mut state = if rng.random::<f64>() < pi1 { 0 } else { 1 };
    let mut prev_state = state;
    let mut eps_prev_sq = if params.alpha1 < 1.0 {
        params.alpha0 / (1.0 - params.alpha1)
    } else {
        params.alpha0
    };
    let mut y_prev = params.u / (1.0 - params.theta1);

    let mut values = Vec::with_capacity(length);
    let mut states = Vec::with_capacity(length);
    let mut innovations = Vec::with_capacity(length);
    for t in 0..length {
        if t > 0 {
            let stay = if state == 0 { params.p11 } else { params.p22 };
            prev_state = state;
            if rng.random::<f64>() >= stay {
                state = 1 - state;
            }
        }
        let h2 = gamma[state] * (params.alpha0 + params.alpha1 * eps_prev_sq / gamma[prev_state]);
        let z: f64 = rng.sample(StandardNormal);
        let eps = h2.sqrt() * z;
        let y = params.u + params.theta1 * y_prev + eps;
        values.push(y);
        states.push(state as u8 + 1);
        innovations.push(eps);
        eps_prev_sq = eps * eps;
        y_prev = y;
    }
    Ok(SimulatedPath {
        returns: ReturnSeries::from_values(values),
        states,
        innovations,
        seed,
    })
}
