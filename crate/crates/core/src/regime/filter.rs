use chrono::NaiveDate;
use serde::{Deserialize, Serialize};

use super::{ergodic_distribution, SwarchParams};
use crate::data::ReturnSeries;
use crate::error::{Error, Result};

pub(crate) const VARIANCE_FLOOR: f64 = 1e-12;
const LN_2PI: f64 = 1.837_877_066_409_345_3;

/// Real-time regime probabilities from one filtering pass.
///
/// Index 0 is the pre-sample state: the first return only seeds the AR lag,
/// so `prob_high[0]` is the prior and the likelihood covers `t >= 1`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FilterOutput {
    pub dates: Vec<NaiveDate>,
    /// `P(s_t = 2 | Y_t)` for every date.
    pub prob_high: Vec<f64>,
    /// `joint_probs[t][i][j] = P(s_t = i+1, s_{t-1} = j+1 | Y_t)`.
    pub joint_probs: Vec<[[f64; 2]; 2]>,
    pub log_likelihood: f64,
}

impl FilterOutput {
    pub fn len(&self) -> usize {
        self.prob_high.len()
    }

    pub fn is_empty(&self) -> bool {
        self.prob_high.is_empty()
    }
}

/// Filters with the chain started from its ergodic distribution.
pub fn hamilton_filter(params: &SwarchParams, returns: &ReturnSeries) -> Result<FilterOutput> {
    params.validate()?;
    let (pi1, pi2) = ergodic_distribution(params.p11, params.p22)?;
    hamilton_filter_from(params, returns, [pi1, pi2])
}

/// Filters from an explicit prior on the pre-sample state. Transition
/// probabilities may sit on the closed interval here, which allows
/// absorbing chains.
pub fn hamilton_filter_from(
    params: &SwarchParams,
    returns: &ReturnSeries,
    prior: [f64; 2],
) -> Result<FilterOutput> {
    check_prior(params, prior)?;
    let mut out = FilterOutput {
        dates: returns.dates().to_vec(),
        prob_high: Vec::with_capacity(returns.len()),
        joint_probs: Vec::with_capacity(returns.len()),
        log_likelihood: 0.0,
    };
    out.log_likelihood = run(params, returns.values(), prior, Some(&mut out))?;
    Ok(out)
}

/// Log-likelihood only; the optimizer's hot path.
pub fn log_likelihood(params: &SwarchParams, returns: &[f64]) -> Result<f64> {
    params.validate()?;
    let (pi1, pi2) = ergodic_distribution(params.p11, params.p22)?;
    run(params, returns, [pi1, pi2], None)
}

fn check_prior(params: &SwarchParams, prior: [f64; 2]) -> Result<()> {
    let probs_ok = [params.p11, params.p22, prior[0], prior[1]]
        .iter()
        .all(|p| (0.0..=1.0).contains(p));
    if !probs_ok || (prior[0] + prior[1] - 1.0).abs() > 1e-12 {
        return Err(Error::validation("prior and transition probabilities must be distributions"));
    }
    if !(params.alpha0 > 0.0 && params.alpha1 >= 0.0 && params.gamma2 >= 1.0) {
        return Err(Error::validation(format!("invalid SWARCH parameters {params:?}")));
    }
    Ok(())
}

pub(crate) fn sample_variance(y: &[f64]) -> f64 {
    let n = y.len() as f64;
    let mean = y.iter().sum::<f64>() / n;
    y.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (n - 1.0)
}

fn run(params: &SwarchParams, y: &[f64], prior: [f64; 2], mut out: Option<&mut FilterOutput>) -> Result<f64> {
    if y.len() < 3 {
        return Err(Error::InsufficientData {
            needed: 3,
            got: y.len(),
        });
    }
    let p = params.transition();
    let gamma = params.gammas();
    let ln_p = p.map(|row| row.map(f64::ln));

    if let Some(o) = out.as_deref_mut() {
        o.prob_high.push(prior[1]);
        o.joint_probs
            .push([[prior[0] * prior[0], prior[0] * prior[1]], [prior[1] * prior[0], prior[1] * prior[1]]]);
    }

    let mut marginal = prior;
    let mut eps_prev_sq = sample_variance(y);
    let mut total = 0.0;

    for t in 1..y.len() {
        let eps = y[t] - params.u - params.theta1 * y[t - 1];
        // log of P(s_t = a, s_{t-1} = b | Y_{t-1}) * f(y_t | a, b)
        let mut w = [[f64::NEG_INFINITY; 2]; 2];
        let mut max_w = f64::NEG_INFINITY;
        for a in 0..2 {
            for b in 0..2 {
                let h2 = gamma[a] * (params.alpha0 + params.alpha1 * eps_prev_sq / gamma[b]);
                if !h2.is_finite() || h2 < VARIANCE_FLOOR {
                    return Err(Error::Numeric {
                        t,
                        msg: format!("conditional variance {h2} below floor"),
                    });
                }
                if marginal[b] > 0.0 && p[b][a] > 0.0 {
                    let ln_dens = -0.5 * (LN_2PI + h2.ln() + eps * eps / h2);
                    w[a][b] = marginal[b].ln() + ln_p[b][a] + ln_dens;
                    max_w = max_w.max(w[a][b]);
                }
            }
        }
        if !max_w.is_finite() {
            return Err(Error::Numeric {
                t,
                msg: "all regime densities vanished".into(),
            });
        }
        let mut joint = [[0.0; 2]; 2];
        let mut sum = 0.0;
        for a in 0..2 {
            for b in 0..2 {
                joint[a][b] = (w[a][b] - max_w).exp();
                sum += joint[a][b];
            }
        }
        for row in joint.iter_mut() {
            for v in row.iter_mut() {
                *v /= sum;
            }
        }
        total += max_w + sum.ln();
        // Summing rounded terms can overshoot 1 by an ulp.
        marginal = [
            (joint[0][0] + joint[0][1]).min(1.0),
            (joint[1][0] + joint[1][1]).min(1.0),
        ];
        eps_prev_sq = eps * eps;
        if let Some(o) = out.as_deref_mut() {
            o.prob_high.push(marginal[1]);
            o.joint_probs.push(joint);
        }
    }
    if !total.is_finite() {
        return Err(Error::Numeric {
            t: y.len() - 1,
            msg: "non-finite log-likelihood".into(),
        });
    }
    Ok(total)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn params() -> SwarchParams {
        SwarchParams {
            u: 0.02,
            theta1: 0.1,
            alpha0: 0.6,
            alpha1: 0.25,
            gamma2: 5.0,
            p11: 0.95,
            p22: 0.9,
        }
    }

    fn returns() -> ReturnSeries {
        ReturnSeries::from_values(vec![0.3, -1.1, 0.4, 4.2, -3.9, 0.2, 0.1, -0.5])
    }

    #[test]
    fn joint_sums_to_one() {
        let out = hamilton_filter(&params(), &returns()).unwrap();
        assert_eq!(out.len(), 8);
        for j in &out.joint_probs {
            let s: f64 = j.iter().flatten().sum();
            assert!((s - 1.0).abs() < 1e-10);
        }
        assert!(out.prob_high.iter().all(|p| (0.0..=1.0).contains(p)));
        assert!(out.log_likelihood.is_finite());
    }

    #[test]
    fn absorbing_low_state_never_goes_high() {
        let p = SwarchParams {
            alpha1: 0.0,
            p11: 1.0,
            p22: 1.0,
            ..params()
        };
        let rs = ReturnSeries::from_values(vec![0.1, 9.0, -12.0, 0.5, 30.0, -2.0]);
        let out = hamilton_filter_from(&p, &rs, [1.0, 0.0]).unwrap();
        assert!(out.prob_high.iter().all(|&x| x == 0.0), "{:?}", out.prob_high);
    }

    #[test]
    fn identical_regimes_stay_at_ergodic() {
        let p = SwarchParams {
            gamma2: 1.0,
            ..params()
        };
        let (_, pi2) = ergodic_distribution(p.p11, p.p22).unwrap();
        let out = hamilton_filter(&p, &returns()).unwrap();
        for x in out.prob_high {
            assert!((x - pi2).abs() < 1e-12);
        }
    }

    #[test]
    fn high_variance_day_raises_probability() {
        let out = hamilton_filter(&params(), &returns()).unwrap();
        assert!(out.prob_high[3] > out.prob_high[2]);
    }

    #[test]
    fn variance_floor_raises_numeric_error() {
        let p = SwarchParams {
            alpha0: 1e-14,
            alpha1: 0.0,
            ..params()
        };
        match hamilton_filter(&p, &returns()) {
            Err(Error::Numeric { t, .. }) => assert_eq!(t, 1),
            other => panic!("{other:?}"),
        }
    }

    #[test]
    fn too_short_is_rejected() {
        let rs = ReturnSeries::from_values(vec![0.1, 0.2]);
        assert!(matches!(
            hamilton_filter(&params(), &rs),
            Err(Error::InsufficientData { .. })
        ));
    }

    #[test]
    fn log_likelihood_matches_full_filter() {
        let ll = log_likelihood(&params(), returns().values()).unwrap();
        let out = hamilton_filter(&params(), &returns()).unwrap();
        assert_eq!(ll, out.log_likelihood);
    }
}
