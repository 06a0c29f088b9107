//! Constrained maximum likelihood for [`SwarchParams`].
//!
//! The optimizer works on an unconstrained vector:
//!
//! | parameter | map from `z` |
//! |-----------|--------------|
//! | `u`       | `z` |
//! | `theta1`  | `2 * logistic(z) - 1` |
//! | `alpha0`, `alpha1` | `exp(z)` |
//! | `gamma2`  | `1 + exp(z)` |
//! | `p11`, `p22` | `logistic(z)` |
//!
//! Each start runs Nelder–Mead on the per-observation negative
//! log-likelihood. Starts are independent and may run in parallel; the
//! winner is the highest likelihood with ties going to the lower index.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::filter::sample_variance;
use super::{hamilton_filter, log_likelihood, FilterOutput, SwarchParams};
use crate::data::ReturnSeries;
use crate::error::{Error, Result};
use crate::optim::{nelder_mead, NelderMeadOptions};

const Z_BOUND: f64 = 30.0;
const RECOMMENDED_MIN_LEN: usize = 100;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct EstimateConfig {
    /// Cold starts: the first is a moment-based guess, the rest are drawn
    /// from `seed`.
    pub starts: usize,
    pub seed: u64,
    /// Extra start tried before the cold starts (e.g. yesterday's optimum).
    #[serde(skip)]
    pub warm_start: Option<SwarchParams>,
    pub max_evals: usize,
    pub f_tol: f64,
}

impl Default for EstimateConfig {
    fn default() -> Self {
        Self {
            starts: 5,
            seed: 0,
            warm_start: None,
            max_evals: 4000,
            f_tol: 1e-10,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FitDiagnostics {
    /// Log-likelihood at each start point (warm start first, if any).
    pub start_log_likelihoods: Vec<f64>,
    pub final_log_likelihoods: Vec<f64>,
    pub converged: Vec<bool>,
    pub best_start: usize,
    pub evaluations: usize,
    /// Parameters sitting on the edge of the admissible region.
    pub boundary_flags: Vec<String>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SwarchFit {
    pub params: SwarchParams,
    pub filter: FilterOutput,
    pub diagnostics: FitDiagnostics,
}

pub fn estimate_swarch(returns: &ReturnSeries, starts: usize, seed: u64) -> Result<SwarchFit> {
    estimate_swarch_with(
        returns,
        &EstimateConfig {
            starts,
            seed,
            ..EstimateConfig::default()
        },
    )
}

fn logistic(z: f64) -> f64 {
    1.0 / (1.0 + (-z).exp())
}

fn logit(p: f64) -> f64 {
    (p / (1.0 - p)).ln()
}

pub(crate) fn to_unconstrained(p: &SwarchParams) -> [f64; 7] {
    let clamp = |z: f64| z.clamp(-Z_BOUND, Z_BOUND);
    [
        p.u,
        clamp(logit((p.theta1 + 1.0) / 2.0)),
        clamp(p.alpha0.ln()),
        clamp(p.alpha1.max(1e-300).ln()),
        clamp((p.gamma2 - 1.0).max(1e-300).ln()),
        clamp(logit(p.p11)),
        clamp(logit(p.p22)),
    ]
}

pub(crate) fn from_unconstrained(z: &[f64]) -> SwarchParams {
    let c = |v: f64| v.clamp(-Z_BOUND, Z_BOUND);
    SwarchParams {
        u: z[0],
        theta1: 2.0 * logistic(c(z[1])) - 1.0,
        alpha0: c(z[2]).exp(),
        alpha1: c(z[3]).exp(),
        gamma2: 1.0 + c(z[4]).exp(),
        p11: logistic(c(z[5])),
        p22: logistic(c(z[6])),
    }
}

fn moment_guess(y: &[f64]) -> SwarchParams {
    let n = y.len() as f64;
    let mean = y.iter().sum::<f64>() / n;
    let var = sample_variance(y).max(1e-6);
    SwarchParams {
        u: mean,
        theta1: 0.0,
        alpha0: 0.4 * var,
        alpha1: 0.2,
        gamma2: 3.0,
        p11: 0.95,
        p22: 0.9,
    }
}

fn random_start(y: &[f64], rng: &mut ChaCha8Rng) -> SwarchParams {
    let n = y.len() as f64;
    let mean = y.iter().sum::<f64>() / n;
    let var = sample_variance(y).max(1e-6);
    SwarchParams {
        u: mean + 0.1 * var.sqrt() * (rng.random::<f64>() - 0.5),
        theta1: rng.random_range(-0.2..0.2),
        alpha0: var * rng.random_range(0.1..0.8),
        alpha1: rng.random_range(0.02..0.6),
        gamma2: rng.random_range(1.5..12.0),
        p11: rng.random_range(0.8..0.995),
        p22: rng.random_range(0.6..0.99),
    }
}

pub fn estimate_swarch_with(returns: &ReturnSeries, cfg: &EstimateConfig) -> Result<SwarchFit> {
    let y = returns.values();
    if y.len() < 3 {
        return Err(Error::InsufficientData {
            needed: 3,
            got: y.len(),
        });
    }
    if y.len() < RECOMMENDED_MIN_LEN {
        log::warn!(
            "estimating SWARCH on {} observations (fewer than {RECOMMENDED_MIN_LEN})",
            y.len()
        );
    }
    if cfg.starts == 0 && cfg.warm_start.is_none() {
        return Err(Error::validation("estimation needs at least one start"));
    }

    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let mut inits: Vec<SwarchParams> = cfg.warm_start.iter().copied().collect();
    for k in 0..cfg.starts {
        inits.push(if k == 0 { moment_guess(y) } else { random_start(y, &mut rng) });
    }

    let n = y.len() as f64;
    let objective = |z: &[f64]| match log_likelihood(&from_unconstrained(z), y) {
        Ok(ll) => -ll / n,
        Err(_) => f64::INFINITY,
    };
    let sd = sample_variance(y).sqrt().max(1e-3);
    let mut steps = [0.5; 7];
    steps[0] = 0.1 * sd;
    let opts = NelderMeadOptions {
        max_evals: cfg.max_evals,
        f_tol: cfg.f_tol,
        ..NelderMeadOptions::default()
    };

    let runs: Vec<_> = inits
        .par_iter()
        .map(|init| {
            let z0 = to_unconstrained(init);
            let start_ll = -objective(&z0) * n;
            let m = nelder_mead(objective, &z0, &steps, &opts);
            (start_ll, m)
        })
        .collect();

    let final_ll: Vec<f64> = runs.iter().map(|(_, m)| -m.f * n).collect();
    let mut best: Option<usize> = None;
    for (i, ll) in final_ll.iter().enumerate() {
        if ll.is_finite() && best.is_none_or(|b| *ll > final_ll[b]) {
            best = Some(i);
        }
    }
    let evaluations = runs.iter().map(|(_, m)| m.evals).sum();
    let any_converged = runs.iter().any(|(_, m)| m.converged);
    let Some(best) = best.filter(|_| any_converged) else {
        let best_ll = final_ll.iter().copied().filter(|v| v.is_finite()).fold(f64::NEG_INFINITY, f64::max);
        return Err(Error::Estimation {
            best_log_likelihood: best_ll,
            evaluations,
        });
    };

    let params = from_unconstrained(&runs[best].1.x);
    let filter = hamilton_filter(&params, returns)?;
    let diagnostics = FitDiagnostics {
        start_log_likelihoods: runs.iter().map(|(s, _)| *s).collect(),
        final_log_likelihoods: final_ll,
        converged: runs.iter().map(|(_, m)| m.converged).collect(),
        best_start: best,
        evaluations,
        boundary_flags: boundary_flags(&params),
    };
    for flag in &diagnostics.boundary_flags {
        log::info!("SWARCH estimate on boundary: {flag}");
    }
    Ok(SwarchFit {
        params,
        filter,
        diagnostics,
    })
}

fn boundary_flags(p: &SwarchParams) -> Vec<String> {
    let mut flags = Vec::new();
    if p.gamma2 < 1.05 {
        flags.push(format!("gamma2 = {:.4} (regimes indistinguishable)", p.gamma2));
    }
    for (name, v) in [("p11", p.p11), ("p22", p.p22)] {
        if !(0.01..=0.999).contains(&v) {
            flags.push(format!("{name} = {v:.6}"));
        }
    }
    if p.alpha1 < 1e-4 {
        flags.push(format!("alpha1 = {:.2e}", p.alpha1));
    }
    if p.theta1.abs() > 0.99 {
        flags.push(format!("theta1 = {:.4}", p.theta1));
    }
    flags
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::regime::simulate_swarch;

    fn truth() -> SwarchParams {
        SwarchParams {
            u: 0.0,
            theta1: 0.05,
            alpha0: 0.5,
            alpha1: 0.3,
            gamma2: 4.0,
            p11: 0.98,
            p22: 0.95,
        }
    }

    #[test]
    fn transform_round_trip() {
        let p = truth();
        let q = from_unconstrained(&to_unconstrained(&p));
        for (a, b) in [
            (p.u, q.u),
            (p.theta1, q.theta1),
            (p.alpha0, q.alpha0),
            (p.alpha1, q.alpha1),
            (p.gamma2, q.gamma2),
            (p.p11, q.p11),
            (p.p22, q.p22),
        ] {
            assert!((a - b).abs() < 1e-12);
        }
    }

    #[test]
    fn transform_always_admissible() {
        for z in [-1e3, -40.0, -1.0, 0.0, 2.0, 40.0, 1e3] {
            from_unconstrained(&[z; 7]).validate().unwrap();
        }
    }

    #[test]
    fn optimum_beats_every_start() {
        let path = simulate_swarch(&truth(), 800, 21).unwrap();
        let fit = estimate_swarch(&path.returns, 3, 9).unwrap();
        let best = fit.filter.log_likelihood;
        for s in &fit.diagnostics.start_log_likelihoods {
            assert!(best >= *s);
        }
        assert!((best - fit.diagnostics.final_log_likelihoods[fit.diagnostics.best_start]).abs() < 1e-9);
    }

    #[test]
    fn deterministic_for_seed() {
        let path = simulate_swarch(&truth(), 400, 2).unwrap();
        let a = estimate_swarch(&path.returns, 3, 17).unwrap();
        let b = estimate_swarch(&path.returns, 3, 17).unwrap();
        assert_eq!(a.params, b.params);
        assert_eq!(a.filter, b.filter);
    }

    #[test]
    fn warm_start_is_tried_first() {
        let path = simulate_swarch(&truth(), 400, 4).unwrap();
        let cfg = EstimateConfig {
            starts: 1,
            warm_start: Some(truth()),
            ..EstimateConfig::default()
        };
        let fit = estimate_swarch_with(&path.returns, &cfg).unwrap();
        assert_eq!(fit.diagnostics.start_log_likelihoods.len(), 2);
        let truth_ll = log_likelihood(&truth(), path.returns.values()).unwrap();
        assert!((fit.diagnostics.start_log_likelihoods[0] - truth_ll).abs() < 1e-9);
    }

    #[test]
    fn no_starts_is_validation_error() {
        let path = simulate_swarch(&truth(), 100, 4).unwrap();
        let cfg = EstimateConfig {
            starts: 0,
            ..EstimateConfig::default()
        };
        assert!(matches!(
            estimate_swarch_with(&path.returns, &cfg),
            Err(Error::Validation(_))
        ));
    }
}
