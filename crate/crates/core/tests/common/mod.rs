#![allow(dead_code)]

use ews_core::regime::SwarchParams;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

pub struct Enumerated {
    pub prob_high: Vec<f64>,
    pub log_likelihood: f64,
}

fn normal_pdf(x: f64, var: f64) -> f64 {
    (-0.5 * x * x / var).exp() / (2.0 * std::f64::consts::PI * var).sqrt()
}

/// Exhaustive sum over all 2^n regime paths s_0..s_{n-1}.
///
/// Path weight = pi(s_0) * prod_t p(s_{t-1}, s_t) * density(y_t | s_t, s_{t-1})
/// with the first observation only seeding the AR lag and the pre-sample
/// squared residual set to the sample variance of y.
pub fn enumerate_paths(p: &SwarchParams, y: &[f64]) -> Enumerated {
    let n = y.len();
    let pi1 = (1.0 - p.p22) / (2.0 - p.p11 - p.p22);
    let pi = [pi1, 1.0 - pi1];
    let trans = |i: usize, j: usize| match (i, j) {
        (0, 0) => p.p11,
        (0, 1) => 1.0 - p.p11,
        (1, 1) => p.p22,
        _ => 1.0 - p.p22,
    };
    let gamma = [1.0, p.gamma2];
    let mean = y.iter().sum::<f64>() / n as f64;
    let var0 = y.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / (n as f64 - 1.0);
    let eps: Vec<f64> = (0..n)
        .map(|t| if t == 0 { f64::NAN } else { y[t] - p.u - p.theta1 * y[t - 1] })
        .collect();

    // numer[t] = sum over paths of weight up to t with s_t = 2; denom[t] = all paths
    let mut numer = vec![0.0; n];
    let mut denom = vec![0.0; n];
    for mask in 0u32..(1 << n) {
        let s: Vec<usize> = (0..n).map(|t| ((mask >> t) & 1) as usize).collect();
        let mut w = pi[s[0]];
        // weight up to t is identical across paths that agree on s_0..s_t; the
        // 2^(n-1-t) continuations each contribute the same prefix, so divide.
        let scale0 = (1u64 << (n - 1)) as f64;
        denom[0] += w / scale0;
        if s[0] == 1 {
            numer[0] += w / scale0;
        }
        for t in 1..n {
            let e_prev_sq = if t == 1 { var0 } else { eps[t - 1] * eps[t - 1] };
            let h2 = gamma[s[t]] * (p.alpha0 + p.alpha1 * e_prev_sq / gamma[s[t - 1]]);
            w *= trans(s[t - 1], s[t]) * normal_pdf(eps[t], h2);
            let scale = (1u64 << (n - 1 - t)) as f64;
            denom[t] += w / scale;
            if s[t] == 1 {
                numer[t] += w / scale;
            }
        }
    }
    Enumerated {
        prob_high: numer.iter().zip(&denom).map(|(a, b)| a / b).collect(),
        log_likelihood: (denom[n - 1]).ln(),
    }
}

pub fn random_params(rng: &mut ChaCha8Rng) -> SwarchParams {
    SwarchParams {
        u: rng.random_range(-0.3..0.3),
        theta1: rng.random_range(-0.6..0.6),
        alpha0: rng.random_range(0.1..2.0),
        alpha1: rng.random_range(0.0..0.9),
        gamma2: rng.random_range(1.0..20.0),
        p11: rng.random_range(0.05..0.995),
        p22: rng.random_range(0.05..0.995),
    }
}

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}
