mod common;

use common::{enumerate_paths, random_params, rng};
use ews_core::data::ReturnSeries;
use ews_core::regime::{hamilton_filter, simulate_swarch};

#[test]
fn six_returns_match_enumeration() {
    let mut r = rng(1);
    for _ in 0..10 {
        let p = random_params(&mut r);
        let path = simulate_swarch(&p, 10, 99).unwrap();
        let y = path.returns.values()[..6].to_vec();
        let out = hamilton_filter(&p, &ReturnSeries::from_values(y.clone())).unwrap();
        let oracle = enumerate_paths(&p, &y);
        assert!((out.log_likelihood - oracle.log_likelihood).abs() < 1e-10);
        for (a, b) in out.prob_high.iter().zip(&oracle.prob_high) {
            assert!((a - b).abs() < 1e-10, "{a} vs {b}");
        }
    }
}

#[test]
fn short_series_match_enumeration_across_lengths() {
    let mut r = rng(7);
    for case in 0..60u64 {
        let p = random_params(&mut r);
        let t = 3 + (case % 8) as usize;
        let path = simulate_swarch(&p, 10, case).unwrap();
        let y = path.returns.values()[..t].to_vec();
        let out = hamilton_filter(&p, &ReturnSeries::from_values(y.clone())).unwrap();
        let oracle = enumerate_paths(&p, &y);
        assert!(
            (out.log_likelihood - oracle.log_likelihood).abs() < 1e-8,
            "case {case}: {} vs {}",
            out.log_likelihood,
            oracle.log_likelihood
        );
        for (a, b) in out.prob_high.iter().zip(&oracle.prob_high) {
            assert!((a - b).abs() < 1e-8);
        }
    }
}

#[test]
fn filter_is_scale_covariant() {
    let mut r = rng(3);
    for seed in 0..20u64 {
        let p = random_params(&mut r);
        let k = 0.5 + seed as f64 * 0.37;
        let path = simulate_swarch(&p, 200, seed).unwrap();
        let scaled_p = ews_core::regime::SwarchParams {
            u: p.u * k,
            alpha0: p.alpha0 * k * k,
            ..p
        };
        let scaled_y: Vec<f64> = path.returns.values().iter().map(|v| v * k).collect();
        let a = hamilton_filter(&p, &path.returns).unwrap();
        let b = hamilton_filter(&scaled_p, &ReturnSeries::from_values(scaled_y)).unwrap();
        for (x, y) in a.prob_high.iter().zip(&b.prob_high) {
            assert!((x - y).abs() < 1e-9);
        }
        let n = (path.returns.len() - 1) as f64;
        assert!((a.log_likelihood - (b.log_likelihood + n * k.ln())).abs() < 1e-7);
    }
}

#[test]
fn joint_distribution_sums_to_one_everywhere() {
    let mut r = rng(5);
    for seed in 0..20u64 {
        let p = random_params(&mut r);
        let path = simulate_swarch(&p, 300, seed).unwrap();
        let out = hamilton_filter(&p, &path.returns).unwrap();
        for j in &out.joint_probs {
            assert!((j.iter().flatten().sum::<f64>() - 1.0).abs() < 1e-10);
        }
    }
}
