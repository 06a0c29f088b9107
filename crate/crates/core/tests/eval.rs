use ews_core::eval::{accuracy, bce_loss, confusion, kfold_cv, onset_analysis, roc_auc, sar};
use ews_core::neural::{PredictorKind, TrainConfig, WindowDataset};
use proptest::prelude::*;

fn labelled(n: usize) -> impl Strategy<Value = (Vec<u8>, Vec<f64>)> {
    (proptest::collection::vec(0u8..2, n..n + 60), proptest::collection::vec(0.0f64..1.0, n + 60)).prop_map(
        |(mut y, s)| {
            y[0] = 0;
            y[1] = 1;
            let s = s[..y.len()].to_vec();
            (y, s)
        },
    )
}

proptest! {
    #[test]
    fn auc_ignores_monotone_transforms((y, s) in labelled(5)) {
        let a = roc_auc(&y, &s).unwrap().auc;
        let t: Vec<f64> = s.iter().map(|v| (3.0 * v).exp() - 7.0).collect();
        prop_assert!((a - roc_auc(&y, &t).unwrap().auc).abs() < 1e-12);
    }

    #[test]
    fn roc_is_monotone_from_origin_to_corner((y, s) in labelled(5)) {
        let roc = roc_auc(&y, &s).unwrap();
        prop_assert_eq!(roc.points[0], (0.0, 0.0));
        prop_assert_eq!(*roc.points.last().unwrap(), (1.0, 1.0));
        for w in roc.points.windows(2) {
            prop_assert!(w[1].0 >= w[0].0 && w[1].1 >= w[0].1);
        }
        prop_assert!((0.0..=1.0).contains(&roc.auc));
    }

    #[test]
    fn bce_at_prevalence_is_entropy((y, _) in labelled(5)) {
        let p = y.iter().map(|&v| f64::from(v)).sum::<f64>() / y.len() as f64;
        let h = -(p * p.ln() + (1.0 - p) * (1.0 - p).ln());
        prop_assert!((bce_loss(&y, &vec![p; y.len()]).unwrap() - h).abs() < 1e-9);
    }

    #[test]
    fn sar_is_symmetric(a in 0.0f64..1.0, b in 0.0f64..1.0, r in 0.0f64..1.0) {
        prop_assert_eq!(sar(a, b, r), sar(b, a, r));
    }

    #[test]
    fn accuracy_counts_agreements(y in proptest::collection::vec(0u8..2, 1..200), flips in proptest::collection::vec(any::<bool>(), 200)) {
        let s: Vec<u8> = y.iter().zip(&flips).map(|(&v, &f)| if f { 1 - v } else { v }).collect();
        let agree = y.iter().zip(&s).filter(|(a, b)| a == b).count();
        let acc = accuracy(&confusion(&y, &s).unwrap()).unwrap();
        prop_assert!((acc - agree as f64 / y.len() as f64).abs() < 1e-12);
    }

    #[test]
    fn perfect_signals_predict_every_onset(y in proptest::collection::vec(0u8..2, 1..200)) {
        let r = onset_analysis(&y, &y, 5).unwrap();
        prop_assert_eq!(r.predicted_onsets, r.total_onsets);
        prop_assert_eq!(r.correct_predictions, r.total_crisis_days);
    }
}

#[test]
fn kfold_is_deterministic_and_covers_every_window() {
    let rows: Vec<Vec<f64>> = (0..120).map(|i| vec![((i / 10) % 2) as f64]).collect();
    let labels: Vec<u8> = (0..120).map(|i| ((i / 10) % 2) as u8).collect();
    let data = WindowDataset::from_rows(&rows, &labels, 3).unwrap();
    let cfg = TrainConfig {
        window: 3,
        hidden: 4,
        epochs: 20,
        learning_rate: 0.5,
        ..TrainConfig::default()
    };
    let a = kfold_cv(&data, PredictorKind::Lstm, &cfg, 4, 0.5).unwrap();
    let b = kfold_cv(&data, PredictorKind::Lstm, &cfg, 4, 0.5).unwrap();
    assert_eq!(a, b);
    assert_eq!(a.folds.iter().map(|f| f.n).sum::<usize>(), data.len());
    assert!(a.mean_accuracy > 0.8, "{}", a.mean_accuracy);
}
