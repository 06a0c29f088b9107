//! Classification metrics, crisis-onset analysis and chronological k-fold
//! cross-validation.

use std::io::Write;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::neural::{bce, Model, PredictorKind, TrainConfig, WindowDataset};
use crate::seed::derive_seed;

/// Crisis (label 1) is the positive class.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
pub struct ConfusionMatrix {
    pub tp: u64,
    #[serde(rename = "fn")]
    pub fn_: u64,
    pub fp: u64,
    pub tn: u64,
}

impl ConfusionMatrix {
    pub fn total(&self) -> u64 {
        self.tp + self.fn_ + self.fp + self.tn
    }
}

fn same_len(a: usize, b: usize, what: &str) -> Result<()> {
    if a != b {
        return Err(Error::validation(format!("{what}: lengths differ ({a} vs {b})")));
    }
    Ok(())
}

pub fn confusion(labels: &[u8], signals: &[u8]) -> Result<ConfusionMatrix> {
    same_len(labels.len(), signals.len(), "confusion")?;
    let mut cm = ConfusionMatrix::default();
    for (&y, &s) in labels.iter().zip(signals) {
        if y > 1 || s > 1 {
            return Err(Error::validation("labels and signals must be 0 or 1"));
        }
        match (y, s) {
            (1, 1) => cm.tp += 1,
            (1, 0) => cm.fn_ += 1,
            (0, 1) => cm.fp += 1,
            _ => cm.tn += 1,
        }
    }
    Ok(cm)
}

pub fn accuracy(cm: &ConfusionMatrix) -> Result<f64> {
    match cm.total() {
        0 => Err(Error::UndefinedMetric("accuracy")),
        n => Ok((cm.tp + cm.tn) as f64 / n as f64),
    }
}

pub fn tpr_fpr(cm: &ConfusionMatrix) -> Result<(f64, f64)> {
    if cm.tp + cm.fn_ == 0 {
        return Err(Error::UndefinedMetric("tpr"));
    }
    if cm.fp + cm.tn == 0 {
        return Err(Error::UndefinedMetric("fpr"));
    }
    Ok((
        cm.tp as f64 / (cm.tp + cm.fn_) as f64,
        cm.fp as f64 / (cm.fp + cm.tn) as f64,
    ))
}

/// Share of crisis days that were flagged. Numerically the TPR; kept as a
/// separate name because reports quote it as "% of correct predictions".
pub fn crisis_recall(cm: &ConfusionMatrix) -> Result<f64> {
    if cm.tp + cm.fn_ == 0 {
        return Err(Error::UndefinedMetric("crisis_recall"));
    }
    Ok(cm.tp as f64 / (cm.tp + cm.fn_) as f64)
}

/// Mean binary cross-entropy with predictions clamped away from 0 and 1.
pub fn bce_loss(labels: &[u8], probs: &[f64]) -> Result<f64> {
    same_len(labels.len(), probs.len(), "bce_loss")?;
    if labels.is_empty() {
        return Err(Error::UndefinedMetric("bce_loss"));
    }
    let sum: f64 = labels.iter().zip(probs).map(|(&y, &p)| bce(f64::from(y), p)).sum();
    Ok(sum / labels.len() as f64)
}

pub fn rmse(labels: &[u8], probs: &[f64]) -> Result<f64> {
    same_len(labels.len(), probs.len(), "rmse")?;
    if labels.is_empty() {
        return Err(Error::UndefinedMetric("rmse"));
    }
    let sq: f64 = labels.iter().zip(probs).map(|(&y, &p)| (p - f64::from(y)).powi(2)).sum();
    Ok((sq / labels.len() as f64).sqrt())
}

pub fn sar(accuracy: f64, auc: f64, rmse: f64) -> f64 {
    (accuracy + auc + (1.0 - rmse)) / 3.0
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Roc {
    /// `(fpr, tpr)` from `(0, 0)` to `(1, 1)`.
    pub points: Vec<(f64, f64)>,
    pub auc: f64,
}

/// ROC staircase over the distinct scores (highest first) with the
/// `+inf`/`-inf` sentinels at the ends; tied scores move together.
pub fn roc_auc(labels: &[u8], scores: &[f64]) -> Result<Roc> {
    same_len(labels.len(), scores.len(), "roc_auc")?;
    let pos = labels.iter().filter(|&&y| y == 1).count();
    let neg = labels.len() - pos;
    if pos == 0 || neg == 0 {
        return Err(Error::UndefinedMetric("auc"));
    }
    if scores.iter().any(|s| s.is_nan()) {
        return Err(Error::validation("NaN score"));
    }
    let mut order: Vec<usize> = (0..scores.len()).collect();
    order.sort_by(|&a, &b| scores[b].total_cmp(&scores[a]));
    let mut points = vec![(0.0, 0.0)];
    let (mut tp, mut fp) = (0usize, 0usize);
    let mut i = 0;
    while i < order.len() {
        let s = scores[order[i]];
        while i < order.len() && scores[order[i]] == s {
            if labels[order[i]] == 1 {
                tp += 1;
            } else {
                fp += 1;
            }
            i += 1;
        }
        points.push((fp as f64 / neg as f64, tp as f64 / pos as f64));
    }
    let auc = points
        .windows(2)
        .map(|w| (w[1].0 - w[0].0) * (w[1].1 + w[0].1) / 2.0)
        .sum();
    Ok(Roc { points, auc })
}

pub fn write_roc_csv<W: Write>(roc: &Roc, writer: W) -> Result<()> {
    let mut w = csv::Writer::from_writer(writer);
    w.write_record(["fpr", "tpr"])?;
    for (x, y) in &roc.points {
        w.write_record([x.to_string(), y.to_string()])?;
    }
    w.flush()?;
    Ok(())
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MetricsReport {
    pub n: usize,
    pub confusion: ConfusionMatrix,
    pub accuracy: f64,
    pub crisis_recall: f64,
    pub bce_loss: f64,
    pub tpr: f64,
    pub fpr: f64,
    pub auc: f64,
    pub rmse: f64,
    pub sar: f64,
    /// Written separately as two-column text.
    #[serde(skip)]
    pub roc_points: Vec<(f64, f64)>,
}

impl MetricsReport {
    /// `probs` score the ROC, loss and RMSE; `signals` fill the confusion
    /// matrix. Both classes must be present.
    pub fn compute(labels: &[u8], probs: &[f64], signals: &[u8]) -> Result<MetricsReport> {
        let cm = confusion(labels, signals)?;
        let acc = accuracy(&cm)?;
        let (tpr, fpr) = tpr_fpr(&cm)?;
        let roc = roc_auc(labels, probs)?;
        let rmse = rmse(labels, probs)?;
        Ok(MetricsReport {
            n: labels.len(),
            confusion: cm,
            accuracy: acc,
            crisis_recall: crisis_recall(&cm)?,
            bce_loss: bce_loss(labels, probs)?,
            tpr,
            fpr,
            auc: roc.auc,
            rmse,
            sar: sar(acc, roc.auc, rmse),
            roc_points: roc.points,
        })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OnsetReport {
    pub horizon: usize,
    pub total_crisis_days: usize,
    pub correct_predictions: usize,
    pub pct_correct: f64,
    pub total_onsets: usize,
    pub predicted_onsets: usize,
    pub pct_onsets: f64,
    pub signal_onsets: usize,
    pub false_onset_alarms_pct: f64,
    pub avg_days_ahead: f64,
}

fn rising_edges(x: &[u8]) -> Vec<usize> {
    (0..x.len()).filter(|&i| x[i] == 1 && (i == 0 || x[i - 1] == 0)).collect()
}

fn pct(num: usize, den: usize) -> f64 {
    if den == 0 {
        0.0
    } else {
        100.0 * num as f64 / den as f64
    }
}

/// Onsets are rising edges of `labels`. An onset at `i` counts as predicted
/// when a signal fires in `[i - horizon, i]`; its lead time is measured from
/// the earliest such signal that falls in the calm stretch before `i`. A
/// signal onset with no label onset in `[k, k + horizon]` is a false alarm.
/// Percentages with an empty denominator are reported as 0.
pub fn onset_analysis(labels: &[u8], signals: &[u8], horizon: usize) -> Result<OnsetReport> {
    same_len(labels.len(), signals.len(), "onset_analysis")?;
    let onsets = rising_edges(labels);
    let mut predicted = 0;
    let mut lead_total = 0usize;
    for &i in &onsets {
        let from = i.saturating_sub(horizon);
        if !signals[from..=i].contains(&1) {
            continue;
        }
        predicted += 1;
        // Lead time only counts signals raised while calm; a warning still
        // standing from the previous crisis predicts with zero lead.
        let calm_start = labels[..i].iter().rposition(|&y| y == 1).map_or(0, |j| j + 1);
        if let Some(j) = (from.max(calm_start)..=i).find(|&j| signals[j] == 1) {
            lead_total += i - j;
        }
    }
    let signal_onsets = rising_edges(signals);
    let false_alarms = signal_onsets
        .iter()
        .filter(|&&k| !onsets.iter().any(|&i| i >= k && i <= k + horizon))
        .count();
    let crisis_days = labels.iter().filter(|&&y| y == 1).count();
    let correct = labels.iter().zip(signals).filter(|(&y, &s)| y == 1 && s == 1).count();
    Ok(OnsetReport {
        horizon,
        total_crisis_days: crisis_days,
        correct_predictions: correct,
        pct_correct: pct(correct, crisis_days),
        total_onsets: onsets.len(),
        predicted_onsets: predicted,
        pct_onsets: pct(predicted, onsets.len()),
        signal_onsets: signal_onsets.len(),
        false_onset_alarms_pct: pct(false_alarms, signal_onsets.len()),
        avg_days_ahead: if predicted == 0 {
            0.0
        } else {
            lead_total as f64 / predicted as f64
        },
    })
}

/// Contiguous `[start, end)` bounds of `k` folds over `n` items; the first
/// `n % k` folds get one extra item.
pub fn fold_bounds(n: usize, k: usize) -> Result<Vec<(usize, usize)>> {
    if k < 2 {
        return Err(Error::validation("k-fold needs k >= 2"));
    }
    if n < k {
        return Err(Error::validation(format!("{n} samples cannot fill {k} folds")));
    }
    let (base, extra) = (n / k, n % k);
    let mut out = Vec::with_capacity(k);
    let mut start = 0;
    for f in 0..k {
        let len = base + usize::from(f < extra);
        out.push((start, start + len));
        start += len;
    }
    Ok(out)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FoldScore {
    pub fold: usize,
    pub n: usize,
    pub accuracy: f64,
    pub bce_loss: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CvReport {
    pub k: usize,
    pub folds: Vec<FoldScore>,
    pub mean_accuracy: f64,
    pub mean_bce_loss: f64,
}

/// Chronological k-fold over the windows of `data`: each fold is a
/// contiguous block, the model is trained on every other window and scored
/// at `threshold`. Folds train in parallel with seeds derived from
/// `cfg.seed` and the fold index.
pub fn kfold_cv(
    data: &WindowDataset,
    kind: PredictorKind,
    cfg: &TrainConfig,
    k: usize,
    threshold: f64,
) -> Result<CvReport> {
    let bounds = fold_bounds(data.len(), k)?;
    let folds: Vec<FoldScore> = bounds
        .par_iter()
        .enumerate()
        .map(|(f, &(a, b))| {
            let train_idx: Vec<usize> = (0..a).chain(b..data.len()).collect();
            let test_idx: Vec<usize> = (a..b).collect();
            let fold_cfg = TrainConfig {
                seed: derive_seed(cfg.seed, &format!("fold/{f}")),
                ..*cfg
            };
            let (model, _) = Model::train(kind, &data.subset(&train_idx), &fold_cfg)?;
            let test = data.subset(&test_idx);
            let probs = (0..test.len())
                .map(|i| model.predict(test.window(i)))
                .collect::<Result<Vec<f64>>>()?;
            let labels: Vec<u8> = test.targets().iter().map(|&y| y as u8).collect();
            let signals: Vec<u8> = probs.iter().map(|&p| u8::from(p >= threshold)).collect();
            Ok(FoldScore {
                fold: f,
                n: test.len(),
                accuracy: accuracy(&confusion(&labels, &signals)?)?,
                bce_loss: bce_loss(&labels, &probs)?,
            })
        })
        .collect::<Result<_>>()?;
    let kf = folds.len() as f64;
    Ok(CvReport {
        k,
        mean_accuracy: folds.iter().map(|f| f.accuracy).sum::<f64>() / kf,
        mean_bce_loss: folds.iter().map(|f| f.bce_loss).sum::<f64>() / kf,
        folds,
    })
}
