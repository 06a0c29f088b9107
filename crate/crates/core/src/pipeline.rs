//! The daily early-warning loop.
//!
//! At every decision day `t` the loop sees rows `0..=t` only. It refits the
//! switching model (every `refit_stride` days, warm-started), filters the
//! regime probabilities, re-selects the two-peak cutoff, relabels the whole
//! history, and asks the predictor for `y_hat[t + 1]`. A warning is raised
//! when `y_hat[t + 1] >= cutoff[t]`.
//!
//! Each record carries a SHA-256 digest of the rows it could see, which
//! makes the no-look-ahead property checkable from outside.

use std::io::Write;

use chrono::NaiveDate;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::data::{FeaturePanel, ReturnSeries, Standardizer, LOG_RETURN};
use crate::error::{Error, Result};
use crate::neural::{Model, PredictorKind, TrainConfig, WindowDataset};
use crate::regime::{estimate_swarch_with, hamilton_filter, EstimateConfig, SwarchParams};
use crate::seed::derive_seed;
use crate::threshold::{label_values, two_peak_cutoff, TwoPeakConfig, FALLBACK_CUTOFF};

/// Minimum history the two-peak rule needs before it is trusted.
const CUTOFF_MIN_VALUES: usize = 30;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum RetrainPolicy {
    /// Fresh training every `retrain_stride` decision days.
    #[default]
    Periodic,
    /// One training at the end of the training range.
    Once,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct EwsConfig {
    pub seed: u64,
    pub window: usize,
    pub refit_stride: usize,
    pub predictor: PredictorKind,
    /// Fraction of rows in the training range.
    pub split: f64,
    /// Observations required before the first estimation.
    pub warmup: usize,
    pub retrain: RetrainPolicy,
    /// Defaults to `refit_stride`.
    pub retrain_stride: Option<usize>,
    /// Cold starts added to the warm start on every refit after the first.
    pub cold_starts: usize,
    /// Explanatory columns; `None` uses every panel column.
    pub features: Option<Vec<String>>,
    /// `window` and `seed` here are overridden by the top-level values.
    pub train: TrainConfig,
    pub threshold: TwoPeakConfig,
    /// `seed` and `warm_start` here are set by the loop.
    pub estimate: EstimateConfig,
}

impl Default for EwsConfig {
    fn default() -> Self {
        Self {
            seed: 0,
            window: 5,
            refit_stride: 1,
            predictor: PredictorKind::Lstm,
            split: 0.7,
            warmup: 100,
            retrain: RetrainPolicy::Periodic,
            retrain_stride: None,
            cold_starts: 1,
            features: None,
            train: TrainConfig::default(),
            threshold: TwoPeakConfig::default(),
            estimate: EstimateConfig::default(),
        }
    }
}

impl EwsConfig {
    pub fn validate(&self) -> Result<()> {
        if self.window == 0 {
            return Err(Error::validation("window must be at least 1"));
        }
        if self.refit_stride == 0 || self.retrain_stride == Some(0) {
            return Err(Error::validation("strides must be at least 1"));
        }
        if !(self.split > 0.0 && self.split < 1.0) {
            return Err(Error::validation(format!("split {} outside (0, 1)", self.split)));
        }
        if self.warmup < 3 {
            return Err(Error::validation("warmup must be at least 3 observations"));
        }
        self.train_config().validate()
    }

    /// Training settings as the loop applies them.
    pub fn train_config(&self) -> TrainConfig {
        TrainConfig {
            window: self.window,
            seed: derive_seed(self.seed, "train"),
            ..self.train
        }
    }

    pub fn to_toml(&self) -> Result<String> {
        toml::to_string(self).map_err(|e| Error::validation(format!("config serialization: {e}")))
    }

    pub fn from_toml(s: &str) -> Result<Self> {
        let cfg: EwsConfig = toml::from_str(s).map_err(|e| Error::validation(format!("config: {e}")))?;
        cfg.validate()?;
        Ok(cfg)
    }
}

/// One decision day's output.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct WarningRecord {
    /// Row index of the decision day `t`.
    pub step: usize,
    pub date: NaiveDate,
    /// The day the warning is about (`t + 1`).
    pub target_date: NaiveDate,
    pub prob_high: Option<f64>,
    pub cutoff: Option<f64>,
    pub predicted: Option<f64>,
    pub signal: u8,
    /// Real-time label of `t + 1`, known only once that day is processed.
    pub true_label: Option<u8>,
    /// Target day lies in the test range.
    pub in_test: bool,
    pub suppressed: bool,
    pub estimation_failed: bool,
    pub input_digest: String,
}

/// Chronological split point for `n` rows; both parts must hold more than
/// `window` rows.
pub fn split_index(n: usize, fraction: f64, window: usize) -> Result<usize> {
    if !(fraction > 0.0 && fraction < 1.0) {
        return Err(Error::validation(format!("split {fraction} outside (0, 1)")));
    }
    let k = (n as f64 * fraction).round() as usize;
    if k == 0 || n - k < window + 1 {
        return Err(Error::validation(format!(
            "split of {n} rows at {fraction} leaves {} test rows, need at least {}",
            n.saturating_sub(k),
            window + 1
        )));
    }
    Ok(k)
}

pub fn split_train_test(panel: &FeaturePanel, fraction: f64, window: usize) -> Result<(FeaturePanel, FeaturePanel)> {
    let k = split_index(panel.n_rows(), fraction, window)?;
    Ok((panel.slice(0..k), panel.slice(k..panel.n_rows())))
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct TrainingEvent {
    pub step: usize,
    pub windows: usize,
    pub final_loss: f64,
}

#[derive(Debug, Clone)]
pub struct EwsRun {
    pub records: Vec<WarningRecord>,
    /// First row of the test range.
    pub test_start: usize,
    pub refits: usize,
    pub failed_refits: usize,
    pub trainings: Vec<TrainingEvent>,
    pub final_params: Option<SwarchParams>,
    /// Latest predictor and the standardizer it was trained with.
    pub model: Option<(Model, Standardizer)>,
}

impl EwsRun {
    /// Records whose target day lies in the test range.
    pub fn test_records(&self) -> &[WarningRecord] {
        let from = self.records.partition_point(|r| !r.in_test);
        &self.records[from..]
    }
}

fn row_digest(h: &mut Sha256, date: NaiveDate, row: impl Iterator<Item = f64>) {
    h.update(date.to_string().as_bytes());
    for v in row {
        h.update(v.to_le_bytes());
    }
}

/// Predictor inputs for rows `0..=last`: standardized explanatory columns,
/// then the filtering probability and the crisis label.
fn input_rows(cols: &[&[f64]], std: &Standardizer, prob: &[f64], labels: &[u8], rows: std::ops::Range<usize>) -> Vec<Vec<f64>> {
    rows.map(|i| {
        let mut r: Vec<f64> = cols.iter().map(|c| c[i]).collect();
        std.apply(&mut r);
        r.push(prob[i]);
        r.push(f64::from(labels[i]));
        r
    })
    .collect()
}

/// Runs the daily loop over the whole panel and returns one record per
/// decision day `t` in `window - 1 ..= T - 2` (`T - window` records).
pub fn run_ews(panel: &FeaturePanel, cfg: &EwsConfig) -> Result<EwsRun> {
    cfg.validate()?;
    let n = panel.n_rows();
    let l = cfg.window;
    let returns = panel
        .column(LOG_RETURN)
        .ok_or_else(|| Error::validation(format!("panel has no `{LOG_RETURN}` column")))?;
    if n <= l.max(cfg.warmup) {
        return Err(Error::InsufficientData {
            needed: l.max(cfg.warmup) + 1,
            got: n,
        });
    }
    let feature_names: Vec<String> = cfg.features.clone().unwrap_or_else(|| panel.names().to_vec());
    let mut cols = Vec::with_capacity(feature_names.len());
    for name in &feature_names {
        cols.push(
            panel
                .column(name)
                .ok_or_else(|| Error::validation(format!("no feature column `{name}`")))?,
        );
    }
    let test_start = split_index(n, cfg.split, l)?;
    let first = (l - 1).max(cfg.warmup - 1);
    let retrain_stride = cfg.retrain_stride.unwrap_or(cfg.refit_stride);
    let train_cfg = cfg.train_config();
    let dates = panel.dates();

    let mut hasher = Sha256::new();
    let mut params: Option<SwarchParams> = None;
    let mut last_refit: Option<usize> = None;
    let mut model: Option<(Model, Standardizer)> = None;
    let mut last_train: Option<usize> = None;
    let mut realtime = vec![None; n];
    let mut run = EwsRun {
        records: Vec::with_capacity(n - l),
        test_start,
        refits: 0,
        failed_refits: 0,
        trainings: Vec::new(),
        final_params: None,
        model: None,
    };

    for t in 0..n {
        row_digest(&mut hasher, dates[t], panel.columns().iter().map(|c| c[t]));
        if t + 1 < l {
            continue;
        }
        let deciding = t + 1 < n;
        let mut record = WarningRecord {
            step: t,
            date: dates[t],
            target_date: if deciding { dates[t + 1] } else { dates[t] },
            prob_high: None,
            cutoff: None,
            predicted: None,
            signal: 0,
            true_label: None,
            in_test: t + 1 >= test_start,
            suppressed: true,
            estimation_failed: false,
            input_digest: format!("{:x}", hasher.clone().finalize()),
        };
        if t < first {
            run.records.push(record);
            continue;
        }

        let visible = ReturnSeries::new(dates[..=t].to_vec(), returns[..=t].to_vec())?;
        if last_refit.is_none_or(|r| t - r >= cfg.refit_stride) {
            let ecfg = EstimateConfig {
                starts: if params.is_some() { cfg.cold_starts } else { cfg.estimate.starts },
                seed: derive_seed(cfg.seed, &format!("estimate/{t}")),
                warm_start: params,
                ..cfg.estimate.clone()
            };
            run.refits += 1;
            last_refit = Some(t);
            match estimate_swarch_with(&visible, &ecfg) {
                Ok(fit) => params = Some(fit.params),
                Err(e) => {
                    run.failed_refits += 1;
                    record.estimation_failed = true;
                    log::warn!("estimation failed at {}: {e}; keeping previous parameters", dates[t]);
                }
            }
        }
        let filtered = params.as_ref().map(|p| hamilton_filter(p, &visible));
        let prob = match filtered {
            Some(Ok(f)) => f.prob_high,
            Some(Err(e)) => {
                log::warn!("filter failed at {}: {e}", dates[t]);
                record.estimation_failed = true;
                if deciding {
                    run.records.push(record);
                }
                continue;
            }
            None => {
                if deciding {
                    run.records.push(record);
                }
                continue;
            }
        };
        let cutoff = if prob.len() >= CUTOFF_MIN_VALUES {
            two_peak_cutoff(&prob, &cfg.threshold)?.cutoff
        } else {
            FALLBACK_CUTOFF
        };
        let labels = label_values(&prob, cutoff);
        realtime[t] = Some(labels[t]);
        if !deciding {
            break;
        }
        record.prob_high = Some(prob[t]);
        record.cutoff = Some(cutoff);

        let train_due = match cfg.retrain {
            RetrainPolicy::Periodic => last_train.is_none_or(|r| t - r >= retrain_stride),
            RetrainPolicy::Once => model.is_none() && t + 1 >= test_start,
        };
        if train_due && t >= l {
            let owned: Vec<Vec<f64>> = cols.iter().map(|c| c[..=t].to_vec()).collect();
            let std = Standardizer::fit(&owned, 0..t + 1);
            let rows = input_rows(&cols, &std, &prob, &labels, 0..t + 1);
            let data = WindowDataset::from_rows(&rows, &labels, l)?;
            match Model::train(cfg.predictor, &data, &train_cfg) {
                Ok((m, report)) => {
                    run.trainings.push(TrainingEvent {
                        step: t,
                        windows: data.len(),
                        final_loss: report.epoch_losses.last().copied().unwrap_or(f64::NAN),
                    });
                    log::debug!("trained predictor at {} on {} windows", dates[t], data.len());
                    model = Some((m, std));
                    last_train = Some(t);
                }
                Err(e @ Error::Divergence { .. }) => log::warn!("training diverged at {}: {e}", dates[t]),
                Err(e) => return Err(e),
            }
        }
        if let Some((m, std)) = &model {
            let window: Vec<f64> = input_rows(&cols, std, &prob, &labels, t + 1 - l..t + 1).concat();
            let y_hat = m.predict(&window)?;
            record.predicted = Some(y_hat);
            record.signal = u8::from(y_hat >= cutoff);
            record.suppressed = false;
        }
        run.records.push(record);
    }

    for r in &mut run.records {
        r.true_label = realtime[r.step + 1];
    }
    run.final_params = params;
    run.model = model;
    Ok(run)
}

/// Signals obtained by replaying recorded predictions against a constant
/// cutoff; suppressed records stay silent.
pub fn replay_signals(records: &[WarningRecord], cutoff: f64) -> Vec<u8> {
    records
        .iter()
        .map(|r| r.predicted.map_or(0, |y| u8::from(y >= cutoff)))
        .collect()
}

pub fn write_records<W: Write>(records: &[WarningRecord], writer: W) -> Result<()> {
    let mut w = csv::Writer::from_writer(writer);
    for r in records {
        w.serialize(r)?;
    }
    w.flush()?;
    Ok(())
}

pub fn read_records(path: &std::path::Path) -> Result<Vec<WarningRecord>> {
    let mut rdr = csv::Reader::from_path(path)?;
    let mut out = Vec::new();
    for (i, rec) in rdr.deserialize().enumerate() {
        out.push(rec.map_err(|e| Error::Parse {
            path: path.to_path_buf(),
            line: i as u64 + 2,
            msg: e.to_string(),
        })?);
    }
    Ok(out)
}
