//! From-scratch recurrent and feedforward crisis predictors trained on
//! binary cross-entropy with plain mini-batch gradient descent.

mod lstm;
mod mlp;

pub use lstm::{lstm_cell_step, lstm_forward, parameter_count, LstmNetwork};
pub use mlp::MlpNetwork;

use std::io::{BufRead, Write};

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::data::FeaturePanel;
use crate::error::{Error, Result};

pub const PROB_CLAMP: f64 = 1e-7;

pub fn sigmoid(z: f64) -> f64 {
    1.0 / (1.0 + (-z).exp())
}

/// Binary cross-entropy of one prediction, clamped away from 0 and 1.
pub fn bce(y: f64, y_hat: f64) -> f64 {
    let p = y_hat.clamp(PROB_CLAMP, 1.0 - PROB_CLAMP);
    -(y * p.ln() + (1.0 - y) * (1.0 - p).ln())
}

/// A differentiable binary classifier over a flattened `window x features`
/// input with its parameters in one flat vector.
pub trait Network {
    fn params(&self) -> &[f64];
    fn params_mut(&mut self) -> &mut [f64];
    fn flat_input_len(&self) -> usize;
    fn predict_flat(&self, window: &[f64]) -> f64;
    /// Adds d(loss)/d(params) for one sample into `grad` and returns the loss.
    fn accumulate_gradient(&self, window: &[f64], target: f64, grad: &mut [f64]) -> f64;
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct TrainConfig {
    pub window: usize,
    pub batch_size: usize,
    pub epochs: usize,
    pub learning_rate: f64,
    pub hidden: usize,
    /// Global gradient-norm clip; `0` disables clipping.
    pub clip_norm: f64,
    pub seed: u64,
}

impl Default for TrainConfig {
    fn default() -> Self {
        Self {
            window: 5,
            batch_size: 20,
            epochs: 100,
            learning_rate: 0.05,
            hidden: 32,
            clip_norm: 5.0,
            seed: 0,
        }
    }
}

impl TrainConfig {
    pub fn validate(&self) -> Result<()> {
        if self.window == 0 || self.batch_size == 0 || self.epochs == 0 || self.hidden == 0 {
            return Err(Error::validation("window, batch_size, epochs and hidden must be at least 1"));
        }
        if !(self.learning_rate >= 0.0 && self.learning_rate.is_finite()) {
            return Err(Error::validation("learning rate must be a non-negative number"));
        }
        Ok(())
    }
}

/// Sliding windows over daily rows: the window ending at day `t` is paired
/// with the label of day `t + 1`.
#[derive(Debug, Clone, PartialEq)]
pub struct WindowDataset {
    dim: usize,
    window: usize,
    inputs: Vec<f64>,
    targets: Vec<f64>,
    /// Index of the last row of each window.
    ends: Vec<usize>,
}

impl WindowDataset {
    pub fn from_rows(rows: &[Vec<f64>], labels: &[u8], window: usize) -> Result<Self> {
        if rows.len() != labels.len() {
            return Err(Error::Shape(format!("{} rows vs {} labels", rows.len(), labels.len())));
        }
        let ends: Vec<usize> = if rows.len() > window { (window - 1..rows.len() - 1).collect() } else { Vec::new() };
        Self::from_rows_at(rows, labels, window, &ends)
    }

    /// Windows ending at each index in `ends`, each labeled with the next day.
    pub fn from_rows_at(rows: &[Vec<f64>], labels: &[u8], window: usize, ends: &[usize]) -> Result<Self> {
        if window == 0 {
            return Err(Error::validation("window must be at least 1"));
        }
        let dim = rows.first().map_or(0, Vec::len);
        if rows.iter().any(|r| r.len() != dim) {
            return Err(Error::Shape("ragged feature rows".into()));
        }
        let mut inputs = Vec::with_capacity(ends.len() * window * dim);
        let mut targets = Vec::with_capacity(ends.len());
        for &t in ends {
            if t + 1 < window || t + 1 >= rows.len() {
                return Err(Error::Shape(format!("no complete window ending at {t}")));
            }
            for r in &rows[t + 1 - window..=t] {
                inputs.extend_from_slice(r);
            }
            targets.push(f64::from(labels[t + 1]));
        }
        Ok(Self {
            dim,
            window,
            inputs,
            targets,
            ends: ends.to_vec(),
        })
    }

    pub fn from_panel(panel: &FeaturePanel, labels: &[u8], window: usize) -> Result<Self> {
        let rows: Vec<Vec<f64>> = (0..panel.n_rows()).map(|i| panel.row(i)).collect();
        Self::from_rows(&rows, labels, window)
    }

    pub fn len(&self) -> usize {
        self.targets.len()
    }

    pub fn is_empty(&self) -> bool {
        self.targets.is_empty()
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn window_len(&self) -> usize {
        self.window
    }

    pub fn window(&self, i: usize) -> &[f64] {
        let n = self.window * self.dim;
        &self.inputs[i * n..(i + 1) * n]
    }

    pub fn target(&self, i: usize) -> f64 {
        self.targets[i]
    }

    pub fn targets(&self) -> &[f64] {
        &self.targets
    }

    pub fn ends(&self) -> &[usize] {
        &self.ends
    }

    pub fn subset(&self, idx: &[usize]) -> WindowDataset {
        let mut inputs = Vec::with_capacity(idx.len() * self.window * self.dim);
        for &i in idx {
            inputs.extend_from_slice(self.window(i));
        }
        WindowDataset {
            dim: self.dim,
            window: self.window,
            inputs,
            targets: idx.iter().map(|&i| self.targets[i]).collect(),
            ends: idx.iter().map(|&i| self.ends[i]).collect(),
        }
    }
}

/// Mean loss and mean gradient over the samples in `idx`.
pub fn batch_gradient<N: Network>(net: &N, data: &WindowDataset, idx: &[usize]) -> (f64, Vec<f64>) {
    let mut grad = vec![0.0; net.params().len()];
    let mut loss = 0.0;
    for &i in idx {
        loss += net.accumulate_gradient(data.window(i), data.target(i), &mut grad);
    }
    let n = idx.len().max(1) as f64;
    grad.iter_mut().for_each(|g| *g /= n);
    (loss / n, grad)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrainReport {
    /// Mean pre-update batch loss per epoch.
    pub epoch_losses: Vec<f64>,
    pub clipped_steps: usize,
}

/// Mini-batch gradient descent; windows are reshuffled every epoch from a
/// stream seeded by `cfg.seed`.
pub fn train_network<N: Network>(net: &mut N, data: &WindowDataset, cfg: &TrainConfig) -> Result<TrainReport> {
    cfg.validate()?;
    if data.is_empty() {
        return Err(Error::InsufficientData { needed: 1, got: 0 });
    }
    if data.window_len() * data.dim() != net.flat_input_len() {
        return Err(Error::Shape(format!(
            "dataset windows hold {} values, network expects {}",
            data.window_len() * data.dim(),
            net.flat_input_len()
        )));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed ^ 0x5348_5546_464c_4521);
    let mut order: Vec<usize> = (0..data.len()).collect();
    let mut report = TrainReport {
        epoch_losses: Vec::with_capacity(cfg.epochs),
        clipped_steps: 0,
    };
    for epoch in 0..cfg.epochs {
        order.shuffle(&mut rng);
        let mut total = 0.0;
        for batch in order.chunks(cfg.batch_size) {
            let (loss, mut grad) = batch_gradient(net, data, batch);
            if !loss.is_finite() {
                return Err(Error::Divergence { epoch, loss });
            }
            total += loss * batch.len() as f64;
            let norm = grad.iter().map(|g| g * g).sum::<f64>().sqrt();
            if !norm.is_finite() {
                return Err(Error::Divergence { epoch, loss: norm });
            }
            if cfg.clip_norm > 0.0 && norm > cfg.clip_norm {
                let s = cfg.clip_norm / norm;
                grad.iter_mut().for_each(|g| *g *= s);
                report.clipped_steps += 1;
            }
            for (p, g) in net.params_mut().iter_mut().zip(&grad) {
                *p -= cfg.learning_rate * g;
            }
        }
        let epoch_loss = total / data.len() as f64;
        if !epoch_loss.is_finite() {
            return Err(Error::Divergence { epoch, loss: epoch_loss });
        }
        report.epoch_losses.push(epoch_loss);
    }
    if report.clipped_steps > 0 {
        log::debug!("gradient clipped on {} steps", report.clipped_steps);
    }
    Ok(report)
}

pub fn train_lstm_on(data: &WindowDataset, cfg: &TrainConfig) -> Result<(LstmNetwork, TrainReport)> {
    let mut net = LstmNetwork::init(data.dim(), cfg.hidden, data.window_len(), cfg.seed)?;
    let report = train_network(&mut net, data, cfg)?;
    Ok((net, report))
}

pub fn train_mlp_on(data: &WindowDataset, cfg: &TrainConfig) -> Result<(MlpNetwork, TrainReport)> {
    let mut net = MlpNetwork::init(data.dim(), cfg.hidden, data.window_len(), cfg.seed)?;
    let report = train_network(&mut net, data, cfg)?;
    Ok((net, report))
}

/// Trains an LSTM to predict `targets[t + 1]` from panel rows `t-l+1..=t`.
pub fn train_lstm(panel: &FeaturePanel, targets: &[u8], cfg: &TrainConfig) -> Result<(LstmNetwork, TrainReport)> {
    cfg.validate()?;
    train_lstm_on(&WindowDataset::from_panel(panel, targets, cfg.window)?, cfg)
}

/// Feedforward baseline on the flattened window.
pub fn train_mlp(panel: &FeaturePanel, targets: &[u8], cfg: &TrainConfig) -> Result<(MlpNetwork, TrainReport)> {
    cfg.validate()?;
    train_mlp_on(&WindowDataset::from_panel(panel, targets, cfg.window)?, cfg)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum PredictorKind {
    #[default]
    Lstm,
    Bpnn,
}

impl std::str::FromStr for PredictorKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "lstm" => Ok(PredictorKind::Lstm),
            "bpnn" | "mlp" => Ok(PredictorKind::Bpnn),
            other => Err(Error::validation(format!("unknown predictor `{other}`"))),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum Model {
    Lstm(LstmNetwork),
    Mlp(MlpNetwork),
}

impl Model {
    pub fn train(kind: PredictorKind, data: &WindowDataset, cfg: &TrainConfig) -> Result<(Model, TrainReport)> {
        match kind {
            PredictorKind::Lstm => train_lstm_on(data, cfg).map(|(n, r)| (Model::Lstm(n), r)),
            PredictorKind::Bpnn => train_mlp_on(data, cfg).map(|(n, r)| (Model::Mlp(n), r)),
        }
    }

    pub fn kind(&self) -> PredictorKind {
        match self {
            Model::Lstm(_) => PredictorKind::Lstm,
            Model::Mlp(_) => PredictorKind::Bpnn,
        }
    }

    fn dims(&self) -> (usize, usize, usize) {
        match self {
            Model::Lstm(n) => (n.input_dim(), n.hidden_dim(), n.window()),
            Model::Mlp(n) => (n.input_dim(), n.hidden_dim(), n.window()),
        }
    }

    pub fn input_dim(&self) -> usize {
        self.dims().0
    }

    pub fn window(&self) -> usize {
        self.dims().2
    }

    pub fn params(&self) -> &[f64] {
        match self {
            Model::Lstm(n) => n.params(),
            Model::Mlp(n) => n.params(),
        }
    }

    /// Prediction for a flattened `window x input_dim` input.
    pub fn predict(&self, window: &[f64]) -> Result<f64> {
        let (d, _, l) = self.dims();
        if window.len() != d * l {
            return Err(Error::Shape(format!("window holds {} values, expected {}", window.len(), d * l)));
        }
        Ok(match self {
            Model::Lstm(n) => n.predict_flat(window),
            Model::Mlp(n) => n.predict_flat(window),
        })
    }

    /// Text checkpoint: a `key value` header followed by one parameter per
    /// line in storage order. Values use shortest round-trip formatting, so
    /// reloading reproduces predictions bit-for-bit.
    pub fn write_text<W: Write>(&self, mut w: W) -> Result<()> {
        let (d, h, l) = self.dims();
        let kind = match self.kind() {
            PredictorKind::Lstm => "lstm",
            PredictorKind::Bpnn => "bpnn",
        };
        writeln!(w, "kind {kind}")?;
        writeln!(w, "input_dim {d}")?;
        writeln!(w, "hidden_dim {h}")?;
        writeln!(w, "window {l}")?;
        writeln!(w, "params {}", self.params().len())?;
        for p in self.params() {
            writeln!(w, "{p}")?;
        }
        Ok(())
    }

    /// Reads what [`Model::write_text`] wrote, consuming exactly the model's
    /// lines so further sections may follow.
    pub fn read_text<R: BufRead>(lines: &mut std::io::Lines<R>) -> Result<Model> {
        let mut header = |key: &str| -> Result<String> {
            let line = lines.next().ok_or_else(|| Error::validation(format!("missing `{key}`")))??;
            let mut parts = line.split_whitespace();
            match (parts.next(), parts.next()) {
                (Some(k), Some(v)) if k == key => Ok(v.to_string()),
                _ => Err(Error::validation(format!("expected `{key} <value>`, found `{line}`"))),
            }
        };
        let num = |s: String| s.parse::<usize>().map_err(|_| Error::validation(format!("bad count `{s}`")));
        let kind: PredictorKind = header("kind")?.parse()?;
        let d = num(header("input_dim")?)?;
        let h = num(header("hidden_dim")?)?;
        let l = num(header("window")?)?;
        let n = num(header("params")?)?;
        let mut params = Vec::with_capacity(n);
        for _ in 0..n {
            let line = lines.next().ok_or_else(|| Error::validation("truncated parameter list"))??;
            params.push(
                line.trim()
                    .parse::<f64>()
                    .map_err(|_| Error::validation(format!("bad parameter `{line}`")))?,
            );
        }
        Ok(match kind {
            PredictorKind::Lstm => Model::Lstm(LstmNetwork::from_params(d, h, l, params)?),
            PredictorKind::Bpnn => Model::Mlp(MlpNetwork::from_params(d, h, l, params)?),
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::Rng;
    use std::io::BufRead;

    #[test]
    fn bce_examples() {
        assert!((bce(1.0, 0.5) - std::f64::consts::LN_2).abs() < 1e-12);
        assert!(bce(1.0, 1.0) < 1e-6);
        assert!(bce(0.0, 0.0) < 1e-6);
        assert!(bce(1.0, 0.0).is_finite());
    }

    #[test]
    fn windows_target_next_day() {
        let rows: Vec<Vec<f64>> = (0..6).map(|i| vec![i as f64]).collect();
        let labels = [0, 1, 0, 1, 1, 0];
        let ds = WindowDataset::from_rows(&rows, &labels, 3).unwrap();
        assert_eq!(ds.len(), 3);
        assert_eq!(ds.window(0), &[0.0, 1.0, 2.0]);
        assert_eq!(ds.target(0), 1.0);
        assert_eq!(ds.window(2), &[2.0, 3.0, 4.0]);
        assert_eq!(ds.target(2), 0.0);
        assert_eq!(ds.ends(), &[2, 3, 4]);
        assert!(WindowDataset::from_rows(&rows[..3], &labels[..3], 3).unwrap().is_empty());
    }

    fn random_dataset(n: usize, d: usize, l: usize, seed: u64) -> WindowDataset {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let rows: Vec<Vec<f64>> = (0..n).map(|_| (0..d).map(|_| rng.random_range(-1.0..1.0)).collect()).collect();
        let labels: Vec<u8> = (0..n).map(|_| rng.random_range(0..2)).collect();
        WindowDataset::from_rows(&rows, &labels, l).unwrap()
    }

    #[test]
    fn zero_learning_rate_leaves_weights() {
        let ds = random_dataset(40, 3, 4, 1);
        let cfg = TrainConfig {
            learning_rate: 0.0,
            epochs: 3,
            hidden: 5,
            window: 4,
            ..TrainConfig::default()
        };
        let init = LstmNetwork::init(3, 5, 4, cfg.seed).unwrap();
        let (net, report) = train_lstm_on(&ds, &cfg).unwrap();
        assert_eq!(net, init);
        assert_eq!(report.epoch_losses.len(), 3);
        let init = MlpNetwork::init(3, 5, 4, cfg.seed).unwrap();
        assert_eq!(train_mlp_on(&ds, &cfg).unwrap().0, init);
    }

    #[test]
    fn same_seed_same_weights() {
        let ds = random_dataset(60, 3, 4, 2);
        let cfg = TrainConfig {
            epochs: 5,
            hidden: 6,
            window: 4,
            seed: 42,
            ..TrainConfig::default()
        };
        assert_eq!(train_lstm_on(&ds, &cfg).unwrap().0, train_lstm_on(&ds, &cfg).unwrap().0);
        assert_eq!(train_mlp_on(&ds, &cfg).unwrap().0, train_mlp_on(&ds, &cfg).unwrap().0);
        let other = TrainConfig { seed: 43, ..cfg };
        assert_ne!(train_lstm_on(&ds, &cfg).unwrap().0, train_lstm_on(&ds, &other).unwrap().0);
    }

    #[test]
    fn gradient_step_reduces_batch_loss() {
        let ds = random_dataset(30, 3, 5, 3);
        let mut net = LstmNetwork::init(3, 4, 5, 8).unwrap();
        let idx: Vec<usize> = (0..10).collect();
        let (before, grad) = batch_gradient(&net, &ds, &idx);
        for (p, g) in net.params_mut().iter_mut().zip(&grad) {
            *p -= 1e-3 * g;
        }
        let (after, _) = batch_gradient(&net, &ds, &idx);
        assert!(after < before, "{after} !< {before}");
    }

    #[test]
    fn divergence_is_reported() {
        let ds = random_dataset(30, 2, 2, 4);
        let mut net = MlpNetwork::init(2, 3, 2, 0).unwrap();
        net.params_mut()[0] = f64::NAN;
        let cfg = TrainConfig {
            window: 2,
            hidden: 3,
            epochs: 2,
            ..TrainConfig::default()
        };
        assert!(matches!(train_network(&mut net, &ds, &cfg), Err(Error::Divergence { epoch: 0, .. })));
    }

    #[test]
    fn text_checkpoint_reproduces_predictions() {
        let ds = random_dataset(30, 3, 4, 5);
        for kind in [PredictorKind::Lstm, PredictorKind::Bpnn] {
            let cfg = TrainConfig {
                window: 4,
                hidden: 5,
                epochs: 2,
                ..TrainConfig::default()
            };
            let (model, _) = Model::train(kind, &ds, &cfg).unwrap();
            let mut buf = Vec::new();
            model.write_text(&mut buf).unwrap();
            buf.extend_from_slice(b"trailing section\n");
            let mut lines = std::io::Cursor::new(buf).lines();
            let back = Model::read_text(&mut lines).unwrap();
            assert_eq!(back, model);
            for i in 0..ds.len() {
                assert_eq!(
                    back.predict(ds.window(i)).unwrap().to_bits(),
                    model.predict(ds.window(i)).unwrap().to_bits()
                );
            }
            assert_eq!(lines.next().unwrap().unwrap(), "trailing section");
        }
    }
}
