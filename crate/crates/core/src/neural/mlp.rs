//! One-hidden-layer feedforward baseline over the flattened window.
//!
//! Layout: `W1` (hidden x inputs, row-major), `b1`, `w2` (hidden), `b2`.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::{bce, sigmoid, Network};
use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq)]
pub struct MlpNetwork {
    input_dim: usize,
    hidden_dim: usize,
    window: usize,
    params: Vec<f64>,
}

impl MlpNetwork {
    /// `input_dim` is the per-day feature count; the network sees
    /// `window * input_dim` inputs.
    pub fn init(input_dim: usize, hidden_dim: usize, window: usize, seed: u64) -> Result<Self> {
        let mut net = Self::zeros(input_dim, hidden_dim, window)?;
        let n_in = net.n_inputs();
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let b1 = 1.0 / (n_in as f64).sqrt();
        for p in &mut net.params[..hidden_dim * n_in] {
            *p = rng.random_range(-b1..b1);
        }
        let b2 = 1.0 / (hidden_dim as f64).sqrt();
        let w2 = hidden_dim * n_in + hidden_dim;
        for p in &mut net.params[w2..w2 + hidden_dim] {
            *p = rng.random_range(-b2..b2);
        }
        Ok(net)
    }

    pub fn zeros(input_dim: usize, hidden_dim: usize, window: usize) -> Result<Self> {
        if input_dim == 0 || hidden_dim == 0 || window == 0 {
            return Err(Error::Shape("MLP dimensions must be positive".into()));
        }
        let n_in = input_dim * window;
        Ok(Self {
            input_dim,
            hidden_dim,
            window,
            params: vec![0.0; hidden_dim * n_in + 2 * hidden_dim + 1],
        })
    }

    pub fn from_params(input_dim: usize, hidden_dim: usize, window: usize, params: Vec<f64>) -> Result<Self> {
        let mut net = Self::zeros(input_dim, hidden_dim, window)?;
        if params.len() != net.params.len() {
            return Err(Error::Shape(format!(
                "expected {} parameters, got {}",
                net.params.len(),
                params.len()
            )));
        }
        if params.iter().any(|p| !p.is_finite()) {
            return Err(Error::validation("non-finite MLP weight"));
        }
        net.params = params;
        Ok(net)
    }

    pub fn input_dim(&self) -> usize {
        self.input_dim
    }

    pub fn hidden_dim(&self) -> usize {
        self.hidden_dim
    }

    pub fn window(&self) -> usize {
        self.window
    }

    fn n_inputs(&self) -> usize {
        self.input_dim * self.window
    }

    fn hidden(&self, x: &[f64]) -> Vec<f64> {
        let n_in = self.n_inputs();
        let b1 = &self.params[self.hidden_dim * n_in..];
        (0..self.hidden_dim)
            .map(|j| {
                let row = &self.params[j * n_in..(j + 1) * n_in];
                sigmoid(b1[j] + row.iter().zip(x).map(|(w, v)| w * v).sum::<f64>())
            })
            .collect()
    }

    fn output(&self, hidden: &[f64]) -> f64 {
        let w2 = self.hidden_dim * self.n_inputs() + self.hidden_dim;
        let b2 = self.params[w2 + self.hidden_dim];
        sigmoid(b2 + self.params[w2..w2 + self.hidden_dim].iter().zip(hidden).map(|(w, a)| w * a).sum::<f64>())
    }

    pub fn forward(&self, window: &[Vec<f64>]) -> Result<f64> {
        if window.len() != self.window || window.iter().any(|r| r.len() != self.input_dim) {
            return Err(Error::Shape(format!(
                "MLP expects {} rows of {} features",
                self.window, self.input_dim
            )));
        }
        Ok(self.predict_flat(&window.concat()))
    }
}

impl Network for MlpNetwork {
    fn params(&self) -> &[f64] {
        &self.params
    }

    fn params_mut(&mut self) -> &mut [f64] {
        &mut self.params
    }

    fn flat_input_len(&self) -> usize {
        self.n_inputs()
    }

    fn predict_flat(&self, window: &[f64]) -> f64 {
        self.output(&self.hidden(window))
    }

    fn accumulate_gradient(&self, window: &[f64], target: f64, grad: &mut [f64]) -> f64 {
        let n_in = self.n_inputs();
        let h = self.hidden_dim;
        let hidden = self.hidden(window);
        let y_hat = self.output(&hidden);
        let dz = y_hat - target;
        let w2 = h * n_in + h;
        for j in 0..h {
            grad[w2 + j] += dz * hidden[j];
            let dh = dz * self.params[w2 + j] * hidden[j] * (1.0 - hidden[j]);
            grad[h * n_in + j] += dh;
            for (g, x) in grad[j * n_in..(j + 1) * n_in].iter_mut().zip(window) {
                *g += dh * x;
            }
        }
        grad[w2 + h] += dz;
        bce(target, y_hat)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn output_in_unit_interval() {
        let net = MlpNetwork::init(3, 8, 2, 1).unwrap();
        let y = net.forward(&[vec![10.0, -4.0, 2.0], vec![0.0, 1.0, -9.0]]).unwrap();
        assert!(y > 0.0 && y < 1.0);
        assert!(net.forward(&[vec![1.0; 3]]).is_err());
    }

    #[test]
    fn gradient_matches_finite_differences() {
        let net = MlpNetwork::init(2, 3, 2, 4).unwrap();
        let x = [0.3, -1.2, 0.8, 0.1];
        let mut grad = vec![0.0; net.params().len()];
        net.accumulate_gradient(&x, 1.0, &mut grad);
        let step = 1e-5;
        for i in 0..grad.len() {
            let mut p = net.params().to_vec();
            p[i] += step;
            let up = bce(1.0, MlpNetwork::from_params(2, 3, 2, p.clone()).unwrap().predict_flat(&x));
            p[i] -= 2.0 * step;
            let down = bce(1.0, MlpNetwork::from_params(2, 3, 2, p).unwrap().predict_flat(&x));
            let fd = (up - down) / (2.0 * step);
            assert!((fd - grad[i]).abs() <= 1e-6 * fd.abs().max(grad[i].abs()).max(1e-3), "{i}: {fd} vs {}", grad[i]);
        }
    }
}
