//! Single-layer LSTM with a sigmoid read-out on the last cell.
//!
//! All parameters live in one flat vector. For each gate `k` in
//! forget, update, output, candidate order:
//!
//! ```text
//! U_k  hidden x input   (row-major, row = hidden unit)
//! W_k  hidden x hidden
//! b_k  hidden
//! ```
//!
//! followed by the read-out weights `v` (hidden) and bias `c`.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::{bce, sigmoid, Network};
use crate::error::{Error, Result};

pub(crate) const GATES: usize = 4;
const FORGET: usize = 0;
const UPDATE: usize = 1;
const OUTPUT: usize = 2;
const CANDIDATE: usize = 3;

/// Trainable parameters of an LSTM with `input_dim` inputs and `hidden_dim`
/// units, including per-gate biases and the output unit.
pub fn parameter_count(input_dim: usize, hidden_dim: usize) -> usize {
    GATES * (hidden_dim * (input_dim + hidden_dim) + hidden_dim) + (hidden_dim + 1)
}

#[derive(Debug, Clone, PartialEq)]
pub struct LstmNetwork {
    input_dim: usize,
    hidden_dim: usize,
    window: usize,
    params: Vec<f64>,
}

/// Per-step activations kept for backpropagation.
struct StepCache {
    a_prev: Vec<f64>,
    c_prev: Vec<f64>,
    gates: [Vec<f64>; GATES],
    tanh_c: Vec<f64>,
}

impl LstmNetwork {
    pub fn zeros(input_dim: usize, hidden_dim: usize, window: usize) -> Result<Self> {
        if input_dim == 0 || hidden_dim == 0 || window == 0 {
            return Err(Error::Shape("LSTM dimensions must be positive".into()));
        }
        Ok(Self {
            input_dim,
            hidden_dim,
            window,
            params: vec![0.0; parameter_count(input_dim, hidden_dim)],
        })
    }

    /// Weights uniform in `[-1/sqrt(h), 1/sqrt(h)]`, biases zero.
    pub fn init(input_dim: usize, hidden_dim: usize, window: usize, seed: u64) -> Result<Self> {
        let mut net = Self::zeros(input_dim, hidden_dim, window)?;
        let bound = 1.0 / (hidden_dim as f64).sqrt();
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let h = hidden_dim;
        for k in 0..GATES {
            let off = net.gate_offset(k);
            for p in &mut net.params[off..off + h * (input_dim + h)] {
                *p = rng.random_range(-bound..bound);
            }
        }
        let v = net.readout_offset();
        for p in &mut net.params[v..v + h] {
            *p = rng.random_range(-bound..bound);
        }
        Ok(net)
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
            return Err(Error::validation("non-finite LSTM weight"));
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

    fn gate_block(&self) -> usize {
        self.hidden_dim * (self.input_dim + self.hidden_dim) + self.hidden_dim
    }

    fn gate_offset(&self, k: usize) -> usize {
        k * self.gate_block()
    }

    fn readout_offset(&self) -> usize {
        GATES * self.gate_block()
    }

    /// Input-to-gate weight `U_k[unit, input]`.
    pub fn u(&self, gate: usize, unit: usize, input: usize) -> f64 {
        self.params[self.gate_offset(gate) + unit * self.input_dim + input]
    }

    /// Hidden-to-gate weight `W_k[unit, prev_unit]`.
    pub fn w(&self, gate: usize, unit: usize, prev: usize) -> f64 {
        let h = self.hidden_dim;
        self.params[self.gate_offset(gate) + h * self.input_dim + unit * h + prev]
    }

    pub fn bias(&self, gate: usize, unit: usize) -> f64 {
        let h = self.hidden_dim;
        self.params[self.gate_offset(gate) + h * (self.input_dim + h) + unit]
    }

    pub fn readout(&self) -> (&[f64], f64) {
        let v = self.readout_offset();
        (&self.params[v..v + self.hidden_dim], self.params[v + self.hidden_dim])
    }

    /// Gate pre-activations for every unit, gates in forget/update/output/
    /// candidate order.
    fn pre_activations(&self, x: &[f64], a_prev: &[f64]) -> [Vec<f64>; GATES] {
        let (d, h) = (self.input_dim, self.hidden_dim);
        std::array::from_fn(|k| {
            let off = self.gate_offset(k);
            let (u, rest) = self.params[off..off + self.gate_block()].split_at(h * d);
            let (w, b) = rest.split_at(h * h);
            (0..h)
                .map(|j| {
                    let ux: f64 = u[j * d..(j + 1) * d].iter().zip(x).map(|(a, b)| a * b).sum();
                    let wa: f64 = w[j * h..(j + 1) * h].iter().zip(a_prev).map(|(a, b)| a * b).sum();
                    b[j] + ux + wa
                })
                .collect()
        })
    }

    fn step(&self, x: &[f64], a_prev: &[f64], c_prev: &[f64]) -> (Vec<f64>, Vec<f64>, [Vec<f64>; GATES], Vec<f64>) {
        let mut g = self.pre_activations(x, a_prev);
        for k in [FORGET, UPDATE, OUTPUT] {
            g[k].iter_mut().for_each(|z| *z = sigmoid(*z));
        }
        g[CANDIDATE].iter_mut().for_each(|z| *z = z.tanh());
        let c: Vec<f64> = (0..self.hidden_dim)
            .map(|j| g[FORGET][j] * c_prev[j] + g[UPDATE][j] * g[CANDIDATE][j])
            .collect();
        let tanh_c: Vec<f64> = c.iter().map(|v| v.tanh()).collect();
        let a = (0..self.hidden_dim).map(|j| g[OUTPUT][j] * tanh_c[j]).collect();
        (a, c, g, tanh_c)
    }

    /// Gate activations `(forget, update, output, candidate)` for one step.
    pub fn gates(&self, x: &[f64], a_prev: &[f64]) -> Result<[Vec<f64>; GATES]> {
        self.check_step_dims(x, a_prev, a_prev)?;
        let c0 = vec![0.0; self.hidden_dim];
        Ok(self.step(x, a_prev, &c0).2)
    }

    fn check_step_dims(&self, x: &[f64], a: &[f64], c: &[f64]) -> Result<()> {
        if x.len() != self.input_dim || a.len() != self.hidden_dim || c.len() != self.hidden_dim {
            return Err(Error::Shape(format!(
                "cell step expects x[{}], a[{}], c[{}]; got x[{}], a[{}], c[{}]",
                self.input_dim,
                self.hidden_dim,
                self.hidden_dim,
                x.len(),
                a.len(),
                c.len()
            )));
        }
        Ok(())
    }

    fn forward_cached(&self, window: &[f64]) -> (f64, Vec<StepCache>, Vec<f64>) {
        let (d, h) = (self.input_dim, self.hidden_dim);
        let mut a = vec![0.0; h];
        let mut c = vec![0.0; h];
        let mut caches = Vec::with_capacity(self.window);
        for x in window.chunks_exact(d) {
            let (a_next, c_next, gates, tanh_c) = self.step(x, &a, &c);
            caches.push(StepCache {
                a_prev: std::mem::replace(&mut a, a_next),
                c_prev: std::mem::replace(&mut c, c_next),
                gates,
                tanh_c,
            });
        }
        let (v, bias) = self.readout();
        let z: f64 = bias + v.iter().zip(&a).map(|(w, x)| w * x).sum::<f64>();
        (sigmoid(z), caches, a)
    }
}

/// One LSTM cell update from `(a_prev, c_prev)` with input `x`.
pub fn lstm_cell_step(net: &LstmNetwork, x: &[f64], a_prev: &[f64], c_prev: &[f64]) -> Result<(Vec<f64>, Vec<f64>)> {
    net.check_step_dims(x, a_prev, c_prev)?;
    let (a, c, _, _) = net.step(x, a_prev, c_prev);
    Ok((a, c))
}

/// Unrolls the window from a zero state and returns the sigmoid output of
/// the last cell.
pub fn lstm_forward(net: &LstmNetwork, window: &[Vec<f64>]) -> Result<f64> {
    if window.len() != net.window {
        return Err(Error::Shape(format!(
            "window of {} steps, network expects {}",
            window.len(),
            net.window
        )));
    }
    if let Some(row) = window.iter().find(|r| r.len() != net.input_dim) {
        return Err(Error::Shape(format!(
            "input row of length {}, network expects {}",
            row.len(),
            net.input_dim
        )));
    }
    let flat: Vec<f64> = window.concat();
    Ok(net.forward_cached(&flat).0)
}

impl Network for LstmNetwork {
    fn params(&self) -> &[f64] {
        &self.params
    }

    fn params_mut(&mut self) -> &mut [f64] {
        &mut self.params
    }

    fn flat_input_len(&self) -> usize {
        self.window * self.input_dim
    }

    fn predict_flat(&self, window: &[f64]) -> f64 {
        self.forward_cached(window).0
    }

    fn accumulate_gradient(&self, window: &[f64], target: f64, grad: &mut [f64]) -> f64 {
        let (d, h) = (self.input_dim, self.hidden_dim);
        let (y_hat, caches, a_last) = self.forward_cached(window);
        let dz = y_hat - target;

        let v_off = self.readout_offset();
        for j in 0..h {
            grad[v_off + j] += dz * a_last[j];
        }
        grad[v_off + h] += dz;

        let (v, _) = self.readout();
        let mut da: Vec<f64> = v.iter().map(|w| dz * w).collect();
        let mut dc = vec![0.0; h];
        let mut dz_gate: [Vec<f64>; GATES] = std::array::from_fn(|_| vec![0.0; h]);

        for (step, cache) in caches.iter().enumerate().rev() {
            let x = &window[step * d..(step + 1) * d];
            let g = &cache.gates;
            for j in 0..h {
                let dc_total = dc[j] + da[j] * g[OUTPUT][j] * (1.0 - cache.tanh_c[j] * cache.tanh_c[j]);
                let d_out = da[j] * cache.tanh_c[j];
                dz_gate[OUTPUT][j] = d_out * g[OUTPUT][j] * (1.0 - g[OUTPUT][j]);
                dz_gate[FORGET][j] = dc_total * cache.c_prev[j] * g[FORGET][j] * (1.0 - g[FORGET][j]);
                dz_gate[UPDATE][j] = dc_total * g[CANDIDATE][j] * g[UPDATE][j] * (1.0 - g[UPDATE][j]);
                dz_gate[CANDIDATE][j] = dc_total * g[UPDATE][j] * (1.0 - g[CANDIDATE][j] * g[CANDIDATE][j]);
                dc[j] = dc_total * g[FORGET][j];
            }
            let mut da_prev = vec![0.0; h];
            for (k, dzk) in dz_gate.iter().enumerate() {
                let off = self.gate_offset(k);
                let w_off = off + h * d;
                let b_off = w_off + h * h;
                for j in 0..h {
                    let z = dzk[j];
                    if z == 0.0 {
                        continue;
                    }
                    for (gi, xi) in grad[off + j * d..off + (j + 1) * d].iter_mut().zip(x) {
                        *gi += z * xi;
                    }
                    for (m, (gw, ap)) in grad[w_off + j * h..w_off + (j + 1) * h]
                        .iter_mut()
                        .zip(&cache.a_prev)
                        .enumerate()
                    {
                        *gw += z * ap;
                        da_prev[m] += self.params[w_off + j * h + m] * z;
                    }
                    grad[b_off + j] += z;
                }
            }
            da = da_prev;
        }
        bce(target, y_hat)
    }
}
