//! ADAM with bias correction, and a single optimization trajectory that
//! remembers the best point it visited.

use serde::{Deserialize, Serialize};

use crate::circuit::CircuitIR;
use crate::error::Result;
use crate::grad::GradientWorkspace;
use crate::losses::LossSpec;

#[derive(Clone, Debug)]
pub struct AdamState {
    pub t: u64,
    pub m: Vec<f64>,
    pub v: Vec<f64>,
    pub learning_rate: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub epsilon: f64,
}

impl AdamState {
    pub fn new(len: usize, learning_rate: f64) -> Self {
        Self { t: 0, m: vec![0.0; len], v: vec![0.0; len], learning_rate, beta1: 0.9, beta2: 0.999, epsilon: 1e-8 }
    }

    pub fn step(&mut self, params: &mut [f64], grad: &[f64]) {
        self.t += 1;
        let t = self.t as i32;
        let bc1 = 1.0 - self.beta1.powi(t);
        let bc2 = 1.0 - self.beta2.powi(t);
        for i in 0..params.len() {
            let g = grad[i];
            self.m[i] = self.beta1 * self.m[i] + (1.0 - self.beta1) * g;
            self.v[i] = self.beta2 * self.v[i] + (1.0 - self.beta2) * g * g;
            let m_hat = self.m[i] / bc1;
            let v_hat = self.v[i] / bc2;
            params[i] -= self.learning_rate * m_hat / (v_hat.sqrt() + self.epsilon);
        }
    }
}

#[derive(Clone, Debug)]
pub struct AdamOptions {
    pub iterations: usize,
    pub learning_rate: f64,
    /// Stop once the raw loss falls strictly below this value.
    pub stop_below: Option<f64>,
    /// Slots held fixed at their initial values.
    pub frozen: Vec<usize>,
}

impl AdamOptions {
    pub fn new(iterations: usize, learning_rate: f64) -> Self {
        Self { iterations, learning_rate, stop_below: None, frozen: Vec::new() }
    }

    pub fn stop_below(mut self, threshold: f64) -> Self {
        self.stop_below = Some(threshold);
        self
    }

    pub fn frozen(mut self, slots: Vec<usize>) -> Self {
        self.frozen = slots;
        self
    }
}

/// Outcome of one optimization trajectory.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SampleResult {
    pub index: usize,
    pub final_params: Vec<f64>,
    /// Angles at the lowest regularized loss seen.
    pub best_params: Vec<f64>,
    pub best_loss: f64,
    /// Raw loss at `best_params`.
    pub best_raw: f64,
    pub best_iteration: usize,
    pub iterations_run: usize,
    /// Set when a non-finite loss ended the trajectory early.
    pub aborted: bool,
}

pub fn adam_run(
    c: &CircuitIR,
    initial_params: &[f64],
    spec: &LossSpec,
    iterations: usize,
    learning_rate: f64,
) -> Result<SampleResult> {
    adam_run_with(c, initial_params, spec, &AdamOptions::new(iterations, learning_rate))
}

pub fn adam_run_with(c: &CircuitIR, initial_params: &[f64], spec: &LossSpec, opts: &AdamOptions) -> Result<SampleResult> {
    c.check_params(initial_params)?;
    let mut ws = GradientWorkspace::new(c);
    let mut params = initial_params.to_vec();
    let mut grad = vec![0.0; params.len()];
    let mut adam = AdamState::new(params.len(), opts.learning_rate);
    let mut best = SampleResult {
        index: 0,
        final_params: params.clone(),
        best_params: params.clone(),
        best_loss: f64::INFINITY,
        best_raw: f64::INFINITY,
        best_iteration: 0,
        iterations_run: 0,
        aborted: false,
    };

    // Evaluations happen before each update and once after the last one.
    for it in 0..=opts.iterations {
        let (total, raw) = ws.loss_and_gradient(c, &params, spec, &mut grad)?;
        if !total.is_finite() || grad.iter().any(|g| !g.is_finite()) {
            best.aborted = true;
            break;
        }
        if total < best.best_loss {
            best.best_loss = total;
            best.best_raw = raw;
            best.best_iteration = it;
            best.best_params.copy_from_slice(&params);
        }
        if it == opts.iterations || opts.stop_below.is_some_and(|s| raw < s) {
            break;
        }
        for &s in &opts.frozen {
            grad[s] = 0.0;
        }
        adam.step(&mut params, &grad);
        best.iterations_run = it + 1;
    }
    best.final_params = params;
    Ok(best)
}
