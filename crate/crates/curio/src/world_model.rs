//! Forward dynamics model and surprise detection.
//!
//! The forward model predicts the state delta for a transition; its
//! squared residual, restricted to each task's goal-space coordinates,
//! gives per-task prediction errors. A surprise event fires when the
//! finite difference of a task's error series leaves the running
//! confidence band `mu + theta * sigma`.

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::env::GoalSpaces;
use crate::numerics::{Activation, Adam, Mlp, RunningStats};

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ForwardModelConfig {
    pub hidden_layers: usize,
    pub layer_size: usize,
    pub lr: f64,
    pub batch_size: usize,
    pub train_iters: usize,
    pub buffer_capacity: usize,
}

impl Default for ForwardModelConfig {
    fn default() -> Self {
        ForwardModelConfig {
            hidden_layers: 3,
            layer_size: 64,
            lr: 1e-3,
            batch_size: 64,
            train_iters: 100,
            buffer_capacity: 500_000,
        }
    }
}

/// One environment transition, stored for forward-model training.
#[derive(Debug, Clone)]
pub struct Transition {
    pub state: Vec<f64>,
    pub action: Vec<f64>,
    pub next_state: Vec<f64>,
}

/// MLP over `(state, action)` predicting the state delta, with a ring
/// buffer of transitions and its own optimizer state.
#[derive(Debug, Clone)]
pub struct ForwardModel {
    net: Mlp,
    adam: Adam,
    cfg: ForwardModelConfig,
    state_dim: usize,
    action_dim: usize,
    buffer: Vec<Transition>,
    write_head: usize,
}

impl ForwardModel {
    pub fn new(state_dim: usize, action_dim: usize, cfg: ForwardModelConfig, rng: &mut impl Rng) -> Self {
        let net = Mlp::with_shape(
            state_dim + action_dim,
            cfg.hidden_layers,
            cfg.layer_size,
            state_dim,
            Activation::Tanh,
            rng,
        );
        let adam = Adam::new(cfg.lr, net.param_count());
        ForwardModel {
            net,
            adam,
            cfg,
            state_dim,
            action_dim,
            buffer: Vec::new(),
            write_head: 0,
        }
    }

    pub fn net(&self) -> &Mlp {
        &self.net
    }

    pub fn buffer_len(&self) -> usize {
        self.buffer.len()
    }

    /// Predicted next state `f(s, a) + s`.
    pub fn predict_next(&self, state: &[f64], action: &[f64]) -> Vec<f64> {
        assert_eq!(state.len(), self.state_dim, "state width mismatch");
        assert_eq!(action.len(), self.action_dim, "action width mismatch");
        let mut input = Vec::with_capacity(state.len() + action.len());
        input.extend_from_slice(state);
        input.extend_from_slice(action);
        let delta = self.net.forward(&input);
        delta.iter().zip(state.iter()).map(|(d, s)| d + s).collect()
    }

    /// Full squared prediction error and its restriction to every task's
    /// goal space. Pure in all arguments.
    pub fn prediction_errors(
        &self,
        spaces: &GoalSpaces,
        state: &[f64],
        action: &[f64],
        next_state: &[f64],
    ) -> PredictionErrors {
        let predicted = self.predict_next(state, action);
        let residual: Vec<f64> = predicted
            .iter()
            .zip(next_state.iter())
            .map(|(p, n)| p - n)
            .collect();
        let total = residual.iter().map(|r| r * r).sum();
        let per_task = (0..spaces.task_count())
            .map(|task| spaces.indices(task).iter().map(|&i| residual[i] * residual[i]).sum())
            .collect();
        PredictionErrors { total, per_task }
    }

    /// Append a transition to the ring buffer.
    pub fn observe(&mut self, transition: Transition) {
        if self.buffer.len() < self.cfg.buffer_capacity {
            self.buffer.push(transition);
        } else {
            self.buffer[self.write_head] = transition;
            self.write_head = (self.write_head + 1) % self.cfg.buffer_capacity;
        }
    }

    /// Mean squared-residual loss and parameter gradients for a batch.
    fn loss_and_grad(&self, batch: &[usize], grads: &mut [f64]) -> f64 {
        grads.fill(0.0);
        let mut loss = 0.0;
        let scale = 1.0 / batch.len() as f64;
        let mut input = vec![0.0; self.state_dim + self.action_dim];
        for &idx in batch {
            let tr = &self.buffer[idx];
            input[..self.state_dim].copy_from_slice(&tr.state);
            input[self.state_dim..].copy_from_slice(&tr.action);
            let trace = self.net.forward_trace(&input);
            let mut upstream = vec![0.0; self.state_dim];
            for (i, u) in upstream.iter_mut().enumerate() {
                let resid = trace.output()[i] - (tr.next_state[i] - tr.state[i]);
                loss += resid * resid * scale;
                *u = 2.0 * resid * scale;
            }
            self.net.backward(&trace, &upstream, grads);
        }
        loss
    }

    /// Run the configured number of Adam iterations on uniformly sampled
    /// batches. Returns the final batch loss, or `None` when the buffer
    /// is smaller than one batch.
    pub fn train(&mut self, rng: &mut impl Rng) -> Option<f64> {
        self.train_iters(self.cfg.train_iters, rng)
    }

    pub fn train_iters(&mut self, iters: usize, rng: &mut impl Rng) -> Option<f64> {
        if self.buffer.len() < self.cfg.batch_size {
            return None;
        }
        let mut grads = vec![0.0; self.net.param_count()];
        let mut last = None;
        for _ in 0..iters {
            let batch: Vec<usize> = (0..self.cfg.batch_size)
                .map(|_| rng.gen_range(0..self.buffer.len()))
                .collect();
            let loss = self.loss_and_grad(&batch, &mut grads);
            self.adam.step(self.net.params_mut(), &grads);
            last = Some(loss);
        }
        last
    }
}

/// Per-transition prediction errors.
#[derive(Debug, Clone)]
pub struct PredictionErrors {
    pub total: f64,
    pub per_task: Vec<f64>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct SurpriseConfig {
    /// Confidence-band width multiplier.
    pub theta: f64,
    /// Number of error-difference samples per task before any surprise
    /// may fire.
    pub warmup: u64,
    /// Exponential weighting of the error-difference statistics;
    /// `None` keeps plain running statistics over everything seen.
    pub history_weighting: Option<f64>,
}

impl Default for SurpriseConfig {
    fn default() -> Self {
        SurpriseConfig {
            theta: 5.0,
            warmup: 500,
            history_weighting: Some(0.99),
        }
    }
}

/// Flags per-task surprise events in rollout error series.
///
/// For each task the detector tracks statistics of the within-rollout
/// error differences. Each step is thresholded against the statistics
/// *before* that step's difference is folded in, so an event cannot
/// suppress its own detection.
#[derive(Debug, Clone)]
pub struct SurpriseDetector {
    cfg: SurpriseConfig,
    stats: Vec<RunningStats>,
}

impl SurpriseDetector {
    pub fn new(task_count: usize, cfg: SurpriseConfig) -> Self {
        let stats = (0..task_count)
            .map(|_| match cfg.history_weighting {
                Some(lambda) => RunningStats::exponentially_weighted(lambda),
                None => RunningStats::new(),
            })
            .collect();
        SurpriseDetector { cfg, stats }
    }

    pub fn stats(&self, task: usize) -> &RunningStats {
        &self.stats[task]
    }

    /// Process one rollout's per-task error series (`errors[task][t]`,
    /// one entry per transition) and return aligned surprise flags.
    ///
    /// Differences are taken within the rollout only; the first
    /// transition of a rollout never fires.
    pub fn process_rollout(&mut self, errors: &[Vec<f64>]) -> Vec<Vec<bool>> {
        assert_eq!(errors.len(), self.stats.len(), "per-task series count");
        errors
            .iter()
            .enumerate()
            .map(|(task, series)| {
                let stats = &mut self.stats[task];
                let mut flags = vec![false; series.len()];
                for t in 1..series.len() {
                    let diff = series[t] - series[t - 1];
                    let threshold = stats.mean() + self.cfg.theta * stats.std();
                    if stats.count() >= self.cfg.warmup && diff.abs() > threshold {
                        flags[t] = true;
                    }
                    stats.update(diff);
                }
                flags
            })
            .collect()
    }
}
