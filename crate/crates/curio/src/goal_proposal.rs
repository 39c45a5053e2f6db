//! Sub-goal generators: one relational attention net per task transition.
//!
//! For the transition "do task `j` directly before task `i`" a small net
//! scores states by how promising they are as switch points:
//!
//! ```text
//! score(s) = exp(-gamma * sum_{k<l} (w1_kl s_k + w2_kl s_l + w3_kl)^2)
//! ```
//!
//! The pairwise affine residuals restrict the hypothesis space to
//! positional relations (for example "agent position equals tool
//! position"), which is why a handful of positive samples suffice.
//! Targets come from surprise events and successful task switches;
//! training batches are balanced between the rare positive samples and
//! the bulk of undetermined ones.
//!
//! Because maximizing the score means minimizing a convex quadratic,
//! goal sampling solves a small linear system over the coordinates not
//! pinned by the remaining task chain, exactly.

use nalgebra::{DMatrix, DVector};
use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::env::{uniform_goal, GoalSpaces, TaskId};
use crate::numerics::Adam;
use crate::task_graph::TaskChain;

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct GoalProposalConfig {
    pub lr: f64,
    pub batch_size: usize,
    pub train_iters: usize,
    pub gamma_init: f64,
    pub gamma_trainable: bool,
    /// Scale of the uniform weight initialization.
    pub weight_init: f64,
    /// Tikhonov term on the reduced quadratic solve.
    pub ridge: f64,
    /// During execution a fresh goal is produced every this many steps.
    pub goal_refresh_every: usize,
    pub positive_capacity: usize,
    pub undetermined_capacity: usize,
}

impl Default for GoalProposalConfig {
    fn default() -> Self {
        GoalProposalConfig {
            lr: 1e-3,
            batch_size: 64,
            train_iters: 100,
            gamma_init: 1.0,
            gamma_trainable: true,
            weight_init: 0.1,
            ridge: 1e-8,
            goal_refresh_every: 5,
            positive_capacity: 2_000,
            undetermined_capacity: 20_000,
        }
    }
}

/// Pairwise-affine attention net for one task transition.
///
/// Parameters are stored flat: `[w1, w2, w3]` per coordinate pair
/// `(k, l)` with `k < l` in row-major pair order, then `gamma` last.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct RelationalNet {
    state_dim: usize,
    params: Vec<f64>,
}

impl RelationalNet {
    pub fn pair_count(state_dim: usize) -> usize {
        state_dim * (state_dim - 1) / 2
    }

    pub fn new(state_dim: usize, gamma_init: f64, weight_init: f64, rng: &mut impl Rng) -> Self {
        assert!(gamma_init > 0.0, "gamma must be positive");
        let pairs = Self::pair_count(state_dim);
        let mut params: Vec<f64> = (0..3 * pairs)
            .map(|_| rng.gen_range(-weight_init..weight_init))
            .collect();
        params.push(gamma_init);
        RelationalNet { state_dim, params }
    }

    /// All-zero weights (scores every state as 1).
    pub fn zeros(state_dim: usize, gamma_init: f64) -> Self {
        let pairs = Self::pair_count(state_dim);
        let mut params = vec![0.0; 3 * pairs];
        params.push(gamma_init);
        RelationalNet { state_dim, params }
    }

    pub fn state_dim(&self) -> usize {
        self.state_dim
    }

    pub fn param_count(&self) -> usize {
        self.params.len()
    }

    pub fn params(&self) -> &[f64] {
        &self.params
    }

    pub fn gamma(&self) -> f64 {
        *self.params.last().unwrap()
    }

    /// Flat index of the `(k, l)` pair, `k < l`.
    pub fn pair_index(&self, k: usize, l: usize) -> usize {
        assert!(k < l && l < self.state_dim, "bad pair ({k}, {l})");
        // Pairs are enumerated k-major: (0,1), (0,2), .., (1,2), ..
        let before: usize = (0..k).map(|r| self.state_dim - 1 - r).sum();
        before + (l - k - 1)
    }

    pub fn pair_weights(&self, k: usize, l: usize) -> [f64; 3] {
        let p = 3 * self.pair_index(k, l);
        [self.params[p], self.params[p + 1], self.params[p + 2]]
    }

    pub fn set_pair_weights(&mut self, k: usize, l: usize, w: [f64; 3]) {
        let p = 3 * self.pair_index(k, l);
        self.params[p..p + 3].copy_from_slice(&w);
    }

    /// Sum of squared pairwise residuals (the exponent sans `gamma`).
    pub fn exponent(&self, s: &[f64]) -> f64 {
        assert_eq!(s.len(), self.state_dim, "state width mismatch");
        let mut e = 0.0;
        let mut p = 0;
        for k in 0..self.state_dim {
            for l in k + 1..self.state_dim {
                let r = self.params[p] * s[k] + self.params[p + 1] * s[l] + self.params[p + 2];
                e += r * r;
                p += 3;
            }
        }
        e
    }

    /// Score in (0, 1]; equals 1 exactly when every residual vanishes.
    /// Clamped to the smallest positive double where exp would underflow.
    pub fn eval(&self, s: &[f64]) -> f64 {
        (-self.gamma() * self.exponent(s))
            .exp()
            .max(f64::MIN_POSITIVE)
    }

    /// Accumulate d(upstream * eval)/dparams into `grads`.
    fn backward(&self, s: &[f64], upstream: f64, gamma_trainable: bool, grads: &mut [f64]) {
        assert_eq!(grads.len(), self.params.len(), "gradient buffer size");
        let gamma = self.gamma();
        let e = self.exponent(s);
        let v = (-gamma * e).exp();
        let coeff = upstream * v * (-gamma) * 2.0;
        let mut p = 0;
        for k in 0..self.state_dim {
            for l in k + 1..self.state_dim {
                let r = self.params[p] * s[k] + self.params[p + 1] * s[l] + self.params[p + 2];
                grads[p] += coeff * r * s[k];
                grads[p + 1] += coeff * r * s[l];
                grads[p + 2] += coeff * r;
                p += 3;
            }
        }
        if gamma_trainable {
            grads[p] += upstream * v * (-e);
        }
    }

    /// Maximize the score over the coordinates where `pinned` is false,
    /// holding pinned coordinates at their values in `state`.
    ///
    /// The exponent is a convex quadratic, so the maximizer solves the
    /// reduced normal equations; `ridge` keeps rank-deficient systems
    /// (fresh or sparsely trained nets) well posed.
    pub fn constrained_argmax(&self, state: &[f64], pinned: &[bool], ridge: f64) -> Vec<f64> {
        assert_eq!(state.len(), self.state_dim, "state width mismatch");
        assert_eq!(pinned.len(), self.state_dim, "pin mask width mismatch");
        let free: Vec<usize> = (0..self.state_dim).filter(|&i| !pinned[i]).collect();
        if free.is_empty() {
            return state.to_vec();
        }

        // Assemble E(s) = s^T A s + 2 b^T s + const from the residuals.
        let n = self.state_dim;
        let mut a = vec![0.0; n * n];
        let mut b = vec![0.0; n];
        let mut p = 0;
        for k in 0..n {
            for l in k + 1..n {
                let [w1, w2, w3] = [self.params[p], self.params[p + 1], self.params[p + 2]];
                a[k * n + k] += w1 * w1;
                a[l * n + l] += w2 * w2;
                a[k * n + l] += w1 * w2;
                a[l * n + k] += w1 * w2;
                b[k] += w1 * w3;
                b[l] += w2 * w3;
                p += 3;
            }
        }

        // Reduced system over free coordinates:
        // (A_FF + ridge I) x = -(b_F + A_FP s_P).
        let nf = free.len();
        let mut m = DMatrix::zeros(nf, nf);
        let mut rhs = DVector::zeros(nf);
        for (fi, &i) in free.iter().enumerate() {
            let mut r = -b[i];
            for j in 0..n {
                if pinned[j] {
                    r -= a[i * n + j] * state[j];
                }
            }
            rhs[fi] = r;
            for (fj, &j) in free.iter().enumerate() {
                m[(fi, fj)] = a[i * n + j] + if fi == fj { ridge } else { 0.0 };
            }
        }
        let solution = m.lu().solve(&rhs).expect("ridge-regularized system is nonsingular");

        let mut out = state.to_vec();
        for (fi, &i) in free.iter().enumerate() {
            out[i] = solution[fi];
        }
        out
    }
}

/// Label class of a training sample.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum LabelClass {
    /// A surprise or a credited switch happened here; target > 0.
    Interesting,
    /// Nothing observable happened; target 0.
    Undetermined,
}

#[derive(Debug, Clone)]
pub struct LabeledSample {
    pub state: Vec<f64>,
    pub target: f64,
    pub class: LabelClass,
}

/// Produce training samples for one executed leg of a rollout.
///
/// `leg_states` are the states observed while the predecessor task was
/// active (including the achieved switch state when the leg succeeded).
/// `switch_index` marks the switch state within `leg_states`;
/// `next_task_succeeded` is the later success of the task the switch led
/// to; `surprise` holds the per-state surprise flags of that task.
///
/// Zero-target samples after the first positive sample of the leg are
/// discarded: object behavior after a surprising event is unknown, so
/// those states must not be treated as negatives.
pub fn label_rollout(
    leg_states: &[Vec<f64>],
    switch_index: Option<usize>,
    next_task_succeeded: bool,
    surprise: &[bool],
) -> Vec<LabeledSample> {
    assert_eq!(leg_states.len(), surprise.len(), "surprise flags misaligned");
    let mut out = Vec::with_capacity(leg_states.len());
    let mut saw_positive = false;
    for (t, state) in leg_states.iter().enumerate() {
        let switch_credit: f64 = if Some(t) == switch_index && next_task_succeeded {
            1.0
        } else {
            0.0
        };
        let target = (switch_credit + if surprise[t] { 1.0 } else { 0.0 }).min(1.0);
        if target > 0.0 {
            out.push(LabeledSample {
                state: state.clone(),
                target,
                class: LabelClass::Interesting,
            });
            saw_positive = true;
        } else if !saw_positive {
            out.push(LabeledSample {
                state: state.clone(),
                target: 0.0,
                class: LabelClass::Undetermined,
            });
        }
    }
    out
}

/// One transition's net plus its sample pools.
#[derive(Debug, Clone)]
struct TransitionNet {
    net: RelationalNet,
    adam: Adam,
    positives: Vec<LabeledSample>,
    undetermined: Vec<LabeledSample>,
    pos_head: usize,
    und_head: usize,
}

/// Lazily instantiated bank of transition nets, keyed by
/// `(to_task, from_task)`.
#[derive(Debug, Clone)]
pub struct GoalProposalBank {
    cfg: GoalProposalConfig,
    state_dim: usize,
    task_count: usize,
    nets: Vec<Option<TransitionNet>>,
    init_seed: u64,
}

impl GoalProposalBank {
    pub fn new(state_dim: usize, task_count: usize, cfg: GoalProposalConfig, init_seed: u64) -> Self {
        GoalProposalBank {
            cfg,
            state_dim,
            task_count,
            nets: (0..task_count * task_count).map(|_| None).collect(),
            init_seed,
        }
    }

    pub fn config(&self) -> &GoalProposalConfig {
        &self.cfg
    }

    fn slot(&self, to: TaskId, from: TaskId) -> usize {
        assert!(to < self.task_count && from < self.task_count, "task out of range");
        assert_ne!(to, from, "transition nets connect distinct tasks");
        to * self.task_count + from
    }

    pub fn net(&self, to: TaskId, from: TaskId) -> Option<&RelationalNet> {
        self.nets[self.slot(to, from)].as_ref().map(|t| &t.net)
    }

    pub fn positive_count(&self, to: TaskId, from: TaskId) -> usize {
        self.nets[self.slot(to, from)]
            .as_ref()
            .map_or(0, |t| t.positives.len())
    }

    pub fn undetermined_count(&self, to: TaskId, from: TaskId) -> usize {
        self.nets[self.slot(to, from)]
            .as_ref()
            .map_or(0, |t| t.undetermined.len())
    }

    /// Store labeled samples for the `(to, from)` transition, creating
    /// its net on first contact.
    pub fn ingest(&mut self, to: TaskId, from: TaskId, samples: Vec<LabeledSample>) {
        if samples.is_empty() {
            return;
        }
        let slot = self.slot(to, from);
        if self.nets[slot].is_none() {
            let mut rng = crate::rng::rng(self.init_seed, &[to as u64, from as u64]);
            let net = RelationalNet::new(
                self.state_dim,
                self.cfg.gamma_init,
                self.cfg.weight_init,
                &mut rng,
            );
            let adam = Adam::new(self.cfg.lr, net.param_count());
            self.nets[slot] = Some(TransitionNet {
                net,
                adam,
                positives: Vec::new(),
                undetermined: Vec::new(),
                pos_head: 0,
                und_head: 0,
            });
        }
        let entry = self.nets[slot].as_mut().unwrap();
        for s in samples {
            match s.class {
                LabelClass::Interesting => push_ring(
                    &mut entry.positives,
                    &mut entry.pos_head,
                    self.cfg.positive_capacity,
                    s,
                ),
                LabelClass::Undetermined => push_ring(
                    &mut entry.undetermined,
                    &mut entry.und_head,
                    self.cfg.undetermined_capacity,
                    s,
                ),
            }
        }
    }

    /// Train every net that has at least one positive sample; nets
    /// without positives are left untouched. Returns the mean final
    /// batch loss across trained nets.
    pub fn train(&mut self, rng: &mut impl Rng) -> Option<f64> {
        self.train_iters(self.cfg.train_iters, rng)
    }

    pub fn train_iters(&mut self, iters: usize, rng: &mut impl Rng) -> Option<f64> {
        let mut losses = Vec::new();
        for slot in 0..self.nets.len() {
            let Some(entry) = self.nets[slot].as_mut() else { continue };
            if entry.positives.is_empty() {
                continue;
            }
            let mut grads = vec![0.0; entry.net.param_count()];
            let mut last = 0.0;
            let half = self.cfg.batch_size / 2;
            for _ in 0..iters {
                grads.fill(0.0);
                last = 0.0;
                // Balanced batch: half positives, half undetermined, both
                // resampled with replacement.
                let mut batch: Vec<(bool, usize)> = Vec::with_capacity(self.cfg.batch_size);
                for _ in 0..half {
                    batch.push((true, rng.gen_range(0..entry.positives.len())));
                }
                for _ in half..self.cfg.batch_size {
                    if entry.undetermined.is_empty() {
                        batch.push((true, rng.gen_range(0..entry.positives.len())));
                    } else {
                        batch.push((false, rng.gen_range(0..entry.undetermined.len())));
                    }
                }
                let scale = 1.0 / batch.len() as f64;
                for (positive, idx) in batch {
                    let sample = if positive {
                        &entry.positives[idx]
                    } else {
                        &entry.undetermined[idx]
                    };
                    let v = entry.net.eval(&sample.state);
                    let resid = v - sample.target;
                    last += resid * resid * scale;
                    entry.net.backward(
                        &sample.state,
                        2.0 * resid * scale,
                        self.cfg.gamma_trainable,
                        &mut grads,
                    );
                }
                entry.adam.step(&mut entry.net.params, &grads);
                // Keep the sharpness positive.
                let gamma = entry.net.params.last_mut().unwrap();
                *gamma = gamma.max(1e-3);
            }
            losses.push(last);
        }
        if losses.is_empty() {
            None
        } else {
            Some(losses.iter().sum::<f64>() / losses.len() as f64)
        }
    }

    /// Propose a goal for the task at `chain_pos` of `chain`, given the
    /// live state.
    ///
    /// Coordinates of every task after the current one are pinned to
    /// their live values (those cannot be controlled yet); the net's
    /// constrained argmax over the rest yields the proposal. Before any
    /// positive sample exists the proposal is a uniform random point.
    pub fn sample_goal(
        &self,
        spaces: &GoalSpaces,
        chain: &TaskChain,
        chain_pos: usize,
        state: &[f64],
        arena_half: f64,
        rng: &mut impl Rng,
    ) -> Vec<f64> {
        assert!(chain_pos + 1 < chain.len(), "final task goals come from the environment");
        let current = chain.0[chain_pos];
        let next = chain.0[chain_pos + 1];
        let slot = self.slot(next, current);
        let usable = self.nets[slot]
            .as_ref()
            .is_some_and(|t| !t.positives.is_empty());
        if !usable {
            return uniform_goal(arena_half, spaces.goal_dim(current), rng);
        }
        let net = &self.nets[slot].as_ref().unwrap().net;
        let mut pinned = vec![false; spaces.state_dim()];
        for &task in &chain.0[chain_pos + 1..] {
            for &i in spaces.indices(task) {
                pinned[i] = true;
            }
        }
        let solution = net.constrained_argmax(state, &pinned, self.cfg.ridge);
        spaces
            .indices(current)
            .iter()
            .map(|&i| solution[i].clamp(-arena_half, arena_half))
            .collect()
    }

    /// Iterate instantiated nets (deterministic order) with their keys.
    pub fn iter_nets(&self) -> impl Iterator<Item = (TaskId, TaskId, &RelationalNet)> {
        self.nets.iter().enumerate().filter_map(move |(slot, e)| {
            e.as_ref()
                .map(|t| (slot / self.task_count, slot % self.task_count, &t.net))
        })
    }
}

fn push_ring(buf: &mut Vec<LabeledSample>, head: &mut usize, cap: usize, sample: LabeledSample) {
    if buf.len() < cap {
        buf.push(sample);
    } else {
        buf[*head] = sample;
        *head = (*head + 1) % cap;
    }
}

/// Ground-truth goal proposal: the goal for the preceding task is the
/// current value of the target task's goal-space coordinates (drive to
/// where the object is).
pub fn oracle_goal(spaces: &GoalSpaces, to_task: TaskId, state: &[f64]) -> Vec<f64> {
    spaces.restrict(state, to_task)
}
