//! Soft actor-critic over the crate's own MLP backprop.
//!
//! Twin critics with polyak-averaged targets, a Gaussian actor with tanh
//! squashing (log-prob corrected), fixed entropy coefficient, and the
//! original-style policy regularization on the Gaussian head. Rewards
//! are divided by `reward_norm` and multiplied by `reward_scale` before
//! entering the Bellman target, which is how the entropy/reward tradeoff
//! is tuned.
//!
//! The actor input is the full state concatenated with the goal, each
//! elementwise scaled by fixed normalization vectors; critics see the
//! same features plus the action normalized to [-1, 1].

use rand::Rng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::env::{standard_normal, GoalSpaces, TaskId};
use crate::numerics::{Activation, Adam, Mlp};

use super::{her_relabel, Policy, PolicyDiagnostics, ReplayBuffer, ReplayTransition};

const LOGP_EPS: f64 = 1e-6;
const HALF_LN_2PI: f64 = 0.918_938_533_204_672_7;

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct SacConfig {
    pub layer_size: usize,
    pub hidden_layers: usize,
    pub lr: f64,
    pub batch_size: usize,
    /// Gradient iterations per training phase.
    pub train_iters: usize,
    pub buffer_capacity: usize,
    pub discount: f64,
    /// Polyak rate of the target networks.
    pub tau: f64,
    pub reward_scale: f64,
    /// Rewards are divided by this before scaling (keeps Bellman targets
    /// at workable magnitudes whatever the arena units are).
    pub reward_norm: f64,
    /// Entropy coefficient (fixed; the reward scale does the tuning).
    pub entropy_coef: f64,
    /// Quadratic regularization of the Gaussian head outputs.
    pub policy_reg: f64,
    /// Uniform random actions until the buffer holds this many steps.
    pub initial_random_steps: usize,
    pub log_std_min: f64,
    pub log_std_max: f64,
    /// Hindsight relabels per transition; 0 disables hindsight replay.
    pub her_k: usize,
}

impl Default for SacConfig {
    fn default() -> Self {
        SacConfig {
            layer_size: 64,
            hidden_layers: 2,
            lr: 3e-4,
            batch_size: 64,
            train_iters: 64,
            buffer_capacity: 1_000_000,
            discount: 0.99,
            tau: 5e-3,
            reward_scale: 5.0,
            reward_norm: 1.0,
            entropy_coef: 0.2,
            policy_reg: 1e-3,
            initial_random_steps: 1_500,
            log_std_min: -5.0,
            log_std_max: 2.0,
            her_k: 0,
        }
    }
}

/// Serializable parameter snapshot of a policy.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct SacCheckpoint {
    pub actor: Mlp,
    pub critic1: Mlp,
    pub critic2: Mlp,
    pub target1: Mlp,
    pub target2: Mlp,
}

pub struct SacPolicy {
    cfg: SacConfig,
    task: TaskId,
    spaces: GoalSpaces,
    obs_scale: Vec<f64>,
    goal_scale: Vec<f64>,
    action_dim: usize,
    action_limit: f64,
    actor: Mlp,
    critic1: Mlp,
    critic2: Mlp,
    target1: Mlp,
    target2: Mlp,
    opt_actor: Adam,
    opt_critic1: Adam,
    opt_critic2: Adam,
    buffer: ReplayBuffer,
    her_rng: ChaCha8Rng,
}

impl SacPolicy {
    #[allow(clippy::too_many_arguments)]
    pub fn new(
        task: TaskId,
        spaces: GoalSpaces,
        obs_scale: Vec<f64>,
        goal_scale: Vec<f64>,
        action_dim: usize,
        action_limit: f64,
        cfg: SacConfig,
        seed: u64,
    ) -> Self {
        assert_eq!(obs_scale.len(), spaces.state_dim(), "obs scale width");
        assert_eq!(goal_scale.len(), spaces.goal_dim(task), "goal scale width");
        assert!(action_limit > 0.0, "action limit must be positive");
        let feat_dim = obs_scale.len() + goal_scale.len();
        let mut rng = crate::rng::rng(seed, &[task as u64, 0xac]);
        let actor = Mlp::with_shape(
            feat_dim,
            cfg.hidden_layers,
            cfg.layer_size,
            2 * action_dim,
            Activation::Relu,
            &mut rng,
        );
        let mut critic = |rng: &mut ChaCha8Rng| {
            Mlp::with_shape(
                feat_dim + action_dim,
                cfg.hidden_layers,
                cfg.layer_size,
                1,
                Activation::Relu,
                rng,
            )
        };
        let critic1 = critic(&mut rng);
        let critic2 = critic(&mut rng);
        let target1 = critic1.clone();
        let target2 = critic2.clone();
        SacPolicy {
            opt_actor: Adam::new(cfg.lr, actor.param_count()),
            opt_critic1: Adam::new(cfg.lr, critic1.param_count()),
            opt_critic2: Adam::new(cfg.lr, critic2.param_count()),
            buffer: ReplayBuffer::new(cfg.buffer_capacity),
            her_rng: crate::rng::rng(seed, &[task as u64, 0x4e]),
            cfg,
            task,
            spaces,
            obs_scale,
            goal_scale,
            action_dim,
            action_limit,
            actor,
            critic1,
            critic2,
            target1,
            target2,
        }
    }

    pub fn buffer_len(&self) -> usize {
        self.buffer.len()
    }

    pub fn config(&self) -> &SacConfig {
        &self.cfg
    }

    pub fn checkpoint(&self) -> SacCheckpoint {
        SacCheckpoint {
            actor: self.actor.clone(),
            critic1: self.critic1.clone(),
            critic2: self.critic2.clone(),
            target1: self.target1.clone(),
            target2: self.target2.clone(),
        }
    }

    pub fn restore(&mut self, ckpt: SacCheckpoint) {
        self.actor = ckpt.actor;
        self.critic1 = ckpt.critic1;
        self.critic2 = ckpt.critic2;
        self.target1 = ckpt.target1;
        self.target2 = ckpt.target2;
    }

    fn featurize(&self, state: &[f64], goal: &[f64]) -> Vec<f64> {
        assert_eq!(state.len(), self.obs_scale.len(), "state width mismatch");
        assert_eq!(goal.len(), self.goal_scale.len(), "goal width mismatch");
        state
            .iter()
            .zip(self.obs_scale.iter())
            .map(|(s, c)| s * c)
            .chain(goal.iter().zip(self.goal_scale.iter()).map(|(g, c)| g * c))
            .collect()
    }

    /// Head outputs: (mean, clamped log-std, clamp mask) per dimension.
    fn head(&self, out: &[f64]) -> (Vec<f64>, Vec<f64>, Vec<bool>) {
        let a = self.action_dim;
        let mean = out[..a].to_vec();
        let mut log_std = Vec::with_capacity(a);
        let mut clamped = Vec::with_capacity(a);
        for &raw in &out[a..] {
            let c = raw.clamp(self.cfg.log_std_min, self.cfg.log_std_max);
            clamped.push(c != raw);
            log_std.push(c);
        }
        (mean, log_std, clamped)
    }

    fn scaled_reward(&self, r: f64) -> f64 {
        self.cfg.reward_scale * r / self.cfg.reward_norm
    }

    /// Squashed sample, its log-prob, and the pre-squash noise.
    fn sample_action(
        mean: &[f64],
        log_std: &[f64],
        limit: f64,
        rng: &mut ChaCha8Rng,
    ) -> (Vec<f64>, f64, Vec<f64>) {
        let mut squashed = Vec::with_capacity(mean.len());
        let mut noise = Vec::with_capacity(mean.len());
        let mut logp = 0.0;
        for d in 0..mean.len() {
            let eps = standard_normal(rng);
            let raw = mean[d] + log_std[d].exp() * eps;
            let t = raw.tanh();
            logp += -0.5 * eps * eps - HALF_LN_2PI - log_std[d]
                - (1.0 - t * t + LOGP_EPS).ln()
                - limit.ln();
            squashed.push(t);
            noise.push(eps);
        }
        (squashed, logp, noise)
    }

    fn one_iteration(&mut self, rng: &mut ChaCha8Rng) -> PolicyDiagnostics {
        let b = self.cfg.batch_size;
        let scale = 1.0 / b as f64;
        let alpha = self.cfg.entropy_coef;
        let batch: Vec<usize> = (0..b).map(|_| self.buffer.sample_index(rng)).collect();

        // Critic update.
        let mut g1 = vec![0.0; self.critic1.param_count()];
        let mut g2 = vec![0.0; self.critic2.param_count()];
        let mut critic_loss = 0.0;
        for &i in &batch {
            let tr = self.buffer.get(i);
            let feat = self.featurize(&tr.state, &tr.goal);
            let feat_next = self.featurize(&tr.next_state, &tr.goal);
            let out = self.actor.forward(&feat_next);
            let (mean, log_std, _) = self.head(&out);
            let (next_a, next_logp, _) =
                Self::sample_action(&mean, &log_std, self.action_limit, rng);
            let mut tin = feat_next.clone();
            tin.extend_from_slice(&next_a);
            let q1t = self.target1.forward(&tin)[0];
            let q2t = self.target2.forward(&tin)[0];
            // Always bootstrap: reaching a goal switches tasks instead of
            // ending the world, so success is not a zero-value terminal.
            // Cutting the target at `done` would teach the policy to hover
            // next to the goal and collect entropy instead of entering it.
            let y = self.scaled_reward(tr.reward)
                + self.cfg.discount * (q1t.min(q2t) - alpha * next_logp);

            let mut cin = feat;
            cin.extend(tr.action.iter().map(|a| a / self.action_limit));
            for (critic, grads) in [(&self.critic1, &mut g1), (&self.critic2, &mut g2)] {
                let trace = critic.forward_trace(&cin);
                let q = trace.output()[0];
                critic_loss += (q - y) * (q - y) * scale * 0.5;
                critic.backward(&trace, &[2.0 * (q - y) * scale], grads);
            }
        }
        self.opt_critic1.step(self.critic1.params_mut(), &g1);
        self.opt_critic2.step(self.critic2.params_mut(), &g2);

        // Actor update (critics frozen; their gradients go to scratch).
        let mut ga = vec![0.0; self.actor.param_count()];
        let mut scratch = vec![0.0; self.critic1.param_count()];
        let mut actor_loss = 0.0;
        let feat_len = self.obs_scale.len() + self.goal_scale.len();
        for &i in &batch {
            let tr = self.buffer.get(i);
            let feat = self.featurize(&tr.state, &tr.goal);
            let trace_a = self.actor.forward_trace(&feat);
            let (mean, log_std, clamped) = self.head(trace_a.output());
            let (a_norm, logp, noise) =
                Self::sample_action(&mean, &log_std, self.action_limit, rng);

            let mut qin = feat.clone();
            qin.extend_from_slice(&a_norm);
            let trace_q1 = self.critic1.forward_trace(&qin);
            let trace_q2 = self.critic2.forward_trace(&qin);
            let q1 = trace_q1.output()[0];
            let q2 = trace_q2.output()[0];
            let reg: f64 = mean.iter().map(|m| m * m).sum::<f64>()
                + log_std.iter().map(|l| l * l).sum::<f64>();
            actor_loss += (alpha * logp - q1.min(q2) + self.cfg.policy_reg * reg) * scale;

            // dLoss/da_norm through the smaller critic.
            scratch.fill(0.0);
            let input_grad = if q1 <= q2 {
                self.critic1.backward(&trace_q1, &[-scale], &mut scratch)
            } else {
                self.critic2.backward(&trace_q2, &[-scale], &mut scratch)
            };

            let mut upstream = vec![0.0; 2 * self.action_dim];
            for d in 0..self.action_dim {
                let t = a_norm[d];
                let denom = 1.0 - t * t + LOGP_EPS;
                let dlogp_draw = 2.0 * t * (1.0 - t * t) / denom;
                let g_raw =
                    input_grad[feat_len + d] * (1.0 - t * t) + alpha * scale * dlogp_draw;
                upstream[d] = g_raw + 2.0 * self.cfg.policy_reg * scale * mean[d];
                if !clamped[d] {
                    upstream[self.action_dim + d] = g_raw * log_std[d].exp() * noise[d]
                        - alpha * scale
                        + 2.0 * self.cfg.policy_reg * scale * log_std[d];
                }
            }
            self.actor.backward(&trace_a, &upstream, &mut ga);
        }
        self.opt_actor.step(self.actor.params_mut(), &ga);

        // Polyak target tracking.
        for (online, target) in [
            (&self.critic1, &mut self.target1),
            (&self.critic2, &mut self.target2),
        ] {
            let tau = self.cfg.tau;
            for (t, o) in target.params_mut().iter_mut().zip(online.params().iter()) {
                *t += tau * (o - *t);
            }
        }

        PolicyDiagnostics { critic_loss, actor_loss }
    }
}

impl Policy for SacPolicy {
    fn act(&self, state: &[f64], goal: &[f64], explore: bool, rng: &mut ChaCha8Rng) -> Vec<f64> {
        if explore && self.buffer.len() < self.cfg.initial_random_steps {
            return (0..self.action_dim)
                .map(|_| rng.gen_range(-self.action_limit..self.action_limit))
                .collect();
        }
        let feat = self.featurize(state, goal);
        let out = self.actor.forward(&feat);
        let (mean, log_std, _) = self.head(&out);
        (0..self.action_dim)
            .map(|d| {
                let raw = if explore {
                    mean[d] + log_std[d].exp() * standard_normal(rng)
                } else {
                    mean[d]
                };
                raw.tanh() * self.action_limit
            })
            .collect()
    }

    fn observe_episode(&mut self, episode: &[ReplayTransition]) {
        for tr in episode {
            self.buffer.push(tr.clone());
        }
        if self.cfg.her_k > 0 {
            for tr in her_relabel(&self.spaces, self.task, episode, self.cfg.her_k, &mut self.her_rng)
            {
                self.buffer.push(tr);
            }
        }
    }

    fn train(&mut self, rng: &mut ChaCha8Rng) -> Option<PolicyDiagnostics> {
        if self.buffer.len() < self.cfg.batch_size {
            return None;
        }
        let mut diag = PolicyDiagnostics::default();
        for _ in 0..self.cfg.train_iters {
            diag = self.one_iteration(rng);
        }
        Some(diag)
    }
}
