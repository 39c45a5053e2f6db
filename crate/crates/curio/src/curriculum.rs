//! Success bookkeeping and the final-task selector.
//!
//! Task attempts land in a per-task ring buffer of the last `Z` outcomes;
//! the success rate is the mean of the retained window and the learning
//! progress is its finite difference between consecutive attempts of the
//! same task. A multi-armed bandit tracks the non-stationary internal
//! reward `|progress| + beta * surprise` and samples the next final task
//! proportionally to its action values.

use rand::Rng;
use serde::{Deserialize, Serialize};
use std::collections::VecDeque;

use crate::env::{GoalSpaces, TaskId};

/// Success test: did any step bring the task's goal-space coordinates
/// within the squared-distance threshold of the goal?
pub fn task_success<'a>(
    spaces: &GoalSpaces,
    states: impl IntoIterator<Item = &'a [f64]>,
    task: TaskId,
    goal: &[f64],
    delta: f64,
) -> bool {
    states
        .into_iter()
        .any(|s| spaces.sq_distance(s, task, goal) <= delta)
}

/// Internal bandit reward for a rollout that attempted `task`:
/// `|progress| + beta * surprise`. Progress enters by absolute value so
/// both improvement and degradation attract attention.
pub fn bandit_reward(progress: f64, surprised: bool, beta: f64) -> f64 {
    progress.abs() + beta * if surprised { 1.0 } else { 0.0 }
}

/// Per-task success history, rate, and learning progress.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct TaskStats {
    window: usize,
    history: Vec<VecDeque<bool>>,
    success_rate: Vec<f64>,
    progress: Vec<f64>,
    attempts: Vec<u64>,
}

impl TaskStats {
    pub fn new(task_count: usize, window: usize) -> Self {
        assert!(window > 0, "success window must be positive");
        TaskStats {
            window,
            history: vec![VecDeque::with_capacity(window); task_count],
            success_rate: vec![0.0; task_count],
            progress: vec![0.0; task_count],
            attempts: vec![0; task_count],
        }
    }

    pub fn task_count(&self) -> usize {
        self.history.len()
    }

    pub fn success_rate(&self, task: TaskId) -> f64 {
        self.success_rate[task]
    }

    pub fn progress(&self, task: TaskId) -> f64 {
        self.progress[task]
    }

    pub fn attempts(&self, task: TaskId) -> u64 {
        self.attempts[task]
    }

    /// Mean success rate across all tasks.
    pub fn competence(&self) -> f64 {
        self.success_rate.iter().sum::<f64>() / self.success_rate.len() as f64
    }

    /// Push one attempt outcome; returns the new learning progress
    /// (success-rate difference against the previous attempt of `task`).
    pub fn record_attempt(&mut self, task: TaskId, success: bool) -> f64 {
        let hist = &mut self.history[task];
        if hist.len() == self.window {
            hist.pop_front();
        }
        hist.push_back(success);
        self.attempts[task] += 1;
        let new_rate =
            hist.iter().filter(|&&s| s).count() as f64 / hist.len() as f64;
        self.progress[task] = new_rate - self.success_rate[task];
        self.success_rate[task] = new_rate;
        self.progress[task]
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct BanditConfig {
    /// Action-value tracking rate.
    pub lr: f64,
    /// Surprise bonus weight in the internal reward.
    pub surprise_bonus: f64,
    /// Probability of selecting uniformly at random.
    pub random_eps: f64,
    /// Lower clamp so proportional selection is defined at cold start.
    pub q_floor: f64,
}

impl Default for BanditConfig {
    fn default() -> Self {
        BanditConfig {
            lr: 0.1,
            surprise_bonus: 0.1,
            random_eps: 0.05,
            q_floor: 1e-6,
        }
    }
}

/// Multi-armed bandit over final tasks with exponential reward tracking.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct Bandit {
    cfg: BanditConfig,
    q: Vec<f64>,
}

impl Bandit {
    pub fn new(task_count: usize, cfg: BanditConfig) -> Self {
        Bandit { cfg, q: vec![0.0; task_count] }
    }

    pub fn config(&self) -> &BanditConfig {
        &self.cfg
    }

    pub fn q(&self, task: TaskId) -> f64 {
        self.q[task]
    }

    /// Exponential tracking update, clamped to stay nonnegative.
    pub fn update(&mut self, task: TaskId, reward: f64) {
        let q = &mut self.q[task];
        *q += self.cfg.lr * (reward - *q);
        *q = q.max(0.0);
    }

    /// Selection probabilities: epsilon-uniform mixed with values
    /// proportional to the floored action values.
    pub fn probabilities(&self) -> Vec<f64> {
        let k = self.q.len() as f64;
        let floored: Vec<f64> = self.q.iter().map(|&q| q.max(self.cfg.q_floor)).collect();
        let sum: f64 = floored.iter().sum();
        floored
            .iter()
            .map(|&q| self.cfg.random_eps / k + (1.0 - self.cfg.random_eps) * q / sum)
            .collect()
    }

    /// Draw a final task.
    pub fn sample(&self, rng: &mut impl Rng) -> TaskId {
        if rng.gen::<f64>() < self.cfg.random_eps {
            return rng.gen_range(0..self.q.len());
        }
        let floored: Vec<f64> = self.q.iter().map(|&q| q.max(self.cfg.q_floor)).collect();
        let sum: f64 = floored.iter().sum();
        let mut u = rng.gen::<f64>() * sum;
        for (i, &q) in floored.iter().enumerate() {
            u -= q;
            if u <= 0.0 {
                return i;
            }
        }
        self.q.len() - 1
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::env::{ArenaConfig, ObjectKind};
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn spaces() -> GoalSpaces {
        ArenaConfig {
            half_size: 5.0,
            dt: 0.1,
            friction: 1.0,
            agent_mass: 1.0,
            max_force: 5.0,
            pickup_radius: 0.5,
            success_delta: 1.0,
            t_max: 400,
            random_walk_sigma: 0.03,
            objects: vec![ObjectKind::Tool],
        }
        .goal_spaces()
    }

    #[test]
    fn passing_through_the_goal_succeeds() {
        let sp = spaces();
        let dim = sp.state_dim();
        let goal = vec![2.0, -1.0];
        let mut far = vec![0.0; dim];
        far[0] = -4.0;
        let mut hit = vec![0.0; dim];
        hit[0] = 2.0;
        hit[1] = -1.0;
        let traj: Vec<Vec<f64>> = vec![far.clone(), hit, far];
        assert!(task_success(&sp, traj.iter().map(|s| s.as_slice()), 0, &goal, 1.0));
    }

    #[test]
    fn trajectory_far_from_goal_fails() {
        let sp = spaces();
        let goal = vec![4.0, 4.0];
        let s = vec![0.0; sp.state_dim()]; // distance^2 = 32 > delta
        let traj = vec![s.clone(), s];
        assert!(!task_success(&sp, traj.iter().map(|s| s.as_slice()), 0, &goal, 1.0));
    }

    #[test]
    fn success_matches_brute_force_scan() {
        let sp = spaces();
        let mut rng = ChaCha8Rng::seed_from_u64(21);
        for _ in 0..200 {
            let goal = vec![rng.gen_range(-5.0..5.0), rng.gen_range(-5.0..5.0)];
            let traj: Vec<Vec<f64>> = (0..50)
                .map(|_| (0..sp.state_dim()).map(|_| rng.gen_range(-5.0..5.0)).collect())
                .collect();
            let got = task_success(&sp, traj.iter().map(|s| s.as_slice()), 0, &goal, 1.0);
            let mut want = false;
            for s in &traj {
                let d2 = (s[0] - goal[0]).powi(2) + (s[1] - goal[1]).powi(2);
                if d2 <= 1.0 {
                    want = true;
                }
            }
            assert_eq!(got, want);
        }
    }

    #[test]
    fn ten_straight_successes_give_full_rate() {
        let mut ts = TaskStats::new(2, 10);
        for _ in 0..10 {
            ts.record_attempt(0, true);
        }
        assert_eq!(ts.success_rate(0), 1.0);
        assert_eq!(ts.success_rate(1), 0.0);
    }

    #[test]
    fn alternating_outcomes_give_half_rate() {
        let mut ts = TaskStats::new(1, 10);
        for i in 0..10 {
            ts.record_attempt(0, i % 2 == 0);
        }
        assert_eq!(ts.success_rate(0), 0.5);
    }

    #[test]
    fn incremental_rate_matches_recompute_from_scratch() {
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        let mut ts = TaskStats::new(1, 10);
        let mut all = Vec::new();
        for _ in 0..500 {
            let s = rng.gen_bool(0.37);
            all.push(s);
            let prev = ts.success_rate(0);
            let rho = ts.record_attempt(0, s);
            let tail = &all[all.len().saturating_sub(10)..];
            let want = tail.iter().filter(|&&x| x).count() as f64 / tail.len() as f64;
            assert!((ts.success_rate(0) - want).abs() < 1e-12);
            assert!((rho - (want - prev)).abs() < 1e-12);
            assert!(rho.abs() <= 1.0);
        }
    }

    #[test]
    fn reward_formula_is_abs_progress_plus_surprise_bonus() {
        assert_eq!(bandit_reward(0.0, false, 0.1), 0.0);
        assert!((bandit_reward(0.2, true, 0.1) - 0.3).abs() < 1e-12);
        // Degrading performance still earns attention.
        assert!((bandit_reward(-0.1, false, 0.1) - 0.1).abs() < 1e-12);
    }

    #[test]
    fn bandit_update_arithmetic() {
        // Drive q to 0.5 through the public API, then check one update.
        let mut b = Bandit::new(1, BanditConfig::default());
        for _ in 0..2000 {
            b.update(0, 0.5);
        }
        assert!((b.q(0) - 0.5).abs() < 1e-9);
        b.update(0, 1.0);
        assert!((b.q(0) - 0.55).abs() < 1e-9);
    }

    #[test]
    fn constant_reward_reaches_fixed_point() {
        let mut b = Bandit::new(1, BanditConfig::default());
        for _ in 0..1000 {
            b.update(0, 0.7);
        }
        assert!((b.q(0) - 0.7).abs() < 1e-3);
    }

    #[test]
    fn switching_reward_stream_matches_iterated_recurrence() {
        let mut b = Bandit::new(1, BanditConfig::default());
        let mut q_ref = 0.0_f64;
        for step in 0..1000 {
            let r = if step < 500 { 0.0 } else { 1.0 };
            b.update(0, r);
            q_ref = q_ref + 0.1 * (r - q_ref);
            q_ref = q_ref.max(0.0);
        }
        assert!((b.q(0) - q_ref).abs() < 1e-12);
        assert!((b.q(0) - 1.0).abs() < 1e-2);
    }

    #[test]
    fn equal_values_sample_uniformly() {
        let mut b = Bandit::new(5, BanditConfig::default());
        for t in 0..5 {
            for _ in 0..100 {
                b.update(t, 1.0);
            }
        }
        let mut rng = ChaCha8Rng::seed_from_u64(9);
        let mut counts = [0usize; 5];
        let n = 10_000;
        for _ in 0..n {
            counts[b.sample(&mut rng)] += 1;
        }
        let expected = n as f64 / 5.0;
        let chi2: f64 = counts.iter().map(|&c| (c as f64 - expected).powi(2) / expected).sum();
        // chi^2 critical value for 4 dof at p = 0.01.
        assert!(chi2 < 13.277, "chi2 = {chi2}");
    }

    #[test]
    fn proportional_sampling_matches_value_ratio() {
        let cfg = BanditConfig { random_eps: 0.0, ..Default::default() };
        let mut b = Bandit::new(2, cfg);
        for _ in 0..2000 {
            b.update(0, 3.0);
            b.update(1, 1.0);
        }
        let mut rng = ChaCha8Rng::seed_from_u64(13);
        let n = 100_000;
        let mut first = 0usize;
        for _ in 0..n {
            if b.sample(&mut rng) == 0 {
                first += 1;
            }
        }
        let freq = first as f64 / n as f64;
        assert!((freq - 0.75).abs() < 0.02, "freq = {freq}");
    }

    #[test]
    fn full_epsilon_ignores_values() {
        let cfg = BanditConfig { random_eps: 1.0, ..Default::default() };
        let mut b = Bandit::new(4, cfg);
        for _ in 0..100 {
            b.update(2, 100.0);
        }
        let mut rng = ChaCha8Rng::seed_from_u64(14);
        let mut counts = [0usize; 4];
        for _ in 0..10_000 {
            counts[b.sample(&mut rng)] += 1;
        }
        for c in counts {
            assert!((c as f64 / 10_000.0 - 0.25).abs() < 0.03);
        }
    }

    #[test]
    fn selection_probabilities_depend_only_on_value_ratios() {
        let cfg = BanditConfig { random_eps: 0.05, ..Default::default() };
        let mut a = Bandit::new(3, cfg.clone());
        let mut b = Bandit::new(3, cfg);
        // Same ratios at different scales (fixed points of the update).
        for _ in 0..5000 {
            a.update(0, 0.2);
            a.update(1, 0.4);
            a.update(2, 0.8);
            b.update(0, 0.05);
            b.update(1, 0.1);
            b.update(2, 0.2);
        }
        let pa = a.probabilities();
        let pb = b.probabilities();
        for (x, y) in pa.iter().zip(pb.iter()) {
            assert!((x - y).abs() < 1e-9, "{pa:?} vs {pb:?}");
        }
        assert!((pa.iter().sum::<f64>() - 1.0).abs() < 1e-12);
    }

    #[test]
    fn solvable_task_wins_attention_then_both_decay_to_floor() {
        // Task 0 becomes reliably solvable after a warm-up; task 1 never
        // succeeds. No surprise anywhere.
        let cfg = BanditConfig::default();
        let mut bandit = Bandit::new(2, cfg.clone());
        let mut stats = TaskStats::new(2, 10);
        let mut rng = ChaCha8Rng::seed_from_u64(33);
        let mut picks_progress_phase = [0usize; 2];
        let mut picks_late_phase = [0usize; 2];
        for round in 0..4000 {
            let task = bandit.sample(&mut rng);
            let success = task == 0 && stats.attempts(0) >= 5;
            let rho = stats.record_attempt(task, success);
            bandit.update(task, bandit_reward(rho, false, cfg.surprise_bonus));
            if round < 400 {
                picks_progress_phase[task] += 1;
            } else if round >= 3000 {
                picks_late_phase[task] += 1;
            }
        }
        assert!(
            picks_progress_phase[0] > picks_progress_phase[1],
            "progress phase picks: {picks_progress_phase:?}"
        );
        // After the plateau both values decay and selection approaches
        // the uniform floor.
        let late0 = picks_late_phase[0] as f64 / (picks_late_phase[0] + picks_late_phase[1]) as f64;
        assert!((late0 - 0.5).abs() < 0.1, "late frequency {late0}");
    }
}
