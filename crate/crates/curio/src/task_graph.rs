//! Learned task graph: which sub-task to perform directly before which.
//!
//! Every executed leg `(task, predecessor)` contributes one sample
//! `1 - T/T_max + beta * surprise` to a windowed running average
//! `Q[task][predecessor]`; row-normalizing gives the predecessor
//! probabilities `B`. Chains are planned backwards from the final task
//! with an epsilon-greedy policy over each row, never revisiting a task,
//! until the start column is chosen.

use rand::Rng;
use serde::{Deserialize, Serialize};
use std::collections::VecDeque;

use crate::env::TaskId;

/// Predecessor of a task in a chain: either "nothing" (the rollout
/// starts directly with the task) or another task.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Pred {
    Start,
    Task(TaskId),
}

impl Pred {
    /// Column index: start is column 0, task `j` is column `j + 1`.
    pub fn column(self) -> usize {
        match self {
            Pred::Start => 0,
            Pred::Task(j) => j + 1,
        }
    }

    pub fn from_column(col: usize) -> Pred {
        if col == 0 {
            Pred::Start
        } else {
            Pred::Task(col - 1)
        }
    }
}

/// Ordered sub-task list, executed front to back; the last entry is the
/// final task the chain was planned for.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct TaskChain(pub Vec<TaskId>);

impl TaskChain {
    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn final_task(&self) -> TaskId {
        *self.0.last().expect("chains are never empty")
    }

    /// Predecessor of position `pos` in execution order.
    pub fn predecessor(&self, pos: usize) -> Pred {
        if pos == 0 {
            Pred::Start
        } else {
            Pred::Task(self.0[pos - 1])
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct TaskGraphConfig {
    /// Running-average window per matrix entry.
    pub window: usize,
    /// Surprise bonus weight in the entry samples.
    pub surprise_bonus: f64,
    /// Epsilon of the predecessor selection during planning.
    pub sampling_eps: f64,
    /// Below this row mass the row falls back to a uniform choice.
    pub row_floor: f64,
}

impl Default for TaskGraphConfig {
    fn default() -> Self {
        TaskGraphConfig {
            window: 100,
            surprise_bonus: 1e-3,
            sampling_eps: 0.05,
            row_floor: 1e-9,
        }
    }
}

/// Windowed predecessor-value matrix with `K` rows and `K + 1` columns.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct TaskGraph {
    cfg: TaskGraphConfig,
    samples: Vec<Vec<VecDeque<f64>>>,
    values: Vec<Vec<f64>>,
}

impl TaskGraph {
    pub fn new(task_count: usize, cfg: TaskGraphConfig) -> Self {
        TaskGraph {
            cfg,
            samples: vec![vec![VecDeque::new(); task_count + 1]; task_count],
            values: vec![vec![0.0; task_count + 1]; task_count],
        }
    }

    /// One-hot graph from ground-truth predecessors (`preds[i]` is the
    /// true predecessor of task `i`).
    pub fn oracle(preds: &[Pred]) -> Self {
        let mut g = TaskGraph::new(preds.len(), TaskGraphConfig::default());
        for (task, &p) in preds.iter().enumerate() {
            g.samples[task][p.column()].push_back(1.0);
            g.values[task][p.column()] = 1.0;
        }
        g
    }

    pub fn task_count(&self) -> usize {
        self.values.len()
    }

    pub fn config(&self) -> &TaskGraphConfig {
        &self.cfg
    }

    /// Windowed mean for an entry (the `Q^B` value).
    pub fn value(&self, task: TaskId, pred: Pred) -> f64 {
        self.values[task][pred.column()]
    }

    /// Row-normalized predecessor probabilities; uniform when the row has
    /// no mass yet. Column order matches [`Pred::column`].
    pub fn row(&self, task: TaskId) -> Vec<f64> {
        let row = &self.values[task];
        let sum: f64 = row.iter().sum();
        if sum < self.cfg.row_floor {
            vec![1.0 / row.len() as f64; row.len()]
        } else {
            row.iter().map(|&v| v / sum).collect()
        }
    }

    /// Fold the outcome of one executed leg into the matrix: `runtime`
    /// steps to solve `task` after doing `pred` (pass `t_max` when the
    /// leg did not succeed), plus the current surprise term for `task`.
    pub fn update(&mut self, task: TaskId, pred: Pred, runtime: usize, t_max: usize, surprise: f64) {
        assert!(runtime <= t_max, "leg runtime exceeds the rollout cap");
        let sample = 1.0 - runtime as f64 / t_max as f64 + self.cfg.surprise_bonus * surprise;
        let entry = &mut self.samples[task][pred.column()];
        if entry.len() == self.cfg.window {
            entry.pop_front();
        }
        entry.push_back(sample);
        self.values[task][pred.column()] = entry.iter().sum::<f64>() / entry.len() as f64;
    }

    /// Greedy predecessor of `task` over the allowed columns (first
    /// maximum wins); `None` requests a uniform fallback because the
    /// restricted row has no mass.
    fn greedy(&self, task: TaskId, allowed: &[Pred]) -> Option<Pred> {
        let mass: f64 = allowed.iter().map(|&p| self.value(task, p)).sum();
        if mass < self.cfg.row_floor {
            return None;
        }
        allowed.iter().copied().max_by(|&a, &b| {
            self.value(task, a)
                .partial_cmp(&self.value(task, b))
                .unwrap()
                .then(std::cmp::Ordering::Greater) // first maximum wins
        })
    }

    /// Plan a chain for `final_task` by walking predecessors backwards
    /// (epsilon-greedy per row, restricted to start plus unvisited tasks)
    /// until the start column is selected.
    pub fn plan(&self, final_task: TaskId, eps: f64, rng: &mut impl Rng) -> TaskChain {
        let k = self.task_count();
        assert!(final_task < k, "task index out of range");
        let mut chain = vec![final_task];
        let mut visited = vec![false; k];
        visited[final_task] = true;
        let mut current = final_task;
        loop {
            let mut allowed = vec![Pred::Start];
            allowed.extend((0..k).filter(|&j| !visited[j]).map(Pred::Task));
            let pick = if eps > 0.0 && rng.gen::<f64>() < eps {
                allowed[rng.gen_range(0..allowed.len())]
            } else {
                match self.greedy(current, &allowed) {
                    Some(p) => p,
                    None => allowed[rng.gen_range(0..allowed.len())],
                }
            };
            match pick {
                Pred::Start => break,
                Pred::Task(j) => {
                    chain.insert(0, j);
                    visited[j] = true;
                    current = j;
                }
            }
        }
        TaskChain(chain)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn failed_leg_contributes_zero_sample() {
        let mut g = TaskGraph::new(2, TaskGraphConfig::default());
        g.update(0, Pred::Start, 400, 400, 0.0);
        assert_eq!(g.value(0, Pred::Start), 0.0);
    }

    #[test]
    fn instant_success_contributes_one() {
        let mut g = TaskGraph::new(2, TaskGraphConfig::default());
        g.update(1, Pred::Task(0), 0, 400, 0.0);
        assert_eq!(g.value(1, Pred::Task(0)), 1.0);
    }

    #[test]
    fn windowed_mean_matches_recompute_from_scratch() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let cfg = TaskGraphConfig { window: 100, ..Default::default() };
        let mut g = TaskGraph::new(1, cfg);
        let mut raw = Vec::new();
        for _ in 0..500 {
            let t = rng.gen_range(0..=400);
            let s = if rng.gen_bool(0.3) { 1.0 } else { 0.0 };
            raw.push(1.0 - t as f64 / 400.0 + 1e-3 * s);
            g.update(0, Pred::Start, t, 400, s);
            let tail = &raw[raw.len().saturating_sub(100)..];
            let want = tail.iter().sum::<f64>() / tail.len() as f64;
            assert!((g.value(0, Pred::Start) - want).abs() < 1e-12);
        }
    }

    #[test]
    fn rows_are_stochastic_after_updates() {
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        let mut g = TaskGraph::new(4, TaskGraphConfig::default());
        for _ in 0..1000 {
            let task = rng.gen_range(0..4);
            let pred = Pred::from_column(rng.gen_range(0..5));
            g.update(task, pred, rng.gen_range(0..=400), 400, 0.0);
            for row in 0..4 {
                let sum: f64 = g.row(row).iter().sum();
                assert!((sum - 1.0).abs() < 1e-9);
                assert!(g.row(row).iter().all(|&v| v >= 0.0));
            }
        }
    }

    #[test]
    fn empty_rows_plan_single_task_chains_under_greedy_mass_on_start() {
        let mut g = TaskGraph::new(3, TaskGraphConfig::default());
        for task in 0..3 {
            g.update(task, Pred::Start, 10, 400, 0.0);
        }
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        for task in 0..3 {
            assert_eq!(g.plan(task, 0.0, &mut rng).0, vec![task]);
        }
    }

    #[test]
    fn ground_truth_graph_plans_the_full_chain() {
        // locomotion <- start, tool <- locomotion, heavy <- tool.
        let g = TaskGraph::oracle(&[Pred::Start, Pred::Task(0), Pred::Task(1)]);
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        assert_eq!(g.plan(2, 0.0, &mut rng).0, vec![0, 1, 2]);
        assert_eq!(g.plan(1, 0.0, &mut rng).0, vec![0, 1]);
        assert_eq!(g.plan(0, 0.0, &mut rng).0, vec![0]);
    }

    #[test]
    fn oracle_rows_are_one_hot() {
        let g = TaskGraph::oracle(&[Pred::Start, Pred::Task(0), Pred::Task(1)]);
        assert_eq!(g.row(0)[Pred::Start.column()], 1.0);
        assert_eq!(g.row(1)[Pred::Task(0).column()], 1.0);
        assert_eq!(g.row(2)[Pred::Task(1).column()], 1.0);
    }

    #[test]
    fn full_epsilon_chain_lengths_match_direct_simulation() {
        let k = 4;
        let g = TaskGraph::new(k, TaskGraphConfig::default());
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let n = 10_000;
        let mut lengths = vec![0usize; k + 1];
        for _ in 0..n {
            lengths[g.plan(0, 1.0, &mut rng).len()] += 1;
        }
        // Independent simulation of the stopping rule: from `r` remaining
        // tasks the chain stops with probability 1/(r+1).
        let mut sim = vec![0usize; k + 1];
        let mut rng2 = ChaCha8Rng::seed_from_u64(77);
        for _ in 0..n {
            let mut remaining = k - 1;
            let mut len = 1;
            loop {
                let stop = rng2.gen_range(0..=remaining) == 0;
                if stop || remaining == 0 {
                    break;
                }
                len += 1;
                remaining -= 1;
            }
            sim[len] += 1;
        }
        for l in 1..=k {
            let f1 = lengths[l] as f64 / n as f64;
            let f2 = sim[l] as f64 / n as f64;
            assert!((f1 - f2).abs() < 0.02, "length {l}: {f1} vs {f2}");
        }
    }

    #[test]
    fn chains_never_revisit_and_stay_short() {
        let mut rng = ChaCha8Rng::seed_from_u64(6);
        let mut g = TaskGraph::new(5, TaskGraphConfig::default());
        for _ in 0..300 {
            let task = rng.gen_range(0..5);
            let pred = Pred::from_column(rng.gen_range(0..6));
            g.update(task, pred, rng.gen_range(0..=400), 400, rng.gen_range(0.0..1.0));
        }
        for _ in 0..2000 {
            let chain = g.plan(rng.gen_range(0..5), 0.3, &mut rng);
            assert!(chain.len() <= 5);
            let mut seen = std::collections::HashSet::new();
            for &t in &chain.0 {
                assert!(seen.insert(t), "task repeated in {:?}", chain.0);
            }
        }
    }

    #[test]
    fn greedy_choice_is_invariant_to_row_scaling() {
        let mut rng = ChaCha8Rng::seed_from_u64(12);
        let mut g = TaskGraph::new(3, TaskGraphConfig::default());
        for _ in 0..200 {
            let task = rng.gen_range(0..3);
            let pred = Pred::from_column(rng.gen_range(0..4));
            g.update(task, pred, rng.gen_range(0..=400), 400, 0.0);
        }
        let allowed = [Pred::Start, Pred::Task(1), Pred::Task(2)];
        let before = g.greedy(0, &allowed);
        let mut scaled = g.clone();
        for v in &mut scaled.values[0] {
            *v *= 37.5;
        }
        assert_eq!(scaled.greedy(0, &allowed), before);
        // Normalized rows agree exactly as well.
        for (a, b) in g.row(0).iter().zip(scaled.row(0).iter()) {
            assert!((a - b).abs() < 1e-12);
        }
    }

    #[test]
    fn synthetic_outcomes_recover_the_tool_predecessor() {
        // tool (task 1) after locomotion (task 0) solves in t_max/4;
        // every other predecessor fails.
        let mut g = TaskGraph::new(3, TaskGraphConfig::default());
        let t_max = 400;
        for round in 0..200 {
            let pred = Pred::from_column(round % 4);
            if pred == Pred::Task(0) {
                g.update(1, pred, t_max / 4, t_max, 0.0);
            } else {
                g.update(1, pred, t_max, t_max, 0.0);
            }
        }
        let allowed = [Pred::Start, Pred::Task(0), Pred::Task(2)];
        assert_eq!(g.greedy(1, &allowed), Some(Pred::Task(0)));
        let row = g.row(1);
        let best = row
            .iter()
            .enumerate()
            .max_by(|a, b| a.1.partial_cmp(b.1).unwrap())
            .unwrap()
            .0;
        assert_eq!(Pred::from_column(best), Pred::Task(0));
    }
}
