//! Scripted PD controller.
//!
//! A go-fetch baseline for positional tasks: while the task's object is
//! not possessed the controller drives the agent at the object; once the
//! object is possessed (or the task is locomotion) it drives so that the
//! task's goal-space coordinates land on the goal, compensating the
//! carry offset. Serves as the oracle low-level policy and as a test
//! harness for the high-level components.

use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::env::{GoalSpaces, Layout, TaskId};

use super::{Policy, PolicyDiagnostics, ReplayTransition};

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct PdConfig {
    pub kp: f64,
    pub kd: f64,
    pub max_force: f64,
}

impl Default for PdConfig {
    fn default() -> Self {
        PdConfig { kp: 9.0, kd: 5.0, max_force: 5.0 }
    }
}

#[derive(Debug, Clone)]
pub struct PdController {
    cfg: PdConfig,
    layout: Layout,
    task: TaskId,
}

impl PdController {
    pub fn new(task: TaskId, layout: Layout, cfg: PdConfig) -> Self {
        PdController { cfg, layout, task }
    }

    fn force_towards(&self, state: &[f64], target: [f64; 2]) -> Vec<f64> {
        let [ax, ay] = self.layout.agent_pos();
        let [vx, vy] = self.layout.velocity();
        let f = self.cfg.max_force;
        vec![
            (self.cfg.kp * (target[0] - state[ax]) - self.cfg.kd * state[vx]).clamp(-f, f),
            (self.cfg.kp * (target[1] - state[ay]) - self.cfg.kd * state[vy]).clamp(-f, f),
        ]
    }
}

impl Policy for PdController {
    fn act(&self, state: &[f64], goal: &[f64], _explore: bool, _rng: &mut ChaCha8Rng) -> Vec<f64> {
        assert_eq!(goal.len(), 2, "PD control handles positional goals");
        let [ax, ay] = self.layout.agent_pos();
        let target = if self.task == 0 {
            [goal[0], goal[1]]
        } else {
            let obj = self.task - 1;
            let [ox, oy] = self.layout.object_pos(obj);
            if state[self.layout.flag(obj)] > 0.5 {
                // Carrying: place the agent so the object lands on the
                // goal (agent + (goal - object)).
                [
                    state[ax] + goal[0] - state[ox],
                    state[ay] + goal[1] - state[oy],
                ]
            } else {
                // Go fetch.
                [state[ox], state[oy]]
            }
        };
        self.force_towards(state, target)
    }

    fn observe_episode(&mut self, _episode: &[ReplayTransition]) {}

    fn train(&mut self, _rng: &mut ChaCha8Rng) -> Option<PolicyDiagnostics> {
        None
    }
}

/// PD controllers for every task of a goal-space set.
pub fn pd_bank(spaces: &GoalSpaces, layout: Layout, cfg: PdConfig) -> Vec<Box<dyn Policy>> {
    (0..spaces.task_count())
        .map(|task| Box::new(PdController::new(task, layout, cfg.clone())) as Box<dyn Policy>)
        .collect()
}
