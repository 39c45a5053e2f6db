//! Goal-conditioned low-level control.
//!
//! Every task owns its own policy behind a common [`Policy`] interface;
//! the orchestrator never cares whether it talks to the scripted PD
//! controller or the learned actor-critic. Policies are parametrized by
//! the goal: the observation fed to a learned policy is the full state
//! concatenated with the active goal.

mod pd;
mod replay;
mod sac;

pub use pd::{PdConfig, PdController};
pub use replay::{her_relabel, ReplayBuffer, ReplayTransition};
pub use sac::{SacCheckpoint, SacConfig, SacPolicy};

use rand_chacha::ChaCha8Rng;

use crate::env::{GoalSpaces, TaskId};

/// Dense task reward: negative squared distance between the goal-space
/// slice of the state and the goal. Zero exactly at the goal.
pub fn task_reward(spaces: &GoalSpaces, state: &[f64], task: TaskId, goal: &[f64]) -> f64 {
    -spaces.sq_distance(state, task, goal)
}

/// Training diagnostics reported by a policy's train call.
#[derive(Debug, Clone, Copy, Default)]
pub struct PolicyDiagnostics {
    pub critic_loss: f64,
    pub actor_loss: f64,
}

/// Goal-conditioned policy interface shared by scripted and learned
/// controllers.
pub trait Policy: Send {
    /// Choose an action. Deterministic when `explore` is off.
    fn act(&self, state: &[f64], goal: &[f64], explore: bool, rng: &mut ChaCha8Rng) -> Vec<f64>;

    /// Feed one completed leg (episode slice) of experience.
    fn observe_episode(&mut self, episode: &[ReplayTransition]);

    /// Run gradient updates; scripted controllers return `None`.
    fn train(&mut self, rng: &mut ChaCha8Rng) -> Option<PolicyDiagnostics>;
}
