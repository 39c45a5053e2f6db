//! An intrinsically motivated agent that learns to control a 2D
//! manipulation arena from scratch.
//!
//! The agent combines five learned components around a synthetic
//! playground environment:
//!
//! - [`world_model`]: a forward dynamics model whose per-task prediction
//!   errors drive binary *surprise* events,
//! - [`curriculum`]: success-rate bookkeeping and a multi-armed bandit
//!   that allocates rollouts to tasks by learning progress,
//! - [`task_graph`]: a learned predecessor-value matrix from which
//!   sub-task chains are planned backwards,
//! - [`goal_proposal`]: per-transition relational attention networks
//!   whose constrained analytic argmax proposes sub-goals,
//! - [`control`]: goal-conditioned low-level policies (a scripted PD
//!   controller and a learned soft actor-critic).
//!
//! The [`orchestrator`] wires everything into epochs of parallel rollouts
//! followed by a synchronized training phase, and writes metrics suitable
//! for plotting curriculum, task-graph, and relation-learning behavior.
//!
//! See the crate `examples/` for one runnable program per capability and
//! the `curio` binary for full experiment runs.

pub mod config;
pub mod control;
pub mod curriculum;
pub mod env;
pub mod error;
pub mod goal_proposal;
pub mod numerics;
pub mod orchestrator;
pub mod rng;
pub mod task_graph;
pub mod world_model;

pub use error::{Error, Result};
