//! Deterministic 2D manipulation arena.
//!
//! A force-controlled point mass moves inside a square walled arena among
//! objects with different dynamics: static obstacles, an autonomously
//! drifting object the agent cannot influence, a "fifty" object that is
//! movable in half of the rollouts, a tool, and a heavy object that can
//! only be moved while the tool is possessed.
//!
//! The observation vector for `d` objects is laid out as
//! `(x, y, o1_x, o1_y, .., od_x, od_y, vx, vy, p1, .., pd)`: agent
//! position, object positions, agent velocity, and possession flags in
//! {0, 1}. Goal spaces are the agent's coordinates (locomotion) and each
//! object's coordinates.
//!
//! Transport is "slaved": once an object is picked up (agent within the
//! pickup radius), its position tracks the agent at the contact offset
//! for the rest of the rollout; there is no release action.

use rand::Rng;
use rand_chacha::rand_core::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

/// Flat observation vector; see the module docs for the layout.
pub type State = Vec<f64>;

/// Object dynamics classes.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ObjectKind {
    /// Never moves.
    Static,
    /// Random walk with reflective walls; ignores the agent.
    Random,
    /// Behaves like the tool in half of the rollouts (per-rollout coin),
    /// like a static object otherwise.
    HalfLight,
    /// Can always be picked up and carried.
    Tool,
    /// Can be picked up only while a tool is possessed.
    Heavy,
}

impl ObjectKind {
    pub fn task_name(self) -> &'static str {
        match self {
            ObjectKind::Static => "static",
            ObjectKind::Random => "random",
            ObjectKind::HalfLight => "fifty",
            ObjectKind::Tool => "tool",
            ObjectKind::Heavy => "heavy",
        }
    }
}

/// Arena geometry, physics constants, and the object roster.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ArenaConfig {
    /// Arena spans `[-half_size, half_size]` on both axes.
    pub half_size: f64,
    /// Integration time step.
    pub dt: f64,
    /// Viscous drag coefficient; velocity decays by `friction * dt` per step.
    pub friction: f64,
    pub agent_mass: f64,
    /// Per-component force clip.
    pub max_force: f64,
    /// Contact distance for picking up tool/fifty/heavy objects.
    pub pickup_radius: f64,
    /// Success threshold: a goal counts as reached when the squared
    /// distance in the task's goal space is at most this value.
    pub success_delta: f64,
    /// Rollout step cap.
    pub t_max: usize,
    /// Per-step random-walk displacement scale for `Random` objects.
    pub random_walk_sigma: f64,
    pub objects: Vec<ObjectKind>,
}

impl ArenaConfig {
    pub fn validate(&self) -> crate::Result<()> {
        let bad = |m: String| Err(crate::Error::Config(m));
        if !(self.half_size > 0.0) {
            return bad(format!("arena half_size must be positive, got {}", self.half_size));
        }
        if !(self.pickup_radius > 0.0) {
            return bad(format!("pickup_radius must be positive, got {}", self.pickup_radius));
        }
        if !(self.dt > 0.0) {
            return bad(format!("dt must be positive, got {}", self.dt));
        }
        if !(self.agent_mass > 0.0) {
            return bad(format!("agent_mass must be positive, got {}", self.agent_mass));
        }
        if self.friction * self.dt >= 1.0 {
            return bad(format!(
                "friction * dt must stay below 1 for a stable integrator, got {}",
                self.friction * self.dt
            ));
        }
        if !(self.success_delta > 0.0) {
            return bad(format!("success_delta must be positive, got {}", self.success_delta));
        }
        Ok(())
    }

    pub fn layout(&self) -> Layout {
        Layout::new(self.objects.len())
    }

    /// Goal spaces: locomotion plus one task per object, named after its
    /// kind (with a numeric suffix on repeats).
    pub fn goal_spaces(&self) -> GoalSpaces {
        let layout = self.layout();
        let mut names = vec!["locomotion".to_string()];
        let mut seen: std::collections::HashMap<&str, usize> = Default::default();
        for kind in &self.objects {
            let base = kind.task_name();
            let n = seen.entry(base).or_insert(0);
            *n += 1;
            names.push(if *n == 1 {
                base.to_string()
            } else {
                format!("{base}{n}")
            });
        }
        let mut indices = vec![layout.agent_pos().to_vec()];
        for i in 0..self.objects.len() {
            indices.push(layout.object_pos(i).to_vec());
        }
        GoalSpaces { names, indices, state_dim: layout.dim() }
    }
}

/// Index bookkeeping for the flat observation vector.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Layout {
    object_count: usize,
}

impl Layout {
    pub fn new(object_count: usize) -> Self {
        Layout { object_count }
    }

    pub fn object_count(&self) -> usize {
        self.object_count
    }

    pub fn dim(&self) -> usize {
        2 + 2 * self.object_count + 2 + self.object_count
    }

    pub fn agent_pos(&self) -> [usize; 2] {
        [0, 1]
    }

    pub fn object_pos(&self, i: usize) -> [usize; 2] {
        assert!(i < self.object_count, "object index out of range");
        [2 + 2 * i, 3 + 2 * i]
    }

    pub fn velocity(&self) -> [usize; 2] {
        [2 + 2 * self.object_count, 3 + 2 * self.object_count]
    }

    pub fn flag(&self, i: usize) -> usize {
        assert!(i < self.object_count, "object index out of range");
        4 + 2 * self.object_count + i
    }
}

/// Task index; 0 is locomotion, `1 + i` is the task for object `i`.
pub type TaskId = usize;

/// Disjoint coordinate groups of the state vector, one per task.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct GoalSpaces {
    names: Vec<String>,
    indices: Vec<Vec<usize>>,
    state_dim: usize,
}

impl GoalSpaces {
    /// Hand-built goal spaces (toy problems, tests). Groups must be
    /// disjoint and in range.
    pub fn manual(names: Vec<String>, indices: Vec<Vec<usize>>, state_dim: usize) -> Self {
        assert_eq!(names.len(), indices.len(), "one name per group");
        let spaces = GoalSpaces { names, indices, state_dim };
        assert!(spaces.groups_are_disjoint(), "goal spaces must be disjoint");
        spaces
    }

    pub fn task_count(&self) -> usize {
        self.names.len()
    }

    pub fn state_dim(&self) -> usize {
        self.state_dim
    }

    pub fn name(&self, task: TaskId) -> &str {
        &self.names[task]
    }

    pub fn task_by_name(&self, name: &str) -> Option<TaskId> {
        self.names.iter().position(|n| n == name)
    }

    pub fn indices(&self, task: TaskId) -> &[usize] {
        &self.indices[task]
    }

    pub fn goal_dim(&self, task: TaskId) -> usize {
        self.indices[task].len()
    }

    /// The goal-space coordinates of `state` for `task`.
    pub fn restrict(&self, state: &[f64], task: TaskId) -> Vec<f64> {
        self.indices[task].iter().map(|&i| state[i]).collect()
    }

    /// Squared distance between a state's goal-space slice and a goal.
    pub fn sq_distance(&self, state: &[f64], task: TaskId, goal: &[f64]) -> f64 {
        let idx = &self.indices[task];
        assert_eq!(goal.len(), idx.len(), "goal dimension mismatch");
        idx.iter()
            .zip(goal.iter())
            .map(|(&i, g)| (state[i] - g).powi(2))
            .sum()
    }

    /// True when every group is disjoint from every other and in range.
    pub fn groups_are_disjoint(&self) -> bool {
        let mut seen = vec![false; self.state_dim];
        for group in &self.indices {
            for &i in group {
                if i >= self.state_dim || seen[i] {
                    return false;
                }
                seen[i] = true;
            }
        }
        true
    }
}

/// A live arena instance: one per rollout worker.
#[derive(Debug, Clone)]
pub struct Arena {
    cfg: ArenaConfig,
    layout: Layout,
    state: State,
    /// Directly pickable this rollout (tool: always; fifty: coin flip).
    movable: Vec<bool>,
    /// Contact offset (object - agent) captured at pickup.
    carry_offset: Vec<[f64; 2]>,
    rng: ChaCha8Rng,
}

impl Arena {
    pub fn new(cfg: ArenaConfig) -> Self {
        let layout = cfg.layout();
        let d = layout.object_count();
        Arena {
            state: vec![0.0; layout.dim()],
            movable: vec![false; d],
            carry_offset: vec![[0.0, 0.0]; d],
            layout,
            cfg,
            rng: ChaCha8Rng::seed_from_u64(0),
        }
    }

    pub fn config(&self) -> &ArenaConfig {
        &self.cfg
    }

    pub fn layout(&self) -> Layout {
        self.layout
    }

    pub fn state(&self) -> &[f64] {
        &self.state
    }

    /// Whether the fifty object `i` responds to the agent this rollout.
    pub fn object_movable(&self, i: usize) -> bool {
        self.movable[i]
    }

    /// Scramble the arena: uniform agent/object placement, zero velocity
    /// and flags, fresh per-rollout coin for every fifty object.
    pub fn reset(&mut self, seed: u64) -> &[f64] {
        self.rng = ChaCha8Rng::seed_from_u64(seed);
        let h = self.cfg.half_size;
        self.state.fill(0.0);
        let [ax, ay] = self.layout.agent_pos();
        self.state[ax] = self.rng.gen_range(-h..h);
        self.state[ay] = self.rng.gen_range(-h..h);
        for i in 0..self.layout.object_count() {
            let [ox, oy] = self.layout.object_pos(i);
            self.state[ox] = self.rng.gen_range(-h..h);
            self.state[oy] = self.rng.gen_range(-h..h);
            self.movable[i] = match self.cfg.objects[i] {
                ObjectKind::Tool => true,
                ObjectKind::HalfLight => self.rng.gen_bool(0.5),
                _ => false,
            };
            self.carry_offset[i] = [0.0, 0.0];
        }
        &self.state
    }

    fn tool_possessed(&self) -> bool {
        (0..self.layout.object_count())
            .any(|i| self.cfg.objects[i] == ObjectKind::Tool && self.state[self.layout.flag(i)] > 0.5)
    }

    fn agent_object_distance(&self, i: usize) -> f64 {
        let [ax, ay] = self.layout.agent_pos();
        let [ox, oy] = self.layout.object_pos(i);
        ((self.state[ax] - self.state[ox]).powi(2) + (self.state[ay] - self.state[oy]).powi(2))
            .sqrt()
    }

    /// Advance one step under force `(fx, fy)`.
    ///
    /// Semi-implicit Euler with viscous drag; walls clamp position and
    /// zero the normal velocity component. Panics on non-finite actions.
    pub fn step(&mut self, action: [f64; 2]) -> &[f64] {
        assert!(
            action.iter().all(|a| a.is_finite()),
            "actions must be finite, got {action:?}"
        );
        let cfg = &self.cfg;
        let h = cfg.half_size;
        let decay = 1.0 - cfg.friction * cfg.dt;
        let [ax, ay] = self.layout.agent_pos();
        let [vx, vy] = self.layout.velocity();

        for (pi, vi, f) in [(ax, vx, action[0]), (ay, vy, action[1])] {
            let f = f.clamp(-cfg.max_force, cfg.max_force);
            let mut v = decay * self.state[vi] + f / cfg.agent_mass * cfg.dt;
            let mut p = self.state[pi] + v * cfg.dt;
            if p < -h {
                p = -h;
                v = 0.0;
            } else if p > h {
                p = h;
                v = 0.0;
            }
            self.state[pi] = p;
            self.state[vi] = v;
        }

        // Carried objects track the agent at their contact offset.
        for i in 0..self.layout.object_count() {
            if self.state[self.layout.flag(i)] > 0.5 {
                let [ox, oy] = self.layout.object_pos(i);
                self.state[ox] = (self.state[ax] + self.carry_offset[i][0]).clamp(-h, h);
                self.state[oy] = (self.state[ay] + self.carry_offset[i][1]).clamp(-h, h);
            }
        }

        // New contacts become pickups; the flag flips exactly when the
        // post-move distance is within the pickup radius.
        for i in 0..self.layout.object_count() {
            let fi = self.layout.flag(i);
            if self.state[fi] > 0.5 {
                continue;
            }
            let grabbable = match self.cfg.objects[i] {
                ObjectKind::Tool | ObjectKind::HalfLight => self.movable[i],
                ObjectKind::Heavy => self.tool_possessed(),
                ObjectKind::Static | ObjectKind::Random => false,
            };
            if grabbable && self.agent_object_distance(i) <= self.cfg.pickup_radius {
                self.state[fi] = 1.0;
                let [ox, oy] = self.layout.object_pos(i);
                self.carry_offset[i] = [self.state[ox] - self.state[ax], self.state[oy] - self.state[ay]];
            }
        }

        // Autonomous drift of random objects, reflecting at the walls.
        for i in 0..self.layout.object_count() {
            if self.cfg.objects[i] == ObjectKind::Random {
                let [ox, oy] = self.layout.object_pos(i);
                for oi in [ox, oy] {
                    let mut p =
                        self.state[oi] + self.cfg.random_walk_sigma * standard_normal(&mut self.rng);
                    while p < -h || p > h {
                        p = if p < -h { -2.0 * h - p } else { 2.0 * h - p };
                    }
                    self.state[oi] = p;
                }
            }
        }

        &self.state
    }

    /// A uniformly random goal for `task` inside the arena.
    pub fn sample_goal(&mut self, task: TaskId) -> Vec<f64> {
        let spaces = self.cfg.goal_spaces();
        assert!(task < spaces.task_count(), "task index out of range");
        uniform_goal(self.cfg.half_size, spaces.goal_dim(task), &mut self.rng)
    }
}

/// Uniform point in `[-half, half]^dim`.
pub fn uniform_goal(half: f64, dim: usize, rng: &mut impl Rng) -> Vec<f64> {
    (0..dim).map(|_| rng.gen_range(-half..half)).collect()
}

/// Standard normal via Box-Muller.
pub fn standard_normal(rng: &mut impl Rng) -> f64 {
    let u1: f64 = rng.gen_range(f64::MIN_POSITIVE..1.0);
    let u2: f64 = rng.gen_range(0.0..1.0);
    (-2.0 * u1.ln()).sqrt() * (2.0 * std::f64::consts::PI * u2).cos()
}
