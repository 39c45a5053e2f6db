//! Replay storage and hindsight relabeling.

use rand::Rng;

use crate::env::{GoalSpaces, TaskId};

/// One stored transition of a goal-conditioned episode.
#[derive(Debug, Clone, PartialEq)]
pub struct ReplayTransition {
    pub state: Vec<f64>,
    pub action: Vec<f64>,
    pub reward: f64,
    pub next_state: Vec<f64>,
    pub goal: Vec<f64>,
    pub done: bool,
}

/// Uniform-sampling ring buffer.
#[derive(Debug, Clone)]
pub struct ReplayBuffer {
    capacity: usize,
    data: Vec<ReplayTransition>,
    head: usize,
}

impl ReplayBuffer {
    pub fn new(capacity: usize) -> Self {
        assert!(capacity > 0, "replay capacity must be positive");
        ReplayBuffer { capacity, data: Vec::new(), head: 0 }
    }

    pub fn len(&self) -> usize {
        self.data.len()
    }

    pub fn is_empty(&self) -> bool {
        self.data.is_empty()
    }

    pub fn capacity(&self) -> usize {
        self.capacity
    }

    pub fn push(&mut self, tr: ReplayTransition) {
        if self.data.len() < self.capacity {
            self.data.push(tr);
        } else {
            self.data[self.head] = tr;
            self.head = (self.head + 1) % self.capacity;
        }
    }

    pub fn get(&self, i: usize) -> &ReplayTransition {
        &self.data[i]
    }

    pub fn sample_index(&self, rng: &mut impl Rng) -> usize {
        rng.gen_range(0..self.data.len())
    }
}

/// Hindsight relabeling with the "future" strategy: for every transition
/// add up to `k` copies whose goal is the achieved goal-space state of a
/// later step in the same episode, with the reward recomputed. The
/// `(state, action, next_state)` triple and the done flag are untouched.
pub fn her_relabel(
    spaces: &GoalSpaces,
    task: TaskId,
    episode: &[ReplayTransition],
    k: usize,
    rng: &mut impl Rng,
) -> Vec<ReplayTransition> {
    let mut out = Vec::with_capacity(episode.len() * k);
    for (t, tr) in episode.iter().enumerate() {
        for _ in 0..k {
            // A future step of the same episode, including this one (its
            // own achieved next state is the nearest future).
            let future = rng.gen_range(t..episode.len());
            let achieved = spaces.restrict(&episode[future].next_state, task);
            let reward = crate::control::task_reward(spaces, &tr.next_state, task, &achieved);
            out.push(ReplayTransition {
                state: tr.state.clone(),
                action: tr.action.clone(),
                reward,
                next_state: tr.next_state.clone(),
                goal: achieved,
                done: tr.done,
            });
        }
    }
    out
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

    fn fake_episode(n: usize, rng: &mut impl Rng) -> Vec<ReplayTransition> {
        let sp = spaces();
        (0..n)
            .map(|_| ReplayTransition {
                state: (0..sp.state_dim()).map(|_| rng.gen_range(-5.0..5.0)).collect(),
                action: vec![rng.gen_range(-1.0..1.0); 2],
                reward: rng.gen_range(-10.0..0.0),
                next_state: (0..sp.state_dim()).map(|_| rng.gen_range(-5.0..5.0)).collect(),
                goal: vec![rng.gen_range(-5.0..5.0); 2],
                done: false,
            })
            .collect()
    }

    #[test]
    fn ring_buffer_respects_capacity_and_overwrites_oldest() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let mut buf = ReplayBuffer::new(10);
        let eps = fake_episode(25, &mut rng);
        for tr in &eps {
            buf.push(tr.clone());
        }
        assert_eq!(buf.len(), 10);
        // Entries 15..25 survive (in ring order).
        let surviving: Vec<&ReplayTransition> = (0..10).map(|i| buf.get(i)).collect();
        for tr in surviving {
            assert!(eps[15..].contains(tr));
        }
    }

    #[test]
    fn relabeling_preserves_the_transition_triple() {
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        let sp = spaces();
        let eps = fake_episode(30, &mut rng);
        let relabeled = her_relabel(&sp, 0, &eps, 4, &mut rng);
        assert_eq!(relabeled.len(), 30 * 4);
        for (i, tr) in relabeled.iter().enumerate() {
            let orig = &eps[i / 4];
            assert_eq!(tr.state, orig.state);
            assert_eq!(tr.action, orig.action);
            assert_eq!(tr.next_state, orig.next_state);
            assert_eq!(tr.done, orig.done);
        }
    }

    #[test]
    fn zero_k_adds_nothing() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let sp = spaces();
        let eps = fake_episode(5, &mut rng);
        assert!(her_relabel(&sp, 0, &eps, 0, &mut rng).is_empty());
    }

    #[test]
    fn relabeled_rewards_are_consistent_with_the_new_goal() {
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        let sp = spaces();
        let eps = fake_episode(20, &mut rng);
        for tr in her_relabel(&sp, 0, &eps, 4, &mut rng) {
            let want = -sp.sq_distance(&tr.next_state, 0, &tr.goal);
            assert!((tr.reward - want).abs() < 1e-12);
        }
    }

    #[test]
    fn relabeling_with_own_next_state_gives_zero_reward() {
        // When the future step drawn is the transition itself, the goal
        // is its achieved next state and the recomputed reward is 0
        // (inside any success band).
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let sp = spaces();
        let eps = fake_episode(1, &mut rng);
        let relabeled = her_relabel(&sp, 0, &eps, 4, &mut rng);
        for tr in relabeled {
            assert_eq!(tr.reward, 0.0);
            assert_eq!(tr.goal, sp.restrict(&tr.next_state, 0));
        }
    }
}
