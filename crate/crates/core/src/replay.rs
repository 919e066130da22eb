//! Uniform replay buffer with FIFO eviction.

use rand::Rng;
use rand_chacha::ChaCha8Rng;

/// One stored interaction. `rewards` carries one entry per task for the
/// differential algorithms and a single entry for the scalar-reward baseline;
/// the layout is fixed when the buffer is created.
#[derive(Debug, Clone, PartialEq)]
pub struct Transition {
    pub state: Vec<f64>,
    pub action: Vec<f64>,
    pub rewards: Vec<f64>,
    pub next_state: Vec<f64>,
    pub task_done: Vec<bool>,
    pub episode_done: bool,
}

/// Dimensions every stored transition must match.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct BufferSpec {
    pub state_dim: usize,
    pub action_dim: usize,
    pub n_rewards: usize,
    pub n_tasks: usize,
}

/// Ring buffer over [`Transition`]s with uniform sampling (with
/// replacement). Once full, the oldest entry is evicted first.
#[derive(Debug)]
pub struct ReplayBuffer {
    spec: BufferSpec,
    capacity: usize,
    storage: Vec<Transition>,
    cursor: usize,
    rng: ChaCha8Rng,
}

impl ReplayBuffer {
    pub fn new(capacity: usize, spec: BufferSpec, rng: ChaCha8Rng) -> Self {
        assert!(capacity > 0, "buffer capacity must be > 0");
        Self {
            spec,
            capacity,
            storage: Vec::new(),
            cursor: 0,
            rng,
        }
    }

    pub fn len(&self) -> usize {
        self.storage.len()
    }

    pub fn is_empty(&self) -> bool {
        self.storage.is_empty()
    }

    pub fn capacity(&self) -> usize {
        self.capacity
    }

    pub fn spec(&self) -> BufferSpec {
        self.spec
    }

    pub fn push(&mut self, t: Transition) {
        assert_eq!(t.state.len(), self.spec.state_dim, "state dim mismatch");
        assert_eq!(t.action.len(), self.spec.action_dim, "action dim mismatch");
        assert_eq!(t.rewards.len(), self.spec.n_rewards, "reward layout mismatch");
        assert_eq!(t.next_state.len(), self.spec.state_dim, "next state dim mismatch");
        assert_eq!(t.task_done.len(), self.spec.n_tasks, "done flags mismatch");
        if self.storage.len() < self.capacity {
            self.storage.push(t);
        } else {
            self.storage[self.cursor] = t;
            self.cursor = (self.cursor + 1) % self.capacity;
        }
    }

    /// Uniform minibatch over stored entries, with replacement.
    pub fn sample(&mut self, batch_size: usize) -> Vec<Transition> {
        assert!(!self.storage.is_empty(), "cannot sample from an empty buffer");
        (0..batch_size)
            .map(|_| self.storage[self.rng.gen_range(0..self.storage.len())].clone())
            .collect()
    }

    /// Stored entries in insertion-age order (oldest first), for tests.
    pub fn iter_oldest_first(&self) -> impl Iterator<Item = &Transition> {
        let (newer, older) = self.storage.split_at(self.cursor);
        older.iter().chain(newer.iter())
    }
}
