use rand::Rng;
use serde::{Deserialize, Serialize};

/// One experience tuple.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Transition {
    pub obs: Vec<f64>,
    /// components in [-1, 1]
    pub action: Vec<f64>,
    pub reward: f64,
    pub next_obs: Vec<f64>,
    /// Safety termination only; time-limit truncation keeps bootstrapping.
    pub done: bool,
}

/// Fixed-capacity ring of transitions with uniform sampling.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ReplayBuffer {
    capacity: usize,
    items: Vec<Transition>,
    next: usize,
}

impl ReplayBuffer {
    pub fn new(capacity: usize) -> Self {
        assert!(capacity > 0, "replay capacity must be > 0");
        ReplayBuffer {
            capacity,
            items: Vec::new(),
            next: 0,
        }
    }

    pub fn capacity(&self) -> usize {
        self.capacity
    }

    pub fn len(&self) -> usize {
        self.items.len()
    }

    pub fn is_empty(&self) -> bool {
        self.items.is_empty()
    }

    pub fn push(&mut self, t: Transition) {
        debug_assert!(t.action.iter().all(|a| (-1.0..=1.0).contains(a)));
        if self.items.len() < self.capacity {
            self.items.push(t);
        } else {
            self.items[self.next] = t;
        }
        self.next = (self.next + 1) % self.capacity;
    }

    pub fn iter(&self) -> impl Iterator<Item = &Transition> {
        self.items.iter()
    }

    /// Draws `n` transitions uniformly with replacement. Returns `None` while
    /// the buffer holds fewer than `n` items.
    pub fn sample<R: Rng + ?Sized>(&self, n: usize, rng: &mut R) -> Option<Vec<&Transition>> {
        if self.items.len() < n || n == 0 {
            return None;
        }
        Some((0..n).map(|_| &self.items[rng.random_range(0..self.items.len())]).collect())
    }
}
