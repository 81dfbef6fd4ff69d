use rand::seq::index::sample;
use rand::Rng;
use thiserror::Error;

use super::FollowPoint;

#[derive(Debug, Clone, PartialEq)]
pub struct Transition {
    /// Normalized network features of the observation.
    pub obs: Vec<f64>,
    pub action: FollowPoint,
    /// Sum of the low-level rewards collected during the macro-step.
    pub reward: f64,
    pub next_obs: Vec<f64>,
    pub done: bool,
}

#[derive(Debug, Error, Clone, PartialEq)]
pub enum ReplayError {
    #[error("cannot sample {requested} transitions from a buffer holding {stored}")]
    NotEnough { requested: usize, stored: usize },
}

/// Fixed-capacity ring buffer of transitions.
#[derive(Debug, Clone)]
pub struct ReplayBuffer {
    capacity: usize,
    items: Vec<Transition>,
    next: usize,
}

impl ReplayBuffer {
    pub fn new(capacity: usize) -> Self {
        assert!(capacity > 0, "replay capacity must be positive");
        Self { capacity, items: Vec::with_capacity(capacity.min(1 << 16)), next: 0 }
    }

    pub fn len(&self) -> usize {
        self.items.len()
    }

    pub fn is_empty(&self) -> bool {
        self.items.is_empty()
    }

    pub fn capacity(&self) -> usize {
        self.capacity
    }

    pub fn push(&mut self, t: Transition) {
        if self.items.len() < self.capacity {
            self.items.push(t);
        } else {
            self.items[self.next] = t;
        }
        self.next = (self.next + 1) % self.capacity;
    }

    /// Stored transitions, oldest first.
    pub fn iter_oldest_first(&self) -> impl Iterator<Item = &Transition> {
        let split = if self.items.len() < self.capacity { 0 } else { self.next };
        self.items[split..].iter().chain(&self.items[..split])
    }

    /// Uniform sample without replacement.
    pub fn sample<R: Rng>(&self, batch_size: usize, rng: &mut R) -> Result<Vec<&Transition>, ReplayError> {
        if batch_size > self.items.len() {
            return Err(ReplayError::NotEnough { requested: batch_size, stored: self.items.len() });
        }
        Ok(sample(rng, self.items.len(), batch_size).into_iter().map(|i| &self.items[i]).collect())
    }
}
