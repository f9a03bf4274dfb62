//! Transitions and the ring-buffer replay store.

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Transition {
    pub s: Vec<f64>,
    /// Policy-space action in `(-1, 1)^d`, before rescaling to env bounds.
    pub a: Vec<f64>,
    pub r: f64,
    pub s_next: Vec<f64>,
    /// Environment-true termination; horizon truncation is `false`.
    pub done: bool,
}

/// Fixed-capacity FIFO store with uniform sampling.
#[derive(Debug, Clone)]
pub struct ReplayBuffer {
    capacity: usize,
    items: Vec<Transition>,
    cursor: usize,
}

impl ReplayBuffer {
    pub fn new(capacity: usize) -> Result<Self> {
        if capacity == 0 {
            return Err(Error::Config("replay buffer capacity must be positive".into()));
        }
        Ok(Self {
            capacity,
            items: Vec::with_capacity(capacity.min(1 << 16)),
            cursor: 0,
        })
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

    pub fn push(&mut self, transition: Transition) {
        if self.items.len() < self.capacity {
            self.items.push(transition);
        } else {
            self.items[self.cursor] = transition;
        }
        self.cursor = (self.cursor + 1) % self.capacity;
    }

    /// Appends a whole trajectory as one contiguous block.
    pub fn extend<I: IntoIterator<Item = Transition>>(&mut self, trajectory: I) {
        for t in trajectory {
            self.push(t);
        }
    }

    /// Stored items from oldest to newest.
    pub fn iter(&self) -> impl Iterator<Item = &Transition> {
        let split = if self.items.len() < self.capacity {
            0
        } else {
            self.cursor
        };
        self.items[split..].iter().chain(&self.items[..split])
    }

    /// Uniform sampling with replacement.
    pub fn sample<R: Rng + ?Sized>(&self, batch_size: usize, rng: &mut R) -> Result<Vec<&Transition>> {
        if batch_size == 0 || self.items.len() < batch_size {
            return Err(Error::BufferNotReady {
                size: self.items.len(),
                requested: batch_size,
            });
        }
        Ok((0..batch_size)
            .map(|_| &self.items[rng.gen_range(0..self.items.len())])
            .collect())
    }
}
