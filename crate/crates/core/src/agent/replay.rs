use rand::seq::index;
use rand::Rng;

use crate::error::{Error, Result};

/// One interaction record.
#[derive(Debug, Clone, PartialEq)]
pub struct Transition {
    pub state: Vec<f64>,
    pub action: Vec<f64>,
    pub reward: f64,
    pub next_state: Vec<f64>,
    pub done: bool,
}

/// Fixed-capacity FIFO ring buffer with uniform sampling.
#[derive(Debug, Clone, PartialEq)]
pub struct ReplayBuffer {
    items: Vec<Transition>,
    capacity: usize,
    cursor: usize,
}

impl ReplayBuffer {
    pub fn new(capacity: usize) -> Result<Self> {
        if capacity == 0 {
            return Err(Error::domain("replay capacity must be positive"));
        }
        Ok(Self {
            items: Vec::new(),
            capacity,
            cursor: 0,
        })
    }

    pub(crate) fn from_parts(items: Vec<Transition>, capacity: usize, cursor: usize) -> Result<Self> {
        if items.len() > capacity || cursor >= capacity.max(1) {
            return Err(Error::Checkpoint("inconsistent replay buffer".into()));
        }
        Ok(Self {
            items,
            capacity,
            cursor,
        })
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

    pub fn cursor(&self) -> usize {
        self.cursor
    }

    /// Stored transitions in slot order (not insertion order once wrapped).
    pub fn items(&self) -> &[Transition] {
        &self.items
    }

    /// Inserts a transition, evicting the oldest once full.
    pub fn push(&mut self, t: Transition) {
        if self.items.len() < self.capacity {
            self.items.push(t);
        } else {
            self.items[self.cursor] = t;
        }
        self.cursor = (self.cursor + 1) % self.capacity;
    }

    /// `batch` distinct indices drawn uniformly.
    pub fn sample_indices<R: Rng + ?Sized>(&self, batch: usize, rng: &mut R) -> Result<Vec<usize>> {
        if batch == 0 || batch > self.items.len() {
            return Err(Error::domain(format!(
                "cannot sample {batch} transitions from a buffer of {}",
                self.items.len()
            )));
        }
        Ok(index::sample(rng, self.items.len(), batch).into_vec())
    }

    pub fn sample<R: Rng + ?Sized>(&self, batch: usize, rng: &mut R) -> Result<Vec<&Transition>> {
        Ok(self
            .sample_indices(batch, rng)?
            .into_iter()
            .map(|i| &self.items[i])
            .collect())
    }
}
