use rand::Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

/// Zero-mean Gaussian exploration whose standard deviation decays linearly
/// from `start` to `end` over the first `decay_fraction` of training.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GaussianNoise {
    pub start: f64,
    pub end: f64,
    pub decay_fraction: f64,
}

impl Default for GaussianNoise {
    fn default() -> Self {
        Self {
            start: 0.3,
            end: 0.05,
            decay_fraction: 0.5,
        }
    }
}

impl GaussianNoise {
    pub fn sigma(&self, step: u64, total_steps: u64) -> f64 {
        let horizon = self.decay_fraction * total_steps as f64;
        if horizon <= 0.0 {
            return self.end;
        }
        let progress = (step as f64 / horizon).min(1.0);
        self.start * (1.0 - progress) + self.end * progress
    }

    /// Adds noise to `action` in place and clips to `[-1, 1]`.
    pub fn perturb<R: Rng + ?Sized>(&self, action: &mut [f64], step: u64, total_steps: u64, rng: &mut R) {
        let sigma = self.sigma(step, total_steps);
        for a in action.iter_mut() {
            let n: f64 = rng.sample(StandardNormal);
            *a = (*a + sigma * n).clamp(-1.0, 1.0);
        }
    }
}
