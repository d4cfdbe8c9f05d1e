use serde::{Deserialize, Serialize};

use super::mlp::{Grads, Mlp};

/// Adam optimiser state for one network.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Adam {
    pub lr: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub eps: f64,
    pub steps: u64,
    pub first: Vec<f64>,
    pub second: Vec<f64>,
}

impl Adam {
    pub fn new(net: &Mlp, lr: f64) -> Self {
        let n = net.param_count();
        Self {
            lr,
            beta1: 0.9,
            beta2: 0.999,
            eps: 1e-8,
            steps: 0,
            first: vec![0.0; n],
            second: vec![0.0; n],
        }
    }

    /// One descent step along `grads`.
    pub fn step(&mut self, net: &mut Mlp, grads: &Grads) {
        self.steps += 1;
        let t = self.steps as f64;
        let c1 = 1.0 - self.beta1.powf(t);
        let c2 = 1.0 - self.beta2.powf(t);
        let (b1, b2, lr, eps) = (self.beta1, self.beta2, self.lr, self.eps);
        let mut k = 0;
        for (l, layer) in net.layers.iter_mut().enumerate() {
            let params = layer.weights.iter_mut().chain(layer.bias.iter_mut());
            let gs = grads.weights[l].iter().chain(&grads.bias[l]);
            for (p, &g) in params.zip(gs) {
                let m = &mut self.first[k];
                let v = &mut self.second[k];
                *m = b1 * *m + (1.0 - b1) * g;
                *v = b2 * *v + (1.0 - b2) * g * g;
                *p -= lr * (*m / c1) / ((*v / c2).sqrt() + eps);
                k += 1;
            }
        }
    }
}
