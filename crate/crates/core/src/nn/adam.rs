use serde::{Deserialize, Serialize};

use super::graph::{Gradients, ParamStore, Tensor};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct AdamConfig {
    pub lr: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub eps: f64,
}

impl Default for AdamConfig {
    fn default() -> Self {
        Self {
            lr: 1e-3,
            beta1: 0.9,
            beta2: 0.999,
            eps: 1e-8,
        }
    }
}

/// Adam with bias-corrected moment estimates.
#[derive(Debug, Clone)]
pub struct Adam {
    pub config: AdamConfig,
    step: u64,
    m: Vec<Tensor>,
    v: Vec<Tensor>,
}

impl Adam {
    pub fn new(config: AdamConfig, params: &ParamStore) -> Self {
        let zeros = || {
            params
                .tensors()
                .iter()
                .map(|t| Tensor::zeros(t.raw_dim()))
                .collect()
        };
        Self {
            config,
            step: 0,
            m: zeros(),
            v: zeros(),
        }
    }

    pub fn steps(&self) -> u64 {
        self.step
    }

    pub fn step(&mut self, params: &mut ParamStore, grads: &Gradients) {
        let AdamConfig { lr, beta1, beta2, eps } = self.config;
        self.step += 1;
        let c1 = 1.0 - beta1.powi(self.step as i32);
        let c2 = 1.0 - beta2.powi(self.step as i32);
        let iter = params
            .tensors_mut()
            .iter_mut()
            .zip(grads.tensors())
            .zip(self.m.iter_mut().zip(self.v.iter_mut()));
        for ((p, g), (m, v)) in iter {
            ndarray::Zip::from(p)
                .and(g)
                .and(m)
                .and(v)
                .for_each(|p, &g, m, v| {
                    *m = beta1 * *m + (1.0 - beta1) * g;
                    *v = beta2 * *v + (1.0 - beta2) * g * g;
                    let m_hat = *m / c1;
                    let v_hat = *v / c2;
                    *p -= lr * m_hat / (v_hat.sqrt() + eps);
                });
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::nn::graph::Graph;

    fn quadratic(store: &ParamStore) -> (f64, Gradients) {
        let mut g = Graph::new(store);
        let id = store.id_of("x").unwrap();
        let x = g.param(id);
        let sq = g.mul(x, x);
        let loss = g.sum(&[sq]);
        let ones = g.constant(Tensor::ones((2, 1)));
        let loss = g.matmul(loss, ones);
        (g.scalar(loss), g.backward(loss))
    }

    #[test]
    fn zero_learning_rate_leaves_parameters() {
        let mut store = ParamStore::new();
        store.add("x", Tensor::from_elem((1, 2), 0.7));
        let before = store.tensors().to_vec();
        let mut adam = Adam::new(AdamConfig { lr: 0.0, ..Default::default() }, &store);
        let (_, grads) = quadratic(&store);
        adam.step(&mut store, &grads);
        assert_eq!(store.tensors(), &before[..]);
    }

    #[test]
    fn first_step_moves_by_learning_rate() {
        let mut store = ParamStore::new();
        store.add("x", Tensor::from_elem((1, 2), 0.7));
        let mut adam = Adam::new(AdamConfig { lr: 0.01, ..Default::default() }, &store);
        let (_, grads) = quadratic(&store);
        adam.step(&mut store, &grads);
        for &x in store.tensors()[0].iter() {
            assert!((x - 0.69).abs() < 1e-6);
        }
    }

    #[test]
    fn minimizes_a_quadratic() {
        let mut store = ParamStore::new();
        store.add("x", Tensor::from_elem((1, 2), 2.0));
        let mut adam = Adam::new(AdamConfig { lr: 0.1, ..Default::default() }, &store);
        let (first, _) = quadratic(&store);
        for _ in 0..300 {
            let (_, grads) = quadratic(&store);
            adam.step(&mut store, &grads);
        }
        let (last, _) = quadratic(&store);
        assert!(last < first * 1e-3, "{first} -> {last}");
    }
}
