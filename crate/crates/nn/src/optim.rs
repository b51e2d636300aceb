use crate::model::{AdamConfig, Model};

#[derive(Debug, Clone)]
pub struct Adam {
    config: AdamConfig,
    step: i32,
    m: Vec<Vec<f64>>,
    v: Vec<Vec<f64>>,
}

impl Adam {
    pub fn new(config: AdamConfig, model: &Model) -> Self {
        Self { config, step: 0, m: model.zero_grads(), v: model.zero_grads() }
    }

    pub fn steps(&self) -> i32 {
        self.step
    }

    /// One bias-corrected Adam update of every parameter.
    pub fn update(&mut self, model: &mut Model, grads: &[Vec<f64>]) {
        self.step += 1;
        let AdamConfig { learning_rate: lr, beta1: b1, beta2: b2, epsilon: eps } = self.config;
        let c1 = 1.0 - b1.powi(self.step);
        let c2 = 1.0 - b2.powi(self.step);
        for (((p, g), m), v) in model.params_mut().into_iter().zip(grads).zip(&mut self.m).zip(&mut self.v) {
            for i in 0..p.len() {
                m[i] = b1 * m[i] + (1.0 - b1) * g[i];
                v[i] = b2 * v[i] + (1.0 - b2) * g[i] * g[i];
                p[i] -= lr * (m[i] / c1) / ((v[i] / c2).sqrt() + eps);
            }
        }
    }
}
