//! Adam with bias correction.

use serde::{Deserialize, Serialize};

use crate::linalg::Matrix;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct AdamConfig {
    pub learning_rate: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub epsilon: f64,
}

impl Default for AdamConfig {
    fn default() -> Self {
        Self { learning_rate: 1e-4, beta1: 0.9, beta2: 0.999, epsilon: 1e-8 }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AdamState {
    pub config: AdamConfig,
    pub m: Vec<Vec<f64>>,
    pub v: Vec<Vec<f64>>,
    pub t: u64,
}

impl AdamState {
    /// Fresh moments sized to match `params`.
    pub fn new(config: AdamConfig, params: &[&Matrix]) -> Self {
        let m: Vec<Vec<f64>> = params.iter().map(|p| vec![0.0; p.data.len()]).collect();
        Self { config, v: m.clone(), m, t: 0 }
    }

    /// One update of every parameter from its gradient.
    pub fn step(&mut self, params: &mut [&mut Matrix], grads: &[Matrix]) {
        assert_eq!(params.len(), self.m.len(), "parameter count changed");
        assert_eq!(params.len(), grads.len(), "one gradient per parameter");
        self.t += 1;
        let AdamConfig { learning_rate, beta1, beta2, epsilon } = self.config;
        let bc1 = 1.0 - beta1.powi(self.t as i32);
        let bc2 = 1.0 - beta2.powi(self.t as i32);
        for (k, (p, g)) in params.iter_mut().zip(grads).enumerate() {
            assert_eq!(p.data.len(), g.data.len(), "gradient shape differs from parameter");
            let (m, v) = (&mut self.m[k], &mut self.v[k]);
            for i in 0..g.data.len() {
                let gi = g.data[i];
                m[i] = beta1 * m[i] + (1.0 - beta1) * gi;
                v[i] = beta2 * v[i] + (1.0 - beta2) * gi * gi;
                let m_hat = m[i] / bc1;
                let v_hat = v[i] / bc2;
                p.data[i] -= learning_rate * m_hat / (v_hat.sqrt() + epsilon);
            }
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn zero_gradient_is_a_no_op() {
        let mut p = Matrix::from_rows(&[[1.0, -2.0]]);
        let mut s = AdamState::new(AdamConfig::default(), &[&p]);
        s.step(&mut [&mut p], &[Matrix::zeros(1, 2)]);
        assert_eq!(p.data, vec![1.0, -2.0]);
    }

    #[test]
    fn first_step_moves_by_learning_rate() {
        let mut p = Matrix::from_rows(&[[0.5]]);
        let mut s = AdamState::new(AdamConfig::default(), &[&p]);
        s.step(&mut [&mut p], &[Matrix::from_rows(&[[1.0]])]);
        // m_hat = v_hat = 1, so the step is lr / (1 + eps).
        assert!((0.5 - p.data[0] - 1e-4 / (1.0 + 1e-8)).abs() < 1e-15);
    }

    #[test]
    fn three_steps_follow_scalar_recursion() {
        let cfg = AdamConfig::default();
        let mut p = Matrix::from_rows(&[[0.0]]);
        let mut s = AdamState::new(cfg, &[&p]);
        for _ in 0..3 {
            s.step(&mut [&mut p], &[Matrix::from_rows(&[[1.0]])]);
        }
        // Hand recursion with constant g = 1.
        let (mut m, mut v, mut x) = (0.0f64, 0.0f64, 0.0f64);
        for t in 1..=3 {
            m = 0.9 * m + 0.1;
            v = 0.999 * v + 0.001;
            let mh = m / (1.0 - 0.9f64.powi(t));
            let vh = v / (1.0 - 0.999f64.powi(t));
            x -= 1e-4 * mh / (vh.sqrt() + 1e-8);
        }
        assert!((p.data[0] - x).abs() < 1e-15);
        assert!((p.data[0] + 3e-4).abs() < 1e-10);
        assert_eq!(s.t, 3);
    }
}
