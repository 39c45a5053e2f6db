//! Adam optimizer over a flat parameter vector (bias-corrected moments).

use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct Adam {
    pub lr: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub eps: f64,
    step: u64,
    m: Vec<f64>,
    v: Vec<f64>,
}

impl Adam {
    pub fn new(lr: f64, param_count: usize) -> Self {
        Adam {
            lr,
            beta1: 0.9,
            beta2: 0.999,
            eps: 1e-8,
            step: 0,
            m: vec![0.0; param_count],
            v: vec![0.0; param_count],
        }
    }

    pub fn step_count(&self) -> u64 {
        self.step
    }

    /// One Adam update. `params` and `grads` must match the moment shape.
    pub fn step(&mut self, params: &mut [f64], grads: &[f64]) {
        assert_eq!(params.len(), self.m.len(), "parameter count mismatch");
        assert_eq!(grads.len(), self.m.len(), "gradient count mismatch");
        self.step += 1;
        let t = self.step as i32;
        let bc1 = 1.0 - self.beta1.powi(t);
        let bc2 = 1.0 - self.beta2.powi(t);
        for i in 0..params.len() {
            let g = grads[i];
            self.m[i] = self.beta1 * self.m[i] + (1.0 - self.beta1) * g;
            self.v[i] = self.beta2 * self.v[i] + (1.0 - self.beta2) * g * g;
            let m_hat = self.m[i] / bc1;
            let v_hat = self.v[i] / bc2;
            params[i] -= self.lr * m_hat / (v_hat.sqrt() + self.eps);
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn zero_gradient_leaves_params_unchanged() {
        let mut adam = Adam::new(0.1, 3);
        let mut p = vec![1.0, -2.0, 0.5];
        adam.step(&mut p.clone(), &[0.0; 3]);
        let before = p.clone();
        adam.step(&mut p, &[0.0; 3]);
        assert_eq!(p, before);
        assert_eq!(adam.step_count(), 2);
    }

    #[test]
    fn first_step_moves_by_learning_rate_against_gradient() {
        // With zero moments, bias correction makes the first update
        // exactly lr * g / (|g| + eps') ~= lr * sign(g).
        let mut adam = Adam::new(0.05, 2);
        let mut p = vec![0.0, 0.0];
        adam.step(&mut p, &[3.0, -0.2]);
        assert!((p[0] + 0.05).abs() < 1e-6, "p[0] = {}", p[0]);
        assert!((p[1] - 0.05).abs() < 1e-6, "p[1] = {}", p[1]);
    }

    /// Straight-line reference Adam minimizing (p - 3)^2, written
    /// independently of the implementation above.
    fn reference_adam_on_quadratic(lr: f64, steps: usize) -> f64 {
        let (b1, b2, eps) = (0.9, 0.999, 1e-8);
        let (mut m, mut v, mut p) = (0.0, 0.0, 0.0_f64);
        for t in 1..=steps as i32 {
            let g = 2.0 * (p - 3.0);
            m = b1 * m + (1.0 - b1) * g;
            v = b2 * v + (1.0 - b2) * g * g;
            let mh = m / (1.0 - b1.powi(t));
            let vh = v / (1.0 - b2.powi(t));
            p -= lr * mh / (vh.sqrt() + eps);
        }
        p
    }

    #[test]
    fn quadratic_loss_converges_and_matches_reference() {
        // Minimize (p - 3)^2 from p = 0 with lr 0.1 for 100 steps.
        let mut adam = Adam::new(0.1, 1);
        let mut p = vec![0.0];
        for _ in 0..100 {
            let g = 2.0 * (p[0] - 3.0);
            adam.step(&mut p, &[g]);
        }
        let ref_p = reference_adam_on_quadratic(0.1, 100);
        assert!((p[0] - 3.0).abs() < 0.1, "p = {}", p[0]);
        assert!((p[0] - ref_p).abs() < 1e-12, "impl {} vs reference {ref_p}", p[0]);
    }
}
