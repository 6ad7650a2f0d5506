use serde::{Deserialize, Serialize};

/// First and second moment estimates with bias correction.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AdamState {
    pub m: Vec<f64>,
    pub v: Vec<f64>,
    pub step: u64,
    pub beta1: f64,
    pub beta2: f64,
    pub eps: f64,
}

impl AdamState {
    pub fn new(n: usize) -> Self {
        Self::with_betas(n, 0.9, 0.999, 1e-8)
    }

    pub fn with_betas(n: usize, beta1: f64, beta2: f64, eps: f64) -> Self {
        Self {
            m: vec![0.0; n],
            v: vec![0.0; n],
            step: 0,
            beta1,
            beta2,
            eps,
        }
    }

    /// One update of `theta` in place.
    pub fn step(&mut self, theta: &mut [f64], grads: &[f64], lr: f64) {
        assert_eq!(theta.len(), self.m.len(), "adam state size");
        assert_eq!(grads.len(), self.m.len(), "gradient size");
        self.step += 1;
        let (b1, b2) = (self.beta1, self.beta2);
        let c1 = 1.0 - b1.powi(self.step as i32);
        let c2 = 1.0 - b2.powi(self.step as i32);
        for (((th, &g), m), v) in theta.iter_mut().zip(grads).zip(&mut self.m).zip(&mut self.v) {
            *m = b1 * *m + (1.0 - b1) * g;
            *v = b2 * *v + (1.0 - b2) * g * g;
            let m_hat = *m / c1;
            let v_hat = *v / c2;
            *th -= lr * m_hat / (v_hat.sqrt() + self.eps);
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn zero_gradient_leaves_theta() {
        let mut s = AdamState::new(3);
        let mut th = [1.0, -2.0, 0.5];
        s.step(&mut th, &[0.0; 3], 1e-3);
        assert_eq!(th, [1.0, -2.0, 0.5]);
        assert_eq!(s.step, 1);
    }

    #[test]
    fn single_step_closed_form() {
        let mut s = AdamState::new(1);
        let mut th = [0.0];
        s.step(&mut th, &[1.0], 0.001);
        assert!((th[0] - (-0.001 / (1.0 + 1e-8))).abs() < 1e-18);
        assert!((th[0] + 0.000999999990).abs() < 1e-14);
    }

    #[test]
    fn three_steps_hand_unrolled() {
        let (g, lr) = (0.3, 0.01);
        let mut s = AdamState::new(1);
        let mut th = [0.2];
        for _ in 0..3 {
            s.step(&mut th, &[g], lr);
        }
        let (mut m, mut v, mut x) = (0.0f64, 0.0f64, 0.2f64);
        for t in 1..=3 {
            m = 0.9 * m + 0.1 * g;
            v = 0.999 * v + 0.001 * g * g;
            let mh = m / (1.0 - 0.9f64.powi(t));
            let vh = v / (1.0 - 0.999f64.powi(t));
            x -= lr * mh / (vh.sqrt() + 1e-8);
        }
        assert!((th[0] - x).abs() < 1e-12);
        // constant gradient: every bias-corrected step is lr * g/(|g|+eps)
        assert!((th[0] - (0.2 - 3.0 * lr * g / (g + 1e-8))).abs() < 1e-12);
    }
}
