//! Adaptive-moment gradient descent.

#[derive(Debug, Clone, Copy, PartialEq, serde::Serialize, serde::Deserialize)]
pub struct AdamConfig {
    pub learning_rate: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub epsilon: f64,
}

impl Default for AdamConfig {
    fn default() -> Self {
        Self {
            learning_rate: 1e-4,
            beta1: 0.9,
            beta2: 0.999,
            epsilon: 1e-8,
        }
    }
}

#[derive(Debug, Clone)]
pub struct Adam {
    config: AdamConfig,
    m: Vec<f64>,
    v: Vec<f64>,
    t: u64,
}

impl Adam {
    pub fn new(config: AdamConfig, param_count: usize) -> Self {
        Self {
            config,
            m: vec![0.0; param_count],
            v: vec![0.0; param_count],
            t: 0,
        }
    }

    pub fn step(&mut self, params: &mut [f64], grads: &[f64]) {
        assert_eq!(params.len(), grads.len());
        assert_eq!(params.len(), self.m.len());
        self.t += 1;
        let c = self.config;
        let bc1 = 1.0 - c.beta1.powi(self.t as i32);
        let bc2 = 1.0 - c.beta2.powi(self.t as i32);
        for i in 0..params.len() {
            self.m[i] = c.beta1 * self.m[i] + (1.0 - c.beta1) * grads[i];
            self.v[i] = c.beta2 * self.v[i] + (1.0 - c.beta2) * grads[i] * grads[i];
            let m_hat = self.m[i] / bc1;
            let v_hat = self.v[i] / bc2;
            params[i] -= c.learning_rate * m_hat / (v_hat.sqrt() + c.epsilon);
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn zero_learning_rate_leaves_params_unchanged() {
        let cfg = AdamConfig {
            learning_rate: 0.0,
            ..AdamConfig::default()
        };
        let mut adam = Adam::new(cfg, 3);
        let mut params = vec![1.0, -2.0, 0.5];
        adam.step(&mut params, &[10.0, -3.0, 0.1]);
        assert_eq!(params, vec![1.0, -2.0, 0.5]);
    }

    #[test]
    fn first_step_moves_by_roughly_learning_rate() {
        // With bias correction, step one moves each parameter by about lr in
        // the direction opposite the gradient.
        let mut adam = Adam::new(AdamConfig::default(), 2);
        let mut params = vec![0.0, 0.0];
        adam.step(&mut params, &[1.0, -1.0]);
        assert!((params[0] + 1e-4).abs() < 1e-8);
        assert!((params[1] - 1e-4).abs() < 1e-8);
    }

    #[test]
    fn converges_on_a_quadratic() {
        let mut adam = Adam::new(
            AdamConfig {
                learning_rate: 0.05,
                ..AdamConfig::default()
            },
            1,
        );
        let mut params = vec![3.0];
        for _ in 0..2000 {
            let grad = 2.0 * (params[0] - 1.0);
            adam.step(&mut params, &[grad]);
        }
        assert!((params[0] - 1.0).abs() < 1e-3);
    }
}
