use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct AdamConfig {
    pub learning_rate: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub epsilon: f64,
}

impl Default for AdamConfig {
    fn default() -> Self {
        Self { learning_rate: 0.001, beta1: 0.9, beta2: 0.999, epsilon: 1e-8 }
    }
}

/// Moment buffers mirroring a list of parameter tensors.
#[derive(Debug, Clone, PartialEq)]
pub struct AdamState {
    pub config: AdamConfig,
    pub t: u64,
    m: Vec<Vec<f64>>,
    v: Vec<Vec<f64>>,
}

impl AdamState {
    pub fn new(config: AdamConfig, shapes: impl IntoIterator<Item = usize>) -> Self {
        let (m, v) = shapes.into_iter().map(|n| (vec![0.0; n], vec![0.0; n])).unzip();
        Self { config, t: 0, m, v }
    }

    /// One bias-corrected update of every tensor in `params`.
    pub fn step(&mut self, params: &mut [&mut [f64]], grads: &[Vec<f64>]) -> Result<()> {
        if params.len() != self.m.len() || grads.len() != self.m.len() {
            return Err(Error::Dimension(format!(
                "Adam tracks {} tensors, given {} params and {} grads",
                self.m.len(),
                params.len(),
                grads.len()
            )));
        }
        for (k, (p, g)) in params.iter().zip(grads).enumerate() {
            if p.len() != self.m[k].len() || g.len() != self.m[k].len() {
                return Err(Error::Dimension(format!(
                    "tensor {k}: state {} params {} grads {}",
                    self.m[k].len(),
                    p.len(),
                    g.len()
                )));
            }
        }
        self.t += 1;
        let AdamConfig { learning_rate: lr, beta1: b1, beta2: b2, epsilon: eps } = self.config;
        let c1 = 1.0 - b1.powi(self.t as i32);
        let c2 = 1.0 - b2.powi(self.t as i32);
        for (k, p) in params.iter_mut().enumerate() {
            let (m, v, g) = (&mut self.m[k], &mut self.v[k], &grads[k]);
            for i in 0..p.len() {
                m[i] = b1 * m[i] + (1.0 - b1) * g[i];
                v[i] = b2 * v[i] + (1.0 - b2) * g[i] * g[i];
                let m_hat = m[i] / c1;
                let v_hat = v[i] / c2;
                p[i] -= lr * m_hat / (v_hat.sqrt() + eps);
            }
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn one_param_step(p: &mut f64, g: f64, state: &mut AdamState) {
        let mut buf = [*p];
        state.step(&mut [&mut buf[..]], &[vec![g]]).unwrap();
        *p = buf[0];
    }

    #[test]
    fn first_step_is_a_unit_step() {
        let mut state = AdamState::new(AdamConfig::default(), [1]);
        let mut p = 1.0;
        one_param_step(&mut p, 2.0, &mut state);
        let expected = 1.0 - 0.001 * (2.0 / (2.0 + 1e-8));
        assert!((p - expected).abs() < 1e-15);
        assert!((p - 0.999).abs() < 1e-10);
        assert_eq!(state.t, 1);
    }

    #[test]
    fn zero_gradient_leaves_params() {
        let mut state = AdamState::new(AdamConfig::default(), [3]);
        let mut p = [0.5, -1.0, 2.0];
        state.step(&mut [&mut p[..]], &[vec![0.0; 3]]).unwrap();
        assert_eq!(p, [0.5, -1.0, 2.0]);
        assert_eq!(state.t, 1);
    }

    #[test]
    fn constant_gradient_decreases_monotonically() {
        // hand recurrence: m1=0.2, v1=0.004 → step 0.001; m2=0.38, v2=0.007996
        // → m̂=0.38/0.19=2, v̂=0.007996/0.001999=4 → step 0.001 again
        let mut state = AdamState::new(AdamConfig::default(), [1]);
        let mut p = 1.0;
        one_param_step(&mut p, 2.0, &mut state);
        let after_one = p;
        one_param_step(&mut p, 2.0, &mut state);
        assert!(after_one < 1.0 && p < after_one);
        assert!((p - (1.0 - 2.0 * 0.001 * 2.0 / (2.0 + 1e-8))).abs() < 1e-12);
    }

    #[test]
    fn shape_mismatch_rejected() {
        let mut state = AdamState::new(AdamConfig::default(), [2]);
        let mut p = [0.0; 3];
        assert!(state.step(&mut [&mut p[..]], &[vec![0.0; 3]]).is_err());
    }
}
