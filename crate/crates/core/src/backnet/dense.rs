use rand::Rng;

use crate::corpus::Label;
use crate::error::{Error, Result};
use crate::features::TRAINABLE_INIT_HALF_WIDTH;

/// Two-way softmax layer. `weights` is `K × 2` row-major; column 0 scores
/// FALSE, column 1 scores TRUE.
#[derive(Debug, Clone, PartialEq)]
pub struct DenseHead {
    pub input_dim: usize,
    pub weights: Vec<f64>,
    pub bias: [f64; 2],
}

/// Smallest probability fed to the logarithm in [`cross_entropy`].
pub const PROB_FLOOR: f64 = 1e-12;

impl DenseHead {
    pub fn new<R: Rng + ?Sized>(input_dim: usize, rng: &mut R) -> Self {
        let h = TRAINABLE_INIT_HALF_WIDTH;
        Self { input_dim, weights: (0..input_dim * 2).map(|_| rng.random_range(-h..h)).collect(), bias: [0.0; 2] }
    }

    pub fn zeros(input_dim: usize) -> Self {
        Self { input_dim, weights: vec![0.0; input_dim * 2], bias: [0.0; 2] }
    }

    pub fn logits(&self, v: &[f64]) -> Result<[f64; 2]> {
        if v.len() != self.input_dim {
            return Err(Error::Dimension(format!("dense head expects {} inputs, got {}", self.input_dim, v.len())));
        }
        let mut z = self.bias;
        for (k, &x) in v.iter().enumerate() {
            z[0] += self.weights[2 * k] * x;
            z[1] += self.weights[2 * k + 1] * x;
        }
        Ok(z)
    }

    /// Gradients of the head given `dlogits`; returns (head grads, input grad).
    pub fn backward(&self, v: &[f64], dlogits: [f64; 2]) -> (DenseHead, Vec<f64>) {
        let mut g = DenseHead::zeros(self.input_dim);
        g.bias = dlogits;
        let mut dv = vec![0.0; self.input_dim];
        for (k, &x) in v.iter().enumerate() {
            g.weights[2 * k] = x * dlogits[0];
            g.weights[2 * k + 1] = x * dlogits[1];
            dv[k] = self.weights[2 * k] * dlogits[0] + self.weights[2 * k + 1] * dlogits[1];
        }
        (g, dv)
    }

    pub fn tensors(&self) -> [&[f64]; 2] {
        [&self.weights, &self.bias]
    }

    pub fn tensors_mut(&mut self) -> [&mut [f64]; 2] {
        [&mut self.weights, &mut self.bias]
    }
}

pub fn softmax(z: [f64; 2]) -> [f64; 2] {
    let m = z[0].max(z[1]);
    let e = [(z[0] - m).exp(), (z[1] - m).exp()];
    let s = e[0] + e[1];
    [e[0] / s, e[1] / s]
}

pub fn dense_softmax(v: &[f64], head: &DenseHead) -> Result<[f64; 2]> {
    head.logits(v).map(softmax)
}

/// Negative log-likelihood of `label` and its gradient w.r.t. the logits
/// that produced `probs`.
pub fn cross_entropy(probs: [f64; 2], label: Label) -> (f64, [f64; 2]) {
    let li = label.index();
    let loss = -probs[li].max(PROB_FLOOR).ln();
    let mut grad = probs;
    grad[li] -= 1.0;
    (loss, grad)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::optim::finite_difference_check;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn zero_head_is_uniform() {
        let head = DenseHead::zeros(3);
        assert_eq!(dense_softmax(&[1.0, 2.0, 3.0], &head).unwrap(), [0.5, 0.5]);
    }

    #[test]
    fn softmax_of_log_three() {
        let p = softmax([0.0, 3f64.ln()]);
        assert!((p[0] - 0.25).abs() < 1e-15 && (p[1] - 0.75).abs() < 1e-15);
    }

    #[test]
    fn softmax_survives_large_logits() {
        let p = softmax([1000.0, 1001.0]);
        assert!(p.iter().all(|x| x.is_finite()));
        assert!((p[0] + p[1] - 1.0).abs() < 1e-12);
    }

    #[test]
    fn dimension_mismatch() {
        assert!(dense_softmax(&[1.0], &DenseHead::zeros(2)).is_err());
    }

    #[test]
    fn cross_entropy_values() {
        let (l, _) = cross_entropy([0.5, 0.5], Label::True);
        assert!((l - 2f64.ln()).abs() < 1e-15);
        let (l, _) = cross_entropy([0.25, 0.75], Label::True);
        assert!((l - 0.28768).abs() < 1e-5);
        let (_, g) = cross_entropy([0.5, 0.5], Label::False);
        assert_eq!(g, [-0.5, 0.5]);
        let (l, _) = cross_entropy([1.0, 0.0], Label::True);
        assert!((l - 27.631021115928547).abs() < 1e-9);
    }

    #[test]
    fn logit_gradient_matches_finite_differences() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        for _ in 0..50 {
            let z = [rng.random_range(-5.0..5.0), rng.random_range(-5.0..5.0)];
            let label = Label::from(rng.random_bool(0.5));
            let err = finite_difference_check(
                |p: &[f64]| {
                    let probs = softmax([p[0], p[1]]);
                    let (l, g) = cross_entropy(probs, label);
                    (l, g.to_vec())
                },
                &z,
                1e-5,
            );
            assert!(err < 1e-6, "{err}");
        }
    }

    proptest::proptest! {
        #[test]
        fn softmax_sums_to_one(v in proptest::collection::vec(-10.0f64..10.0, 4), seed in 0u64..100) {
            let head = DenseHead::new(4, &mut ChaCha8Rng::seed_from_u64(seed));
            let p = dense_softmax(&v, &head).unwrap();
            proptest::prop_assert!(p.iter().all(|&x| x >= 0.0));
            proptest::prop_assert!((p[0] + p[1] - 1.0).abs() < 1e-9);
        }
    }
}
